//! Many-sorted first-order terms, declarations and scripts.
//!
//! The fragment is deliberately small: integers, booleans, arrays and
//! record-like datatypes, with quantifiers over explicitly sorted binders.
//! There is no `let` and no `ite`.

mod parse;
mod render;

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

pub use parse::{parse_term, TermParseError};
pub use render::{render_command, render_smtlib, render_smtlib_with, render_term, Dialect};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Sort {
    Int,
    Bool,
    Array(Box<Sort>, Box<Sort>),
    /// Reference to a datatype declared in the enclosing script.
    Datatype(String),
}

impl Sort {
    pub fn array(index: Sort, value: Sort) -> Sort {
        Sort::Array(Box::new(index), Box::new(value))
    }

    pub fn datatype(name: impl Into<String>) -> Sort {
        Sort::Datatype(name.into())
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("Int"),
            Sort::Bool => f.write_str("Bool"),
            Sort::Array(i, v) => write!(f, "(Array {i} {v})"),
            Sort::Datatype(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constructor {
    pub name: String,
    /// `(selector, sort)` pairs.
    pub fields: Vec<(String, Sort)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatatypeDecl {
    pub name: String,
    pub constructors: Vec<Constructor>,
}

/// Integer comparison other than equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithCmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl ArithCmp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithCmp::Lt => "<",
            ArithCmp::Le => "<=",
            ArithCmp::Gt => ">",
            ArithCmp::Ge => ">=",
        }
    }
}

pub type Binder = (String, Sort);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Int(BigInt),
    Bool(bool),
    /// Bound variable or declared constant.
    Var(String),
    /// Application of a declared function, constructor or selector.
    App(String, Vec<Term>),
    Select(Box<Term>, Box<Term>),
    Store(Box<Term>, Box<Term>, Box<Term>),
    Add(Vec<Term>),
    /// Left-associative subtraction; a single argument is negation.
    Sub(Vec<Term>),
    Eq(Box<Term>, Box<Term>),
    Cmp(ArithCmp, Box<Term>, Box<Term>),
    Not(Box<Term>),
    And(Vec<Term>),
    Or(Vec<Term>),
    Implies(Box<Term>, Box<Term>),
    Forall(Vec<Binder>, Box<Term>),
    Exists(Vec<Binder>, Box<Term>),
}

impl Term {
    pub fn int(v: impl Into<BigInt>) -> Term {
        Term::Int(v.into())
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn app(f: impl Into<String>, args: Vec<Term>) -> Term {
        Term::App(f.into(), args)
    }

    pub fn select(array: Term, index: Term) -> Term {
        Term::Select(Box::new(array), Box::new(index))
    }

    pub fn store(array: Term, index: Term, value: Term) -> Term {
        Term::Store(Box::new(array), Box::new(index), Box::new(value))
    }

    pub fn eq(self, rhs: Term) -> Term {
        Term::Eq(Box::new(self), Box::new(rhs))
    }

    pub fn cmp(self, op: ArithCmp, rhs: Term) -> Term {
        Term::Cmp(op, Box::new(self), Box::new(rhs))
    }

    pub fn lt(self, rhs: Term) -> Term {
        self.cmp(ArithCmp::Lt, rhs)
    }

    pub fn le(self, rhs: Term) -> Term {
        self.cmp(ArithCmp::Le, rhs)
    }

    pub fn gt(self, rhs: Term) -> Term {
        self.cmp(ArithCmp::Gt, rhs)
    }

    pub fn ge(self, rhs: Term) -> Term {
        self.cmp(ArithCmp::Ge, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Term {
        Term::Not(Box::new(self))
    }

    pub fn implies(self, rhs: Term) -> Term {
        Term::Implies(Box::new(self), Box::new(rhs))
    }

    pub fn and(terms: Vec<Term>) -> Term {
        Term::And(terms)
    }

    pub fn or(terms: Vec<Term>) -> Term {
        Term::Or(terms)
    }

    pub fn forall(binders: Vec<Binder>, body: Term) -> Term {
        Term::Forall(binders, Box::new(body))
    }

    pub fn exists(binders: Vec<Binder>, body: Term) -> Term {
        Term::Exists(binders, Box::new(body))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    DeclareDatatype(DatatypeDecl),
    DeclareFun {
        name: String,
        args: Vec<Sort>,
        ret: Sort,
    },
    DeclareConst {
        name: String,
        sort: Sort,
    },
    Assert(Term),
}

impl Command {
    pub fn is_declaration(&self) -> bool {
        !matches!(self, Command::Assert(_))
    }
}

/// Ordered declarations and assertions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    pub commands: Vec<Command>,
}

impl Script {
    pub fn new() -> Self {
        Script::default()
    }

    pub fn push(&mut self, cmd: Command) -> &mut Self {
        self.commands.push(cmd);
        self
    }

    pub fn declare_datatype(&mut self, decl: DatatypeDecl) -> &mut Self {
        self.push(Command::DeclareDatatype(decl))
    }

    pub fn declare_fun(&mut self, name: impl Into<String>, args: Vec<Sort>, ret: Sort) -> &mut Self {
        self.push(Command::DeclareFun {
            name: name.into(),
            args,
            ret,
        })
    }

    pub fn declare_const(&mut self, name: impl Into<String>, sort: Sort) -> &mut Self {
        self.push(Command::DeclareConst {
            name: name.into(),
            sort,
        })
    }

    pub fn assert(&mut self, t: Term) -> &mut Self {
        self.push(Command::Assert(t))
    }

    pub fn assertions(&self) -> impl Iterator<Item = &Term> {
        self.commands.iter().filter_map(|c| match c {
            Command::Assert(t) => Some(t),
            _ => None,
        })
    }

    /// Copy of the script keeping only declarations.
    pub fn declarations_only(&self) -> Script {
        Script {
            commands: self
                .commands
                .iter()
                .filter(|c| c.is_declaration())
                .cloned()
                .collect(),
        }
    }

    /// Copy of the script keeping only assertions.
    pub fn assertions_only(&self) -> Script {
        Script {
            commands: self
                .commands
                .iter()
                .filter(|c| !c.is_declaration())
                .cloned()
                .collect(),
        }
    }

    pub fn extend(&mut self, other: Script) -> &mut Self {
        self.commands.extend(other.commands);
        self
    }
}

/// Location of an ill-sorted sub-term plus a description.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}: {message}", path.join(" > "))]
pub struct SortError {
    pub path: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunSig {
    pub args: Vec<Sort>,
    pub ret: Sort,
}

/// Symbols in scope: declared datatypes, functions and constants (constants
/// are zero-argument functions).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    datatypes: HashMap<String, DatatypeDecl>,
    funs: HashMap<String, FunSig>,
}

const RESERVED_WORDS: &[&str] = &[
    "_", "!", "as", "let", "exists", "forall", "match", "par", "assert", "check-sat",
    "declare-const", "declare-datatypes", "declare-fun", "define-fun", "echo", "exit",
    "get-model", "pop", "push", "set-option", "set-logic", "true", "false", "and", "or", "not",
    "=>", "=", "<", "<=", ">", ">=", "+", "-", "*", "select", "store", "distinct", "ite", "Int",
    "Bool", "Array", "Real",
];

pub(crate) fn is_reserved_word(name: &str) -> bool {
    RESERVED_WORDS.contains(&name)
}

fn err(path: &[String], message: impl Into<String>) -> SortError {
    SortError {
        path: path.to_vec(),
        message: message.into(),
    }
}

impl Signature {
    pub fn new() -> Self {
        Signature::default()
    }

    pub fn fun(&self, name: &str) -> Option<&FunSig> {
        self.funs.get(name)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.funs.contains_key(name) || self.datatypes.contains_key(name)
    }

    fn check_symbol(&self, name: &str, path: &[String]) -> Result<(), SortError> {
        if !crate::model::is_simple_symbol(name) || is_reserved_word(name) {
            return Err(err(path, format!("`{name}` is not a valid symbol")));
        }
        if self.is_declared(name) {
            return Err(err(path, format!("`{name}` declared twice")));
        }
        Ok(())
    }

    fn check_sort(&self, sort: &Sort, path: &[String]) -> Result<(), SortError> {
        match sort {
            Sort::Int | Sort::Bool => Ok(()),
            Sort::Array(i, v) => {
                self.check_sort(i, path)?;
                self.check_sort(v, path)
            }
            Sort::Datatype(name) if self.datatypes.contains_key(name) => Ok(()),
            Sort::Datatype(name) => Err(err(path, format!("unknown sort `{name}`"))),
        }
    }

    /// Checks one command and, for declarations, adds its symbols.
    pub fn admit(&mut self, cmd: &Command, path: &[String]) -> Result<(), SortError> {
        match cmd {
            Command::DeclareDatatype(decl) => {
                self.check_symbol(&decl.name, path)?;
                if decl.constructors.is_empty() {
                    return Err(err(path, format!("datatype `{}` has no constructors", decl.name)));
                }
                // Self-reference is allowed in field sorts.
                let mut next = self.clone();
                next.datatypes.insert(decl.name.clone(), decl.clone());
                let own = Sort::Datatype(decl.name.clone());
                for c in &decl.constructors {
                    next.check_symbol(&c.name, path)?;
                    next.funs.insert(
                        c.name.clone(),
                        FunSig {
                            args: c.fields.iter().map(|(_, s)| s.clone()).collect(),
                            ret: own.clone(),
                        },
                    );
                    for (sel, sort) in &c.fields {
                        next.check_sort(sort, path)?;
                        next.check_symbol(sel, path)?;
                        next.funs.insert(
                            sel.clone(),
                            FunSig {
                                args: vec![own.clone()],
                                ret: sort.clone(),
                            },
                        );
                    }
                }
                *self = next;
                Ok(())
            }
            Command::DeclareFun { name, args, ret } => {
                self.check_symbol(name, path)?;
                for s in args.iter().chain(std::iter::once(ret)) {
                    self.check_sort(s, path)?;
                }
                self.funs.insert(
                    name.clone(),
                    FunSig {
                        args: args.clone(),
                        ret: ret.clone(),
                    },
                );
                Ok(())
            }
            Command::DeclareConst { name, sort } => {
                self.check_symbol(name, path)?;
                self.check_sort(sort, path)?;
                self.funs.insert(
                    name.clone(),
                    FunSig {
                        args: vec![],
                        ret: sort.clone(),
                    },
                );
                Ok(())
            }
            Command::Assert(t) => self.check_formula(t, path.to_vec()),
        }
    }

    /// Checks that `t` is a closed, well-sorted Bool term.
    pub fn check_formula(&self, t: &Term, path: Vec<String>) -> Result<(), SortError> {
        let mut cx = SortCx {
            sig: self,
            bound: Vec::new(),
            path,
        };
        let s = cx.sort_of(t)?;
        if s != Sort::Bool {
            return Err(err(&cx.path, format!("expected Bool at top level, found {s}")));
        }
        Ok(())
    }

    /// Sort of a closed term.
    pub fn sort_of(&self, t: &Term) -> Result<Sort, SortError> {
        SortCx {
            sig: self,
            bound: Vec::new(),
            path: Vec::new(),
        }
        .sort_of(t)
    }
}

struct SortCx<'a> {
    sig: &'a Signature,
    bound: Vec<Binder>,
    path: Vec<String>,
}

impl SortCx<'_> {
    fn at<T>(&mut self, step: String, f: impl FnOnce(&mut Self) -> T) -> T {
        self.path.push(step);
        let r = f(self);
        self.path.pop();
        r
    }

    fn expect(&mut self, t: &Term, want: &Sort, step: String) -> Result<(), SortError> {
        self.at(step, |cx| {
            let got = cx.sort_of(t)?;
            if &got != want {
                return Err(err(&cx.path, format!("expected {want}, found {got}")));
            }
            Ok(())
        })
    }

    fn all(&mut self, head: &str, ts: &[Term], want: &Sort) -> Result<(), SortError> {
        for (i, t) in ts.iter().enumerate() {
            self.expect(t, want, format!("{head}[{i}]"))?;
        }
        Ok(())
    }

    fn sort_of(&mut self, t: &Term) -> Result<Sort, SortError> {
        match t {
            Term::Int(_) => Ok(Sort::Int),
            Term::Bool(_) => Ok(Sort::Bool),
            Term::Var(name) => {
                if let Some((_, s)) = self.bound.iter().rev().find(|(n, _)| n == name) {
                    return Ok(s.clone());
                }
                match self.sig.fun(name) {
                    Some(sig) if sig.args.is_empty() => Ok(sig.ret.clone()),
                    Some(sig) => Err(err(
                        &self.path,
                        format!("`{name}` expects {} argument(s)", sig.args.len()),
                    )),
                    None => Err(err(&self.path, format!("unknown symbol `{name}`"))),
                }
            }
            Term::App(f, args) => {
                let Some(sig) = self.sig.fun(f) else {
                    return Err(err(&self.path, format!("unknown function `{f}`")));
                };
                if sig.args.len() != args.len() {
                    return Err(err(
                        &self.path,
                        format!("`{f}` expects {} argument(s), got {}", sig.args.len(), args.len()),
                    ));
                }
                for (i, (a, want)) in args.iter().zip(&sig.args).enumerate() {
                    self.expect(a, want, format!("{f}[{i}]"))?;
                }
                Ok(sig.ret.clone())
            }
            Term::Select(a, i) => {
                let (idx, val) = self.array_parts(a, "select[0]")?;
                self.expect(i, &idx, "select[1]".into())?;
                Ok(val)
            }
            Term::Store(a, i, v) => {
                let (idx, val) = self.array_parts(a, "store[0]")?;
                self.expect(i, &idx, "store[1]".into())?;
                self.expect(v, &val, "store[2]".into())?;
                Ok(Sort::array(idx, val))
            }
            Term::Add(ts) | Term::Sub(ts) => {
                let head = if matches!(t, Term::Add(_)) { "+" } else { "-" };
                if ts.is_empty() {
                    return Err(err(&self.path, format!("`{head}` needs arguments")));
                }
                self.all(head, ts, &Sort::Int)?;
                Ok(Sort::Int)
            }
            Term::Eq(a, b) => {
                let lhs = self.at("=[0]".into(), |cx| cx.sort_of(a))?;
                self.expect(b, &lhs, "=[1]".into())?;
                Ok(Sort::Bool)
            }
            Term::Cmp(op, a, b) => {
                self.expect(a, &Sort::Int, format!("{}[0]", op.symbol()))?;
                self.expect(b, &Sort::Int, format!("{}[1]", op.symbol()))?;
                Ok(Sort::Bool)
            }
            Term::Not(a) => {
                self.expect(a, &Sort::Bool, "not[0]".into())?;
                Ok(Sort::Bool)
            }
            Term::And(ts) => {
                self.all("and", ts, &Sort::Bool)?;
                Ok(Sort::Bool)
            }
            Term::Or(ts) => {
                self.all("or", ts, &Sort::Bool)?;
                Ok(Sort::Bool)
            }
            Term::Implies(a, b) => {
                self.expect(a, &Sort::Bool, "=>[0]".into())?;
                self.expect(b, &Sort::Bool, "=>[1]".into())?;
                Ok(Sort::Bool)
            }
            Term::Forall(bs, body) | Term::Exists(bs, body) => {
                let head = if matches!(t, Term::Forall(..)) { "forall" } else { "exists" };
                if bs.is_empty() {
                    return Err(err(&self.path, format!("`{head}` without binders")));
                }
                for (name, sort) in bs {
                    if !crate::model::is_simple_symbol(name) || is_reserved_word(name) {
                        return Err(err(&self.path, format!("`{name}` is not a valid binder")));
                    }
                    self.sig.check_sort(sort, &self.path)?;
                }
                let depth = self.bound.len();
                self.bound.extend(bs.iter().cloned());
                let r = self.expect(body, &Sort::Bool, head.to_string());
                self.bound.truncate(depth);
                r?;
                Ok(Sort::Bool)
            }
        }
    }

    fn array_parts(&mut self, a: &Term, step: &str) -> Result<(Sort, Sort), SortError> {
        self.at(step.to_string(), |cx| match cx.sort_of(a)? {
            Sort::Array(i, v) => Ok((*i, *v)),
            other => Err(err(&cx.path, format!("expected an array, found {other}"))),
        })
    }
}

/// Checks that every declaration is fresh and precedes its uses, and that
/// every assertion is a well-sorted Bool term.
pub fn sort_check(script: &Script) -> Result<Signature, SortError> {
    let mut sig = Signature::new();
    sort_check_in(&mut sig, script)?;
    Ok(sig)
}

/// Like [`sort_check`] but starting from existing declarations; `sig` is
/// extended with the script's declarations only if the whole script passes.
pub fn sort_check_in(sig: &mut Signature, script: &Script) -> Result<(), SortError> {
    let mut next = sig.clone();
    for (i, cmd) in script.commands.iter().enumerate() {
        let step = match cmd {
            Command::Assert(_) => format!("command[{i}] assert"),
            Command::DeclareDatatype(d) => format!("command[{i}] datatype {}", d.name),
            Command::DeclareFun { name, .. } | Command::DeclareConst { name, .. } => {
                format!("command[{i}] {name}")
            }
        };
        next.admit(cmd, &[step])?;
    }
    *sig = next;
    Ok(())
}
