//! SMT-LIB v2 text output.

use num_traits::Signed;

use super::{Command, DatatypeDecl, Script, Sort, Term};

/// Assertions longer than this are broken over several lines.
const WIDTH: usize = 80;

/// Concrete syntax for datatype declarations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Dialect {
    /// z3's legacy form: `(declare-datatypes () ((Edge (mk-edge ...))))`,
    /// with datatype argument sorts written `((Edge))` in `declare-fun`.
    #[default]
    Legacy,
    /// SMT-LIB 2.6: `(declare-datatypes ((Edge 0)) (((mk-edge ...))))`.
    Standard,
}

#[derive(Debug, Clone)]
enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

fn atom(s: impl Into<String>) -> SExpr {
    SExpr::Atom(s.into())
}

fn list(items: Vec<SExpr>) -> SExpr {
    SExpr::List(items)
}

impl SExpr {
    fn flat(&self, out: &mut String) {
        match self {
            SExpr::Atom(a) => out.push_str(a),
            SExpr::List(items) => {
                out.push('(');
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    it.flat(out);
                }
                out.push(')');
            }
        }
    }

    fn flat_string(&self) -> String {
        let mut s = String::new();
        self.flat(&mut s);
        s
    }

    /// Writes `self` assuming the cursor sits at column `indent`.
    fn pretty(&self, indent: usize, out: &mut String) {
        let flat = self.flat_string();
        let items = match self {
            SExpr::List(items) if indent + flat.len() > WIDTH && items.len() > 1 => items,
            _ => {
                out.push_str(&flat);
                return;
            }
        };
        // Quantifier binders stay on the head line.
        let inline = match &items[0] {
            SExpr::Atom(h) if h == "forall" || h == "exists" => 2,
            _ => 1,
        };
        out.push('(');
        for (i, it) in items[..inline].iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            it.flat(out);
        }
        for it in &items[inline..] {
            out.push('\n');
            out.extend(std::iter::repeat_n(' ', indent + 2));
            it.pretty(indent + 2, out);
        }
        out.push(')');
    }
}

fn sort_sexpr(s: &Sort) -> SExpr {
    match s {
        Sort::Int => atom("Int"),
        Sort::Bool => atom("Bool"),
        Sort::Array(i, v) => list(vec![atom("Array"), sort_sexpr(i), sort_sexpr(v)]),
        Sort::Datatype(n) => atom(n.clone()),
    }
}

fn binders(bs: &[(String, Sort)]) -> SExpr {
    list(
        bs.iter()
            .map(|(n, s)| list(vec![atom(n.clone()), sort_sexpr(s)]))
            .collect(),
    )
}

fn app(head: &str, args: &[Term]) -> SExpr {
    let mut items = Vec::with_capacity(args.len() + 1);
    items.push(atom(head));
    items.extend(args.iter().map(term_sexpr));
    list(items)
}

fn term_sexpr(t: &Term) -> SExpr {
    match t {
        Term::Int(n) if n.is_negative() => list(vec![atom("-"), atom((-n).to_string())]),
        Term::Int(n) => atom(n.to_string()),
        Term::Bool(b) => atom(b.to_string()),
        Term::Var(v) => atom(v.clone()),
        Term::App(f, args) if args.is_empty() => atom(f.clone()),
        Term::App(f, args) => app(f, args),
        Term::Select(a, i) => list(vec![atom("select"), term_sexpr(a), term_sexpr(i)]),
        Term::Store(a, i, v) => list(vec![
            atom("store"),
            term_sexpr(a),
            term_sexpr(i),
            term_sexpr(v),
        ]),
        Term::Add(ts) if ts.len() == 1 => term_sexpr(&ts[0]),
        Term::Add(ts) => app("+", ts),
        Term::Sub(ts) => app("-", ts),
        Term::Eq(a, b) => list(vec![atom("="), term_sexpr(a), term_sexpr(b)]),
        Term::Cmp(op, a, b) => list(vec![atom(op.symbol()), term_sexpr(a), term_sexpr(b)]),
        Term::Not(a) => list(vec![atom("not"), term_sexpr(a)]),
        Term::And(ts) => match ts.len() {
            0 => atom("true"),
            1 => term_sexpr(&ts[0]),
            _ => app("and", ts),
        },
        Term::Or(ts) => match ts.len() {
            0 => atom("false"),
            1 => term_sexpr(&ts[0]),
            _ => app("or", ts),
        },
        Term::Implies(a, b) => list(vec![atom("=>"), term_sexpr(a), term_sexpr(b)]),
        Term::Forall(bs, body) => list(vec![atom("forall"), binders(bs), term_sexpr(body)]),
        Term::Exists(bs, body) => list(vec![atom("exists"), binders(bs), term_sexpr(body)]),
    }
}

fn datatype_sexpr(d: &DatatypeDecl, dialect: Dialect) -> SExpr {
    let ctors: Vec<SExpr> = d
        .constructors
        .iter()
        .map(|c| {
            let mut items = vec![atom(c.name.clone())];
            items.extend(
                c.fields
                    .iter()
                    .map(|(sel, s)| list(vec![atom(sel.clone()), sort_sexpr(s)])),
            );
            list(items)
        })
        .collect();
    match dialect {
        Dialect::Legacy => {
            let mut body = vec![atom(d.name.clone())];
            body.extend(ctors);
            list(vec![
                atom("declare-datatypes"),
                list(vec![]),
                list(vec![list(body)]),
            ])
        }
        Dialect::Standard => list(vec![
            atom("declare-datatypes"),
            list(vec![list(vec![atom(d.name.clone()), atom("0")])]),
            list(vec![list(ctors)]),
        ]),
    }
}

/// Renders a term on one line.
pub fn render_term(t: &Term) -> String {
    term_sexpr(t).flat_string()
}

/// Renders one command, without the trailing newline.
pub fn render_command(cmd: &Command, dialect: Dialect) -> String {
    match cmd {
        Command::DeclareDatatype(d) => datatype_sexpr(d, dialect).flat_string(),
        Command::DeclareFun { name, args, ret } => {
            let args = args
                .iter()
                .map(|s| match (s, dialect) {
                    (Sort::Datatype(_), Dialect::Legacy) => list(vec![sort_sexpr(s)]),
                    _ => sort_sexpr(s),
                })
                .collect();
            list(vec![
                atom("declare-fun"),
                atom(name.clone()),
                list(args),
                sort_sexpr(ret),
            ])
            .flat_string()
        }
        Command::DeclareConst { name, sort } => {
            list(vec![atom("declare-const"), atom(name.clone()), sort_sexpr(sort)]).flat_string()
        }
        Command::Assert(t) => {
            let body = term_sexpr(t);
            let flat = body.flat_string();
            if flat.len() + "(assert )".len() <= WIDTH {
                format!("(assert {flat})")
            } else {
                let mut out = String::from("(assert\n  ");
                body.pretty(2, &mut out);
                out.push(')');
                out
            }
        }
    }
}

/// Renders a script in the default dialect: one command per block, LF line
/// endings, declarations and assertions in script order.
pub fn render_smtlib(script: &Script) -> String {
    render_smtlib_with(script, Dialect::default())
}

pub fn render_smtlib_with(script: &Script, dialect: Dialect) -> String {
    let mut out = String::new();
    for cmd in &script.commands {
        out.push_str(&render_command(cmd, dialect));
        out.push('\n');
    }
    out
}
