//! Reader for single terms of the supported fragment, used for user-written
//! property bodies. Not a general SMT-LIB parser.

use num_bigint::BigInt;
use thiserror::Error;

use super::{ArithCmp, Binder, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("offset {offset}: {message}")]
pub struct TermParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
enum Tree {
    Atom(String, usize),
    List(Vec<Tree>, usize),
}

impl Tree {
    fn offset(&self) -> usize {
        match self {
            Tree::Atom(_, o) | Tree::List(_, o) => *o,
        }
    }
}

fn fail<T>(offset: usize, message: impl Into<String>) -> Result<T, TermParseError> {
    Err(TermParseError {
        offset,
        message: message.into(),
    })
}

fn read_trees(text: &str) -> Result<Vec<Tree>, TermParseError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<(Vec<Tree>, usize)> = vec![(Vec::new(), 0)];
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'(' => {
                stack.push((Vec::new(), i));
                i += 1;
            }
            b')' => {
                if stack.len() == 1 {
                    return fail(i, "unbalanced `)`");
                }
                let (items, start) = stack.pop().expect("checked depth");
                stack
                    .last_mut()
                    .expect("root frame")
                    .0
                    .push(Tree::List(items, start));
                i += 1;
            }
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'|' | b'"' => return fail(i, "quoted symbols and strings are not supported"),
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && !matches!(bytes[i], b'(' | b')' | b';')
                {
                    i += 1;
                }
                stack
                    .last_mut()
                    .expect("root frame")
                    .0
                    .push(Tree::Atom(text[start..i].to_string(), start));
            }
        }
    }
    if stack.len() > 1 {
        return fail(stack.last().expect("non-empty").1, "unclosed `(`");
    }
    Ok(stack.pop().expect("root frame").0)
}

/// Parses exactly one term from `text`.
pub fn parse_term(text: &str) -> Result<Term, TermParseError> {
    let trees = read_trees(text)?;
    match trees.as_slice() {
        [one] => term(one),
        [] => fail(0, "empty input"),
        [_, second, ..] => fail(second.offset(), "trailing input after term"),
    }
}

fn sort(t: &Tree) -> Result<Sort, TermParseError> {
    match t {
        Tree::Atom(a, _) if a == "Int" => Ok(Sort::Int),
        Tree::Atom(a, _) if a == "Bool" => Ok(Sort::Bool),
        Tree::Atom(a, _) => Ok(Sort::Datatype(a.clone())),
        Tree::List(items, o) => match items.as_slice() {
            [Tree::Atom(h, _), i, v] if h == "Array" => Ok(Sort::array(sort(i)?, sort(v)?)),
            _ => fail(*o, "unsupported sort"),
        },
    }
}

fn binders(t: &Tree) -> Result<Vec<Binder>, TermParseError> {
    let Tree::List(items, o) = t else {
        return fail(t.offset(), "expected binder list");
    };
    if items.is_empty() {
        return fail(*o, "empty binder list");
    }
    items
        .iter()
        .map(|b| match b {
            Tree::List(pair, _) => match pair.as_slice() {
                [Tree::Atom(n, _), s] => Ok((n.clone(), sort(s)?)),
                _ => fail(b.offset(), "expected (name Sort)"),
            },
            _ => fail(b.offset(), "expected (name Sort)"),
        })
        .collect()
}

fn terms(ts: &[Tree]) -> Result<Vec<Term>, TermParseError> {
    ts.iter().map(term).collect()
}

fn boxed(t: &Tree) -> Result<Box<Term>, TermParseError> {
    term(t).map(Box::new)
}

fn term(t: &Tree) -> Result<Term, TermParseError> {
    let (items, o) = match t {
        Tree::Atom(a, o) => {
            return match a.as_str() {
                "true" => Ok(Term::Bool(true)),
                "false" => Ok(Term::Bool(false)),
                _ if a.bytes().all(|b| b.is_ascii_digit()) => a
                    .parse::<BigInt>()
                    .map(Term::Int)
                    .or_else(|_| fail(*o, "bad numeral")),
                _ => Ok(Term::Var(a.clone())),
            }
        }
        Tree::List(items, o) => (items, *o),
    };
    let Some((Tree::Atom(head, _), args)) = items.split_first() else {
        return fail(o, "expected an operator");
    };
    let arity = |n: usize| -> Result<(), TermParseError> {
        if args.len() == n {
            Ok(())
        } else {
            fail(o, format!("`{head}` expects {n} argument(s), got {}", args.len()))
        }
    };
    let cmp = |op: ArithCmp| -> Result<Term, TermParseError> {
        arity(2)?;
        Ok(Term::Cmp(op, boxed(&args[0])?, boxed(&args[1])?))
    };
    match head.as_str() {
        "select" => {
            arity(2)?;
            Ok(Term::Select(boxed(&args[0])?, boxed(&args[1])?))
        }
        "store" => {
            arity(3)?;
            Ok(Term::Store(boxed(&args[0])?, boxed(&args[1])?, boxed(&args[2])?))
        }
        "+" => Ok(Term::Add(terms(args)?)),
        "-" => Ok(Term::Sub(terms(args)?)),
        "=" => {
            if args.len() < 2 {
                return fail(o, "`=` expects at least 2 arguments");
            }
            let ts = terms(args)?;
            let mut eqs: Vec<Term> = ts.windows(2).map(|w| w[0].clone().eq(w[1].clone())).collect();
            Ok(if eqs.len() == 1 { eqs.pop().expect("one") } else { Term::And(eqs) })
        }
        "<" => cmp(ArithCmp::Lt),
        "<=" => cmp(ArithCmp::Le),
        ">" => cmp(ArithCmp::Gt),
        ">=" => cmp(ArithCmp::Ge),
        "not" => {
            arity(1)?;
            Ok(Term::Not(boxed(&args[0])?))
        }
        "and" => Ok(Term::And(terms(args)?)),
        "or" => Ok(Term::Or(terms(args)?)),
        "=>" => {
            if args.len() < 2 {
                return fail(o, "`=>` expects at least 2 arguments");
            }
            // Right-associative.
            let mut ts = terms(args)?;
            let mut acc = ts.pop().expect("non-empty");
            while let Some(prev) = ts.pop() {
                acc = prev.implies(acc);
            }
            Ok(acc)
        }
        "forall" | "exists" => {
            arity(2)?;
            let bs = binders(&args[0])?;
            let body = boxed(&args[1])?;
            Ok(if head == "forall" {
                Term::Forall(bs, body)
            } else {
                Term::Exists(bs, body)
            })
        }
        "let" | "ite" | "match" | "!" | "_" | "as" | "distinct" | "*" => {
            fail(o, format!("`{head}` is outside the supported fragment"))
        }
        f => Ok(Term::App(f.to_string(), terms(args)?)),
    }
}
