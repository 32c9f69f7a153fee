//! Compiles networks, properties and run-time observations into formulas.
//!
//! The vocabulary shared by every formula:
//!
//! * datatype `Edge` with constructor `mk-edge` and selectors `src`, `dst`;
//! * `nodes : Array Int Int` and `nodes_size : Int`;
//! * `edges : Array Int Edge` and `edges_size : Int`;
//! * one uninterpreted function `Edge -> Int` per parameter.
//!
//! Arrays are 1-indexed and pinned with store-equalities,
//! `(= (store edges j (mk-edge s d)) edges)`.

use thiserror::Error;

use crate::checker::{Property, PropertyBody};
use crate::formula::{
    sort_check, Command, Constructor, DatatypeDecl, Script, Signature, Sort, SortError, Term,
};
use crate::model::{CmpOp, DynamicNetwork, Edge, EdgeField, EdgeGuard, IntSet};

pub const EDGE_SORT: &str = "Edge";
pub const MK_EDGE: &str = "mk-edge";
pub const SRC: &str = "src";
pub const DST: &str = "dst";
pub const NODES: &str = "nodes";
pub const NODES_SIZE: &str = "nodes_size";
pub const EDGES: &str = "edges";
pub const EDGES_SIZE: &str = "edges_size";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("ill-sorted property `{name}`: {source}")]
    Sort {
        name: String,
        #[source]
        source: SortError,
    },
}

/// Declarations plus the formulas asserted over them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fragment {
    pub declarations: Vec<Command>,
    pub assertions: Vec<Term>,
}

impl Fragment {
    pub fn into_script(self) -> Script {
        let mut s = Script::new();
        for d in self.declarations {
            s.push(d);
        }
        for a in self.assertions {
            s.assert(a);
        }
        s
    }
}

fn edge_sort() -> Sort {
    Sort::datatype(EDGE_SORT)
}

fn int(v: impl Into<num_bigint::BigInt>) -> Term {
    Term::int(v)
}

fn mk_edge(e: &Edge) -> Term {
    Term::app(MK_EDGE, vec![int(e.src().get()), int(e.dst().get())])
}

/// `E[x]`
fn edge_at(index: Term) -> Term {
    Term::select(Term::var(EDGES), index)
}

/// `lo <= x <= size`, written as the pair `(>= x 1) (<= x size)`.
fn index_in_range(x: &str, size: &str) -> Term {
    Term::and(vec![
        Term::var(x).ge(int(1)),
        Term::var(x).le(Term::var(size)),
    ])
}

fn int_binder(name: &str) -> (String, Sort) {
    (name.to_string(), Sort::Int)
}

fn compare(lhs: Term, op: CmpOp, rhs: Term) -> Term {
    match op {
        CmpOp::Eq => lhs.eq(rhs),
        CmpOp::Ne => lhs.eq(rhs).not(),
        CmpOp::Lt => lhs.lt(rhs),
        CmpOp::Le => lhs.le(rhs),
        CmpOp::Gt => lhs.gt(rhs),
        CmpOp::Ge => lhs.ge(rhs),
    }
}

fn edge_datatype() -> DatatypeDecl {
    DatatypeDecl {
        name: EDGE_SORT.into(),
        constructors: vec![Constructor {
            name: MK_EDGE.into(),
            fields: vec![(SRC.into(), Sort::Int), (DST.into(), Sort::Int)],
        }],
    }
}

fn param_declarations(net: &DynamicNetwork) -> Vec<Command> {
    net.params()
        .iter()
        .map(|p| Command::DeclareFun {
            name: p.name.clone(),
            args: vec![edge_sort()],
            ret: Sort::Int,
        })
        .collect()
}

/// `nodes`, `nodes_size` and the node-array contents.
pub fn encode_nodes(net: &DynamicNetwork) -> Fragment {
    let mut assertions: Vec<Term> = net
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, n)| {
            Term::store(Term::var(NODES), int(j as u64 + 1), int(n.get())).eq(Term::var(NODES))
        })
        .collect();
    assertions.push(Term::var(NODES_SIZE).eq(int(net.nodes().len() as u64)));
    Fragment {
        declarations: vec![
            Command::DeclareConst {
                name: NODES.into(),
                sort: Sort::array(Sort::Int, Sort::Int),
            },
            Command::DeclareConst {
                name: NODES_SIZE.into(),
                sort: Sort::Int,
            },
        ],
        assertions,
    }
}

/// The `Edge` datatype, `edges`, `edges_size` and the edge-array contents,
/// in network order.
pub fn encode_edges(net: &DynamicNetwork) -> Fragment {
    let mut assertions: Vec<Term> = net
        .edges()
        .iter()
        .enumerate()
        .map(|(j, e)| Term::store(Term::var(EDGES), int(j as u64 + 1), mk_edge(e)).eq(Term::var(EDGES)))
        .collect();
    assertions.push(Term::var(EDGES_SIZE).eq(int(net.edges().len() as u64)));
    Fragment {
        declarations: vec![
            Command::DeclareDatatype(edge_datatype()),
            Command::DeclareConst {
                name: EDGES.into(),
                sort: Sort::array(Sort::Int, edge_sort()),
            },
            Command::DeclareConst {
                name: EDGES_SIZE.into(),
                sort: Sort::Int,
            },
        ],
        assertions,
    }
}

fn guard_atoms(guard: &EdgeGuard, edge: &Term) -> Vec<Term> {
    guard
        .atoms
        .iter()
        .map(|a| {
            let sel = match a.field {
                EdgeField::Src => SRC,
                EdgeField::Dst => DST,
            };
            compare(Term::app(sel, vec![edge.clone()]), a.op, int(a.value))
        })
        .collect()
}

fn guard_term(guard: &EdgeGuard, edge: &Term) -> Term {
    let mut atoms = guard_atoms(guard, edge);
    if atoms.len() == 1 {
        atoms.pop().expect("one atom")
    } else {
        Term::and(atoms)
    }
}

/// Bounds on `f` for `domain`: a flat `lo <= f, f <= hi` pair for a single
/// interval, a disjunction of such pairs otherwise.
fn domain_bounds(f: &Term, domain: &IntSet) -> Vec<Term> {
    let pair = |lo: i64, hi: i64| vec![f.clone().ge(int(lo)), f.clone().le(int(hi))];
    match domain.intervals() {
        [(lo, hi)] => pair(*lo, *hi),
        many => vec![Term::or(
            many.iter().map(|&(lo, hi)| Term::and(pair(lo, hi))).collect(),
        )],
    }
}

/// The parameter functions and one quantified assertion binding every
/// parameter to its domain on each edge index.
///
/// A rule fires under its own guard conjoined with the negation of every
/// earlier guard of the same parameter, so first-match semantics become a
/// set of independent implications. Rules with identical effective guards
/// across parameters share one implication.
pub fn encode_params(net: &DynamicNetwork) -> Fragment {
    let declarations = param_declarations(net);
    if net.params().is_empty() {
        return Fragment {
            declarations,
            assertions: vec![],
        };
    }
    let ex = edge_at(Term::var("x"));
    let mut groups: Vec<(Option<Term>, Vec<Term>)> = Vec::new();
    for p in net.params() {
        let f = Term::app(p.name.clone(), vec![ex.clone()]);
        let mut earlier: Vec<Term> = Vec::new();
        for rule in &p.rules {
            let mut conds = Vec::new();
            conds.extend(guard_atoms(&rule.guard, &ex));
            conds.extend(earlier.iter().map(|g| g.clone().not()));
            let effective = match conds.len() {
                0 => None,
                1 => conds.pop(),
                _ => Some(Term::and(conds)),
            };
            let bounds = domain_bounds(&f, &rule.domain);
            match groups.iter_mut().find(|(g, _)| *g == effective) {
                Some((_, bs)) => bs.extend(bounds),
                None => groups.push((effective, bounds)),
            }
            if rule.guard.is_catch_all() {
                // Later rules are unreachable.
                break;
            }
            earlier.push(guard_term(&rule.guard, &ex));
        }
    }
    let mut clauses: Vec<Term> = groups
        .into_iter()
        .map(|(guard, bounds)| match guard {
            Some(g) => g.implies(Term::and(bounds)),
            None => Term::and(bounds),
        })
        .collect();
    let body = if clauses.len() == 1 {
        clauses.pop().expect("one clause")
    } else {
        Term::and(clauses)
    };
    Fragment {
        declarations,
        assertions: vec![Term::forall(
            vec![int_binder("x")],
            index_in_range("x", EDGES_SIZE).implies(body),
        )],
    }
}

/// Every symbol of the network vocabulary, with no assertions.
pub fn vocabulary(net: &DynamicNetwork) -> Script {
    let nodes = encode_nodes(net);
    let edges = encode_edges(net);
    let mut decls = vec![edges.declarations[0].clone()];
    decls.extend(param_declarations(net));
    decls.extend(nodes.declarations);
    decls.extend(edges.declarations.into_iter().skip(1));
    Fragment {
        declarations: decls,
        assertions: vec![],
    }
    .into_script()
}

pub fn vocabulary_signature(net: &DynamicNetwork) -> Signature {
    sort_check(&vocabulary(net)).expect("vocabulary of a validated network is well-sorted")
}

/// Node and edge array contents without the parameter constraints.
pub fn structure_assertions(net: &DynamicNetwork) -> Vec<Term> {
    let mut out = encode_nodes(net).assertions;
    out.extend(encode_edges(net).assertions);
    out
}

/// The full network formula: vocabulary, then node, edge and parameter
/// assertions.
pub fn encode_network(net: &DynamicNetwork) -> Script {
    let mut script = vocabulary(net);
    for t in structure_assertions(net) {
        script.assert(t);
    }
    for t in encode_params(net).assertions {
        script.assert(t);
    }
    script
}

fn check_param(net: &DynamicNetwork, name: &str) -> Result<(), EncodeError> {
    if net.param(name).is_none() {
        return Err(EncodeError::UnknownParam(name.to_string()));
    }
    Ok(())
}

/// Encodes a property as a closed Bool term over the network vocabulary.
pub fn encode_property(prop: &Property, net: &DynamicNetwork) -> Result<Term, EncodeError> {
    let per_edge = |body: Term| {
        Term::forall(
            vec![int_binder("x")],
            index_in_range("x", EDGES_SIZE).implies(body),
        )
    };
    let ex = || edge_at(Term::var("x"));
    let term = match &prop.body {
        PropertyBody::NonNegative => per_edge(Term::and(
            net.params()
                .iter()
                .map(|p| Term::app(p.name.clone(), vec![ex()]).ge(int(0)))
                .collect(),
        )),
        PropertyBody::DegreeAtLeastOne => {
            let node = Term::select(Term::var(NODES), Term::var("x"));
            Term::forall(
                vec![int_binder("x")],
                index_in_range("x", NODES_SIZE).implies(Term::exists(
                    vec![int_binder("y"), int_binder("z")],
                    Term::and(vec![
                        Term::var("y").ge(int(1)),
                        Term::var("y").le(Term::var(EDGES_SIZE)),
                        Term::var("z").ge(int(1)),
                        Term::var("z").le(Term::var(EDGES_SIZE)),
                        Term::app(SRC, vec![edge_at(Term::var("y"))]).eq(node.clone()),
                        Term::app(DST, vec![edge_at(Term::var("z"))]).eq(node),
                    ]),
                )),
            )
        }
        PropertyBody::ParamBound { param, op, value } => {
            check_param(net, param)?;
            per_edge(compare(Term::app(param.clone(), vec![ex()]), *op, int(*value)))
        }
        PropertyBody::Raw(t) => t.clone(),
    };
    vocabulary_signature(net)
        .check_formula(&term, vec![prop.name.clone()])
        .map_err(|source| EncodeError::Sort {
            name: prop.name.clone(),
            source,
        })?;
    Ok(term)
}

/// `exists x. 1 <= x <= |E| and E[x] = (va, vb)`
pub fn encode_link_presence(e: &Edge) -> Term {
    Term::exists(
        vec![int_binder("x")],
        Term::and(vec![
            Term::var("x").ge(int(1)),
            Term::var("x").le(Term::var(EDGES_SIZE)),
            edge_at(Term::var("x")).eq(mk_edge(e)),
        ]),
    )
}

/// `param(mk-edge va vb) = value`
pub fn encode_param_equality(
    net: &DynamicNetwork,
    param: &str,
    e: &Edge,
    value: i64,
) -> Result<Term, EncodeError> {
    check_param(net, param)?;
    Ok(Term::app(param, vec![mk_edge(e)]).eq(int(value)))
}
