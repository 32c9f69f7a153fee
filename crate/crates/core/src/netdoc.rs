//! JSON network description documents.
//!
//! ```json
//! {
//!   "nodes": [1, 2],
//!   "edges": [[1, 2], [2, 1]],
//!   "params": [
//!     {
//!       "name": "delay",
//!       "units": "ms",
//!       "rules": [
//!         {"when": [{"field": "dst", "op": "=", "value": 2}], "domain": [[1, 2]]},
//!         {"domain": [[9, 10]]}
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! A rule without `when` (or with an empty list) is the catch-all.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer};
use thiserror::Error;

use crate::model::{
    DynamicNetwork, Edge, EdgeGuard, GuardAtom, IntSet, NodeId, ParamRule, ParamSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownField,
    Duplicate,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// 1-based line, when the position is known.
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// Field path such as `edges[3]`, when known.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.field) {
            (Some(line), _) => write!(f, "line {line}: {}", self.message),
            (None, Some(field)) => write!(f, "{field}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl ParseError {
    fn duplicate(field: String, message: String) -> Self {
        ParseError {
            kind: ParseErrorKind::Duplicate,
            line: None,
            column: None,
            field: Some(field),
            message,
        }
    }
}

impl From<serde_json::Error> for ParseError {
    fn from(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let message = err.to_string();
        let kind = match err.classify() {
            Category::Syntax | Category::Eof | Category::Io => ParseErrorKind::Syntax,
            Category::Data if message.contains("unknown field") => ParseErrorKind::UnknownField,
            Category::Data => ParseErrorKind::Invalid,
        };
        ParseError {
            kind,
            line: Some(err.line()),
            column: Some(err.column()),
            field: None,
            message,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    nodes: Vec<NodeId>,
    #[serde(default)]
    edges: Vec<EdgePair>,
    #[serde(default)]
    params: Vec<ParamDoc>,
}

struct EdgePair(Edge);

impl<'de> Deserialize<'de> for EdgePair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (src, dst) = <(NodeId, NodeId)>::deserialize(d)?;
        Edge::new(src, dst).map(EdgePair).map_err(D::Error::custom)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamDoc {
    name: String,
    #[serde(default)]
    units: Option<String>,
    rules: Vec<RuleDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    #[serde(default)]
    when: Vec<GuardAtom>,
    domain: DomainDoc,
}

struct DomainDoc(IntSet);

impl<'de> Deserialize<'de> for DomainDoc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<(i64, i64)>::deserialize(d)?;
        IntSet::from_intervals(raw)
            .map(DomainDoc)
            .map_err(D::Error::custom)
    }
}

/// Parses a network document. Referential integrity and totality are left to
/// [`crate::model::validate_network`]; duplicates are rejected here.
pub fn parse_network(text: &str) -> Result<DynamicNetwork, ParseError> {
    let doc: NetworkDoc = serde_json::from_str(text)?;

    let mut seen = HashSet::new();
    for (i, n) in doc.nodes.iter().enumerate() {
        if !seen.insert(*n) {
            return Err(ParseError::duplicate(
                format!("nodes[{i}]"),
                format!("duplicate node {n}"),
            ));
        }
    }
    let mut seen = HashSet::new();
    for (i, EdgePair(e)) in doc.edges.iter().enumerate() {
        if !seen.insert(*e) {
            return Err(ParseError::duplicate(
                format!("edges[{i}]"),
                format!("duplicate edge {e}"),
            ));
        }
    }
    let mut seen = HashSet::new();
    for (i, p) in doc.params.iter().enumerate() {
        if !seen.insert(p.name.as_str()) {
            return Err(ParseError::duplicate(
                format!("params[{i}].name"),
                format!("duplicate parameter `{}`", p.name),
            ));
        }
    }

    let params = doc
        .params
        .into_iter()
        .map(|p| ParamSpec {
            name: p.name,
            units: p.units,
            rules: p
                .rules
                .into_iter()
                .map(|r| ParamRule {
                    guard: EdgeGuard::new(r.when),
                    domain: r.domain.0,
                })
                .collect(),
        })
        .collect();
    Ok(DynamicNetwork::new(
        doc.nodes,
        doc.edges.into_iter().map(|EdgePair(e)| e).collect(),
        params,
    ))
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn join<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    items.into_iter().map(f).collect::<Vec<_>>().join(", ")
}

/// Canonical text for `net`: keys sorted, lists in stored order, two-space
/// indentation. Parsing the output yields an equal network.
pub fn serialize_network(net: &DynamicNetwork) -> String {
    let mut out = String::from("{\n");
    let edges = join(net.edges(), |e| format!("[{}, {}]", e.src(), e.dst()));
    let nodes = join(net.nodes(), |n| n.to_string());
    let _ = writeln!(out, "  \"edges\": [{edges}],");
    let _ = writeln!(out, "  \"nodes\": [{nodes}],");
    if net.params().is_empty() {
        out.push_str("  \"params\": []\n}\n");
        return out;
    }
    out.push_str("  \"params\": [\n");
    for (pi, p) in net.params().iter().enumerate() {
        out.push_str("    {\n");
        let _ = writeln!(out, "      \"name\": {},", json_str(&p.name));
        out.push_str("      \"rules\": [\n");
        for (ri, r) in p.rules.iter().enumerate() {
            let domain = join(r.domain.intervals(), |(lo, hi)| format!("[{lo}, {hi}]"));
            let _ = write!(out, "        {{\"domain\": [{domain}]");
            if !r.guard.is_catch_all() {
                let when = join(&r.guard.atoms, |a| {
                    format!(
                        "{{\"field\": \"{}\", \"op\": \"{}\", \"value\": {}}}",
                        a.field.as_str(),
                        a.op.symbol(),
                        a.value
                    )
                });
                let _ = write!(out, ", \"when\": [{when}]");
            }
            out.push('}');
            out.push_str(if ri + 1 < p.rules.len() { ",\n" } else { "\n" });
        }
        match &p.units {
            Some(units) => {
                out.push_str("      ],\n");
                let _ = writeln!(out, "      \"units\": {}", json_str(units));
            }
            None => out.push_str("      ]\n"),
        }
        out.push_str(if pi + 1 < net.params().len() {
            "    },\n"
        } else {
            "    }\n"
        });
    }
    out.push_str("  ]\n}\n");
    out
}
