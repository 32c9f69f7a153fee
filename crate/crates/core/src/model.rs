//! Dynamic network data model: topology plus per-link parameter domains.
//!
//! A [`DynamicNetwork`] is a directed graph whose links carry named integer
//! parameters. Each parameter is described by an ordered list of guarded
//! rules; the domain of a link is the [`IntSet`] of the first rule whose guard
//! holds for that link. A [`StaticSnapshot`] is one concrete instance of such a
//! network, with a single value per parameter per link.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised when building or querying model values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("node id must be >= 1, got {0}")]
    InvalidNodeId(u64),
    #[error("self-loop on node {0} is not a valid link")]
    SelfLoop(NodeId),
    #[error("empty integer set")]
    EmptySet,
    #[error("interval [{lo}, {hi}] has lo > hi")]
    InvertedInterval { lo: i64, hi: i64 },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("edge {0} is not part of the network")]
    UnknownEdge(Edge),
}

/// Identifier of a network node. Always `>= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NodeId(u64);

impl NodeId {
    pub fn new(id: u64) -> Result<Self, ModelError> {
        if id == 0 {
            return Err(ModelError::InvalidNodeId(id));
        }
        Ok(NodeId(id))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = u64::deserialize(d)?;
        NodeId::new(raw).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed link `src -> dst`. Self-loops are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    src: NodeId,
    dst: NodeId,
}

impl Edge {
    pub fn new(src: NodeId, dst: NodeId) -> Result<Self, ModelError> {
        if src == dst {
            return Err(ModelError::SelfLoop(src));
        }
        Ok(Edge { src, dst })
    }

    /// Convenience constructor from raw ids.
    pub fn from_ids(src: u64, dst: u64) -> Result<Self, ModelError> {
        Edge::new(NodeId::new(src)?, NodeId::new(dst)?)
    }

    pub fn src(&self) -> NodeId {
        self.src
    }

    pub fn dst(&self) -> NodeId {
        self.dst
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.src, self.dst)
    }
}

/// Non-empty set of integers stored as sorted, disjoint, non-adjacent closed
/// intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntSet {
    intervals: Vec<(i64, i64)>,
}

impl IntSet {
    /// Builds a set from arbitrary closed intervals, merging overlaps and
    /// neighbours.
    pub fn from_intervals<I>(intervals: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (i64, i64)>,
    {
        let mut raw: Vec<(i64, i64)> = intervals.into_iter().collect();
        if let Some(&(lo, hi)) = raw.iter().find(|(lo, hi)| lo > hi) {
            return Err(ModelError::InvertedInterval { lo, hi });
        }
        if raw.is_empty() {
            return Err(ModelError::EmptySet);
        }
        raw.sort_unstable();
        let mut merged: Vec<(i64, i64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match merged.last_mut() {
                Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(IntSet { intervals: merged })
    }

    pub fn range(lo: i64, hi: i64) -> Result<Self, ModelError> {
        IntSet::from_intervals([(lo, hi)])
    }

    pub fn point(v: i64) -> Self {
        IntSet {
            intervals: vec![(v, v)],
        }
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.intervals
    }

    pub fn contains(&self, v: i64) -> bool {
        let idx = self.intervals.partition_point(|&(_, hi)| hi < v);
        self.intervals.get(idx).is_some_and(|&(lo, _)| lo <= v)
    }

    /// Number of members.
    pub fn len(&self) -> u128 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| (hi as i128 - lo as i128) as u128 + 1)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `k`-th smallest member, if any.
    pub fn nth(&self, mut k: u128) -> Option<i64> {
        for &(lo, hi) in &self.intervals {
            let width = (hi as i128 - lo as i128) as u128 + 1;
            if k < width {
                return Some((lo as i128 + k as i128) as i64);
            }
            k -= width;
        }
        None
    }

    pub fn min(&self) -> i64 {
        self.intervals[0].0
    }

    pub fn max(&self) -> i64 {
        self.intervals[self.intervals.len() - 1].1
    }
}

impl fmt::Display for IntSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|&(lo, hi)| {
                if lo == hi {
                    lo.to_string()
                } else {
                    format!("{lo}..{hi}")
                }
            })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Which endpoint of an edge a guard atom inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeField {
    Src,
    Dst,
}

impl EdgeField {
    pub fn of(self, e: &Edge) -> NodeId {
        match self {
            EdgeField::Src => e.src,
            EdgeField::Dst => e.dst,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeField::Src => "src",
            EdgeField::Dst => "dst",
        }
    }
}

/// Integer comparison operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub fn eval(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];
}

impl std::str::FromStr for CmpOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CmpOp::ALL
            .into_iter()
            .find(|op| op.symbol() == s)
            .or(match s {
                "==" => Some(CmpOp::Eq),
                "≠" | "<>" => Some(CmpOp::Ne),
                _ => None,
            })
            .ok_or_else(|| format!("unknown comparison operator `{s}`"))
    }
}

/// `field op value`, e.g. `dst = 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardAtom {
    pub field: EdgeField,
    pub op: CmpOp,
    pub value: i64,
}

impl GuardAtom {
    pub fn holds(&self, e: &Edge) -> bool {
        self.op.eval(self.field.of(e).get() as i64, self.value)
    }
}

/// Conjunction of guard atoms. Empty means "otherwise".
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct EdgeGuard {
    pub atoms: Vec<GuardAtom>,
}

impl EdgeGuard {
    pub fn always() -> Self {
        EdgeGuard::default()
    }

    pub fn new(atoms: Vec<GuardAtom>) -> Self {
        EdgeGuard { atoms }
    }

    pub fn is_catch_all(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn holds(&self, e: &Edge) -> bool {
        self.atoms.iter().all(|a| a.holds(e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamRule {
    pub guard: EdgeGuard,
    pub domain: IntSet,
}

/// A link parameter function given piecewise by first-match rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub rules: Vec<ParamRule>,
    pub units: Option<String>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, rules: Vec<ParamRule>) -> Self {
        ParamSpec {
            name: name.into(),
            rules,
            units: None,
        }
    }

    /// Domain of the first rule matching `e`.
    pub fn domain_of(&self, e: &Edge) -> Option<&IntSet> {
        self.rules
            .iter()
            .find(|r| r.guard.holds(e))
            .map(|r| &r.domain)
    }

    pub fn is_total(&self) -> bool {
        self.rules.last().is_some_and(|r| r.guard.is_catch_all())
    }
}

/// Problems found by [`validate_network`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationIssue {
    #[error("node {0} listed more than once")]
    DuplicateNode(NodeId),
    #[error("edge {0} listed more than once")]
    DuplicateEdge(Edge),
    #[error("edge {edge} references node {node} which is not declared")]
    DanglingEndpoint { edge: Edge, node: NodeId },
    #[error("parameter `{0}` declared more than once")]
    DuplicateParam(String),
    #[error("parameter `{0}` has no catch-all final rule, so it is not total")]
    ParamNotTotal(String),
    #[error("parameter name `{0}` is not a usable solver symbol")]
    InvalidParamName(String),
    #[error("parameter name `{0}` clashes with the network vocabulary")]
    ReservedParamName(String),
}

/// Names taken by the encoder's vocabulary; parameters may not reuse them.
pub const RESERVED_NAMES: &[&str] = &[
    "Edge",
    "mk-edge",
    "src",
    "dst",
    "edges",
    "edges_size",
    "nodes",
    "nodes_size",
    "x",
    "y",
    "z",
];

/// Directed graph with named per-link integer parameter domains.
#[derive(Debug, Clone)]
pub struct DynamicNetwork {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    params: Vec<ParamSpec>,
    edge_index: HashMap<Edge, usize>,
}

impl PartialEq for DynamicNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.params == other.params
    }
}

impl Eq for DynamicNetwork {}

impl DynamicNetwork {
    /// Assembles a network without checking it; see [`validate_network`].
    pub fn new(nodes: Vec<NodeId>, edges: Vec<Edge>, params: Vec<ParamSpec>) -> Self {
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            edge_index.entry(*e).or_insert(i);
        }
        DynamicNetwork {
            nodes,
            edges,
            params,
            edge_index,
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Zero-based position of `e` in the edge list.
    pub fn edge_position(&self, e: &Edge) -> Option<usize> {
        self.edge_index.get(e).copied()
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.edge_index.contains_key(e)
    }

    /// Consumes the network, returning it only if [`validate_network`] finds
    /// nothing wrong.
    pub fn validated(self) -> Result<Self, Vec<ValidationIssue>> {
        let issues = validate_network(&self);
        if issues.is_empty() {
            Ok(self)
        } else {
            Err(issues)
        }
    }
}

pub(crate) fn is_simple_symbol(name: &str) -> bool {
    const EXTRA: &str = "~!@$%^&*_-+=<>.?/";
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || EXTRA.contains(c) => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || EXTRA.contains(c))
}

/// Lists every broken invariant of `net`. An empty list means the network is
/// fit for encoding.
pub fn validate_network(net: &DynamicNetwork) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();

    let mut seen_nodes = HashSet::new();
    for n in &net.nodes {
        if !seen_nodes.insert(*n) {
            issues.push(ValidationIssue::DuplicateNode(*n));
        }
    }
    let mut seen_edges = HashSet::new();
    for e in &net.edges {
        if !seen_edges.insert(*e) {
            issues.push(ValidationIssue::DuplicateEdge(*e));
        }
        for node in [e.src, e.dst] {
            if !seen_nodes.contains(&node) {
                issues.push(ValidationIssue::DanglingEndpoint { edge: *e, node });
            }
        }
    }

    let mut seen_params = HashSet::new();
    for p in &net.params {
        if !seen_params.insert(p.name.as_str()) {
            issues.push(ValidationIssue::DuplicateParam(p.name.clone()));
        }
        if !is_simple_symbol(&p.name) || crate::formula::is_reserved_word(&p.name) {
            issues.push(ValidationIssue::InvalidParamName(p.name.clone()));
        } else if RESERVED_NAMES.contains(&p.name.as_str()) {
            issues.push(ValidationIssue::ReservedParamName(p.name.clone()));
        }
        if !p.is_total() {
            issues.push(ValidationIssue::ParamNotTotal(p.name.clone()));
        }
    }
    issues
}

/// Domain of `param` on edge `e`, by first-match over the parameter's rules.
pub fn param_domain<'a>(
    net: &'a DynamicNetwork,
    param: &str,
    e: &Edge,
) -> Result<&'a IntSet, ModelError> {
    let spec = net
        .param(param)
        .ok_or_else(|| ModelError::UnknownParam(param.to_string()))?;
    if !net.contains_edge(e) {
        return Err(ModelError::UnknownEdge(*e));
    }
    // Only reachable on non-total specs, which validation rejects.
    spec.domain_of(e)
        .ok_or_else(|| ModelError::UnknownParam(param.to_string()))
}

/// One observed link of a static snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotLink {
    pub edge: Edge,
    pub values: BTreeMap<String, i64>,
}

/// A concrete instance of a dynamic network at one point in time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticSnapshot {
    pub seq: u64,
    pub links: Vec<SnapshotLink>,
}

impl StaticSnapshot {
    pub fn link(&self, e: &Edge) -> Option<&SnapshotLink> {
        self.links.iter().find(|l| l.edge == *e)
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.link(e).is_some()
    }
}
