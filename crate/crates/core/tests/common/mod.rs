#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use dynet::model::{CmpOp, EdgeField, EdgeGuard, GuardAtom, ParamRule, ParamSpec, SnapshotLink};
use dynet::{AlertKind, DynamicNetwork, Edge, IntSet, NodeId, SolverConfig, StaticSnapshot};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn fig1() -> DynamicNetwork {
    dynet::parse_network(&read_fixture("fig1.net"))
        .unwrap()
        .validated()
        .unwrap()
}

pub fn solver() -> SolverConfig {
    SolverConfig::from_env().with_timeout(Duration::from_secs(10))
}

pub fn fake_solver(args: &[&str]) -> SolverConfig {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/support/fake_solver.py");
    let mut cmd = vec!["python3".to_string(), script.display().to_string()];
    cmd.extend(args.iter().map(|s| s.to_string()));
    SolverConfig::new(cmd)
}

pub fn edge(s: u64, d: u64) -> Edge {
    Edge::from_ids(s, d).unwrap()
}

/// The example network's domains, written out by hand: `{4,5,6}` bandwidth
/// and `{1,2}` delay into node 2, `{2,3,4}` and `{9,10}` everywhere else.
pub fn fig1_domain(param: &str, e: (u64, u64)) -> Vec<i64> {
    match (param, e.1 == 2) {
        ("bandwidth", true) => vec![4, 5, 6],
        ("bandwidth", false) => vec![2, 3, 4],
        ("delay", true) => vec![1, 2],
        ("delay", false) => vec![9, 10],
        _ => panic!("no parameter {param}"),
    }
}

pub const FIG1_EDGES: [(u64, u64); 10] = [
    (1, 2),
    (2, 1),
    (1, 3),
    (3, 1),
    (1, 4),
    (4, 1),
    (2, 4),
    (4, 2),
    (3, 4),
    (4, 3),
];

/// A network as plain tuples, evaluated without the library.
#[derive(Debug, Clone)]
pub struct RawNet {
    pub nodes: Vec<u64>,
    pub edges: Vec<(u64, u64)>,
    /// name -> rules of (guard atoms (field is_src, op, value), intervals);
    /// the last rule has no atoms.
    pub params: Vec<(String, Vec<RawRule>)>,
}

/// (kind, edge, param, observed)
pub type AlertTuple = (AlertKind, (u64, u64), Option<String>, Option<i64>);

pub type RawAtom = (bool, &'static str, i64);
pub type RawRule = (Vec<RawAtom>, Vec<(i64, i64)>);

const OPS: [&str; 6] = ["=", "!=", "<", "<=", ">", ">="];

fn raw_holds(atoms: &[RawAtom], e: (u64, u64)) -> bool {
    atoms.iter().all(|&(is_src, op, v)| {
        let x = if is_src { e.0 } else { e.1 } as i64;
        match op {
            "=" => x == v,
            "!=" => x != v,
            "<" => x < v,
            "<=" => x <= v,
            ">" => x > v,
            ">=" => x >= v,
            _ => unreachable!(),
        }
    })
}

impl RawNet {
    pub fn domain(&self, param: &str, e: (u64, u64)) -> Vec<(i64, i64)> {
        let (_, rules) = self.params.iter().find(|(n, _)| n == param).unwrap();
        rules
            .iter()
            .find(|(atoms, _)| raw_holds(atoms, e))
            .map(|(_, d)| d.clone())
            .unwrap()
    }

    pub fn admits(&self, param: &str, e: (u64, u64), v: i64) -> bool {
        self.domain(param, e).iter().any(|&(lo, hi)| lo <= v && v <= hi)
    }

    pub fn build(&self) -> DynamicNetwork {
        let params = self
            .params
            .iter()
            .map(|(name, rules)| {
                let rules = rules
                    .iter()
                    .map(|(atoms, ivs)| ParamRule {
                        guard: EdgeGuard::new(
                            atoms
                                .iter()
                                .map(|&(is_src, op, value)| GuardAtom {
                                    field: if is_src { EdgeField::Src } else { EdgeField::Dst },
                                    op: op.parse::<CmpOp>().unwrap(),
                                    value,
                                })
                                .collect(),
                        ),
                        domain: IntSet::from_intervals(ivs.iter().copied()).unwrap(),
                    })
                    .collect();
                ParamSpec::new(name.clone(), rules)
            })
            .collect();
        DynamicNetwork::new(
            self.nodes.iter().map(|&n| NodeId::new(n).unwrap()).collect(),
            self.edges.iter().map(|&(s, d)| edge(s, d)).collect(),
            params,
        )
        .validated()
        .unwrap()
    }

    /// Expected alerts as (kind, edge, param, observed), in any order.
    pub fn expected_alerts(
        &self,
        snap: &StaticSnapshot,
        strict: bool,
    ) -> Vec<AlertTuple> {
        let mut out = Vec::new();
        let key = |e: &Edge| (e.src().get(), e.dst().get());
        for link in &snap.links {
            let e = key(&link.edge);
            if !self.edges.contains(&e) {
                out.push((AlertKind::LinkViolation, e, None, None));
                continue;
            }
            for (name, _) in &self.params {
                match link.values.get(name) {
                    None => out.push((AlertKind::MissingParamValue, e, Some(name.clone()), None)),
                    Some(&v) if !self.admits(name, e, v) => {
                        out.push((AlertKind::ParamViolation, e, Some(name.clone()), Some(v)))
                    }
                    Some(_) => {}
                }
            }
            for (name, &v) in &link.values {
                if !self.params.iter().any(|(n, _)| n == name) {
                    out.push((AlertKind::UnknownParam, e, Some(name.clone()), Some(v)));
                }
            }
        }
        if strict {
            for &e in &self.edges {
                if !snap.links.iter().any(|l| key(&l.edge) == e) {
                    out.push((AlertKind::MissingLink, e, None, None));
                }
            }
        }
        out.sort();
        out
    }
}

pub fn alert_tuples(
    alerts: &[dynet::Alert],
) -> Vec<AlertTuple> {
    let mut v: Vec<_> = alerts
        .iter()
        .map(|a| {
            (
                a.kind,
                (a.edge.src().get(), a.edge.dst().get()),
                a.param.clone(),
                a.observed,
            )
        })
        .collect();
    v.sort();
    v
}

fn random_intervals<R: Rng>(rng: &mut R) -> Vec<(i64, i64)> {
    let n = rng.gen_range(1..=2);
    (0..n)
        .map(|_| {
            let lo = rng.gen_range(0..=20);
            let hi = rng.gen_range(lo..=20);
            (lo, hi)
        })
        .collect()
}

/// Up to 5 nodes, up to 12 edges, 1-3 parameters with domains in [0, 20].
pub fn random_net<R: Rng>(rng: &mut R) -> RawNet {
    let n = rng.gen_range(2..=5u64);
    let nodes: Vec<u64> = (1..=n).collect();
    let mut pairs: Vec<(u64, u64)> = nodes
        .iter()
        .flat_map(|&a| nodes.iter().map(move |&b| (a, b)))
        .filter(|(a, b)| a != b)
        .collect();
    pairs.shuffle(rng);
    let m = rng.gen_range(1..=pairs.len().min(12));
    let edges = pairs[..m].to_vec();

    let names = ["bandwidth", "delay", "loss"];
    let k = rng.gen_range(1..=3);
    let params = names[..k]
        .iter()
        .map(|name| {
            let guarded = rng.gen_range(0..=2);
            let mut rules: Vec<RawRule> = (0..guarded)
                .map(|_| {
                    let atoms = (0..rng.gen_range(1..=2))
                        .map(|_| {
                            (
                                rng.gen_bool(0.5),
                                *OPS.choose(rng).unwrap(),
                                rng.gen_range(1..=n as i64),
                            )
                        })
                        .collect();
                    (atoms, random_intervals(rng))
                })
                .collect();
            rules.push((vec![], random_intervals(rng)));
            (name.to_string(), rules)
        })
        .collect();
    RawNet {
        nodes,
        edges,
        params,
    }
}

/// A sampled snapshot with random corruptions: out-of-domain values,
/// missing values, unknown parameters, dropped and extra links.
pub fn random_snapshot<R: Rng>(rng: &mut R, raw: &RawNet, net: &DynamicNetwork, seq: u64) -> StaticSnapshot {
    let mut snap = dynet::sample_snapshot(net, rng.gen(), seq);
    let corrupt = rng.gen_bool(0.7);
    if corrupt {
        for link in &mut snap.links {
            let names: Vec<String> = link.values.keys().cloned().collect();
            for name in names {
                match rng.gen_range(0..10) {
                    0 | 1 => {
                        link.values.insert(name, rng.gen_range(-1..=21));
                    }
                    2 => {
                        link.values.remove(&name);
                    }
                    _ => {}
                }
            }
            if rng.gen_bool(0.05) {
                link.values.insert("jitter".into(), rng.gen_range(0..5));
            }
        }
        snap.links.retain(|_| !rng.gen_bool(0.1));
        let max = *raw.nodes.last().unwrap() + 1;
        for _ in 0..rng.gen_range(0..=2) {
            let a = rng.gen_range(1..=max);
            let b = rng.gen_range(1..=max);
            let e = match Edge::from_ids(a, b) {
                Ok(e) => e,
                Err(_) => continue,
            };
            if snap.contains_edge(&e) {
                continue;
            }
            let mut values = BTreeMap::new();
            if rng.gen_bool(0.5) {
                values.insert(raw.params[0].0.clone(), rng.gen_range(0..=20));
            }
            snap.links.push(SnapshotLink { edge: e, values });
        }
        snap.links.shuffle(rng);
    }
    snap
}

/// Declarations plus a random base and a random scoped conjunction of
/// linear constraints over three integer constants.
pub fn random_scope_fixture<R: Rng>(rng: &mut R) -> (dynet::formula::Script, Vec<dynet::formula::Term>) {
    use dynet::formula::{Script, Sort, Term};
    let vars = ["a", "b", "c"];
    let atom = |rng: &mut R| {
        let lhs = if rng.gen_bool(0.5) {
            Term::var(*vars.choose(rng).unwrap())
        } else {
            Term::Add(vec![
                Term::var(*vars.choose(rng).unwrap()),
                Term::var(*vars.choose(rng).unwrap()),
            ])
        };
        let k = Term::int(rng.gen_range(-5..=5));
        match rng.gen_range(0..6) {
            0 => lhs.eq(k),
            1 => lhs.eq(k).not(),
            2 => lhs.lt(k),
            3 => lhs.le(k),
            4 => lhs.gt(k),
            _ => lhs.ge(k),
        }
    };
    let mut base = Script::new();
    for v in vars {
        base.declare_const(v, Sort::Int);
    }
    for _ in 0..rng.gen_range(1..=4) {
        let t = atom(rng);
        base.assert(t);
    }
    let extra = (0..rng.gen_range(1..=3)).map(|_| atom(rng)).collect();
    (base, extra)
}
