//! Static snapshots: sampling, fault injection and the line formats.
//!
//! Snapshot stream, one JSON object per line:
//!
//! ```text
//! {"seq":0,"links":[{"src":1,"dst":2,"params":{"bandwidth":5,"delay":1}}]}
//! ```
//!
//! Alert stream, one JSON object per line:
//!
//! ```text
//! {"kind":"param_violation","src":1,"dst":2,"param":"delay","observed":5,"seq":0}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{Error as _, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::model::{param_domain, DynamicNetwork, Edge, NodeId, SnapshotLink, StaticSnapshot};
use crate::monitor::{Alert, AlertKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at character {offset}: {message}")]
pub struct SnapshotParseError {
    /// Zero-based character offset into the line.
    pub offset: usize,
    pub message: String,
}

fn offset_of(text: &str, err: &serde_json::Error) -> usize {
    if err.is_eof() {
        return text.chars().count();
    }
    // serde_json reports 1-based line and column (column counted in bytes).
    let mut byte = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i + 1 == err.line() {
            byte += err.column().saturating_sub(1).min(line.len());
            break;
        }
        byte += line.len();
    }
    let byte = byte.min(text.len());
    text.char_indices().take_while(|(b, _)| *b < byte).count()
}

fn json_err(text: &str, base: usize, err: serde_json::Error) -> SnapshotParseError {
    SnapshotParseError {
        offset: base + offset_of(text, &err),
        message: err.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineDoc<'a> {
    seq: u64,
    #[serde(borrow)]
    links: Vec<&'a RawValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    src: NodeId,
    dst: NodeId,
    #[serde(default, deserialize_with = "unique_keys")]
    params: BTreeMap<String, i64>,
}

fn unique_keys<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, i64>, D::Error> {
    struct V;
    impl<'de> Visitor<'de> for V {
        type Value = BTreeMap<String, i64>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map from parameter names to integers")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((k, v)) = map.next_entry::<String, i64>()? {
                if out.contains_key(&k) {
                    return Err(A::Error::custom(format!("duplicate parameter `{k}`")));
                }
                out.insert(k, v);
            }
            Ok(out)
        }
    }
    d.deserialize_map(V)
}

/// Parses one snapshot line.
pub fn parse_snapshot_line(text: &str) -> Result<StaticSnapshot, SnapshotParseError> {
    let doc: LineDoc = serde_json::from_str(text).map_err(|e| json_err(text, 0, e))?;
    let mut seen = HashSet::new();
    let mut links = Vec::with_capacity(doc.links.len());
    for raw in doc.links {
        let src_text = raw.get();
        let byte = src_text.as_ptr() as usize - text.as_ptr() as usize;
        let base = text[..byte].chars().count();
        let link: LinkDoc = serde_json::from_str(src_text).map_err(|e| json_err(src_text, base, e))?;
        let edge = Edge::new(link.src, link.dst).map_err(|e| SnapshotParseError {
            offset: base,
            message: e.to_string(),
        })?;
        if !seen.insert(edge) {
            return Err(SnapshotParseError {
                offset: base,
                message: format!("duplicate link {edge}"),
            });
        }
        links.push(SnapshotLink {
            edge,
            values: link.params,
        });
    }
    Ok(StaticSnapshot {
        seq: doc.seq,
        links,
    })
}

#[derive(Serialize)]
struct LinkOut<'a> {
    src: u64,
    dst: u64,
    params: &'a BTreeMap<String, i64>,
}

#[derive(Serialize)]
struct LineOut<'a> {
    seq: u64,
    links: Vec<LinkOut<'a>>,
}

/// One line of JSON, no trailing newline. Links keep their stored order and
/// parameter names are sorted.
pub fn serialize_snapshot(snap: &StaticSnapshot) -> String {
    let out = LineOut {
        seq: snap.seq,
        links: snap
            .links
            .iter()
            .map(|l| LinkOut {
                src: l.edge.src().get(),
                dst: l.edge.dst().get(),
                params: &l.values,
            })
            .collect(),
    };
    serde_json::to_string(&out).expect("snapshot serializes")
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_seed(parts: [u64; 4]) -> u64 {
    parts.iter().fold(0, |h, &p| splitmix64(h ^ p))
}

/// A conformant snapshot with every edge of `net`, in network order.
///
/// Each value is drawn uniformly from its domain by a ChaCha8 generator whose
/// seed is SplitMix64 folded over `(seed, seq, edge index, parameter index)`,
/// so any single value can be reproduced independently of the others.
pub fn sample_snapshot(net: &DynamicNetwork, seed: u64, seq: u64) -> StaticSnapshot {
    let links = net
        .edges()
        .iter()
        .enumerate()
        .map(|(ei, e)| {
            let values = net
                .params()
                .iter()
                .enumerate()
                .filter_map(|(pi, p)| {
                    let domain = p.domain_of(e)?;
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(stream_seed([seed, seq, ei as u64, pi as u64]));
                    let k = rng.gen_range(0..domain.len());
                    Some((p.name.clone(), domain.nth(k).expect("k < len")))
                })
                .collect();
            SnapshotLink { edge: *e, values }
        })
        .collect();
    StaticSnapshot { seq, links }
}

/// A single deliberate deviation from a conformant snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultSpec {
    ExtraLink(Edge),
    DropLink(Edge),
    ParamOutOfDomain { edge: Edge, param: String, value: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("fault not applicable: {0}")]
pub struct FaultInapplicable(pub String);

fn parse_edge(s: &str) -> Result<Edge, String> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("expected SRC-DST, got `{s}`"))?;
    let id = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}"));
    Edge::from_ids(id(a)?, id(b)?).map_err(|e| e.to_string())
}

impl FromStr for FaultSpec {
    type Err = String;

    /// `extra:SRC-DST`, `drop:SRC-DST` or `param:SRC-DST:NAME=VALUE`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("malformed fault `{s}`"))?;
        match kind {
            "extra" => Ok(FaultSpec::ExtraLink(parse_edge(rest)?)),
            "drop" => Ok(FaultSpec::DropLink(parse_edge(rest)?)),
            "param" => {
                let (edge, assign) = rest
                    .split_once(':')
                    .ok_or_else(|| format!("expected param:SRC-DST:NAME=VALUE, got `{s}`"))?;
                let (name, value) = assign
                    .split_once('=')
                    .ok_or_else(|| format!("expected NAME=VALUE, got `{assign}`"))?;
                Ok(FaultSpec::ParamOutOfDomain {
                    edge: parse_edge(edge)?,
                    param: name.to_string(),
                    value: value
                        .trim()
                        .parse()
                        .map_err(|e| format!("`{value}`: {e}"))?,
                })
            }
            other => Err(format!("unknown fault kind `{other}`")),
        }
    }
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultSpec::ExtraLink(e) => write!(f, "extra:{}-{}", e.src(), e.dst()),
            FaultSpec::DropLink(e) => write!(f, "drop:{}-{}", e.src(), e.dst()),
            FaultSpec::ParamOutOfDomain { edge, param, value } => {
                write!(f, "param:{}-{}:{param}={value}", edge.src(), edge.dst())
            }
        }
    }
}

/// Applies `fault` to `snap`, leaving every other link and value untouched.
/// An extra link is appended with no parameter values.
pub fn inject_fault(
    net: &DynamicNetwork,
    snap: &StaticSnapshot,
    fault: &FaultSpec,
) -> Result<StaticSnapshot, FaultInapplicable> {
    let mut out = snap.clone();
    match fault {
        FaultSpec::ExtraLink(e) => {
            if snap.contains_edge(e) {
                return Err(FaultInapplicable(format!("link {e} already in the snapshot")));
            }
            out.links.push(SnapshotLink {
                edge: *e,
                values: BTreeMap::new(),
            });
        }
        FaultSpec::DropLink(e) => {
            if !snap.contains_edge(e) {
                return Err(FaultInapplicable(format!("link {e} not in the snapshot")));
            }
            out.links.retain(|l| l.edge != *e);
        }
        FaultSpec::ParamOutOfDomain { edge, param, value } => {
            let domain =
                param_domain(net, param, edge).map_err(|e| FaultInapplicable(e.to_string()))?;
            if domain.contains(*value) {
                return Err(FaultInapplicable(format!(
                    "{value} is inside the domain {domain} of `{param}` on {edge}"
                )));
            }
            let link = out
                .links
                .iter_mut()
                .find(|l| l.edge == *edge)
                .ok_or_else(|| FaultInapplicable(format!("link {edge} not in the snapshot")))?;
            link.values.insert(param.clone(), *value);
        }
    }
    Ok(out)
}

/// Wire form of an [`Alert`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertRecord {
    pub kind: AlertKind,
    pub src: u64,
    pub dst: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<i64>,
    pub seq: u64,
}

impl From<&Alert> for AlertRecord {
    fn from(a: &Alert) -> Self {
        AlertRecord {
            kind: a.kind,
            src: a.edge.src().get(),
            dst: a.edge.dst().get(),
            param: a.param.clone(),
            observed: a.observed,
            seq: a.snapshot_seq,
        }
    }
}

impl TryFrom<AlertRecord> for Alert {
    type Error = String;

    fn try_from(r: AlertRecord) -> Result<Self, Self::Error> {
        Ok(Alert {
            kind: r.kind,
            edge: Edge::from_ids(r.src, r.dst).map_err(|e| e.to_string())?,
            param: r.param,
            observed: r.observed,
            snapshot_seq: r.seq,
        })
    }
}

pub fn serialize_alert(alert: &Alert) -> String {
    serde_json::to_string(&AlertRecord::from(alert)).expect("alert serializes")
}

pub fn parse_alert_line(text: &str) -> Result<Alert, SnapshotParseError> {
    let rec: AlertRecord = serde_json::from_str(text).map_err(|e| json_err(text, 0, e))?;
    Alert::try_from(rec).map_err(|message| SnapshotParseError { offset: 0, message })
}

/// Diagnostic line emitted on the alert stream for an unreadable snapshot.
pub fn serialize_malformed(line_no: u64, err: &SnapshotParseError) -> String {
    serde_json::json!({
        "kind": "malformed_snapshot",
        "line": line_no,
        "offset": err.offset,
        "error": err.message,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EdgeGuard, IntSet, ParamRule, ParamSpec};

    fn tiny_net() -> DynamicNetwork {
        DynamicNetwork::new(
            vec![NodeId::new(1).unwrap(), NodeId::new(2).unwrap()],
            vec![Edge::from_ids(1, 2).unwrap(), Edge::from_ids(2, 1).unwrap()],
            vec![
                ParamSpec::new(
                    "a",
                    vec![ParamRule {
                        guard: EdgeGuard::always(),
                        domain: IntSet::point(4),
                    }],
                ),
                ParamSpec::new(
                    "b",
                    vec![ParamRule {
                        guard: EdgeGuard::always(),
                        domain: IntSet::point(-3),
                    }],
                ),
            ],
        )
    }

    #[test]
    fn point_domains_always_sample_their_point() {
        let net = tiny_net();
        for seed in 0..20 {
            let s = sample_snapshot(&net, seed, seed * 7);
            assert_eq!(s.links.len(), 2);
            for l in &s.links {
                assert_eq!(l.values["a"], 4);
                assert_eq!(l.values["b"], -3);
            }
        }
    }

    #[test]
    fn line_format() {
        let s = sample_snapshot(&tiny_net(), 0, 9);
        assert_eq!(
            serialize_snapshot(&s),
            r#"{"seq":9,"links":[{"src":1,"dst":2,"params":{"a":4,"b":-3}},{"src":2,"dst":1,"params":{"a":4,"b":-3}}]}"#
        );
        assert_eq!(parse_snapshot_line(&serialize_snapshot(&s)).unwrap(), s);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let e = parse_snapshot_line(r#"{"seq":0,"links":[{"src":1,"dst":2,"params":{"a":1.5}}]}"#)
            .unwrap_err();
        assert!(e.offset > 17 && e.offset <= 52, "{e}");

        let line = r#"{"seq":0,"links":[{"src":1,"dst":2},{"src":1,"dst":2}]}"#;
        let e = parse_snapshot_line(line).unwrap_err();
        assert!(e.message.contains("duplicate"));
        assert_eq!(e.offset, line.find(r#"{"src":1,"dst":2}]"#).unwrap());

        let e = parse_snapshot_line(r#"{"seq":0,"links":[{"src":1,"dst":2,"params":{"a":1,"a":2}}]}"#)
            .unwrap_err();
        assert!(e.message.contains("duplicate parameter"));

        assert!(parse_snapshot_line(r#"{"seq":0,"links":[{"src":3,"dst":3}]}"#).is_err());
        assert!(parse_snapshot_line(r#"{"seq":-1,"links":[]}"#).is_err());
        assert!(parse_snapshot_line(r#"{"seq":0}"#).is_err());
        assert_eq!(parse_snapshot_line("{\"seq\":0,").unwrap_err().offset, 9);
    }

    #[test]
    fn fault_syntax_round_trips() {
        for s in ["extra:2-3", "drop:1-2", "param:1-2:delay=5", "param:4-1:bw=-1"] {
            assert_eq!(s.parse::<FaultSpec>().unwrap().to_string(), s);
        }
        for bad in ["", "extra", "extra:2", "extra:2-2", "zap:1-2", "param:1-2:delay", "param:1-2:d=x"] {
            assert!(bad.parse::<FaultSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn inapplicable_faults() {
        let net = tiny_net();
        let s = sample_snapshot(&net, 1, 0);
        let e12 = Edge::from_ids(1, 2).unwrap();
        assert!(inject_fault(&net, &s, &FaultSpec::ExtraLink(e12)).is_err());
        let dropped = inject_fault(&net, &s, &FaultSpec::DropLink(e12)).unwrap();
        assert!(inject_fault(&net, &dropped, &FaultSpec::DropLink(e12)).is_err());
        let in_domain = FaultSpec::ParamOutOfDomain {
            edge: e12,
            param: "a".into(),
            value: 4,
        };
        assert!(inject_fault(&net, &s, &in_domain).is_err());
        let unknown = FaultSpec::ParamOutOfDomain {
            edge: e12,
            param: "zz".into(),
            value: 4,
        };
        assert!(inject_fault(&net, &s, &unknown).is_err());
    }

    #[test]
    fn alert_lines() {
        let a = Alert {
            kind: AlertKind::ParamViolation,
            edge: Edge::from_ids(1, 2).unwrap(),
            param: Some("delay".into()),
            observed: Some(5),
            snapshot_seq: 3,
        };
        let line = serialize_alert(&a);
        assert_eq!(
            line,
            r#"{"kind":"param_violation","src":1,"dst":2,"param":"delay","observed":5,"seq":3}"#
        );
        assert_eq!(parse_alert_line(&line).unwrap(), a);
        let l = Alert {
            kind: AlertKind::LinkViolation,
            edge: Edge::from_ids(2, 3).unwrap(),
            param: None,
            observed: None,
            snapshot_seq: 0,
        };
        assert_eq!(
            serialize_alert(&l),
            r#"{"kind":"link_violation","src":2,"dst":3,"seq":0}"#
        );
    }
}
