//! Run-time verification of a snapshot stream against a network description.
//!
//! For every observed link `(va, vb)` the monitor asks the solver whether the
//! network formula admits the link at some edge index; an unsatisfiable answer
//! is a wrongly implemented link. For admitted links, each observed parameter
//! value is equated with the network's parameter function at that link and
//! checked the same way. Link facts are retained for the rest of the snapshot
//! (or the whole run in [`ScopeMode::Accumulate`]); parameter equalities are
//! always checked in their own scope.
//!
//! [`conformance_oracle`] computes the same alerts by direct set membership.

use std::io::{BufRead, Write};
use std::num::NonZeroU64;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{encode_link_presence, encode_network, encode_param_equality, EncodeError};
use crate::model::{param_domain, DynamicNetwork, Edge, StaticSnapshot};
use crate::snapshot::{parse_snapshot_line, serialize_alert, serialize_malformed};
use crate::solver::{SatResult, SolverConfig, SolverError, SolverSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    /// Observed link is not part of the network.
    LinkViolation,
    /// Observed value lies outside the parameter's domain on that link.
    ParamViolation,
    /// Network link absent from the snapshot (strict topology only).
    MissingLink,
    /// Declared parameter without an observed value.
    MissingParamValue,
    /// Observed value for a parameter the network does not declare.
    UnknownParam,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Alert {
    pub kind: AlertKind,
    pub edge: Edge,
    pub param: Option<String>,
    pub observed: Option<i64>,
    pub snapshot_seq: u64,
}

impl Alert {
    fn new(kind: AlertKind, edge: Edge, seq: u64) -> Self {
        Alert {
            kind,
            edge,
            param: None,
            observed: None,
            snapshot_seq: seq,
        }
    }

    fn with_param(mut self, name: &str, observed: Option<i64>) -> Self {
        self.param = Some(name.to_string());
        self.observed = observed;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeMode {
    /// Link facts live in a scope popped after each snapshot.
    #[default]
    PerSnapshotScopes,
    /// Link facts are asserted at base level and never retracted.
    Accumulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorOptions {
    /// Also report network links missing from a snapshot.
    pub strict_topology: bool,
    /// Stop after this many snapshots.
    pub stop_after: Option<NonZeroU64>,
    pub scope_mode: ScopeMode,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions {
            strict_topology: true,
            stop_after: None,
            scope_mode: ScopeMode::PerSnapshotScopes,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MonitorSummary {
    pub snapshots_processed: u64,
    pub alerts_emitted: u64,
    pub solver_checks_issued: u64,
    pub unknown_verdicts: u64,
    pub malformed_lines: u64,
    pub solver_restarts: u64,
}

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver failed again after a restart: {source}")]
    SolverDied {
        summary: MonitorSummary,
        #[source]
        source: SolverError,
    },
}

/// Alerts for one snapshot plus solver accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SnapshotReport {
    pub alerts: Vec<Alert>,
    pub checks: u64,
    pub unknown_verdicts: u64,
}

fn scoped_check(session: &mut SolverSession, t: &crate::formula::Term) -> Result<SatResult, SolverError> {
    session.push()?;
    session.assert_term(t)?;
    let verdict = session.check_sat()?;
    session.pop()?;
    Ok(verdict)
}

/// Checks one snapshot. `session` must hold exactly the network formula.
///
/// Alerts come out in processing order: per link in snapshot order, the
/// link verdict, then each declared parameter in network order, then values
/// for undeclared parameters by name; finally missing links in network order.
pub fn verify_snapshot(
    session: &mut SolverSession,
    net: &DynamicNetwork,
    snap: &StaticSnapshot,
    opts: &MonitorOptions,
) -> Result<SnapshotReport, MonitorError> {
    let base = session.depth();
    if opts.scope_mode == ScopeMode::PerSnapshotScopes {
        session.push()?;
    }
    let result = verify_links(session, net, snap, opts);
    if opts.scope_mode == ScopeMode::PerSnapshotScopes && session.is_open() {
        session.pop_to(base)?;
    }
    result
}

fn verify_links(
    session: &mut SolverSession,
    net: &DynamicNetwork,
    snap: &StaticSnapshot,
    opts: &MonitorOptions,
) -> Result<SnapshotReport, MonitorError> {
    let mut report = SnapshotReport::default();
    let seq = snap.seq;
    for link in &snap.links {
        let presence = encode_link_presence(&link.edge);
        report.checks += 1;
        match scoped_check(session, &presence)? {
            SatResult::Unsat => {
                report
                    .alerts
                    .push(Alert::new(AlertKind::LinkViolation, link.edge, seq));
                continue;
            }
            SatResult::Sat => session.assert_term(&presence)?,
            SatResult::Unknown(_) | SatResult::Timeout => report.unknown_verdicts += 1,
        }
        for p in net.params() {
            let Some(&observed) = link.values.get(&p.name) else {
                report.alerts.push(
                    Alert::new(AlertKind::MissingParamValue, link.edge, seq).with_param(&p.name, None),
                );
                continue;
            };
            let eq = encode_param_equality(net, &p.name, &link.edge, observed)?;
            report.checks += 1;
            match scoped_check(session, &eq)? {
                SatResult::Unsat => report.alerts.push(
                    Alert::new(AlertKind::ParamViolation, link.edge, seq)
                        .with_param(&p.name, Some(observed)),
                ),
                SatResult::Sat => {}
                SatResult::Unknown(_) | SatResult::Timeout => report.unknown_verdicts += 1,
            }
        }
        for (name, &v) in &link.values {
            if net.param(name).is_none() {
                report.alerts.push(
                    Alert::new(AlertKind::UnknownParam, link.edge, seq).with_param(name, Some(v)),
                );
            }
        }
    }
    report.alerts.extend(missing_links(net, snap, opts));
    Ok(report)
}

fn missing_links(net: &DynamicNetwork, snap: &StaticSnapshot, opts: &MonitorOptions) -> Vec<Alert> {
    if !opts.strict_topology {
        return Vec::new();
    }
    net.edges()
        .iter()
        .filter(|e| !snap.contains_edge(e))
        .map(|e| Alert::new(AlertKind::MissingLink, *e, snap.seq))
        .collect()
}

/// Solver-free conformance check by direct membership tests. Produces the
/// same alerts, in the same order, as [`verify_snapshot`] does when every
/// solver verdict is decided.
pub fn conformance_oracle(
    net: &DynamicNetwork,
    snap: &StaticSnapshot,
    opts: &MonitorOptions,
) -> Vec<Alert> {
    let seq = snap.seq;
    let mut alerts = Vec::new();
    for link in &snap.links {
        if !net.contains_edge(&link.edge) {
            alerts.push(Alert::new(AlertKind::LinkViolation, link.edge, seq));
            continue;
        }
        for p in net.params() {
            match link.values.get(&p.name) {
                None => alerts.push(
                    Alert::new(AlertKind::MissingParamValue, link.edge, seq).with_param(&p.name, None),
                ),
                Some(&v) => {
                    let domain = param_domain(net, &p.name, &link.edge)
                        .expect("validated network, edge present");
                    if !domain.contains(v) {
                        alerts.push(
                            Alert::new(AlertKind::ParamViolation, link.edge, seq)
                                .with_param(&p.name, Some(v)),
                        );
                    }
                }
            }
        }
        for (name, &v) in &link.values {
            if net.param(name).is_none() {
                alerts.push(Alert::new(AlertKind::UnknownParam, link.edge, seq).with_param(name, Some(v)));
            }
        }
    }
    alerts.extend(missing_links(net, snap, opts));
    alerts
}

/// Opens a session holding the network formula.
pub fn open_monitor_session(
    net: &DynamicNetwork,
    cfg: &SolverConfig,
) -> Result<SolverSession, SolverError> {
    let mut session = SolverSession::open(cfg.clone())?;
    session.assert_script(&encode_network(net))?;
    Ok(session)
}

fn is_session_failure(e: &SolverError) -> bool {
    matches!(
        e,
        SolverError::Crashed { .. }
            | SolverError::SessionClosed
            | SolverError::Unresponsive(_)
            | SolverError::Io(_)
    )
}

/// Reads snapshot lines from `source` until it ends, `stop_after` snapshots
/// have been processed, or `working` is cleared, writing alert lines to
/// `sink` as each snapshot is verified.
///
/// Unreadable lines produce a diagnostic record on `sink` and are skipped.
/// If the solver dies, it is restarted once with the network formula
/// re-asserted and the snapshot is retried; a second failure ends the run.
pub fn run_monitor<R: BufRead, W: Write>(
    net: &DynamicNetwork,
    source: R,
    sink: &mut W,
    cfg: &SolverConfig,
    opts: &MonitorOptions,
    working: &AtomicBool,
) -> Result<MonitorSummary, MonitorError> {
    let mut session = open_monitor_session(net, cfg)?;
    let mut summary = MonitorSummary::default();
    let mut restarted = false;

    for (idx, line) in source.lines().enumerate() {
        if !working.load(Ordering::SeqCst) {
            break;
        }
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let snap = match parse_snapshot_line(&line) {
            Ok(s) => s,
            Err(e) => {
                writeln!(sink, "{}", serialize_malformed(idx as u64 + 1, &e))?;
                sink.flush()?;
                summary.malformed_lines += 1;
                continue;
            }
        };

        let report = match verify_snapshot(&mut session, net, &snap, opts) {
            Ok(r) => r,
            Err(MonitorError::Solver(source)) if is_session_failure(&source) => {
                if restarted {
                    return Err(MonitorError::SolverDied { summary, source });
                }
                restarted = true;
                summary.solver_restarts += 1;
                let retry = open_monitor_session(net, cfg)
                    .map_err(MonitorError::from)
                    .and_then(|s| {
                        session = s;
                        verify_snapshot(&mut session, net, &snap, opts)
                    });
                match retry {
                    Ok(r) => r,
                    Err(MonitorError::Solver(source)) => {
                        return Err(MonitorError::SolverDied { summary, source })
                    }
                    Err(other) => return Err(other),
                }
            }
            Err(e) => return Err(e),
        };

        summary.snapshots_processed += 1;
        summary.solver_checks_issued += report.checks;
        summary.unknown_verdicts += report.unknown_verdicts;
        for a in &report.alerts {
            writeln!(sink, "{}", serialize_alert(a))?;
            summary.alerts_emitted += 1;
        }
        sink.flush()?;

        if opts
            .stop_after
            .is_some_and(|n| summary.snapshots_processed >= n.get())
        {
            break;
        }
    }
    session.close();
    Ok(summary)
}
