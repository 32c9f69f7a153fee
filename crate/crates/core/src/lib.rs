//! Model checking and run-time verification of dynamic network emulators.
//!
//! A dynamic network is a fixed directed topology whose links carry integer
//! parameters (bandwidth, delay, ...) that may take any value from a declared
//! set. The crate compiles such a description into a many-sorted first-order
//! formula, checks it and user properties with an external SMT solver, and
//! verifies streams of concrete snapshots produced by an emulator against it.

pub mod checker;
pub mod cli;
pub mod encoder;
pub mod formula;
pub mod model;
pub mod monitor;
pub mod netdoc;
pub mod snapshot;
pub mod solver;

pub use checker::{
    check_consistency, check_properties, parse_properties, CheckReport, Classification,
    PropertiesScope, Property, PropertyBody,
};
pub use encoder::{encode_network, encode_property};
pub use model::{
    param_domain, validate_network, DynamicNetwork, Edge, IntSet, NodeId, StaticSnapshot,
};
pub use monitor::{
    conformance_oracle, run_monitor, verify_snapshot, Alert, AlertKind, MonitorOptions,
    MonitorSummary, ScopeMode,
};
pub use netdoc::{parse_network, serialize_network};
pub use snapshot::{inject_fault, sample_snapshot, FaultSpec};
pub use solver::{SatResult, SolverConfig, SolverError, SolverSession};
