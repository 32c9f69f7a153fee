//! The `dynet` command line.
//!
//! Exit codes: 0 success, 1 negative verification result, 2 usage or input
//! error, 3 solver or infrastructure error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::num::NonZeroU64;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{ArgAction, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::checker::{check_properties, parse_properties, CheckError, CheckReport, Classification, PropertiesScope};
use crate::encoder::encode_network;
use crate::formula::{render_smtlib_with, Dialect};
use crate::model::{validate_network, DynamicNetwork};
use crate::monitor::{run_monitor, MonitorError, MonitorOptions, MonitorSummary, ScopeMode};
use crate::netdoc::parse_network;
use crate::snapshot::{inject_fault, sample_snapshot, serialize_snapshot, FaultSpec};
use crate::solver::{SatResult, SolverConfig, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Exit {
    Success = 0,
    Negative = 1,
    Usage = 2,
    Infrastructure = 3,
}

impl From<Exit> for std::process::ExitCode {
    fn from(e: Exit) -> Self {
        std::process::ExitCode::from(e as u8)
    }
}

#[derive(Debug, Parser)]
#[command(name = "dynet", version, about = "Model checking and run-time verification of dynamic networks")]
pub struct Cli {
    /// Solver command line (default: $DYNET_SOLVER_CMD, else `z3 -in`).
    #[arg(long, global = true)]
    solver: Option<String>,

    /// Per-check solver timeout in milliseconds.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    timeout_ms: Option<u64>,

    /// Datatype declaration syntax sent to the solver and emitted by `compile`.
    #[arg(long, global = true, value_enum, default_value_t = DialectArg::Legacy)]
    dialect: DialectArg,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DialectArg {
    Legacy,
    Standard,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Structured,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    Vocabulary,
    FullModelDecls,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeModeArg {
    PerSnapshot,
    Accumulate,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Parse and validate a network description.
    Validate { net: PathBuf },
    /// Print the SMT-LIB encoding of a network.
    Compile {
        net: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check properties against a network.
    Check {
        net: PathBuf,
        /// Property file; without one only consistency is decided.
        #[arg(long)]
        props: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
        #[arg(long, value_enum, default_value_t = ScopeArg::Vocabulary)]
        properties_scope: ScopeArg,
    },
    /// Verify a stream of snapshots, printing one alert per line.
    Monitor {
        net: PathBuf,
        /// Snapshot file, or `-` for standard input.
        #[arg(long, default_value = "-")]
        snapshots: String,
        /// Report network links absent from a snapshot.
        #[arg(long, action = ArgAction::Set, default_value_t = true)]
        strict_topology: bool,
        #[arg(long)]
        stop_after: Option<NonZeroU64>,
        #[arg(long, value_enum, default_value_t = ScopeModeArg::PerSnapshot)]
        scope_mode: ScopeModeArg,
    },
    /// Print sampled conformant snapshots, optionally with a fault.
    Simulate {
        net: PathBuf,
        #[arg(long)]
        count: u64,
        #[arg(long)]
        seed: u64,
        /// Fault applied to every snapshot: extra:S-D, drop:S-D or param:S-D:NAME=VALUE.
        #[arg(long)]
        fault: Option<FaultSpec>,
    },
}

/// Failure of a command, mapped onto an exit code.
enum Failure {
    Input(String),
    Solver(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn solver_failure(e: SolverError) -> Failure {
    match e {
        // Bad --solver / --timeout-ms values are usage errors.
        SolverError::Config(m) => Failure::Input(m),
        other => Failure::Solver(other.to_string()),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// its exit code.
pub fn run_cli<I, T>(args: I) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Exit::Success;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprint!("{msg}");
            if !msg.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return Exit::Usage;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            Exit::Usage
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver error: {m}");
            Exit::Infrastructure
        }
    }
}

fn solver_config(cli: &Cli) -> Result<SolverConfig, Failure> {
    let mut cfg = match &cli.solver {
        Some(line) => SolverConfig::from_command_line(line),
        None => SolverConfig::from_env(),
    };
    if let Some(ms) = cli.timeout_ms {
        cfg = cfg.with_timeout(Duration::from_millis(ms));
    }
    cfg.dialect = dialect(cli.dialect);
    cfg.validate().map_err(solver_failure)?;
    Ok(cfg)
}

fn dialect(d: DialectArg) -> Dialect {
    match d {
        DialectArg::Legacy => Dialect::Legacy,
        DialectArg::Standard => Dialect::Standard,
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<DynamicNetwork, Failure> {
    let text = read_file(path)?;
    let net = parse_network(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    net.validated().map_err(|issues| {
        let list: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
        Failure::Input(format!("{}: invalid network: {}", path.display(), list.join("; ")))
    })
}

fn run(cli: Cli) -> Result<Exit, Failure> {
    match &cli.command {
        Cmd::Validate { net } => validate(net),
        Cmd::Compile { net, output } => compile(net, output.as_deref(), dialect(cli.dialect)),
        Cmd::Check {
            net,
            props,
            format,
            properties_scope,
        } => {
            let cfg = solver_config(&cli)?;
            let scope = match properties_scope {
                ScopeArg::Vocabulary => PropertiesScope::Vocabulary,
                ScopeArg::FullModelDecls => PropertiesScope::FullModelDecls,
            };
            check(net, props.as_deref(), *format, scope, &cfg)
        }
        Cmd::Monitor {
            net,
            snapshots,
            strict_topology,
            stop_after,
            scope_mode,
        } => {
            let cfg = solver_config(&cli)?;
            let opts = MonitorOptions {
                strict_topology: *strict_topology,
                stop_after: *stop_after,
                scope_mode: match scope_mode {
                    ScopeModeArg::PerSnapshot => ScopeMode::PerSnapshotScopes,
                    ScopeModeArg::Accumulate => ScopeMode::Accumulate,
                },
            };
            monitor(net, snapshots, &cfg, &opts)
        }
        Cmd::Simulate {
            net,
            count,
            seed,
            fault,
        } => simulate(net, *count, *seed, fault.as_ref()),
    }
}

fn validate(path: &Path) -> Result<Exit, Failure> {
    let text = read_file(path)?;
    let net = parse_network(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let issues = validate_network(&net);
    if issues.is_empty() {
        println!(
            "ok: {} nodes, {} edges, {} parameters",
            net.nodes().len(),
            net.edges().len(),
            net.params().len()
        );
        return Ok(Exit::Success);
    }
    for i in &issues {
        println!("{i}");
    }
    Ok(Exit::Negative)
}

fn compile(path: &Path, output: Option<&Path>, dialect: Dialect) -> Result<Exit, Failure> {
    let net = load_network(path)?;
    let text = render_smtlib_with(&encode_network(&net), dialect);
    match output {
        Some(out) => std::fs::write(out, text)
            .map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(Exit::Success)
}

fn verdict_str(v: &SatResult) -> String {
    match v {
        SatResult::Sat => "sat".into(),
        SatResult::Unsat => "unsat".into(),
        SatResult::Unknown(reason) => format!("unknown ({reason})"),
        SatResult::Timeout => "timeout".into(),
    }
}

fn check(
    path: &Path,
    props: Option<&Path>,
    format: Format,
    scope: PropertiesScope,
    cfg: &SolverConfig,
) -> Result<Exit, Failure> {
    let net = load_network(path)?;
    let props = match props {
        Some(p) => parse_properties(&read_file(p)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => Vec::new(),
    };
    let report: CheckReport = match check_properties(&net, &props, cfg, scope) {
        Ok(r) => r,
        Err(CheckError::Solver(e)) => return Err(solver_failure(e)),
        Err(e) => return Err(Failure::Input(e.to_string())),
    };
    match format {
        Format::Human => {
            println!("model:      {}", verdict_str(&report.model_verdict));
            println!("properties: {}", verdict_str(&report.properties_verdict));
            println!("joint:      {}", verdict_str(&report.joint_verdict));
            println!("{}", report.classification);
        }
        Format::Structured => {
            let doc = json!({
                "model": verdict_str(&report.model_verdict),
                "properties": verdict_str(&report.properties_verdict),
                "joint": verdict_str(&report.joint_verdict),
                "classification": report.classification.to_string(),
            });
            println!("{doc}");
        }
    }
    Ok(match report.classification {
        Classification::Holds => Exit::Success,
        Classification::Inconclusive => Exit::Infrastructure,
        Classification::Conflict
        | Classification::ModelInconsistent
        | Classification::PropertiesInconsistent => Exit::Negative,
    })
}

fn interrupt_flag() -> Arc<AtomicBool> {
    let working = Arc::new(AtomicBool::new(true));
    let flag = working.clone();
    // Only the first handler per process can be installed; later calls keep it.
    let _ = ctrlc::set_handler(move || flag.store(false, Ordering::SeqCst));
    working
}

fn print_summary(s: &MonitorSummary) {
    eprintln!(
        "snapshots={} alerts={} checks={} unknown={} malformed={} restarts={}",
        s.snapshots_processed,
        s.alerts_emitted,
        s.solver_checks_issued,
        s.unknown_verdicts,
        s.malformed_lines,
        s.solver_restarts
    );
}

fn monitor(path: &Path, snapshots: &str, cfg: &SolverConfig, opts: &MonitorOptions) -> Result<Exit, Failure> {
    let net = load_network(path)?;
    let source: Box<dyn BufRead> = if snapshots == "-" {
        Box::new(io::stdin().lock())
    } else {
        let f = File::open(snapshots).map_err(|e| Failure::Input(format!("{snapshots}: {e}")))?;
        Box::new(BufReader::new(f))
    };
    let working = interrupt_flag();
    let stdout = io::stdout();
    let mut sink = stdout.lock();
    let summary = match run_monitor(&net, source, &mut sink, cfg, opts, &working) {
        Ok(s) => s,
        Err(MonitorError::SolverDied { summary, source }) => {
            print_summary(&summary);
            return Err(Failure::Solver(source.to_string()));
        }
        Err(MonitorError::Solver(e)) => return Err(solver_failure(e)),
        Err(MonitorError::Io(e)) => return Err(Failure::Input(e.to_string())),
        Err(e @ MonitorError::Encode(_)) => return Err(Failure::Solver(e.to_string())),
    };
    print_summary(&summary);
    Ok(if summary.alerts_emitted > 0 {
        Exit::Negative
    } else if summary.malformed_lines > 0 {
        Exit::Usage
    } else {
        Exit::Success
    })
}

fn simulate(path: &Path, count: u64, seed: u64, fault: Option<&FaultSpec>) -> Result<Exit, Failure> {
    let net = load_network(path)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for seq in 0..count {
        let mut snap = sample_snapshot(&net, seed, seq);
        if let Some(f) = fault {
            snap = inject_fault(&net, &snap, f).map_err(|e| Failure::Input(e.to_string()))?;
        }
        writeln!(out, "{}", serialize_snapshot(&snap))?;
    }
    out.flush()?;
    Ok(Exit::Success)
}
