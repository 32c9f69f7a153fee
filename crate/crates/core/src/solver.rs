//! External SMT-LIB v2 solver driven over process pipes.
//!
//! Every batch of commands is followed by `(echo "<marker>")` and the reply
//! stream is read up to that marker, so errors can be attributed to the batch
//! that caused them. The session keeps a copy of every command sent per
//! assertion scope, which lets it respawn the solver and replay its state
//! after a hard timeout.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::formula::{render_command, Command as SmtCommand, Dialect, Script, Term};

/// Environment variable holding a whitespace-separated solver command line.
pub const SOLVER_ENV_VAR: &str = "DYNET_SOLVER_CMD";

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
/// Upper bound for non-solving commands (declarations, push, pop, ...).
const COMMAND_DEADLINE: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("failed to start solver `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver rejected session setup: {0}")]
    Handshake(String),
    #[error("solver reported an error: {message}")]
    SolverSyntax { message: String },
    #[error("symbol `{0}` is already declared in this session")]
    Redeclaration(String),
    #[error("solver session is closed")]
    SessionClosed,
    #[error("pop without a matching push")]
    PopUnderflow,
    #[error("unexpected solver reply: {0}")]
    Protocol(String),
    #[error("solver process terminated unexpectedly{}", stderr_suffix(.stderr))]
    Crashed { stderr: String },
    #[error("solver did not answer within {0:?}")]
    Unresponsive(Duration),
    #[error("i/o error talking to solver: {0}")]
    Io(#[from] std::io::Error),
}

fn stderr_suffix(stderr: &str) -> String {
    let s = stderr.trim();
    if s.is_empty() {
        String::new()
    } else {
        format!(": {s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    /// Executable followed by its arguments.
    pub command: Vec<String>,
    pub timeout_per_check: Duration,
    pub memory_note: Option<String>,
    pub dialect: Dialect,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::z3()
    }
}

impl SolverConfig {
    pub fn new(command: Vec<String>) -> Self {
        SolverConfig {
            command,
            timeout_per_check: DEFAULT_TIMEOUT,
            memory_note: None,
            dialect: Dialect::default(),
        }
    }

    /// `z3 -in`
    pub fn z3() -> Self {
        SolverConfig::new(vec!["z3".into(), "-in".into()])
    }

    /// Splits a command line on whitespace.
    pub fn from_command_line(line: &str) -> Self {
        SolverConfig::new(line.split_whitespace().map(str::to_string).collect())
    }

    /// The command from [`SOLVER_ENV_VAR`] if set and non-blank, `z3 -in`
    /// otherwise.
    pub fn from_env() -> Self {
        match std::env::var(SOLVER_ENV_VAR) {
            Ok(line) if !line.trim().is_empty() => SolverConfig::from_command_line(&line),
            _ => SolverConfig::z3(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout_per_check = timeout;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.command.is_empty() || self.command[0].is_empty() {
            return Err(SolverError::Config("empty solver command".into()));
        }
        if self.timeout_per_check.is_zero() {
            return Err(SolverError::Config("timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    Unknown(String),
    Timeout,
}

impl SatResult {
    pub fn is_decided(&self) -> bool {
        matches!(self, SatResult::Sat | SatResult::Unsat)
    }
}

impl fmt::Display for SatResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SatResult::Sat => f.write_str("sat"),
            SatResult::Unsat => f.write_str("unsat"),
            SatResult::Unknown(reason) if reason.is_empty() => f.write_str("unknown"),
            SatResult::Unknown(reason) => write!(f, "unknown ({reason})"),
            SatResult::Timeout => f.write_str("timeout"),
        }
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
}

impl Process {
    fn spawn(cfg: &SolverConfig) -> Result<Self, SolverError> {
        let mut child = Command::new(&cfg.command[0])
            .args(&cfg.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| SolverError::Spawn {
                command: cfg.command.join(" "),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");

        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                if let Ok(mut s) = sink.lock() {
                    s.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
        });
        Ok(Process {
            child,
            stdin,
            lines,
            stderr,
        })
    }

    fn stderr_text(&self) -> String {
        self.stderr.lock().map(|s| s.clone()).unwrap_or_default()
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        self.kill();
    }
}

#[derive(Debug, Default)]
struct Frame {
    commands: Vec<String>,
    declared: HashSet<String>,
}

enum ReadFailure {
    Deadline,
    Died,
}

/// Live solver process with an assertion-scope stack.
///
/// Exclusive-use: `&mut self` on every interaction.
pub struct SolverSession {
    cfg: SolverConfig,
    proc: Option<Process>,
    frames: Vec<Frame>,
    sync: u64,
    checks: u64,
    restarts: u64,
    native_timeout: bool,
}

impl fmt::Debug for SolverSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverSession")
            .field("command", &self.cfg.command)
            .field("depth", &self.depth())
            .field("open", &self.is_open())
            .finish()
    }
}

fn declared_names(cmd: &SmtCommand) -> Vec<String> {
    match cmd {
        SmtCommand::DeclareDatatype(d) => {
            let mut names = vec![d.name.clone()];
            for c in &d.constructors {
                names.push(c.name.clone());
                names.extend(c.fields.iter().map(|(s, _)| s.clone()));
            }
            names
        }
        SmtCommand::DeclareFun { name, .. } | SmtCommand::DeclareConst { name, .. } => {
            vec![name.clone()]
        }
        SmtCommand::Assert(_) => vec![],
    }
}

fn is_error_line(line: &str) -> bool {
    let l = line.trim_start();
    l.starts_with("(error") || l == "unsupported"
}

impl SolverSession {
    /// Starts the solver and configures it for incremental use.
    pub fn open(cfg: SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let mut session = SolverSession {
            cfg,
            proc: None,
            frames: vec![Frame::default()],
            sync: 0,
            checks: 0,
            restarts: 0,
            native_timeout: false,
        };
        session.start()?;
        Ok(session)
    }

    fn start(&mut self) -> Result<(), SolverError> {
        self.proc = Some(Process::spawn(&self.cfg)?);
        let setup = self.exchange("(set-option :print-success false)\n", COMMAND_DEADLINE);
        match setup {
            Ok(lines) if lines.iter().any(|l| is_error_line(l)) => {
                self.proc = None;
                return Err(SolverError::Handshake(lines.join("\n")));
            }
            Ok(_) => {}
            Err(e) => {
                self.proc = None;
                return Err(SolverError::Handshake(e.to_string()));
            }
        }
        // Solvers without `:timeout` still get the wall-clock deadline.
        let ms = self.cfg.timeout_per_check.as_millis().max(1);
        let reply = self.exchange(&format!("(set-option :timeout {ms})\n"), COMMAND_DEADLINE)?;
        self.native_timeout = !reply.iter().any(|l| is_error_line(l));
        Ok(())
    }

    /// Respawns the solver and replays every command of every open scope.
    pub fn restart(&mut self) -> Result<(), SolverError> {
        if let Some(mut p) = self.proc.take() {
            p.kill();
        }
        self.restarts += 1;
        self.start()?;
        let mut replay = String::new();
        for (i, frame) in self.frames.iter().enumerate() {
            if i > 0 {
                replay.push_str("(push 1)\n");
            }
            for c in &frame.commands {
                replay.push_str(c);
                replay.push('\n');
            }
        }
        if !replay.is_empty() {
            let reply = self.exchange(&replay, COMMAND_DEADLINE)?;
            if reply.iter().any(|l| is_error_line(l)) {
                return Err(SolverError::SolverSyntax {
                    message: reply.join("\n"),
                });
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn is_open(&self) -> bool {
        self.proc.is_some()
    }

    /// Number of open `push` scopes.
    pub fn depth(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn checks_issued(&self) -> u64 {
        self.checks
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    /// Everything the solver has written to its error stream so far.
    pub fn diagnostics(&self) -> String {
        self.proc.as_ref().map(Process::stderr_text).unwrap_or_default()
    }

    fn read_until(&mut self, marker: &str, deadline: Instant) -> Result<Vec<String>, ReadFailure> {
        let proc = self.proc.as_ref().expect("caller checked");
        let mut out = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match proc.lines.recv_timeout(left) {
                Ok(line) => {
                    let t = line.trim();
                    if t == marker || t.trim_matches('"') == marker {
                        return Ok(out);
                    }
                    if !t.is_empty() {
                        out.push(line);
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err(ReadFailure::Deadline),
                Err(RecvTimeoutError::Disconnected) => return Err(ReadFailure::Died),
            }
        }
    }

    fn send(&mut self, text: &str) -> Result<String, SolverError> {
        let proc = self.proc.as_mut().ok_or(SolverError::SessionClosed)?;
        self.sync += 1;
        let marker = format!("dynet-sync-{}", self.sync);
        let payload = format!("{text}(echo \"{marker}\")\n");
        if let Err(e) = proc
            .stdin
            .write_all(payload.as_bytes())
            .and_then(|_| proc.stdin.flush())
        {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                return Err(self.crashed());
            }
            return Err(e.into());
        }
        Ok(marker)
    }

    fn crashed(&mut self) -> SolverError {
        let stderr = self
            .proc
            .take()
            .map(|p| p.stderr_text())
            .unwrap_or_default();
        SolverError::Crashed { stderr }
    }

    /// Sends `text` and collects the reply lines.
    fn exchange(&mut self, text: &str, limit: Duration) -> Result<Vec<String>, SolverError> {
        let marker = self.send(text)?;
        match self.read_until(&marker, Instant::now() + limit) {
            Ok(lines) => Ok(lines),
            Err(ReadFailure::Died) => Err(self.crashed()),
            Err(ReadFailure::Deadline) => {
                if let Some(mut p) = self.proc.take() {
                    p.kill();
                }
                Err(SolverError::Unresponsive(limit))
            }
        }
    }

    fn command(&mut self, text: &str) -> Result<(), SolverError> {
        let reply = self.exchange(text, COMMAND_DEADLINE)?;
        if reply.iter().any(|l| is_error_line(l)) {
            return Err(SolverError::SolverSyntax {
                message: reply.join("\n"),
            });
        }
        if !reply.is_empty() {
            return Err(SolverError::Protocol(reply.join("\n")));
        }
        Ok(())
    }

    /// Liveness probe: returns what the solver echoes back.
    pub fn echo(&mut self, text: &str) -> Result<String, SolverError> {
        let escaped = text.replace('"', "\"\"");
        let reply = self.exchange(&format!("(echo \"{escaped}\")\n"), COMMAND_DEADLINE)?;
        Ok(reply.join("\n").trim().trim_matches('"').to_string())
    }

    /// Sends every command of `script` in order. Declarations already made in
    /// an enclosing or current scope are refused before anything is sent.
    pub fn assert_script(&mut self, script: &Script) -> Result<(), SolverError> {
        if !self.is_open() {
            return Err(SolverError::SessionClosed);
        }
        let mut fresh = HashSet::new();
        for cmd in &script.commands {
            for name in declared_names(cmd) {
                if self.frames.iter().any(|f| f.declared.contains(&name)) || !fresh.insert(name.clone())
                {
                    return Err(SolverError::Redeclaration(name));
                }
            }
        }
        let lines: Vec<String> = script
            .commands
            .iter()
            .map(|c| render_command(c, self.cfg.dialect))
            .collect();
        let mut text = lines.join("\n");
        text.push('\n');
        let frame = self.frames.last_mut().expect("base frame");
        frame.commands.extend(lines);
        frame.declared.extend(fresh);
        self.command(&text)
    }

    /// Asserts one Bool term in the current scope.
    pub fn assert_term(&mut self, t: &Term) -> Result<(), SolverError> {
        if !self.is_open() {
            return Err(SolverError::SessionClosed);
        }
        let line = render_command(&SmtCommand::Assert(t.clone()), self.cfg.dialect);
        let text = format!("{line}\n");
        self.frames
            .last_mut()
            .expect("base frame")
            .commands
            .push(line);
        self.command(&text)
    }

    pub fn push(&mut self) -> Result<(), SolverError> {
        self.command("(push 1)\n")?;
        self.frames.push(Frame::default());
        Ok(())
    }

    pub fn pop(&mut self) -> Result<(), SolverError> {
        if !self.is_open() {
            return Err(SolverError::SessionClosed);
        }
        if self.depth() == 0 {
            return Err(SolverError::PopUnderflow);
        }
        self.frames.pop();
        self.command("(pop 1)\n")
    }

    /// Pops until the scope depth is `depth`.
    pub fn pop_to(&mut self, depth: usize) -> Result<(), SolverError> {
        while self.depth() > depth {
            self.pop()?;
        }
        Ok(())
    }

    /// Decides the conjunction of all live assertions.
    ///
    /// A lapsed deadline yields [`SatResult::Timeout`]; if the solver had to
    /// be killed for it, it is restarted with the current scopes replayed.
    pub fn check_sat(&mut self) -> Result<SatResult, SolverError> {
        if !self.is_open() {
            return Err(SolverError::SessionClosed);
        }
        self.checks += 1;
        let budget = self.cfg.timeout_per_check;
        let grace = Duration::from_secs(1) + budget / 2;
        let marker = self.send("(check-sat)\n")?;
        let reply = match self.read_until(&marker, Instant::now() + budget + grace) {
            Ok(lines) => lines,
            Err(ReadFailure::Died) => return Err(self.crashed()),
            Err(ReadFailure::Deadline) => {
                self.restart()?;
                return Ok(SatResult::Timeout);
            }
        };
        if reply.iter().any(|l| is_error_line(l)) {
            return Err(SolverError::SolverSyntax {
                message: reply.join("\n"),
            });
        }
        match reply.iter().map(|l| l.trim()).collect::<Vec<_>>().as_slice() {
            ["sat"] => Ok(SatResult::Sat),
            ["unsat"] => Ok(SatResult::Unsat),
            ["unknown"] => {
                let reason = self.reason_unknown()?;
                let r = reason.to_ascii_lowercase();
                if r.contains("timeout") || r.contains("canceled") || r.contains("cancelled") {
                    Ok(SatResult::Timeout)
                } else {
                    Ok(SatResult::Unknown(reason))
                }
            }
            other => Err(SolverError::Protocol(other.join(" "))),
        }
    }

    fn reason_unknown(&mut self) -> Result<String, SolverError> {
        let reply = self.exchange("(get-info :reason-unknown)\n", COMMAND_DEADLINE)?;
        let text = reply.join(" ");
        if reply.iter().any(|l| is_error_line(l)) {
            return Ok(String::new());
        }
        // (:reason-unknown "...") or (:reason-unknown incomplete)
        let inner = text
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .trim_start_matches(":reason-unknown")
            .trim()
            .trim_matches('"');
        Ok(inner.to_string())
    }

    /// Whether the solver accepted the `:timeout` option.
    pub fn has_native_timeout(&self) -> bool {
        self.native_timeout
    }

    /// Sends `(exit)` and reaps the process.
    pub fn close(mut self) {
        if let Some(mut p) = self.proc.take() {
            let _ = p.stdin.write_all(b"(exit)\n");
            let _ = p.stdin.flush();
            let deadline = Instant::now() + Duration::from_millis(500);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = p.child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            p.kill();
        }
    }
}

/// Opens a session with `cfg`.
pub fn open_session(cfg: SolverConfig) -> Result<SolverSession, SolverError> {
    SolverSession::open(cfg)
}
