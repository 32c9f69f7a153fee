mod common;

use std::time::{Duration, Instant};

use common::*;
use dynet::checker::PropertyBody;
use dynet::encoder::encode_property;
use dynet::formula::{Script, Sort, Term};
use dynet::model::CmpOp;
use dynet::{encode_network, Property, SatResult, SolverConfig, SolverError, SolverSession};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn delay_gt2() -> Term {
    let prop = Property::new(
        "d",
        PropertyBody::ParamBound {
            param: "delay".into(),
            op: CmpOp::Gt,
            value: 2,
        },
    );
    encode_property(&prop, &fig1()).unwrap()
}

#[test]
fn handshake_and_echo() {
    let mut s = SolverSession::open(solver()).unwrap();
    assert!(s.is_open());
    assert_eq!(s.echo("ping").unwrap(), "ping");
    assert!(s.has_native_timeout());
    s.close();
}

#[test]
fn missing_binary_is_a_spawn_error() {
    let err = SolverSession::open(SolverConfig::new(vec!["definitely-not-a-solver-xyz".into()]))
        .unwrap_err();
    assert!(matches!(err, SolverError::Spawn { .. }), "{err}");
}

#[test]
fn empty_command_is_a_config_error() {
    let err = SolverSession::open(SolverConfig::new(vec![])).unwrap_err();
    assert!(matches!(err, SolverError::Config(_)));
    let err = SolverSession::open(solver().with_timeout(Duration::ZERO)).unwrap_err();
    assert!(matches!(err, SolverError::Config(_)));
}

#[test]
fn rejected_setup_is_a_handshake_error() {
    let err = SolverSession::open(fake_solver(&["reject"])).unwrap_err();
    assert!(matches!(err, SolverError::Handshake(_)), "{err}");
}

#[test]
fn solver_without_timeout_option_is_still_usable() {
    let mut s = SolverSession::open(fake_solver(&["no-timeout"])).unwrap();
    assert!(!s.has_native_timeout());
    assert_eq!(s.check_sat().unwrap(), SatResult::Unknown("incomplete".into()));
}

#[test]
fn network_formula_is_sat_and_scopes_isolate() {
    let mut s = SolverSession::open(solver()).unwrap();
    s.assert_script(&encode_network(&fig1())).unwrap();
    assert_eq!(s.check_sat().unwrap(), SatResult::Sat);
    s.push().unwrap();
    s.assert_term(&delay_gt2()).unwrap();
    assert_eq!(s.check_sat().unwrap(), SatResult::Unsat);
    s.pop().unwrap();
    assert_eq!(s.depth(), 0);
    assert_eq!(s.check_sat().unwrap(), SatResult::Sat);
    assert_eq!(s.checks_issued(), 3);
}

#[test]
fn pop_at_base_underflows() {
    let mut s = SolverSession::open(solver()).unwrap();
    assert!(matches!(s.pop(), Err(SolverError::PopUnderflow)));
    s.push().unwrap();
    s.push().unwrap();
    s.pop_to(0).unwrap();
    assert!(matches!(s.pop(), Err(SolverError::PopUnderflow)));
}

#[test]
fn undeclared_symbol_is_reported_by_the_solver() {
    let mut s = SolverSession::open(solver()).unwrap();
    let err = s.assert_term(&Term::var("ghost").ge(Term::int(0))).unwrap_err();
    assert!(matches!(err, SolverError::SolverSyntax { .. }), "{err}");
    // The session survives a rejected command.
    assert_eq!(s.check_sat().unwrap(), SatResult::Sat);
}

#[test]
fn redeclaration_is_refused_before_sending() {
    let mut s = SolverSession::open(solver()).unwrap();
    let mut script = Script::new();
    script.declare_const("k", Sort::Int);
    s.assert_script(&script).unwrap();
    s.push().unwrap();
    assert!(matches!(s.assert_script(&script), Err(SolverError::Redeclaration(n)) if n == "k"));
    s.pop().unwrap();
}

#[test]
fn declarations_in_a_popped_scope_can_be_repeated() {
    let mut s = SolverSession::open(solver()).unwrap();
    let mut script = Script::new();
    script.declare_const("k", Sort::Int).assert(Term::var("k").gt(Term::int(3)));
    s.push().unwrap();
    s.assert_script(&script).unwrap();
    s.pop().unwrap();
    s.assert_script(&script).unwrap();
    assert_eq!(s.check_sat().unwrap(), SatResult::Sat);
}

#[test]
fn hung_check_times_out_and_session_recovers() {
    let cfg = fake_solver(&["hang"]).with_timeout(Duration::from_millis(200));
    let mut s = SolverSession::open(cfg).unwrap();
    s.push().unwrap();
    let start = Instant::now();
    assert_eq!(s.check_sat().unwrap(), SatResult::Timeout);
    assert!(start.elapsed() < Duration::from_secs(5));
    assert_eq!(s.restarts(), 1);
    assert!(s.is_open());
    assert_eq!(s.depth(), 1);
    assert_eq!(s.echo("alive").unwrap(), "alive");
}

#[test]
fn native_timeout_maps_to_timeout() {
    // Nonlinear integer arithmetic that z3 cannot settle in a millisecond.
    let mut script = Script::new();
    for v in ["x", "y", "z"] {
        script.declare_const(v, Sort::Int);
    }
    let cube = |v: &str| Term::app("*", vec![Term::var(v), Term::var(v), Term::var(v)]);
    script.assert(
        Term::Add(vec![cube("x"), cube("y"), cube("z")]).eq(Term::int(33)),
    );
    let mut s = SolverSession::open(solver().with_timeout(Duration::from_millis(1))).unwrap();
    s.assert_script(&script).unwrap_or_else(|e| panic!("{e}"));
    let v = s.check_sat().unwrap();
    assert!(matches!(v, SatResult::Timeout | SatResult::Unknown(_)), "{v}");
}

#[test]
fn crash_is_reported_and_closes_the_session() {
    let mut s = SolverSession::open(fake_solver(&["crash"])).unwrap();
    let err = s.check_sat().unwrap_err();
    assert!(matches!(err, SolverError::Crashed { .. }), "{err}");
    assert!(!s.is_open());
    assert!(matches!(s.check_sat(), Err(SolverError::SessionClosed)));
}

#[test]
fn restart_replays_open_scopes() {
    let mut s = SolverSession::open(solver()).unwrap();
    s.assert_script(&encode_network(&fig1())).unwrap();
    s.push().unwrap();
    s.assert_term(&delay_gt2()).unwrap();
    s.restart().unwrap();
    assert_eq!(s.depth(), 1);
    assert_eq!(s.check_sat().unwrap(), SatResult::Unsat);
    s.pop().unwrap();
    assert_eq!(s.check_sat().unwrap(), SatResult::Sat);
}

#[test]
fn verdict_after_pop_matches_verdict_before_push() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let (base, extra) = random_scope_fixture(&mut rng);
        let mut s = SolverSession::open(solver()).unwrap();
        s.assert_script(&base).unwrap();
        let before = s.check_sat().unwrap();
        s.push().unwrap();
        for t in &extra {
            s.assert_term(t).unwrap();
        }
        s.check_sat().unwrap();
        s.pop().unwrap();
        assert_eq!(s.check_sat().unwrap(), before);
        s.close();
    }
}
