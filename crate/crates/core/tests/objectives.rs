use std::time::Duration;

use btao::kernel::ConfigPoint;
use btao::objectives::{
    currin_heavy, currin_light, park_heavy, park_light, ExternalSpec, ExternalTrainer,
    FidelityBudget, Objective, ObjectiveError, CURRIN_OPTIMUM, PARK_OPTIMUM,
};
use btao::{Benchmark, Fidelity, SearchSpace, Sense, Synthetic};
use btao_oracles::grid::maximize_on_cube;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn park_light_is_affine_in_heavy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let x: [f64; 4] = std::array::from_fn(|_| rng.random());
        assert_eq!(park_light(&x), 1.2 * park_heavy(&x) - 1.0);
    }
}

fn currin_direct(x1: f64, x2: f64) -> f64 {
    let poly = 2300.0 * x1.powi(3) + 1900.0 * x1.powi(2) + 2092.0 * x1 + 60.0;
    let den = 100.0 * x1.powi(3) + 500.0 * x1.powi(2) + 4.0 * x1 + 20.0;
    (1.0 - (-1.0 / (2.0 * x2)).exp()) * poly / den
}

#[test]
fn currin_light_is_the_four_point_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let x1: f64 = rng.random();
        let x2: f64 = rng.random_range(0.05..1.0);
        let expected = (currin_direct(x1 + 0.05, x2 + 0.05)
            + currin_direct(x1 + 0.05, (x2 - 0.05).max(0.0))
            + currin_direct(x1 - 0.05, x2 + 0.05)
            + currin_direct(x1 - 0.05, (x2 - 0.05).max(0.0)))
            / 4.0;
        let got = currin_light(x1, x2);
        assert!(
            (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
            "{got} vs {expected}"
        );
    }
}

#[test]
fn currin_boundary_limit() {
    assert_eq!(currin_heavy(0.0, 0.0), 3.0);
    assert!((currin_heavy(0.4, 1e-300) - currin_heavy(0.4, 0.0)).abs() < 1e-15);
}

#[test]
fn stored_optima_match_grid_search() {
    let (x, v) = maximize_on_cube(|x| currin_heavy(x[0], x[1]), 2, 1001);
    assert!((v - CURRIN_OPTIMUM).abs() < 1e-9, "{v}");
    assert!((x[0] - 0.216666).abs() < 1e-3 && x[1] == 0.0);

    let (x, v) = maximize_on_cube(|x| park_heavy(&[x[0], x[1], x[2], x[3]]), 4, 32);
    assert!((v - PARK_OPTIMUM).abs() < 1e-9, "{v}");
    assert_eq!(x, vec![1.0, 1.0, 1.0, 0.0]);

    let toy = Benchmark::ToySine;
    let (_, v) = maximize_on_cube(|x| -toy.value(x, Fidelity::Heavy), 1, 4001);
    assert!((-v - toy.optimum()).abs() < 1e-12);
}

#[test]
fn synthetic_objectives_are_pure() {
    let mut a = Synthetic(Benchmark::Currin);
    let x = ConfigPoint::new(vec![0.3, 0.6]).unwrap();
    let first = a.evaluate(&x, Fidelity::Light).unwrap();
    assert_eq!(first, a.evaluate(&x, Fidelity::Light).unwrap());
    assert_eq!(a.sense(), Sense::Maximize);
    let bad = ConfigPoint::new(vec![0.3]).unwrap();
    assert!(matches!(
        a.evaluate(&bad, Fidelity::Heavy),
        Err(ObjectiveError::DimensionMismatch { .. })
    ));
}

fn spec(script: &str) -> ExternalSpec {
    let budget = FidelityBudget::new(10, 2, 0.0).unwrap();
    ExternalSpec {
        argv: vec!["sh".into(), "-c".into(), script.into()],
        space: SearchSpace::unit(2),
        sense: Sense::Minimize,
        known_optimum: None,
        light_budget: budget,
        heavy_budget: budget,
        timeout: Duration::from_secs(5),
    }
}

#[test]
fn trainer_exiting_mid_run_names_the_request() {
    let script = r#"read hello; echo '{"ready":true}'; read req; echo '{"id":1,"value":0.5}'; echo dying >&2; exit 3"#;
    let mut t = ExternalTrainer::start(spec(script)).unwrap();
    let x = ConfigPoint::new(vec![0.1, 0.2]).unwrap();
    assert_eq!(t.evaluate(&x, Fidelity::Light).unwrap(), 0.5);
    let err = t.evaluate(&x, Fidelity::Heavy).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("request id 2"), "{msg}");
    assert!(msg.contains("dying"), "{msg}");
    assert_eq!(t.requests(), 2);
}

#[test]
fn mismatched_id_is_rejected() {
    let script =
        r#"read hello; echo '{"ready":true}'; read req; echo '{"id":9,"value":0.5}'; sleep 5"#;
    let mut t = ExternalTrainer::start(spec(script)).unwrap();
    let err = t
        .evaluate(&ConfigPoint::new(vec![0.1, 0.2]).unwrap(), Fidelity::Light)
        .unwrap_err();
    assert!(
        err.to_string().contains("request id 1") && err.to_string().contains("id 9"),
        "{err}"
    );
}

#[test]
fn trainer_errors_and_timeouts() {
    let script = r#"read hello; echo '{"ready":true}'; read req; echo '{"id":1,"error":"diverged"}'; read req; sleep 5"#;
    let mut s = spec(script);
    s.timeout = Duration::from_millis(300);
    let mut t = ExternalTrainer::start(s).unwrap();
    let x = ConfigPoint::new(vec![0.1, 0.2]).unwrap();
    assert!(matches!(
        t.evaluate(&x, Fidelity::Light),
        Err(ObjectiveError::Trainer { id: 1, .. })
    ));
    let err = t.evaluate(&x, Fidelity::Light).unwrap_err();
    assert!(
        err.to_string().contains("request id 2") && err.to_string().contains("no response"),
        "{err}"
    );
}

#[test]
fn bad_handshake_and_missing_program() {
    let err = ExternalTrainer::start(spec(r#"read hello; echo '{"ready":false}'"#))
        .err()
        .unwrap();
    assert!(err.to_string().contains("handshake"), "{err}");
    let mut s = spec("");
    s.argv = vec!["/nonexistent/trainer-binary".into()];
    assert!(matches!(
        ExternalTrainer::start(s),
        Err(ObjectiveError::Spawn { .. })
    ));
}
