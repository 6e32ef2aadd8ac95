use std::path::Path;
use std::process::{Command, Output};
use std::time::Duration;

use btao::driver::{run_btao, RunSettings};
use btao::objectives::{ExternalSpec, ExternalTrainer, FidelityBudget, Objective};
use btao::tam::{fit_tam, TamFitOptions, TruncationWindow};
use btao::{ConfigPoint, Fidelity, SearchSpace, Sense};
use btao_cli::output::read_csv;

fn btao(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btao"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn toy_run_has_one_row_per_heavy_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let out = btao(&[
        "run",
        "--objective",
        "toy_sine",
        "--trials",
        "1",
        "--n-max",
        "3",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = read_csv(&dir.path().join("btao_trials.csv")).unwrap();
    assert_eq!(t.rows.len(), 6);
    assert_eq!(t.rows.last().unwrap().lt_count, 12);
    assert!(t.is_monotone());
}

#[test]
fn all_methods_share_the_heavy_axis() {
    let dir = tempfile::tempdir().unwrap();
    let out = btao(&[
        "run",
        "--objective",
        "currin",
        "--method",
        "all",
        "--trials",
        "2",
        "--n-max",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let axes: Vec<Vec<(usize, usize)>> = ["btao", "gpbo", "random"]
        .iter()
        .map(|m| {
            let t = read_csv(&dir.path().join(format!("{m}_trials.csv"))).unwrap();
            t.rows.iter().map(|r| (r.trial, r.ht_eval)).collect()
        })
        .collect();
    assert_eq!(axes[0].len(), 10);
    assert!(axes.iter().all(|a| a == &axes[0]));
    let summary = std::fs::read_to_string(dir.path().join("gpbo_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = btao(&[
            "run",
            "--objective",
            "park",
            "--trials",
            "2",
            "--n-max",
            "2",
            "--seed",
            "7",
            "--out",
            path(d.path()),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["btao_trials.csv", "btao_summary.csv", "btao_status.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "objective = \"park\"\ntrails = 3\n").unwrap();
    let out = btao(&["run", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));

    let out = btao(&[
        "run",
        "--objective",
        "park",
        "--delta-lo",
        "0",
        "--delta-hi",
        "-1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta_hi"));

    let out = btao(&["run", "--objective", "park", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = btao(&["run", "--config", path(&dir.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(1));
}

fn stub_spec(args: &[&str]) -> ExternalSpec {
    let mut argv = vec![
        env!("CARGO_BIN_EXE_btao").to_string(),
        "protocol-stub".into(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    let budget = FidelityBudget::new(10, 3, 0.0).unwrap();
    ExternalSpec {
        argv,
        space: SearchSpace::unit(2),
        sense: Sense::Minimize,
        known_optimum: Some(0.0),
        light_budget: budget,
        heavy_budget: budget,
        timeout: Duration::from_secs(20),
    }
}

#[test]
fn stub_returns_the_sum_of_coordinates() {
    let mut t =
        ExternalTrainer::start(stub_spec(&["--function", "sum", "--light-offset", "0"])).unwrap();
    let x = ConfigPoint::new(vec![0.25, 0.5]).unwrap();
    assert_eq!(t.evaluate(&x, Fidelity::Heavy).unwrap(), 0.75);
    assert_eq!(t.evaluate(&x, Fidelity::Light).unwrap(), 0.75);
    assert_eq!(t.requests(), 2);
}

#[test]
fn offset_stub_gives_a_unit_scale_link() {
    let mut t = ExternalTrainer::start(stub_spec(&[
        "--function",
        "sphere",
        "--light-offset",
        "0.1",
    ]))
    .unwrap();
    let settings = RunSettings {
        n_max: 4,
        window: TruncationWindow::new(-0.5, 0.5).unwrap(),
        ..RunSettings::default()
    };
    let trace = run_btao(&mut t, &settings).unwrap();
    assert_eq!((trace.ht_count(), trace.lt_count()), (7, 14));
    let (lx, ly) = trace.data(Fidelity::Light);
    let (hx, hy) = trace.data(Fidelity::Heavy);
    let m = fit_tam(
        &lx,
        &ly,
        &hx,
        &hy,
        settings.window,
        &TamFitOptions::default(),
        1,
    )
    .unwrap();
    assert!((m.rho() - 1.0).abs() < 0.05, "rho = {}", m.rho());
}

#[test]
fn killed_stub_exits_two_naming_the_request() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = format!(
        "{} protocol-stub --exit-after 4",
        env!("CARGO_BIN_EXE_btao")
    );
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!(
            r#"objective = "external"
trials = 1
n_max = 3
[external]
command = "{cmd}"
timeout_s = 20
light_budget = {{ max_iters = 5, strip_len = 2, improve_eps = 0.01 }}
heavy_budget = {{ max_iters = 50, strip_len = 5, improve_eps = 0.0 }}
space = [{{ name = "a", lower = 1.0, upper = 8.0, scale = "log2", type = "integer" }}, {{ name = "b", lower = -1.0, upper = 1.0 }}]
"#
        ),
    )
    .unwrap();
    let out = btao(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("request id 5"), "{stderr}");
    let status = std::fs::read_to_string(dir.path().join("btao_status.csv")).unwrap();
    assert!(status.contains("failed"), "{status}");
}

#[test]
fn verify_structure_suite_passes() {
    let out = btao(&["verify", "--suite", "structure"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout)
        .lines()
        .all(|l| l.starts_with("PASS")));
}
