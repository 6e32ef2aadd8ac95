//! Numerical and structural self-checks against brute-force references.

use std::time::Instant;

use btao::design::nlhd;
use btao::driver::RunTrace;
use btao::gp::fit_gp;
use btao::kernel::ConfigPoint;
use btao::tam::{tam_posterior, TamModel, TruncationWindow};
use btao::truncnorm::{mvn_rect_prob, tn_moments};
use btao::{Fidelity, GpModel, SquareMatrix};
use btao_oracles::{dense, mc, quad};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {} ({:.1} s): {}",
            self.name, self.seconds, self.detail
        )
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    let t = Instant::now();
    let r = f();
    let seconds = t.elapsed().as_secs_f64();
    let (passed, detail) = match r {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Check {
        name,
        passed,
        detail,
        seconds,
    }
}

fn raw(points: &[ConfigPoint]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.coords().to_vec()).collect()
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> ConfigPoint {
    ConfigPoint::new((0..d).map(|_| rng.random()).collect()).expect("unit coordinates")
}

/// GP posterior against the explicit-inverse formula on random instances.
pub fn gp_vs_dense(instances: usize, tol: f64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=10);
        let points = btao::design::lhd::<f64>(n, d, case as u64).map_err(|e| e.to_string())?;
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mu = rng.random_range(-1.0..1.0);
        let s2 = rng.random_range(0.1..3.0);
        let phi: Vec<f64> = (0..d).map(|_| rng.random_range(1.0..30.0)).collect();
        let m = GpModel::from_parameters(mu, s2, phi.clone(), points.clone(), values.clone())
            .map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let x = random_point(&mut rng, d);
            let (mean, sd) = m.predict(&x);
            let (om, ov) =
                dense::gp_predict(mu, s2, &phi, &raw(&points), &values, x.coords(), m.jitter());
            let err = (mean - om).abs().max((sd * sd - ov.max(0.0)).abs());
            worst = worst.max(err);
            if err > tol {
                return Err(format!(
                    "instance {case}: mean {mean} vs {om}, var {} vs {ov}",
                    sd * sd
                ));
            }
        }
    }
    Ok(format!("{instances} instances, max error {worst:.2e}"))
}

/// Truncated-normal moments against adaptive quadrature.
pub fn tn_vs_quadrature(tuples: usize, tol: f64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..tuples {
        let loc = rng.random_range(-5.0..5.0);
        let scale = rng.random_range(0.1..3.0);
        let a: f64 = rng.random_range(-6.0..5.5);
        let b: f64 = rng.random_range(a + 0.05..6.0);
        let (lower, upper) = (loc + a * scale, loc + b * scale);
        let m = tn_moments(loc, scale, lower, upper).map_err(|e| e.to_string())?;
        let (qm, qv) = quad::truncated_normal_moments(loc, scale, lower, upper);
        let err = (m.mean - qm).abs().max((m.variance - qv).abs());
        worst = worst.max(err);
        if err > tol {
            return Err(format!(
                "N({loc}, {scale}²) on [{lower}, {upper}]: ({}, {}) vs ({qm}, {qv})",
                m.mean, m.variance
            ));
        }
    }
    Ok(format!("{tuples} tuples, max error {worst:.2e}"))
}

/// With an unbounded window the two-fidelity posterior is the plain
/// additive predictor.
pub fn tam_infinite_window(instances: usize, tol: f64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for case in 0..instances as u64 {
        let d = rng.random_range(1..=3);
        let n1 = rng.random_range(2..=6);
        let nd = nlhd::<f64>(n1, 2, d, case).map_err(|e| e.to_string())?;
        let yl: Vec<f64> = nd
            .lt_points
            .iter()
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let yh: Vec<f64> = yl[..n1]
            .iter()
            .map(|l| 0.7 * l + rng.random_range(-0.5..0.5))
            .collect();
        let lt_gp = fit_gp(&nd.lt_points, &yl, case).map_err(|e| e.to_string())?;
        let rho = rng.random_range(0.2..1.5);
        let mu = rng.random_range(-0.3..0.3);
        let s2 = rng.random_range(0.05..2.0);
        let phi: Vec<f64> = (0..d)
            .map(|_| 10f64.powf(rng.random_range(-1.0..1.5)))
            .collect();
        let model = TamModel::from_parameters(
            lt_gp,
            rho,
            mu,
            s2,
            phi.clone(),
            TruncationWindow::unbounded(),
            &nd.ht_points,
            &yh,
        )
        .map_err(|e| e.to_string())?;
        let x = random_point(&mut rng, d);
        let lv = rng.random_range(-2.0..2.0);
        let got = tam_posterior(&model, &x, lv)
            .moments()
            .map_err(|e| e.to_string())?;
        // The heavy design is the first n1 light points.
        let (m, v) = dense::additive_predict(
            rho,
            mu,
            s2,
            &phi,
            &raw(&nd.ht_points),
            &yh,
            &yl[..n1],
            x.coords(),
            lv,
            1e-8,
        );
        let err = (got.mean - m).abs().max((got.variance - v.max(0.0)).abs());
        worst = worst.max(err);
        if err > tol {
            return Err(format!(
                "instance {case}: ({}, {}) vs ({m}, {v})",
                got.mean, got.variance
            ));
        }
    }
    Ok(format!("{instances} instances, max error {worst:.2e}"))
}

/// Truncated conditional moments against rejection sampling, within
/// `k` Monte Carlo standard errors.
pub fn tam_vs_rejection(proposals: usize, k: f64) -> Result<String, String> {
    let nd = nlhd::<f64>(3, 2, 1, 2).map_err(|e| e.to_string())?;
    let light = |x: f64| (6.0 * x).sin() + 0.3 * x;
    let yl: Vec<f64> = nd.lt_points.iter().map(|p| light(p[0])).collect();
    let yh: Vec<f64> = nd
        .ht_points
        .iter()
        .map(|p| 0.8 * light(p[0]) + 0.1 * (3.0 * p[0]).cos() - 0.05)
        .collect();
    let lt_gp = fit_gp(&nd.lt_points, &yl, 0).map_err(|e| e.to_string())?;
    let (rho, mu, s2, phi) = (0.8, 0.0, 0.25, vec![30.0]);
    let (d1, d2) = (-0.2, 0.15);
    let w = TruncationWindow::new(d1, d2).map_err(|e| e.to_string())?;
    let model = TamModel::from_parameters(lt_gp, rho, mu, s2, phi.clone(), w, &nd.ht_points, &yh)
        .map_err(|e| e.to_string())?;
    let x = ConfigPoint::new(vec![0.33]).map_err(|e| e.to_string())?;
    let lv = 0.6;
    let (m, v) = dense::additive_predict(
        rho,
        mu,
        s2,
        &phi,
        &raw(&nd.ht_points),
        &yh,
        &yl[..3],
        x.coords(),
        lv,
        1e-8,
    );
    let rej = mc::rejection_moments(m, v.sqrt(), rho * lv + d1, rho * lv + d2, proposals, 9);
    let got = tam_posterior(&model, &x, lv)
        .moments()
        .map_err(|e| e.to_string())?;
    let zm = (got.mean - rej.mean).abs() / rej.mean_se;
    let zv = (got.variance - rej.variance).abs() / rej.variance_se;
    let detail = format!(
        "{} accepted; mean off by {zm:.2} SE, variance by {zv:.2} SE",
        rej.accepted
    );
    if zm <= k && zv <= k {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_covariance(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.3 } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

/// Rectangle probabilities against plain Monte Carlo for dimensions 1 to 5,
/// within `k` combined standard errors.
pub fn rect_prob_vs_mc(samples: usize, k: f64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut report = Vec::new();
    for n in 1..=5 {
        let cov = random_covariance(&mut rng, n);
        let mean: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let lower: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    f64::NEG_INFINITY
                } else {
                    rng.random_range(-2.0..0.0)
                }
            })
            .collect();
        let upper: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.5)).collect();
        let sq = SquareMatrix::from_fn(n, |i, j| cov[i][j]);
        let p = mvn_rect_prob(&mean, &sq, &lower, &upper, n as u64).map_err(|e| e.to_string())?;
        let (mc_p, mc_se) = mc::rect_prob(&mean, &cov, &lower, &upper, samples, 50 + n as u64);
        let combined = (p.stderr.powi(2) + mc_se.powi(2)).sqrt();
        let z = (p.estimate - mc_p).abs() / combined;
        report.push(format!("d{n}: {:.5} vs {mc_p:.5} ({z:.2} SE)", p.estimate));
        if z > k {
            return Err(report.join("; "));
        }
    }
    Ok(report.join("; "))
}

/// Subset and one-point-per-stratum properties of nested designs.
pub fn nlhd_structure(tuples: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..tuples {
        let n1 = rng.random_range(2..=12);
        let s = rng.random_range(2..=5);
        let d = rng.random_range(1..=6);
        let seed: u64 = rng.random();
        let nd = nlhd::<f64>(n1, s, d, seed).map_err(|e| e.to_string())?;
        if !nd.is_valid() {
            return Err(format!(
                "design (n1={n1}, s={s}, d={d}, seed={seed}) is not nested Latin"
            ));
        }
    }
    Ok(format!("{tuples} random (n1, s, d, seed) tuples"))
}

/// Checks that heavy points were light-evaluated first and that after the
/// initial design and after every round `|D_l| = s·|D_h|`.
pub fn trace_bookkeeping(trace: &RunTrace, n1_init: usize, s: usize) -> Result<(), String> {
    let mut light: Vec<&ConfigPoint> = Vec::new();
    for e in &trace.events {
        match e.fidelity {
            Fidelity::Light => light.push(&e.point),
            Fidelity::Heavy => {
                if !light.contains(&&e.point) {
                    return Err(format!("heavy event {} was never light-evaluated", e.index));
                }
                if e.ht_count_after >= n1_init && e.lt_count_after != s * e.ht_count_after {
                    return Err(format!(
                        "after event {}: {} light vs {} heavy evaluations",
                        e.index, e.lt_count_after, e.ht_count_after
                    ));
                }
            }
        }
    }
    if trace.best_ht_curve.windows(2).any(|w| w[1] > w[0]) {
        return Err("best heavy curve increases".into());
    }
    Ok(())
}

/// Short runs of every method on the toy and Currin problems with their
/// bookkeeping checked.
pub fn short_run_bookkeeping() -> Result<String, String> {
    use btao::driver::{run_btao, RunSettings};
    use btao::{Benchmark, Synthetic};
    let mut runs = 0;
    for (b, lo, hi, n_max) in [
        (Benchmark::ToySine, -1.5, 0.5, 3),
        (Benchmark::Currin, -1.0, 1.0, 3),
    ] {
        for seed in 0..2 {
            let settings = RunSettings {
                n_max,
                window: TruncationWindow::new(lo, hi).map_err(|e| e.to_string())?,
                seed,
                ..RunSettings::default()
            };
            let t = run_btao(&mut Synthetic(b), &settings).map_err(|e| e.to_string())?;
            trace_bookkeeping(&t, settings.n1_init, settings.s)
                .map_err(|e| format!("{} seed {seed}: {e}", b.name()))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs"))
}

/// The oracle-equivalence checks.
pub fn oracle_checks() -> Vec<Check> {
    vec![
        timed("gp_predict vs dense inverse", || gp_vs_dense(20, 1e-8)),
        timed("truncated-normal moments vs quadrature", || {
            tn_vs_quadrature(100, 1e-8)
        }),
        timed("unbounded-window posterior vs additive predictor", || {
            tam_infinite_window(20, 1e-6)
        }),
        timed("truncated conditional vs rejection sampling", || {
            tam_vs_rejection(1_000_000, 3.0)
        }),
        timed("rectangle probability vs Monte Carlo", || {
            rect_prob_vs_mc(1_000_000, 3.0)
        }),
    ]
}

/// The design and bookkeeping checks.
pub fn structural_checks() -> Vec<Check> {
    vec![
        timed("nested Latin hypercube structure", || nlhd_structure(50)),
        timed("BTAO bookkeeping on short runs", short_run_bookkeeping),
    ]
}
