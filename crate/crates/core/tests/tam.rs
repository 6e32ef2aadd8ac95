use btao::gp::fit_gp;
use btao::kernel::ConfigPoint;
use btao::tam::{
    fit_tam, tam_log_likelihood, tam_posterior, tam_predict, TamData, TamFitOptions, TamModel,
    TamParams, TruncationWindow,
};
use btao_oracles::{dense, mc, quad};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn light(x: &[f64]) -> f64 {
    (6.0 * x[0]).sin() + x[0] + 0.5 * x[1]
}

fn heavy(x: &[f64]) -> f64 {
    0.8 * light(x) + 0.3 * x[0] - 0.2 * x[1] - 0.1
}

struct Fixture {
    lt: Vec<ConfigPoint>,
    yl: Vec<f64>,
    ht: Vec<ConfigPoint>,
    yh: Vec<f64>,
}

fn fixture() -> Fixture {
    let nd = btao::design::nlhd::<f64>(6, 3, 2, 4).unwrap();
    let yl = nd.lt_points.iter().map(|p| light(p.coords())).collect();
    let yh = nd.ht_points.iter().map(|p| heavy(p.coords())).collect();
    Fixture {
        lt: nd.lt_points,
        yl,
        ht: nd.ht_points,
        yh,
    }
}

fn raw(points: &[ConfigPoint]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.coords().to_vec()).collect()
}

fn params() -> TamParams {
    TamParams {
        rho: 0.75,
        mu_delta: -0.05,
        sigma2_delta: 0.04,
        phi_lt: vec![2.0, 0.5],
        phi_delta: vec![1.5, 0.7],
    }
}

fn lt_at_ht(f: &Fixture) -> Vec<f64> {
    f.ht.iter().map(|p| light(p.coords())).collect()
}

#[test]
fn unbounded_likelihood_matches_dense_formula() {
    let f = fixture();
    let data = TamData::new(&f.lt, &f.yl, &f.ht, &f.yh).unwrap();
    let p = params();
    let ours = tam_log_likelihood(&p, &data, TruncationWindow::unbounded(), 3).unwrap();
    let oracle = dense::tam_log_likelihood(
        p.rho,
        p.mu_delta,
        p.sigma2_delta,
        &p.phi_lt,
        &p.phi_delta,
        &raw(&f.lt),
        &f.yl,
        &raw(&f.ht),
        &f.yh,
        &lt_at_ht(&f),
        0.0,
        1e-8,
    );
    assert!(
        (ours - oracle).abs() < 1e-7 * oracle.abs().max(1.0),
        "{ours} vs {oracle}"
    );
}

#[test]
fn truncated_likelihood_matches_dense_formula_with_sampled_normalizer() {
    let f = fixture();
    let data = TamData::new(&f.lt, &f.yl, &f.ht, &f.yh).unwrap();
    let p = TamParams {
        sigma2_delta: 0.09,
        ..params()
    };
    let w = TruncationWindow::new(-0.4, 0.3).unwrap();
    let ours = tam_log_likelihood(&p, &data, w, 3).unwrap();

    let n = f.ht.len();
    let mut cov = dense::correlation(&raw(&f.ht), &p.phi_delta, 1e-8);
    cov.iter_mut().flatten().for_each(|v| *v *= p.sigma2_delta);
    let (prob, se) = mc::rect_prob(
        &vec![p.mu_delta; n],
        &cov,
        &vec![-0.4; n],
        &vec![0.3; n],
        400_000,
        5,
    );
    assert!(
        prob > 0.05 && prob < 0.95,
        "normalizer {prob} should be informative"
    );
    let oracle = dense::tam_log_likelihood(
        p.rho,
        p.mu_delta,
        p.sigma2_delta,
        &p.phi_lt,
        &p.phi_delta,
        &raw(&f.lt),
        &f.yl,
        &raw(&f.ht),
        &f.yh,
        &lt_at_ht(&f),
        prob.ln(),
        1e-8,
    );
    let tol = 4.0 * se / prob + 1e-3;
    assert!(
        (ours - oracle).abs() < tol,
        "{ours} vs {oracle} (tol {tol})"
    );
}

#[test]
fn likelihood_is_minus_infinity_outside_window() {
    let f = fixture();
    let data = TamData::new(&f.lt, &f.yl, &f.ht, &f.yh).unwrap();
    // ρ = 3 pushes the discrepancies far below the window.
    let p = TamParams {
        rho: 3.0,
        ..params()
    };
    let w = TruncationWindow::new(-0.5, 0.5).unwrap();
    assert_eq!(
        tam_log_likelihood(&p, &data, w, 0).unwrap(),
        f64::NEG_INFINITY
    );
}

fn model_with(window: TruncationWindow) -> (Fixture, TamModel, TamParams) {
    let f = fixture();
    let lt_gp = fit_gp(&f.lt, &f.yl, 1).unwrap();
    let p = params();
    let model = TamModel::from_parameters(
        lt_gp,
        p.rho,
        p.mu_delta,
        p.sigma2_delta,
        p.phi_delta.clone(),
        window,
        &f.ht,
        &f.yh,
    )
    .unwrap();
    (f, model, p)
}

#[test]
fn unbounded_posterior_is_the_additive_predictor() {
    let (f, model, p) = model_with(TruncationWindow::unbounded());
    let x = ConfigPoint::new(vec![0.37, 0.81]).unwrap();
    let lv = 0.2;
    let post = tam_posterior(&model, &x, lv);
    let (m, v) = dense::additive_predict(
        p.rho,
        p.mu_delta,
        p.sigma2_delta,
        &p.phi_delta,
        &raw(&f.ht),
        &f.yh,
        &lt_at_ht(&f),
        x.coords(),
        lv,
        1e-8,
    );
    assert!((post.loc() - m).abs() < 1e-8);
    assert!((post.scale().powi(2) - v).abs() < 1e-8);
    assert!((post.mean().unwrap() - m).abs() < 1e-8);
}

#[test]
fn truncated_posterior_moments_match_quadrature() {
    let w = TruncationWindow::new(-0.1, 0.05).unwrap();
    let (_, model, p) = model_with(w);
    let x = ConfigPoint::new(vec![0.9, 0.1]).unwrap();
    let lv = -0.3;
    let post = tam_posterior(&model, &x, lv);
    assert_eq!(post.lower(), p.rho * lv - 0.1);
    assert_eq!(post.upper(), p.rho * lv + 0.05);
    let (qm, qv) =
        quad::truncated_normal_moments(post.loc(), post.scale(), post.lower(), post.upper());
    let m = post.moments().unwrap();
    assert!((m.mean - qm).abs() < 1e-8);
    assert!((m.variance - qv).abs() < 1e-8);
}

#[test]
fn predictions_respect_window_and_interpolate() {
    let w = TruncationWindow::new(-0.3, 0.2).unwrap();
    let (f, model, p) = model_with(w);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let x = ConfigPoint::new(vec![rng.random(), rng.random()]).unwrap();
        let d = model.predict_detailed(&x);
        assert!(!d.lt_observed);
        assert!(
            d.mean >= p.rho * d.lt_value - 0.3 - 1e-12
                && d.mean <= p.rho * d.lt_value + 0.2 + 1e-12
        );
        assert!(d.sd >= 0.0);
    }
    for (x, &y) in f.ht.iter().zip(&f.yh) {
        let (m, s) = tam_predict(&model, x);
        assert!((m - y).abs() < 1e-5, "{m} vs {y}");
        assert!(s < 1e-3);
    }
    // Light-only points use their stored light value.
    let light_only = &f.lt[f.ht.len()];
    let d = model.predict_detailed(light_only);
    assert!(d.lt_observed);
    assert_eq!(d.lt_value, f.yl[f.ht.len()]);
}

#[test]
fn empty_window_mass_falls_back_to_clamped_location() {
    let f = fixture();
    let lt_gp = fit_gp(&f.lt, &f.yl, 1).unwrap();
    // Short length-scales return the location to a mean far above the window.
    let w = TruncationWindow::new(-0.3, 0.2).unwrap();
    let model = TamModel::from_parameters(lt_gp, 0.75, 50.0, 0.04, vec![5e3, 5e3], w, &f.ht, &f.yh)
        .unwrap();
    let x = ConfigPoint::new(vec![0.5, 0.5]).unwrap();
    let d = model.predict_detailed(&x);
    assert!(d.degenerate);
    assert!(d.posterior.moments().is_err());
    assert_eq!(d.mean, d.posterior.upper());
    assert_eq!(d.sd, 1e-6 * d.posterior.scale());
}

#[test]
fn fit_beats_random_feasible_parameters() {
    let f = fixture();
    let w = TruncationWindow::new(-0.5, 0.5).unwrap();
    let model = fit_tam(&f.lt, &f.yl, &f.ht, &f.yh, w, &TamFitOptions::default(), 11).unwrap();
    let data = TamData::new(&f.lt, &f.yl, &f.ht, &f.yh).unwrap();
    let best = model.log_likelihood();
    assert!(best.is_finite());
    assert!((model.rho() - 0.8).abs() < 0.3, "rho {}", model.rho());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tried = 0;
    while tried < 20 {
        let p = TamParams {
            rho: rng.random_range(0.05..5.0),
            mu_delta: rng.random_range(-0.5..0.5),
            sigma2_delta: 10f64.powf(rng.random_range(-4.0..1.0)),
            phi_lt: model.lt_gp().phi().to_vec(),
            phi_delta: (0..2)
                .map(|_| 10f64.powf(rng.random_range(-3.0..3.0)))
                .collect(),
        };
        let v = tam_log_likelihood(&p, &data, w, 0).unwrap();
        if v.is_finite() {
            tried += 1;
            assert!(v <= best + 1e-6, "random draw {v} beats fit {best}");
        }
    }
}

#[test]
fn infinite_window_matches_additive_closed_form_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..20 {
        let d = rng.random_range(1..=3);
        let n1 = rng.random_range(2..=6);
        let nd = btao::design::nlhd::<f64>(n1, 2, d, case).unwrap();
        let yl: Vec<f64> = nd
            .lt_points
            .iter()
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let yh: Vec<f64> = yl[..n1]
            .iter()
            .map(|l| 0.7 * l + rng.random_range(-0.5..0.5))
            .collect();
        let lt_gp = fit_gp(&nd.lt_points, &yl, case).unwrap();
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
        .unwrap();
        let x = ConfigPoint::new((0..d).map(|_| rng.random()).collect()).unwrap();
        let lv = rng.random_range(-2.0..2.0);
        let post = tam_posterior(&model, &x, lv);
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
        let got = post.moments().unwrap();
        assert!(
            (got.mean - m).abs() < 1e-6,
            "case {case}: mean {} vs {m}",
            got.mean
        );
        assert!(
            (got.variance - v.max(0.0)).abs() < 1e-6,
            "case {case}: var {} vs {v}",
            got.variance
        );
    }
}

#[test]
fn truncated_conditional_matches_rejection_sampling() {
    let nd = btao::design::nlhd::<f64>(3, 2, 1, 2).unwrap();
    let yl: Vec<f64> = nd.lt_points.iter().map(|p| light(&[p[0], 0.0])).collect();
    let yh: Vec<f64> = nd.ht_points.iter().map(|p| heavy(&[p[0], 0.0])).collect();
    let lt_gp = fit_gp(&nd.lt_points, &yl, 0).unwrap();
    let (rho, mu, s2, phi) = (0.8, 0.0, 0.25, vec![3.0]);
    let w = TruncationWindow::new(-0.2, 0.15).unwrap();
    let model =
        TamModel::from_parameters(lt_gp, rho, mu, s2, phi.clone(), w, &nd.ht_points, &yh).unwrap();
    let x = ConfigPoint::new(vec![0.47]).unwrap();
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
    let rej = mc::rejection_moments(m, v.sqrt(), rho * lv - 0.2, rho * lv + 0.15, 1_000_000, 9);
    let got = tam_posterior(&model, &x, lv).moments().unwrap();
    assert!(rej.accepted > 10_000);
    assert!(
        (got.mean - rej.mean).abs() <= 3.0 * rej.mean_se,
        "{} vs {} ± {}",
        got.mean,
        rej.mean,
        rej.mean_se
    );
    assert!(
        (got.variance - rej.variance).abs() <= 3.0 * rej.variance_se,
        "{} vs {} ± {}",
        got.variance,
        rej.variance,
        rej.variance_se
    );
}
