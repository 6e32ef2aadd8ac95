//! Dense-inverse formulas for Gaussian-process quantities.

pub type Matrix = Vec<Vec<f64>>;

pub fn kernel(x: &[f64], x2: &[f64], phi: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += phi[i] * (x[i] - x2[i]).powi(2);
    }
    (-s).exp()
}

pub fn correlation(points: &[Vec<f64>], phi: &[f64], nugget: f64) -> Matrix {
    let n = points.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = kernel(&points[i], &points[j], phi);
        }
        m[i][i] += nugget;
    }
    m
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert(a: &Matrix) -> Matrix {
    let n = a.len();
    let mut aug: Matrix = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        assert!(p != 0.0, "singular matrix");
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = aug[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `ln |det A|` by Gaussian elimination.
pub fn log_abs_det(a: &Matrix) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut acc = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        acc += p.abs().ln();
        for row in (col + 1)..n {
            let f = m[row][col] / p;
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    acc
}

pub fn mat_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quadratic form `vᵀ A⁻¹ v` through the explicit inverse.
pub fn inv_quad(a: &Matrix, v: &[f64]) -> f64 {
    dot(v, &mat_vec(&invert(a), v))
}

pub fn gp_log_likelihood(
    mu: f64,
    sigma2: f64,
    phi: &[f64],
    points: &[Vec<f64>],
    values: &[f64],
    nugget: f64,
) -> f64 {
    let r = correlation(points, phi, nugget);
    let c: Vec<f64> = values.iter().map(|y| y - mu).collect();
    let n = values.len() as f64;
    -inv_quad(&r, &c) / (2.0 * sigma2) - 0.5 * n * sigma2.ln() - 0.5 * log_abs_det(&r)
}

/// Closed-form GLS mean and variance given the length-scales.
pub fn gls_mean_variance(
    phi: &[f64],
    points: &[Vec<f64>],
    values: &[f64],
    nugget: f64,
) -> (f64, f64) {
    let rinv = invert(&correlation(points, phi, nugget));
    let ones = vec![1.0; values.len()];
    let mu = dot(&ones, &mat_vec(&rinv, values)) / dot(&ones, &mat_vec(&rinv, &ones));
    let c: Vec<f64> = values.iter().map(|y| y - mu).collect();
    (mu, dot(&c, &mat_vec(&rinv, &c)) / values.len() as f64)
}

/// Posterior mean and variance `(ŷ, s²)` of a constant-mean GP.
pub fn gp_predict(
    mu: f64,
    sigma2: f64,
    phi: &[f64],
    points: &[Vec<f64>],
    values: &[f64],
    x: &[f64],
    nugget: f64,
) -> (f64, f64) {
    let rinv = invert(&correlation(points, phi, nugget));
    let r: Vec<f64> = points.iter().map(|p| kernel(x, p, phi)).collect();
    let c: Vec<f64> = values.iter().map(|y| y - mu).collect();
    let mean = mu + dot(&r, &mat_vec(&rinv, &c));
    let var = sigma2 * (1.0 - dot(&r, &mat_vec(&rinv, &r)));
    (mean, var)
}

/// Untruncated additive (autoregressive) two-fidelity predictor:
/// `y_h(x) = ρ y_l(x) + δ(x)`, `δ ~ GP(μ_δ, σ_δ², φ_δ)` conditioned on the
/// discrepancies observed at the heavy points.
#[allow(clippy::too_many_arguments)]
pub fn additive_predict(
    rho: f64,
    mu_delta: f64,
    sigma2_delta: f64,
    phi_delta: &[f64],
    ht_points: &[Vec<f64>],
    ht_values: &[f64],
    lt_at_ht: &[f64],
    x: &[f64],
    lt_value: f64,
    nugget: f64,
) -> (f64, f64) {
    let discrepancies: Vec<f64> = ht_values
        .iter()
        .zip(lt_at_ht)
        .map(|(h, l)| h - rho * l)
        .collect();
    let (m, v) = gp_predict(
        mu_delta,
        sigma2_delta,
        phi_delta,
        ht_points,
        &discrepancies,
        x,
        nugget,
    );
    (rho * lt_value + m, v)
}

/// Dense evaluation of the two-fidelity log-likelihood with the light
/// mean and variance profiled out. `log_rect_prob` is `ln P(δ1 ≤ δ ≤ δ2)`
/// for `δ ~ N(μ_δ 1, σ_δ² R_δ)`, supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub fn tam_log_likelihood(
    rho: f64,
    mu_delta: f64,
    sigma2_delta: f64,
    phi_lt: &[f64],
    phi_delta: &[f64],
    lt_points: &[Vec<f64>],
    lt_values: &[f64],
    ht_points: &[Vec<f64>],
    ht_values: &[f64],
    lt_at_ht: &[f64],
    log_rect_prob: f64,
    nugget: f64,
) -> f64 {
    let (mu_l, s2_l) = gls_mean_variance(phi_lt, lt_points, lt_values, nugget);
    let s2_l = s2_l.max(1e-12);
    let lt = gp_log_likelihood(mu_l, s2_l, phi_lt, lt_points, lt_values, nugget);
    let rd = correlation(ht_points, phi_delta, nugget);
    let q: Vec<f64> = ht_values
        .iter()
        .zip(lt_at_ht)
        .map(|(h, l)| h - rho * l - mu_delta)
        .collect();
    let n1 = ht_values.len() as f64;
    let delta = -inv_quad(&rd, &q) / (2.0 * sigma2_delta)
        - 0.5 * n1 * sigma2_delta.ln()
        - 0.5 * log_abs_det(&rd);
    lt + delta - log_rect_prob
}

/// Plain (unpivoted) Cholesky factor used for sampling.
pub fn cholesky(a: &Matrix) -> Matrix {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "matrix not positive definite");
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}
