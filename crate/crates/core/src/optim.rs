//! Box-constrained quasi-Newton minimization with finite-difference gradients.
//!
//! A projected BFGS: variables pinned at a bound with the gradient pushing
//! outward are frozen for the step, the rest follow the BFGS direction, and
//! an Armijo backtracking search runs along the projected path. Objectives
//! may return non-finite values; those are treated as `+∞` and rejected by
//! the line search.

#[derive(Clone, Copy, Debug)]
pub struct QuasiNewtonOptions {
    pub max_iter: usize,
    /// Relative finite-difference step.
    pub grad_step: f64,
    /// Relative objective decrease below which an iteration counts as stalled.
    pub ftol: f64,
    /// Projected-gradient norm at which the search stops.
    pub gtol: f64,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_step: 1e-6,
            ftol: 1e-10,
            gtol: 1e-7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.max(lo).min(hi);
    }
}

fn gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut Counted<F>,
    x: &[f64],
    fx: f64,
    lower: &[f64],
    upper: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        if upper[i] <= lower[i] {
            continue;
        }
        let h = step * x[i].abs().max(1.0);
        let forward = x[i] + h <= upper[i];
        probe[i] = if forward { x[i] + h } else { x[i] - h };
        let fp = f.call(&probe);
        probe[i] = x[i];
        let d = if forward {
            (fp - fx) / h
        } else {
            (fx - fp) / h
        };
        g[i] = if d.is_finite() { d } else { 0.0 };
    }
    g
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0` (projected
/// into the box first).
pub fn minimize_bounded<F: FnMut(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    options: &QuasiNewtonOptions,
) -> Minimum {
    let n = x0.len();
    assert!(
        lower.len() == n && upper.len() == n,
        "bound dimension mismatch"
    );
    let mut obj = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut fx = obj.call(&x);
    if !fx.is_finite() || n == 0 {
        return Minimum {
            x,
            value: fx,
            iterations: 0,
            evaluations: obj.evals,
        };
    }

    let width: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();
    let at_lower = |x: &[f64], i: usize| x[i] <= lower[i] + 1e-12 * width[i].max(1e-300);
    let at_upper = |x: &[f64], i: usize| x[i] >= upper[i] - 1e-12 * width[i].max(1e-300);

    let mut g = gradient(&mut obj, &x, fx, lower, upper, options.grad_step);
    let mut h = identity(n);
    let mut stalled = 0;
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| {
                width[i] > 0.0
                    && !((at_lower(&x, i) && g[i] > 0.0) || (at_upper(&x, i) && g[i] < 0.0))
            })
            .collect();
        let pg: f64 = (0..n)
            .filter(|&i| free[i])
            .map(|i| g[i] * g[i])
            .sum::<f64>()
            .sqrt();
        if pg < options.gtol {
            break;
        }

        let mut p = vec![0.0; n];
        for i in (0..n).filter(|&i| free[i]) {
            p[i] = -(0..n)
                .filter(|&j| free[j])
                .map(|j| h[i][j] * g[j])
                .sum::<f64>();
        }
        let slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = identity(n);
            for i in 0..n {
                p[i] = if free[i] { -g[i] } else { 0.0 };
            }
        }
        // Keep the first trial step inside a unit box move.
        let pmax = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = if pmax > 1.0 { 1.0 / pmax } else { 1.0 };

        let mut accepted = None;
        for _ in 0..50 {
            let mut xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            project(&mut xn, lower, upper);
            let decrease: f64 = g
                .iter()
                .zip(xn.iter().zip(&x))
                .map(|(gi, (a, b))| gi * (a - b))
                .sum();
            let fxn = obj.call(&xn);
            if fxn.is_finite() && fxn <= fx + 1e-4 * decrease.min(0.0) && xn != x {
                accepted = Some((xn, fxn));
                break;
            }
            t *= 0.5;
        }

        let Some((xn, fxn)) = accepted else {
            if is_identity(&h) {
                break;
            }
            h = identity(n);
            continue;
        };

        let gn = gradient(&mut obj, &xn, fxn, lower, upper, options.grad_step);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        bfgs_update(&mut h, &s, &y);

        let improvement = fx - fxn;
        x = xn;
        g = gn;
        fx = fxn;
        if improvement <= options.ftol * (1.0 + fx.abs()) {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    Minimum {
        x,
        value: fx,
        iterations,
        evaluations: obj.evals,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn is_identity(h: &[Vec<f64>]) -> bool {
    h.iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 })
    })
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let n = s.len();
    let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
    let ss: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let yy: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(sy > 1e-12 * ss * yy) {
        return;
    }
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| h[i][j] * y[j]).sum())
        .collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
