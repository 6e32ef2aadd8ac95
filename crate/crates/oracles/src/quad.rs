//! Adaptive Simpson quadrature and the truncated-normal moments it yields.

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// `∫_a^b f` by adaptive Simpson with absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Start from a few panels so narrow features are not skipped.
    let panels = 16;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == panels { b } else { lo + h };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(lo, hi, fa, fm, fb);
            adapt(&f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40)
        })
        .sum()
}

/// Mean and variance of `N(loc, scale²)` truncated to `[lower, upper]`,
/// by direct quadrature of the density. Infinite bounds are cut at 40
/// standard deviations.
pub fn truncated_normal_moments(loc: f64, scale: f64, lower: f64, upper: f64) -> (f64, f64) {
    let a = ((lower - loc) / scale).max(-40.0);
    let b = ((upper - loc) / scale).min(40.0);
    // Density relative to its largest value on the window, so the absolute
    // tolerance is also a relative one however deep the window sits.
    let peak = if a > 0.0 {
        a
    } else if b < 0.0 {
        b
    } else {
        0.0
    };
    let density = |t: f64| (-0.5 * (t - peak) * (t + peak)).exp();
    let tol = 1e-14;
    let z = integrate(density, a, b, tol);
    let m1 = integrate(|t| t * density(t), a, b, tol) / z;
    let m2 = integrate(|t| (t - m1) * (t - m1) * density(t), a, b, tol) / z;
    (loc + scale * m1, scale * scale * m2)
}
