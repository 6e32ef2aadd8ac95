//! Dense-grid global search over the unit cube with local refinement.

/// Maximizes `f` over `[0,1]^d`: evaluates a regular grid with
/// `per_axis` points per coordinate, then polishes the best grid point by
/// compass search down to a step of `1e-12`.
pub fn maximize_on_cube<F: Fn(&[f64]) -> f64>(
    f: F,
    dim: usize,
    per_axis: usize,
) -> (Vec<f64>, f64) {
    let total = per_axis.pow(dim as u32);
    let mut best = (vec![0.0; dim], f64::NEG_INFINITY);
    let mut x = vec![0.0; dim];
    for idx in 0..total {
        let mut rem = idx;
        for v in x.iter_mut() {
            *v = (rem % per_axis) as f64 / (per_axis - 1) as f64;
            rem /= per_axis;
        }
        let v = f(&x);
        if v > best.1 {
            best = (x.clone(), v);
        }
    }
    let (mut x, mut fx) = best;
    let mut step = 1.0 / (per_axis - 1) as f64;
    while step > 1e-12 {
        let mut moved = false;
        for i in 0..dim {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] = (y[i] + dir * step).clamp(0.0, 1.0);
                let fy = f(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (x, fx)
}
