//! Latin hypercube and nested Latin hypercube designs.
//!
//! Points sit at stratum centers. A nested design places `n₁` heavy points
//! inside an `n = s·n₁` light design so that both sets are Latin hypercubes
//! at their own resolution and the heavy points are exact members of the
//! light set.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::ConfigPoint;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DesignError {
    #[error("design size must be at least {min}, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// Light/heavy initial design with `lt_points.len() == ratio * ht_points.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedDesign<T: Scalar = f64> {
    pub lt_points: Vec<ConfigPoint<T>>,
    pub ht_points: Vec<ConfigPoint<T>>,
    pub ratio: usize,
}

fn center<T: Scalar>(stratum: usize, n: usize) -> T {
    T::of((stratum as f64 + 0.5) / n as f64)
}

fn transpose<T: Scalar>(columns: Vec<Vec<T>>, n: usize) -> Vec<ConfigPoint<T>> {
    (0..n)
        .map(|k| ConfigPoint::clamped(columns.iter().map(|col| col[k]).collect()))
        .collect()
}

/// `n` points in `[0,1]^d`, one per stratum `[k/n, (k+1)/n)` in every
/// dimension.
pub fn lhd<T: Scalar>(n: usize, d: usize, seed: u64) -> Result<Vec<ConfigPoint<T>>, DesignError> {
    if n == 0 {
        return Err(DesignError::TooSmall { min: 1, got: 0 });
    }
    if d == 0 {
        return Err(DesignError::ZeroDimension);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = (0..d)
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm.into_iter().map(|s| center(s, n)).collect()
        })
        .collect();
    Ok(transpose(columns, n))
}

/// Nested Latin hypercube with `n₁` heavy points and `s·n₁` light points.
///
/// Per dimension: heavy point `k` takes coarse stratum `π(k)` of the `n₁`
/// grid and a random fine stratum inside it; the remaining fine strata are
/// shuffled over the light-only points.
pub fn nlhd<T: Scalar>(
    n1: usize,
    s: usize,
    d: usize,
    seed: u64,
) -> Result<NestedDesign<T>, DesignError> {
    if n1 < 2 {
        return Err(DesignError::TooSmall { min: 2, got: n1 });
    }
    if s < 2 {
        return Err(DesignError::TooSmall { min: 2, got: s });
    }
    if d == 0 {
        return Err(DesignError::ZeroDimension);
    }
    let n = n1 * s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::with_capacity(d);
    for _ in 0..d {
        let mut coarse: Vec<usize> = (0..n1).collect();
        coarse.shuffle(&mut rng);
        let mut used = vec![false; n];
        let mut fine = Vec::with_capacity(n);
        for &c in &coarse {
            let f = c * s + rng.random_range(0..s);
            used[f] = true;
            fine.push(f);
        }
        let mut rest: Vec<usize> = (0..n).filter(|&f| !used[f]).collect();
        rest.shuffle(&mut rng);
        fine.extend(rest);
        columns.push(fine.into_iter().map(|f| center(f, n)).collect::<Vec<T>>());
    }
    let lt_points = transpose(columns, n);
    let ht_points = lt_points[..n1].to_vec();
    Ok(NestedDesign {
        lt_points,
        ht_points,
        ratio: s,
    })
}

/// True when every dimension has exactly one point per stratum `[k/n, (k+1)/n)`.
pub fn is_latin_hypercube<T: Scalar>(points: &[ConfigPoint<T>]) -> bool {
    let n = points.len();
    if n == 0 {
        return false;
    }
    let d = points[0].dim();
    (0..d).all(|j| {
        let mut seen = vec![false; n];
        points.iter().all(|p| {
            let v = p[j].as_f64();
            if !(0.0..=1.0).contains(&v) {
                return false;
            }
            let k = ((v * n as f64).floor() as usize).min(n - 1);
            !std::mem::replace(&mut seen[k], true)
        })
    })
}

impl<T: Scalar> NestedDesign<T> {
    /// Checks the subset property and the Latin property at both resolutions.
    pub fn is_valid(&self) -> bool {
        self.lt_points.len() == self.ratio * self.ht_points.len()
            && self.ht_points.iter().all(|h| self.lt_points.contains(h))
            && is_latin_hypercube(&self.lt_points)
            && is_latin_hypercube(&self.ht_points)
    }
}
