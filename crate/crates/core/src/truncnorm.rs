//! Truncated-normal moments and multivariate-normal rectangle probabilities.
//!
//! Scalar moments switch to Mills-ratio arithmetic in the tails so windows
//! many standard deviations from the location stay accurate. Rectangle
//! probabilities use Genz's sequential conditioning with a randomly shifted
//! rank-1 lattice; a fixed [`RectProbEstimator`] reuses the same point set
//! across calls so likelihood surfaces built on it are deterministic.

use libm::{erf, erfc};

use crate::linalg::{Cholesky, SquareMatrix};
use crate::qmc::ShiftedLattice;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Windows whose probability falls below this are considered empty.
pub const MIN_WINDOW_PROB: f64 = 1e-300;

/// Largest dimension accepted by [`mvn_rect_prob`].
pub const MAX_RECT_DIM: usize = 200;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TruncNormError {
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("empty truncation window [{lower}, {upper}]")]
    InvertedWindow { lower: f64, upper: f64 },
    #[error("truncation window carries no probability mass (log mass {log_mass})")]
    EmptyWindow { log_mass: f64 },
    #[error("dimension {0} exceeds the supported maximum of {MAX_RECT_DIM}")]
    DimensionTooLarge(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("lower bound {index} is not below its upper bound")]
    InvertedBounds { index: usize },
    #[error("covariance matrix is not positive definite even after jitter")]
    NotPositiveDefinite,
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x - LN_SQRT_2PI).exp()
    }
}

/// `Φ(x)`.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / SQRT_2)
    }
}

/// `1 − Φ(x)`, accurate in the upper tail.
#[inline]
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`; the endpoints map to `∓∞`.
///
/// Wichura's AS 241 (PPND16), relative accuracy about 1e-16.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5226.495_278_852_545 * r + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Scaled complementary error function `exp(x²) erfc(x)` for `x ≥ 0`.
fn erfcx_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 25.0 {
        erfc(x) * (x * x).exp()
    } else {
        // Laplace continued fraction: erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))).
        let mut tail = x;
        for k in (1..=60).rev() {
            tail = x + (k as f64 * 0.5) / tail;
        }
        1.0 / (std::f64::consts::PI.sqrt() * tail)
    }
}

/// Mills ratio `(1 − Φ(x)) / φ(x)` for `x ≥ 0`.
fn mills_ratio(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else {
        (std::f64::consts::PI / 2.0).sqrt() * erfcx_nonneg(x / SQRT_2)
    }
}

/// Moments of a normal variable truncated to an interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TnMoments {
    pub mean: f64,
    pub variance: f64,
    /// `ln(Φ(β) − Φ(α))`, the log probability of the window.
    pub log_mass: f64,
}

/// Standardized moments on `[a, b]` with `a + b ≥ 0` (so `b ≥ 0`).
fn standard_moments(a: f64, b: f64) -> (f64, f64, f64) {
    if a <= 0.0 {
        // The window straddles the mode: the mass is a sum of two non-negative erf terms.
        let z = 0.5 * (erf(b / SQRT_2) - erf(a / SQRT_2));
        let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
        let apa = if a.is_infinite() { 0.0 } else { a * pa };
        let bpb = if b.is_infinite() { 0.0 } else { b * pb };
        let m = (pa - pb) / z;
        let v = 1.0 + (apa - bpb) / z - m * m;
        (m, v, z.ln())
    } else {
        // Right tail. Write Z = φ(a)·D with D = M(a) − M(b)·e^{(a²−b²)/2}.
        let w = if b.is_infinite() {
            0.0
        } else {
            (-(b - a) * (b + a) * 0.5).exp()
        };
        let d = mills_ratio(a) - if w == 0.0 { 0.0 } else { mills_ratio(b) * w };
        let bw = if w == 0.0 { 0.0 } else { b * w };
        let m = (1.0 - w) / d;
        let v = 1.0 + (a - bw) / d - m * m;
        (m, v, -0.5 * a * a - LN_SQRT_2PI + d.ln())
    }
}

/// Mean and variance of `N(loc, scale²)` conditioned on `[lower, upper]`.
///
/// Either bound may be infinite. Fails when the window holds less than
/// [`MIN_WINDOW_PROB`] of the mass.
pub fn tn_moments(
    loc: f64,
    scale: f64,
    lower: f64,
    upper: f64,
) -> Result<TnMoments, TruncNormError> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(TruncNormError::BadScale(scale));
    }
    if !(lower < upper) {
        return Err(TruncNormError::InvertedWindow { lower, upper });
    }
    let alpha = (lower - loc) / scale;
    let beta = (upper - loc) / scale;
    let flip = alpha + beta < 0.0;
    let (a, b) = if flip { (-beta, -alpha) } else { (alpha, beta) };
    let (m, v, log_mass) = standard_moments(a, b);
    if !(log_mass >= MIN_WINDOW_PROB.ln()) || !m.is_finite() {
        return Err(TruncNormError::EmptyWindow { log_mass });
    }
    let m = if flip { -m } else { m };
    let mean = (loc + scale * m).clamp(lower, upper);
    let variance = scale * scale * v.clamp(0.0, 1.0);
    Ok(TnMoments {
        mean,
        variance,
        log_mass,
    })
}

/// Conditional law of a heavy measurement: a normal with location `loc`
/// and scale `scale` truncated to `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedNormalPosterior {
    loc: f64,
    scale: f64,
    lower: f64,
    upper: f64,
}

impl TruncatedNormalPosterior {
    pub fn new(loc: f64, scale: f64, lower: f64, upper: f64) -> Result<Self, TruncNormError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(TruncNormError::BadScale(scale));
        }
        if !(lower < upper) {
            return Err(TruncNormError::InvertedWindow { lower, upper });
        }
        Ok(Self {
            loc,
            scale,
            lower,
            upper,
        })
    }

    pub fn loc(&self) -> f64 {
        self.loc
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn moments(&self) -> Result<TnMoments, TruncNormError> {
        tn_moments(self.loc, self.scale, self.lower, self.upper)
    }

    pub fn mean(&self) -> Result<f64, TruncNormError> {
        self.moments().map(|m| m.mean)
    }

    pub fn variance(&self) -> Result<f64, TruncNormError> {
        self.moments().map(|m| m.variance)
    }
}

/// Quasi-Monte Carlo budget for rectangle probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QmcBudget {
    pub points: usize,
    pub replicates: usize,
}

impl Default for QmcBudget {
    fn default() -> Self {
        Self {
            points: 1 << 13,
            replicates: 8,
        }
    }
}

/// Rectangle probability estimate with its replicate standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectProb {
    pub estimate: f64,
    pub stderr: f64,
}

/// Genz sequential-conditioning estimator over a fixed shifted lattice.
#[derive(Clone, Debug)]
pub struct RectProbEstimator {
    lattice: ShiftedLattice,
    reorder: bool,
}

impl RectProbEstimator {
    /// `dim` is the largest dimension the estimator will be asked about.
    /// With `reorder`, variables are integrated from the most to the least
    /// constraining marginal window, which lowers the variance; without it
    /// the estimate is a smooth function of the inputs for a fixed seed.
    pub fn new(
        dim: usize,
        budget: QmcBudget,
        seed: u64,
        reorder: bool,
    ) -> Result<Self, TruncNormError> {
        if dim > MAX_RECT_DIM {
            return Err(TruncNormError::DimensionTooLarge(dim));
        }
        Ok(Self {
            lattice: ShiftedLattice::new(
                dim.max(1),
                budget.points.max(1),
                budget.replicates.max(1),
                seed,
            ),
            reorder,
        })
    }

    pub fn estimate(
        &self,
        mean: &[f64],
        cov: &SquareMatrix<f64>,
        lower: &[f64],
        upper: &[f64],
    ) -> Result<RectProb, TruncNormError> {
        let n = mean.len();
        if cov.n() != n || lower.len() != n || upper.len() != n {
            return Err(TruncNormError::DimensionMismatch(format!(
                "mean {n}, cov {}, lower {}, upper {}",
                cov.n(),
                lower.len(),
                upper.len()
            )));
        }
        if n > self.lattice.dim().max(1) || n > MAX_RECT_DIM {
            return Err(TruncNormError::DimensionTooLarge(n));
        }
        if let Some(index) = (0..n).find(|&i| !(lower[i] < upper[i])) {
            return Err(TruncNormError::InvertedBounds { index });
        }
        if n == 0 {
            return Ok(RectProb {
                estimate: 1.0,
                stderr: 0.0,
            });
        }

        let mut order: Vec<usize> = (0..n).collect();
        if self.reorder {
            let marginal: Vec<f64> = (0..n)
                .map(|i| {
                    let s = cov[(i, i)].sqrt();
                    window_mass((lower[i] - mean[i]) / s, (upper[i] - mean[i]) / s)
                })
                .collect();
            order.sort_by(|&a, &b| marginal[a].total_cmp(&marginal[b]).then(a.cmp(&b)));
        }
        let cov_p = cov.permuted(&order);
        let lo: Vec<f64> = order.iter().map(|&i| lower[i] - mean[i]).collect();
        let hi: Vec<f64> = order.iter().map(|&i| upper[i] - mean[i]).collect();

        let scale = (0..n).map(|i| cov_p[(i, i)]).sum::<f64>() / n as f64;
        let (chol, _) = Cholesky::factor_with_jitter(&cov_p, 0.0, 1)
            .or_else(|| Cholesky::factor_with_jitter(&cov_p, 1e-10 * scale, 5))
            .ok_or(TruncNormError::NotPositiveDefinite)?;
        let l = chol.lower();

        // First variable needs no sampling.
        let first = window_mass(lo[0] / l[(0, 0)], hi[0] / l[(0, 0)]);
        if n == 1 {
            return Ok(RectProb {
                estimate: first,
                stderr: 0.0,
            });
        }
        if first == 0.0 {
            return Ok(RectProb {
                estimate: 0.0,
                stderr: 0.0,
            });
        }

        let reps = self.lattice.replicates();
        let points = self.lattice.points();
        let mut u = vec![0.0; self.lattice.dim()];
        let mut y = vec![0.0; n];
        let mut rep_means = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut acc = 0.0;
            for k in 1..=points {
                self.lattice.fill(r, k, &mut u);
                let (a0, b0) = (lo[0] / l[(0, 0)], hi[0] / l[(0, 0)]);
                y[0] = sample_window(a0, b0, u[0]);
                let mut weight = first;
                for i in 1..n {
                    let row = l.row(i);
                    let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
                    let (a, b) = ((lo[i] - s) / row[i], (hi[i] - s) / row[i]);
                    let mass = window_mass(a, b);
                    weight *= mass;
                    if weight == 0.0 {
                        break;
                    }
                    if i + 1 < n {
                        y[i] = sample_window(a, b, u[i]);
                    }
                }
                acc += weight;
            }
            rep_means.push(acc / points as f64);
        }
        let estimate = rep_means.iter().sum::<f64>() / reps as f64;
        let stderr = if reps > 1 {
            let var = rep_means
                .iter()
                .map(|m| (m - estimate).powi(2))
                .sum::<f64>()
                / (reps - 1) as f64;
            (var / reps as f64).sqrt()
        } else {
            0.0
        };
        Ok(RectProb {
            estimate: estimate.clamp(0.0, 1.0),
            stderr,
        })
    }
}

/// `Φ(b) − Φ(a)` evaluated on whichever side of zero keeps precision.
#[inline]
fn window_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (std_normal_sf(a) - std_normal_sf(b)).max(0.0)
    } else if b < 0.0 {
        (std_normal_cdf(b) - std_normal_cdf(a)).max(0.0)
    } else {
        (1.0 - std_normal_cdf(a) - std_normal_sf(b)).max(0.0)
    }
}

/// Inverse-CDF draw from the standard normal restricted to `[a, b]` at
/// uniform `u`.
#[inline]
fn sample_window(a: f64, b: f64, u: f64) -> f64 {
    const EDGE: f64 = 1e-300;
    if a > 0.0 {
        let (qa, qb) = (std_normal_sf(a), std_normal_sf(b));
        let q = (qa - u * (qa - qb)).clamp(EDGE, 1.0 - 1e-16);
        -std_normal_quantile(q)
    } else {
        let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
        let p = (pa + u * (pb - pa)).clamp(EDGE, 1.0 - 1e-16);
        std_normal_quantile(p)
    }
}

/// Probability that `X ~ N(mean, cov)` falls in the box `[lower, upper]`,
/// estimated with the default budget (2¹³ lattice points × 8 shifts) and
/// variable reordering. Deterministic for a given seed.
pub fn mvn_rect_prob(
    mean: &[f64],
    cov: &SquareMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    seed: u64,
) -> Result<RectProb, TruncNormError> {
    RectProbEstimator::new(mean.len(), QmcBudget::default(), seed, true)?
        .estimate(mean, cov, lower, upper)
}

/// Union-bound mass outside the box: `Σᵢ P(Xᵢ ∉ [lowerᵢ, upperᵢ])`.
pub(crate) fn outside_mass_bound(
    mean: &[f64],
    variance: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> f64 {
    (0..mean.len())
        .map(|i| {
            let s = variance[i].sqrt();
            std_normal_cdf((lower[i] - mean[i]) / s) + std_normal_sf((upper[i] - mean[i]) / s)
        })
        .sum()
}
