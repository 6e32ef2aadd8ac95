//! Plain Monte Carlo estimators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{cholesky, Matrix};

/// Estimate and standard error of `P(lower ≤ X ≤ upper)` for
/// `X ~ N(mean, cov)` from `samples` independent draws.
pub fn rect_prob(
    mean: &[f64],
    cov: &Matrix,
    lower: &[f64],
    upper: &[f64],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let n = mean.len();
    let l = cholesky(cov);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; n];
    let mut hits = 0u64;
    for _ in 0..samples {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let inside = (0..n).all(|i| {
            let x = mean[i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>();
            x >= lower[i] && x <= upper[i]
        });
        if inside {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    (p, (p * (1.0 - p) / samples as f64).sqrt())
}

/// Sample moments of `N(loc, scale²)` restricted to `[lower, upper]` by
/// rejection from `proposals` untruncated draws.
#[derive(Clone, Copy, Debug)]
pub struct RejectionMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
    pub accepted: usize,
}

pub fn rejection_moments(
    loc: f64,
    scale: f64,
    lower: f64,
    upper: f64,
    proposals: usize,
    seed: u64,
) -> RejectionMoments {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    for _ in 0..proposals {
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = loc + scale * z;
        if x >= lower && x <= upper {
            kept.push(x);
        }
    }
    let k = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / k;
    let m2 = kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let m4 = kept.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k;
    RejectionMoments {
        mean,
        variance: m2,
        mean_se: (m2 / k).sqrt(),
        variance_se: ((m4 - m2 * m2) / k).max(0.0).sqrt(),
        accepted: kept.len(),
    }
}
