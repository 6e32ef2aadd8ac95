//! Noise-free Gaussian-process regression with a constant mean.
//!
//! Fitting standardizes the responses, profiles the mean and variance out
//! of the log-likelihood in closed form and searches the log length-scales
//! with a multi-start bounded quasi-Newton method. The fitted model is
//! reported back on the original response scale.

use crate::kernel::{correlation_matrix, correlation_vector, ConfigPoint};
use crate::linalg::{dot, Cholesky, SquareMatrix};
use crate::optim::{minimize_bounded, QuasiNewtonOptions};
use crate::qmc::shifted_halton;
use crate::scalar::Scalar;

/// Bounds on `ln φ` for inputs normalized to the unit cube.
pub const LOG_PHI_MIN: f64 = -6.907_755_278_982_137; // ln 1e-3
pub const LOG_PHI_MAX: f64 = 6.907_755_278_982_137; // ln 1e3

/// Number of multi-start points for the length-scale search.
pub const GP_STARTS: usize = 10;

const JITTER_ATTEMPTS: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum GpError {
    #[error("need at least {needed} distinct training points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("{points} training points but {values} values")]
    LengthMismatch { points: usize, values: usize },
    #[error("training value {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("process variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("correlation matrix is numerically singular beyond jitter repair")]
    Singular,
    #[error("every likelihood start failed; best diagnostic: {0}")]
    AllStartsFailed(String),
}

/// A fitted single-fidelity Gaussian process.
#[derive(Clone, Debug)]
pub struct GpModel<T: Scalar = f64> {
    mu: T,
    sigma2: T,
    phi: Vec<T>,
    train_points: Vec<ConfigPoint<T>>,
    train_values: Vec<T>,
    chol: Cholesky<T>,
    jitter: T,
    /// `R⁻¹ (y − μ 1)`
    weights: Vec<T>,
    log_likelihood: f64,
}

impl<T: Scalar> GpModel<T> {
    /// Builds a model from fixed parameters. Duplicate points must already be removed.
    pub fn from_parameters(
        mu: T,
        sigma2: T,
        phi: Vec<T>,
        train_points: Vec<ConfigPoint<T>>,
        train_values: Vec<T>,
    ) -> Result<Self, GpError> {
        if !(sigma2 > T::zero()) {
            return Err(GpError::NonPositiveVariance(sigma2.as_f64()));
        }
        if train_points.len() != train_values.len() {
            return Err(GpError::LengthMismatch {
                points: train_points.len(),
                values: train_values.len(),
            });
        }
        if train_points.is_empty() {
            return Err(GpError::TooFewPoints { needed: 1, got: 0 });
        }
        let r = correlation_matrix(&train_points, &phi);
        let (chol, jitter) = Cholesky::factor_with_jitter(&r, T::of(T::NUGGET), JITTER_ATTEMPTS)
            .ok_or(GpError::Singular)?;
        let centered: Vec<T> = train_values.iter().map(|&y| y - mu).collect();
        let weights = chol.solve(&centered);
        let quad = dot(&centered, &weights);
        let n = T::of(train_values.len() as f64);
        let half = T::of(0.5);
        let ll = -half * quad / sigma2 - half * n * sigma2.ln() - half * chol.log_det();
        Ok(Self {
            mu,
            sigma2,
            phi,
            train_points,
            train_values,
            chol,
            jitter,
            weights,
            log_likelihood: ll.as_f64(),
        })
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn train_points(&self) -> &[ConfigPoint<T>] {
        &self.train_points
    }

    pub fn train_values(&self) -> &[T] {
        &self.train_values
    }

    pub fn chol(&self) -> &Cholesky<T> {
        &self.chol
    }

    /// Diagonal regularizer, in correlation units, included in [`Self::chol`].
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    /// Log-likelihood of the training data at the fitted parameters
    /// (constant terms dropped).
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Posterior predictive mean and standard deviation at `x`.
    pub fn predict(&self, x: &ConfigPoint<T>) -> (T, T) {
        let r = correlation_vector(x, &self.train_points, &self.phi);
        let mean = self.mu + dot(&r, &self.weights);
        let explained = self.chol.quad_form(&r);
        let var = self.sigma2 * (T::one() - explained);
        (mean, var.max(T::zero()).sqrt())
    }
}

/// Posterior predictive `(mean, sd)` of `model` at `x`.
pub fn gp_predict<T: Scalar>(model: &GpModel<T>, x: &ConfigPoint<T>) -> (T, T) {
    model.predict(x)
}

/// Log-likelihood of `values` under `GP(mu, sigma2, phi)`:
/// `−(y−μ1)ᵀR⁻¹(y−μ1)/(2σ²) − (n/2) ln σ² − ½ ln|R|`, with the nugget-jittered
/// correlation matrix. A numerically singular matrix is reported as an error.
pub fn gp_log_likelihood<T: Scalar>(
    mu: T,
    sigma2: T,
    phi: &[T],
    points: &[ConfigPoint<T>],
    values: &[T],
) -> Result<f64, GpError> {
    if !(sigma2 > T::zero()) {
        return Err(GpError::NonPositiveVariance(sigma2.as_f64()));
    }
    if points.len() != values.len() {
        return Err(GpError::LengthMismatch {
            points: points.len(),
            values: values.len(),
        });
    }
    if points.len() < 2 {
        return Err(GpError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let r = correlation_matrix(points, phi);
    let chol =
        Cholesky::factor(&r.with_diagonal_added(T::of(T::NUGGET))).ok_or(GpError::Singular)?;
    let centered: Vec<T> = values.iter().map(|&y| y - mu).collect();
    let half = T::of(0.5);
    let n = T::of(values.len() as f64);
    let ll =
        -half * chol.quad_form(&centered) / sigma2 - half * n * sigma2.ln() - half * chol.log_det();
    let ll = ll.as_f64();
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(GpError::Singular)
    }
}

/// Closed-form generalized-least-squares mean and variance for a fixed
/// correlation factor.
pub(crate) struct Profile<T> {
    pub mu: T,
    pub sigma2: T,
    pub log_likelihood: T,
}

pub(crate) fn profile<T: Scalar>(chol: &Cholesky<T>, values: &[T]) -> Profile<T> {
    let n = values.len();
    let ones = vec![T::one(); n];
    let r_inv_one = chol.solve(&ones);
    let denom = r_inv_one.iter().copied().sum::<T>();
    let mu = dot(&r_inv_one, values) / denom;
    let centered: Vec<T> = values.iter().map(|&y| y - mu).collect();
    let quad = chol.quad_form(&centered);
    let nf = T::of(n as f64);
    let sigma2 = (quad / nf).max(T::of(T::VARIANCE_FLOOR));
    let half = T::of(0.5);
    let log_likelihood = -half * quad / sigma2 - half * nf * sigma2.ln() - half * chol.log_det();
    Profile {
        mu,
        sigma2,
        log_likelihood,
    }
}

/// Profiled log-likelihood as a function of `ln φ`, evaluated on
/// already-standardized responses. Returns `-∞` when the correlation
/// matrix cannot be factored.
pub(crate) fn profiled_log_likelihood<T: Scalar>(
    log_phi: &[f64],
    points: &[ConfigPoint<T>],
    values: &[T],
) -> f64 {
    let phi: Vec<T> = log_phi.iter().map(|&v| T::of(v.exp())).collect();
    let r = correlation_matrix(points, &phi);
    match Cholesky::factor(&r.with_diagonal_added(T::of(T::NUGGET))) {
        Some(chol) => {
            let v = profile(&chol, values).log_likelihood.as_f64();
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        }
        None => f64::NEG_INFINITY,
    }
}

/// Drops repeated points, keeping the first occurrence.
pub fn dedup_points<T: Scalar>(
    points: &[ConfigPoint<T>],
    values: &[T],
) -> (Vec<ConfigPoint<T>>, Vec<T>) {
    let mut kept_points: Vec<ConfigPoint<T>> = Vec::with_capacity(points.len());
    let mut kept_values = Vec::with_capacity(values.len());
    for (p, &v) in points.iter().zip(values) {
        if !kept_points.iter().any(|q| q == p) {
            kept_points.push(p.clone());
            kept_values.push(v);
        }
    }
    (kept_points, kept_values)
}

/// Starting points for the `ln φ` search: the origin (φ = 1) followed by
/// seeded quasi-random points of the box.
pub(crate) fn log_phi_starts(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![0.0; dim]];
    starts.extend(
        shifted_halton(count.saturating_sub(1), dim, seed)
            .into_iter()
            .map(|u| {
                u.into_iter()
                    .map(|v| LOG_PHI_MIN + v * (LOG_PHI_MAX - LOG_PHI_MIN))
                    .collect()
            }),
    );
    starts
}

/// Fits a Gaussian process by maximum likelihood.
///
/// Responses are standardized before the search; `μ` and `σ²` are profiled
/// in closed form and `φ` is searched over `[1e-3, 1e3]^d` from
/// [`GP_STARTS`] starts. A constant response vector yields a flat model with
/// `σ²` at the variance floor.
pub fn fit_gp<T: Scalar>(
    points: &[ConfigPoint<T>],
    values: &[T],
    seed: u64,
) -> Result<GpModel<T>, GpError> {
    if points.len() != values.len() {
        return Err(GpError::LengthMismatch {
            points: points.len(),
            values: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(GpError::NonFiniteValue { index });
    }
    let (points, values) = dedup_points(points, values);
    if points.len() < 2 {
        return Err(GpError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let dim = points[0].dim();
    let n = values.len();
    let nf = T::of(n as f64);
    let mean = values.iter().copied().sum::<T>() / nf;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
    let scale = var.sqrt();

    if !(scale > T::zero()) || (scale / mean.abs().max(T::one())).as_f64() < 1e-14 {
        return GpModel::from_parameters(
            values[0],
            T::of(T::VARIANCE_FLOOR),
            vec![T::one(); dim],
            points,
            values,
        );
    }

    let z: Vec<T> = values.iter().map(|&v| (v - mean) / scale).collect();
    let lower = vec![LOG_PHI_MIN; dim];
    let upper = vec![LOG_PHI_MAX; dim];
    let options = QuasiNewtonOptions::default();

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in log_phi_starts(dim, GP_STARTS, seed) {
        let start_ll = profiled_log_likelihood(&start, &points, &z);
        let m = minimize_bounded(
            |lp| -profiled_log_likelihood(lp, &points, &z),
            &start,
            &lower,
            &upper,
            &options,
        );
        let (x, ll) = if -m.value >= start_ll {
            (m.x, -m.value)
        } else {
            (start, start_ll)
        };
        if ll.is_finite() && best.as_ref().is_none_or(|(_, b)| ll > *b) {
            best = Some((x, ll));
        }
    }
    let (log_phi, _) = best.ok_or_else(|| {
        GpError::AllStartsFailed("correlation matrix singular at every start".into())
    })?;

    let phi: Vec<T> = log_phi.iter().map(|&v| T::of(v.exp())).collect();
    let r = correlation_matrix(&points, &phi);
    let chol =
        Cholesky::factor(&r.with_diagonal_added(T::of(T::NUGGET))).ok_or(GpError::Singular)?;
    let prof = profile(&chol, &z);
    let mu = mean + scale * prof.mu;
    let sigma2 = (scale * scale * prof.sigma2).max(T::of(T::VARIANCE_FLOOR));
    GpModel::from_parameters(mu, sigma2, phi, points, values)
}

/// Dense correlation matrix with the default nugget, exposed for callers
/// that need the exact regularized matrix a model factors.
pub fn regularized_correlation<T: Scalar>(points: &[ConfigPoint<T>], phi: &[T]) -> SquareMatrix<T> {
    correlation_matrix(points, phi).with_diagonal_added(T::of(T::NUGGET))
}
