//! Truncated additive two-fidelity model.
//!
//! Heavy measurements are modelled as `y_h(x) = ρ·y_l(x) + δ(x)` where the
//! light response `y_l` is a Gaussian process and the discrepancy `δ` is a
//! Gaussian process restricted to a known window `[δ1, δ2]`. Given the light
//! data, the heavy vector follows a multivariate truncated normal; its log
//! density plus the light-GP log-likelihood is the fitting objective, with the
//! rectangle probability estimated by quasi-Monte Carlo. Prediction at a new
//! configuration conditions the discrepancy GP on the heavy data and
//! truncates the result to the window shifted by `ρ·y_l(x)`.
//!
//! The light and discrepancy parameters enter the objective through disjoint
//! additive terms, so the light length-scales are fitted by [`fit_gp`] and
//! the discrepancy block `(ρ, μ_δ, σ_δ², φ_δ)` is searched separately.

use crate::gp::{
    dedup_points, fit_gp, log_phi_starts, profile, GpError, GpModel, LOG_PHI_MAX, LOG_PHI_MIN,
};
use crate::kernel::{correlation_matrix, correlation_vector, ConfigPoint};
use crate::linalg::{dot, Cholesky};
use crate::optim::{minimize_bounded, QuasiNewtonOptions};
use crate::qmc::mix_seed;
use crate::scalar::Scalar;
use crate::truncnorm::{
    outside_mass_bound, QmcBudget, RectProbEstimator, TruncNormError, TruncatedNormalPosterior,
};

/// Lower end of the admissible `ρ` range.
pub const RHO_MIN: f64 = 0.05;
/// Upper end of `ρ` when heavy runs are known to improve on light runs.
pub const RHO_MAX_ORDERED: f64 = 1.0;
/// Upper end of `ρ` otherwise.
pub const RHO_MAX_FREE: f64 = 5.0;

/// Finite stand-in for an infinite window edge in the `μ_δ` search box.
const MU_PROXY: f64 = 10.0;
/// Prediction-time scale used when the truncation window carries no mass.
const DEGENERATE_SD_FACTOR: f64 = 1e-6;
/// Rectangle-probability budget inside the optimizer. The point set is held
/// fixed across evaluations, so the estimate is smooth in the parameters and
/// a small set is enough to rank them.
pub const FIT_QMC_BUDGET: QmcBudget = QmcBudget {
    points: 1 << 8,
    replicates: 4,
};
/// Quasi-Newton iterations per start on the truncated likelihood.
const FULL_SEARCH_ITERS: usize = 60;
/// Union-bound mass below which the rectangle probability is treated as one.
const NEGLIGIBLE_OUTSIDE_MASS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum TamError {
    #[error("invalid truncation window [{lower}, {upper}]")]
    InvalidWindow { lower: f64, upper: f64 },
    #[error("heavy point {index} was never evaluated at light fidelity")]
    NotNested { index: usize },
    #[error("need at least 2 heavy points, got {0}")]
    TooFewHeavy(usize),
    #[error("{what}: {left} vs {right} entries")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("non-finite {what} value at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error(
        "no ρ in [{rho_min}, {rho_max}] keeps every heavy-minus-scaled-light discrepancy inside [{lower}, {upper}]; widen the δ bounds"
    )]
    InfeasibleWindow {
        lower: f64,
        upper: f64,
        rho_min: f64,
        rho_max: f64,
    },
    #[error("light-fidelity GP: {0}")]
    Gp(#[from] GpError),
    #[error("discrepancy correlation matrix is singular")]
    SingularDiscrepancy,
    #[error(transparent)]
    TruncNorm(#[from] TruncNormError),
}

/// Known interval `[δ1, δ2]` the discrepancy is confined to. Either edge may
/// be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationWindow {
    lower: f64,
    upper: f64,
}

impl TruncationWindow {
    pub fn new(lower: f64, upper: f64) -> Result<Self, TamError> {
        if lower.is_nan()
            || upper.is_nan()
            || !(lower < upper)
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
        {
            return Err(TamError::InvalidWindow { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    /// Grows a finite window by `fraction` of its width, split evenly
    /// between both edges. Half-infinite windows move their finite edge
    /// outward by `fraction` of `max(1, |edge|)`.
    pub fn widened(&self, fraction: f64) -> Self {
        let width = self.upper - self.lower;
        if width.is_finite() {
            let pad = 0.5 * fraction * width;
            Self {
                lower: self.lower - pad,
                upper: self.upper + pad,
            }
        } else {
            let pad = |e: f64| fraction * e.abs().max(1.0);
            Self {
                lower: if self.lower.is_finite() {
                    self.lower - pad(self.lower)
                } else {
                    self.lower
                },
                upper: if self.upper.is_finite() {
                    self.upper + pad(self.upper)
                } else {
                    self.upper
                },
            }
        }
    }
}

/// Parameters of the joint likelihood (the light mean and variance are
/// always profiled out).
#[derive(Clone, Debug, PartialEq)]
pub struct TamParams {
    pub rho: f64,
    pub mu_delta: f64,
    pub sigma2_delta: f64,
    pub phi_lt: Vec<f64>,
    pub phi_delta: Vec<f64>,
}

/// Light and heavy training data with `D_h ⊆ D_l`.
#[derive(Clone, Debug)]
pub struct TamData {
    lt_points: Vec<ConfigPoint>,
    lt_values: Vec<f64>,
    ht_points: Vec<ConfigPoint>,
    ht_values: Vec<f64>,
    lt_at_ht: Vec<f64>,
}

impl TamData {
    /// Validates the nesting and looks up the light value at every heavy
    /// point. Repeated points keep their first value.
    pub fn new(
        lt_points: &[ConfigPoint],
        lt_values: &[f64],
        ht_points: &[ConfigPoint],
        ht_values: &[f64],
    ) -> Result<Self, TamError> {
        if lt_points.len() != lt_values.len() {
            return Err(TamError::LengthMismatch {
                what: "light points/values",
                left: lt_points.len(),
                right: lt_values.len(),
            });
        }
        if ht_points.len() != ht_values.len() {
            return Err(TamError::LengthMismatch {
                what: "heavy points/values",
                left: ht_points.len(),
                right: ht_values.len(),
            });
        }
        if let Some(index) = lt_values.iter().position(|v| !v.is_finite()) {
            return Err(TamError::NonFinite {
                what: "light",
                index,
            });
        }
        if let Some(index) = ht_values.iter().position(|v| !v.is_finite()) {
            return Err(TamError::NonFinite {
                what: "heavy",
                index,
            });
        }
        let (lt_points, lt_values) = dedup_points(lt_points, lt_values);
        let (ht_points, ht_values) = dedup_points(ht_points, ht_values);
        let mut lt_at_ht = Vec::with_capacity(ht_points.len());
        for (index, p) in ht_points.iter().enumerate() {
            let j = lt_points
                .iter()
                .position(|q| q == p)
                .ok_or(TamError::NotNested { index })?;
            lt_at_ht.push(lt_values[j]);
        }
        Ok(Self {
            lt_points,
            lt_values,
            ht_points,
            ht_values,
            lt_at_ht,
        })
    }

    pub fn lt_points(&self) -> &[ConfigPoint] {
        &self.lt_points
    }

    pub fn lt_values(&self) -> &[f64] {
        &self.lt_values
    }

    pub fn ht_points(&self) -> &[ConfigPoint] {
        &self.ht_points
    }

    pub fn ht_values(&self) -> &[f64] {
        &self.ht_values
    }

    /// Light values at the heavy points.
    pub fn lt_at_ht(&self) -> &[f64] {
        &self.lt_at_ht
    }

    fn dim(&self) -> usize {
        self.lt_points.first().map_or(0, ConfigPoint::dim)
    }
}

/// Fitting controls.
#[derive(Clone, Debug)]
pub struct TamFitOptions {
    /// Heavy runs never do worse than light runs, so `ρ ≤ 1`.
    pub loss_ordering: bool,
    /// Point set used for the rectangle probability inside the likelihood.
    pub qmc: QmcBudget,
    /// Length-scale starts for the Gaussian warm-up search.
    pub warmup_starts: usize,
}

impl Default for TamFitOptions {
    fn default() -> Self {
        Self {
            loss_ordering: false,
            qmc: FIT_QMC_BUDGET,
            warmup_starts: 5,
        }
    }
}

impl TamFitOptions {
    pub fn rho_max(&self) -> f64 {
        if self.loss_ordering {
            RHO_MAX_ORDERED
        } else {
            RHO_MAX_FREE
        }
    }
}

/// Discrepancy part of the log-likelihood for fixed data and window.
struct DiscrepancyLikelihood<'a> {
    points: &'a [ConfigPoint],
    heavy: &'a [f64],
    light: &'a [f64],
    window: TruncationWindow,
    estimator: RectProbEstimator,
}

impl<'a> DiscrepancyLikelihood<'a> {
    fn new(
        data: &'a TamData,
        window: TruncationWindow,
        budget: QmcBudget,
        seed: u64,
    ) -> Result<Self, TamError> {
        Ok(Self {
            points: &data.ht_points,
            heavy: &data.ht_values,
            light: &data.lt_at_ht,
            window,
            estimator: RectProbEstimator::new(data.ht_points.len(), budget, seed, false)?,
        })
    }

    fn feasible(&self, rho: f64) -> bool {
        self.heavy
            .iter()
            .zip(self.light)
            .all(|(&h, &l)| self.window.contains(h - rho * l))
    }

    fn factor(&self, phi: &[f64]) -> Option<Cholesky<f64>> {
        let r = correlation_matrix(self.points, phi);
        Cholesky::factor(&r.with_diagonal_added(f64::NUGGET))
    }

    /// `ln P(δ1 ≤ δ ≤ δ2)` for `δ ~ N(μ 1, σ² R)`.
    fn log_window_prob(&self, mu: f64, sigma2: f64, chol: &Cholesky<f64>) -> f64 {
        let n = self.heavy.len();
        let (lo, hi) = (self.window.lower, self.window.upper);
        let variance = vec![sigma2 * (1.0 + f64::NUGGET); n];
        let outside = outside_mass_bound(&vec![mu; n], &variance, &vec![lo; n], &vec![hi; n]);
        if outside < NEGLIGIBLE_OUTSIDE_MASS {
            return -outside;
        }
        let cov = chol.reconstruct().scaled(sigma2);
        match self
            .estimator
            .estimate(&vec![mu; n], &cov, &vec![lo; n], &vec![hi; n])
        {
            Ok(p) if p.estimate > 0.0 => p.estimate.ln(),
            _ => f64::NEG_INFINITY,
        }
    }

    /// Gaussian part only (no truncation normalizer).
    fn gaussian(&self, rho: f64, mu: f64, sigma2: f64, chol: &Cholesky<f64>) -> f64 {
        let q: Vec<f64> = self
            .heavy
            .iter()
            .zip(self.light)
            .map(|(&h, &l)| h - rho * l - mu)
            .collect();
        let n = q.len() as f64;
        -0.5 * chol.quad_form(&q) / sigma2 - 0.5 * n * sigma2.ln() - 0.5 * chol.log_det()
    }

    fn eval(&self, rho: f64, mu: f64, sigma2: f64, phi: &[f64]) -> f64 {
        if !(sigma2 > 0.0) || !self.feasible(rho) {
            return f64::NEG_INFINITY;
        }
        let Some(chol) = self.factor(phi) else {
            return f64::NEG_INFINITY;
        };
        let v = self.gaussian(rho, mu, sigma2, &chol) - self.log_window_prob(mu, sigma2, &chol);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

fn light_log_likelihood(data: &TamData, phi_lt: &[f64]) -> f64 {
    let r = correlation_matrix(&data.lt_points, phi_lt);
    match Cholesky::factor(&r.with_diagonal_added(f64::NUGGET)) {
        Some(chol) => profile(&chol, &data.lt_values).log_likelihood,
        None => f64::NEG_INFINITY,
    }
}

/// Joint log-likelihood of `(y_h, y_l)` with the light mean and variance
/// profiled out; constant terms dropped. Infeasible parameters (a heavy
/// discrepancy outside the window, or a window of zero probability) give
/// `-∞`. The rectangle probability uses the default QMC budget seeded by
/// `qmc_seed`.
pub fn tam_log_likelihood(
    params: &TamParams,
    data: &TamData,
    window: TruncationWindow,
    qmc_seed: u64,
) -> Result<f64, TamError> {
    tam_log_likelihood_with_budget(params, data, window, QmcBudget::default(), qmc_seed)
}

pub fn tam_log_likelihood_with_budget(
    params: &TamParams,
    data: &TamData,
    window: TruncationWindow,
    budget: QmcBudget,
    qmc_seed: u64,
) -> Result<f64, TamError> {
    if data.ht_points.is_empty() {
        return Err(TamError::TooFewHeavy(0));
    }
    let lik = DiscrepancyLikelihood::new(data, window, budget, qmc_seed)?;
    let delta = lik.eval(
        params.rho,
        params.mu_delta,
        params.sigma2_delta,
        &params.phi_delta,
    );
    Ok(light_log_likelihood(data, &params.phi_lt) + delta)
}

/// A fitted truncated additive model.
#[derive(Clone, Debug)]
pub struct TamModel {
    lt_gp: GpModel,
    rho: f64,
    mu_delta: f64,
    sigma2_delta: f64,
    phi_delta: Vec<f64>,
    window: TruncationWindow,
    ht_points: Vec<ConfigPoint>,
    ht_values: Vec<f64>,
    lt_at_ht: Vec<f64>,
    chol_delta: Cholesky<f64>,
    jitter: f64,
    /// `R_δ⁻¹ (y_h − ρ y_l1 − μ_δ 1)`
    weights: Vec<f64>,
    log_likelihood: f64,
}

/// Heavy-fidelity prediction together with how it was produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeavyPrediction {
    pub mean: f64,
    pub sd: f64,
    /// Light value used: stored when the point was run lightly, imputed otherwise.
    pub lt_value: f64,
    pub lt_observed: bool,
    pub posterior: TruncatedNormalPosterior,
    /// The window had no probability mass and the clamped location was returned.
    pub degenerate: bool,
}

impl TamModel {
    /// Assembles a model from explicit parameters (light GP already fitted).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parameters(
        lt_gp: GpModel,
        rho: f64,
        mu_delta: f64,
        sigma2_delta: f64,
        phi_delta: Vec<f64>,
        window: TruncationWindow,
        ht_points: &[ConfigPoint],
        ht_values: &[f64],
    ) -> Result<Self, TamError> {
        let data = TamData::new(
            lt_gp.train_points(),
            lt_gp.train_values(),
            ht_points,
            ht_values,
        )?;
        let r = correlation_matrix(&data.ht_points, &phi_delta);
        let (chol_delta, jitter) = Cholesky::factor_with_jitter(&r, f64::NUGGET, 6)
            .ok_or(TamError::SingularDiscrepancy)?;
        let resid: Vec<f64> = data
            .ht_values
            .iter()
            .zip(&data.lt_at_ht)
            .map(|(&h, &l)| h - rho * l - mu_delta)
            .collect();
        let weights = chol_delta.solve(&resid);
        let log_likelihood = tam_log_likelihood(
            &TamParams {
                rho,
                mu_delta,
                sigma2_delta,
                phi_lt: lt_gp.phi().to_vec(),
                phi_delta: phi_delta.clone(),
            },
            &data,
            window,
            0,
        )?;
        Ok(Self {
            lt_gp,
            rho,
            mu_delta,
            sigma2_delta,
            phi_delta,
            window,
            ht_points: data.ht_points,
            ht_values: data.ht_values,
            lt_at_ht: data.lt_at_ht,
            chol_delta,
            jitter,
            weights,
            log_likelihood,
        })
    }

    pub fn lt_gp(&self) -> &GpModel {
        &self.lt_gp
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mu_delta(&self) -> f64 {
        self.mu_delta
    }

    pub fn sigma2_delta(&self) -> f64 {
        self.sigma2_delta
    }

    pub fn phi_delta(&self) -> &[f64] {
        &self.phi_delta
    }

    pub fn window(&self) -> TruncationWindow {
        self.window
    }

    pub fn ht_points(&self) -> &[ConfigPoint] {
        &self.ht_points
    }

    pub fn ht_values(&self) -> &[f64] {
        &self.ht_values
    }

    pub fn lt_at_ht(&self) -> &[f64] {
        &self.lt_at_ht
    }

    pub fn chol_delta(&self) -> &Cholesky<f64> {
        &self.chol_delta
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Joint log-likelihood at the fitted parameters.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn params(&self) -> TamParams {
        TamParams {
            rho: self.rho,
            mu_delta: self.mu_delta,
            sigma2_delta: self.sigma2_delta,
            phi_lt: self.lt_gp.phi().to_vec(),
            phi_delta: self.phi_delta.clone(),
        }
    }

    /// Stored light value at `x` if it was run lightly.
    pub fn observed_lt_value(&self, x: &ConfigPoint) -> Option<f64> {
        self.lt_gp
            .train_points()
            .iter()
            .position(|p| p == x)
            .map(|i| self.lt_gp.train_values()[i])
    }

    /// Untruncated conditional location and scale of `y_h(x)` given `y_l(x) = lt_value`.
    fn conditional(&self, x: &ConfigPoint, lt_value: f64) -> (f64, f64) {
        let r = correlation_vector(x, &self.ht_points, &self.phi_delta);
        let loc = self.rho * lt_value + self.mu_delta + dot(&r, &self.weights);
        let var = self.sigma2_delta * (1.0 - self.chol_delta.quad_form(&r));
        let floor = self.jitter * self.sigma2_delta;
        (loc, var.max(floor).sqrt())
    }

    /// Heavy prediction with its provenance.
    pub fn predict_detailed(&self, x: &ConfigPoint) -> HeavyPrediction {
        let (lt_value, lt_observed) = match self.observed_lt_value(x) {
            Some(v) => (v, true),
            None => (self.lt_gp.predict(x).0, false),
        };
        let posterior = tam_posterior(self, x, lt_value);
        let (mean, sd, degenerate) = match posterior.moments() {
            Ok(m) => (m.mean, m.variance.sqrt(), false),
            Err(_) => (
                posterior.loc().clamp(posterior.lower(), posterior.upper()),
                posterior.scale() * DEGENERATE_SD_FACTOR,
                true,
            ),
        };
        HeavyPrediction {
            mean,
            sd,
            lt_value,
            lt_observed,
            posterior,
            degenerate,
        }
    }
}

/// Truncated-normal conditional law of `y_h(x)` given the heavy data and a
/// light value at `x`.
pub fn tam_posterior(model: &TamModel, x: &ConfigPoint, lt_value: f64) -> TruncatedNormalPosterior {
    let (loc, scale) = model.conditional(x, lt_value);
    let shift = model.rho * lt_value;
    TruncatedNormalPosterior::new(
        loc,
        scale,
        shift + model.window.lower,
        shift + model.window.upper,
    )
    .expect("window and scale validated at fit time")
}

/// Predicted heavy mean and standard deviation at `x`. A stored light value
/// is used when `x` was run lightly, otherwise the light GP mean is plugged in.
pub fn tam_predict(model: &TamModel, x: &ConfigPoint) -> (f64, f64) {
    let p = model.predict_detailed(x);
    (p.mean, p.sd)
}

/// Range of `ρ` keeping every `y_h,i − ρ·y_l1,i` inside the window.
fn feasible_rho(
    data: &TamData,
    window: TruncationWindow,
    rho_min: f64,
    rho_max: f64,
) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (rho_min, rho_max);
    for (&h, &l) in data.ht_values.iter().zip(&data.lt_at_ht) {
        if l == 0.0 {
            if !window.contains(h) {
                return None;
            }
            continue;
        }
        let a = (h - window.upper) / l;
        let b = (h - window.lower) / l;
        let (a, b) = if l > 0.0 { (a, b) } else { (b, a) };
        lo = lo.max(a);
        hi = hi.min(b);
    }
    (lo <= hi).then_some((lo, hi))
}

struct SearchBox {
    rho: (f64, f64),
    mu: (f64, f64),
    log_sigma2: (f64, f64),
}

impl SearchBox {
    fn new(data: &TamData, window: TruncationWindow, rho: (f64, f64)) -> Self {
        let extreme = [rho.0, rho.1]
            .iter()
            .flat_map(|&r| {
                data.ht_values
                    .iter()
                    .zip(&data.lt_at_ht)
                    .map(move |(&h, &l)| (h - r * l).abs())
            })
            .fold(0.0f64, f64::max);
        let proxy = MU_PROXY.max(2.0 * extreme);
        let mu_lo = if window.lower.is_finite() {
            window.lower
        } else {
            -proxy.max(proxy - window.upper)
        };
        let mu_hi = if window.upper.is_finite() {
            window.upper
        } else {
            proxy.max(proxy + window.lower)
        };
        let n = data.ht_values.len() as f64;
        let mean = data.ht_values.iter().sum::<f64>() / n;
        let var = data
            .ht_values
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        let reference = var.max(1e-12);
        Self {
            rho,
            mu: (mu_lo, mu_hi),
            log_sigma2: ((1e-10 * reference).ln(), (1e2 * reference).ln()),
        }
    }

    fn lower(&self, d: usize) -> Vec<f64> {
        let mut v = vec![self.rho.0, self.mu.0, self.log_sigma2.0];
        v.extend(std::iter::repeat_n(LOG_PHI_MIN, d));
        v
    }

    fn upper(&self, d: usize) -> Vec<f64> {
        let mut v = vec![self.rho.1, self.mu.1, self.log_sigma2.1];
        v.extend(std::iter::repeat_n(LOG_PHI_MAX, d));
        v
    }
}

/// Gaussian warm-up: for fixed `φ_δ`, `ρ` and `μ_δ` solve a generalized
/// least-squares regression of `y_h` on `(y_l1, 1)` and `σ_δ²` follows in
/// closed form; all three are clipped into the search box.
fn gaussian_profile(
    lik: &DiscrepancyLikelihood,
    bx: &SearchBox,
    log_phi: &[f64],
) -> Option<(f64, [f64; 3])> {
    let phi: Vec<f64> = log_phi.iter().map(|v| v.exp()).collect();
    let chol = lik.factor(&phi)?;
    let n = lik.heavy.len();
    let ones = vec![1.0; n];
    let ri_l = chol.solve(lik.light);
    let ri_1 = chol.solve(&ones);
    let (ll, l1, one1) = (dot(lik.light, &ri_l), dot(&ones, &ri_l), dot(&ones, &ri_1));
    let (lh, h1) = (dot(lik.heavy, &ri_l), dot(lik.heavy, &ri_1));
    let det = ll * one1 - l1 * l1;
    let rho = if det.abs() > 1e-12 * (ll * one1).abs().max(1e-300) {
        (lh * one1 - l1 * h1) / det
    } else {
        0.5 * (bx.rho.0 + bx.rho.1)
    };
    let rho = rho.clamp(bx.rho.0, bx.rho.1);
    let mu = ((h1 - rho * l1) / one1).clamp(bx.mu.0, bx.mu.1);
    let q: Vec<f64> = lik
        .heavy
        .iter()
        .zip(lik.light)
        .map(|(&h, &l)| h - rho * l - mu)
        .collect();
    let log_s2 = (chol.quad_form(&q) / n as f64)
        .max(1e-300)
        .ln()
        .clamp(bx.log_sigma2.0, bx.log_sigma2.1);
    let value = lik.gaussian(rho, mu, log_s2.exp(), &chol);
    value.is_finite().then_some((value, [rho, mu, log_s2]))
}

/// Fits the truncated additive model by maximum likelihood.
///
/// The light GP is fitted first. The discrepancy block is warmed up with a
/// Gaussian profile search over `φ_δ`, then the full truncated likelihood is
/// maximized over `(ρ, μ_δ, ln σ_δ², ln φ_δ)` from several starts with `ρ`
/// restricted to the range that keeps every heavy point feasible.
pub fn fit_tam(
    lt_points: &[ConfigPoint],
    lt_values: &[f64],
    ht_points: &[ConfigPoint],
    ht_values: &[f64],
    window: TruncationWindow,
    options: &TamFitOptions,
    seed: u64,
) -> Result<TamModel, TamError> {
    fit_tam_from(
        lt_points, lt_values, ht_points, ht_values, window, options, None, seed,
    )
}

/// As [`fit_tam`], additionally starting the search from `previous`
/// (typically the fit from the preceding optimization round) instead of
/// the center of the search box.
#[allow(clippy::too_many_arguments)]
pub fn fit_tam_from(
    lt_points: &[ConfigPoint],
    lt_values: &[f64],
    ht_points: &[ConfigPoint],
    ht_values: &[f64],
    window: TruncationWindow,
    options: &TamFitOptions,
    previous: Option<&TamParams>,
    seed: u64,
) -> Result<TamModel, TamError> {
    let data = TamData::new(lt_points, lt_values, ht_points, ht_values)?;
    let n1 = data.ht_points.len();
    if n1 < 2 {
        return Err(TamError::TooFewHeavy(n1));
    }
    let rho_max = options.rho_max();
    let rho_range =
        feasible_rho(&data, window, RHO_MIN, rho_max).ok_or(TamError::InfeasibleWindow {
            lower: window.lower,
            upper: window.upper,
            rho_min: RHO_MIN,
            rho_max,
        })?;

    let lt_gp = fit_gp(&data.lt_points, &data.lt_values, mix_seed(seed, 1))?;
    let d = data.dim();
    let bx = SearchBox::new(&data, window, rho_range);
    let lik = DiscrepancyLikelihood::new(&data, window, options.qmc, mix_seed(seed, 2))?;
    let qn = QuasiNewtonOptions::default();

    // Warm-up over ln φ_δ with the Gaussian profile.
    let mut warm: Option<(f64, Vec<f64>)> = None;
    for start in log_phi_starts(d, options.warmup_starts.max(1), mix_seed(seed, 3)) {
        let m = minimize_bounded(
            |lp| gaussian_profile(&lik, &bx, lp).map_or(f64::INFINITY, |(v, _)| -v),
            &start,
            &vec![LOG_PHI_MIN; d],
            &vec![LOG_PHI_MAX; d],
            &qn,
        );
        if let Some((v, head)) = gaussian_profile(&lik, &bx, &m.x) {
            if warm.as_ref().is_none_or(|(b, _)| v > *b) {
                let mut theta = head.to_vec();
                theta.extend_from_slice(&m.x);
                warm = Some((v, theta));
            }
        }
    }

    let objective = |theta: &[f64]| -> f64 {
        let phi: Vec<f64> = theta[3..].iter().map(|v| v.exp()).collect();
        -lik.eval(theta[0], theta[1], theta[2].exp(), &phi)
    };
    let (lower, upper) = (bx.lower(d), bx.upper(d));
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some((_, theta)) = warm {
        starts.push(theta);
    }
    match previous {
        Some(p) if p.phi_delta.len() == d => {
            let mut theta = vec![p.rho, p.mu_delta, p.sigma2_delta.max(1e-300).ln()];
            theta.extend(p.phi_delta.iter().map(|v| v.max(1e-300).ln()));
            for (i, t) in theta.iter_mut().enumerate() {
                *t = t.clamp(lower[i], upper[i]);
            }
            starts.push(theta);
        }
        _ => {
            let mut neutral = vec![
                0.5 * (bx.rho.0 + bx.rho.1),
                0.5 * (bx.mu.0 + bx.mu.1),
                0.5 * (bx.log_sigma2.0 + bx.log_sigma2.1),
            ];
            neutral.extend(std::iter::repeat_n(0.0, d));
            starts.push(neutral);
        }
    }

    let full = QuasiNewtonOptions {
        max_iter: FULL_SEARCH_ITERS,
        ftol: 1e-8,
        ..qn
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let start_value = objective(&start);
        let m = minimize_bounded(objective, &start, &lower, &upper, &full);
        let (x, v) = if m.value <= start_value {
            (m.x, m.value)
        } else {
            (start, start_value)
        };
        if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, x));
        }
    }
    let (_, theta) = best.ok_or(TamError::SingularDiscrepancy)?;

    let phi_delta: Vec<f64> = theta[3..].iter().map(|v| v.exp()).collect();
    let model = TamModel::from_parameters(
        lt_gp,
        theta[0],
        theta[1],
        theta[2].exp(),
        phi_delta,
        window,
        &data.ht_points,
        &data.ht_values,
    )?;
    Ok(model)
}
