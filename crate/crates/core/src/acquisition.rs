//! Upper-confidence-bound acquisition for both fidelities.

use crate::gp::GpModel;
use crate::kernel::ConfigPoint;
use crate::qmc::shifted_halton;
use crate::tam::TamModel;

pub const DEFAULT_CANDIDATES: usize = 2048;
pub const DEFAULT_REFINE: usize = 8;
const REFINE_SWEEPS: usize = 20;
const REFINE_STEP: f64 = 0.05;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AcquisitionError {
    #[error("candidate pool is empty; add light evaluations before choosing a heavy run")]
    EmptyPool,
    #[error("beta must be finite and non-negative")]
    BadBeta,
    #[error("acquisition budgets must be at least 1")]
    BadBudget,
}

/// Exploration weight and search budgets for one acquisition step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcquisitionContext {
    pub beta: f64,
    pub candidate_budget: usize,
    pub refine_budget: usize,
}

impl AcquisitionContext {
    pub fn new(
        beta: f64,
        candidate_budget: usize,
        refine_budget: usize,
    ) -> Result<Self, AcquisitionError> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(AcquisitionError::BadBeta);
        }
        if candidate_budget == 0 || refine_budget == 0 {
            return Err(AcquisitionError::BadBudget);
        }
        Ok(Self {
            beta,
            candidate_budget,
            refine_budget,
        })
    }

    pub fn with_beta(beta: f64) -> Result<Self, AcquisitionError> {
        Self::new(beta, DEFAULT_CANDIDATES, DEFAULT_REFINE)
    }
}

/// `0.2 · d · ln(2·count)`.
pub fn beta_schedule(count: usize, d: usize) -> f64 {
    0.2 * d as f64 * (2.0 * count.max(1) as f64).ln()
}

/// `−mean + β·sd`: the objective is minimized, the acquisition maximized.
pub fn ucb(mean: f64, sd: f64, beta: f64) -> f64 {
    -mean + beta * sd
}

/// Result of a continuous acquisition search.
#[derive(Clone, Debug)]
pub struct UcbMaximum {
    pub point: ConfigPoint,
    pub value: f64,
    /// Raw candidates with their scores, best first (ties by generation order).
    pub ranked: Vec<(ConfigPoint, f64)>,
}

fn score_or_floor(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `score` over `[0,1]^dim`: shifted-Halton candidates, then
/// compass search from the best few. The step halves whenever a full
/// sweep makes no progress.
pub fn maximize_over_cube(
    score: impl Fn(&ConfigPoint) -> f64,
    dim: usize,
    candidate_budget: usize,
    refine_budget: usize,
    seed: u64,
) -> UcbMaximum {
    let candidates: Vec<ConfigPoint> = shifted_halton(candidate_budget.max(1), dim, seed)
        .into_iter()
        .map(ConfigPoint::clamped)
        .collect();
    let mut ranked: Vec<(ConfigPoint, f64)> = candidates
        .into_iter()
        .map(|c| {
            let s = score_or_floor(score(&c));
            (c, s)
        })
        .collect();
    // Stable: equal scores keep generation order.
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut best = ranked[0].clone();
    for (start, start_score) in ranked.iter().take(refine_budget.max(1)) {
        let mut x = start.coords().to_vec();
        let mut fx = *start_score;
        let mut step = REFINE_STEP;
        for _ in 0..REFINE_SWEEPS {
            let mut moved = false;
            for j in 0..dim {
                for dir in [1.0, -1.0] {
                    let old = x[j];
                    let trial = (old + dir * step).clamp(0.0, 1.0);
                    if trial == old {
                        continue;
                    }
                    x[j] = trial;
                    let ft = score_or_floor(score(&ConfigPoint::clamped(x.clone())));
                    if ft > fx {
                        fx = ft;
                        moved = true;
                        break;
                    }
                    x[j] = old;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if fx > best.1 {
            best = (ConfigPoint::clamped(x), fx);
        }
    }
    UcbMaximum {
        point: best.0,
        value: best.1,
        ranked,
    }
}

/// Maximizes the light-fidelity UCB over the unit cube.
pub fn maximize_ucb_l(lt_model: &GpModel, ctx: &AcquisitionContext, seed: u64) -> UcbMaximum {
    maximize_ucb_gp(lt_model, ctx, seed)
}

/// Maximizes the UCB of a single-fidelity GP over the unit cube.
pub fn maximize_ucb_gp(model: &GpModel, ctx: &AcquisitionContext, seed: u64) -> UcbMaximum {
    let beta = ctx.beta;
    maximize_over_cube(
        |x| {
            let (m, s) = model.predict(x);
            ucb(m, s, beta)
        },
        model.dim(),
        ctx.candidate_budget,
        ctx.refine_budget,
        seed,
    )
}

/// Heavy UCB for every pool point, using stored light values.
pub fn score_pool(tam_model: &TamModel, pool: &[ConfigPoint], beta: f64) -> Vec<f64> {
    pool.iter()
        .map(|x| {
            let p = tam_model.predict_detailed(x);
            score_or_floor(ucb(p.mean, p.sd, beta))
        })
        .collect()
}

/// Picks the pool point with the largest heavy UCB; returns its index in
/// `pool`. Ties go to the earliest point.
pub fn select_ht_candidate(
    tam_model: &TamModel,
    pool: &[ConfigPoint],
    beta: f64,
) -> Result<usize, AcquisitionError> {
    if pool.is_empty() {
        return Err(AcquisitionError::EmptyPool);
    }
    let scores = score_pool(tam_model, pool, beta);
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}
