//! Optimization loops: two-fidelity BTAO, single-fidelity GP-UCB and
//! random search, plus regret bookkeeping.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    beta_schedule, maximize_ucb_gp, maximize_ucb_l, select_ht_candidate, AcquisitionContext,
    AcquisitionError, UcbMaximum, DEFAULT_CANDIDATES, DEFAULT_REFINE,
};
use crate::design::{lhd, nlhd, DesignError};
use crate::gp::{fit_gp, GpError};
use crate::kernel::ConfigPoint;
use crate::objectives::{Fidelity, Objective, ObjectiveError, Sense};
use crate::qmc::mix_seed;
use crate::tam::{fit_tam_from, TamError, TamFitOptions, TamParams, TruncationWindow};

/// Points closer than this (sup-norm) count as already evaluated.
pub const DUPLICATE_TOL: f64 = 1e-9;
/// Relative growth of the discrepancy window on the retry after a failed fit.
pub const WINDOW_RETRY_GROWTH: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub index: usize,
    pub fidelity: Fidelity,
    pub point: ConfigPoint,
    /// Value as reported by the objective.
    pub value: f64,
    /// Value in the minimized convention.
    pub internal: f64,
    pub ht_count_after: usize,
    pub lt_count_after: usize,
    pub wall_ms: f64,
}

/// Everything a run evaluated, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub sense: Sense,
    pub events: Vec<Event>,
    /// Running minimum of the internal heavy values, one entry per heavy event.
    pub best_ht_curve: Vec<f64>,
}

impl RunTrace {
    fn new(sense: Sense) -> Self {
        Self {
            sense,
            events: Vec::new(),
            best_ht_curve: Vec::new(),
        }
    }

    fn push(&mut self, fidelity: Fidelity, point: ConfigPoint, value: f64, started: Instant) {
        let internal = self.sense.to_internal(value);
        let (mut lt, mut ht) = self
            .events
            .last()
            .map_or((0, 0), |e| (e.lt_count_after, e.ht_count_after));
        match fidelity {
            Fidelity::Light => lt += 1,
            Fidelity::Heavy => {
                ht += 1;
                let best = self
                    .best_ht_curve
                    .last()
                    .map_or(internal, |&b: &f64| b.min(internal));
                self.best_ht_curve.push(best);
            }
        }
        self.events.push(Event {
            index: self.events.len(),
            fidelity,
            point,
            value,
            internal,
            ht_count_after: ht,
            lt_count_after: lt,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    pub fn lt_count(&self) -> usize {
        self.events.last().map_or(0, |e| e.lt_count_after)
    }

    pub fn ht_count(&self) -> usize {
        self.events.last().map_or(0, |e| e.ht_count_after)
    }

    pub fn heavy_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.fidelity == Fidelity::Heavy)
    }

    /// Points and internal values observed at one fidelity.
    pub fn data(&self, fidelity: Fidelity) -> (Vec<ConfigPoint>, Vec<f64>) {
        self.events
            .iter()
            .filter(|e| e.fidelity == fidelity)
            .map(|e| (e.point.clone(), e.internal))
            .unzip()
    }

    /// Best heavy event (first among equals).
    pub fn best_heavy(&self) -> Option<&Event> {
        self.heavy_events()
            .fold(None, |best: Option<&Event>, e| match best {
                Some(b) if b.internal <= e.internal => Some(b),
                _ => Some(e),
            })
    }
}

/// `(heavy count, regret)` after each heavy evaluation, where regret is the
/// gap between `y_star` and the best heavy value so far in the objective's
/// own sense.
pub fn simple_regret(trace: &RunTrace, y_star: f64) -> Vec<(usize, f64)> {
    let target = trace.sense.to_internal(y_star);
    trace
        .best_ht_curve
        .iter()
        .enumerate()
        .map(|(i, &b)| (i + 1, b - target))
        .collect()
}

/// Settings shared by all methods.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub n1_init: usize,
    /// Light runs per heavy run.
    pub s: usize,
    /// Optimization rounds after the initial design.
    pub n_max: usize,
    pub window: TruncationWindow,
    /// Heavy runs never do worse than light ones, so `ρ ≤ 1`.
    pub rho_cap: bool,
    pub candidate_budget: usize,
    pub refine_budget: usize,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            n1_init: 3,
            s: 2,
            n_max: 20,
            window: TruncationWindow::unbounded(),
            rho_cap: false,
            candidate_budget: DEFAULT_CANDIDATES,
            refine_budget: DEFAULT_REFINE,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunErrorKind {
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("GP fit: {0}")]
    Gp(#[from] GpError),
    #[error("TAM fit failed twice (second try with the window widened): {0}")]
    Tam(#[from] TamError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
    #[error("invalid settings: {0}")]
    Settings(String),
}

/// A trial that stopped early, with everything evaluated up to that point.
#[derive(Debug, thiserror::Error)]
#[error("{kind} (after {} evaluations)", trace.events.len())]
pub struct RunError {
    pub kind: RunErrorKind,
    pub trace: Box<RunTrace>,
}

struct Runner<'a> {
    objective: &'a mut dyn Objective,
    trace: RunTrace,
    started: Instant,
}

impl<'a> Runner<'a> {
    fn new(objective: &'a mut dyn Objective) -> Self {
        let sense = objective.sense();
        Self {
            objective,
            trace: RunTrace::new(sense),
            started: Instant::now(),
        }
    }

    fn eval(&mut self, x: &ConfigPoint, fidelity: Fidelity) -> Result<f64, RunErrorKind> {
        let v = self.objective.evaluate(x, fidelity)?;
        self.trace.push(fidelity, x.clone(), v, self.started);
        Ok(self.trace.sense.to_internal(v))
    }

    fn finish(self, result: Result<(), RunErrorKind>) -> Result<RunTrace, RunError> {
        match result {
            Ok(()) => Ok(self.trace),
            Err(kind) => Err(RunError {
                kind,
                trace: Box::new(self.trace),
            }),
        }
    }
}

fn is_near(x: &ConfigPoint, points: &[ConfigPoint]) -> bool {
    points.iter().any(|p| x.sup_distance(p) <= DUPLICATE_TOL)
}

/// The refined maximizer, or the best raw candidate not already evaluated.
fn fresh_point(result: UcbMaximum, seen: &[ConfigPoint]) -> ConfigPoint {
    if !is_near(&result.point, seen) {
        return result.point;
    }
    result
        .ranked
        .into_iter()
        .map(|(c, _)| c)
        .find(|c| !is_near(c, seen))
        .unwrap_or(result.point)
}

fn check(settings: &RunSettings, two_fidelity: bool) -> Result<(), RunErrorKind> {
    if settings.n1_init < 2 {
        return Err(RunErrorKind::Settings(format!(
            "n1_init must be at least 2, got {}",
            settings.n1_init
        )));
    }
    if two_fidelity && settings.s < 2 {
        return Err(RunErrorKind::Settings(format!(
            "s must be at least 2, got {}",
            settings.s
        )));
    }
    if settings.candidate_budget == 0 || settings.refine_budget == 0 {
        return Err(RunErrorKind::Settings(
            "acquisition budgets must be at least 1".into(),
        ));
    }
    Ok(())
}

const STREAM_DESIGN: u64 = 1;
const STREAM_LT_GP: u64 = 2;
const STREAM_LT_ACQ: u64 = 3;
const STREAM_TAM: u64 = 4;
const STREAM_HT_GP: u64 = 5;
const STREAM_HT_ACQ: u64 = 6;
const STREAM_RANDOM: u64 = 7;

fn step_seed(seed: u64, stream: u64, step: usize) -> u64 {
    mix_seed(mix_seed(seed, stream), step as u64)
}

/// Two-fidelity optimization with a truncated additive surrogate.
///
/// Starts from a nested design with `s·n1_init` light and `n1_init` heavy
/// runs. Each of the `n_max` rounds adds `s` light runs chosen by the light
/// GP's UCB, refits the two-fidelity model and spends one heavy run on the
/// light-only point with the largest heavy UCB.
pub fn run_btao(
    objective: &mut dyn Objective,
    settings: &RunSettings,
) -> Result<RunTrace, RunError> {
    let mut runner = Runner::new(objective);
    let result = btao_loop(&mut runner, settings);
    runner.finish(result)
}

fn btao_loop(r: &mut Runner, cfg: &RunSettings) -> Result<(), RunErrorKind> {
    check(cfg, true)?;
    let d = r.objective.dim();
    let design = nlhd::<f64>(cfg.n1_init, cfg.s, d, mix_seed(cfg.seed, STREAM_DESIGN))?;
    let mut lt_points = Vec::new();
    let mut lt_values = Vec::new();
    for x in &design.lt_points {
        lt_values.push(r.eval(x, Fidelity::Light)?);
        lt_points.push(x.clone());
    }
    let mut ht_points = Vec::new();
    let mut ht_values = Vec::new();
    for x in &design.ht_points {
        ht_values.push(r.eval(x, Fidelity::Heavy)?);
        ht_points.push(x.clone());
    }

    let fit_options = TamFitOptions {
        loss_ordering: cfg.rho_cap,
        ..TamFitOptions::default()
    };
    let mut previous: Option<TamParams> = None;
    for round in 1..=cfg.n_max {
        for j in 0..cfg.s {
            let step = round * cfg.s + j;
            let gp = fit_gp(
                &lt_points,
                &lt_values,
                step_seed(cfg.seed, STREAM_LT_GP, step),
            )?;
            let ctx = AcquisitionContext::new(
                beta_schedule(lt_points.len(), d),
                cfg.candidate_budget,
                cfg.refine_budget,
            )?;
            let found = maximize_ucb_l(&gp, &ctx, step_seed(cfg.seed, STREAM_LT_ACQ, step));
            let x = fresh_point(found, &lt_points);
            lt_values.push(r.eval(&x, Fidelity::Light)?);
            lt_points.push(x);
        }

        let tam_seed = step_seed(cfg.seed, STREAM_TAM, round);
        let fit = |window: TruncationWindow| {
            fit_tam_from(
                &lt_points,
                &lt_values,
                &ht_points,
                &ht_values,
                window,
                &fit_options,
                previous.as_ref(),
                tam_seed,
            )
        };
        let model = match fit(cfg.window) {
            Ok(m) => m,
            Err(first) => {
                log::warn!("round {round}: TAM fit failed ({first}); retrying with a wider window");
                fit(cfg.window.widened(WINDOW_RETRY_GROWTH))?
            }
        };
        log::debug!(
            "round {round}: rho={:.4} mu={:.4} sigma2={:.3e} loglik={:.4}",
            model.rho(),
            model.mu_delta(),
            model.sigma2_delta(),
            model.log_likelihood()
        );
        previous = Some(model.params());

        let pool: Vec<ConfigPoint> = lt_points
            .iter()
            .filter(|p| !ht_points.contains(p))
            .cloned()
            .collect();
        let pick = select_ht_candidate(&model, &pool, beta_schedule(ht_points.len(), d))?;
        let x = pool[pick].clone();
        ht_values.push(r.eval(&x, Fidelity::Heavy)?);
        ht_points.push(x);
    }
    Ok(())
}

/// Single-fidelity GP-UCB on heavy runs: `n1_init` design points, then
/// `n_max` acquisitions.
pub fn run_gpbo(
    objective: &mut dyn Objective,
    settings: &RunSettings,
) -> Result<RunTrace, RunError> {
    let mut runner = Runner::new(objective);
    let result = gpbo_loop(&mut runner, settings);
    runner.finish(result)
}

fn gpbo_loop(r: &mut Runner, cfg: &RunSettings) -> Result<(), RunErrorKind> {
    check(cfg, false)?;
    let d = r.objective.dim();
    let mut points = Vec::new();
    let mut values = Vec::new();
    for x in lhd::<f64>(cfg.n1_init, d, mix_seed(cfg.seed, STREAM_DESIGN))? {
        values.push(r.eval(&x, Fidelity::Heavy)?);
        points.push(x);
    }
    for step in 1..=cfg.n_max {
        let gp = fit_gp(&points, &values, step_seed(cfg.seed, STREAM_HT_GP, step))?;
        let ctx = AcquisitionContext::new(
            beta_schedule(points.len(), d),
            cfg.candidate_budget,
            cfg.refine_budget,
        )?;
        let found = maximize_ucb_gp(&gp, &ctx, step_seed(cfg.seed, STREAM_HT_ACQ, step));
        let x = fresh_point(found, &points);
        values.push(r.eval(&x, Fidelity::Heavy)?);
        points.push(x);
    }
    Ok(())
}

/// Uniform random heavy runs; the budget matches GP-UCB's
/// (`n1_init + n_max`).
pub fn run_random(
    objective: &mut dyn Objective,
    settings: &RunSettings,
) -> Result<RunTrace, RunError> {
    let mut runner = Runner::new(objective);
    let result = (|| {
        let d = runner.objective.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(settings.seed, STREAM_RANDOM));
        for _ in 0..settings.n1_init + settings.n_max {
            let x = ConfigPoint::clamped((0..d).map(|_| rng.random::<f64>()).collect());
            runner.eval(&x, Fidelity::Heavy)?;
        }
        Ok(())
    })();
    runner.finish(result)
}
