//! Independent trials of one or more methods, and their regret tables.

use std::io;
use std::path::Path;

use btao::driver::{run_btao, run_gpbo, run_random, RunError, RunTrace};
use btao::objectives::{ExternalTrainer, Objective};
use btao::Synthetic;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method, ObjectiveChoice};
use crate::output::{
    emit_csv, emit_summary, summarize, write_csv_atomic, RegretRow, RegretTable, SummaryRow,
};

/// What happened in one trial. A failed trial keeps whatever it evaluated.
#[derive(Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub trace: Option<RunTrace>,
    pub error: Option<String>,
}

impl TrialOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// All trials of one method.
#[derive(Debug)]
pub struct MethodReport {
    pub method: Method,
    pub outcomes: Vec<TrialOutcome>,
    pub table: RegretTable,
    /// Mean curves over the successful trials.
    pub summary: Vec<SummaryRow>,
}

impl MethodReport {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.ok()).count()
    }

    /// At least half the trials failed.
    pub fn aborted(&self) -> bool {
        2 * self.failures() >= self.outcomes.len()
    }
}

fn make_objective(choice: &ObjectiveChoice) -> Result<Box<dyn Objective>, String> {
    match choice {
        ObjectiveChoice::Benchmark(b) => Ok(Box::new(Synthetic(*b))),
        ObjectiveChoice::External(spec) => ExternalTrainer::start(spec.clone())
            .map(|t| Box::new(t) as Box<dyn Objective>)
            .map_err(|e| e.to_string()),
    }
}

/// Runs one trial of one method. External objectives get their own process.
pub fn run_trial(cfg: &ExperimentConfig, method: Method, trial: usize) -> TrialOutcome {
    let settings = cfg.run_settings(trial);
    let seed = settings.seed;
    let mut objective = match make_objective(&cfg.objective) {
        Ok(o) => o,
        Err(e) => {
            return TrialOutcome {
                trial,
                seed,
                trace: None,
                error: Some(e),
            }
        }
    };
    let result: Result<RunTrace, RunError> = match method {
        Method::Btao => run_btao(objective.as_mut(), &settings),
        Method::Gpbo => run_gpbo(objective.as_mut(), &settings),
        Method::Random => run_random(objective.as_mut(), &settings),
        Method::All => unreachable!("`all` is expanded during config resolution"),
    };
    match result {
        Ok(trace) => TrialOutcome {
            trial,
            seed,
            trace: Some(trace),
            error: None,
        },
        Err(e) => TrialOutcome {
            trial,
            seed,
            error: Some(e.to_string()),
            trace: Some(*e.trace),
        },
    }
}

/// One row per heavy evaluation of a trace.
pub fn regret_rows(
    trial: usize,
    trace: &RunTrace,
    optimum: Option<f64>,
    wall_clock: bool,
) -> Vec<RegretRow> {
    let target = optimum.map(|o| trace.sense.to_internal(o));
    trace
        .heavy_events()
        .zip(&trace.best_ht_curve)
        .enumerate()
        .map(|(k, (e, &best))| RegretRow {
            trial,
            ht_eval: k + 1,
            best_value: trace.sense.from_internal(best),
            simple_regret: target.map(|t| best - t),
            lt_count: e.lt_count_after,
            wall_ms: if wall_clock { e.wall_ms } else { 0.0 },
        })
        .collect()
}

fn pool(cfg: &ExperimentConfig) -> io::Result<rayon::ThreadPool> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = if cfg.threads == 0 {
        cfg.trials.min(cores)
    } else {
        cfg.threads
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(io::Error::other)
}

/// Runs every configured method for all trials.
pub fn run_experiment(cfg: &ExperimentConfig) -> io::Result<Vec<MethodReport>> {
    let pool = pool(cfg)?;
    let optimum = cfg.objective.known_optimum();
    let reports = cfg
        .methods
        .iter()
        .map(|&method| {
            let outcomes: Vec<TrialOutcome> = pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let o = run_trial(cfg, method, t);
                        match &o.error {
                            None => log::info!("{method} trial {t} done"),
                            Some(e) => log::warn!("{method} trial {t} failed: {e}"),
                        }
                        o
                    })
                    .collect()
            });
            let mut table = RegretTable::default();
            for o in &outcomes {
                if let Some(trace) = &o.trace {
                    table
                        .rows
                        .extend(regret_rows(o.trial, trace, optimum, cfg.wall_clock));
                }
            }
            let ok: Vec<usize> = outcomes
                .iter()
                .filter(|o| o.ok())
                .map(|o| o.trial)
                .collect();
            let summary = summarize(&table, &ok);
            MethodReport {
                method,
                outcomes,
                table,
                summary,
            }
        })
        .collect();
    Ok(reports)
}

pub const STATUS_HEADER: [&str; 6] = ["trial", "seed", "status", "ht_evals", "lt_evals", "message"];

/// Writes `<method>_trials.csv`, `<method>_summary.csv` and
/// `<method>_status.csv` into `dir`.
pub fn write_reports(reports: &[MethodReport], dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", dir.display())))?;
    for r in reports {
        let name = r.method.name();
        emit_csv(&r.table, &dir.join(format!("{name}_trials.csv")))?;
        emit_summary(&r.summary, &dir.join(format!("{name}_summary.csv")))?;
        let status: Vec<Vec<String>> = r
            .outcomes
            .iter()
            .map(|o| {
                let (ht, lt) = o
                    .trace
                    .as_ref()
                    .map_or((0, 0), |t| (t.ht_count(), t.lt_count()));
                vec![
                    o.trial.to_string(),
                    o.seed.to_string(),
                    if o.ok() { "ok" } else { "failed" }.to_string(),
                    ht.to_string(),
                    lt.to_string(),
                    o.error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_csv_atomic(
            &dir.join(format!("{name}_status.csv")),
            &STATUS_HEADER,
            &status,
        )?;
    }
    Ok(())
}
