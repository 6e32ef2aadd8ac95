//! Experiment configuration: a TOML file plus command-line overrides.

use std::fmt;
use std::path::Path;
use std::time::Duration;

use btao::acquisition::{DEFAULT_CANDIDATES, DEFAULT_REFINE};
use btao::driver::RunSettings;
use btao::objectives::{ExternalSpec, FidelityBudget};
use btao::qmc::mix_seed;
use btao::space::Dimension;
use btao::tam::TruncationWindow;
use btao::{Benchmark, SearchSpace, Sense};
use serde::Deserialize;

/// A rejected configuration, with the key that caused it.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Btao,
    Gpbo,
    Random,
    All,
}

impl Method {
    /// The concrete methods this choice stands for.
    pub fn expand(self) -> Vec<Method> {
        match self {
            Method::All => vec![Method::Btao, Method::Gpbo, Method::Random],
            m => vec![m],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Btao => "btao",
            Method::Gpbo => "gpbo",
            Method::Random => "random",
            Method::All => "all",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetFile {
    pub max_iters: u64,
    pub strip_len: u64,
    pub improve_eps: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalFile {
    pub command: Option<String>,
    pub timeout_s: Option<f64>,
    pub sense: Option<String>,
    pub known_optimum: Option<f64>,
    pub light_budget: Option<BudgetFile>,
    pub heavy_budget: Option<BudgetFile>,
    pub space: Option<Vec<Dimension>>,
}

/// The file layout. Every key is optional; missing keys take defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub objective: Option<String>,
    pub method: Option<Method>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub n1_init: Option<usize>,
    pub s: Option<usize>,
    pub n_max: Option<usize>,
    pub delta_lo: Option<f64>,
    pub delta_hi: Option<f64>,
    pub rho_cap: Option<bool>,
    pub candidates: Option<usize>,
    pub refine: Option<usize>,
    pub threads: Option<usize>,
    pub wall_clock: Option<bool>,
    pub external: Option<ExternalFile>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Overwrites keys with any values set on the command line.
    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if let Some(v) = v {
                *slot = Some(v.clone());
            }
        }
        set(&mut self.objective, &o.objective);
        set(&mut self.method, &o.method);
        set(&mut self.seed, &o.seed);
        set(&mut self.trials, &o.trials);
        set(&mut self.n1_init, &o.init_ht);
        set(&mut self.s, &o.s_ratio);
        set(&mut self.n_max, &o.n_max);
        set(&mut self.delta_lo, &o.delta_lo);
        set(&mut self.delta_hi, &o.delta_hi);
        set(&mut self.candidates, &o.candidates);
        set(&mut self.threads, &o.threads);
        if o.rho_cap {
            self.rho_cap = Some(true);
        }
        if o.wall_clock {
            self.wall_clock = Some(true);
        }
        if o.external_cmd.is_some() || o.timeout_s.is_some() {
            let ext = self.external.get_or_insert_with(ExternalFile::default);
            set(&mut ext.command, &o.external_cmd);
            set(&mut ext.timeout_s, &o.timeout_s);
            if o.external_cmd.is_some() && o.objective.is_none() {
                self.objective = Some("external".into());
            }
        }
    }
}

/// Values given as command-line flags.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Built-in benchmark (currin, park, toy_sine) or `external`.
    #[arg(long)]
    pub objective: Option<String>,
    /// Trainer command line speaking the ask/tell protocol.
    #[arg(long)]
    pub external_cmd: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimization rounds after the initial design.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Light runs per heavy run.
    #[arg(long)]
    pub s_ratio: Option<usize>,
    /// Heavy runs in the initial design.
    #[arg(long)]
    pub init_ht: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_hi: Option<f64>,
    /// Restrict the scale link to ρ ≤ 1.
    #[arg(long)]
    pub rho_cap: bool,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Raw acquisition candidates per maximization.
    #[arg(long)]
    pub candidates: Option<usize>,
    /// Per-request trainer timeout in seconds.
    #[arg(long)]
    pub timeout_s: Option<f64>,
    /// Worker threads for trials (0 picks one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Record elapsed time in the wall_ms column (makes output non-reproducible).
    #[arg(long)]
    pub wall_clock: bool,
}

/// What the trials optimize.
#[derive(Clone, Debug)]
pub enum ObjectiveChoice {
    Benchmark(Benchmark),
    External(ExternalSpec),
}

impl ObjectiveChoice {
    pub fn name(&self) -> String {
        match self {
            ObjectiveChoice::Benchmark(b) => b.name().to_string(),
            ObjectiveChoice::External(spec) => format!("external:{}", spec.argv.join(" ")),
        }
    }

    pub fn known_optimum(&self) -> Option<f64> {
        match self {
            ObjectiveChoice::Benchmark(b) => Some(b.optimum()),
            ObjectiveChoice::External(spec) => spec.known_optimum,
        }
    }
}

/// Fully resolved settings for one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub objective: ObjectiveChoice,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub trials: usize,
    pub n1_init: usize,
    pub s: usize,
    pub n_max: usize,
    pub window: TruncationWindow,
    pub rho_cap: bool,
    pub candidates: usize,
    pub refine: usize,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub wall_clock: bool,
}

pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_N1_INIT: usize = 3;
pub const DEFAULT_S: usize = 2;
pub const DEFAULT_N_MAX: usize = 20;
const DEFAULT_TIMEOUT_S: f64 = 3600.0;

/// Discrepancy window used when the configuration names none.
pub fn default_window(b: Benchmark) -> (f64, f64) {
    match b {
        Benchmark::Currin => (-1.0, 1.0),
        Benchmark::Park => (-2.0, 0.0),
        Benchmark::ToySine => (-1.5, 0.5),
    }
}

fn budget(b: Option<BudgetFile>, key: &str) -> Result<FidelityBudget, ConfigError> {
    let b = b.ok_or_else(|| invalid(key, "required for external objectives"))?;
    FidelityBudget::new(b.max_iters, b.strip_len, b.improve_eps)
        .map_err(|e| invalid(key, e.to_string()))
}

fn resolve_external(ext: Option<ExternalFile>) -> Result<ExternalSpec, ConfigError> {
    let ext =
        ext.ok_or_else(|| invalid("external", "objective `external` needs an [external] table"))?;
    let command = ext
        .command
        .ok_or_else(|| invalid("external.command", "missing"))?;
    let argv =
        shlex::split(&command).ok_or_else(|| invalid("external.command", "unbalanced quotes"))?;
    if argv.is_empty() {
        return Err(invalid("external.command", "empty command"));
    }
    let dims = ext
        .space
        .ok_or_else(|| invalid("external.space", "missing"))?;
    let space = SearchSpace::new(dims).map_err(|e| invalid("external.space", e.to_string()))?;
    let sense = match ext.sense.as_deref().unwrap_or("minimize") {
        "minimize" | "min" => Sense::Minimize,
        "maximize" | "max" => Sense::Maximize,
        other => {
            return Err(invalid(
                "external.sense",
                format!("expected minimize or maximize, got `{other}`"),
            ))
        }
    };
    let timeout_s = ext.timeout_s.unwrap_or(DEFAULT_TIMEOUT_S);
    if !(timeout_s.is_finite() && timeout_s > 0.0) {
        return Err(invalid(
            "external.timeout_s",
            format!("must be positive, got {timeout_s}"),
        ));
    }
    Ok(ExternalSpec {
        argv,
        space,
        sense,
        known_optimum: ext.known_optimum,
        light_budget: budget(ext.light_budget, "external.light_budget")?,
        heavy_budget: budget(ext.heavy_budget, "external.heavy_budget")?,
        timeout: Duration::from_secs_f64(timeout_s),
    })
}

impl ExperimentConfig {
    /// Applies defaults and checks every value.
    pub fn resolve(file: ConfigFile) -> Result<Self, ConfigError> {
        let objective_name = match (&file.objective, &file.external) {
            (Some(o), _) => o.clone(),
            (None, Some(_)) => "external".into(),
            (None, None) => {
                return Err(invalid(
                    "objective",
                    "missing (give a benchmark name or an [external] table)",
                ))
            }
        };
        let objective = if objective_name == "external" {
            ObjectiveChoice::External(resolve_external(file.external)?)
        } else {
            if file.external.is_some() {
                return Err(invalid(
                    "external",
                    format!("given, but objective is `{objective_name}`"),
                ));
            }
            ObjectiveChoice::Benchmark(
                Benchmark::from_name(&objective_name)
                    .map_err(|e| invalid("objective", e.to_string()))?,
            )
        };

        let (lo_default, hi_default) = match &objective {
            ObjectiveChoice::Benchmark(b) => default_window(*b),
            ObjectiveChoice::External(_) => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let lo = file.delta_lo.unwrap_or(lo_default);
        let hi = file.delta_hi.unwrap_or(hi_default);
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        {
            let key = if file.delta_hi.is_some() {
                "delta_hi"
            } else {
                "delta_lo"
            };
            return Err(invalid(
                key,
                format!("need delta_lo < delta_hi, got [{lo}, {hi}]"),
            ));
        }
        let window =
            TruncationWindow::new(lo, hi).map_err(|e| invalid("delta_lo", e.to_string()))?;

        let n1_init = file.n1_init.unwrap_or(DEFAULT_N1_INIT);
        if n1_init < 2 {
            return Err(invalid(
                "n1_init",
                format!("must be at least 2, got {n1_init}"),
            ));
        }
        let s = file.s.unwrap_or(DEFAULT_S);
        if s < 2 {
            return Err(invalid("s", format!("must be at least 2, got {s}")));
        }
        let trials = file.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        let candidates = file.candidates.unwrap_or(DEFAULT_CANDIDATES);
        if candidates == 0 {
            return Err(invalid("candidates", "must be at least 1"));
        }
        let refine = file.refine.unwrap_or(DEFAULT_REFINE);
        if refine == 0 {
            return Err(invalid("refine", "must be at least 1"));
        }
        Ok(Self {
            objective,
            methods: file.method.unwrap_or(Method::Btao).expand(),
            seed: file.seed.unwrap_or(0),
            trials,
            n1_init,
            s,
            n_max: file.n_max.unwrap_or(DEFAULT_N_MAX),
            window,
            rho_cap: file.rho_cap.unwrap_or(false),
            candidates,
            refine,
            threads: file.threads.unwrap_or(0),
            wall_clock: file.wall_clock.unwrap_or(false),
        })
    }

    /// Reads an optional file, applies flag overrides and resolves.
    pub fn from_sources(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut file = match path {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        file.apply(overrides);
        Self::resolve(file)
    }

    /// Seed of one trial, derived from the experiment seed.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        mix_seed(self.seed, trial as u64)
    }

    pub fn run_settings(&self, trial: usize) -> RunSettings {
        RunSettings {
            n1_init: self.n1_init,
            s: self.s,
            n_max: self.n_max,
            window: self.window,
            rho_cap: self.rho_cap,
            candidate_budget: self.candidates,
            refine_budget: self.refine,
            seed: self.trial_seed(trial),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::resolve(ConfigFile::parse(text, "test.toml")?)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = resolve("objective = \"park\"\nseed = 0\n").unwrap();
        assert_eq!((c.n1_init, c.s, c.n_max, c.trials), (3, 2, 20, 10));
        assert_eq!((c.window.lower(), c.window.upper()), (-2.0, 0.0));
        assert_eq!(c.methods, vec![Method::Btao]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = resolve("objective = \"park\"\nn_maxx = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("n_maxx"), "{err}");
        let err = resolve("objective = \"external\"\n[external]\ncomand = \"x\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("comand"), "{err}");
    }

    #[test]
    fn bad_values_name_their_key() {
        let cases = [
            ("seed = 1\n", "objective"),
            (
                "objective = \"park\"\ndelta_lo = 0.5\ndelta_hi = 0.5\n",
                "delta_hi",
            ),
            ("objective = \"park\"\ns = 1\n", "s:"),
            ("objective = \"nope\"\n", "objective"),
            ("objective = \"park\"\nn1_init = 1\n", "n1_init"),
        ];
        for (text, key) in cases {
            let err = resolve(text).unwrap_err().to_string();
            assert!(err.starts_with(key), "{text:?}: {err}");
        }
    }

    #[test]
    fn infinite_window_edges_parse() {
        let c = resolve("objective = \"currin\"\ndelta_lo = -inf\ndelta_hi = 0.0\n").unwrap();
        assert_eq!(c.window.lower(), f64::NEG_INFINITY);
    }

    const EXTERNAL: &str = r#"
objective = "external"
[external]
command = "python3 train.py --fast"
sense = "minimize"
light_budget = { max_iters = 5, strip_len = 2, improve_eps = 0.01 }
heavy_budget = { max_iters = 50, strip_len = 5, improve_eps = 0.0 }
[[external.space]]
name = "C"
lower = 0.0
upper = 1.0
scale = "log2"
type = "continuous"
"#;

    #[test]
    fn log_scale_with_zero_lower_names_the_dimension() {
        let err = resolve(EXTERNAL).unwrap_err().to_string();
        assert!(
            err.starts_with("external.space") && err.contains('C'),
            "{err}"
        );
        let c = resolve(&EXTERNAL.replace("lower = 0.0", "lower = 0.001")).unwrap();
        let ObjectiveChoice::External(spec) = c.objective else {
            panic!()
        };
        assert_eq!(spec.argv, vec!["python3", "train.py", "--fast"]);
        assert!(c.window.lower().is_infinite() && c.window.upper().is_infinite());
    }

    #[test]
    fn flags_win_over_the_file() {
        let mut f =
            ConfigFile::parse("objective = \"park\"\nn_max = 7\ntrials = 4\n", "t").unwrap();
        f.apply(&Overrides {
            n_max: Some(2),
            objective: Some("currin".into()),
            method: Some(Method::All),
            ..Overrides::default()
        });
        let c = ExperimentConfig::resolve(f).unwrap();
        assert_eq!((c.n_max, c.trials), (2, 4));
        assert!(matches!(
            c.objective,
            ObjectiveChoice::Benchmark(Benchmark::Currin)
        ));
        assert_eq!(c.methods.len(), 3);
        assert_ne!(c.trial_seed(0), c.trial_seed(1));
    }
}
