use std::path::{Path, PathBuf};
use std::process::ExitCode;

use btao::Benchmark;
use btao_cli::config::{default_window, ConfigFile, ExperimentConfig, Method, Overrides};
use btao_cli::experiment::{run_experiment, write_reports, MethodReport};
use btao_cli::stub::{serve, StubExit, StubOptions};
use btao_cli::{exit, verify};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "btao",
    version,
    about = "Two-fidelity Bayesian hyperparameter optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or flags.
    Run {
        /// TOML configuration file; flags override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory for the CSV files.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Run the synthetic benchmark suites with every method.
    Bench {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override each suite's number of rounds.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        wall_clock: bool,
        #[arg(long, default_value = "bench")]
        out: PathBuf,
    },
    /// Check the numerics against brute-force references.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: VerifySuite,
    },
    /// Reference trainer speaking the ask/tell protocol on stdin/stdout.
    ProtocolStub(StubOptions),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Currin,
    Park,
    ToySine,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifySuite {
    Oracles,
    Structure,
    All,
}

/// Rounds per suite when not overridden.
fn suite_rounds(b: Benchmark) -> usize {
    match b {
        Benchmark::Currin => 15,
        Benchmark::Park => 20,
        Benchmark::ToySine => 3,
    }
}

fn report(reports: &[MethodReport], out: &Path, label: &str) -> ExitCode {
    if let Err(e) = write_reports(reports, out) {
        eprintln!("error: writing results: {e}");
        return ExitCode::from(exit::RUNTIME as u8);
    }
    let mut aborted = false;
    for r in reports {
        for o in r.outcomes.iter().filter(|o| !o.ok()) {
            eprintln!(
                "{label} {} trial {} failed: {}",
                r.method,
                o.trial,
                o.error.as_deref().unwrap_or("")
            );
        }
        let ok = r.outcomes.len() - r.failures();
        let last = r.summary.last();
        let regret = last
            .and_then(|s| s.mean_simple_regret)
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        let best = last.map_or_else(
            || "n/a".to_string(),
            |s| format!("{:.6}", s.mean_best_value),
        );
        println!(
            "{label} {}: {ok}/{} trials ok, mean final best {best}, mean final regret {regret}",
            r.method,
            r.outcomes.len()
        );
        aborted |= r.aborted();
    }
    println!("{label}: results in {}", out.display());
    if aborted {
        eprintln!("error: at least half the trials of a method failed");
        return ExitCode::from(exit::RUNTIME as u8);
    }
    ExitCode::SUCCESS
}

fn run_one(cfg: &ExperimentConfig, out: &Path, label: &str) -> ExitCode {
    match run_experiment(cfg) {
        Ok(reports) => report(&reports, out, label),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::RUNTIME as u8)
        }
    }
}

fn bench(
    suite: Suite,
    trials: usize,
    seed: u64,
    n_max: Option<usize>,
    threads: Option<usize>,
    wall_clock: bool,
    out: &Path,
) -> ExitCode {
    let suites: Vec<Benchmark> = match suite {
        Suite::Currin => vec![Benchmark::Currin],
        Suite::Park => vec![Benchmark::Park],
        Suite::ToySine => vec![Benchmark::ToySine],
        Suite::All => Benchmark::ALL.to_vec(),
    };
    for b in suites {
        let (lo, hi) = default_window(b);
        let file = ConfigFile {
            objective: Some(b.name().to_string()),
            method: Some(Method::All),
            seed: Some(seed),
            trials: Some(trials),
            n_max: Some(n_max.unwrap_or_else(|| suite_rounds(b))),
            delta_lo: Some(lo),
            delta_hi: Some(hi),
            threads,
            wall_clock: Some(wall_clock),
            ..ConfigFile::default()
        };
        let cfg = match ExperimentConfig::resolve(file) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit::CONFIG as u8);
            }
        };
        let code = run_one(&cfg, &out.join(b.name()), b.name());
        if code != ExitCode::SUCCESS {
            return code;
        }
    }
    ExitCode::SUCCESS
}

fn verify(suite: VerifySuite) -> ExitCode {
    let mut checks = Vec::new();
    if suite != VerifySuite::Structure {
        checks.extend(verify::oracle_checks());
    }
    if suite != VerifySuite::Oracles {
        checks.extend(verify::structural_checks());
    }
    for c in &checks {
        println!("{c}");
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(exit::RUNTIME as u8)
    }
}

fn protocol_stub(opts: &StubOptions) -> ExitCode {
    let stdin = std::io::stdin();
    match serve(opts, stdin.lock(), std::io::stdout().lock()) {
        Ok(StubExit::Finished { .. }) => ExitCode::SUCCESS,
        Ok(StubExit::Killed { unanswered }) => {
            eprintln!("protocol-stub: exiting without answering request id {unanswered}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("protocol-stub: {e}");
            ExitCode::from(exit::RUNTIME as u8)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run {
            config,
            overrides,
            out,
        } => match ExperimentConfig::from_sources(config.as_deref(), &overrides) {
            Ok(cfg) => run_one(&cfg, &out, &cfg.objective.name()),
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(exit::CONFIG as u8)
            }
        },
        Command::Bench {
            suite,
            trials,
            seed,
            n_max,
            threads,
            wall_clock,
            out,
        } => bench(suite, trials, seed, n_max, threads, wall_clock, &out),
        Command::Verify { suite } => verify(suite),
        Command::ProtocolStub(opts) => protocol_stub(&opts),
    }
}
