//! A reference trainer for the ask/tell line protocol.
//!
//! It answers each request with a closed-form value of the native
//! configuration, so protocol plumbing can be tested without real training.

use std::io::{self, BufRead, Write};

use btao::objectives::{Hello, Ready, Request, Response};
use btao::Fidelity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum StubFunction {
    /// Sum of the configuration values.
    Sum,
    /// Squared distance from 0.3 in every coordinate.
    Sphere,
}

#[derive(Clone, Debug, clap::Args)]
pub struct StubOptions {
    #[arg(long, value_enum, default_value = "sphere")]
    pub function: StubFunction,
    /// Added to every light value.
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub light_offset: f64,
    /// Exit without answering once this many requests were answered.
    #[arg(long)]
    pub exit_after: Option<u64>,
}

impl StubFunction {
    pub fn eval(self, values: &[f64]) -> f64 {
        match self {
            StubFunction::Sum => values.iter().sum(),
            StubFunction::Sphere => values.iter().map(|v| (v - 0.3).powi(2)).sum(),
        }
    }
}

/// How a stub session ended.
#[derive(Debug, PartialEq, Eq)]
pub enum StubExit {
    /// The optimizer closed the input.
    Finished { answered: u64 },
    /// `exit_after` was reached; holds the id left unanswered.
    Killed { unanswered: u64 },
}

fn protocol(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

/// Serves one session over the given streams.
pub fn serve(
    opts: &StubOptions,
    input: impl BufRead,
    mut output: impl Write,
) -> io::Result<StubExit> {
    let mut lines = input.lines();
    let hello = lines
        .next()
        .ok_or_else(|| protocol("no handshake".into()))??;
    let hello: Hello =
        serde_json::from_str(&hello).map_err(|e| protocol(format!("bad handshake: {e}")))?;
    let names: Vec<String> = hello.space.dims().iter().map(|d| d.name.clone()).collect();
    writeln!(output, "{}", serde_json::to_string(&Ready { ready: true })?)?;
    output.flush()?;

    let mut answered = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Request =
            serde_json::from_str(&line).map_err(|e| protocol(format!("bad request: {e}")))?;
        if opts.exit_after.is_some_and(|n| answered >= n) {
            return Ok(StubExit::Killed { unanswered: req.id });
        }
        let values: Result<Vec<f64>, io::Error> = names
            .iter()
            .map(|n| {
                req.config
                    .get(n)
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| protocol(format!("request {} lacks numeric `{n}`", req.id)))
            })
            .collect();
        let resp = match values {
            Ok(v) => {
                let heavy = opts.function.eval(&v);
                let value = match req.fidelity {
                    Fidelity::Light => heavy + opts.light_offset,
                    Fidelity::Heavy => heavy,
                };
                Response {
                    id: req.id,
                    value: Some(value),
                    error: None,
                }
            }
            Err(e) => Response {
                id: req.id,
                value: None,
                error: Some(e.to_string()),
            },
        };
        writeln!(output, "{}", serde_json::to_string(&resp)?)?;
        output.flush()?;
        answered += 1;
    }
    Ok(StubExit::Finished { answered })
}
