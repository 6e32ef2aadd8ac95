//! Two-fidelity objectives: synthetic benchmarks and an external trainer
//! driven over a JSON-lines ask/tell protocol.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::kernel::ConfigPoint;
use crate::space::{SearchSpace, SpaceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Light,
    Heavy,
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fidelity::Light => "light",
            Fidelity::Heavy => "heavy",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Value in the minimized convention the optimizer works in.
    pub fn to_internal(self, v: f64) -> f64 {
        match self {
            Sense::Minimize => v,
            Sense::Maximize => -v,
        }
    }

    pub fn from_internal(self, v: f64) -> f64 {
        self.to_internal(v)
    }
}

/// Early-stopping triple handed to external trainers: at most `max_iters`
/// iterations, stopping once `strip_len` successive iterations improve by
/// less than `improve_eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityBudget {
    pub max_iters: u64,
    pub strip_len: u64,
    pub improve_eps: f64,
}

impl FidelityBudget {
    pub fn new(max_iters: u64, strip_len: u64, improve_eps: f64) -> Result<Self, ObjectiveError> {
        if max_iters == 0 || strip_len == 0 || !(improve_eps >= 0.0) {
            return Err(ObjectiveError::BadBudget);
        }
        Ok(Self {
            max_iters,
            strip_len,
            improve_eps,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ObjectiveError {
    #[error("fidelity budget needs max_iters ≥ 1, strip_len ≥ 1, improve_eps ≥ 0")]
    BadBudget,
    #[error("unknown objective `{0}` (expected currin, park or toy_sine)")]
    Unknown(String),
    #[error("point has {got} coordinates, objective `{name}` has {expected}")]
    DimensionMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("could not start trainer `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", protocol_message(.id, .message, .stderr))]
    Protocol {
        id: Option<u64>,
        message: String,
        stderr: String,
    },
    #[error("trainer reported an error for request id {id}: {message}")]
    Trainer { id: u64, message: String },
}

fn protocol_message(id: &Option<u64>, message: &str, stderr: &str) -> String {
    let mut s = match id {
        Some(id) => format!("protocol error on request id {id}: {message}"),
        None => format!("protocol error during handshake: {message}"),
    };
    let tail = stderr.trim();
    if !tail.is_empty() {
        s.push_str("; trainer stderr: ");
        s.push_str(tail);
    }
    s
}

/// An objective observable at two fidelities, defined on `[0,1]^d`.
pub trait Objective {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn sense(&self) -> Sense;
    /// Best heavy value in native units, when known.
    fn known_optimum(&self) -> Option<f64>;
    fn evaluate(&mut self, x: &ConfigPoint, fidelity: Fidelity) -> Result<f64, ObjectiveError>;
}

fn currin_bracket(x2: f64) -> f64 {
    if x2 <= 0.0 {
        1.0
    } else {
        1.0 - (-1.0 / (2.0 * x2)).exp()
    }
}

/// Currin exponential function; `x₂ = 0` takes the limiting value.
pub fn currin_heavy(x1: f64, x2: f64) -> f64 {
    let num = ((2300.0 * x1 + 1900.0) * x1 + 2092.0) * x1 + 60.0;
    let den = ((100.0 * x1 + 500.0) * x1 + 4.0) * x1 + 20.0;
    currin_bracket(x2) * num / den
}

/// Average of four shifted heavy evaluations.
pub fn currin_light(x1: f64, x2: f64) -> f64 {
    let lo = (x2 - 0.05).max(0.0);
    let hi = x2 + 0.05;
    0.25 * (currin_heavy(x1 + 0.05, hi)
        + currin_heavy(x1 + 0.05, lo)
        + currin_heavy(x1 - 0.05, hi)
        + currin_heavy(x1 - 0.05, lo))
}

pub fn park_heavy(x: &[f64; 4]) -> f64 {
    (2.0 / 3.0) * (x[0] + x[1]).exp() - x[3] * x[2].sin() + x[2]
}

pub fn park_light(x: &[f64; 4]) -> f64 {
    1.2 * park_heavy(x) - 1.0
}

/// Toy input map `[0,1] → [−π, 3π]`.
pub fn toy_sine_native(u: f64) -> f64 {
    -std::f64::consts::PI + 4.0 * std::f64::consts::PI * u
}

pub fn toy_sine_light(x: f64) -> f64 {
    x.sin()
}

pub fn toy_sine_heavy(x: f64) -> f64 {
    0.5 * x.sin() - 1.0
}

/// Heavy maximum of the Currin function, at `(0.216666…, 0)`.
pub const CURRIN_OPTIMUM: f64 = 13.798722044728432;
/// Heavy maximum of the Park function, `(2/3)e² + 1` at `(1, 1, 1, 0)`.
pub const PARK_OPTIMUM: f64 = 5.9260373992871;
pub const TOY_SINE_OPTIMUM: f64 = -1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Currin,
    Park,
    ToySine,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Currin, Benchmark::Park, Benchmark::ToySine];

    pub fn from_name(name: &str) -> Result<Self, ObjectiveError> {
        match name {
            "currin" => Ok(Benchmark::Currin),
            "park" => Ok(Benchmark::Park),
            "toy_sine" | "toy-sine" | "sine" => Ok(Benchmark::ToySine),
            other => Err(ObjectiveError::Unknown(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Currin => "currin",
            Benchmark::Park => "park",
            Benchmark::ToySine => "toy_sine",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Benchmark::Currin => 2,
            Benchmark::Park => 4,
            Benchmark::ToySine => 1,
        }
    }

    pub fn sense(self) -> Sense {
        match self {
            Benchmark::Currin | Benchmark::Park => Sense::Maximize,
            Benchmark::ToySine => Sense::Minimize,
        }
    }

    pub fn optimum(self) -> f64 {
        match self {
            Benchmark::Currin => CURRIN_OPTIMUM,
            Benchmark::Park => PARK_OPTIMUM,
            Benchmark::ToySine => TOY_SINE_OPTIMUM,
        }
    }

    /// Native value at a unit-cube point.
    pub fn value(self, u: &[f64], fidelity: Fidelity) -> f64 {
        match (self, fidelity) {
            (Benchmark::Currin, Fidelity::Heavy) => currin_heavy(u[0], u[1]),
            (Benchmark::Currin, Fidelity::Light) => currin_light(u[0], u[1]),
            (Benchmark::Park, Fidelity::Heavy) => park_heavy(&[u[0], u[1], u[2], u[3]]),
            (Benchmark::Park, Fidelity::Light) => park_light(&[u[0], u[1], u[2], u[3]]),
            (Benchmark::ToySine, Fidelity::Heavy) => toy_sine_heavy(toy_sine_native(u[0])),
            (Benchmark::ToySine, Fidelity::Light) => toy_sine_light(toy_sine_native(u[0])),
        }
    }
}

/// In-process synthetic objective.
#[derive(Clone, Copy, Debug)]
pub struct Synthetic(pub Benchmark);

impl Objective for Synthetic {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sense(&self) -> Sense {
        self.0.sense()
    }

    fn known_optimum(&self) -> Option<f64> {
        Some(self.0.optimum())
    }

    fn evaluate(&mut self, x: &ConfigPoint, fidelity: Fidelity) -> Result<f64, ObjectiveError> {
        if x.dim() != self.dim() {
            return Err(ObjectiveError::DimensionMismatch {
                name: self.name().to_string(),
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(self.0.value(x.coords(), fidelity))
    }
}

/// First message from the optimizer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hello {
    pub hello: u32,
    pub space: SearchSpace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ready {
    pub ready: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub fidelity: Fidelity,
    pub config: serde_json::Map<String, serde_json::Value>,
    pub budget: FidelityBudget,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Settings for an external trainer process.
#[derive(Clone, Debug)]
pub struct ExternalSpec {
    /// Program and arguments.
    pub argv: Vec<String>,
    pub space: SearchSpace,
    pub sense: Sense,
    pub known_optimum: Option<f64>,
    pub light_budget: FidelityBudget,
    pub heavy_budget: FidelityBudget,
    pub timeout: Duration,
}

/// A trainer process speaking the ask/tell line protocol on its standard
/// streams. Requests are strictly sequential.
pub struct ExternalTrainer {
    spec: ExternalSpec,
    name: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    next_id: u64,
    requests: u64,
}

impl ExternalTrainer {
    /// Starts the process and completes the handshake.
    pub fn start(spec: ExternalSpec) -> Result<Self, ObjectiveError> {
        let command = spec.argv.join(" ");
        let (program, args) = spec
            .argv
            .split_first()
            .ok_or_else(|| ObjectiveError::Spawn {
                command: command.clone(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
            })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| ObjectiveError::Spawn {
                command: command.clone(),
                source,
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let stderr_pipe = child.stderr.take().expect("stderr is piped");

        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            for line in BufReader::new(stderr_pipe).lines().map_while(Result::ok) {
                let mut s = sink.lock().unwrap_or_else(|e| e.into_inner());
                s.push_str(&line);
                s.push('\n');
            }
        });

        let mut trainer = Self {
            name: format!("external:{command}"),
            spec,
            child,
            stdin,
            lines,
            stderr,
            next_id: 1,
            requests: 0,
        };
        let hello = serde_json::to_string(&Hello {
            hello: 1,
            space: trainer.spec.space.clone(),
        })
        .expect("hello serializes");
        trainer.send(None, &hello)?;
        let line = trainer.receive(None)?;
        match serde_json::from_str::<Ready>(&line) {
            Ok(Ready { ready: true }) => Ok(trainer),
            _ => {
                Err(trainer
                    .protocol_error(None, format!("expected {{\"ready\":true}}, got `{line}`")))
            }
        }
    }

    /// Requests sent so far.
    pub fn requests(&self) -> u64 {
        self.requests
    }

    fn captured_stderr(&self) -> String {
        // Give the reader thread a moment to drain a dying process.
        thread::sleep(Duration::from_millis(20));
        self.stderr.lock().map(|s| s.clone()).unwrap_or_default()
    }

    fn protocol_error(&self, id: Option<u64>, message: String) -> ObjectiveError {
        ObjectiveError::Protocol {
            id,
            message,
            stderr: self.captured_stderr(),
        }
    }

    fn send(&mut self, id: Option<u64>, line: &str) -> Result<(), ObjectiveError> {
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(self.protocol_error(id, "trainer input is closed".into()));
        };
        let res = stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush());
        res.map_err(|e| self.protocol_error(id, format!("write failed: {e}")))
    }

    fn receive(&mut self, id: Option<u64>) -> Result<String, ObjectiveError> {
        match self.lines.recv_timeout(self.spec.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(self.protocol_error(id, format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                Err(self.protocol_error(id, format!("no response within {:?}", self.spec.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.try_wait().ok().flatten();
                let how =
                    status.map_or("closed its output".to_string(), |s| format!("exited ({s})"));
                Err(self.protocol_error(id, format!("trainer {how}")))
            }
        }
    }
}

impl Objective for ExternalTrainer {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.spec.space.len()
    }

    fn sense(&self) -> Sense {
        self.spec.sense
    }

    fn known_optimum(&self) -> Option<f64> {
        self.spec.known_optimum
    }

    fn evaluate(&mut self, x: &ConfigPoint, fidelity: Fidelity) -> Result<f64, ObjectiveError> {
        let native = self.spec.space.to_native(x.coords())?;
        let config = self
            .spec
            .space
            .dims()
            .iter()
            .zip(native)
            .map(|(d, v)| (d.name.clone(), serde_json::json!(v)))
            .collect();
        let id = self.next_id;
        self.next_id += 1;
        let budget = match fidelity {
            Fidelity::Light => self.spec.light_budget,
            Fidelity::Heavy => self.spec.heavy_budget,
        };
        let line = serde_json::to_string(&Request {
            id,
            fidelity,
            config,
            budget,
        })
        .expect("request serializes");
        self.requests += 1;
        self.send(Some(id), &line)?;
        let reply = self.receive(Some(id))?;
        let resp: Response = serde_json::from_str(&reply).map_err(|e| {
            self.protocol_error(Some(id), format!("malformed response `{reply}`: {e}"))
        })?;
        if resp.id != id {
            return Err(self.protocol_error(Some(id), format!("response carries id {}", resp.id)));
        }
        match (resp.value, resp.error) {
            (_, Some(message)) => Err(ObjectiveError::Trainer { id, message }),
            (Some(v), None) if v.is_finite() => Ok(v),
            (Some(v), None) => Err(self.protocol_error(Some(id), format!("non-finite value {v}"))),
            (None, None) => {
                Err(self.protocol_error(Some(id), "response has neither value nor error".into()))
            }
        }
    }
}

impl Drop for ExternalTrainer {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if !matches!(self.child.try_wait(), Ok(Some(_))) {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn currin_values() {
        assert_eq!(currin_heavy(0.0, 0.0), 3.0);
        let expected = (1.0 - (-0.5f64).exp()) * 6352.0 / 624.0;
        assert!((currin_heavy(1.0, 1.0) - expected).abs() < 1e-12);
        assert!((currin_heavy(1.0, 1.0) - 4.0053161).abs() < 1e-7);
    }

    #[test]
    fn park_values() {
        assert!((park_heavy(&[0.0; 4]) - 2.0 / 3.0).abs() < 1e-15);
        assert!((park_light(&[0.0; 4]) + 0.2).abs() < 1e-15);
        assert!((park_heavy(&[1.0; 4]) - 5.0845664).abs() < 1e-7);
        assert!((park_heavy(&[1.0, 1.0, 1.0, 0.0]) - PARK_OPTIMUM).abs() < 1e-12);
    }

    #[test]
    fn toy_sine_values() {
        assert_eq!(toy_sine_light(0.0), 0.0);
        assert!((toy_sine_heavy(std::f64::consts::FRAC_PI_2) + 0.5).abs() < 1e-15);
        for x in [
            -std::f64::consts::FRAC_PI_2,
            1.5 * std::f64::consts::PI,
            3.5 * std::f64::consts::PI,
        ] {
            assert!((toy_sine_heavy(x) - TOY_SINE_OPTIMUM).abs() < 1e-12);
        }
        assert_eq!(toy_sine_native(0.0), -std::f64::consts::PI);
        assert!((toy_sine_native(1.0) - 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn sense_conversion() {
        assert_eq!(Sense::Maximize.to_internal(2.0), -2.0);
        assert_eq!(Sense::Minimize.to_internal(2.0), 2.0);
    }

    #[test]
    fn protocol_messages_round_trip() {
        let r: Response = serde_json::from_str(r#"{"id":3,"value":1.5}"#).unwrap();
        assert_eq!((r.id, r.value, r.error), (3, Some(1.5), None));
        let e: Response = serde_json::from_str(r#"{"id":4,"error":"oom"}"#).unwrap();
        assert_eq!(e.error.as_deref(), Some("oom"));
        let budget = FidelityBudget::new(10, 3, 0.01).unwrap();
        let req = Request {
            id: 1,
            fidelity: Fidelity::Light,
            config: serde_json::Map::new(),
            budget,
        };
        let s = serde_json::to_string(&req).unwrap();
        assert!(s.contains(r#""fidelity":"light""#) && s.contains(r#""max_iters":10"#));
        assert!(FidelityBudget::new(0, 1, 0.0).is_err());
    }

    #[test]
    fn protocol_error_names_request() {
        let e = ObjectiveError::Protocol {
            id: Some(7),
            message: "trainer exited".into(),
            stderr: "boom\n".into(),
        };
        let s = e.to_string();
        assert!(s.contains("request id 7") && s.contains("boom"));
    }
}
