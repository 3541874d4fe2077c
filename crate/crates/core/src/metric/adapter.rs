//! Client for external metric processes speaking line-delimited JSON.
//!
//! The adapter writes a handshake line first, then answers one request per
//! line. Requests carry an `id`; responses may arrive in any order and are
//! matched back by id. See `docs/adapter-protocol.md` for the wire format.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Map, Value};

use super::{Metric, MetricError, MetricVerdict};
use crate::metric::Choice;

pub const PROTOCOL_VERSION: u64 = 1;
const STDERR_TAIL_LINES: usize = 20;

#[derive(Debug, Clone)]
pub struct AdapterConfig {
    pub argv: Vec<String>,
    pub handshake_timeout: Duration,
    pub request_timeout: Duration,
    /// Requests written ahead of their responses.
    pub max_in_flight: usize,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            argv: Vec::new(),
            handshake_timeout: Duration::from_secs(30),
            request_timeout: Duration::from_secs(60),
            max_in_flight: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdapterMode {
    Score,
    Pair,
}

impl fmt::Display for AdapterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdapterMode::Score => "score",
            AdapterMode::Pair => "pair",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdapterError {
    #[error("empty adapter command")]
    EmptyCommand,
    #[error("cannot start adapter {command:?}: {message}")]
    Spawn { command: String, message: String },
    #[error("adapter sent no handshake within {timeout:?}{}", tail(.stderr))]
    HandshakeTimeout { timeout: Duration, stderr: String },
    #[error("adapter exited before its handshake{}", tail(.stderr))]
    ExitedBeforeHandshake { stderr: String },
    #[error("malformed handshake line: {line}")]
    MalformedHandshake { line: String },
    #[error("adapter speaks protocol version {found}, expected {PROTOCOL_VERSION}")]
    VersionMismatch { found: String },
    #[error("adapter gave no response within {timeout:?} (request {id}){}", tail(.stderr))]
    Timeout { id: u64, timeout: Duration, stderr: String },
    #[error("adapter closed its input{}", tail(.stderr))]
    BrokenPipe { stderr: String },
    #[error("adapter exited with requests outstanding{}", tail(.stderr))]
    Crashed { stderr: String },
    #[error("adapter answered unknown request id in: {line}")]
    IdMismatch { line: String },
    #[error("malformed adapter response ({reason}): {line}")]
    MalformedResponse { line: String, reason: String },
    #[error("adapter reported an error for request {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("adapter runs in {found} mode; this request needs {expected} mode")]
    WrongMode { expected: AdapterMode, found: AdapterMode },
}

fn tail(stderr: &str) -> String {
    if stderr.is_empty() {
        String::new()
    } else {
        format!("; stderr tail:\n{stderr}")
    }
}

enum Incoming {
    Line(String),
    Eof,
    Failed(String),
}

/// A running adapter process. Not shared across threads; the harness starts
/// one per worker.
pub struct Adapter {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    rx: Receiver<Incoming>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
    stderr_thread: Option<thread::JoinHandle<()>>,
    mode: AdapterMode,
    handshake: Map<String, Value>,
    cfg: AdapterConfig,
    next_id: u64,
    dead: Option<AdapterError>,
}

impl Adapter {
    pub fn spawn(cfg: &AdapterConfig) -> Result<Self, AdapterError> {
        let (program, args) = cfg.argv.split_first().ok_or(AdapterError::EmptyCommand)?;
        let command = shell_words::join(&cfg.argv);
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| AdapterError::Spawn {
                command: command.clone(),
                message: e.to_string(),
            })?;

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                let msg = match reader.read_line(&mut line) {
                    Ok(0) => Incoming::Eof,
                    Ok(_) => Incoming::Line(line.trim_end_matches(['\n', '\r']).to_string()),
                    Err(e) => Incoming::Failed(e.to_string()),
                };
                let stop = !matches!(msg, Incoming::Line(_));
                if tx.send(msg).is_err() || stop {
                    break;
                }
            }
        });

        let stderr = child.stderr.take().expect("stderr is piped");
        let stderr_tail = Arc::new(Mutex::new(VecDeque::new()));
        let sink = stderr_tail.clone();
        let stderr_thread = thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                log::debug!("adapter stderr: {line}");
                let mut q = sink.lock().expect("stderr buffer lock");
                if q.len() == STDERR_TAIL_LINES {
                    q.pop_front();
                }
                q.push_back(line);
            }
        });

        let mut adapter = Self {
            command,
            stdin: child.stdin.take(),
            child,
            rx,
            stderr_tail,
            stderr_thread: Some(stderr_thread),
            mode: AdapterMode::Score,
            handshake: Map::new(),
            cfg: cfg.clone(),
            next_id: 1,
            dead: None,
        };
        match adapter.read_handshake() {
            Ok((mode, handshake)) => {
                adapter.mode = mode;
                adapter.handshake = handshake;
                log::info!("adapter {} ready in {mode} mode", adapter.command);
                Ok(adapter)
            }
            Err(e) => {
                adapter.kill();
                Err(e)
            }
        }
    }

    fn read_handshake(&mut self) -> Result<(AdapterMode, Map<String, Value>), AdapterError> {
        let deadline = Instant::now() + self.cfg.handshake_timeout;
        let line = loop {
            let wait = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(wait) {
                Ok(Incoming::Line(l)) if l.trim().is_empty() => continue,
                Ok(Incoming::Line(l)) => break l,
                Ok(Incoming::Eof | Incoming::Failed(_)) | Err(RecvTimeoutError::Disconnected) => {
                    return Err(AdapterError::ExitedBeforeHandshake {
                        stderr: self.stderr_after_exit(),
                    })
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(AdapterError::HandshakeTimeout {
                        timeout: self.cfg.handshake_timeout,
                        stderr: self.stderr_text(),
                    })
                }
            }
        };
        let malformed = || AdapterError::MalformedHandshake { line: line.clone() };
        let obj = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(o)) => o,
            _ => return Err(malformed()),
        };
        match obj.get("protocol_version") {
            Some(v) if v.as_u64() == Some(PROTOCOL_VERSION) => {}
            Some(v @ Value::Number(_)) => return Err(AdapterError::VersionMismatch { found: v.to_string() }),
            _ => return Err(malformed()),
        }
        let mode = match obj.get("mode").and_then(Value::as_str) {
            Some("score") => AdapterMode::Score,
            Some("pair") => AdapterMode::Pair,
            _ => return Err(malformed()),
        };
        Ok((mode, obj))
    }

    pub fn mode(&self) -> AdapterMode {
        self.mode
    }

    /// The full handshake object, including any adapter metadata.
    pub fn handshake(&self) -> &Map<String, Value> {
        &self.handshake
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn stderr_text(&self) -> String {
        let q = self.stderr_tail.lock().expect("stderr buffer lock");
        q.iter().cloned().collect::<Vec<_>>().join("\n")
    }

    /// Stderr tail once the process is gone, giving the reader a moment to drain.
    fn stderr_after_exit(&mut self) -> String {
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if self.stderr_thread.as_ref().is_none_or(|t| t.is_finished()) {
                break;
            }
            thread::sleep(Duration::from_millis(5));
        }
        self.stderr_text()
    }

    fn kill(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn require(&self, expected: AdapterMode) -> Result<(), AdapterError> {
        if self.mode == expected {
            Ok(())
        } else {
            Err(AdapterError::WrongMode {
                expected,
                found: self.mode,
            })
        }
    }

    /// Sends request bodies (without ids) and returns the matching response
    /// objects in input order. A fatal failure fails every request not yet
    /// answered, and every later call.
    pub fn request_batch(&mut self, bodies: Vec<Map<String, Value>>) -> Vec<Result<Map<String, Value>, AdapterError>> {
        let n = bodies.len();
        let mut results: Vec<Option<Result<Map<String, Value>, AdapterError>>> = vec![None; n];
        if let Some(e) = &self.dead {
            return vec![Err(e.clone()); n];
        }
        let mut pending: HashMap<u64, usize> = HashMap::new();
        let mut bodies = bodies.into_iter().enumerate();
        let mut done = 0;
        // after a failed write, keep collecting responses already on their way
        let mut write_failed = false;

        let fatal = loop {
            if done == n {
                break None;
            }
            while !write_failed && pending.len() < self.cfg.max_in_flight.max(1) {
                let Some((idx, mut body)) = bodies.next() else { break };
                let id = self.next_id;
                self.next_id += 1;
                body.insert("id".into(), json!(id));
                let mut line = Value::Object(body).to_string();
                line.push('\n');
                let stdin = self.stdin.as_mut().expect("stdin open while alive");
                if stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()).is_err() {
                    write_failed = true;
                    break;
                }
                pending.insert(id, idx);
            }
            if write_failed && pending.is_empty() {
                break Some(AdapterError::BrokenPipe {
                    stderr: self.stderr_after_exit(),
                });
            }

            let line = match self.rx.recv_timeout(self.cfg.request_timeout) {
                Ok(Incoming::Line(l)) if l.trim().is_empty() => continue,
                Ok(Incoming::Line(l)) => l,
                Ok(Incoming::Failed(msg)) => {
                    log::warn!("reading adapter output failed: {msg}");
                    break Some(AdapterError::Crashed {
                        stderr: self.stderr_after_exit(),
                    });
                }
                Ok(Incoming::Eof) | Err(RecvTimeoutError::Disconnected) => {
                    let stderr = self.stderr_after_exit();
                    break Some(if write_failed {
                        AdapterError::BrokenPipe { stderr }
                    } else {
                        AdapterError::Crashed { stderr }
                    });
                }
                Err(RecvTimeoutError::Timeout) => {
                    let id = pending.keys().min().copied().unwrap_or_default();
                    break Some(AdapterError::Timeout {
                        id,
                        timeout: self.cfg.request_timeout,
                        stderr: self.stderr_text(),
                    });
                }
            };
            let mut obj = match serde_json::from_str::<Value>(&line) {
                Ok(Value::Object(o)) => o,
                _ => {
                    break Some(AdapterError::MalformedResponse {
                        line,
                        reason: "not a JSON object".into(),
                    })
                }
            };
            let Some(idx) = obj.get("id").and_then(Value::as_u64).and_then(|id| pending.remove(&id)) else {
                break Some(AdapterError::IdMismatch { line });
            };
            let id = obj["id"].as_u64().expect("checked above");
            results[idx] = Some(match obj.remove("error") {
                Some(msg) => Err(AdapterError::Remote {
                    id,
                    message: msg.as_str().map_or_else(|| msg.to_string(), str::to_string),
                }),
                None => Ok(obj),
            });
            done += 1;
        };

        if let Some(e) = fatal {
            log::warn!("adapter {} failed: {e}", self.command);
            self.dead = Some(e.clone());
            self.kill();
            for slot in results.iter_mut().filter(|r| r.is_none()) {
                *slot = Some(Err(e.clone()));
            }
        }
        results
            .into_iter()
            .map(|r| r.expect("every request resolved"))
            .collect()
    }

    /// One request, one response object.
    pub fn request(&mut self, body: Map<String, Value>) -> Result<Map<String, Value>, AdapterError> {
        self.request_batch(vec![body]).pop().expect("one result per request")
    }

    pub fn score_batch(&mut self, texts: &[&str]) -> Vec<Result<f64, AdapterError>> {
        if let Err(e) = self.require(AdapterMode::Score) {
            return vec![Err(e); texts.len()];
        }
        let bodies = texts.iter().map(|t| object(json!({ "text": t }))).collect();
        self.request_batch(bodies)
            .into_iter()
            .map(|r| {
                let obj = r?;
                obj.get("score")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| malformed(&obj, "missing numeric score"))
            })
            .collect()
    }

    pub fn choose_batch(&mut self, pairs: &[(&str, &str)]) -> Vec<Result<MetricVerdict, AdapterError>> {
        if let Err(e) = self.require(AdapterMode::Pair) {
            return vec![Err(e); pairs.len()];
        }
        let bodies = pairs.iter().map(|(a, b)| object(json!({ "a": a, "b": b }))).collect();
        self.request_batch(bodies)
            .into_iter()
            .map(|r| parse_pair_response(&r?))
            .collect()
    }
}

impl Drop for Adapter {
    fn drop(&mut self) {
        // closing stdin asks the adapter to exit; give it a moment first
        self.stdin.take();
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if matches!(self.child.try_wait(), Ok(Some(_))) {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        self.kill();
    }
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(o) => o,
        _ => unreachable!("json! object literal"),
    }
}

fn malformed(obj: &Map<String, Value>, reason: &str) -> AdapterError {
    AdapterError::MalformedResponse {
        line: Value::Object(obj.clone()).to_string(),
        reason: reason.into(),
    }
}

fn parse_pair_response(obj: &Map<String, Value>) -> Result<MetricVerdict, AdapterError> {
    let choice = match obj.get("choice").and_then(Value::as_str) {
        Some("a") => Choice::A,
        Some("b") => Choice::B,
        Some("tie") => Choice::Tie,
        _ => return Err(malformed(obj, "choice must be \"a\", \"b\" or \"tie\"")),
    };
    let score = |key: &str| match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| malformed(obj, "scores must be numbers")),
    };
    let (score_a, score_b) = (score("score_a")?, score("score_b")?);
    if let (Some(sa), Some(sb)) = (score_a, score_b) {
        let contradicts = (choice == Choice::A && sa < sb) || (choice == Choice::B && sb < sa);
        if contradicts {
            return Err(malformed(obj, "choice contradicts the reported scores"));
        }
    }
    Ok(MetricVerdict {
        choice,
        score_a,
        score_b,
    })
}

/// A metric backed by one adapter process, in whichever mode it declared.
pub struct AdapterMetric {
    adapter: Adapter,
    tie_epsilon: f64,
}

impl AdapterMetric {
    pub fn new(adapter: Adapter, tie_epsilon: f64) -> Self {
        Self { adapter, tie_epsilon }
    }

    pub fn adapter(&self) -> &Adapter {
        &self.adapter
    }
}

impl Metric for AdapterMetric {
    fn id(&self) -> String {
        format!("adapter:{}", self.adapter.command())
    }

    fn score(&mut self, text: &str) -> Result<f64, MetricError> {
        if self.adapter.mode() == AdapterMode::Pair {
            return Err(MetricError::ScoreUnsupported(self.id()));
        }
        Ok(self.adapter.score_batch(&[text]).pop().expect("one result")?)
    }

    fn choose(&mut self, a: &str, b: &str) -> Result<MetricVerdict, MetricError> {
        self.choose_batch(&[(a, b)]).pop().expect("one result")
    }

    fn choose_batch(&mut self, pairs: &[(&str, &str)]) -> Vec<Result<MetricVerdict, MetricError>> {
        match self.adapter.mode() {
            AdapterMode::Pair => self
                .adapter
                .choose_batch(pairs)
                .into_iter()
                .map(|r| r.map_err(MetricError::from))
                .collect(),
            AdapterMode::Score => {
                let texts: Vec<&str> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
                let scores = self.adapter.score_batch(&texts);
                scores
                    .chunks(2)
                    .map(|ab| match (&ab[0], &ab[1]) {
                        (Ok(sa), Ok(sb)) => Ok(MetricVerdict::from_scores(*sa, *sb, self.tie_epsilon)),
                        (Err(e), _) | (_, Err(e)) => Err(MetricError::from(e.clone())),
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_responses_are_validated() {
        let ok = object(json!({"id": 1, "choice": "b", "score_a": -3.0, "score_b": -1.0}));
        let v = parse_pair_response(&ok).unwrap();
        assert_eq!((v.choice, v.score_a, v.score_b), (Choice::B, Some(-3.0), Some(-1.0)));
        let bare = object(json!({"id": 1, "choice": "tie"}));
        assert_eq!(parse_pair_response(&bare).unwrap().choice, Choice::Tie);
        for bad in [
            json!({"id": 1, "choice": "left"}),
            json!({"id": 1}),
            json!({"id": 1, "choice": "a", "score_a": 0.0, "score_b": 1.0}),
            json!({"id": 1, "choice": "a", "score_a": "x"}),
        ] {
            assert!(matches!(
                parse_pair_response(&object(bad)),
                Err(AdapterError::MalformedResponse { .. })
            ));
        }
    }

    #[test]
    fn missing_program_is_a_spawn_error() {
        let cfg = AdapterConfig {
            argv: vec!["/nonexistent/adapter-binary".into()],
            ..Default::default()
        };
        assert!(matches!(Adapter::spawn(&cfg), Err(AdapterError::Spawn { .. })));
        assert!(matches!(
            Adapter::spawn(&AdapterConfig::default()),
            Err(AdapterError::EmptyCommand)
        ));
    }

    #[cfg(unix)]
    fn sh(script: &str) -> AdapterConfig {
        AdapterConfig {
            argv: vec!["sh".into(), "-c".into(), script.into()],
            handshake_timeout: Duration::from_secs(5),
            request_timeout: Duration::from_secs(5),
            ..Default::default()
        }
    }

    #[cfg(unix)]
    #[test]
    fn handshake_failures() {
        let err = Adapter::spawn(&sh("echo boom >&2; exit 3")).err().unwrap();
        assert!(matches!(&err, AdapterError::ExitedBeforeHandshake { stderr } if stderr.contains("boom")));
        let err = Adapter::spawn(&sh("echo hello; cat")).err().unwrap();
        assert_eq!(err, AdapterError::MalformedHandshake { line: "hello".into() });
        let err = Adapter::spawn(&sh(r#"echo '{"protocol_version":2,"mode":"score"}'; cat"#))
            .err()
            .unwrap();
        assert!(matches!(err, AdapterError::VersionMismatch { .. }));
        let mut slow = sh("sleep 5");
        slow.handshake_timeout = Duration::from_millis(200);
        assert!(matches!(
            Adapter::spawn(&slow),
            Err(AdapterError::HandshakeTimeout { .. })
        ));
    }

    #[cfg(unix)]
    #[test]
    fn wrong_mode_is_reported() {
        let mut a = Adapter::spawn(&sh(r#"echo '{"protocol_version":1,"mode":"pair"}'; cat >/dev/null"#)).unwrap();
        assert_eq!(a.mode(), AdapterMode::Pair);
        assert!(matches!(&a.score_batch(&["x"])[0], Err(AdapterError::WrongMode { .. })));
    }
}
