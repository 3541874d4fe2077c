//! Metric contract used by the IRC harness.
//!
//! Scores are oriented so that higher means better; perplexity is negated
//! once, here. A scorer-kind metric chooses by comparing two scores, a
//! chooser-kind metric answers the pair question directly.

mod adapter;

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::hashing::{stable_hash, unit_interval};
use crate::lm::{LmError, NgramModel};
use crate::pairs::SnippetPair;
use crate::text::{split_sentences, tokenize};

pub use adapter::{Adapter, AdapterConfig, AdapterError, AdapterMetric, AdapterMode, PROTOCOL_VERSION};

/// Environment variable consulted for `adapter:` specs with an empty command.
pub const ADAPTER_ENV: &str = "REVEVAL_ADAPTER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    A,
    B,
    Tie,
}

impl Choice {
    pub fn mirror(self) -> Choice {
        match self {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
            Choice::Tie => Choice::Tie,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVerdict {
    pub choice: Choice,
    pub score_a: Option<f64>,
    pub score_b: Option<f64>,
}

impl MetricVerdict {
    /// Tie when the scores differ by at most `tie_epsilon`.
    pub fn from_scores(score_a: f64, score_b: f64, tie_epsilon: f64) -> Self {
        let choice = if (score_a - score_b).abs() <= tie_epsilon {
            Choice::Tie
        } else if score_a > score_b {
            Choice::A
        } else {
            Choice::B
        };
        Self {
            choice,
            score_a: Some(score_a),
            score_b: Some(score_b),
        }
    }

    pub fn choice_only(choice: Choice) -> Self {
        Self {
            choice,
            score_a: None,
            score_b: None,
        }
    }

    pub fn mirror(self) -> Self {
        Self {
            choice: self.choice.mirror(),
            score_a: self.score_b,
            score_b: self.score_a,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("metric {0} only chooses between pairs and cannot score single texts")]
    ScoreUnsupported(String),
    #[error("cannot score empty text")]
    EmptyText,
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

pub trait Metric: Send {
    fn id(&self) -> String;

    fn score(&mut self, _text: &str) -> Result<f64, MetricError> {
        Err(MetricError::ScoreUnsupported(self.id()))
    }

    fn choose(&mut self, a: &str, b: &str) -> Result<MetricVerdict, MetricError>;

    /// Verdicts for many pairs, in input order. Adapter metrics pipeline these.
    fn choose_batch(&mut self, pairs: &[(&str, &str)]) -> Vec<Result<MetricVerdict, MetricError>> {
        pairs.iter().map(|(a, b)| self.choose(a, b)).collect()
    }
}

/// Scores text as negative per-word perplexity under a native n-gram model.
/// Sentences are scored independently, so sentence order does not matter.
#[derive(Debug, Clone)]
pub struct NativePerplexity {
    model: Arc<NgramModel>,
    label: String,
    tie_epsilon: f64,
}

impl NativePerplexity {
    pub fn new(model: Arc<NgramModel>, label: impl Into<String>, tie_epsilon: f64) -> Self {
        Self {
            model,
            label: label.into(),
            tie_epsilon,
        }
    }
}

/// Sentence-split, tokenized form of a text as fed to the native model.
pub fn lm_sentences(text: &str) -> Vec<Vec<String>> {
    split_sentences(text)
        .iter()
        .map(|s| tokenize(s).into_tokens())
        .filter(|t| !t.is_empty())
        .collect()
}

impl Metric for NativePerplexity {
    fn id(&self) -> String {
        format!("native-ppl:{}", self.label)
    }

    fn score(&mut self, text: &str) -> Result<f64, MetricError> {
        let sentences = lm_sentences(text);
        if sentences.is_empty() {
            return Err(MetricError::EmptyText);
        }
        Ok(-self.model.perplexity_sentences(&sentences)?)
    }

    fn choose(&mut self, a: &str, b: &str) -> Result<MetricVerdict, MetricError> {
        if a == b {
            return Ok(MetricVerdict::choice_only(Choice::Tie));
        }
        Ok(MetricVerdict::from_scores(
            self.score(a)?,
            self.score(b)?,
            self.tie_epsilon,
        ))
    }
}

/// Knows which texts are the better side of each pair.
#[derive(Debug, Clone, Default)]
pub struct Oracle {
    better: Arc<HashSet<String>>,
}

impl Oracle {
    pub fn from_pairs(pairs: &[SnippetPair]) -> Self {
        Self {
            better: Arc::new(pairs.iter().map(|p| p.better().to_string()).collect()),
        }
    }
}

impl Metric for Oracle {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn choose(&mut self, a: &str, b: &str) -> Result<MetricVerdict, MetricError> {
        let choice = match (self.better.contains(a), self.better.contains(b)) {
            (true, false) => Choice::A,
            (false, true) => Choice::B,
            _ => Choice::Tie,
        };
        Ok(MetricVerdict::choice_only(choice))
    }
}

/// Seeded coin flip: each text gets a hash-derived score in `[0, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct RandomMetric {
    pub seed: u64,
}

impl Metric for RandomMetric {
    fn id(&self) -> String {
        format!("random:{}", self.seed)
    }

    fn score(&mut self, text: &str) -> Result<f64, MetricError> {
        Ok(unit_interval(stable_hash(self.seed, &[text.as_bytes()])))
    }

    fn choose(&mut self, a: &str, b: &str) -> Result<MetricVerdict, MetricError> {
        Ok(MetricVerdict::from_scores(self.score(a)?, self.score(b)?, 0.0))
    }
}

/// Picks the side the wrapped metric rejects.
pub struct Inverted(pub Box<dyn Metric>);

impl Metric for Inverted {
    fn id(&self) -> String {
        format!("invert:{}", self.0.id())
    }

    fn score(&mut self, text: &str) -> Result<f64, MetricError> {
        self.0.score(text).map(|s| -s)
    }

    fn choose(&mut self, a: &str, b: &str) -> Result<MetricVerdict, MetricError> {
        self.0.choose(a, b).map(invert)
    }

    fn choose_batch(&mut self, pairs: &[(&str, &str)]) -> Vec<Result<MetricVerdict, MetricError>> {
        self.0.choose_batch(pairs).into_iter().map(|r| r.map(invert)).collect()
    }
}

fn invert(v: MetricVerdict) -> MetricVerdict {
    MetricVerdict {
        choice: v.choice.mirror(),
        score_a: v.score_a.map(|s| -s),
        score_b: v.score_b.map(|s| -s),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricSpec {
    NativePerplexity(PathBuf),
    Adapter(Vec<String>),
    Oracle,
    Random(u64),
    Invert(Box<MetricSpec>),
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("unknown metric spec {0:?} (expected native-ppl:<model>, adapter:<command>, oracle, random:<seed> or invert:<spec>)")]
    Unknown(String),
    #[error("native-ppl needs a model path")]
    MissingModel,
    #[error("adapter spec has no command and {ADAPTER_ENV} is unset")]
    MissingCommand,
    #[error("cannot split adapter command: {0}")]
    BadCommand(String),
    #[error("random seed {0:?} is not an unsigned integer")]
    BadSeed(String),
    #[error("the oracle metric needs the evaluated pairs")]
    OracleWithoutPairs,
    #[error("cannot load model {path}: {source}")]
    Model { path: PathBuf, source: LmError },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

impl MetricSpec {
    /// Parses the spec mini-language. `adapter:` with no command falls back
    /// to `default_adapter` (normally the environment variable's value).
    pub fn parse(spec: &str, default_adapter: Option<&str>) -> Result<Self, SpecError> {
        let spec = spec.trim();
        if spec == "oracle" {
            return Ok(MetricSpec::Oracle);
        }
        if let Some(rest) = spec.strip_prefix("invert:") {
            return Ok(MetricSpec::Invert(Box::new(Self::parse(rest, default_adapter)?)));
        }
        if let Some(seed) = spec.strip_prefix("random:") {
            return seed
                .trim()
                .parse()
                .map(MetricSpec::Random)
                .map_err(|_| SpecError::BadSeed(seed.to_string()));
        }
        if let Some(path) = spec.strip_prefix("native-ppl:") {
            if path.trim().is_empty() {
                return Err(SpecError::MissingModel);
            }
            return Ok(MetricSpec::NativePerplexity(PathBuf::from(path.trim())));
        }
        if let Some(cmd) = spec
            .strip_prefix("adapter")
            .filter(|r| r.is_empty() || r.starts_with(':'))
        {
            let cmd = cmd.trim_start_matches(':').trim();
            let cmd = if cmd.is_empty() {
                default_adapter
                    .filter(|c| !c.trim().is_empty())
                    .ok_or(SpecError::MissingCommand)?
            } else {
                cmd
            };
            let argv = shell_words::split(cmd).map_err(|e| SpecError::BadCommand(e.to_string()))?;
            if argv.is_empty() {
                return Err(SpecError::MissingCommand);
            }
            return Ok(MetricSpec::Adapter(argv));
        }
        Err(SpecError::Unknown(spec.to_string()))
    }
}

/// Resolved spec that can create one metric instance per worker.
/// Models are loaded once and shared; each adapter instance is its own process.
pub struct MetricFactory {
    kind: FactoryKind,
    tie_epsilon: f64,
    adapter_config: AdapterConfig,
}

enum FactoryKind {
    Native(Arc<NgramModel>, String),
    Adapter(Vec<String>),
    Oracle(Oracle),
    Random(u64),
    Invert(Box<FactoryKind>),
}

impl MetricFactory {
    pub fn new(spec: &MetricSpec, pairs: Option<&[SnippetPair]>, tie_epsilon: f64) -> Result<Self, SpecError> {
        Ok(Self {
            kind: Self::resolve(spec, pairs)?,
            tie_epsilon,
            adapter_config: AdapterConfig::default(),
        })
    }

    pub fn with_adapter_config(mut self, cfg: AdapterConfig) -> Self {
        self.adapter_config = cfg;
        self
    }

    fn resolve(spec: &MetricSpec, pairs: Option<&[SnippetPair]>) -> Result<FactoryKind, SpecError> {
        Ok(match spec {
            MetricSpec::NativePerplexity(path) => {
                let model = NgramModel::load(path).map_err(|source| SpecError::Model {
                    path: path.clone(),
                    source,
                })?;
                FactoryKind::Native(Arc::new(model), path.display().to_string())
            }
            MetricSpec::Adapter(argv) => FactoryKind::Adapter(argv.clone()),
            MetricSpec::Oracle => FactoryKind::Oracle(Oracle::from_pairs(pairs.ok_or(SpecError::OracleWithoutPairs)?)),
            MetricSpec::Random(seed) => FactoryKind::Random(*seed),
            MetricSpec::Invert(inner) => FactoryKind::Invert(Box::new(Self::resolve(inner, pairs)?)),
        })
    }

    pub fn instance(&self) -> Result<Box<dyn Metric>, SpecError> {
        self.build(&self.kind)
    }

    fn build(&self, kind: &FactoryKind) -> Result<Box<dyn Metric>, SpecError> {
        Ok(match kind {
            FactoryKind::Native(model, label) => {
                Box::new(NativePerplexity::new(model.clone(), label.clone(), self.tie_epsilon))
            }
            FactoryKind::Adapter(argv) => {
                let cfg = AdapterConfig {
                    argv: argv.clone(),
                    ..self.adapter_config.clone()
                };
                Box::new(AdapterMetric::new(Adapter::spawn(&cfg)?, self.tie_epsilon))
            }
            FactoryKind::Oracle(o) => Box::new(o.clone()),
            FactoryKind::Random(seed) => Box::new(RandomMetric { seed: *seed }),
            FactoryKind::Invert(inner) => Box::new(Inverted(self.build(inner)?)),
        })
    }
}
