//! Instance-based revision classification: how often a metric picks the
//! better snippet of a pair, overall and per aspect.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Aspect;
use crate::hashing::stable_hash;
use crate::metric::{Choice, Metric, MetricError, MetricVerdict};
use crate::pairs::SnippetPair;

pub const REPORT_SCHEMA: &str = "irc_report_v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrcConfig {
    pub seed: u64,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
}

impl Default for IrcConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            bootstrap_resamples: 1000,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectAccuracy {
    /// Absent when the aspect has no pairs.
    pub accuracy: Option<f64>,
    pub n: usize,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub pair: usize,
    pub doc_id: String,
    pub editor: String,
    pub edit_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrcReport {
    pub schema: String,
    pub metric_id: String,
    pub seed: u64,
    pub total_pairs: usize,
    pub overall_accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Every aspect, in canonical order.
    pub per_aspect: BTreeMap<Aspect, AspectAccuracy>,
    pub tie_rate: f64,
    pub error_count: usize,
    pub errors: Vec<PairError>,
}

#[derive(Debug, thiserror::Error)]
pub enum IrcError {
    #[error("no pairs to evaluate")]
    NoPairs,
    #[error("cannot start metric: {0}")]
    Metric(String),
}

/// Whether the better snippet is shown in slot `b`. Keyed by the pair's
/// identity and content, never its position, so reordering pairs changes nothing.
pub fn better_in_slot_b(pair: &SnippetPair, seed: u64) -> bool {
    let h = stable_hash(
        seed,
        &[
            pair.doc_id.as_bytes(),
            pair.editor.as_bytes(),
            &(pair.paragraph_index as u64).to_le_bytes(),
            &(pair.edit_index as u64).to_le_bytes(),
            pair.aspect.raw_label.as_bytes(),
            pair.source.as_bytes(),
            pair.revised.as_bytes(),
        ],
    );
    h & 1 == 1
}

/// The `(a, b)` texts shown to the metric for each pair.
pub fn present(pairs: &[SnippetPair], seed: u64) -> Vec<(&str, &str)> {
    pairs
        .iter()
        .map(|p| {
            if better_in_slot_b(p, seed) {
                (p.worse(), p.better())
            } else {
                (p.better(), p.worse())
            }
        })
        .collect()
}

/// Credit for one verdict: 1 for the better side, 0.5 for a tie or error, else 0.
pub fn credit(verdict: &Result<MetricVerdict, MetricError>, better_is_b: bool) -> f64 {
    match verdict {
        Err(_) => 0.5,
        Ok(v) => match (v.choice, better_is_b) {
            (Choice::Tie, _) => 0.5,
            (Choice::B, true) | (Choice::A, false) => 1.0,
            _ => 0.0,
        },
    }
}

pub fn evaluate_metric(metric: &mut dyn Metric, pairs: &[SnippetPair], cfg: &IrcConfig) -> Result<IrcReport, IrcError> {
    if pairs.is_empty() {
        return Err(IrcError::NoPairs);
    }
    let shown = present(pairs, cfg.seed);
    let verdicts = metric.choose_batch(&shown);
    Ok(build_report(metric.id(), pairs, &verdicts, cfg))
}

/// Evaluates with up to `jobs` workers, each with its own metric instance
/// from `make`. Pairs are cut into contiguous chunks and results are
/// reassembled in input order.
pub fn evaluate_parallel<F>(make: F, pairs: &[SnippetPair], cfg: &IrcConfig, jobs: usize) -> Result<IrcReport, IrcError>
where
    F: Fn() -> Result<Box<dyn Metric>, String> + Sync,
{
    if pairs.is_empty() {
        return Err(IrcError::NoPairs);
    }
    let jobs = jobs.clamp(1, pairs.len());
    if jobs == 1 {
        let mut metric = make().map_err(IrcError::Metric)?;
        return evaluate_metric(metric.as_mut(), pairs, cfg);
    }
    let shown = present(pairs, cfg.seed);
    let chunk = pairs.len().div_ceil(jobs);
    let parts: Vec<Result<WorkerOutput, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = shown
            .chunks(chunk)
            .map(|part| {
                let make = &make;
                scope.spawn(move || {
                    let mut metric = make()?;
                    Ok((metric.id(), metric.choose_batch(part)))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("metric worker panicked"))
            .collect()
    });
    let mut verdicts = Vec::with_capacity(pairs.len());
    let mut id = String::new();
    for part in parts {
        let (metric_id, v) = part.map_err(IrcError::Metric)?;
        id = metric_id;
        verdicts.extend(v);
    }
    Ok(build_report(id, pairs, &verdicts, cfg))
}

type WorkerOutput = (String, Vec<Result<MetricVerdict, MetricError>>);

fn build_report(
    metric_id: String,
    pairs: &[SnippetPair],
    verdicts: &[Result<MetricVerdict, MetricError>],
    cfg: &IrcConfig,
) -> IrcReport {
    let mut credits = Vec::with_capacity(pairs.len());
    let mut by_aspect: BTreeMap<Aspect, Vec<f64>> = BTreeMap::new();
    let mut ties = 0;
    let mut errors = Vec::new();
    for (i, (pair, verdict)) in pairs.iter().zip(verdicts).enumerate() {
        let c = credit(verdict, better_in_slot_b(pair, cfg.seed));
        match verdict {
            Ok(v) if v.choice == Choice::Tie => ties += 1,
            Ok(_) => {}
            Err(e) => errors.push(PairError {
                pair: i,
                doc_id: pair.doc_id.clone(),
                editor: pair.editor.clone(),
                edit_index: pair.edit_index,
                message: e.to_string(),
            }),
        }
        credits.push(c);
        by_aspect.entry(pair.aspect.aspect).or_default().push(c);
    }

    let per_aspect = Aspect::ALL
        .iter()
        .map(|&aspect| {
            let entry = match by_aspect.get(&aspect) {
                Some(cs) => {
                    let seed = cfg.seed ^ stable_hash(0, &[aspect.name().as_bytes()]);
                    let (lo, hi) = bootstrap_ci(cs, cfg.bootstrap_resamples, cfg.confidence, seed);
                    AspectAccuracy {
                        accuracy: Some(mean(cs)),
                        n: cs.len(),
                        ci_low: Some(lo),
                        ci_high: Some(hi),
                    }
                }
                None => AspectAccuracy {
                    accuracy: None,
                    n: 0,
                    ci_low: None,
                    ci_high: None,
                },
            };
            (aspect, entry)
        })
        .collect();

    let (ci_low, ci_high) = bootstrap_ci(&credits, cfg.bootstrap_resamples, cfg.confidence, cfg.seed);
    let n = pairs.len();
    if !errors.is_empty() {
        log::warn!("{} of {n} pairs failed and were scored as ties", errors.len());
    }
    IrcReport {
        schema: REPORT_SCHEMA.into(),
        metric_id,
        seed: cfg.seed,
        total_pairs: n,
        overall_accuracy: mean(&credits),
        ci_low,
        ci_high,
        per_aspect,
        tie_rate: ties as f64 / n as f64,
        error_count: errors.len(),
        errors,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Percentile bootstrap over per-pair credits. Credits are sorted first so
/// the interval does not depend on input order; the bounds are widened if
/// needed to contain the point estimate. Empty input gives `(0, 0)`.
pub fn bootstrap_ci(credits: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    if credits.is_empty() {
        return (0.0, 0.0);
    }
    let estimate = mean(credits);
    if resamples == 0 {
        return (estimate, estimate);
    }
    let mut sorted = credits.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| sorted[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo_idx = ((alpha * resamples as f64).floor() as usize).min(resamples - 1);
    let hi_idx = (((1.0 - alpha) * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    (means[lo_idx].min(estimate), means[hi_idx].max(estimate))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

impl IrcReport {
    /// CSV rows in canonical aspect order followed by a totals row. Absent
    /// values are empty fields.
    pub fn per_aspect_csv(&self) -> String {
        let mut out = String::from("aspect,n,accuracy,ci_low,ci_high\n");
        for (aspect, a) in &self.per_aspect {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                aspect.name(),
                a.n,
                fmt_opt(a.accuracy),
                fmt_opt(a.ci_low),
                fmt_opt(a.ci_high)
            );
        }
        let _ = writeln!(
            out,
            "Total,{},{:.4},{:.4},{:.4}",
            self.total_pairs, self.overall_accuracy, self.ci_low, self.ci_high
        );
        out
    }

    /// Aligned plain-text table; absent accuracies show as `-`.
    pub fn per_aspect_text(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let mut rows: Vec<[String; 4]> = vec![["aspect".into(), "n".into(), "accuracy".into(), "95% CI".into()]];
        for (aspect, a) in &self.per_aspect {
            let ci = match (a.ci_low, a.ci_high) {
                (Some(l), Some(h)) => format!("{l:.3}-{h:.3}"),
                _ => "-".into(),
            };
            rows.push([aspect.name().into(), a.n.to_string(), cell(a.accuracy), ci]);
        }
        rows.push([
            "Total".into(),
            self.total_pairs.to_string(),
            format!("{:.3}", self.overall_accuracy),
            format!("{:.3}-{:.3}", self.ci_low, self.ci_high),
        ]);
        let widths: Vec<usize> = (0..4)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!("metric {}  seed {}\n", self.metric_id, self.seed);
        for r in &rows {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                r[0],
                r[1],
                r[2],
                r[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        }
        let _ = writeln!(out, "ties {:.3}  errors {}", self.tie_rate, self.error_count);
        out
    }
}
