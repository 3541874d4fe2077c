//! Corpus-level GLEU with sampled multi-reference selection.
//!
//! For each iteration one reference is drawn per instance. For every order
//! `n` the numerator is the clipped hypothesis/reference n-gram overlap minus
//! the hypothesis n-grams that also occur in the source but not in that
//! reference, summed over instances; the denominator is the number of
//! hypothesis n-grams. The per-iteration score is
//! `BP * exp(mean_n ln p_n)` with `BP = min(1, exp(1 - r/h))`, and the final
//! value is `100 *` the mean over iterations.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GecError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GleuConfig {
    pub max_n: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Lower bound applied to each n-gram precision so the log stays finite.
    pub epsilon_floor: f64,
}

impl Default for GleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            iterations: 500,
            seed: 0,
            epsilon_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GleuReport {
    /// Mean over iterations, scaled to [0, 100].
    pub score: f64,
    /// Per-iteration corpus scores in [0, 1].
    pub iteration_scores: Vec<f64>,
    /// Sentence-level GLEU per instance in [0, 100], averaged over iterations.
    pub per_instance: Vec<f64>,
}

type Counts<'a> = HashMap<&'a [String], i64>;

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> Counts<'_> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

fn overlap(a: &Counts, b: &Counts) -> i64 {
    a.iter().map(|(k, &c)| b.get(k).map_or(0, |&d| c.min(d))).sum()
}

/// Sufficient statistics `[h, r, num_1, den_1, ..., num_N, den_N]` for one
/// (instance, reference) combination.
fn instance_stats(src: &[String], hyp: &[String], reference: &[String], max_n: usize) -> Vec<i64> {
    let mut stats = Vec::with_capacity(2 + 2 * max_n);
    stats.push(hyp.len() as i64);
    stats.push(reference.len() as i64);
    for n in 1..=max_n {
        let h = ngram_counts(hyp, n);
        let s = ngram_counts(src, n);
        let r = ngram_counts(reference, n);
        let src_not_ref: Counts = s.into_iter().filter(|(k, _)| !r.contains_key(k)).collect();
        stats.push(overlap(&h, &r) - overlap(&h, &src_not_ref));
        stats.push((hyp.len() + 1).saturating_sub(n) as i64);
    }
    stats
}

fn score_from_stats(stats: &[i64], cfg: &GleuConfig) -> f64 {
    let (h, r) = (stats[0], stats[1]);
    if h == 0 {
        return 0.0;
    }
    let mut log_p = 0.0;
    for n in 0..cfg.max_n {
        let (num, den) = (stats[2 + 2 * n], stats[3 + 2 * n]);
        let p = if den > 0 {
            (num as f64 / den as f64).max(cfg.epsilon_floor)
        } else {
            cfg.epsilon_floor
        };
        log_p += p.ln() / cfg.max_n as f64;
    }
    let log_bp = (1.0 - r as f64 / h as f64).min(0.0);
    (log_bp + log_p).exp()
}

/// Reference index drawn for every instance in every iteration, `[iteration][instance]`.
pub fn sample_reference_indices(reference_counts: &[usize], iterations: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..iterations)
        .map(|_| reference_counts.iter().map(|&k| rng.gen_range(0..k)).collect())
        .collect()
}

pub fn gleu_corpus(
    sources: &[Vec<String>],
    hypotheses: &[Vec<String>],
    references: &[Vec<Vec<String>>],
    cfg: &GleuConfig,
) -> Result<GleuReport, GecError> {
    if cfg.max_n == 0 || cfg.iterations == 0 {
        return Err(GecError::Config("max_n and iterations must be at least 1".into()));
    }
    GecError::check_len("hypotheses", sources.len(), hypotheses.len())?;
    GecError::check_len("references", sources.len(), references.len())?;
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(GecError::EmptyReferenceSet { instance: i });
    }
    for (i, h) in hypotheses.iter().enumerate() {
        if h.is_empty() {
            log::warn!("GLEU: hypothesis {i} is empty and contributes no n-grams");
        }
    }

    let table: Vec<Vec<Vec<i64>>> = sources
        .iter()
        .zip(hypotheses)
        .zip(references)
        .map(|((s, h), refs)| refs.iter().map(|r| instance_stats(s, h, r, cfg.max_n)).collect())
        .collect();
    let counts: Vec<usize> = references.iter().map(Vec::len).collect();
    let draws = sample_reference_indices(&counts, cfg.iterations, cfg.seed);

    let width = 2 + 2 * cfg.max_n;
    let mut iteration_scores = Vec::with_capacity(cfg.iterations);
    let mut per_instance = vec![0.0; sources.len()];
    for draw in &draws {
        let mut total = vec![0i64; width];
        for (i, &ri) in draw.iter().enumerate() {
            let stats = &table[i][ri];
            for (acc, v) in total.iter_mut().zip(stats) {
                *acc += v;
            }
            per_instance[i] += score_from_stats(stats, cfg);
        }
        iteration_scores.push(score_from_stats(&total, cfg));
    }
    let iters = cfg.iterations as f64;
    for v in &mut per_instance {
        *v = 100.0 * *v / iters;
    }
    let score = 100.0 * iteration_scores.iter().sum::<f64>() / iters;
    Ok(GleuReport {
        score,
        iteration_scores,
        per_instance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn perfect_output_scores_exactly_100() {
        let s = vec![toks("the cat sat on the mat"), toks("a b c d e")];
        let refs: Vec<Vec<Vec<String>>> = s.iter().map(|x| vec![x.clone()]).collect();
        let report = gleu_corpus(
            &s,
            &s,
            &refs,
            &GleuConfig {
                iterations: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(report.score, 100.0);
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample_reference_indices(&[3, 1, 2], 5, 42);
        assert_eq!(a, sample_reference_indices(&[3, 1, 2], 5, 42));
        assert!(a.iter().all(|row| row[1] == 0 && row[0] < 3 && row[2] < 2));
    }

    #[test]
    fn reference_output_beats_unedited_source() {
        let src = vec![toks("he go to school yesterday")];
        let reference = vec![toks("he went to school yesterday")];
        let refs = vec![reference.clone()];
        let cfg = GleuConfig {
            iterations: 1,
            ..Default::default()
        };
        let hyp_ref = gleu_corpus(&src, &reference, &refs, &cfg).unwrap().score;
        let hyp_src = gleu_corpus(&src, &src, &refs, &cfg).unwrap().score;
        assert!(hyp_ref > hyp_src);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let s = vec![toks("a")];
        let err = gleu_corpus(&s, &[], &[vec![toks("a")]], &GleuConfig::default()).unwrap_err();
        assert!(matches!(err, GecError::LengthMismatch { .. }));
        let err = gleu_corpus(&s, &s, &[vec![]], &GleuConfig::default()).unwrap_err();
        assert!(matches!(err, GecError::EmptyReferenceSet { instance: 0 }));
    }

    #[test]
    fn empty_hypothesis_contributes_nothing() {
        let src = vec![toks("a b c"), toks("x y z")];
        let hyp = vec![toks("a b c"), vec![]];
        let refs = vec![vec![toks("a b c")], vec![toks("x y z")]];
        let cfg = GleuConfig {
            iterations: 1,
            ..Default::default()
        };
        let r = gleu_corpus(&src, &hyp, &refs, &cfg).unwrap();
        assert_eq!(r.per_instance[1], 0.0);
        assert!(r.score > 0.0 && r.score < 100.0);
    }
}
