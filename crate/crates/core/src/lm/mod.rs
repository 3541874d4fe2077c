//! Interpolated modified Kneser-Ney n-gram language model.
//!
//! The highest order uses raw counts; every lower order uses continuation
//! counts (the number of distinct left extensions of an n-gram). Each order
//! interpolates with the next lower one:
//!
//! ```text
//! p_k(w | h) = (max(c(h w) - D(c), 0) + gamma(h) * p_{k-1}(w | h')) / c(h)
//! gamma(h)   = D1 * N1(h) + D2 * N2(h) + D3+ * N3+(h)
//! ```
//!
//! and the recursion bottoms out in the uniform distribution over every
//! predictable token (the vocabulary including `</s>` and `<unk>`, excluding
//! `<s>`). Unseen contexts fall through to the lower order unchanged.

mod io;

use std::collections::{BTreeMap, HashMap};

pub use io::MAGIC;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

/// Discount used when count-of-counts are too sparse for the closed-form estimate.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("cannot fit a language model on an empty corpus")]
    EmptyCorpus,
    #[error("cannot score an empty token sequence")]
    EmptyInput,
    #[error("order must be at least 1")]
    InvalidOrder,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a valid model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    pub order: usize,
    /// Tokens seen fewer times than this are folded into `<unk>`.
    pub min_count: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { order: 3, min_count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
struct ContextEntry {
    total: u64,
    /// Number of followers seen once, twice, and three or more times.
    buckets: [u64; 3],
    followers: HashMap<u32, u64>,
}

impl ContextEntry {
    fn add(&mut self, word: u32, count: u64) {
        *self.followers.entry(word).or_insert(0) += count;
    }

    fn finish(&mut self) {
        self.total = self.followers.values().sum();
        self.buckets = [0; 3];
        for &c in self.followers.values() {
            self.buckets[(c.min(3) - 1) as usize] += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    discounts: [f64; 3],
    contexts: HashMap<Box<[u32]>, ContextEntry>,
}

impl Level {
    fn discount(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.discounts[0],
            2 => self.discounts[1],
            _ => self.discounts[2],
        }
    }
}

/// Smoothed n-gram model. Immutable after fitting; scoring is `&self`.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    words: Vec<String>,
    index: HashMap<String, u32>,
    levels: Vec<Level>,
}

impl NgramModel {
    pub fn fit<S: AsRef<str>>(sentences: &[Vec<S>], opts: FitOptions) -> Result<Self, LmError> {
        if opts.order == 0 {
            return Err(LmError::InvalidOrder);
        }
        if sentences.iter().all(Vec::is_empty) {
            return Err(LmError::EmptyCorpus);
        }

        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for s in sentences {
            for t in s {
                *freq.entry(t.as_ref()).or_insert(0) += 1;
            }
        }
        let mut words: Vec<String> = vec![BOS.into(), EOS.into(), UNK.into()];
        words.extend(
            freq.iter()
                .filter(|(w, &c)| c >= opts.min_count && ![BOS, EOS, UNK].contains(w))
                .map(|(w, _)| w.to_string()),
        );
        let index: HashMap<String, u32> = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();

        let order = opts.order;
        let mut top: HashMap<Box<[u32]>, u64> = HashMap::new();
        for s in sentences {
            if s.is_empty() {
                continue;
            }
            let mut padded = vec![BOS_ID; order - 1];
            padded.extend(s.iter().map(|t| *index.get(t.as_ref()).unwrap_or(&UNK_ID)));
            padded.push(EOS_ID);
            for gram in padded.windows(order) {
                *top.entry(gram.into()).or_insert(0) += 1;
            }
        }

        // counts[k-1] holds k-gram counts: raw for the highest order,
        // continuation counts below it.
        let mut counts: Vec<HashMap<Box<[u32]>, u64>> = vec![HashMap::new(); order];
        counts[order - 1] = top;
        for k in (1..order).rev() {
            let mut lower: HashMap<Box<[u32]>, u64> = HashMap::new();
            for gram in counts[k].keys() {
                *lower.entry(gram[1..].into()).or_insert(0) += 1;
            }
            counts[k - 1] = lower;
        }

        let levels = counts
            .into_iter()
            .map(|grams| {
                let discounts = estimate_discounts(grams.values().copied());
                let mut contexts: HashMap<Box<[u32]>, ContextEntry> = HashMap::new();
                for (gram, c) in grams {
                    let (ctx, w) = gram.split_at(gram.len() - 1);
                    contexts.entry(ctx.into()).or_default().add(w[0], c);
                }
                contexts.values_mut().for_each(ContextEntry::finish);
                Level { discounts, contexts }
            })
            .collect();

        Ok(Self {
            order,
            words,
            index,
            levels,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of tokens that can be predicted (vocabulary without `<s>`).
    pub fn predictable_size(&self) -> usize {
        self.words.len() - 1
    }

    /// Predictable tokens, `</s>` and `<unk>` included.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.words.iter().skip(1).map(String::as_str)
    }

    pub fn discounts(&self, order: usize) -> [f64; 3] {
        self.levels[order - 1].discounts
    }

    fn id(&self, token: &str) -> u32 {
        *self.index.get(token).unwrap_or(&UNK_ID)
    }

    fn prob_ids(&self, history: &[u32], word: u32) -> f64 {
        if word == BOS_ID {
            return 0.0;
        }
        let mut p = 1.0 / self.predictable_size() as f64;
        for k in 1..=self.order {
            let level = &self.levels[k - 1];
            let ctx = &history[history.len() - (k - 1)..];
            if let Some(entry) = level.contexts.get(ctx) {
                let c = entry.followers.get(&word).copied().unwrap_or(0);
                let gamma: f64 = entry
                    .buckets
                    .iter()
                    .zip(&level.discounts)
                    .map(|(&n, &d)| n as f64 * d)
                    .sum();
                p = ((c as f64 - level.discount(c)).max(0.0) + gamma * p) / entry.total as f64;
            }
        }
        p
    }

    /// `p(word | context)`; only the last `order - 1` context tokens matter and
    /// missing history is padded with `<s>`.
    pub fn prob<S: AsRef<str>>(&self, context: &[S], word: &str) -> f64 {
        let history = self.history(context.iter().map(|t| self.id(t.as_ref())));
        self.prob_ids(&history, self.id(word))
    }

    fn history(&self, ids: impl Iterator<Item = u32>) -> Vec<u32> {
        let mut h = vec![BOS_ID; self.order - 1];
        h.extend(ids);
        let keep = self.order - 1;
        h.split_off(h.len() - keep)
    }

    fn score(&self, tokens: &[impl AsRef<str>], terminate: bool) -> f64 {
        let mut history = vec![BOS_ID; self.order - 1];
        let mut total = 0.0;
        let ids = tokens
            .iter()
            .map(|t| self.id(t.as_ref()))
            .chain(terminate.then_some(EOS_ID));
        for w in ids {
            total += self.prob_ids(&history, w).ln();
            if self.order > 1 {
                history.remove(0);
                history.push(w);
            }
        }
        total
    }

    /// Natural-log probability of a sentence, `</s>` included.
    pub fn log_prob<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64, LmError> {
        if tokens.is_empty() {
            return Err(LmError::EmptyInput);
        }
        Ok(self.score(tokens, true))
    }

    /// Log probability of the tokens alone, without the `</s>` term.
    pub fn prefix_log_prob<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        self.score(tokens, false)
    }

    /// `exp(-log_prob / N)` with `N` counting `</s>` but not `<s>` padding.
    pub fn perplexity<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64, LmError> {
        let lp = self.log_prob(tokens)?;
        Ok((-lp / (tokens.len() + 1) as f64).exp())
    }

    /// Per-token perplexity over several independently scored sentences.
    pub fn perplexity_sentences<S: AsRef<str>>(&self, sentences: &[Vec<S>]) -> Result<f64, LmError> {
        let mut lp = 0.0;
        let mut n = 0usize;
        for s in sentences.iter().filter(|s| !s.is_empty()) {
            lp += self.log_prob(s)?;
            n += s.len() + 1;
        }
        if n == 0 {
            return Err(LmError::EmptyInput);
        }
        Ok((-lp / n as f64).exp())
    }
}

/// Closed-form modified Kneser-Ney discounts from count-of-counts, or the
/// fallback when any of n1..n4 is zero or an estimate leaves its valid range.
fn estimate_discounts(counts: impl Iterator<Item = u64>) -> [f64; 3] {
    let mut n = [0u64; 5];
    for c in counts {
        if (1..=4).contains(&c) {
            n[c as usize] += 1;
        }
    }
    let fallback = [FALLBACK_DISCOUNT; 3];
    if n[1..=4].contains(&0) {
        return fallback;
    }
    let (n1, n2, n3, n4) = (n[1] as f64, n[2] as f64, n[3] as f64, n[4] as f64);
    let y = n1 / (n1 + 2.0 * n2);
    let d = [
        1.0 - 2.0 * y * n2 / n1,
        2.0 - 3.0 * y * n3 / n2,
        3.0 - 4.0 * y * n4 / n3,
    ];
    let valid = d.iter().zip([1.0, 2.0, 3.0]).all(|(&d, max)| d > 0.0 && d <= max);
    if valid {
        d
    } else {
        fallback
    }
}
