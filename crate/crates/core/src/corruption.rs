//! Rule-based corruption for building worse-quality revisions.
//!
//! Each token is offered to the rules in a fixed order and the first rule
//! that fires wins. Confusion sets:
//!
//! - articles: `a`, `an`, `the` (dropping one is the empty-article case)
//! - prepositions: `in`, `on`, `at`, `for`, `to`, `of`, `with`
//! - verb forms: words of 5+ letters ending in `-s`, `-ed` or `-ing` get one
//!   of the other two suffixes
//! - commas: an existing comma is removed, or one is inserted before
//!   `and`, `but`, `which`, `that`, `while` following a word
//! - adjacent swap: two neighbouring words trade places

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Aspect, Document, EditAspect};
use crate::gec::EditSpan;
use crate::hashing::stable_hash;
use crate::pairs::{Preferred, SnippetPair};
use crate::text::{split_sentences, tokenize};

const ARTICLES: &[&str] = &["a", "an", "the"];
const PREPOSITIONS: &[&str] = &["in", "on", "at", "for", "to", "of", "with"];
const VERB_SUFFIXES: &[&str] = &["ing", "ed", "s"];
const COMMA_BEFORE: &[&str] = &["and", "but", "which", "that", "while"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub seed: u64,
    pub article_drop: f64,
    pub article_swap: f64,
    pub preposition_swap: f64,
    pub verb_form_perturb: f64,
    pub adjacent_swap: f64,
    pub comma_toggle: f64,
    /// Share of documents whose worse side is also sentence-shuffled.
    pub shuffle_doc_fraction: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            article_drop: 0.15,
            article_swap: 0.15,
            preposition_swap: 0.15,
            verb_form_perturb: 0.15,
            adjacent_swap: 0.03,
            comma_toggle: 0.1,
            shuffle_doc_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NoiseConfigError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {value:?}")]
    BadValue { line: usize, key: String, value: String },
    #[error("{key} = {value} is outside [0, 1]")]
    OutOfRange { key: &'static str, value: f64 },
}

impl NoiseConfig {
    /// All rates zero: corruption is the identity.
    pub fn zero(seed: u64) -> Self {
        Self {
            seed,
            article_drop: 0.0,
            article_swap: 0.0,
            preposition_swap: 0.0,
            verb_form_perturb: 0.0,
            adjacent_swap: 0.0,
            comma_toggle: 0.0,
            shuffle_doc_fraction: 0.0,
        }
    }

    fn rates(&self) -> [(&'static str, f64); 7] {
        [
            ("article_drop", self.article_drop),
            ("article_swap", self.article_swap),
            ("preposition_swap", self.preposition_swap),
            ("verb_form_perturb", self.verb_form_perturb),
            ("adjacent_swap", self.adjacent_swap),
            ("comma_toggle", self.comma_toggle),
            ("shuffle_doc_fraction", self.shuffle_doc_fraction),
        ]
    }

    pub fn validate(&self) -> Result<(), NoiseConfigError> {
        for (key, value) in self.rates() {
            if !(0.0..=1.0).contains(&value) {
                return Err(NoiseConfigError::OutOfRange { key, value });
            }
        }
        Ok(())
    }

    /// Reads a flat `key = value` file over the defaults. Blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, NoiseConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(NoiseConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || NoiseConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            if key == "seed" {
                cfg.seed = value.parse().map_err(|_| bad())?;
                continue;
            }
            let v: f64 = value.parse().map_err(|_| bad())?;
            let slot = match key {
                "article_drop" => &mut cfg.article_drop,
                "article_swap" => &mut cfg.article_swap,
                "preposition_swap" => &mut cfg.preposition_swap,
                "verb_form_perturb" => &mut cfg.verb_form_perturb,
                "adjacent_swap" => &mut cfg.adjacent_swap,
                "comma_toggle" => &mut cfg.comma_toggle,
                "shuffle_doc_fraction" => &mut cfg.shuffle_doc_fraction,
                _ => {
                    return Err(NoiseConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            };
            *slot = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn render(&self) -> String {
        let mut out = format!("seed = {}\n", self.seed);
        for (key, value) in self.rates() {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ArticleDrop,
    ArticleSwap,
    PrepositionSwap,
    VerbFormPerturb,
    AdjacentSwap,
    CommaToggle,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::ArticleDrop,
        Rule::ArticleSwap,
        Rule::PrepositionSwap,
        Rule::VerbFormPerturb,
        Rule::AdjacentSwap,
        Rule::CommaToggle,
    ];

    fn rate(self, cfg: &NoiseConfig) -> f64 {
        match self {
            Rule::ArticleDrop => cfg.article_drop,
            Rule::ArticleSwap => cfg.article_swap,
            Rule::PrepositionSwap => cfg.preposition_swap,
            Rule::VerbFormPerturb => cfg.verb_form_perturb,
            Rule::AdjacentSwap => cfg.adjacent_swap,
            Rule::CommaToggle => cfg.comma_toggle,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum serializes");
        f.write_str(s.as_str().expect("string variant"))
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown rule {s:?}"))
    }
}

fn is_word(t: &str) -> bool {
    t.chars().all(char::is_alphabetic) && !t.is_empty()
}

fn in_set(t: &str, set: &[&str]) -> bool {
    set.iter().any(|s| s.eq_ignore_ascii_case(t))
}

fn verb_suffix(t: &str) -> Option<&'static str> {
    if !is_word(t) || t.chars().count() < 5 {
        return None;
    }
    let lower = t.to_lowercase();
    VERB_SUFFIXES.iter().copied().find(|s| {
        lower.ends_with(s) && !(*s == "s" && (lower.ends_with("ss") || lower.ends_with("us") || lower.ends_with("is")))
    })
}

/// Whether `rule` can fire on token `i`.
pub fn eligible(rule: Rule, tokens: &[String], i: usize) -> bool {
    let t = tokens[i].as_str();
    match rule {
        Rule::ArticleDrop | Rule::ArticleSwap => in_set(t, ARTICLES),
        Rule::PrepositionSwap => in_set(t, PREPOSITIONS),
        Rule::VerbFormPerturb => verb_suffix(t).is_some(),
        Rule::AdjacentSwap => {
            is_word(t)
                && tokens
                    .get(i + 1)
                    .is_some_and(|n| is_word(n) && !n.eq_ignore_ascii_case(t))
        }
        Rule::CommaToggle => t == "," || (i > 0 && in_set(t, COMMA_BEFORE) && is_word(&tokens[i - 1])),
    }
}

fn match_case(template: &str, word: &str) -> String {
    let mut chars = word.chars();
    match (template.chars().next(), chars.next()) {
        (Some(t), Some(first)) if t.is_uppercase() => first.to_uppercase().chain(chars).collect(),
        _ => word.to_string(),
    }
}

fn pick_other<'a>(rng: &mut ChaCha8Rng, set: &[&'a str], current: &str) -> &'a str {
    let others: Vec<&str> = set
        .iter()
        .copied()
        .filter(|s| !s.eq_ignore_ascii_case(current))
        .collect();
    others[rng.gen_range(0..others.len())]
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Op {
    Keep,
    Drop,
    Replace(String),
    CommaBefore,
    SwapWithNext,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Noised {
    pub text: String,
    /// Changed spans in source token indices.
    pub spans: Vec<EditSpan>,
    /// Rule that produced each span.
    pub rules: Vec<Rule>,
}

/// Applies every rule independently at each eligible site with its rate,
/// seeded by `cfg.seed`.
pub fn inject_noise(paragraph: &str, cfg: &NoiseConfig) -> Noised {
    let seq = tokenize(paragraph);
    let tokens = seq.tokens();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ops = vec![Op::Keep; tokens.len()];
    let mut fired: Vec<(usize, Rule)> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        let mut chosen = None;
        for rule in Rule::ALL {
            if eligible(rule, tokens, i) && rng.gen::<f64>() < rule.rate(cfg) {
                chosen = Some(rule);
                break;
            }
        }
        let Some(rule) = chosen else {
            i += 1;
            continue;
        };
        ops[i] = match rule {
            Rule::ArticleDrop => Op::Drop,
            Rule::ArticleSwap => Op::Replace(match_case(t, pick_other(&mut rng, ARTICLES, t))),
            Rule::PrepositionSwap => Op::Replace(match_case(t, pick_other(&mut rng, PREPOSITIONS, t))),
            Rule::VerbFormPerturb => {
                let suffix = verb_suffix(t).expect("eligible");
                let stem: String = t.chars().take(t.chars().count() - suffix.len()).collect();
                let new = pick_other(&mut rng, VERB_SUFFIXES, suffix);
                Op::Replace(format!("{stem}{new}"))
            }
            Rule::AdjacentSwap => Op::SwapWithNext,
            Rule::CommaToggle if t == "," => Op::Drop,
            Rule::CommaToggle => Op::CommaBefore,
        };
        fired.push((i, rule));
        i += if rule == Rule::AdjacentSwap { 2 } else { 1 };
    }

    let mut text = String::with_capacity(paragraph.len() + 8);
    let mut spans = Vec::new();
    let mut drop_next_gap = false;
    let mut i = 0;
    while i < tokens.len() {
        let gap = if std::mem::take(&mut drop_next_gap) {
            ""
        } else {
            seq.gap_before(i)
        };
        match &ops[i] {
            Op::Keep => {
                text.push_str(gap);
                text.push_str(&tokens[i]);
            }
            Op::Drop => {
                if text.is_empty() {
                    text.push_str(gap);
                    drop_next_gap = true;
                }
                spans.push(EditSpan::new(i, i + 1, ""));
            }
            Op::Replace(new) => {
                text.push_str(gap);
                text.push_str(new);
                spans.push(EditSpan::new(i, i + 1, new.as_str()));
            }
            Op::CommaBefore => {
                text.push(',');
                text.push_str(gap);
                text.push_str(&tokens[i]);
                spans.push(EditSpan::new(i, i, ","));
            }
            Op::SwapWithNext => {
                text.push_str(gap);
                text.push_str(&tokens[i + 1]);
                text.push_str(seq.gap_before(i + 1));
                text.push_str(&tokens[i]);
                spans.push(EditSpan::new(i, i + 2, format!("{} {}", tokens[i + 1], tokens[i])));
                i += 1;
            }
        }
        i += 1;
    }
    if !drop_next_gap {
        text.push_str(seq.gap_before(tokens.len()));
    }
    Noised {
        text,
        spans,
        rules: fired.into_iter().map(|(_, r)| r).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shuffled {
    pub text: String,
    /// False when the paragraph has fewer than two sentences and was left alone.
    pub shuffled: bool,
}

/// Seeded non-identity permutation of a paragraph's sentences, joined by single spaces.
pub fn shuffle_sentences(paragraph: &str, seed: u64) -> Shuffled {
    let sentences = split_sentences(paragraph);
    if sentences.len() < 2 {
        return Shuffled {
            text: paragraph.to_string(),
            shuffled: false,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sentences.len();
    let order = loop {
        let perm = index::sample(&mut rng, n, n).into_vec();
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            break perm;
        }
    };
    Shuffled {
        text: order
            .iter()
            .map(|&i| sentences[i].as_str())
            .collect::<Vec<_>>()
            .join(" "),
        shuffled: true,
    }
}

/// Number of documents to sentence-shuffle: nearest integer, at least one
/// when the fraction is positive.
pub fn shuffled_doc_count(n_docs: usize, fraction: f64) -> usize {
    if fraction <= 0.0 || n_docs == 0 {
        return 0;
    }
    ((n_docs as f64 * fraction).round() as usize).clamp(1, n_docs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorseSet {
    pub pairs: Vec<SnippetPair>,
    pub shuffled_docs: BTreeSet<String>,
}

/// Pairs of (source paragraph, corrupted paragraph) with the source marked
/// as the better side. Each paper is used once (its source text is shared
/// by all editors). Shuffling composes with noise on the selected papers.
pub fn build_worse_testset(docs: &[Document], cfg: &NoiseConfig) -> WorseSet {
    let mut papers: Vec<&Document> = docs.iter().collect();
    papers.sort_by(|a, b| (&a.id, &a.editor).cmp(&(&b.id, &b.editor)));
    papers.dedup_by(|a, b| a.id == b.id);

    let k = shuffled_doc_count(papers.len(), cfg.shuffle_doc_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shuffled_docs: BTreeSet<String> = index::sample(&mut rng, papers.len(), k)
        .into_iter()
        .map(|i| papers[i].id.clone())
        .collect();

    let mut pairs = Vec::new();
    for doc in papers {
        let layout = doc.layout();
        let shuffle = shuffled_docs.contains(&doc.id);
        for pi in 0..layout.paragraphs().len() {
            let source = layout.source_paragraph(pi);
            if source.is_empty() {
                continue;
            }
            let seed = stable_hash(cfg.seed, &[doc.id.as_bytes(), &(pi as u64).to_le_bytes()]);
            let noised = inject_noise(source, &NoiseConfig { seed, ..*cfg });
            let noisy = !noised.spans.is_empty();
            let (worse, reshuffled) = if shuffle {
                let s = shuffle_sentences(&noised.text, seed.rotate_left(1));
                (s.text, s.shuffled)
            } else {
                (noised.text, false)
            };
            if worse == source {
                continue;
            }
            let aspect = match (noisy, reshuffled) {
                (true, true) => EditAspect::new(Aspect::Grammaticality, "noise+shuffle"),
                (true, false) => EditAspect::new(Aspect::Grammaticality, "noise"),
                (false, _) => EditAspect::new(Aspect::Consistency, "shuffle"),
            };
            pairs.push(SnippetPair {
                source: source.to_string(),
                revised: worse,
                aspect,
                doc_id: doc.id.clone(),
                editor: doc.editor.clone(),
                paragraph_index: pi,
                edit_index: 0,
                preferred: Preferred::Source,
            });
        }
    }
    WorseSet { pairs, shuffled_docs }
}
