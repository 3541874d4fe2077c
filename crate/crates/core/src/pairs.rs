//! Single-edit snippet pairs, paper-level train/test splits and training export.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Aspect, Document, EditAspect};

/// Which side of a pair a correct metric should pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preferred {
    /// The usual case: the edited snippet is better.
    #[default]
    Revised,
    /// Corruption pairs, where `revised` holds the degraded text.
    Source,
}

fn is_default_preferred(p: &Preferred) -> bool {
    *p == Preferred::Revised
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetPair {
    pub source: String,
    pub revised: String,
    pub aspect: EditAspect,
    pub doc_id: String,
    pub editor: String,
    pub paragraph_index: usize,
    pub edit_index: usize,
    #[serde(default, skip_serializing_if = "is_default_preferred")]
    pub preferred: Preferred,
}

impl SnippetPair {
    pub fn better(&self) -> &str {
        match self.preferred {
            Preferred::Revised => &self.revised,
            Preferred::Source => &self.source,
        }
    }

    pub fn worse(&self) -> &str {
        match self.preferred {
            Preferred::Revised => &self.source,
            Preferred::Source => &self.revised,
        }
    }
}

/// How the two snippets of a pair are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairMode {
    /// Source paragraph vs. the source paragraph with only this edit applied.
    #[default]
    Apply,
    /// Fully revised paragraph with this edit reverted vs. the fully revised paragraph.
    Revert,
}

impl std::str::FromStr for PairMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "apply" => Ok(PairMode::Apply),
            "revert" => Ok(PairMode::Revert),
            _ => Err(format!("unknown pair mode {s:?} (expected apply or revert)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub pairs: Vec<SnippetPair>,
    /// Edits whose paragraph could not be located.
    pub skipped_unplaced: usize,
    /// Edits whose two snippets came out empty or identical.
    pub skipped_degenerate: usize,
}

/// One pair per (edit, label), in (doc id, editor, paragraph, edit, label)
/// order. With `split`, only documents whose id is listed are used.
pub fn extract_pairs(docs: &[Document], split: Option<&BTreeSet<String>>, mode: PairMode) -> Extraction {
    let mut order: Vec<&Document> = docs
        .iter()
        .filter(|d| split.is_none_or(|ids| ids.contains(&d.id)))
        .collect();
    order.sort_by(|a, b| (&a.id, &a.editor).cmp(&(&b.id, &b.editor)));

    let mut out = Extraction::default();
    for doc in order {
        let layout = doc.layout();
        for (pi, para) in layout.paragraphs().iter().enumerate() {
            for &ei in &para.edits {
                let (source, revised) = match mode {
                    PairMode::Apply => layout.single_edit_pair(ei),
                    PairMode::Revert => layout.reverted_edit_pair(ei),
                }
                .expect("edit was placed in this paragraph");
                let labels = &layout.edits()[ei].labels;
                if source.is_empty() || revised.is_empty() || source == revised {
                    out.skipped_degenerate += labels.len();
                    continue;
                }
                for label in labels {
                    out.pairs.push(SnippetPair {
                        source: source.clone(),
                        revised: revised.clone(),
                        aspect: label.clone(),
                        doc_id: doc.id.clone(),
                        editor: doc.editor.clone(),
                        paragraph_index: pi,
                        edit_index: ei,
                        preferred: Preferred::Revised,
                    });
                }
            }
        }
        for ei in 0..layout.edits().len() {
            if layout.paragraph_of(ei).is_none() {
                out.skipped_unplaced += layout.edits()[ei].labels.len();
            }
        }
    }
    if out.skipped_unplaced > 0 || out.skipped_degenerate > 0 {
        log::warn!(
            "skipped {} label(s) on unplaced edits and {} on edits with empty or identical snippets",
            out.skipped_unplaced,
            out.skipped_degenerate
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_doc_ids: BTreeSet<String>,
    pub test_doc_ids: BTreeSet<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("a {train}:{test} split needs at least {need} papers, corpus has {found}")]
    Infeasible {
        train: usize,
        test: usize,
        need: usize,
        found: usize,
    },
    #[error("split ratio parts must be positive")]
    BadRatio,
}

/// Seeded paper-level split: every editor's version of a paper lands on the
/// same side. The test side gets `round(n * test / (train + test))` papers.
pub fn split_corpus(docs: &[Document], train: usize, test: usize, seed: u64) -> Result<SplitSpec, SplitError> {
    if train == 0 || test == 0 {
        return Err(SplitError::BadRatio);
    }
    let ids: BTreeSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    let n = ids.len();
    if n < train + test {
        return Err(SplitError::Infeasible {
            train,
            test,
            need: train + test,
            found: n,
        });
    }
    let n_test = ((n * test) as f64 / (train + test) as f64).round() as usize;
    let mut shuffled: Vec<&str> = ids.into_iter().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test_ids, train_ids) = shuffled.split_at(n_test);
    Ok(SplitSpec {
        train_doc_ids: train_ids.iter().map(|s| s.to_string()).collect(),
        test_doc_ids: test_ids.iter().map(|s| s.to_string()).collect(),
        seed,
    })
}

/// Renders an id list: one id per line after a comment header.
pub fn render_id_list<'a>(ids: impl IntoIterator<Item = &'a String>, comment: &str) -> String {
    let mut out = format!("# {comment}\n");
    for id in ids {
        out.push_str(id);
        out.push('\n');
    }
    out
}

/// Parses an id list, ignoring blank lines and `#` comments.
pub fn parse_id_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub a: String,
    pub b: String,
    /// Slot holding the better (normally the revised) snippet.
    pub label: Slot,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("swap fraction must lie in [0, 1], got {0}")]
pub struct SwapFractionError(pub f64);

/// Emits each pair as `(a, b)` with the better snippet in slot `b`, except
/// for exactly `round(swap_fraction * n)` seeded picks that have it in slot
/// `a`. The output order is shuffled with the same seed.
pub fn export_training_pairs(
    pairs: &[SnippetPair],
    swap_fraction: f64,
    seed: u64,
) -> Result<Vec<TrainingPair>, SwapFractionError> {
    if !(0.0..=1.0).contains(&swap_fraction) {
        return Err(SwapFractionError(swap_fraction));
    }
    let n = pairs.len();
    let k = (swap_fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut swapped = vec![false; n];
    for i in index::sample(&mut rng, n, k) {
        swapped[i] = true;
    }
    let mut out: Vec<TrainingPair> = pairs
        .iter()
        .zip(swapped)
        .map(|(p, swap)| {
            let (better, worse) = (p.better().to_string(), p.worse().to_string());
            if swap {
                TrainingPair {
                    a: better,
                    b: worse,
                    label: Slot::A,
                }
            } else {
                TrainingPair {
                    a: worse,
                    b: better,
                    label: Slot::B,
                }
            }
        })
        .collect();
    out.shuffle(&mut rng);
    Ok(out)
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(items: &[T], mut w: impl Write) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| JsonlError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct PairRow<'a> {
    doc_id: &'a str,
    editor: &'a str,
    paragraph_index: usize,
    edit_index: usize,
    aspect: Aspect,
    label: &'a str,
    preferred: Preferred,
    source: &'a str,
    revised: &'a str,
}

/// CSV with a header row; text columns are quoted as needed.
pub fn write_pairs_csv(pairs: &[SnippetPair], w: impl Write) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for p in pairs {
        out.serialize(PairRow {
            doc_id: &p.doc_id,
            editor: &p.editor,
            paragraph_index: p.paragraph_index,
            edit_index: p.edit_index,
            aspect: p.aspect.aspect,
            label: &p.aspect.raw_label,
            preferred: p.preferred,
            source: &p.source,
            revised: &p.revised,
        })?;
    }
    out.flush()?;
    Ok(())
}
