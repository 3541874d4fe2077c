//! Span-level precision/recall/F0.5 against the best-matching annotator.
//!
//! System edits are extracted from (source, hypothesis) by token alignment.
//! An edit matches a gold edit when start, end and replacement are all
//! equal. For each instance the annotator with the highest instance F0.5 is
//! chosen (first annotator on ties) and its counts are added to the corpus
//! totals. There is no edit lattice search and no error-type classification.

use serde::{Deserialize, Serialize};

use super::{extract_edits, EditSpan, GecError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MatchCounts {
    pub fn add(&mut self, other: MatchCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// `(precision, recall, F0.5)`. P is 1 with no system edits, R is 1 with
    /// no gold edits, and F0.5 is 0 when P + R is 0.
    pub fn prf(&self) -> (f64, f64, f64) {
        let sys = self.tp + self.fp;
        let gold = self.tp + self.fn_;
        let p = if sys == 0 { 1.0 } else { self.tp as f64 / sys as f64 };
        let r = if gold == 0 { 1.0 } else { self.tp as f64 / gold as f64 };
        let f = if p + r == 0.0 {
            0.0
        } else if self.tp > 0 {
            // count form of 1.25PR/(0.25P + R); exact for rational inputs
            1.25 * self.tp as f64 / (1.25 * self.tp as f64 + 0.25 * self.fn_ as f64 + self.fp as f64)
        } else {
            1.25 * p * r / (0.25 * p + r)
        };
        (p, r, f)
    }
}

/// Multiset matching of system edits against one gold set.
pub fn match_edits(system: &[EditSpan], gold: &[EditSpan]) -> MatchCounts {
    let mut used = vec![false; gold.len()];
    let mut tp = 0;
    for edit in system {
        if let Some(k) = (0..gold.len()).find(|&k| !used[k] && gold[k] == *edit) {
            used[k] = true;
            tp += 1;
        }
    }
    MatchCounts {
        tp,
        fp: system.len() - tp,
        fn_: gold.len() - tp,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMatch {
    pub annotator: usize,
    pub counts: MatchCounts,
    pub f05: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMatchScore {
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
    pub counts: MatchCounts,
    pub per_instance: Vec<InstanceMatch>,
}

/// Scores pre-extracted system edits.
pub fn max_match_edits(
    system: &[Vec<EditSpan>],
    reference_edit_sets: &[Vec<Vec<EditSpan>>],
) -> Result<MaxMatchScore, GecError> {
    GecError::check_len("reference edit sets", system.len(), reference_edit_sets.len())?;
    let mut total = MatchCounts::default();
    let mut per_instance = Vec::with_capacity(system.len());
    for (i, (sys, annotators)) in system.iter().zip(reference_edit_sets).enumerate() {
        if annotators.is_empty() {
            return Err(GecError::EmptyReferenceSet { instance: i });
        }
        let mut best: Option<InstanceMatch> = None;
        for (a, gold) in annotators.iter().enumerate() {
            let counts = match_edits(sys, gold);
            let f05 = counts.prf().2;
            if best.as_ref().is_none_or(|b| f05 > b.f05) {
                best = Some(InstanceMatch {
                    annotator: a,
                    counts,
                    f05,
                });
            }
        }
        let best = best.expect("at least one annotator");
        total.add(best.counts);
        per_instance.push(best);
    }
    let (precision, recall, f05) = total.prf();
    Ok(MaxMatchScore {
        precision,
        recall,
        f05,
        counts: total,
        per_instance,
    })
}

pub fn max_match_f05(
    sources: &[Vec<String>],
    hypotheses: &[Vec<String>],
    reference_edit_sets: &[Vec<Vec<EditSpan>>],
) -> Result<MaxMatchScore, GecError> {
    GecError::check_len("hypotheses", sources.len(), hypotheses.len())?;
    let system: Vec<Vec<EditSpan>> = sources
        .iter()
        .zip(hypotheses)
        .map(|(s, h)| extract_edits(s, h))
        .collect();
    max_match_edits(&system, reference_edit_sets)
}
