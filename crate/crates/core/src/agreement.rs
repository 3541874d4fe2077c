//! Two-level inter-annotator agreement over papers revised by several editors.
//!
//! Detection X→Y is the share of X's edits whose source span overlaps at
//! least one of Y's edits on the same paper. Correction is the share of
//! overlapping (X edit, Y edit) pairs whose label sets intersect. Both are
//! computed for every ordered editor pair over the papers they share and
//! summarized by average, minimum and maximum.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Edit, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelLevel {
    /// Compare the aspects labels map to.
    #[default]
    Aspect,
    /// Compare raw label strings, case-insensitively.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            avg: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub from: String,
    pub to: String,
    pub shared_papers: usize,
    pub from_edits: usize,
    pub detected: usize,
    /// Absent when `from` has no edits on the shared papers.
    pub detection: Option<f64>,
    pub overlapping_pairs: usize,
    pub label_matches: usize,
    /// Absent when no edits overlap.
    pub correction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub label_level: LabelLevel,
    pub detection: Option<Summary>,
    pub correction: Option<Summary>,
    pub pairs: Vec<PairAgreement>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgreementError {
    #[error("agreement needs at least two editors, found {0}")]
    TooFewEditors(usize),
    #[error("no two editors revised a common paper")]
    NoSharedPapers,
}

/// `(matched, total)`: how many spans in `x` overlap some span in `y`.
pub fn detection_counts(x: &[Span], y: &[Span]) -> (usize, usize) {
    let matched = x.iter().filter(|a| y.iter().any(|b| a.overlaps(b))).count();
    (matched, x.len())
}

fn labels_intersect(a: &Edit, b: &Edit, level: LabelLevel) -> bool {
    match level {
        LabelLevel::Aspect => a.aspects().any(|x| b.aspects().any(|y| x == y)),
        LabelLevel::Raw => a
            .labels
            .iter()
            .any(|x| b.labels.iter().any(|y| x.raw_label.eq_ignore_ascii_case(&y.raw_label))),
    }
}

/// `(matching, overlapping)` over all overlapping cross pairs.
pub fn correction_counts(x: &[&Edit], y: &[&Edit], level: LabelLevel) -> (usize, usize) {
    let mut overlapping = 0;
    let mut matching = 0;
    for a in x {
        for b in y {
            if a.span.overlaps(&b.span) {
                overlapping += 1;
                matching += usize::from(labels_intersect(a, b, level));
            }
        }
    }
    (matching, overlapping)
}

pub fn agreement(docs: &[Document], level: LabelLevel) -> Result<AgreementReport, AgreementError> {
    // paper -> editor -> document; later duplicates of the same pair are ignored
    let mut by_paper: BTreeMap<&str, BTreeMap<&str, &Document>> = BTreeMap::new();
    for d in docs {
        by_paper.entry(&d.id).or_default().entry(&d.editor).or_insert(d);
    }
    for (paper, versions) in &by_paper {
        let mut sources = versions.values().map(|d| d.source_text(None).expect("whole document"));
        if let Some(first) = sources.next() {
            if sources.any(|s| s != first) {
                log::warn!("paper {paper}: editors' source texts differ; span overlap may be unreliable");
            }
        }
    }
    let editors: BTreeSet<&str> = docs.iter().map(|d| d.editor.as_str()).collect();
    if editors.len() < 2 {
        return Err(AgreementError::TooFewEditors(editors.len()));
    }

    let mut pairs = Vec::new();
    for &x in &editors {
        for &y in &editors {
            if x == y {
                continue;
            }
            let mut row = PairAgreement {
                from: x.into(),
                to: y.into(),
                shared_papers: 0,
                from_edits: 0,
                detected: 0,
                detection: None,
                overlapping_pairs: 0,
                label_matches: 0,
                correction: None,
            };
            for versions in by_paper.values() {
                let (Some(dx), Some(dy)) = (versions.get(x), versions.get(y)) else {
                    continue;
                };
                row.shared_papers += 1;
                let ex: Vec<&Edit> = dx.edits().collect();
                let ey: Vec<&Edit> = dy.edits().collect();
                let sx: Vec<Span> = ex.iter().map(|e| e.span).collect();
                let sy: Vec<Span> = ey.iter().map(|e| e.span).collect();
                let (matched, total) = detection_counts(&sx, &sy);
                row.detected += matched;
                row.from_edits += total;
                let (matching, overlapping) = correction_counts(&ex, &ey, level);
                row.label_matches += matching;
                row.overlapping_pairs += overlapping;
            }
            if row.shared_papers == 0 {
                continue;
            }
            row.detection = (row.from_edits > 0).then(|| row.detected as f64 / row.from_edits as f64);
            row.correction =
                (row.overlapping_pairs > 0).then(|| row.label_matches as f64 / row.overlapping_pairs as f64);
            pairs.push(row);
        }
    }
    if pairs.is_empty() {
        return Err(AgreementError::NoSharedPapers);
    }
    let det: Vec<f64> = pairs.iter().filter_map(|p| p.detection).collect();
    let cor: Vec<f64> = pairs.iter().filter_map(|p| p.correction).collect();
    Ok(AgreementReport {
        label_level: level,
        detection: Summary::of(&det),
        correction: Summary::of(&cor),
        pairs,
    })
}
