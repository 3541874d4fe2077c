use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Aspect, Document};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectCount {
    pub aspect: Aspect,
    pub count: usize,
    /// Share of all label occurrences, in percent.
    pub percent: f64,
}

/// Aspect distribution for the documents sharing one meta-attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaBreakdown {
    pub attribute: String,
    pub value: String,
    pub documents: usize,
    pub aspects: Vec<AspectCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub edits: usize,
    /// Each (edit, label) pair counts once.
    pub label_occurrences: usize,
    pub aspects: Vec<AspectCount>,
    /// Share of label occurrences outside grammaticality and fluency, in [0, 1].
    pub beyond_gec_ratio: f64,
    pub by_meta: Vec<MetaBreakdown>,
}

fn distribution<'a>(docs: impl Iterator<Item = &'a Document>) -> (usize, usize, Vec<AspectCount>) {
    let mut counts: BTreeMap<Aspect, usize> = BTreeMap::new();
    let mut edits = 0;
    for doc in docs {
        for edit in doc.edits() {
            edits += 1;
            for aspect in edit.aspects() {
                *counts.entry(aspect).or_default() += 1;
            }
        }
    }
    let total: usize = counts.values().sum();
    let rows = Aspect::ALL
        .iter()
        .map(|&aspect| {
            let count = counts.get(&aspect).copied().unwrap_or(0);
            let percent = if total == 0 {
                0.0
            } else {
                100.0 * count as f64 / total as f64
            };
            AspectCount { aspect, count, percent }
        })
        .collect();
    (edits, total, rows)
}

pub fn corpus_stats(docs: &[Document]) -> CorpusStats {
    let (edits, total, aspects) = distribution(docs.iter());
    let gec: usize = aspects.iter().filter(|a| a.aspect.is_gec()).map(|a| a.count).sum();
    let beyond_gec_ratio = if total == 0 {
        0.0
    } else {
        (total - gec) as f64 / total as f64
    };

    let mut by_meta = Vec::new();
    let mut push = |attribute: &str, value: &str, pred: &dyn Fn(&Document) -> bool| {
        let selected: Vec<&Document> = docs.iter().filter(|d| pred(d)).collect();
        if selected.is_empty() {
            return;
        }
        let (_, _, aspects) = distribution(selected.iter().copied());
        by_meta.push(MetaBreakdown {
            attribute: attribute.into(),
            value: value.into(),
            documents: selected.len(),
            aspects,
        });
    };
    use super::{Format, Position, Region};
    for p in [Position::Student, Position::NonStudent] {
        push("position", p.as_str(), &|d| d.meta.position == p);
    }
    for r in [Region::Native, Region::NonNative] {
        push("region", r.as_str(), &|d| d.meta.region == r);
    }
    for f in [Format::Conference, Format::Workshop] {
        push("format", f.as_str(), &|d| d.meta.format == f);
    }

    CorpusStats {
        documents: docs.len(),
        edits,
        label_occurrences: total,
        aspects,
        beyond_gec_ratio,
        by_meta,
    }
}

impl CorpusStats {
    pub fn percent(&self, aspect: Aspect) -> f64 {
        self.aspects
            .iter()
            .find(|a| a.aspect == aspect)
            .map_or(0.0, |a| a.percent)
    }

    /// Aligned plain-text table in canonical aspect order.
    pub fn render_text(&self) -> String {
        let mut out = format!("{:<16}{:>8}{:>8}\n", "aspect", "count", "%");
        for row in &self.aspects {
            out.push_str(&format!(
                "{:<16}{:>8}{:>8.1}\n",
                row.aspect.name(),
                row.count,
                row.percent
            ));
        }
        out.push_str(&format!(
            "{:<16}{:>8}{:>8}\nbeyond-GEC ratio: {:.3} ({} documents, {} edits)\n",
            "total", self.label_occurrences, "100.0", self.beyond_gec_ratio, self.documents, self.edits
        ));
        if self.by_meta.is_empty() {
            return out;
        }
        // percentages per meta value, aspects abbreviated to fit one row
        out.push_str(&format!("\n{:<24}{:>5}", "meta", "docs"));
        for row in &self.aspects {
            out.push_str(&format!("{:>7}", &row.aspect.name()[..5]));
        }
        out.push('\n');
        for m in &self.by_meta {
            out.push_str(&format!(
                "{:<24}{:>5}",
                format!("{}={}", m.attribute, m.value),
                m.documents
            ));
            for row in &m.aspects {
                out.push_str(&format!("{:>7.1}", row.percent));
            }
            out.push('\n');
        }
        out
    }
}
