//! Token alignment and edit-span extraction.
//!
//! Costs are kept in half-units so the case-only substitution (0.5) stays
//! exact: match 0, substitution 1 (0.5 when equal ignoring case),
//! insertion 1, deletion 1, adjacent transposition 1. Among alignments of
//! equal cost the one with the most matches wins; remaining ties prefer
//! match, transposition, substitution, deletion, insertion while tracing
//! back from the end.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Replacement of source tokens `start..end` by `replacement` (tokens joined
/// by single spaces; empty for a deletion). `start == end` is an insertion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EditSpan {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

impl EditSpan {
    pub fn new(start: usize, end: usize, replacement: impl Into<String>) -> Self {
        assert!(start <= end, "edit span start {start} > end {end}");
        Self {
            start,
            end,
            replacement: replacement.into(),
        }
    }

    pub fn is_insertion(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Match,
    Substitute,
    Delete,
    Insert,
    Transpose,
}

impl OpKind {
    fn units(self, src: &[String], tgt: &[String], s: &Range<usize>, t: &Range<usize>) -> u32 {
        match self {
            OpKind::Match => 0,
            OpKind::Substitute => {
                if src[s.start].to_lowercase() == tgt[t.start].to_lowercase() {
                    1
                } else {
                    2
                }
            }
            OpKind::Delete | OpKind::Insert | OpKind::Transpose => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignOp {
    pub kind: OpKind,
    pub src: Range<usize>,
    pub tgt: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub ops: Vec<AlignOp>,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeMode {
    /// Contiguous non-match operations become one span.
    #[default]
    Merged,
    /// Every non-match operation is its own span.
    AllSplit,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Score {
    units: u32,
    neg_matches: i64,
}

pub fn align<S: AsRef<str>>(source: &[S], target: &[S]) -> Alignment {
    let src: Vec<String> = source.iter().map(|s| s.as_ref().to_string()).collect();
    let tgt: Vec<String> = target.iter().map(|s| s.as_ref().to_string()).collect();
    let (n, m) = (src.len(), tgt.len());
    let lower_src: Vec<String> = src.iter().map(|s| s.to_lowercase()).collect();
    let lower_tgt: Vec<String> = tgt.iter().map(|s| s.to_lowercase()).collect();

    let idx = |i: usize, j: usize| i * (m + 1) + j;
    let mut table = vec![
        Score {
            units: u32::MAX,
            neg_matches: 0
        };
        (n + 1) * (m + 1)
    ];
    table[idx(0, 0)] = Score {
        units: 0,
        neg_matches: 0,
    };
    let step = |prev: Score, units: u32, matched: bool| Score {
        units: prev.units + units,
        neg_matches: prev.neg_matches - matched as i64,
    };

    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = Score {
                units: u32::MAX,
                neg_matches: 0,
            };
            if i > 0 && j > 0 {
                let prev = table[idx(i - 1, j - 1)];
                let cand = if src[i - 1] == tgt[j - 1] {
                    step(prev, 0, true)
                } else if lower_src[i - 1] == lower_tgt[j - 1] {
                    step(prev, 1, false)
                } else {
                    step(prev, 2, false)
                };
                best = best.min(cand);
            }
            if i > 1 && j > 1 && transposable(&src, &tgt, i, j) {
                best = best.min(step(table[idx(i - 2, j - 2)], 2, false));
            }
            if i > 0 {
                best = best.min(step(table[idx(i - 1, j)], 2, false));
            }
            if j > 0 {
                best = best.min(step(table[idx(i, j - 1)], 2, false));
            }
            table[idx(i, j)] = best;
        }
    }

    let mut ops = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = table[idx(i, j)];
        if i > 0 && j > 0 && src[i - 1] == tgt[j - 1] && step(table[idx(i - 1, j - 1)], 0, true) == here {
            ops.push(AlignOp {
                kind: OpKind::Match,
                src: i - 1..i,
                tgt: j - 1..j,
            });
            i -= 1;
            j -= 1;
            continue;
        }
        if i > 1 && j > 1 && transposable(&src, &tgt, i, j) && step(table[idx(i - 2, j - 2)], 2, false) == here {
            ops.push(AlignOp {
                kind: OpKind::Transpose,
                src: i - 2..i,
                tgt: j - 2..j,
            });
            i -= 2;
            j -= 2;
            continue;
        }
        if i > 0 && j > 0 && src[i - 1] != tgt[j - 1] {
            let units = if lower_src[i - 1] == lower_tgt[j - 1] { 1 } else { 2 };
            if step(table[idx(i - 1, j - 1)], units, false) == here {
                ops.push(AlignOp {
                    kind: OpKind::Substitute,
                    src: i - 1..i,
                    tgt: j - 1..j,
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && step(table[idx(i - 1, j)], 2, false) == here {
            ops.push(AlignOp {
                kind: OpKind::Delete,
                src: i - 1..i,
                tgt: j..j,
            });
            i -= 1;
            continue;
        }
        debug_assert!(j > 0);
        ops.push(AlignOp {
            kind: OpKind::Insert,
            src: i..i,
            tgt: j - 1..j,
        });
        j -= 1;
    }
    ops.reverse();

    let units: u32 = ops.iter().map(|op| op.kind.units(&src, &tgt, &op.src, &op.tgt)).sum();
    debug_assert_eq!(units, table[idx(n, m)].units);
    Alignment {
        ops,
        cost: f64::from(units) / 2.0,
    }
}

fn transposable(src: &[String], tgt: &[String], i: usize, j: usize) -> bool {
    src[i - 1] == tgt[j - 2] && src[i - 2] == tgt[j - 1] && src[i - 1] != src[i - 2]
}

/// Edit spans turning `source` into `target`.
pub fn extract_edits<S: AsRef<str>>(source: &[S], target: &[S]) -> Vec<EditSpan> {
    extract_edits_with(source, target, MergeMode::Merged)
}

pub fn extract_edits_with<S: AsRef<str>>(source: &[S], target: &[S], mode: MergeMode) -> Vec<EditSpan> {
    let alignment = align(source, target);
    spans_from_ops(&alignment.ops, target, mode)
}

pub fn spans_from_ops<S: AsRef<str>>(ops: &[AlignOp], target: &[S], mode: MergeMode) -> Vec<EditSpan> {
    let join = |r: Range<usize>| target[r].iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
    let mut spans = Vec::new();
    let mut run: Option<(Range<usize>, Range<usize>)> = None;
    for op in ops {
        if op.kind == OpKind::Match {
            if let Some((s, t)) = run.take() {
                spans.push(EditSpan::new(s.start, s.end, join(t)));
            }
            continue;
        }
        match (mode, run.as_mut()) {
            (MergeMode::Merged, Some((s, t))) => {
                s.end = op.src.end;
                t.end = op.tgt.end;
            }
            (MergeMode::Merged, None) => run = Some((op.src.clone(), op.tgt.clone())),
            (MergeMode::AllSplit, _) => spans.push(EditSpan::new(op.src.start, op.src.end, join(op.tgt.clone()))),
        }
    }
    if let Some((s, t)) = run {
        spans.push(EditSpan::new(s.start, s.end, join(t)));
    }
    spans
}

/// Applies non-overlapping spans to a token sequence.
pub fn apply_edits<S: AsRef<str>>(source: &[S], spans: &[EditSpan]) -> Vec<String> {
    let mut sorted: Vec<&EditSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut out = Vec::new();
    let mut cursor = 0;
    for span in sorted {
        assert!(span.start >= cursor, "overlapping edit spans");
        out.extend(source[cursor..span.start].iter().map(|t| t.as_ref().to_string()));
        out.extend(span.replacement.split_whitespace().map(str::to_string));
        cursor = span.end;
    }
    out.extend(source[cursor..].iter().map(|t| t.as_ref().to_string()));
    out
}
