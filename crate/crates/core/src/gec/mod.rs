//! Reference-based scoring: tokenization, GLEU, edit extraction and span F0.5.

mod align;
mod gleu;
mod maxmatch;

pub use align::{
    align, apply_edits, extract_edits, extract_edits_with, spans_from_ops, AlignOp, Alignment, EditSpan, MergeMode,
    OpKind,
};
pub use gleu::{gleu_corpus, sample_reference_indices, GleuConfig, GleuReport};
pub use maxmatch::{match_edits, max_match_edits, max_match_f05, InstanceMatch, MatchCounts, MaxMatchScore};

pub use crate::text::{tokenize, TokenSeq};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GecError {
    #[error("{what}: expected {expected} instances, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("instance {instance} has no references")]
    EmptyReferenceSet { instance: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl GecError {
    pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), GecError> {
        if expected == found {
            Ok(())
        } else {
            Err(GecError::LengthMismatch { what, expected, found })
        }
    }
}
