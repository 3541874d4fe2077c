use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Revision aspect grouping raw edit-type labels.
///
/// The declaration order is the canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Aspect {
    Grammaticality,
    Fluency,
    Clarity,
    Style,
    Readability,
    Redundancy,
    Consistency,
    Other,
}

impl Aspect {
    pub const ALL: [Aspect; 8] = [
        Aspect::Grammaticality,
        Aspect::Fluency,
        Aspect::Clarity,
        Aspect::Style,
        Aspect::Readability,
        Aspect::Redundancy,
        Aspect::Consistency,
        Aspect::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aspect::Grammaticality => "Grammaticality",
            Aspect::Fluency => "Fluency",
            Aspect::Clarity => "Clarity",
            Aspect::Style => "Style",
            Aspect::Readability => "Readability",
            Aspect::Redundancy => "Redundancy",
            Aspect::Consistency => "Consistency",
            Aspect::Other => "Other",
        }
    }

    /// Grammar and fluency edits are the conventional GEC scope.
    pub fn is_gec(self) -> bool {
        matches!(self, Aspect::Grammaticality | Aspect::Fluency)
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown aspect name: {0}")]
pub struct UnknownAspect(pub String);

impl FromStr for Aspect {
    type Err = UnknownAspect;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Aspect::ALL
            .iter()
            .copied()
            .find(|a| a.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| UnknownAspect(s.to_string()))
    }
}

/// An aspect together with the raw `type` label it was mapped from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditAspect {
    pub aspect: Aspect,
    pub raw_label: String,
}

impl EditAspect {
    pub fn new(aspect: Aspect, raw_label: impl Into<String>) -> Self {
        Self {
            aspect,
            raw_label: raw_label.into(),
        }
    }
}

/// Maps raw edit-type labels to aspects. Lookup is case-insensitive and
/// treats `_`, `-` and runs of whitespace as a single space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    table: BTreeMap<String, Aspect>,
    fallback: Aspect,
}

const BUILTIN: &[(&str, Aspect)] = &[
    ("grammar", Aspect::Grammaticality),
    ("capitalization", Aspect::Grammaticality),
    ("word choice", Aspect::Fluency),
    ("word order", Aspect::Fluency),
    ("clarity", Aspect::Clarity),
    ("style", Aspect::Style),
    ("tone", Aspect::Style),
    ("readability", Aspect::Readability),
    ("redundancy", Aspect::Redundancy),
    ("conciseness", Aspect::Redundancy),
    ("consistency", Aspect::Consistency),
    ("flow", Aspect::Consistency),
    // labels seen in the released XML but absent from the aspect table
    ("punctuation", Aspect::Grammaticality),
];

impl Default for LabelMap {
    fn default() -> Self {
        let table = BUILTIN
            .iter()
            .map(|(label, aspect)| (normalize_label(label), *aspect))
            .collect();
        Self {
            table,
            fallback: Aspect::Other,
        }
    }
}

impl LabelMap {
    /// A map with no entries at all; every label falls back to `Other`.
    pub fn empty() -> Self {
        Self {
            table: BTreeMap::new(),
            fallback: Aspect::Other,
        }
    }

    pub fn insert(&mut self, label: &str, aspect: Aspect) {
        self.table.insert(normalize_label(label), aspect);
    }

    pub fn with(mut self, label: &str, aspect: Aspect) -> Self {
        self.insert(label, aspect);
        self
    }

    pub fn set_fallback(&mut self, aspect: Aspect) {
        self.fallback = aspect;
    }

    pub fn aspect_of(&self, label: &str) -> Aspect {
        self.table
            .get(&normalize_label(label))
            .copied()
            .unwrap_or(self.fallback)
    }

    pub fn label(&self, raw: &str) -> EditAspect {
        EditAspect::new(self.aspect_of(raw), raw.trim())
    }

    /// Reads `label = Aspect` lines on top of the built-in table.
    /// Blank lines and `#` comments are ignored; `* = Aspect` sets the fallback.
    pub fn parse_overrides(mut self, text: &str) -> Result<Self, LabelMapError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, aspect) = line.split_once('=').ok_or(LabelMapError::Syntax { line: lineno + 1 })?;
            let aspect: Aspect = aspect.parse().map_err(|e: UnknownAspect| LabelMapError::Aspect {
                line: lineno + 1,
                name: e.0,
            })?;
            if label.trim() == "*" {
                self.fallback = aspect;
            } else {
                self.insert(label, aspect);
            }
        }
        Ok(self)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabelMapError {
    #[error("line {line}: expected `label = Aspect`")]
    Syntax { line: usize },
    #[error("line {line}: unknown aspect {name:?}")]
    Aspect { line: usize, name: String },
}

fn normalize_label(label: &str) -> String {
    label
        .to_lowercase()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}
