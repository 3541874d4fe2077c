//! Edit-annotated revision documents.
//!
//! A [`Document`] is one editor's revision of one paper: ordered sections of
//! interleaved plain text and inline edits. Source-side text is obtained by
//! concatenating text nodes with each edit's `src`; the revised side uses
//! each edit's `tgt`. All offsets are in `char`s over the whole-document
//! source text, in which sections are joined by [`SECTION_SEPARATOR`].

mod aspect;
mod parse;
mod stats;
mod xml;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use aspect::{Aspect, EditAspect, LabelMap, LabelMapError, UnknownAspect};
pub use parse::{parse_corpus, parse_document, parse_file};
pub use stats::{corpus_stats, AspectCount, CorpusStats, MetaBreakdown};
pub use xml::to_xml;

/// Inserted between sections when a whole document is materialized.
pub const SECTION_SEPARATOR: &str = "\n\n";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: malformed XML: {message}")]
    Xml {
        path: PathBuf,
        line: u32,
        column: u32,
        message: String,
    },
    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: u32, message: String },
    #[error("document {doc_id}: edit at offset {offset}: {message}")]
    Validation {
        doc_id: String,
        offset: usize,
        message: String,
    },
    #[error("unknown section {0:?}")]
    UnknownSection(String),
    #[error("edit index {index} out of range (document has {count} edits)")]
    EditIndex { index: usize, count: usize },
    #[error("no XML files found under {0}")]
    Empty(PathBuf),
}

/// Half-open `char` interval in whole-document source coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Overlap test where a zero-length span is a point: it overlaps any span
    /// containing its position, and another point only at the same position.
    pub fn overlaps(&self, other: &Span) -> bool {
        match (self.is_empty(), other.is_empty()) {
            (false, false) => self.start < other.end && other.start < self.end,
            (true, false) => other.start <= self.start && self.start < other.end,
            (false, true) => self.start <= other.start && other.start < self.end,
            (true, true) => self.start == other.start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    /// Source phrase; empty for an insertion.
    pub src: String,
    /// Revised phrase; empty for a deletion.
    pub tgt: String,
    pub labels: Vec<EditAspect>,
    pub comment: Option<String>,
    pub span: Span,
    /// Attributes other than `type`, `crr` and `comments`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl Edit {
    /// Builds an edit with a placeholder span; [`Document::new`] assigns the real one.
    pub fn new(src: impl Into<String>, tgt: impl Into<String>, labels: Vec<EditAspect>) -> Self {
        Self {
            src: src.into(),
            tgt: tgt.into(),
            labels,
            comment: None,
            span: Span::default(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Self {
        self.comment = Some(comment.into());
        self
    }

    pub fn is_insertion(&self) -> bool {
        self.src.is_empty()
    }

    pub fn is_deletion(&self) -> bool {
        self.tgt.is_empty()
    }

    pub fn aspects(&self) -> impl Iterator<Item = Aspect> + '_ {
        self.labels.iter().map(|l| l.aspect)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Text(String),
    Edit(Edit),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    Title,
    Abstract,
    Introduction,
}

impl SectionKind {
    pub fn tag(self) -> &'static str {
        match self {
            SectionKind::Title => "title",
            SectionKind::Abstract => "abstract",
            SectionKind::Introduction => "introduction",
        }
    }
}

impl FromStr for SectionKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "title" => Ok(SectionKind::Title),
            "abstract" => Ok(SectionKind::Abstract),
            "introduction" => Ok(SectionKind::Introduction),
            _ => Err(CorpusError::UnknownSection(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub nodes: Vec<Node>,
}

impl Section {
    pub fn new(kind: SectionKind, nodes: Vec<Node>) -> Self {
        Self { kind, nodes }
    }
}

macro_rules! two_valued {
    ($name:ident { $a:ident => $a_str:literal, $b:ident => $b_str:literal }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $a,
            $b,
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $name::$a => $a_str,
                    $name::$b => $b_str,
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                let norm: String = s
                    .chars()
                    .filter(|c| c.is_alphanumeric())
                    .collect::<String>()
                    .to_ascii_lowercase();
                let want = |lit: &str| {
                    lit.chars()
                        .filter(|c| c.is_alphanumeric())
                        .collect::<String>()
                        .to_ascii_lowercase()
                };
                if norm == want($a_str) {
                    Ok($name::$a)
                } else if norm == want($b_str) {
                    Ok($name::$b)
                } else {
                    Err(format!("expected {:?} or {:?}, got {:?}", $a_str, $b_str, s))
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

two_valued!(Format { Conference => "Conference", Workshop => "Workshop" });
two_valued!(Position { Student => "Student", NonStudent => "Non-student" });
two_valued!(Region { Native => "Native", NonNative => "Non-native" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Meta {
    pub format: Format,
    pub position: Position,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub editor: String,
    pub meta: Meta,
    /// Root attributes beyond the five required ones.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
    sections: Vec<Section>,
}

impl Document {
    /// Assembles a document, assigning edit spans and validating edits.
    pub fn new(
        id: impl Into<String>,
        editor: impl Into<String>,
        meta: Meta,
        sections: Vec<Section>,
    ) -> Result<Self, CorpusError> {
        let mut doc = Self {
            id: id.into(),
            editor: editor.into(),
            meta,
            extra: BTreeMap::new(),
            sections,
        };
        doc.assign_spans()?;
        Ok(doc)
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    fn assign_spans(&mut self) -> Result<(), CorpusError> {
        let sep = SECTION_SEPARATOR.chars().count();
        let mut offset = 0;
        for (si, section) in self.sections.iter_mut().enumerate() {
            if si > 0 {
                offset += sep;
            }
            for node in &mut section.nodes {
                match node {
                    Node::Text(t) => offset += t.chars().count(),
                    Node::Edit(e) => {
                        if e.src.is_empty() && e.tgt.is_empty() {
                            return Err(CorpusError::Validation {
                                doc_id: self.id.clone(),
                                offset,
                                message: "edit has neither source nor correction text".into(),
                            });
                        }
                        if e.labels.is_empty() {
                            return Err(CorpusError::Validation {
                                doc_id: self.id.clone(),
                                offset,
                                message: "edit has no type label".into(),
                            });
                        }
                        let len = e.src.chars().count();
                        e.span = Span::new(offset, offset + len);
                        offset += len;
                    }
                }
            }
        }
        Ok(())
    }

    /// Edits in document order.
    pub fn edits(&self) -> impl Iterator<Item = &Edit> {
        self.sections.iter().flat_map(|s| {
            s.nodes.iter().filter_map(|n| match n {
                Node::Edit(e) => Some(e),
                Node::Text(_) => None,
            })
        })
    }

    pub fn edit_count(&self) -> usize {
        self.edits().count()
    }

    pub fn edit(&self, index: usize) -> Result<&Edit, CorpusError> {
        self.edits().nth(index).ok_or(CorpusError::EditIndex {
            index,
            count: self.edit_count(),
        })
    }

    fn section_by_name(&self, name: &str) -> Result<&Section, CorpusError> {
        let kind: SectionKind = name.parse()?;
        self.sections
            .iter()
            .find(|s| s.kind == kind)
            .ok_or_else(|| CorpusError::UnknownSection(name.to_string()))
    }

    /// Source text of the whole document, or of one named section.
    pub fn source_text(&self, section: Option<&str>) -> Result<String, CorpusError> {
        self.materialize(section, Side::Source)
    }

    /// Revised text of the whole document, or of one named section.
    pub fn revised_text(&self, section: Option<&str>) -> Result<String, CorpusError> {
        self.materialize(section, Side::Revised)
    }

    fn materialize(&self, section: Option<&str>, side: Side) -> Result<String, CorpusError> {
        match section {
            Some(name) => Ok(render_section(self.section_by_name(name)?, side)),
            None => Ok(self
                .sections
                .iter()
                .map(|s| render_section(s, side))
                .collect::<Vec<_>>()
                .join(SECTION_SEPARATOR)),
        }
    }

    /// Returns `(source paragraph, paragraph with only this edit applied)`.
    pub fn apply_single_edit(&self, edit_index: usize) -> Result<(String, String), CorpusError> {
        let layout = self.layout();
        layout.single_edit_pair(edit_index)
    }

    pub fn layout(&self) -> Layout<'_> {
        Layout::new(self)
    }
}

#[derive(Clone, Copy)]
enum Side {
    Source,
    Revised,
}

fn render_section(section: &Section, side: Side) -> String {
    let mut out = String::new();
    for node in &section.nodes {
        match (node, side) {
            (Node::Text(t), _) => out.push_str(t),
            (Node::Edit(e), Side::Source) => out.push_str(&e.src),
            (Node::Edit(e), Side::Revised) => out.push_str(&e.tgt),
        }
    }
    out
}

/// A paragraph in whole-document source coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub section: usize,
    pub span: Span,
    /// Indices (document order) of edits inside this paragraph.
    pub edits: Vec<usize>,
}

/// Precomputed source text, paragraph boundaries and edit placement.
pub struct Layout<'a> {
    doc: &'a Document,
    source: String,
    /// Byte offset of every char boundary, plus the end.
    char_bytes: Vec<usize>,
    edits: Vec<&'a Edit>,
    paragraphs: Vec<Paragraph>,
    edit_paragraph: Vec<Option<usize>>,
}

impl<'a> Layout<'a> {
    fn new(doc: &'a Document) -> Self {
        let source = doc
            .source_text(None)
            .expect("whole-document materialization cannot fail");
        let mut char_bytes: Vec<usize> = source.char_indices().map(|(b, _)| b).collect();
        char_bytes.push(source.len());
        let edits: Vec<&Edit> = doc.edits().collect();

        let sep = SECTION_SEPARATOR.chars().count();
        let mut raw: Vec<(usize, Span)> = Vec::new();
        let mut offset = 0;
        for (si, section) in doc.sections.iter().enumerate() {
            if si > 0 {
                offset += sep;
            }
            let mut para_start = offset;
            for node in &section.nodes {
                match node {
                    Node::Text(t) => {
                        if section.kind != SectionKind::Title {
                            for (bs, be) in paragraph_breaks(t) {
                                raw.push((si, Span::new(para_start, offset + bs)));
                                para_start = offset + be;
                            }
                        }
                        offset += t.chars().count();
                    }
                    Node::Edit(e) => offset += e.src.chars().count(),
                }
            }
            raw.push((si, Span::new(para_start, offset)));
        }

        let mut paragraphs: Vec<Paragraph> = raw
            .into_iter()
            .map(|(section, span)| Paragraph {
                section,
                span,
                edits: Vec::new(),
            })
            .collect();
        let mut edit_paragraph = vec![None; edits.len()];
        for (ei, edit) in edits.iter().enumerate() {
            let pos = edit.span.start;
            if let Some(pi) = paragraphs
                .iter()
                .position(|p| p.span.start <= pos && pos <= p.span.end && edit.span.end <= p.span.end)
            {
                paragraphs[pi].edits.push(ei);
                edit_paragraph[ei] = Some(pi);
            }
        }

        // Drop blank paragraphs that carry no edits, then renumber.
        let mut keep_map = vec![None; paragraphs.len()];
        let mut kept = Vec::new();
        for (pi, p) in paragraphs.into_iter().enumerate() {
            let blank = {
                let s = &source[char_bytes[p.span.start]..char_bytes[p.span.end]];
                s.trim().is_empty()
            };
            if blank && p.edits.is_empty() {
                continue;
            }
            keep_map[pi] = Some(kept.len());
            kept.push(p);
        }
        for slot in &mut edit_paragraph {
            *slot = slot.and_then(|pi| keep_map[pi]);
        }

        Self {
            doc,
            source,
            char_bytes,
            edits,
            paragraphs: kept,
            edit_paragraph,
        }
    }

    pub fn document(&self) -> &'a Document {
        self.doc
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn edits(&self) -> &[&'a Edit] {
        &self.edits
    }

    pub fn paragraphs(&self) -> &[Paragraph] {
        &self.paragraphs
    }

    /// Paragraph index holding the edit, if it could be placed.
    pub fn paragraph_of(&self, edit_index: usize) -> Option<usize> {
        self.edit_paragraph.get(edit_index).copied().flatten()
    }

    /// Source substring for a char span.
    pub fn slice(&self, span: Span) -> &str {
        &self.source[self.char_bytes[span.start]..self.char_bytes[span.end]]
    }

    /// Trimmed source text of a paragraph.
    pub fn source_paragraph(&self, index: usize) -> &str {
        self.slice(self.paragraphs[index].span).trim()
    }

    /// Paragraph text with the listed edits applied and every other edit left at its source.
    pub fn paragraph_with(&self, index: usize, applied: impl Fn(usize) -> bool) -> String {
        let para = &self.paragraphs[index];
        let mut out = String::new();
        let mut cursor = para.span.start;
        for &ei in &para.edits {
            if !applied(ei) {
                continue;
            }
            let e = self.edits[ei];
            out.push_str(self.slice(Span::new(cursor, e.span.start)));
            out.push_str(&e.tgt);
            cursor = e.span.end;
        }
        out.push_str(self.slice(Span::new(cursor, para.span.end)));
        out.trim().to_string()
    }

    /// Paragraph with all of its edits applied.
    pub fn revised_paragraph(&self, index: usize) -> String {
        self.paragraph_with(index, |_| true)
    }

    pub fn single_edit_pair(&self, edit_index: usize) -> Result<(String, String), CorpusError> {
        if edit_index >= self.edits.len() {
            return Err(CorpusError::EditIndex {
                index: edit_index,
                count: self.edits.len(),
            });
        }
        let pi = self.paragraph_of(edit_index).ok_or(CorpusError::Validation {
            doc_id: self.doc.id.clone(),
            offset: self.edits[edit_index].span.start,
            message: "edit does not fall inside any paragraph".into(),
        })?;
        Ok((
            self.source_paragraph(pi).to_string(),
            self.paragraph_with(pi, |ei| ei == edit_index),
        ))
    }

    /// `(fully revised paragraph with one edit reverted, fully revised paragraph)`.
    pub fn reverted_edit_pair(&self, edit_index: usize) -> Result<(String, String), CorpusError> {
        let pi = self.paragraph_of(edit_index).ok_or(CorpusError::EditIndex {
            index: edit_index,
            count: self.edits.len(),
        })?;
        Ok((
            self.paragraph_with(pi, |ei| ei != edit_index),
            self.revised_paragraph(pi),
        ))
    }
}

/// Char ranges of paragraph breaks inside one text node: runs of two or more
/// newline markers (a real `\n`, or the two-character escape `\n` used by
/// some exports), optionally separated by spaces, tabs or carriage returns.
pub fn paragraph_breaks(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let marker_len = |i: usize| -> usize {
        match chars.get(i) {
            Some('\n') => 1,
            Some('\\') if chars.get(i + 1) == Some(&'n') => 2,
            _ => 0,
        }
    };
    let mut breaks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let first = marker_len(i);
        if first == 0 {
            i += 1;
            continue;
        }
        let start = i;
        let mut end = i + first;
        let mut markers = 1;
        let mut j = end;
        loop {
            while matches!(chars.get(j), Some(' ' | '\t' | '\r')) {
                j += 1;
            }
            let m = marker_len(j);
            if m == 0 {
                break;
            }
            markers += 1;
            j += m;
            end = j;
        }
        if markers >= 2 {
            breaks.push((start, end));
        }
        i = end;
    }
    breaks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Meta {
        Meta {
            format: Format::Conference,
            position: Position::Student,
            region: Region::Native,
        }
    }

    fn lbl(raw: &str) -> Vec<EditAspect> {
        vec![LabelMap::default().label(raw)]
    }

    fn doc(nodes: Vec<Node>) -> Document {
        Document::new("P1", "A", meta(), vec![Section::new(SectionKind::Abstract, nodes)]).unwrap()
    }

    #[test]
    fn materializes_both_sides() {
        let d = doc(vec![
            Node::Text("a ".into()),
            Node::Edit(Edit::new("b", "c", lbl("grammar"))),
            Node::Text(" d".into()),
        ]);
        assert_eq!(d.source_text(None).unwrap(), "a b d");
        assert_eq!(d.revised_text(None).unwrap(), "a c d");
        assert_eq!(d.edit(0).unwrap().span, Span::new(2, 3));
    }

    #[test]
    fn no_edit_document_is_identity() {
        let d = doc(vec![Node::Text("hi there".into())]);
        assert_eq!(d.source_text(None).unwrap(), "hi there");
        assert_eq!(d.revised_text(None).unwrap(), "hi there");
    }

    #[test]
    fn all_deletion_document_keeps_only_text() {
        let d = doc(vec![
            Node::Text("keep".into()),
            Node::Edit(Edit::new(" drop", "", lbl("redundancy"))),
            Node::Text(" this".into()),
        ]);
        assert_eq!(d.revised_text(None).unwrap(), "keep this");
    }

    #[test]
    fn empty_edit_is_rejected_with_offset() {
        let err = Document::new(
            "P9",
            "B",
            meta(),
            vec![Section::new(
                SectionKind::Abstract,
                vec![Node::Text("abc".into()), Node::Edit(Edit::new("", "", lbl("grammar")))],
            )],
        )
        .unwrap_err();
        match err {
            CorpusError::Validation { doc_id, offset, .. } => {
                assert_eq!(doc_id, "P9");
                assert_eq!(offset, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_edit_applied_within_paragraph() {
        let d = doc(vec![
            Node::Text("x ".into()),
            Node::Edit(Edit::new("a", "b", lbl("grammar"))),
            Node::Text(" y ".into()),
            Node::Edit(Edit::new("c", "d", lbl("style"))),
        ]);
        assert_eq!(d.apply_single_edit(0).unwrap(), ("x a y c".into(), "x b y c".into()));
        assert_eq!(d.apply_single_edit(1).unwrap(), ("x a y c".into(), "x a y d".into()));
        assert!(matches!(
            d.apply_single_edit(2),
            Err(CorpusError::EditIndex { index: 2, count: 2 })
        ));
    }

    #[test]
    fn insertion_lengthens_snippet_by_target() {
        let d = doc(vec![
            Node::Text("the cat".into()),
            Node::Edit(Edit::new("", " black", lbl("clarity"))),
            Node::Text(" sat".into()),
        ]);
        let (src, rev) = d.apply_single_edit(0).unwrap();
        assert_eq!(rev.chars().count(), src.chars().count() + " black".len());
    }

    #[test]
    fn paragraphs_split_on_blank_lines_and_sections() {
        let d = Document::new(
            "P1",
            "A",
            meta(),
            vec![
                Section::new(SectionKind::Abstract, vec![Node::Text("one".into())]),
                Section::new(
                    SectionKind::Introduction,
                    vec![
                        Node::Text("two\n\nthree ".into()),
                        Node::Edit(Edit::new("x", "y", lbl("grammar"))),
                        Node::Text("\\n\\n four".into()),
                    ],
                ),
            ],
        )
        .unwrap();
        let layout = d.layout();
        let texts: Vec<&str> = (0..layout.paragraphs().len())
            .map(|i| layout.source_paragraph(i))
            .collect();
        assert_eq!(texts, ["one", "two", "three x", "four"]);
        assert_eq!(layout.paragraph_of(0), Some(2));
        assert_eq!(layout.revised_paragraph(2), "three y");
    }

    #[test]
    fn title_is_one_paragraph() {
        let d = Document::new(
            "P1",
            "A",
            meta(),
            vec![Section::new(SectionKind::Title, vec![Node::Text("A\n\nB".into())])],
        )
        .unwrap();
        assert_eq!(d.layout().paragraphs().len(), 1);
    }

    #[test]
    fn breaks_require_two_markers() {
        assert_eq!(paragraph_breaks("a\nb"), vec![]);
        assert_eq!(paragraph_breaks("a\n\nb"), vec![(1, 3)]);
        assert_eq!(paragraph_breaks("a\n \n\nb"), vec![(1, 5)]);
        assert_eq!(paragraph_breaks("a\\n\\nb"), vec![(1, 5)]);
    }

    #[test]
    fn span_overlap_conventions() {
        let s = |a, b| Span::new(a, b);
        assert!(s(0, 5).overlaps(&s(3, 4)));
        assert!(!s(0, 5).overlaps(&s(5, 6)));
        assert!(s(3, 3).overlaps(&s(0, 5)));
        assert!(!s(5, 5).overlaps(&s(0, 5)));
        assert!(s(2, 2).overlaps(&s(2, 2)));
        assert!(!s(2, 2).overlaps(&s(3, 3)));
    }

    #[test]
    fn meta_values_parse_loosely() {
        assert_eq!("Non-student".parse::<Position>().unwrap(), Position::NonStudent);
        assert_eq!("non native".parse::<Region>().unwrap(), Region::NonNative);
        assert_eq!("WORKSHOP".parse::<Format>().unwrap(), Format::Workshop);
        assert!("journal".parse::<Format>().is_err());
    }
}
