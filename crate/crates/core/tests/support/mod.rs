//! Shared helpers for integration tests: fixture paths and a template-driven
//! generator for corpora in the same XML shape as the hand-authored fixture.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reveval::corpus::{parse_document, Document, LabelMap};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn fixture_dir() -> PathBuf {
    data_dir().join("fixture_corpus")
}

/// The bundled prose text, one paragraph per line.
pub fn prose() -> String {
    std::fs::read_to_string(data_dir().join("prose.txt")).expect("prose.txt")
}

const SUBJECTS: &[&str] = &[
    "the editor",
    "a reader",
    "the author",
    "an annotator",
    "the committee",
    "a student",
    "the baker",
    "the harbour master",
    "a volunteer",
    "the teacher",
    "the crew",
    "an old fisherman",
    "the researcher",
];
const VERBS: &[&str] = &[
    "checked",
    "described",
    "improved",
    "explained",
    "measured",
    "collected",
    "painted",
    "repaired",
    "reviewed",
    "carried",
    "opened",
    "recorded",
    "answered",
    "counted",
];
const OBJECTS: &[&str] = &[
    "the draft",
    "a new method",
    "the results",
    "an old boat",
    "the long report",
    "the samples",
    "a short letter",
    "the nets",
    "the bread",
    "an early version",
    "the figures",
    "the path",
    "a small museum",
    "the logbook",
];
const PLACES: &[&str] = &[
    "in the morning",
    "on the quay",
    "for the museum",
    "with great care",
    "at the end of the day",
    "to the school",
    "in the old hall",
    "on the cliff path",
    "for the next issue",
    "with the other editors",
    "at the harbour",
    "of the town",
];
const CLAUSES: &[&str] = &[
    "and the others agreed",
    "but nobody noticed the change",
    "which took most of the week",
    "that the town had ordered",
    "while the boats were out",
];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let pick = |rng: &mut ChaCha8Rng, xs: &[&'static str]| *xs.choose(rng).expect("nonempty");
    let mut s = format!(
        "{} {} {} {}",
        pick(rng, SUBJECTS),
        pick(rng, VERBS),
        pick(rng, OBJECTS),
        pick(rng, PLACES)
    );
    if rng.gen_bool(0.4) {
        s.push_str(", ");
        s.push_str(pick(rng, CLAUSES));
    }
    s.push('.');
    let mut chars = s.chars();
    let first = chars.next().expect("nonempty").to_uppercase();
    first.chain(chars).collect()
}

/// One paragraph of template prose.
pub fn paragraph(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(3..=5);
    (0..n).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;")
}

/// XML for one generated paper: an abstract paragraph and `paragraphs - 1`
/// introduction paragraphs, each carrying one clarity edit on its first
/// object phrase.
pub fn template_xml(id: &str, editor: &str, paragraphs: usize, rng: &mut ChaCha8Rng) -> String {
    let mut body = Vec::new();
    for _ in 0..paragraphs {
        let text = paragraph(rng);
        let object = OBJECTS
            .iter()
            .find(|o| text.contains(*o))
            .expect("every sentence has an object");
        let at = text.find(object).expect("found above");
        let (before, after) = (&text[..at], &text[at + object.len()..]);
        let noun = object.rsplit(' ').next().expect("nonempty");
        body.push(format!(
            "<text>{}</text><edit type=\"clarity\" crr=\"{}\" comments=\"\">{}</edit><text>{}</text>",
            escape(before),
            escape(&format!("this {noun}")),
            escape(object),
            escape(after)
        ));
    }
    let (first, rest) = body.split_first().expect("at least one paragraph");
    let intro = rest.join("<text>\n\n</text>");
    let mut xml = format!(
        "<doc id=\"{id}\" editor=\"{editor}\" format=\"Conference\" position=\"Student\" region=\"Native\">\n<abstract>{first}</abstract>\n"
    );
    if !intro.is_empty() {
        xml.push_str(&format!("<introduction>{intro}</introduction>\n"));
    }
    xml.push_str("</doc>\n");
    xml
}

/// `papers` generated documents with `paragraphs` paragraphs each.
pub fn template_corpus(papers: usize, paragraphs: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..papers)
        .map(|i| {
            let id = format!("G{seed}-{i:04}");
            let xml = template_xml(&id, "A", paragraphs, &mut rng);
            parse_document(&xml, format!("{id}.xml"), &LabelMap::default()).expect("generated XML parses")
        })
        .collect()
}
