use std::fmt::Write;

use super::{Document, Node};

/// Serializes a document to the corpus XML schema (UTF-8, attributes in
/// schema order followed by any preserved extras).
pub fn to_xml(doc: &Document) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<doc");
    for (name, value) in [
        ("id", doc.id.as_str()),
        ("editor", doc.editor.as_str()),
        ("format", doc.meta.format.as_str()),
        ("position", doc.meta.position.as_str()),
        ("region", doc.meta.region.as_str()),
    ] {
        push_attr(&mut out, name, value);
    }
    for (name, value) in &doc.extra {
        push_attr(&mut out, name, value);
    }
    out.push_str(">\n");

    for section in doc.sections() {
        let tag = section.kind.tag();
        let _ = writeln!(out, "<{tag}>");
        for node in &section.nodes {
            match node {
                Node::Text(t) => {
                    out.push_str("<text>");
                    push_text(&mut out, t);
                    out.push_str("</text>\n");
                }
                Node::Edit(e) => {
                    out.push_str("<edit");
                    let labels = e
                        .labels
                        .iter()
                        .map(|l| l.raw_label.as_str())
                        .collect::<Vec<_>>()
                        .join(", ");
                    push_attr(&mut out, "type", &labels);
                    push_attr(&mut out, "crr", &e.tgt);
                    if let Some(c) = &e.comment {
                        push_attr(&mut out, "comments", c);
                    }
                    for (name, value) in &e.extra {
                        push_attr(&mut out, name, value);
                    }
                    out.push('>');
                    push_text(&mut out, &e.src);
                    out.push_str("</edit>\n");
                }
            }
        }
        let _ = writeln!(out, "</{tag}>");
    }
    out.push_str("</doc>\n");
    out
}

fn push_attr(out: &mut String, name: &str, value: &str) {
    let _ = write!(out, " {name}=\"");
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            // attribute-value normalization would turn these into spaces
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn push_text(out: &mut String, text: &str) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}
