use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use roxmltree::{Node as XmlNode, NodeType};

use super::{CorpusError, Document, Edit, LabelMap, Meta, Node, Section, SectionKind};

const DOC_ATTRS: [&str; 5] = ["id", "editor", "format", "position", "region"];
const EDIT_ATTRS: [&str; 3] = ["type", "crr", "comments"];

/// Parses one XML file, or every `*.xml` file under a directory (recursively,
/// in path order).
pub fn parse_corpus(path: impl AsRef<Path>, labels: &LabelMap) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    if path.is_file() {
        return Ok(vec![parse_file(path, labels)?]);
    }
    let mut files = Vec::new();
    collect_xml(path, &mut files)?;
    if files.is_empty() {
        return Err(CorpusError::Empty(path.to_path_buf()));
    }
    files.sort();
    files.iter().map(|f| parse_file(f, labels)).collect()
}

fn collect_xml(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    };
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_dir() {
            collect_xml(&path, out)?;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
            out.push(path);
        }
    }
    Ok(())
}

pub fn parse_file(path: impl AsRef<Path>, labels: &LabelMap) -> Result<Document, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_document(&text, path, labels)
}

/// Parses a document from an XML string; `origin` is only used in error messages.
pub fn parse_document(text: &str, origin: impl AsRef<Path>, labels: &LabelMap) -> Result<Document, CorpusError> {
    let origin = origin.as_ref();
    let xml = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        CorpusError::Xml {
            path: origin.to_path_buf(),
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let ctx = Ctx {
        path: origin,
        xml: &xml,
    };
    let root = xml.root_element();
    if root.tag_name().name() != "doc" {
        return Err(ctx.schema(
            root,
            format!("root element must be <doc>, found <{}>", root.tag_name().name()),
        ));
    }

    let attr = |name: &str| {
        root.attribute(name)
            .ok_or_else(|| ctx.schema(root, format!("<doc> is missing required attribute `{name}`")))
    };
    let id = attr("id")?;
    let editor = attr("editor")?;
    let meta = Meta {
        format: attr("format")?
            .parse()
            .map_err(|m| ctx.schema(root, format!("attribute `format`: {m}")))?,
        position: attr("position")?
            .parse()
            .map_err(|m| ctx.schema(root, format!("attribute `position`: {m}")))?,
        region: attr("region")?
            .parse()
            .map_err(|m| ctx.schema(root, format!("attribute `region`: {m}")))?,
    };

    let mut sections = Vec::new();
    for child in root.children() {
        match child.node_type() {
            NodeType::Element => {
                let kind: SectionKind = child.tag_name().name().parse().map_err(|_| {
                    ctx.schema(
                        child,
                        format!("unexpected element <{}> inside <doc>", child.tag_name().name()),
                    )
                })?;
                sections.push(Section::new(kind, ctx.section_nodes(child, labels)?));
            }
            NodeType::Text => ctx.expect_blank(child, "<doc>")?,
            _ => {}
        }
    }

    let mut doc = Document::new(id, editor, meta, sections)?;
    doc.extra = extra_attrs(root, &DOC_ATTRS);
    Ok(doc)
}

struct Ctx<'a, 'input> {
    path: &'a Path,
    xml: &'a roxmltree::Document<'input>,
}

impl Ctx<'_, '_> {
    fn schema(&self, node: XmlNode, message: String) -> CorpusError {
        CorpusError::Schema {
            path: self.path.to_path_buf(),
            line: self.xml.text_pos_at(node.range().start).row,
            message,
        }
    }

    fn expect_blank(&self, node: XmlNode, parent: &str) -> Result<(), CorpusError> {
        match node.text() {
            Some(t) if !t.trim().is_empty() => {
                Err(self.schema(node, format!("stray text {:?} directly inside {parent}", truncate(t))))
            }
            _ => Ok(()),
        }
    }

    fn section_nodes(&self, section: XmlNode, labels: &LabelMap) -> Result<Vec<Node>, CorpusError> {
        let mut nodes = Vec::new();
        for child in section.children() {
            match child.node_type() {
                NodeType::Element => match child.tag_name().name() {
                    "text" => nodes.push(Node::Text(self.leaf_text(child)?)),
                    "edit" => nodes.push(Node::Edit(self.edit(child, labels)?)),
                    other => {
                        return Err(self.schema(
                            child,
                            format!("unexpected element <{other}> inside <{}>", section.tag_name().name()),
                        ))
                    }
                },
                NodeType::Text => self.expect_blank(child, &format!("<{}>", section.tag_name().name()))?,
                _ => {}
            }
        }
        Ok(nodes)
    }

    /// Text content of a leaf element; nested elements exceed the depth limit.
    fn leaf_text(&self, node: XmlNode) -> Result<String, CorpusError> {
        let mut out = String::new();
        for child in node.children() {
            match child.node_type() {
                NodeType::Text => out.push_str(child.text().unwrap_or_default()),
                NodeType::Element => {
                    return Err(self.schema(
                        child,
                        format!(
                            "element <{}> nested inside <{}>: tags may nest at most two levels below <doc>",
                            child.tag_name().name(),
                            node.tag_name().name()
                        ),
                    ))
                }
                _ => {}
            }
        }
        Ok(out)
    }

    fn edit(&self, node: XmlNode, labels: &LabelMap) -> Result<Edit, CorpusError> {
        let kind = node
            .attribute("type")
            .ok_or_else(|| self.schema(node, "<edit> is missing required attribute `type`".into()))?;
        let crr = node
            .attribute("crr")
            .ok_or_else(|| self.schema(node, "<edit> is missing required attribute `crr`".into()))?;
        let aspects: Vec<_> = kind
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| labels.label(l))
            .collect();
        if aspects.is_empty() {
            return Err(self.schema(node, "<edit> attribute `type` holds no label".into()));
        }
        let mut edit = Edit::new(self.leaf_text(node)?, crr, aspects);
        edit.comment = node.attribute("comments").map(str::to_string);
        edit.extra = extra_attrs(node, &EDIT_ATTRS);
        Ok(edit)
    }
}

fn extra_attrs(node: XmlNode, known: &[&str]) -> BTreeMap<String, String> {
    node.attributes()
        .filter(|a| !known.contains(&a.name()))
        .map(|a| (a.name().to_string(), a.value().to_string()))
        .collect()
}

fn truncate(s: &str) -> String {
    let t = s.trim();
    if t.chars().count() > 40 {
        format!("{}...", t.chars().take(40).collect::<String>())
    } else {
        t.to_string()
    }
}
