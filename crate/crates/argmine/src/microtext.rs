//! Microtext `arggraph` XML.
//!
//! ```xml
//! <arggraph id="micro_b001" topic_id="waste_separation">
//!   <edu id="e1"><![CDATA[Yes, it's annoying ...]]></edu>
//!   <adu id="a1" type="opp"/>
//!   <edge id="c6" src="e1" trg="a1" type="seg"/>
//!   <edge id="c1" src="a1" trg="a5" type="reb"/>
//! </arggraph>
//! ```
//!
//! An edge whose `trg` is another edge's id targets that edge (undercuts).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use argmine_core::graph::{validate_graph_with, ValidationPolicy, ValidationReport};
use argmine_core::{Adu, ArgumentGraph, Edge, EdgeTarget, Edu, Language, RelationType, Stance};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MicrotextError {
    #[error("PARSE_ERROR: {0}")]
    Parse(String),
    #[error("SCHEMA_ERROR: {0}")]
    Schema(String),
    #[error("VALIDATION_ERROR: {doc_id}: {summary}")]
    Validation {
        doc_id: String,
        summary: String,
        report: ValidationReport,
    },
}

impl MicrotextError {
    pub fn code(&self) -> &'static str {
        match self {
            MicrotextError::Parse(_) => "PARSE_ERROR",
            MicrotextError::Schema(_) => "SCHEMA_ERROR",
            MicrotextError::Validation { .. } => "VALIDATION_ERROR",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ParseOptions {
    /// Strict mode rejects unknown relation types and invalid graphs.
    pub strict: bool,
    pub policy: ValidationPolicy,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            strict: true,
            policy: ValidationPolicy {
                multiple_outgoing_is_warning: true,
            },
        }
    }
}

impl ParseOptions {
    pub fn lenient() -> Self {
        ParseOptions {
            strict: false,
            ..ParseOptions::default()
        }
    }
}

/// An edge dropped in lenient mode because its type is outside the scheme.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedEdge {
    pub id: String,
    pub type_name: String,
    pub src: String,
    pub trg: String,
}

#[derive(Clone, Debug)]
pub struct ParsedDocument {
    pub graph: ArgumentGraph,
    pub report: ValidationReport,
    pub quarantined: Vec<QuarantinedEdge>,
    pub warnings: Vec<String>,
}

fn attr<'a>(node: roxmltree::Node<'a, '_>, name: &str) -> Result<&'a str, MicrotextError> {
    node.attribute(name).ok_or_else(|| {
        MicrotextError::Schema(format!(
            "<{}> at byte {} lacks `{name}`",
            node.tag_name().name(),
            node.range().start
        ))
    })
}

pub fn parse_microtext(
    xml: &[u8],
    language: Language,
    options: ParseOptions,
) -> Result<ParsedDocument, MicrotextError> {
    let text = std::str::from_utf8(xml).map_err(|e| MicrotextError::Parse(e.to_string()))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| MicrotextError::Parse(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "arggraph" {
        return Err(MicrotextError::Schema(format!(
            "root element is <{}>, expected <arggraph>",
            root.tag_name().name()
        )));
    }
    let doc_id = attr(root, "id")?.to_string();
    let mut graph = ArgumentGraph {
        doc_id: doc_id.clone(),
        language,
        topic: root.attribute("topic_id").map(str::to_string),
        edus: Vec::new(),
        adus: Vec::new(),
        edges: Vec::new(),
    };
    let mut quarantined = Vec::new();
    let mut warnings = Vec::new();

    let edge_ids: BTreeSet<&str> = root
        .children()
        .filter(|n| n.has_tag_name("edge"))
        .filter_map(|n| n.attribute("id"))
        .collect();

    for node in root.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "edu" => {
                let text: String = node
                    .descendants()
                    .filter(|d| d.is_text())
                    .filter_map(|d| d.text())
                    .collect();
                graph.edus.push(Edu {
                    id: attr(node, "id")?.to_string(),
                    text: text.trim().to_string(),
                });
            }
            "adu" => {
                let id = attr(node, "id")?;
                let kind = attr(node, "type")?;
                let stance: Stance = kind.parse().map_err(|_| {
                    MicrotextError::Schema(format!("ADU `{id}` has unknown type `{kind}`"))
                })?;
                graph.adus.push(Adu {
                    id: id.to_string(),
                    stance,
                });
            }
            "edge" => {
                let id = attr(node, "id")?;
                let src = attr(node, "src")?;
                let trg = attr(node, "trg")?;
                let kind = attr(node, "type")?;
                let rel: RelationType = match kind.parse() {
                    Ok(rel) => rel,
                    Err(_) if !options.strict => {
                        warnings.push(format!(
                            "{doc_id}: quarantined edge `{id}` of type `{kind}`"
                        ));
                        quarantined.push(QuarantinedEdge {
                            id: id.to_string(),
                            type_name: kind.to_string(),
                            src: src.to_string(),
                            trg: trg.to_string(),
                        });
                        continue;
                    }
                    Err(_) => {
                        return Err(MicrotextError::Schema(format!(
                            "edge `{id}` has unknown type `{kind}`"
                        )))
                    }
                };
                let target = if edge_ids.contains(trg) {
                    EdgeTarget::Edge(trg.to_string())
                } else {
                    EdgeTarget::Node(trg.to_string())
                };
                graph.edges.push(Edge {
                    id: id.to_string(),
                    rel,
                    source: src.to_string(),
                    target,
                });
            }
            other => warnings.push(format!("{doc_id}: ignored element <{other}>")),
        }
    }

    let report = validate_graph_with(&graph, options.policy);
    if options.strict && !report.ok {
        return Err(MicrotextError::Validation {
            doc_id,
            summary: report.summary(),
            report,
        });
    }
    for w in &report.warnings {
        warnings.push(format!(
            "{}: {} at `{}`",
            graph.doc_id, w.code, w.offending_id
        ));
    }
    Ok(ParsedDocument {
        graph,
        report,
        quarantined,
        warnings,
    })
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn cdata(s: &str) -> String {
    format!("<![CDATA[{}]]>", s.replace("]]>", "]]]]><![CDATA[>"))
}

fn stance_code(s: Stance) -> &'static str {
    match s {
        Stance::Pro => "pro",
        Stance::Con => "opp",
    }
}

pub fn to_microtext_xml(g: &ArgumentGraph) -> String {
    let mut out = String::from("<?xml version='1.0' encoding='UTF-8'?>\n");
    let _ = write!(out, "<arggraph id=\"{}\"", escape_attr(&g.doc_id));
    if let Some(topic) = &g.topic {
        let _ = write!(out, " topic_id=\"{}\"", escape_attr(topic));
    }
    out.push_str(">\n");
    for e in &g.edus {
        let _ = writeln!(
            out,
            "  <edu id=\"{}\">{}</edu>",
            escape_attr(&e.id),
            cdata(&e.text)
        );
    }
    for a in &g.adus {
        let _ = writeln!(
            out,
            "  <adu id=\"{}\" type=\"{}\"/>",
            escape_attr(&a.id),
            stance_code(a.stance)
        );
    }
    for e in &g.edges {
        let _ = writeln!(
            out,
            "  <edge id=\"{}\" src=\"{}\" trg=\"{}\" type=\"{}\"/>",
            escape_attr(&e.id),
            escape_attr(&e.source),
            escape_attr(e.target.id()),
            e.rel.microtext_code()
        );
    }
    out.push_str("</arggraph>\n");
    out
}
