//! brat standoff annotations of the Persuasive Essays corpus.
//!
//! Three line kinds are read, with tab-separated fields: `T` lines give a
//! component kind with its character span (end exclusive) and text, `A`
//! lines attach a `Stance ... For|Against` attribute to a Claim, and `R`
//! lines read `supports|attacks Arg1:<id> Arg2:<id>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use argmine_core::pe::{
    ClaimStance, Component, ComponentKind, PeDocument, PeRelation, PeRelationKind,
};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PeParseError {
    #[error("FORMAT_ERROR: line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("OFFSET_ERROR: component `{id}` span {start}..{end} does not match the essay text")]
    Offset {
        id: String,
        start: usize,
        end: usize,
    },
    #[error("DANGLING_RELATION: `{0}` refers to an unknown component")]
    DanglingRelation(String),
    #[error("MISSING_STANCE: Claim `{0}` has no for/against attribute")]
    MissingStance(String),
}

impl PeParseError {
    pub fn code(&self) -> &'static str {
        match self {
            PeParseError::Format { .. } => "FORMAT_ERROR",
            PeParseError::Offset { .. } => "OFFSET_ERROR",
            PeParseError::DanglingRelation(_) => "DANGLING_RELATION",
            PeParseError::MissingStance(_) => "MISSING_STANCE",
        }
    }
}

fn kind_of(name: &str) -> Option<ComponentKind> {
    match name {
        "MajorClaim" => Some(ComponentKind::MajorClaim),
        "Claim" => Some(ComponentKind::Claim),
        "Premise" => Some(ComponentKind::Premise),
        _ => None,
    }
}

fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()));
    let a = indices.nth(start)?;
    let b = if end == start {
        a
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[a..b])
}

pub fn parse_pe(
    essay_id: &str,
    ann_text: &str,
    essay_text: &str,
) -> Result<PeDocument, PeParseError> {
    let mut doc = PeDocument {
        essay_id: essay_id.to_string(),
        ..PeDocument::default()
    };
    let mut stance_attrs: Vec<(usize, String, ClaimStance)> = Vec::new();
    let format = |line: usize, message: String| PeParseError::Format { line, message };

    for (i, raw) in ann_text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default();
        let body = fields
            .next()
            .ok_or_else(|| format(line_no, format!("no tab after `{id}`")))?;
        match id.chars().next() {
            Some('T') => {
                let mut parts = body.split(' ');
                let kind_name = parts.next().unwrap_or_default();
                let Some(kind) = kind_of(kind_name) else {
                    log::debug!("{essay_id}: skipping {kind_name} span {id}");
                    continue;
                };
                let num = |s: Option<&str>| -> Result<usize, PeParseError> {
                    s.and_then(|s| s.parse().ok())
                        .ok_or_else(|| format(line_no, format!("bad offsets in `{body}`")))
                };
                let start = num(parts.next())?;
                let end = num(parts.next())?;
                let text = fields.next().unwrap_or_default();
                match char_slice(essay_text, start, end) {
                    Some(s) if s == text => {}
                    _ => {
                        return Err(PeParseError::Offset {
                            id: id.to_string(),
                            start,
                            end,
                        })
                    }
                }
                doc.components.push(Component {
                    id: id.to_string(),
                    kind,
                    span: (start, end),
                    text: text.to_string(),
                });
            }
            Some('A') => {
                let parts: Vec<&str> = body.split(' ').collect();
                if parts.first() != Some(&"Stance") {
                    continue;
                }
                let [_, target, value] = parts[..] else {
                    return Err(format(line_no, format!("bad attribute `{body}`")));
                };
                let stance = match value {
                    "For" | "for" => ClaimStance::For,
                    "Against" | "against" => ClaimStance::Against,
                    _ => return Err(format(line_no, format!("unknown stance `{value}`"))),
                };
                stance_attrs.push((line_no, target.to_string(), stance));
            }
            Some('R') => {
                let parts: Vec<&str> = body.split(' ').collect();
                let [kind, arg1, arg2] = parts[..] else {
                    return Err(format(line_no, format!("bad relation `{body}`")));
                };
                let kind = match kind {
                    "supports" => PeRelationKind::Support,
                    "attacks" => PeRelationKind::Attack,
                    _ => return Err(format(line_no, format!("unknown relation `{kind}`"))),
                };
                let arg = |a: &str, name: &str| {
                    a.strip_prefix(name)
                        .map(str::to_string)
                        .ok_or_else(|| format(line_no, format!("expected {name}… in `{body}`")))
                };
                doc.relations.push(PeRelation {
                    id: id.to_string(),
                    source_id: arg(arg1, "Arg1:")?,
                    target_id: arg(arg2, "Arg2:")?,
                    kind,
                });
            }
            _ => log::debug!("{essay_id}: ignoring annotation line {line_no}"),
        }
    }

    for r in &doc.relations {
        if doc.component(&r.source_id).is_none() || doc.component(&r.target_id).is_none() {
            return Err(PeParseError::DanglingRelation(r.id.clone()));
        }
    }
    for (line, target, stance) in stance_attrs {
        if doc.component(&target).is_none() {
            return Err(format(
                line,
                format!("stance for unknown component `{target}`"),
            ));
        }
        doc.claim_stances.insert(target, stance);
    }
    for c in &doc.components {
        if c.kind == ComponentKind::Claim && !doc.claim_stances.contains_key(&c.id) {
            return Err(PeParseError::MissingStance(c.id.clone()));
        }
    }
    Ok(doc)
}

/// Writes the document back as standoff lines: components, stances,
/// relations.
pub fn to_ann(doc: &PeDocument) -> String {
    let mut out = String::new();
    for c in &doc.components {
        let _ = writeln!(
            out,
            "{}\t{} {} {}\t{}",
            c.id,
            c.kind.as_str(),
            c.span.0,
            c.span.1,
            c.text
        );
    }
    for (i, (id, stance)) in doc.claim_stances.iter().enumerate() {
        let value = match stance {
            ClaimStance::For => "For",
            ClaimStance::Against => "Against",
        };
        let _ = writeln!(out, "A{}\tStance {id} {value}", i + 1);
    }
    for r in &doc.relations {
        let kind = match r.kind {
            PeRelationKind::Support => "supports",
            PeRelationKind::Attack => "attacks",
        };
        let _ = writeln!(
            out,
            "{}\t{kind} Arg1:{} Arg2:{}",
            r.id, r.source_id, r.target_id
        );
    }
    out
}

/// Paragraphs of an essay: non-blank lines after the title line.
pub fn paragraph_count(essay_text: &str) -> usize {
    essay_text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .skip(1)
        .count()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PeSummary {
    pub essays: usize,
    pub paragraphs: usize,
    pub components: BTreeMap<String, usize>,
    pub relations: usize,
}

#[derive(Clone, Debug)]
pub struct PeEssay {
    pub document: PeDocument,
    pub text: String,
    pub path: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum PeLoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: PeParseError },
}

/// Loads every `<name>.ann` with a sibling `<name>.txt`, sorted by name.
pub fn load_pe_dir(dir: &Path) -> Result<(Vec<PeEssay>, PeSummary), PeLoadError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PeLoadError::Io { path, source }
    };
    let mut anns: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ann"))
        .collect();
    anns.sort();
    let mut essays = Vec::new();
    let mut summary = PeSummary::default();
    for ann in anns {
        let txt = ann.with_extension("txt");
        let ann_text = fs::read_to_string(&ann).map_err(io(&ann))?;
        let text = fs::read_to_string(&txt).map_err(io(&txt))?;
        let id = ann
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let document = parse_pe(&id, &ann_text, &text).map_err(|source| PeLoadError::Parse {
            path: ann.clone(),
            source,
        })?;
        summary.essays += 1;
        summary.paragraphs += paragraph_count(&text);
        summary.relations += document.relations.len();
        for c in &document.components {
            *summary
                .components
                .entry(c.kind.as_str().to_string())
                .or_default() += 1;
        }
        essays.push(PeEssay {
            document,
            text,
            path: ann,
        });
    }
    log::info!(
        "loaded {} essays ({} paragraphs) from {}",
        summary.essays,
        summary.paragraphs,
        dir.display()
    );
    Ok((essays, summary))
}
