//! Loading Microtext corpora from disk and writing canonical dumps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use argmine_core::corpus::{Corpus, StatsTable};
use argmine_core::dataset::to_jsonl;
use argmine_core::Language;
use rayon::prelude::*;
use serde::Serialize;

use crate::microtext::{parse_microtext, ParseOptions, ParsedDocument, QuarantinedEdge};

/// A problem with one input file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileError {
    pub path: PathBuf,
    pub code: String,
    pub message: String,
}

impl std::fmt::Display for FileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read corpus directory {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{} file(s) failed to load: {}", .0.len(), join_errors(.0))]
    Files(Vec<FileError>),
}

fn join_errors(errors: &[FileError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Debug)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    /// Files skipped in lenient mode.
    pub errors: Vec<FileError>,
    pub warnings: Vec<String>,
    pub quarantined: BTreeMap<String, Vec<QuarantinedEdge>>,
}

/// `*.xml` files directly inside `dir`, in lexicographic order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, LoadError> {
    let io = |source| LoadError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "xml") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn load_one(
    path: &Path,
    language: Language,
    options: ParseOptions,
) -> Result<ParsedDocument, FileError> {
    let err = |code: &str, message: String| FileError {
        path: path.to_path_buf(),
        code: code.to_string(),
        message,
    };
    let bytes = fs::read(path).map_err(|e| err("IO_ERROR", e.to_string()))?;
    let parsed =
        parse_microtext(&bytes, language, options).map_err(|e| err(e.code(), e.to_string()))?;
    if !parsed.report.ok {
        return Err(err(
            "VALIDATION_ERROR",
            format!("{}: {}", parsed.graph.doc_id, parsed.report.summary()),
        ));
    }
    Ok(parsed)
}

/// Parses every document file in `dir`. Files are parsed in parallel and
/// merged by document id. In strict mode any failing file fails the load,
/// with every failure listed; in lenient mode failures are returned as
/// error records next to the documents that did load.
pub fn load_corpus(
    dir: &Path,
    language: Language,
    options: ParseOptions,
) -> Result<LoadedCorpus, LoadError> {
    let files = corpus_files(dir)?;
    let results: Vec<Result<ParsedDocument, FileError>> = files
        .par_iter()
        .map(|p| load_one(p, language, options))
        .collect();

    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut quarantined = BTreeMap::new();
    let mut docs: BTreeMap<String, (PathBuf, ParsedDocument)> = BTreeMap::new();
    for (path, result) in files.iter().zip(results) {
        match result {
            Ok(parsed) => {
                let id = parsed.graph.doc_id.clone();
                if let Some((first, _)) = docs.get(&id) {
                    errors.push(FileError {
                        path: path.clone(),
                        code: "SCHEMA_ERROR".into(),
                        message: format!(
                            "duplicate document id `{id}` (first in {})",
                            first.display()
                        ),
                    });
                    continue;
                }
                docs.insert(id, (path.clone(), parsed));
            }
            Err(e) => errors.push(e),
        }
    }
    if options.strict && !errors.is_empty() {
        return Err(LoadError::Files(errors));
    }
    if files.is_empty() {
        warnings.push(format!("no document files in {}", dir.display()));
    }
    let mut documents = Vec::with_capacity(docs.len());
    for (id, (_, parsed)) in docs {
        warnings.extend(parsed.warnings);
        if !parsed.quarantined.is_empty() {
            quarantined.insert(id, parsed.quarantined);
        }
        documents.push(parsed.graph);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    log::info!(
        "loaded {} {} documents from {}",
        documents.len(),
        language.upper(),
        dir.display()
    );
    Ok(LoadedCorpus {
        corpus: Corpus::new(language, documents),
        errors,
        warnings,
        quarantined,
    })
}

/// One JSON object per document, keys sorted.
pub fn corpus_jsonl(corpus: &Corpus) -> String {
    to_jsonl(&corpus.documents)
}

/// Aligned text table with one column per corpus.
pub fn render_stats_table(columns: &[(&str, &StatsTable)]) -> String {
    let mut rows: Vec<Vec<String>> = vec![std::iter::once(String::new())
        .chain(columns.iter().map(|(name, _)| name.to_string()))
        .collect()];
    for (i, label) in StatsTable::ROW_LABELS.iter().enumerate() {
        let mut row = vec![label.to_string()];
        row.extend(columns.iter().map(|(_, t)| t.rows()[i].to_string()));
        rows.push(row);
    }
    render_columns(&rows, 1)
}

/// Left-aligns the first `left` columns and right-aligns the rest.
pub fn render_columns(rows: &[Vec<String>], left: usize) -> String {
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c < left {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
