//! Classification metrics, results tables and case-study reports.
//!
//! Precision, recall and F1 are computed per class from a confusion matrix
//! (rows gold, columns predicted); any zero denominator yields 0. Macro
//! scores are the unweighted mean over all classes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::dataset::Scenario;
use crate::graph::{ArgumentGraph, EdgeTarget, Language, RelationLabel, Stance};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{golds} gold labels but {preds} predictions")]
    LengthMismatch { golds: usize, preds: usize },
    #[error("label `{0}` is not one of the evaluated classes")]
    UnknownLabel(String),
    #[error("no prediction from `{model}` for `{id}`")]
    MissingPrediction { model: String, id: String },
    #[error("nothing to evaluate")]
    EmptySplit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[gold][predicted]`
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

pub fn confusion<T: PartialEq + Display>(
    golds: &[T],
    preds: &[T],
    classes: &[T],
) -> Result<ConfusionMatrix, EvalError> {
    if golds.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            golds: golds.len(),
            preds: preds.len(),
        });
    }
    let index = |label: &T| {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| EvalError::UnknownLabel(label.to_string()))
    };
    let k = classes.len();
    let mut counts = vec![vec![0usize; k]; k];
    for (g, p) in golds.iter().zip(preds) {
        counts[index(g)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.iter().map(|c| c.to_string()).collect(),
        counts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// In class order of the confusion matrix.
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.classes.len())
        .map(|i| {
            let tp = cm.counts[i][i];
            let precision = ratio(tp, cm.predicted(i));
            let recall = ratio(tp, cm.support(i));
            ClassMetrics {
                label: cm.classes[i].clone(),
                precision,
                recall,
                f1: harmonic_mean(precision, recall),
                support: cm.support(i),
            }
        })
        .collect()
}

/// Unweighted mean over classes; all zeros for an empty slice.
pub fn macro_average(per_class: &[ClassMetrics]) -> MacroMetrics {
    if per_class.is_empty() {
        return MacroMetrics::default();
    }
    let n = per_class.len() as f64;
    MacroMetrics {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / n,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / n,
    }
}

pub fn metrics_report(cm: ConfusionMatrix) -> MetricsReport {
    let per_class = per_class_metrics(&cm);
    MetricsReport {
        macro_avg: macro_average(&per_class),
        per_class,
        confusion: cm,
    }
}

pub fn evaluate_predictions<T: PartialEq + Display>(
    golds: &[T],
    preds: &[T],
    classes: &[T],
) -> Result<MetricsReport, EvalError> {
    if golds.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    Ok(metrics_report(confusion(golds, preds, classes)?))
}

/// A fraction as a percentage with one decimal, rounding half up.
pub fn percent(x: f64) -> String {
    let tenths = (x * 1000.0 + 0.5 + 1e-9) as i64;
    format!("{}.{}", tenths / 10, tenths % 10)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: Scenario,
    /// Generator behind an augmented model, e.g. `GPT`.
    #[serde(default)]
    pub model: Option<String>,
    pub eval_set: Language,
    pub report: MetricsReport,
}

impl ResultRow {
    pub fn model_label(&self) -> String {
        match &self.model {
            Some(m) => format!("{} {}", self.scenario.display_name(), m),
            None => self.scenario.display_name().to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RenderedTable {
    pub text: String,
    pub warnings: Vec<String>,
}

fn ordered(rows: &[ResultRow]) -> (Vec<&ResultRow>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut kept: Vec<(usize, &ResultRow)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.report.per_class.is_empty() {
            warnings.push(format!(
                "skipped `{}` on {}: no classes",
                row.model_label(),
                row.eval_set.upper()
            ));
        } else {
            kept.push((i, row));
        }
    }
    kept.sort_by_key(|(i, r)| (r.scenario, r.eval_set, *i));
    (kept.into_iter().map(|(_, r)| r).collect(), warnings)
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
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
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if c + 1 < row.len() {
                line.push_str(&" ".repeat(widths[c] - cell.chars().count()));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Macro P/R/F1 as percentages, one row per (model, eval set), in scenario
/// order then evaluation language.
pub fn results_rows(rows: &[ResultRow]) -> (Vec<Vec<String>>, Vec<String>) {
    let (rows, warnings) = ordered(rows);
    let mut table = vec![vec![
        "Model".to_string(),
        "Eval. set".to_string(),
        "P".to_string(),
        "R".to_string(),
        "F1".to_string(),
    ]];
    for r in rows {
        let m = r.report.macro_avg;
        table.push(vec![
            r.model_label(),
            r.eval_set.upper().to_string(),
            percent(m.precision),
            percent(m.recall),
            percent(m.f1),
        ]);
    }
    (table, warnings)
}

pub fn render_results_table(rows: &[ResultRow]) -> RenderedTable {
    let (table, warnings) = results_rows(rows);
    RenderedTable {
        text: align(&table),
        warnings,
    }
}

/// Per-class P/R/F1 with one column group per class.
pub fn per_class_rows(rows: &[ResultRow]) -> (Vec<Vec<String>>, Vec<String>) {
    let (rows, warnings) = ordered(rows);
    let labels: Vec<String> = rows
        .first()
        .map(|r| r.report.per_class.iter().map(|c| c.label.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["Model".to_string(), "Eval. set".to_string()];
    for l in &labels {
        for m in ["P", "R", "F1"] {
            header.push(format!("{l} {m}"));
        }
    }
    let mut table = vec![header];
    for r in rows {
        let mut line = vec![r.model_label(), r.eval_set.upper().to_string()];
        for l in &labels {
            match r.report.class(l) {
                Some(c) => {
                    line.push(percent(c.precision));
                    line.push(percent(c.recall));
                    line.push(percent(c.f1));
                }
                None => line.extend(["-", "-", "-"].map(String::from)),
            }
        }
        table.push(line);
    }
    (table, warnings)
}

pub fn render_per_class_table(rows: &[ResultRow]) -> RenderedTable {
    let (table, warnings) = per_class_rows(rows);
    RenderedTable {
        text: align(&table),
        warnings,
    }
}

/// What one model predicted for one document.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPredictions {
    pub model: String,
    /// ADU id -> stance
    pub stances: BTreeMap<String, Stance>,
    /// Edge id -> relation; `None` when the model's relations were not scored.
    #[serde(default)]
    pub relations: Option<BTreeMap<String, RelationLabel>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AduRow {
    pub adu_id: String,
    pub gold: Stance,
    pub predicted: Vec<Stance>,
    pub mismatch: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRow {
    pub edge_id: String,
    pub source: String,
    /// The target ADU, or `[src -> trg]` for an undercut's attacked edge.
    pub target: String,
    pub gold: RelationLabel,
    pub predicted: Vec<Option<RelationLabel>>,
    pub mismatch: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseReport {
    pub doc_id: String,
    pub models: Vec<String>,
    pub adu_rows: Vec<AduRow>,
    pub relation_rows: Vec<RelationRow>,
}

impl CaseReport {
    /// ADU ids each model got wrong, in model order.
    pub fn stance_mismatches(&self) -> Vec<Vec<&str>> {
        (0..self.models.len())
            .map(|m| {
                self.adu_rows
                    .iter()
                    .filter(|r| r.mismatch[m])
                    .map(|r| r.adu_id.as_str())
                    .collect()
            })
            .collect()
    }

    pub fn relation_mismatches(&self) -> Vec<Vec<&str>> {
        (0..self.models.len())
            .map(|m| {
                self.relation_rows
                    .iter()
                    .filter(|r| r.mismatch[m])
                    .map(|r| r.edge_id.as_str())
                    .collect()
            })
            .collect()
    }

    /// Plain-text rendering; `*` marks a prediction that differs from gold.
    pub fn render(&self) -> String {
        let mut out = format!("Case {}\n\n", self.doc_id);
        let mut stance_table = vec![{
            let mut h = vec!["Model".to_string()];
            h.extend(self.adu_rows.iter().map(|r| r.adu_id.clone()));
            h
        }];
        let mut gold = vec!["Gold".to_string()];
        gold.extend(self.adu_rows.iter().map(|r| r.gold.as_str().to_string()));
        stance_table.push(gold);
        for (m, model) in self.models.iter().enumerate() {
            let mut line = vec![model.clone()];
            for r in &self.adu_rows {
                let mark = if r.mismatch[m] { "*" } else { "" };
                line.push(format!("{}{mark}", r.predicted[m]));
            }
            stance_table.push(line);
        }
        out.push_str(&align(&stance_table));

        if !self.relation_rows.is_empty() {
            out.push('\n');
            let mut header = vec!["Link".to_string(), "Gold".to_string()];
            header.extend(self.models.iter().cloned());
            let mut rel_table = vec![header];
            for r in &self.relation_rows {
                let mut line = vec![format!("{} -> {}", r.source, r.target), r.gold.to_string()];
                for (m, p) in r.predicted.iter().enumerate() {
                    line.push(match p {
                        Some(p) if r.mismatch[m] => format!("{p}*"),
                        Some(p) => p.to_string(),
                        None => "-".to_string(),
                    });
                }
                rel_table.push(line);
            }
            out.push_str(&align(&rel_table));
        }
        out
    }
}

pub fn case_report(
    g: &ArgumentGraph,
    predictions: &[ModelPredictions],
) -> Result<CaseReport, EvalError> {
    let missing = |model: &str, id: &str| EvalError::MissingPrediction {
        model: model.to_string(),
        id: id.to_string(),
    };
    let mut adu_rows = Vec::new();
    for adu in &g.adus {
        let mut predicted = Vec::new();
        for p in predictions {
            predicted.push(
                *p.stances
                    .get(&adu.id)
                    .ok_or_else(|| missing(&p.model, &adu.id))?,
            );
        }
        adu_rows.push(AduRow {
            adu_id: adu.id.clone(),
            gold: adu.stance,
            mismatch: predicted.iter().map(|s| *s != adu.stance).collect(),
            predicted,
        });
    }

    let mut relation_rows = Vec::new();
    for edge in g.argumentative_edges() {
        let Some(gold) = edge.rel.label() else {
            continue;
        };
        let target = match &edge.target {
            EdgeTarget::Node(t) => t.clone(),
            EdgeTarget::Edge(t) => match g.edge(t) {
                Some(att) => format!("[{} -> {}]", att.source, att.target.id()),
                None => format!("[{t}]"),
            },
        };
        let mut predicted = Vec::new();
        for p in predictions {
            predicted.push(match &p.relations {
                Some(rel) => Some(
                    *rel.get(&edge.id)
                        .ok_or_else(|| missing(&p.model, &edge.id))?,
                ),
                None => None,
            });
        }
        relation_rows.push(RelationRow {
            edge_id: edge.id.clone(),
            source: edge.source.clone(),
            target,
            gold,
            mismatch: predicted
                .iter()
                .map(|p| p.is_some_and(|p| p != gold))
                .collect(),
            predicted,
        });
    }

    Ok(CaseReport {
        doc_id: g.doc_id.clone(),
        models: predictions.iter().map(|p| p.model.clone()).collect(),
        adu_rows,
        relation_rows,
    })
}
