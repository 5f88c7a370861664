//! Scoring a trained model on bundle splits and argument graphs.

use std::collections::BTreeMap;

use argmine_core::dataset::{extract_relation_examples, DatasetBundle, Split};
use argmine_core::eval::{evaluate_predictions, MetricsReport, ModelPredictions};
use argmine_core::graph::{adu_text, RelationLabel};
use argmine_core::{ArgumentGraph, Language, Stance};

use crate::model::{ModelError, MultiTaskModel, Task};

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("EMPTY_SPLIT: no {task} examples in {split}{}", .language.map(|l| format!(" ({})", l.upper())).unwrap_or_default())]
    EmptySplit {
        split: Split,
        task: Task,
        language: Option<Language>,
    },
    #[error(transparent)]
    Eval(#[from] argmine_core::eval::EvalError),
    #[error(transparent)]
    Graph(#[from] argmine_core::graph::GraphError),
    #[error(transparent)]
    Dataset(#[from] argmine_core::dataset::DatasetError),
}

/// Predicts every example of `split` (optionally one language only) and
/// scores the task with its full class list.
pub fn evaluate_model(
    model: &MultiTaskModel,
    bundle: &DatasetBundle,
    split: Split,
    task: Task,
    language: Option<Language>,
) -> Result<MetricsReport, EvaluateError> {
    let keep = |l: Language| language.is_none_or(|x| x == l);
    let empty = || EvaluateError::EmptySplit {
        split,
        task,
        language,
    };
    let classes: Vec<String> = model.class_names(task).to_vec();
    let (golds, inputs): (Vec<String>, Vec<_>) = match task {
        Task::Stance => {
            let ex: Vec<_> = bundle
                .stance
                .get(split)
                .iter()
                .filter(|e| keep(e.language))
                .collect();
            let enc = ex
                .iter()
                .map(|e| model.encode_stance(&e.text))
                .collect::<Result<Vec<_>, _>>()?;
            (
                ex.iter().map(|e| e.label.as_str().to_string()).collect(),
                enc,
            )
        }
        Task::Relation => {
            let ex: Vec<_> = bundle
                .relation
                .get(split)
                .iter()
                .filter(|e| keep(e.language))
                .collect();
            let enc = ex
                .iter()
                .map(|e| model.encode_relation(&e.text_a, &e.text_b))
                .collect::<Result<Vec<_>, _>>()?;
            (
                ex.iter().map(|e| e.label.as_str().to_string()).collect(),
                enc,
            )
        }
    };
    if golds.is_empty() {
        return Err(empty());
    }
    let preds: Vec<String> = model
        .predict_encoded(task, &inputs)?
        .into_iter()
        .map(|p| p.label)
        .collect();
    Ok(evaluate_predictions(&golds, &preds, &classes)?)
}

/// Stance and relation predictions for every ADU and argumentative edge of
/// a graph, shaped for a case report.
pub fn predict_graph(
    model: &MultiTaskModel,
    name: &str,
    g: &ArgumentGraph,
) -> Result<ModelPredictions, EvaluateError> {
    let mut stances = BTreeMap::new();
    for adu in &g.adus {
        let p = model.predict_stance(&adu_text(g, &adu.id)?)?;
        let stance = if p.index == Stance::Pro.index() {
            Stance::Pro
        } else {
            Stance::Con
        };
        stances.insert(adu.id.clone(), stance);
    }
    let mut relations = Some(BTreeMap::new());
    for ex in extract_relation_examples(g)? {
        let p = model.predict_relation(&ex.text_a, &ex.text_b)?;
        match (RelationLabel::ALL.get(p.index), relations.as_mut()) {
            (Some(label), Some(map)) => {
                map.insert(ex.edge_id, *label);
            }
            _ => {
                log::warn!(
                    "{}: relation class `{}` has no label; relations not reported",
                    g.doc_id,
                    p.label
                );
                relations = None;
            }
        }
    }
    Ok(ModelPredictions {
        model: name.to_string(),
        stances,
        relations,
    })
}
