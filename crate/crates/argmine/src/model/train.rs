//! Joint training with size-proportional task alternation and early
//! stopping on validation loss.

use std::collections::BTreeMap;

use argmine_core::dataset::{DatasetBundle, Split};
use argmine_core::eval::{confusion, metrics_report};
use argmine_core::seed::rng_for;
use candle_core::Tensor;
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{Batch, Dropout};
use super::{build_model, Encoded, ModelConfig, ModelError, MultiTaskModel, Task};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Tasks trained in this run.
    #[serde(default = "all_tasks")]
    pub tasks: Vec<Task>,
}

fn all_tasks() -> Vec<Task> {
    Task::ALL.to_vec()
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-6,
            batch_size: 16,
            max_epochs: 100,
            early_stop_patience: 3,
            seed: 13,
            weight_decay: 0.0,
            tasks: all_tasks(),
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience must be at least 1");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if self.tasks.is_empty() {
            return bad("no task selected");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub loss: f64,
    pub examples: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    /// Example-weighted mean of the per-task validation losses.
    pub eval_loss: f64,
    pub tasks: BTreeMap<Task, TaskEval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Validation loss of the initial weights.
    pub initial_eval_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Examples cut to the maximum length, per `task/split`.
    pub truncated: BTreeMap<String, usize>,
}

impl TrainingHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }
}

#[derive(Debug)]
pub struct TrainedModel {
    pub model: MultiTaskModel,
    pub train_config: TrainConfig,
    pub history: TrainingHistory,
}

type Labeled = (Encoded, usize);

struct TaskData {
    train: Vec<Labeled>,
    val: Vec<Labeled>,
}

fn prepare(
    model: &MultiTaskModel,
    bundle: &DatasetBundle,
    task: Task,
    truncated: &mut BTreeMap<String, usize>,
) -> Result<TaskData, ModelError> {
    let mut encode = |split: Split| -> Result<Vec<Labeled>, ModelError> {
        let out: Vec<Labeled> = match task {
            Task::Stance => bundle
                .stance
                .get(split)
                .iter()
                .map(|e| Ok((model.encode_stance(&e.text)?, e.label.index())))
                .collect::<Result<_, ModelError>>()?,
            Task::Relation => bundle
                .relation
                .get(split)
                .iter()
                .map(|e| {
                    Ok((
                        model.encode_relation(&e.text_a, &e.text_b)?,
                        e.label.index(),
                    ))
                })
                .collect::<Result<_, ModelError>>()?,
        };
        let n = out.iter().filter(|(e, _)| e.truncated).count();
        truncated.insert(format!("{task}/{split}"), n);
        if n > 0 {
            log::info!(
                "{task}/{split}: {n} examples truncated to {} tokens",
                model.config.max_length
            );
        }
        Ok(out)
    };
    Ok(TaskData {
        train: encode(Split::Train)?,
        val: encode(Split::Val)?,
    })
}

/// Optimizer state plus the dropout mask source.
pub struct Trainer {
    optimizer: AdamW,
    dropout_rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(model: &MultiTaskModel, cfg: &TrainConfig) -> Result<Self, ModelError> {
        let vars = model.params().vars.values().cloned().collect();
        let optimizer = AdamW::new(
            vars,
            ParamsAdamW {
                lr: cfg.learning_rate,
                weight_decay: cfg.weight_decay,
                ..ParamsAdamW::default()
            },
        )?;
        Ok(Trainer {
            optimizer,
            dropout_rng: rng_for(cfg.seed, "dropout"),
        })
    }

    /// One optimizer step on one task's mini-batch; returns the batch loss.
    /// The other task's head receives no gradient and is left untouched.
    pub fn step(
        &mut self,
        model: &MultiTaskModel,
        task: Task,
        batch: &[(&Encoded, usize)],
    ) -> Result<f64, ModelError> {
        let seqs: Vec<&[u32]> = batch.iter().map(|(e, _)| e.ids.as_slice()).collect();
        let input = Batch::new(&seqs, model.device())?;
        let targets: Vec<u32> = batch.iter().map(|(_, y)| *y as u32).collect();
        let targets = Tensor::from_vec(targets, batch.len(), model.device())?;
        let logits = model.logits(
            task,
            &input,
            Some(Dropout {
                rng: &mut self.dropout_rng,
            }),
        )?;
        let loss = candle_nn::loss::cross_entropy(&logits, &targets)?;
        let value = f64::from(loss.to_scalar::<f32>()?);
        if !value.is_finite() {
            return Err(ModelError::Divergence { epoch: 0 });
        }
        self.optimizer.backward_step(&loss)?;
        Ok(value)
    }
}

fn evaluate_task(
    model: &MultiTaskModel,
    task: Task,
    data: &[Labeled],
    batch_size: usize,
) -> Result<TaskEval, ModelError> {
    let mut loss_sum = 0.0;
    let mut golds = Vec::with_capacity(data.len());
    let mut preds = Vec::with_capacity(data.len());
    for chunk in data.chunks(batch_size.max(1)) {
        let seqs: Vec<&[u32]> = chunk.iter().map(|(e, _)| e.ids.as_slice()).collect();
        let input = Batch::new(&seqs, model.device())?;
        let targets: Vec<u32> = chunk.iter().map(|(_, y)| *y as u32).collect();
        let logits = model.logits(task, &input, None)?;
        let t = Tensor::from_vec(targets.clone(), chunk.len(), model.device())?;
        let loss = candle_nn::loss::cross_entropy(&logits, &t)?.to_scalar::<f32>()?;
        loss_sum += f64::from(loss) * chunk.len() as f64;
        let am: Vec<u32> = logits.argmax(1)?.to_vec1()?;
        golds.extend(targets);
        preds.extend(am);
    }
    let n = data.len();
    let classes: Vec<u32> = (0..model.class_names(task).len() as u32).collect();
    let cm = confusion(&golds, &preds, &classes)
        .map_err(|e| ModelError::ShapeMismatch(e.to_string()))?;
    let correct: usize = (0..classes.len()).map(|i| cm.counts[i][i]).sum();
    let report = metrics_report(cm);
    Ok(TaskEval {
        loss: loss_sum / n as f64,
        examples: n,
        accuracy: correct as f64 / n as f64,
        macro_f1: report.macro_avg.f1,
    })
}

fn evaluate_all(
    model: &MultiTaskModel,
    data: &BTreeMap<Task, TaskData>,
    batch_size: usize,
) -> Result<(f64, BTreeMap<Task, TaskEval>), ModelError> {
    let mut out = BTreeMap::new();
    let (mut weighted, mut total) = (0.0, 0usize);
    for (task, d) in data {
        if d.val.is_empty() {
            continue;
        }
        let e = evaluate_task(model, *task, &d.val, batch_size)?;
        weighted += e.loss * e.examples as f64;
        total += e.examples;
        out.insert(*task, e);
    }
    Ok((weighted / total as f64, out))
}

/// Mini-batches of every task, interleaved so each task's batches are
/// spread evenly over the epoch.
fn schedule(
    data: &BTreeMap<Task, TaskData>,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(Task, Vec<usize>)> {
    let mut keyed: Vec<(f64, usize, Task, Vec<usize>)> = Vec::new();
    for (rank, (task, d)) in data.iter().enumerate() {
        let mut order: Vec<usize> = (0..d.train.len()).collect();
        order.shuffle(rng);
        let batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
        let n = batches.len() as f64;
        for (i, b) in batches.into_iter().enumerate() {
            keyed.push(((i as f64 + 0.5) / n, rank, *task, b));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, t, b)| (t, b)).collect()
}

/// Trains until validation loss stops improving for `early_stop_patience`
/// epochs, then restores the best epoch's weights.
pub fn train(
    model: MultiTaskModel,
    bundle: &DatasetBundle,
    tcfg: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    tcfg.check()?;
    let mut truncated = BTreeMap::new();
    let mut data = BTreeMap::new();
    for task in Task::ALL {
        if !tcfg.tasks.contains(&task) {
            continue;
        }
        let d = prepare(&model, bundle, task, &mut truncated)?;
        if !d.train.is_empty() {
            data.insert(task, d);
        }
    }
    if !data.values().any(|d| !d.val.is_empty()) {
        return Err(ModelError::EmptyTrain);
    }
    let eval_batch = tcfg.batch_size * 2;
    let mut trainer = Trainer::new(&model, tcfg)?;
    let (initial_eval_loss, _) = evaluate_all(&model, &data, eval_batch)?;
    log::info!("initial eval_loss {initial_eval_loss:.5}");

    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(usize, f64, BTreeMap<String, Tensor>)> = None;
    let mut bad_epochs = 0;
    let mut stopped_early = false;
    for epoch in 0..tcfg.max_epochs {
        let mut rng = rng_for(tcfg.seed, &format!("batch-order/{epoch}"));
        let plan = schedule(&data, tcfg.batch_size, &mut rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (task, idx) in &plan {
            let d = &data[task];
            let batch: Vec<(&Encoded, usize)> =
                idx.iter().map(|&i| (&d.train[i].0, d.train[i].1)).collect();
            let loss = match trainer.step(&model, *task, &batch) {
                Err(ModelError::Divergence { .. }) => return Err(ModelError::Divergence { epoch }),
                other => other?,
            };
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        let (eval_loss, tasks) = evaluate_all(&model, &data, eval_batch)?;
        if !eval_loss.is_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        log::info!(
            "epoch {epoch}: train_loss {:.5} eval_loss {eval_loss:.5}",
            loss_sum / seen as f64
        );
        epochs.push(EpochRecord {
            epoch,
            steps: plan.len(),
            train_loss: loss_sum / seen as f64,
            eval_loss,
            tasks,
        });
        if best.as_ref().is_none_or(|b| eval_loss < b.1) {
            best = Some((epoch, eval_loss, model.snapshot()?));
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= tcfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_epoch, _, weights) = best.expect("at least one epoch ran");
    model.restore(&weights)?;
    Ok(TrainedModel {
        model,
        train_config: tcfg.clone(),
        history: TrainingHistory {
            initial_eval_loss,
            epochs,
            best_epoch,
            stopped_early,
            truncated,
        },
    })
}

/// Two independently fine-tuned encoders, one per task.
pub fn train_separate(
    cfg: &ModelConfig,
    bundle: &DatasetBundle,
    tcfg: &TrainConfig,
) -> Result<(TrainedModel, TrainedModel), ModelError> {
    let run = |task: Task| -> Result<TrainedModel, ModelError> {
        let (model, _) = build_model(cfg, tcfg.seed)?;
        let t = TrainConfig {
            tasks: vec![task],
            ..tcfg.clone()
        };
        train(model, bundle, &t)
    };
    Ok((run(Task::Stance)?, run(Task::Relation)?))
}
