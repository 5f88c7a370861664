//! Shared-encoder classifier with a stance head and a relation head.

pub mod encoder;
pub mod tokenizer;
pub mod train;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use argmine_core::graph::RelationLabel;
use argmine_core::seed::rng_for;
use candle_core::{Device, Tensor, Var};
use serde::{Deserialize, Serialize};

pub use encoder::{Batch, EncoderConfig, Params};
pub use tokenizer::{encode_pair, encode_single, Encoded, TextTokenizer, TokenizerSpec};
pub use train::{
    train, train_separate, EpochRecord, TaskEval, TrainConfig, TrainedModel, Trainer,
    TrainingHistory,
};

/// Registry ids are looked up as `<dir>/<id>` under this directory.
pub const MODEL_HOME_ENV: &str = "ARGMINE_MODEL_HOME";
pub const TINY_ENCODER: &str = "tiny";

const WEIGHTS_FILE: &str = "weights.safetensors";
const CONFIG_FILE: &str = "config.json";
const HISTORY_FILE: &str = "history.json";
const TOKENIZER_FILE: &str = "tokenizer.json";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("ENCODER_NOT_FOUND: {0}")]
    EncoderNotFound(String),
    #[error("SHAPE_MISMATCH: {0}")]
    ShapeMismatch(String),
    #[error("CONFIG_MISMATCH: {0}")]
    ConfigMismatch(String),
    #[error("IO_ERROR: {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("TOKENIZE_ERROR: {0}")]
    Tokenize(String),
    #[error("CONFIG_ERROR: {0}")]
    InvalidConfig(String),
    #[error("EMPTY_TRAIN: no task has both training and validation examples")]
    EmptyTrain,
    #[error("DIVERGENCE: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("EMPTY_SPLIT: {0}")]
    EmptySplit(String),
    #[error("tensor error: {0}")]
    Tensor(#[from] candle_core::Error),
    #[error("bad checkpoint metadata: {0}")]
    Json(#[from] serde_json::Error),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::EncoderNotFound(_) => "ENCODER_NOT_FOUND",
            ModelError::ShapeMismatch(_) => "SHAPE_MISMATCH",
            ModelError::ConfigMismatch(_) => "CONFIG_MISMATCH",
            ModelError::Io { .. } => "IO_ERROR",
            ModelError::Tokenize(_) => "TOKENIZE_ERROR",
            ModelError::InvalidConfig(_) => "CONFIG_ERROR",
            ModelError::EmptyTrain => "EMPTY_TRAIN",
            ModelError::Divergence { .. } => "DIVERGENCE",
            ModelError::EmptySplit(_) => "EMPTY_SPLIT",
            ModelError::Tensor(_) => "TENSOR_ERROR",
            ModelError::Json(_) => "IO_ERROR",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Stance,
    Relation,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Stance, Task::Relation];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Stance => "stance",
            Task::Relation => "relation",
        }
    }

    fn head(self) -> &'static str {
        match self {
            Task::Stance => "stance_head",
            Task::Relation => "relation_head",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stance" => Ok(Task::Stance),
            "relation" => Ok(Task::Relation),
            _ => Err(format!("unknown task `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// `tiny`, a local model directory, or an id under `$ARGMINE_MODEL_HOME`.
    pub encoder_id: String,
    pub n_stance_classes: usize,
    pub n_relation_classes: usize,
    pub max_length: usize,
    /// Overrides the tiny profile's shape; ignored for pretrained encoders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<EncoderConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder_id: "xlm-roberta-base".into(),
            n_stance_classes: 2,
            n_relation_classes: 4,
            max_length: 128,
            encoder: None,
        }
    }
}

impl ModelConfig {
    pub fn tiny() -> Self {
        ModelConfig {
            encoder_id: TINY_ENCODER.into(),
            ..ModelConfig::default()
        }
    }

    /// The fields a checkpoint must agree on to be loaded for this config.
    fn mismatches(&self, other: &ModelConfig) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_stance_classes != other.n_stance_classes {
            out.push(format!(
                "n_stance_classes {} != {}",
                self.n_stance_classes, other.n_stance_classes
            ));
        }
        if self.n_relation_classes != other.n_relation_classes {
            out.push(format!(
                "n_relation_classes {} != {}",
                self.n_relation_classes, other.n_relation_classes
            ));
        }
        if self.max_length != other.max_length {
            out.push(format!(
                "max_length {} != {}",
                self.max_length, other.max_length
            ));
        }
        out
    }
}

/// Probabilities over a task's classes; `label` is the argmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub index: usize,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    fn from_logits(logits: &[f32], names: &[String]) -> Self {
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let exps: Vec<f64> = logits.iter().map(|&z| (z as f64 - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let probabilities: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        let mut index = 0;
        for (i, p) in probabilities.iter().enumerate() {
            if *p > probabilities[index] {
                index = i;
            }
        }
        Prediction {
            label: names[index].clone(),
            index,
            probabilities,
        }
    }
}

fn class_names(task: Task, n: usize) -> Vec<String> {
    let known: Vec<&str> = match task {
        Task::Stance => vec!["pro", "con"],
        Task::Relation => RelationLabel::ALL.iter().map(|l| l.as_str()).collect(),
    };
    (0..n)
        .map(|i| {
            known
                .get(i)
                .map_or_else(|| format!("class_{i}"), |s| s.to_string())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CheckpointConfig {
    model: ModelConfig,
    encoder: EncoderConfig,
    tokenizer: TokenizerSpec,
}

/// Encoder, heads and tokenizer. Inference takes `&self` and may run from
/// several threads.
#[derive(Debug)]
pub struct MultiTaskModel {
    pub config: ModelConfig,
    pub encoder_config: EncoderConfig,
    tokenizer_spec: TokenizerSpec,
    tokenizer_base: PathBuf,
    tokenizer: TextTokenizer,
    params: Params,
    device: Device,
    stance_names: Vec<String>,
    relation_names: Vec<String>,
}

fn head_shapes(cfg: &ModelConfig, hidden: usize) -> Vec<(String, Vec<usize>)> {
    vec![
        (
            "stance_head.weight".into(),
            vec![cfg.n_stance_classes, hidden],
        ),
        ("stance_head.bias".into(), vec![cfg.n_stance_classes]),
        (
            "relation_head.weight".into(),
            vec![cfg.n_relation_classes, hidden],
        ),
        ("relation_head.bias".into(), vec![cfg.n_relation_classes]),
    ]
}

/// Maps Hugging Face tensor names onto ours.
fn canonical_name(name: &str) -> String {
    let name = name.strip_prefix("roberta.").unwrap_or(name);
    if let Some(stem) = name.strip_suffix(".gamma") {
        format!("{stem}.weight")
    } else if let Some(stem) = name.strip_suffix(".beta") {
        format!("{stem}.bias")
    } else {
        name.to_string()
    }
}

fn load_pretrained(
    dir: &Path,
    shapes: &[(String, Vec<usize>)],
    device: &Device,
) -> Result<BTreeMap<String, Var>, ModelError> {
    let path = ["model.safetensors", WEIGHTS_FILE]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| {
            ModelError::EncoderNotFound(format!("no safetensors weights in {}", dir.display()))
        })?;
    let tensors = candle_core::safetensors::load(&path, device)?;
    let by_name: HashMap<String, Tensor> = tensors
        .into_iter()
        .map(|(k, v)| (canonical_name(&k), v))
        .collect();
    let mut vars = BTreeMap::new();
    for (name, shape) in shapes {
        let t = by_name.get(name).ok_or_else(|| {
            ModelError::ShapeMismatch(format!("{} lacks `{name}`", path.display()))
        })?;
        if t.dims() != shape.as_slice() {
            return Err(ModelError::ShapeMismatch(format!(
                "`{name}` has shape {:?}, expected {shape:?}",
                t.dims()
            )));
        }
        vars.insert(
            name.clone(),
            Var::from_tensor(&t.to_dtype(candle_core::DType::F32)?)?,
        );
    }
    Ok(vars)
}

fn resolve_dir(id: &str) -> Option<PathBuf> {
    let direct = PathBuf::from(id);
    if direct.is_dir() {
        return Some(direct);
    }
    let home = std::env::var_os(MODEL_HOME_ENV)?;
    let p = PathBuf::from(home).join(id);
    p.is_dir().then_some(p)
}

/// Builds the encoder named by `cfg.encoder_id` plus freshly initialized
/// heads. Returns warnings for settings that differ from the defaults.
pub fn build_model(
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(MultiTaskModel, Vec<String>), ModelError> {
    let mut warnings = Vec::new();
    if cfg.n_stance_classes < 2 || cfg.n_relation_classes < 1 {
        return Err(ModelError::ShapeMismatch(
            "heads need at least two stance classes and one relation class".into(),
        ));
    }
    if cfg.n_stance_classes != 2 {
        warnings.push(format!(
            "n_stance_classes = {} (the stance scheme has 2)",
            cfg.n_stance_classes
        ));
    }
    if cfg.n_relation_classes != 4 {
        warnings.push(format!(
            "n_relation_classes = {} (the relation scheme has 4)",
            cfg.n_relation_classes
        ));
    }
    let device = Device::Cpu;
    let mut rng = rng_for(seed, "model-init");
    let (encoder_config, tokenizer_spec, base, mut params) = if cfg.encoder_id == TINY_ENCODER {
        let enc = cfg.encoder.clone().unwrap_or_else(EncoderConfig::tiny);
        enc.check()?;
        let params = Params::init(&enc.parameter_shapes(), &mut rng, &device)?;
        let spec = TokenizerSpec::Hash {
            vocab_size: enc.vocab_size,
        };
        (enc, spec, PathBuf::new(), params)
    } else {
        let dir = resolve_dir(&cfg.encoder_id)
            .ok_or_else(|| ModelError::EncoderNotFound(cfg.encoder_id.clone()))?;
        let cfg_path = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?;
        let enc: EncoderConfig = serde_json::from_str(&text)?;
        enc.check()?;
        let vars = load_pretrained(&dir, &enc.parameter_shapes(), &device)?;
        let spec = TokenizerSpec::File {
            path: TOKENIZER_FILE.into(),
        };
        (enc, spec, dir, Params { vars })
    };
    if cfg.max_length < 2 || cfg.max_length + 2 > encoder_config.max_position_embeddings {
        return Err(ModelError::ShapeMismatch(format!(
            "max_length {} does not fit {} position embeddings",
            cfg.max_length, encoder_config.max_position_embeddings
        )));
    }
    let heads = Params::init(
        &head_shapes(cfg, encoder_config.hidden_size),
        &mut rng,
        &device,
    )?;
    params.vars.extend(heads.vars);
    let tokenizer = TextTokenizer::from_spec(&tokenizer_spec, &base)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let model = MultiTaskModel {
        stance_names: class_names(Task::Stance, cfg.n_stance_classes),
        relation_names: class_names(Task::Relation, cfg.n_relation_classes),
        config: cfg.clone(),
        encoder_config,
        tokenizer_spec,
        tokenizer_base: base,
        tokenizer,
        params,
        device,
    };
    Ok((model, warnings))
}

pub const PREDICT_BATCH: usize = 32;

impl MultiTaskModel {
    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn class_names(&self, task: Task) -> &[String] {
        match task {
            Task::Stance => &self.stance_names,
            Task::Relation => &self.relation_names,
        }
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.params.vars.keys().cloned().collect()
    }

    pub fn head_parameter_names(&self, task: Task) -> Vec<String> {
        let prefix = format!("{}.", task.head());
        self.params
            .vars
            .keys()
            .filter(|k| k.starts_with(&prefix))
            .cloned()
            .collect()
    }

    /// Host copy of one parameter.
    pub fn parameter_values(&self, name: &str) -> Result<Vec<f32>, ModelError> {
        Ok(self.params.get(name)?.flatten_all()?.to_vec1()?)
    }

    /// Deep copy of every parameter.
    pub fn snapshot(&self) -> Result<BTreeMap<String, Tensor>, ModelError> {
        self.params
            .vars
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().copy()?)))
            .collect()
    }

    pub fn restore(&self, snapshot: &BTreeMap<String, Tensor>) -> Result<(), ModelError> {
        for (k, v) in &self.params.vars {
            let t = snapshot
                .get(k)
                .ok_or_else(|| ModelError::ShapeMismatch(format!("snapshot lacks `{k}`")))?;
            v.set(t)?;
        }
        Ok(())
    }

    pub fn encode_stance(&self, text: &str) -> Result<Encoded, ModelError> {
        encode_single(&self.tokenizer, text, self.config.max_length)
    }

    pub fn encode_relation(&self, a: &str, b: &str) -> Result<Encoded, ModelError> {
        encode_pair(&self.tokenizer, a, b, self.config.max_length)
    }

    /// Head logits, shape (batch, classes). Dropout is active only when a
    /// mask source is given.
    pub fn logits(
        &self,
        task: Task,
        batch: &Batch,
        dropout: Option<encoder::Dropout<'_>>,
    ) -> Result<Tensor, ModelError> {
        let cls = encoder::encode(&self.encoder_config, &self.params, batch, dropout)?;
        let head = task.head();
        encoder::linear(
            &cls,
            self.params.get(&format!("{head}.weight"))?,
            self.params.get(&format!("{head}.bias"))?,
        )
    }

    pub fn predict_encoded(
        &self,
        task: Task,
        inputs: &[Encoded],
    ) -> Result<Vec<Prediction>, ModelError> {
        let names = self.class_names(task);
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(PREDICT_BATCH) {
            let seqs: Vec<&[u32]> = chunk.iter().map(|e| e.ids.as_slice()).collect();
            let batch = Batch::new(&seqs, &self.device)?;
            let logits: Vec<Vec<f32>> = self.logits(task, &batch, None)?.to_vec2()?;
            out.extend(logits.iter().map(|row| Prediction::from_logits(row, names)));
        }
        Ok(out)
    }

    pub fn predict_stance(&self, text: &str) -> Result<Prediction, ModelError> {
        let e = self.encode_stance(text)?;
        Ok(self.predict_encoded(Task::Stance, &[e])?.remove(0))
    }

    pub fn predict_relation(&self, text_a: &str, text_b: &str) -> Result<Prediction, ModelError> {
        let e = self.encode_relation(text_a, text_b)?;
        Ok(self.predict_encoded(Task::Relation, &[e])?.remove(0))
    }

    pub fn predict_stance_batch(&self, texts: &[&str]) -> Result<Vec<Prediction>, ModelError> {
        let enc = texts
            .iter()
            .map(|t| self.encode_stance(t))
            .collect::<Result<Vec<_>, _>>()?;
        self.predict_encoded(Task::Stance, &enc)
    }

    pub fn predict_relation_batch(
        &self,
        pairs: &[(&str, &str)],
    ) -> Result<Vec<Prediction>, ModelError> {
        let enc = pairs
            .iter()
            .map(|(a, b)| self.encode_relation(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        self.predict_encoded(Task::Relation, &enc)
    }

    /// Writes weights, config and (when given) the training history.
    pub fn save(&self, dir: &Path, history: Option<&TrainingHistory>) -> Result<(), ModelError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut tokenizer = self.tokenizer_spec.clone();
        if let TokenizerSpec::File { path } = &self.tokenizer_spec {
            let src = self.tokenizer_base.join(path);
            let dst = dir.join(TOKENIZER_FILE);
            if src != dst {
                fs::copy(&src, &dst).map_err(io_err(&dst))?;
            }
            tokenizer = TokenizerSpec::File {
                path: TOKENIZER_FILE.into(),
            };
        }
        let meta = CheckpointConfig {
            model: self.config.clone(),
            encoder: self.encoder_config.clone(),
            tokenizer,
        };
        let cfg_path = dir.join(CONFIG_FILE);
        fs::write(&cfg_path, serde_json::to_string_pretty(&meta)?).map_err(io_err(&cfg_path))?;
        let weights = dir.join(WEIGHTS_FILE);
        let tensors: BTreeMap<String, Tensor> = self
            .params
            .vars
            .iter()
            .map(|(k, v)| (k.clone(), v.as_tensor().clone()))
            .collect();
        candle_core::safetensors::save(&tensors.into_iter().collect::<HashMap<_, _>>(), &weights)
            .map_err(|e| match e {
            candle_core::Error::Io(source) => ModelError::Io {
                path: weights.clone(),
                source,
            },
            other => ModelError::Tensor(other),
        })?;
        if let Some(h) = history {
            let path = dir.join(HISTORY_FILE);
            fs::write(&path, serde_json::to_string_pretty(h)?).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

pub fn save_model(
    model: &MultiTaskModel,
    dir: &Path,
    history: Option<&TrainingHistory>,
) -> Result<(), ModelError> {
    model.save(dir, history)
}

/// Loads a checkpoint written by [`save_model`]. With `expected`, head
/// sizes and input length must agree with the stored config.
pub fn load_model(
    dir: &Path,
    expected: Option<&ModelConfig>,
) -> Result<(MultiTaskModel, Option<TrainingHistory>), ModelError> {
    let cfg_path = dir.join(CONFIG_FILE);
    let meta: CheckpointConfig =
        serde_json::from_str(&fs::read_to_string(&cfg_path).map_err(io_err(&cfg_path))?)?;
    if let Some(exp) = expected {
        let diff = exp.mismatches(&meta.model);
        if !diff.is_empty() {
            return Err(ModelError::ConfigMismatch(diff.join(", ")));
        }
    }
    let device = Device::Cpu;
    let mut shapes = meta.encoder.parameter_shapes();
    shapes.extend(head_shapes(&meta.model, meta.encoder.hidden_size));
    let weights = dir.join(WEIGHTS_FILE);
    if !weights.is_file() {
        return Err(ModelError::Io {
            path: weights,
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        });
    }
    let vars = load_pretrained(dir, &shapes, &device)?;
    let tokenizer = TextTokenizer::from_spec(&meta.tokenizer, dir)?;
    let history_path = dir.join(HISTORY_FILE);
    let history = if history_path.is_file() {
        Some(serde_json::from_str(
            &fs::read_to_string(&history_path).map_err(io_err(&history_path))?,
        )?)
    } else {
        None
    };
    let model = MultiTaskModel {
        stance_names: class_names(Task::Stance, meta.model.n_stance_classes),
        relation_names: class_names(Task::Relation, meta.model.n_relation_classes),
        config: meta.model,
        encoder_config: meta.encoder,
        tokenizer_spec: meta.tokenizer,
        tokenizer_base: dir.to_path_buf(),
        tokenizer,
        params: Params { vars },
        device,
    };
    Ok((model, history))
}
