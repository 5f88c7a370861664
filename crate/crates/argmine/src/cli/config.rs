//! The declarative run configuration and its command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use argmine_core::augment::{AugmentConfig, GeneratorSpec};
use argmine_core::dataset::{canonical_json, sha256_hex, Scenario, ScenarioConfig, SplitRatios};
use argmine_core::seed::derive_seed;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::train::TrainConfig;
use crate::model::ModelConfig;

fn default_seed() -> u64 {
    13
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_en() -> PathBuf {
    PathBuf::from("data/microtext/en")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationSection {
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    /// Replay fixture for the `replay` generator.
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    #[serde(default)]
    pub settings: AugmentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_en")]
    pub en_dir: PathBuf,
    #[serde(default)]
    pub fa_dir: Option<PathBuf>,
    #[serde(default)]
    pub pe_dir: Option<PathBuf>,
    pub scenario: Scenario,
    /// The one seed every subsystem seed is derived from.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub ratios: SplitRatios,
    #[serde(default)]
    pub allow_empty_splits: bool,
    /// Load corpora in lenient mode, skipping bad files.
    #[serde(default)]
    pub lenient: bool,
    #[serde(default)]
    pub augmentation: AugmentationSection,
    #[serde(default)]
    pub model: ModelConfig,
    /// `seed` here is ignored; the training seed is derived from `seed`.
    #[serde(default)]
    pub train: TrainConfig,
    /// Train one encoder per task instead of a shared one.
    #[serde(default)]
    pub separate_heads_runs: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            en_dir: default_en(),
            fa_dir: None,
            pe_dir: None,
            scenario: Scenario::ZeroShot,
            seed: default_seed(),
            ratios: SplitRatios::default(),
            allow_empty_splits: false,
            lenient: false,
            augmentation: AugmentationSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            separate_heads_runs: false,
            output_dir: default_output(),
        }
    }
}

/// Flag values that replace config file values when given.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub en_dir: Option<PathBuf>,
    #[arg(long)]
    pub fa_dir: Option<PathBuf>,
    #[arg(long)]
    pub pe_dir: Option<PathBuf>,
    /// zero_shot, llm_aug or cross_lingual.
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// `tiny`, a model directory, or an id under $ARGMINE_MODEL_HOME.
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_length: Option<usize>,
    /// Generator name (`replay` or an HTTP generator).
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub generator_endpoint: Option<String>,
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Per-class balancing target.
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long)]
    pub separate_heads_runs: bool,
    #[arg(long)]
    pub lenient: bool,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Reads the config file (if any), resolves its relative paths against
    /// the file's directory, then applies the flags.
    pub fn load(o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &o.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                let mut cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new("."));
                resolve(base, &mut cfg.en_dir);
                resolve(base, &mut cfg.output_dir);
                for p in [
                    cfg.fa_dir.as_mut(),
                    cfg.pe_dir.as_mut(),
                    cfg.augmentation.fixture.as_mut(),
                ]
                .into_iter()
                .flatten()
                {
                    resolve(base, p);
                }
                cfg
            }
            None => RunConfig::default(),
        };
        cfg.apply(o);
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        let set = |dst: &mut PathBuf, src: &Option<PathBuf>| {
            if let Some(s) = src {
                *dst = s.clone();
            }
        };
        set(&mut self.en_dir, &o.en_dir);
        set(&mut self.output_dir, &o.output_dir);
        if o.fa_dir.is_some() {
            self.fa_dir.clone_from(&o.fa_dir);
        }
        if o.pe_dir.is_some() {
            self.pe_dir.clone_from(&o.pe_dir);
        }
        if let Some(s) = o.scenario {
            self.scenario = s;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(e) = &o.encoder {
            self.model.encoder_id.clone_from(e);
        }
        if let Some(n) = o.max_epochs {
            self.train.max_epochs = n;
        }
        if let Some(n) = o.batch_size {
            self.train.batch_size = n;
        }
        if let Some(lr) = o.learning_rate {
            self.train.learning_rate = lr;
        }
        if let Some(n) = o.max_length {
            self.model.max_length = n;
        }
        if let Some(name) = &o.generator {
            let spec = self
                .augmentation
                .generator
                .get_or_insert_with(|| GeneratorSpec::new(name));
            spec.name.clone_from(name);
        }
        if let Some(url) = &o.generator_endpoint {
            self.augmentation
                .generator
                .get_or_insert_with(|| GeneratorSpec::new("http"))
                .endpoint = Some(url.clone());
        }
        if o.fixture.is_some() {
            self.augmentation.fixture.clone_from(&o.fixture);
        }
        if let Some(t) = o.target {
            self.augmentation.settings.target_per_class = t;
        }
        self.separate_heads_runs |= o.separate_heads_runs;
        self.lenient |= o.lenient;
        self.train.seed = derive_seed(self.seed, "train");
    }

    /// Paths exist and the scenario has what it needs.
    pub fn check(&self) -> Result<(), CliError> {
        let dir = |p: &Path, what: &str| {
            if p.is_dir() {
                Ok(())
            } else {
                Err(CliError::usage(format!(
                    "{what} {} is not a directory",
                    p.display()
                )))
            }
        };
        dir(&self.en_dir, "en_dir")?;
        if let Some(p) = &self.fa_dir {
            dir(p, "fa_dir")?;
        }
        if let Some(p) = &self.pe_dir {
            dir(p, "pe_dir")?;
        }
        if self.scenario == Scenario::CrossLingual && self.fa_dir.is_none() {
            return Err(CliError::usage("cross_lingual needs fa_dir"));
        }
        if self.scenario == Scenario::LlmAug {
            let Some(spec) = &self.augmentation.generator else {
                return Err(CliError::usage("llm_aug needs augmentation.generator"));
            };
            if spec.name == "replay" {
                match &self.augmentation.fixture {
                    Some(f) if f.is_file() => {}
                    Some(f) => {
                        return Err(CliError::usage(format!(
                            "fixture {} does not exist",
                            f.display()
                        )))
                    }
                    None => return Err(CliError::usage("replay generator needs a fixture")),
                }
            } else if spec.endpoint.is_none() {
                return Err(CliError::usage(format!(
                    "generator `{}` needs an endpoint",
                    spec.name
                )));
            }
        }
        self.train
            .check()
            .map_err(|e| CliError::usage(e.to_string()))?;
        Ok(())
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            scenario: self.scenario,
            ratios: self.ratios,
            seed: derive_seed(self.seed, "splits"),
            allow_empty_splits: self.allow_empty_splits,
        }
    }

    /// Digest of everything that affects results. The output directory is
    /// left out so a moved run keeps its id.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        sha256_hex(canonical_json(&c).as_bytes())
    }

    pub fn run_id(&self) -> String {
        format!("{}-{}", self.scenario, &self.digest()[..12])
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.run_id())
    }
}
