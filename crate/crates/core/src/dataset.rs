//! Stance and relation examples, document-level splits and the three
//! training scenarios.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::graph::{
    adu_text, undercut_endpoints, ArgumentGraph, EdgeTarget, GraphError, Language, RelationLabel,
    Stance, UnknownName,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceExample {
    pub doc_id: String,
    pub adu_id: String,
    pub text: String,
    pub label: Stance,
    pub language: Language,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationExample {
    pub doc_id: String,
    pub edge_id: String,
    /// Source ADU text.
    pub text_a: String,
    /// Target ADU text (for undercuts, the attacked inference's source).
    pub text_b: String,
    pub label: RelationLabel,
    pub language: Language,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("split `{0}` would be empty")]
    EmptySplit(Split),
    #[error("llm_aug scenario needs synthetic examples")]
    MissingSynth,
    #[error("Persian document `{0}` has no English counterpart")]
    UnpairedFa(String),
    #[error("cross_lingual scenario needs a Persian corpus")]
    MissingFa,
}

pub fn extract_stance_examples(g: &ArgumentGraph) -> Result<Vec<StanceExample>, DatasetError> {
    g.adus
        .iter()
        .map(|adu| {
            Ok(StanceExample {
                doc_id: g.doc_id.clone(),
                adu_id: adu.id.clone(),
                text: adu_text(g, &adu.id)?,
                label: adu.stance,
                language: g.language,
            })
        })
        .collect()
}

/// One example per argumentative edge, ordered (source, target).
pub fn extract_relation_examples(g: &ArgumentGraph) -> Result<Vec<RelationExample>, DatasetError> {
    let mut out = Vec::new();
    for edge in g.argumentative_edges() {
        let Some(label) = edge.rel.label() else {
            continue;
        };
        let (a, b) = match &edge.target {
            EdgeTarget::Edge(_) => undercut_endpoints(g, edge)?,
            EdgeTarget::Node(t) => (edge.source.as_str(), t.as_str()),
        };
        out.push(RelationExample {
            doc_id: g.doc_id.clone(),
            edge_id: edge.id.clone(),
            text_a: adu_text(g, a)?,
            text_b: adu_text(g, b)?,
            label,
            language: g.language,
        });
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "dev" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(UnknownName(s.to_string())),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub assignment: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, doc_id: &str) -> Option<Split> {
        self.assignment.get(doc_id).copied()
    }

    pub fn docs(&self, split: Split) -> impl Iterator<Item = &str> {
        self.assignment
            .iter()
            .filter(move |(_, s)| **s == split)
            .map(|(d, _)| d.as_str())
    }

    pub fn sizes(&self) -> [usize; 3] {
        let mut sizes = [0; 3];
        for s in self.assignment.values() {
            sizes[*s as usize] += 1;
        }
        sizes
    }
}

/// Floor of `x` for the non-negative, modest values used in split sizing,
/// with a little slack so `0.7 * 10` counts as 7.
fn floor_count(x: f64) -> usize {
    (x + 1e-9) as usize
}

/// Seeded shuffle of the (sorted, deduplicated) ids cut into train, val and
/// test. Train and val sizes are floored; test takes the remainder (or train
/// does, when the test ratio is zero).
pub fn make_splits(
    ids: &[String],
    ratios: SplitRatios,
    seed: u64,
    allow_empty: bool,
) -> Result<SplitAssignment, DatasetError> {
    let r = ratios.as_array();
    let sum: f64 = r.iter().sum();
    if r.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadRatios(r));
    }
    let mut ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    ids.sort_unstable();
    ids.dedup();
    let n = ids.len();

    let mut train = floor_count(n as f64 * ratios.train);
    let val = floor_count(n as f64 * ratios.val).min(n - train);
    let mut test = n - train - val;
    if ratios.test == 0.0 {
        train += test;
        test = 0;
    }
    if !allow_empty {
        for (split, size) in Split::ALL.iter().zip([train, val, test]) {
            if size == 0 {
                return Err(DatasetError::EmptySplit(*split));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let assignment = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            (id.to_string(), split)
        })
        .collect();
    Ok(SplitAssignment {
        seed,
        ratios,
        assignment,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ZeroShot,
    LlmAug,
    CrossLingual,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::ZeroShot, Scenario::LlmAug, Scenario::CrossLingual];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::ZeroShot => "zero_shot",
            Scenario::LlmAug => "llm_aug",
            Scenario::CrossLingual => "cross_lingual",
        }
    }

    /// Row label used in results tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Scenario::ZeroShot => "Zero-shot transfer",
            Scenario::LlmAug => "LLM-Augmented",
            Scenario::CrossLingual => "EN+FA Cross-lingual",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "zero_shot" => Ok(Scenario::ZeroShot),
            "llm_aug" => Ok(Scenario::LlmAug),
            "cross_lingual" => Ok(Scenario::CrossLingual),
            _ => Err(UnknownName(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub ratios: SplitRatios,
    pub seed: u64,
    #[serde(default)]
    pub allow_empty_splits: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Default for SplitSet<T> {
    fn default() -> Self {
        SplitSet {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        }
    }
}

impl<T> SplitSet<T> {
    pub fn get(&self, split: Split) -> &[T] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn get_mut(&mut self, split: Split) -> &mut Vec<T> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub scenario: Scenario,
    pub seed: u64,
    pub config_digest: String,
    /// SHA-256 over the canonical JSONL of every split, in file order.
    pub content_digest: String,
    /// Example count per file name.
    pub counts: BTreeMap<String, usize>,
    pub config: ScenarioConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub scenario: Scenario,
    pub splits: SplitAssignment,
    pub stance: SplitSet<StanceExample>,
    pub relation: SplitSet<RelationExample>,
    pub manifest: BundleManifest,
}

/// One JSON object per line with keys in sorted order.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        let value = serde_json::to_value(item).expect("examples serialize to JSON");
        out.push_str(&value.to_string());
        out.push('\n');
    }
    out
}

pub fn canonical_json<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .expect("value serializes to JSON")
        .to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl DatasetBundle {
    /// `(file name, canonical JSONL)` for every split of both tasks.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut files = Vec::new();
        for split in Split::ALL {
            files.push((
                format!("stance_{split}.jsonl"),
                to_jsonl(self.stance.get(split)),
            ));
        }
        for split in Split::ALL {
            files.push((
                format!("relation_{split}.jsonl"),
                to_jsonl(self.relation.get(split)),
            ));
        }
        files
    }

    /// Doc ids (EN and FA alike) present in the given split of either task.
    pub fn doc_ids(&self, split: Split) -> BTreeSet<&str> {
        self.stance
            .get(split)
            .iter()
            .map(|e| e.doc_id.as_str())
            .chain(self.relation.get(split).iter().map(|e| e.doc_id.as_str()))
            .collect()
    }

    /// Doc ids found in test and also in train or val.
    pub fn leaked_doc_ids(&self) -> Vec<String> {
        let test = self.doc_ids(Split::Test);
        let seen: BTreeSet<&str> = self
            .doc_ids(Split::Train)
            .union(&self.doc_ids(Split::Val))
            .copied()
            .collect();
        test.intersection(&seen).map(|s| s.to_string()).collect()
    }
}

fn content_digest(files: &[(String, String)]) -> String {
    let mut hasher = Sha256::new();
    for (name, body) in files {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(body.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

fn push_corpus(
    corpus: &Corpus,
    splits: &SplitAssignment,
    include: &[Split],
    stance: &mut SplitSet<StanceExample>,
    relation: &mut SplitSet<RelationExample>,
) -> Result<(), DatasetError> {
    for doc in &corpus.documents {
        let split = splits
            .get(&doc.doc_id)
            .ok_or_else(|| DatasetError::UnpairedFa(doc.doc_id.clone()))?;
        if !include.contains(&split) {
            continue;
        }
        stance.get_mut(split).extend(extract_stance_examples(doc)?);
        relation
            .get_mut(split)
            .extend(extract_relation_examples(doc)?);
    }
    Ok(())
}

/// Builds the training/evaluation data for one scenario. Splits are drawn
/// over the English documents and Persian documents follow their English
/// counterpart, so a test document never trains in either language.
pub fn assemble_scenario(
    cfg: &ScenarioConfig,
    en: &Corpus,
    fa: Option<&Corpus>,
    synth: &[StanceExample],
) -> Result<DatasetBundle, DatasetError> {
    let splits = make_splits(&en.ids(), cfg.ratios, cfg.seed, cfg.allow_empty_splits)?;
    if cfg.scenario == Scenario::LlmAug && synth.is_empty() {
        return Err(DatasetError::MissingSynth);
    }
    if let Some(fa) = fa {
        if let Some(d) = fa
            .documents
            .iter()
            .find(|d| splits.get(&d.doc_id).is_none())
        {
            return Err(DatasetError::UnpairedFa(d.doc_id.clone()));
        }
    }
    if cfg.scenario == Scenario::CrossLingual {
        let fa = fa.ok_or(DatasetError::MissingFa)?;
        if let Some(id) = en.ids().into_iter().find(|id| fa.get(id).is_none()) {
            return Err(DatasetError::UnpairedFa(id));
        }
    }

    let mut stance = SplitSet::default();
    let mut relation = SplitSet::default();
    push_corpus(en, &splits, &Split::ALL, &mut stance, &mut relation)?;
    if cfg.scenario == Scenario::LlmAug {
        stance.train.extend(synth.iter().cloned());
    }
    if let Some(fa) = fa {
        let include: &[Split] = match cfg.scenario {
            Scenario::CrossLingual => &Split::ALL,
            _ => &[Split::Test],
        };
        push_corpus(fa, &splits, include, &mut stance, &mut relation)?;
    }

    let mut bundle = DatasetBundle {
        scenario: cfg.scenario,
        splits,
        stance,
        relation,
        manifest: BundleManifest {
            scenario: cfg.scenario,
            seed: cfg.seed,
            config_digest: sha256_hex(canonical_json(cfg).as_bytes()),
            content_digest: String::new(),
            counts: BTreeMap::new(),
            config: cfg.clone(),
        },
    };
    let files = bundle.files();
    bundle.manifest.content_digest = content_digest(&files);
    bundle.manifest.counts = files
        .iter()
        .map(|(name, body)| (name.clone(), body.lines().count()))
        .collect();
    Ok(bundle)
}

/// Label histogram in `Stance::ALL` order.
pub fn stance_histogram(examples: &[StanceExample]) -> [usize; 2] {
    let mut h = [0; 2];
    for e in examples {
        h[e.label.index()] += 1;
    }
    h
}
