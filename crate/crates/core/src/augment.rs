//! Class balancing with synthetic ADUs.
//!
//! A plan tops every stance up to the same target count. Candidates come
//! from a [`Generator`] (an offline replay fixture in tests, an HTTP model
//! endpoint in live runs) and pass a rule filter before they are kept.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::StanceExample;
use crate::graph::{Language, Stance};
use crate::text::{normalize_for_dedup, script_share, word_count};

/// Balance target used for the English Microtext corpus.
pub const DEFAULT_TARGET: usize = 665;

/// Default prompt. Our own wording; `{stance}` and `{topic}` are filled per
/// request and `{n}` with the batch size.
pub const DEFAULT_PROMPT_TEMPLATE: &str = "Write {n} short, self-contained argumentative sentences in English that take the {stance} side on the topic \"{topic}\". Each sentence should read like one argumentative discourse unit from a student essay. Return one sentence per line without numbering.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub target_per_class: usize,
    pub deficits: BTreeMap<Stance, usize>,
}

impl AugmentationPlan {
    pub fn deficit(&self, stance: Stance) -> usize {
        self.deficits.get(&stance).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.deficits.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AugmentError {
    #[error("target {target} is below the largest class count {largest}")]
    TargetTooSmall { target: usize, largest: usize },
    #[error("target per class must be positive")]
    ZeroTarget,
    #[error("generator `{name}` not reachable: {reason}")]
    GeneratorUnreachable { name: String, reason: String },
    #[error("replay fixture has no {0} candidates left")]
    FixtureExhausted(Stance),
    #[error("generator protocol error: {0}")]
    Protocol(String),
    #[error("augmentation fell short: achieved {achieved:?}, required {required:?}")]
    Shortfall {
        achieved: BTreeMap<Stance, usize>,
        required: BTreeMap<Stance, usize>,
        run: alloc::boxed::Box<AugmentationRun>,
    },
}

/// Deficit per class so that `count + deficit == target` for every class.
pub fn plan_balance(
    counts: &BTreeMap<Stance, usize>,
    target: usize,
) -> Result<AugmentationPlan, AugmentError> {
    if target == 0 {
        return Err(AugmentError::ZeroTarget);
    }
    let largest = Stance::ALL
        .iter()
        .map(|s| counts.get(s).copied().unwrap_or(0))
        .max()
        .unwrap_or(0);
    if target < largest {
        return Err(AugmentError::TargetTooSmall { target, largest });
    }
    let deficits = Stance::ALL
        .iter()
        .map(|s| (*s, target - counts.get(s).copied().unwrap_or(0)))
        .collect();
    Ok(AugmentationPlan {
        target_per_class: target,
        deficits,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// `replay`, `http`, ...
    pub name: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_template")]
    pub prompt_template: String,
    #[serde(default)]
    pub decoding: BTreeMap<String, String>,
}

fn default_template() -> String {
    DEFAULT_PROMPT_TEMPLATE.to_string()
}

impl GeneratorSpec {
    pub fn new(name: &str) -> Self {
        GeneratorSpec {
            name: name.to_string(),
            endpoint: None,
            prompt_template: default_template(),
            decoding: BTreeMap::new(),
        }
    }

    pub fn render_prompt(&self, stance: Stance, topic: &str, n: usize) -> String {
        self.prompt_template
            .replace("{stance}", stance.as_str())
            .replace("{topic}", topic)
            .replace("{n}", &format!("{n}"))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectionReason {
    Empty,
    TooShort,
    TooLong,
    Duplicate,
    WrongLanguage,
}

impl RejectionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectionReason::Empty => "EMPTY",
            RejectionReason::TooShort => "TOO_SHORT",
            RejectionReason::TooLong => "TOO_LONG",
            RejectionReason::Duplicate => "DUPLICATE",
            RejectionReason::WrongLanguage => "WRONG_LANGUAGE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticAdu {
    pub text: String,
    pub stance: Stance,
    pub generator_name: String,
    pub accepted: bool,
    pub rejection_reason: Option<RejectionReason>,
}

impl SyntheticAdu {
    pub fn candidate(text: &str, stance: Stance, generator_name: &str) -> Self {
        SyntheticAdu {
            text: text.to_string(),
            stance,
            generator_name: generator_name.to_string(),
            accepted: false,
            rejection_reason: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationRequest {
    pub prompt: String,
    pub stance: Stance,
    pub n: usize,
    pub topic: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub stance: Stance,
    pub requested: usize,
    pub returned: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Generated {
    pub candidates: Vec<SyntheticAdu>,
    pub shortfall: Option<Shortfall>,
}

/// A source of candidate texts. Implementations may return fewer than
/// requested; callers see that as a [`Shortfall`].
pub trait Generator {
    fn name(&self) -> &str;
    fn request(&mut self, request: &GenerationRequest) -> Result<Vec<String>, AugmentError>;
}

/// Renders the prompt, asks the generator for `n` candidates and reports a
/// shortfall when fewer arrive.
pub fn generate(
    generator: &mut dyn Generator,
    spec: &GeneratorSpec,
    stance: Stance,
    n: usize,
    topic_hints: &[String],
) -> Result<Generated, AugmentError> {
    if n == 0 {
        return Ok(Generated::default());
    }
    let topic = topic_hints
        .first()
        .map(String::as_str)
        .unwrap_or("a controversial issue");
    let request = GenerationRequest {
        prompt: spec.render_prompt(stance, topic, n),
        stance,
        n,
        topic: topic.to_string(),
    };
    let mut texts = generator.request(&request)?;
    texts.truncate(n);
    let name = generator.name().to_string();
    let returned = texts.len();
    Ok(Generated {
        candidates: texts
            .iter()
            .map(|t| SyntheticAdu::candidate(t, stance, &name))
            .collect(),
        shortfall: (returned < n).then_some(Shortfall {
            stance,
            requested: n,
            returned,
        }),
    })
}

/// Serves pre-recorded `(text, stance)` pairs in file order, per stance.
#[derive(Clone, Debug)]
pub struct ReplayGenerator {
    name: String,
    by_stance: BTreeMap<Stance, Vec<String>>,
    cursor: BTreeMap<Stance, usize>,
    calls: usize,
}

impl ReplayGenerator {
    pub fn new(name: &str, records: impl IntoIterator<Item = (String, Stance)>) -> Self {
        let mut by_stance: BTreeMap<Stance, Vec<String>> = BTreeMap::new();
        for (text, stance) in records {
            by_stance.entry(stance).or_default().push(text);
        }
        ReplayGenerator {
            name: name.to_string(),
            by_stance,
            cursor: BTreeMap::new(),
            calls: 0,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn remaining(&self, stance: Stance) -> usize {
        let total = self.by_stance.get(&stance).map_or(0, Vec::len);
        total - self.cursor.get(&stance).copied().unwrap_or(0)
    }
}

impl Generator for ReplayGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn request(&mut self, request: &GenerationRequest) -> Result<Vec<String>, AugmentError> {
        self.calls += 1;
        let pool = self
            .by_stance
            .get(&request.stance)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let start = self.cursor.get(&request.stance).copied().unwrap_or(0);
        if start >= pool.len() {
            return Err(AugmentError::FixtureExhausted(request.stance));
        }
        let end = (start + request.n).min(pool.len());
        self.cursor.insert(request.stance, end);
        Ok(pool[start..end].to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub language: Language,
    /// Minimum share of letters in the language's script.
    pub min_script_share: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_tokens: 3,
            max_tokens: 128,
            language: Language::En,
            min_script_share: 0.5,
        }
    }
}

/// Normalized texts already in the data, updated by a single writer as
/// candidates are accepted.
#[derive(Clone, Debug, Default)]
pub struct DedupSet {
    seen: BTreeSet<String>,
}

impl DedupSet {
    pub fn new<'a>(existing: impl IntoIterator<Item = &'a str>) -> Self {
        DedupSet {
            seen: existing.into_iter().map(normalize_for_dedup).collect(),
        }
    }

    pub fn contains(&self, text: &str) -> bool {
        self.seen.contains(&normalize_for_dedup(text))
    }

    fn insert(&mut self, text: &str) -> bool {
        self.seen.insert(normalize_for_dedup(text))
    }
}

fn check(text: &str, cfg: &FilterConfig) -> Option<RejectionReason> {
    if text.trim().is_empty() {
        return Some(RejectionReason::Empty);
    }
    let tokens = word_count(text);
    if tokens < cfg.min_tokens {
        return Some(RejectionReason::TooShort);
    }
    if tokens > cfg.max_tokens {
        return Some(RejectionReason::TooLong);
    }
    match script_share(text, cfg.language) {
        Some(share) if share >= cfg.min_script_share => None,
        _ => Some(RejectionReason::WrongLanguage),
    }
}

fn filter_into(
    cands: Vec<SyntheticAdu>,
    dedup: &mut DedupSet,
    cfg: &FilterConfig,
    accepted: &mut Vec<SyntheticAdu>,
    rejected: &mut Vec<SyntheticAdu>,
) {
    for mut c in cands {
        let mut reason = check(&c.text, cfg);
        if reason.is_none() && !dedup.insert(&c.text) {
            reason = Some(RejectionReason::Duplicate);
        }
        c.accepted = reason.is_none();
        c.rejection_reason = reason;
        if c.accepted {
            accepted.push(c);
        } else {
            rejected.push(c);
        }
    }
}

/// Splits candidates into accepted and rejected. Duplicates are judged after
/// case folding and whitespace collapsing, against `existing_texts` and
/// against candidates accepted earlier in the same batch.
pub fn filter_malformed(
    cands: Vec<SyntheticAdu>,
    existing_texts: &[String],
    cfg: &FilterConfig,
) -> (Vec<SyntheticAdu>, Vec<SyntheticAdu>) {
    let mut dedup = DedupSet::new(existing_texts.iter().map(String::as_str));
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    filter_into(cands, &mut dedup, cfg, &mut accepted, &mut rejected);
    (accepted, rejected)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub target_per_class: usize,
    /// Upper bound on candidates asked for in one call.
    pub batch_size: usize,
    /// Generator calls allowed per class before giving up.
    pub max_calls_per_class: usize,
    #[serde(default)]
    pub filter: FilterConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            target_per_class: DEFAULT_TARGET,
            batch_size: 64,
            max_calls_per_class: 100,
            filter: FilterConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationRun {
    pub plan: AugmentationPlan,
    /// Accepted candidates, pro first, in generation order.
    pub accepted: Vec<SyntheticAdu>,
    pub rejected: Vec<SyntheticAdu>,
    pub calls: BTreeMap<Stance, usize>,
    pub shortfalls: Vec<Shortfall>,
}

impl AugmentationRun {
    pub fn accepted_counts(&self) -> BTreeMap<Stance, usize> {
        let mut counts: BTreeMap<Stance, usize> = Stance::ALL.iter().map(|s| (*s, 0)).collect();
        for a in &self.accepted {
            *counts.entry(a.stance).or_default() += 1;
        }
        counts
    }

    /// Accepted candidates as English stance examples.
    pub fn stance_examples(&self) -> Vec<StanceExample> {
        self.accepted
            .iter()
            .enumerate()
            .map(|(i, a)| StanceExample {
                doc_id: format!("synthetic/{}", a.generator_name),
                adu_id: format!("syn{i:05}"),
                text: a.text.clone(),
                label: a.stance,
                language: Language::En,
            })
            .collect()
    }
}

/// Generates, filters and retries per class until each deficit is met.
/// Runs with a replay generator are fully deterministic.
pub fn run_augmentation(
    counts: &BTreeMap<Stance, usize>,
    generator: &mut dyn Generator,
    spec: &GeneratorSpec,
    cfg: &AugmentConfig,
    existing_texts: &[String],
    topic_hints: &[String],
) -> Result<AugmentationRun, AugmentError> {
    let plan = plan_balance(counts, cfg.target_per_class)?;
    let mut dedup = DedupSet::new(existing_texts.iter().map(String::as_str));
    let mut run = AugmentationRun {
        plan: plan.clone(),
        accepted: Vec::new(),
        rejected: Vec::new(),
        calls: BTreeMap::new(),
        shortfalls: Vec::new(),
    };
    let mut short = false;
    for stance in Stance::ALL {
        let need = plan.deficit(stance);
        let mut got = 0usize;
        let mut calls = 0usize;
        while got < need && calls < cfg.max_calls_per_class {
            let n = (need - got).min(cfg.batch_size.max(1));
            let topic: Vec<String> = if topic_hints.is_empty() {
                Vec::new()
            } else {
                alloc::vec![topic_hints[calls % topic_hints.len()].clone()]
            };
            calls += 1;
            let generated = match generate(generator, spec, stance, n, &topic) {
                Ok(g) => g,
                Err(AugmentError::FixtureExhausted(_)) => break,
                Err(e) => return Err(e),
            };
            if let Some(s) = generated.shortfall {
                run.shortfalls.push(s);
            }
            let before = run.accepted.len();
            filter_into(
                generated.candidates,
                &mut dedup,
                &cfg.filter,
                &mut run.accepted,
                &mut run.rejected,
            );
            got += run.accepted.len() - before;
        }
        run.calls.insert(stance, calls);
        short |= got < need;
    }
    if short {
        return Err(AugmentError::Shortfall {
            achieved: run.accepted_counts(),
            required: plan.deficits.clone(),
            run: alloc::boxed::Box::new(run),
        });
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn counts(pro: usize, con: usize) -> BTreeMap<Stance, usize> {
        [(Stance::Pro, pro), (Stance::Con, con)]
            .into_iter()
            .collect()
    }

    #[test]
    fn plan_for_microtext() {
        let plan = plan_balance(&counts(451, 125), 665).unwrap();
        assert_eq!(plan.deficits, counts(214, 540));
    }

    #[test]
    fn plan_already_balanced() {
        assert_eq!(
            plan_balance(&counts(665, 665), 665).unwrap().deficits,
            counts(0, 0)
        );
    }

    #[test]
    fn plan_small_counts() {
        let plan = plan_balance(&counts(10, 3), 12).unwrap();
        assert_eq!(plan.deficits, counts(2, 9));
        for s in Stance::ALL {
            assert_eq!(counts(10, 3)[&s] + plan.deficit(s), 12);
        }
    }

    #[test]
    fn plan_target_too_small() {
        assert_eq!(
            plan_balance(&counts(10, 3), 9).unwrap_err(),
            AugmentError::TargetTooSmall {
                target: 9,
                largest: 10
            }
        );
    }

    fn replay(n_pro: usize, n_con: usize) -> ReplayGenerator {
        let recs = (0..n_pro)
            .map(|i| (format!("pro sentence number {i} here"), Stance::Pro))
            .chain((0..n_con).map(|i| (format!("con sentence number {i} here"), Stance::Con)));
        ReplayGenerator::new("replay", recs)
    }

    #[test]
    fn replay_passthrough_and_zero() {
        let mut g = replay(2, 8);
        let spec = GeneratorSpec::new("replay");
        let out = generate(&mut g, &spec, Stance::Con, 5, &[]).unwrap();
        assert_eq!(out.candidates.len(), 5);
        assert_eq!(out.candidates[0].text, "con sentence number 0 here");
        assert!(out.shortfall.is_none());
        assert!(generate(&mut g, &spec, Stance::Con, 0, &[])
            .unwrap()
            .candidates
            .is_empty());
        let out = generate(&mut g, &spec, Stance::Con, 5, &[]).unwrap();
        assert_eq!(out.candidates.len(), 3);
        assert_eq!(out.shortfall.unwrap().returned, 3);
        assert_eq!(
            generate(&mut g, &spec, Stance::Con, 1, &[]).unwrap_err(),
            AugmentError::FixtureExhausted(Stance::Con)
        );
    }

    #[test]
    fn filter_counts_by_rule() {
        let texts = [
            "",
            "   ",
            "Recycling saves valuable resources for everyone.",
            "recycling   SAVES valuable resources for everyone.",
            "Taxes should fund public transport.",
            "Bike lanes make streets safer.",
            "Cities need more green spaces.",
            "Schools should start later in the morning.",
            "Fines alone will not change behaviour.",
            "Homework harms family time for kids.",
        ];
        let cands: Vec<SyntheticAdu> = texts
            .iter()
            .map(|t| SyntheticAdu::candidate(t, Stance::Con, "g"))
            .collect();
        let (acc, rej) = filter_malformed(cands, &[], &FilterConfig::default());
        let reasons: Vec<RejectionReason> = rej.iter().filter_map(|r| r.rejection_reason).collect();
        assert_eq!(
            reasons,
            [
                RejectionReason::Empty,
                RejectionReason::Empty,
                RejectionReason::Duplicate,
            ]
        );
        assert_eq!(acc.len(), 7);
        assert!(acc
            .iter()
            .all(|a| a.accepted && a.rejection_reason.is_none()));
    }

    #[test]
    fn filter_rejects_corpus_duplicates_and_wrong_script() {
        let existing = vec!["An existing corpus ADU text.".to_string()];
        let cands = vec![
            SyntheticAdu::candidate("an existing corpus adu text.", Stance::Pro, "g"),
            SyntheticAdu::candidate("این یک جمله فارسی است", Stance::Pro, "g"),
        ];
        let (acc, rej) = filter_malformed(cands, &existing, &FilterConfig::default());
        assert!(acc.is_empty());
        assert_eq!(rej[0].rejection_reason, Some(RejectionReason::Duplicate));
        assert_eq!(
            rej[1].rejection_reason,
            Some(RejectionReason::WrongLanguage)
        );
        let (_, rej) = filter_malformed(
            vec![SyntheticAdu::candidate("Too short", Stance::Pro, "g")],
            &[],
            &FilterConfig::default(),
        );
        assert_eq!(rej[0].rejection_reason, Some(RejectionReason::TooShort));
        let long = "word ".repeat(129);
        let (_, rej) = filter_malformed(
            vec![SyntheticAdu::candidate(&long, Stance::Pro, "g")],
            &[],
            &FilterConfig::default(),
        );
        assert_eq!(rej[0].rejection_reason, Some(RejectionReason::TooLong));
    }

    #[test]
    fn run_meets_deficits() {
        let mut g = replay(10, 20);
        let cfg = AugmentConfig {
            target_per_class: 12,
            batch_size: 4,
            max_calls_per_class: 10,
            filter: FilterConfig::default(),
        };
        let run = run_augmentation(
            &counts(10, 3),
            &mut g,
            &GeneratorSpec::new("replay"),
            &cfg,
            &[],
            &[],
        )
        .unwrap();
        assert_eq!(run.accepted_counts(), counts(2, 9));
        assert_eq!(run.calls[&Stance::Con], 3);
        assert_eq!(run.stance_examples().len(), 11);
    }

    #[test]
    fn run_without_deficit_is_empty() {
        let mut g = replay(1, 1);
        let cfg = AugmentConfig {
            target_per_class: 10,
            ..AugmentConfig::default()
        };
        let run = run_augmentation(
            &counts(10, 10),
            &mut g,
            &GeneratorSpec::new("replay"),
            &cfg,
            &[],
            &[],
        )
        .unwrap();
        assert!(run.accepted.is_empty());
        assert_eq!(g.calls(), 0);
    }

    #[test]
    fn run_reports_shortfall() {
        let mut g = replay(0, 2);
        let cfg = AugmentConfig {
            target_per_class: 5,
            ..AugmentConfig::default()
        };
        match run_augmentation(
            &counts(5, 1),
            &mut g,
            &GeneratorSpec::new("replay"),
            &cfg,
            &[],
            &[],
        ) {
            Err(AugmentError::Shortfall {
                achieved, required, ..
            }) => {
                assert_eq!(achieved, counts(0, 2));
                assert_eq!(required, counts(0, 4));
            }
            other => panic!("expected shortfall, got {other:?}"),
        }
    }

    #[test]
    fn prompt_slots() {
        let spec = GeneratorSpec::new("x");
        let p = spec.render_prompt(Stance::Con, "waste separation", 3);
        assert!(p.contains("con side"));
        assert!(p.contains("\"waste separation\""));
        assert!(p.starts_with("Write 3 "));
    }
}
