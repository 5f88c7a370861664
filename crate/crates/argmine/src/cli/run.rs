//! Pipeline stages under `<output_dir>/<run-id>/` and the run manifest.
//!
//! Each stage records a digest of its inputs and of every file it wrote.
//! A stage whose input digest is unchanged and whose outputs are intact is
//! skipped unless `--force` is given.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use argmine_core::augment::{AugmentError, AugmentationRun};
use argmine_core::dataset::{
    assemble_scenario, canonical_json, extract_stance_examples, make_splits, sha256_hex,
    DatasetBundle, Scenario, Split,
};
use argmine_core::eval::{
    case_report, render_per_class_table, render_results_table, MetricsReport, ModelPredictions,
    ResultRow,
};
use argmine_core::{Language, Stance};
use serde::{Deserialize, Serialize};

use super::{io_error, parse_options, CliError, RunConfig, StageArgs};
use crate::corpus_io::{corpus_files, load_corpus, LoadedCorpus};
use crate::evaluate::{evaluate_model, predict_graph, EvaluateError};
use crate::generators::{generator_from_spec, write_review_csv, write_synthetic_jsonl};
use crate::model::train::{train, train_separate, TrainedModel};
use crate::model::{build_model, load_model, MultiTaskModel, Task};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Augment,
    Build,
    Train,
    Eval,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Augment,
        Stage::Build,
        Stage::Train,
        Stage::Eval,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Augment => "augment",
            Stage::Build => "build",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::Report => "report",
        }
    }

    fn dir(self) -> &'static str {
        match self {
            Stage::Augment => "augment",
            Stage::Build => "bundle",
            Stage::Train => "checkpoint",
            Stage::Eval | Stage::Report => "reports",
        }
    }

    fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Augment => &[],
            Stage::Build => &[Stage::Augment],
            Stage::Train => &[Stage::Build],
            Stage::Eval => &[Stage::Build, Stage::Train],
            Stage::Report => &[Stage::Build, Stage::Train, Stage::Eval],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub input_digest: String,
    /// Path relative to the run directory -> SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_digest: String,
    pub config: RunConfig,
    /// Corpus name -> digest over its files' names and contents.
    pub corpora: BTreeMap<String, String>,
    pub stages: BTreeMap<Stage, StageRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub task: Task,
    pub eval_set: Language,
    pub examples: usize,
    pub report: MetricsReport,
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&fs::read(path).map_err(io_error(path))?))
}

fn corpus_digest(dir: &Path) -> Result<String, CliError> {
    let mut parts = Vec::new();
    for f in corpus_files(dir)? {
        let name = f
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        parts.push((name, sha256_file(&f)?));
    }
    Ok(sha256_hex(canonical_json(&parts).as_bytes()))
}

fn pe_digest(dir: &Path) -> Result<String, CliError> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ann" || e == "txt"))
        .collect();
    names.sort();
    let mut parts = Vec::new();
    for f in names {
        let name = f
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        parts.push((name, sha256_file(&f)?));
    }
    Ok(sha256_hex(canonical_json(&parts).as_bytes()))
}

fn files_under(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in fs::read_dir(dir).map_err(io_error(dir))? {
        let path = entry.map_err(io_error(dir))?.path();
        if path.is_dir() {
            files_under(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).unwrap_or(&path).to_path_buf());
        }
    }
    Ok(())
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    fs::write(path, body).map_err(io_error(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

struct Run {
    cfg: RunConfig,
    dir: PathBuf,
    force: bool,
    manifest: RunManifest,
    en: Option<LoadedCorpus>,
    fa: Option<LoadedCorpus>,
}

impl Run {
    fn open(cfg: RunConfig, force: bool) -> Result<Self, CliError> {
        let dir = cfg.run_dir();
        let mut corpora = BTreeMap::new();
        corpora.insert("en".to_string(), corpus_digest(&cfg.en_dir)?);
        if let Some(fa) = &cfg.fa_dir {
            corpora.insert("fa".to_string(), corpus_digest(fa)?);
        }
        if let Some(pe) = &cfg.pe_dir {
            corpora.insert("pe".to_string(), pe_digest(pe)?);
        }
        if let Some(f) = &cfg.augmentation.fixture {
            corpora.insert("fixture".to_string(), sha256_file(f)?);
        }
        let path = dir.join(MANIFEST_FILE);
        let stages = if path.is_file() && !force {
            read_json::<RunManifest>(&path)
                .map(|m| m.stages)
                .unwrap_or_default()
        } else {
            BTreeMap::new()
        };
        let manifest = RunManifest {
            run_id: cfg.run_id(),
            config_digest: cfg.digest(),
            config: cfg.clone(),
            corpora,
            stages,
        };
        Ok(Run {
            cfg,
            dir,
            force,
            manifest,
            en: None,
            fa: None,
        })
    }

    fn save_manifest(&self) -> Result<(), CliError> {
        write(&self.dir.join(MANIFEST_FILE), pretty(&self.manifest))
    }

    fn input_digest(&self, stage: Stage) -> String {
        let upstream: BTreeMap<&str, &BTreeMap<String, String>> = stage
            .upstream()
            .iter()
            .filter_map(|s| {
                self.manifest
                    .stages
                    .get(s)
                    .map(|r| (s.as_str(), &r.outputs))
            })
            .collect();
        let key = serde_json::json!({
            "stage": stage.as_str(),
            "config": self.manifest.config_digest,
            "corpora": self.manifest.corpora,
            "upstream": upstream,
        });
        sha256_hex(canonical_json(&key).as_bytes())
    }

    fn up_to_date(&self, stage: Stage, input: &str) -> bool {
        let Some(rec) = self.manifest.stages.get(&stage) else {
            return false;
        };
        rec.input_digest == input
            && rec
                .outputs
                .iter()
                .all(|(p, digest)| sha256_file(&self.dir.join(p)).is_ok_and(|d| &d == digest))
    }

    fn en(&mut self) -> Result<&LoadedCorpus, CliError> {
        if self.en.is_none() {
            let options = parse_options(self.cfg.lenient);
            self.en = Some(load_corpus(&self.cfg.en_dir, Language::En, options)?);
        }
        Ok(self.en.as_ref().expect("loaded"))
    }

    fn fa(&mut self) -> Result<Option<&LoadedCorpus>, CliError> {
        if self.fa.is_none() {
            if let Some(dir) = &self.cfg.fa_dir {
                let options = parse_options(self.cfg.lenient);
                self.fa = Some(load_corpus(dir, Language::Fa, options)?);
            }
        }
        Ok(self.fa.as_ref())
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn bundle(&self) -> Result<DatasetBundle, CliError> {
        read_json(&self.path("bundle/bundle.json"))
    }

    fn stage(&mut self, stage: Stage) -> Result<(), CliError> {
        if stage == Stage::Augment && self.cfg.scenario != Scenario::LlmAug {
            self.manifest.stages.remove(&stage);
            return Ok(());
        }
        let input = self.input_digest(stage);
        if !self.force && self.up_to_date(stage, &input) {
            log::info!("{}: up to date", stage.as_str());
            eprintln!("{}: up to date, skipped", stage.as_str());
            return Ok(());
        }
        let out_dir = self.dir.join(stage.dir());
        if stage != Stage::Report && out_dir.exists() {
            fs::remove_dir_all(&out_dir).map_err(io_error(&out_dir))?;
        }
        eprintln!("{}: running", stage.as_str());
        let result = match stage {
            Stage::Augment => self.augment(),
            Stage::Build => self.build(),
            Stage::Train => self.train(),
            Stage::Eval => self.eval(),
            Stage::Report => self.report(),
        };
        result.map_err(|e| e.in_stage(stage.as_str()))?;
        let mut written = Vec::new();
        files_under(&self.dir, &out_dir, &mut written)?;
        let mut outputs = BTreeMap::new();
        for rel in written {
            // Eval and report share a directory; each claims only its files.
            let owned = match stage {
                Stage::Eval => rel.ends_with("metrics.json"),
                Stage::Report => !rel.ends_with("metrics.json"),
                _ => true,
            };
            if owned {
                let digest = sha256_file(&self.dir.join(&rel))?;
                outputs.insert(rel.to_string_lossy().replace('\\', "/"), digest);
            }
        }
        // Stages after this one are stale now.
        for s in Stage::ALL.iter().filter(|s| **s > stage) {
            self.manifest.stages.remove(s);
        }
        self.manifest.stages.insert(
            stage,
            StageRecord {
                input_digest: input,
                outputs,
            },
        );
        self.save_manifest()
    }

    fn augment(&mut self) -> Result<(), CliError> {
        let cfg = self.cfg.clone();
        let spec = cfg
            .augmentation
            .generator
            .clone()
            .ok_or_else(|| CliError::usage("llm_aug needs augmentation.generator"))?;
        let sc = cfg.scenario_config();
        let en = &self.en()?.corpus;
        let splits = make_splits(&en.ids(), sc.ratios, sc.seed, sc.allow_empty_splits)?;
        let mut counts: BTreeMap<Stance, usize> = Stance::ALL.iter().map(|s| (*s, 0)).collect();
        let mut topics = BTreeSet::new();
        let mut existing = Vec::new();
        for doc in &en.documents {
            let examples = extract_stance_examples(doc)?;
            existing.extend(examples.iter().map(|e| e.text.clone()));
            if splits.get(&doc.doc_id) == Some(Split::Train) {
                for e in &examples {
                    *counts.entry(e.label).or_default() += 1;
                }
                if let Some(t) = &doc.topic {
                    topics.insert(t.replace('_', " "));
                }
            }
        }
        let topics: Vec<String> = topics.into_iter().collect();
        let mut generator = generator_from_spec(&spec, cfg.augmentation.fixture.as_deref())?;
        let result = argmine_core::augment::run_augmentation(
            &counts,
            generator.as_mut(),
            &spec,
            &cfg.augmentation.settings,
            &existing,
            &topics,
        );
        let (run, err) = match result {
            Ok(run) => (run, None),
            Err(AugmentError::Shortfall {
                achieved,
                required,
                run,
            }) => {
                let msg = format!(
                    "augmentation fell short: accepted {achieved:?}, required {required:?}"
                );
                (*run, Some(CliError::runtime(msg)))
            }
            Err(e) => return Err(e.into()),
        };
        self.write_augmentation(&run)?;
        if let Some(e) = err {
            return Err(e);
        }
        let c = run.accepted_counts();
        eprintln!(
            "augment: {} pro and {} con accepted, {} rejected",
            c[&Stance::Pro],
            c[&Stance::Con],
            run.rejected.len()
        );
        Ok(())
    }

    fn write_augmentation(&self, run: &AugmentationRun) -> Result<(), CliError> {
        let dir = self.path("augment");
        fs::create_dir_all(&dir).map_err(io_error(&dir))?;
        write(&dir.join("run.json"), pretty(run))?;
        let p = dir.join("synthetic.jsonl");
        write_synthetic_jsonl(&p, &run.accepted).map_err(io_error(&p))?;
        let p = dir.join("review.csv");
        write_review_csv(&p, &run.rejected)
            .map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))
    }

    fn build(&mut self) -> Result<(), CliError> {
        let synth = if self.cfg.scenario == Scenario::LlmAug {
            read_json::<AugmentationRun>(&self.path("augment/run.json"))?.stance_examples()
        } else {
            Vec::new()
        };
        let sc = self.cfg.scenario_config();
        self.en()?;
        self.fa()?;
        let en = &self.en.as_ref().expect("loaded").corpus;
        let fa = self.fa.as_ref().map(|f| &f.corpus);
        let bundle = assemble_scenario(&sc, en, fa, &synth)?;
        let leaked = bundle.leaked_doc_ids();
        if !leaked.is_empty() {
            return Err(CliError::runtime(format!(
                "test documents leak into training: {leaked:?}"
            )));
        }
        let dir = self.path("bundle");
        for (name, body) in bundle.files() {
            write(&dir.join(name), body)?;
        }
        write(&dir.join("manifest.json"), pretty(&bundle.manifest))?;
        write(
            &dir.join("bundle.json"),
            serde_json::to_string(&bundle).expect("bundle serializes"),
        )?;
        let [train, val, test] = bundle.splits.sizes();
        eprintln!("build: {train}/{val}/{test} documents in train/val/test");
        Ok(())
    }

    fn train(&mut self) -> Result<(), CliError> {
        let bundle = self.bundle()?;
        let tcfg = &self.cfg.train;
        let dir = self.path("checkpoint");
        let report = |name: &str, t: &TrainedModel| {
            let h = &t.history;
            eprintln!(
                "train{name}: {} epochs, best epoch {} (eval_loss {:.4}, initial {:.4})",
                h.epochs.len(),
                h.best_epoch,
                h.best().eval_loss,
                h.initial_eval_loss
            );
        };
        if self.cfg.separate_heads_runs {
            let (s, r) = train_separate(&self.cfg.model, &bundle, tcfg)?;
            report(" (stance)", &s);
            report(" (relation)", &r);
            s.model.save(&dir.join("stance"), Some(&s.history))?;
            r.model.save(&dir.join("relation"), Some(&r.history))?;
        } else {
            let (model, warnings) = build_model(&self.cfg.model, tcfg.seed)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            let t = train(model, &bundle, tcfg)?;
            report("", &t);
            t.model.save(&dir, Some(&t.history))?;
        }
        Ok(())
    }

    /// `(stance model, relation model)`; the same model when trained jointly.
    fn models(&self) -> Result<(MultiTaskModel, Option<MultiTaskModel>), CliError> {
        let dir = self.path("checkpoint");
        let expected = Some(&self.cfg.model);
        if self.cfg.separate_heads_runs {
            let (s, _) = load_model(&dir.join("stance"), expected)?;
            let (r, _) = load_model(&dir.join("relation"), expected)?;
            Ok((s, Some(r)))
        } else {
            Ok((load_model(&dir, expected)?.0, None))
        }
    }

    fn eval(&mut self) -> Result<(), CliError> {
        let bundle = self.bundle()?;
        let (stance_model, relation_model) = self.models()?;
        let languages: BTreeSet<Language> = bundle
            .stance
            .test
            .iter()
            .map(|e| e.language)
            .chain(bundle.relation.test.iter().map(|e| e.language))
            .collect();
        let mut entries = Vec::new();
        for task in Task::ALL {
            let model = match task {
                Task::Relation => relation_model.as_ref().unwrap_or(&stance_model),
                Task::Stance => &stance_model,
            };
            for &lang in &languages {
                match evaluate_model(model, &bundle, Split::Test, task, Some(lang)) {
                    Ok(report) => entries.push(EvalEntry {
                        task,
                        eval_set: lang,
                        examples: report.confusion.total(),
                        report,
                    }),
                    Err(e @ EvaluateError::EmptySplit { .. }) => eprintln!("warning: {e}"),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        for e in &entries {
            eprintln!(
                "eval: {} {} macro F1 {:.1} over {} examples",
                e.task,
                e.eval_set.upper(),
                100.0 * e.report.macro_avg.f1,
                e.examples
            );
        }
        write(&self.path("reports/metrics.json"), pretty(&entries))
    }

    fn report(&mut self) -> Result<(), CliError> {
        let entries: Vec<EvalEntry> = read_json(&self.path("reports/metrics.json"))?;
        let generator = match self.cfg.scenario {
            Scenario::LlmAug => self
                .cfg
                .augmentation
                .generator
                .as_ref()
                .map(|g| g.name.clone()),
            _ => None,
        };
        let rows = |task: Task| -> Vec<ResultRow> {
            entries
                .iter()
                .filter(|e| e.task == task)
                .map(|e| ResultRow {
                    scenario: self.cfg.scenario,
                    model: generator.clone(),
                    eval_set: e.eval_set,
                    report: e.report.clone(),
                })
                .collect()
        };
        let mut text = String::new();
        for task in Task::ALL {
            let rows = rows(task);
            if rows.is_empty() {
                continue;
            }
            let macro_table = render_results_table(&rows);
            let per_class = render_per_class_table(&rows);
            for w in macro_table.warnings.iter().chain(&per_class.warnings) {
                eprintln!("warning: {w}");
            }
            text.push_str(&format!("{} (macro)\n{}\n", task, macro_table.text));
            text.push_str(&format!("{} (per class)\n{}\n", task, per_class.text));
        }
        write(&self.path("reports/results.txt"), &text)?;
        print!("{text}");

        let bundle = self.bundle()?;
        let (stance_model, relation_model) = self.models()?;
        let name = self.cfg.scenario.display_name();
        let test: Vec<String> = bundle
            .splits
            .docs(Split::Test)
            .map(str::to_string)
            .collect();
        let mut cases = String::new();
        self.en()?;
        self.fa()?;
        let corpora: Vec<&LoadedCorpus> = self.en.iter().chain(self.fa.iter()).collect();
        for corpus in corpora {
            let lang = corpus.corpus.language;
            if bundle.stance.test.iter().all(|e| e.language != lang) {
                continue;
            }
            for id in &test {
                let Some(g) = corpus.corpus.get(id) else {
                    continue;
                };
                let mut p: ModelPredictions = predict_graph(&stance_model, name, g)?;
                if let Some(r) = &relation_model {
                    p.relations = predict_graph(r, name, g)?.relations;
                }
                let report = case_report(g, &[p]).map_err(|e| CliError::runtime(e.to_string()))?;
                cases.push_str(&format!("[{}] ", lang.upper()));
                cases.push_str(&report.render());
                cases.push('\n');
            }
        }
        write(&self.path("reports/cases.txt"), cases)
    }
}

pub(super) fn run_until(last: Stage, args: &StageArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.overrides)?;
    cfg.check()?;
    let mut run = Run::open(cfg, args.force)?;
    fs::create_dir_all(&run.dir).map_err(io_error(&run.dir))?;
    for stage in Stage::ALL.into_iter().filter(|s| *s <= last) {
        run.stage(stage)?;
    }
    run.save_manifest()?;
    println!("{}", run.dir.display());
    Ok(())
}
