//! The `argmine` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 runtime failure.

mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};

use argmine_core::corpus::corpus_stats;
use argmine_core::pe::{map_pe_to_microtext, MappingOptions};
use argmine_core::Language;
use clap::{Parser, Subcommand};

use crate::brat::load_pe_dir;
use crate::corpus_io::{corpus_files, load_corpus, render_stats_table};
use crate::microtext::{parse_microtext, to_microtext_xml, ParseOptions};

pub use config::{AugmentationSection, Overrides, RunConfig};
pub use run::{RunManifest, Stage, StageRecord, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "argmine",
    version,
    about = "Stance and relation mining for argument graphs"
)]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus statistics, English and Persian side by side.
    Stats(Overrides),
    /// Check every graph in a directory against the structural invariants.
    Validate(ValidateArgs),
    /// Convert brat-annotated essays to Microtext XML.
    ConvertPe(ConvertArgs),
    /// Assemble the scenario's dataset bundle.
    Build(StageArgs),
    /// Generate synthetic ADUs to balance the stance classes.
    Augment(StageArgs),
    /// Fine-tune the model on the bundle.
    Train(StageArgs),
    /// Score the checkpoint on the test splits.
    Eval(StageArgs),
    /// Render result tables and case reports.
    Report(StageArgs),
    /// Every stage in order.
    Pipeline(StageArgs),
}

#[derive(Debug, clap::Args)]
pub struct ValidateArgs {
    /// Directory of Microtext XML files.
    pub dir: PathBuf,
    #[arg(long, default_value = "en")]
    pub language: Language,
}

#[derive(Debug, clap::Args)]
pub struct ConvertArgs {
    /// Directory of `.ann`/`.txt` pairs.
    pub pe_dir: PathBuf,
    /// Output directory for the XML files and `traces.jsonl`.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Drop unreachable premises instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, clap::Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Rerun stages even when their outputs are up to date.
    #[arg(long)]
    pub force: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Runtime = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub stage: Option<&'static str>,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Usage,
            stage: None,
            message: m.into(),
        }
    }

    pub fn data(m: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Data,
            stage: None,
            message: m.into(),
        }
    }

    pub fn runtime(m: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Runtime,
            stage: None,
            message: m.into(),
        }
    }

    pub fn in_stage(mut self, stage: &'static str) -> Self {
        self.stage.get_or_insert(stage);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stage {
            Some(s) => write!(f, "{s}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::corpus_io::LoadError> for CliError {
    fn from(e: crate::corpus_io::LoadError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        use crate::model::ModelError as M;
        match e {
            M::EncoderNotFound(_) | M::InvalidConfig(_) | M::ConfigMismatch(_) => {
                CliError::usage(e.to_string())
            }
            M::EmptyTrain | M::EmptySplit(_) | M::Tokenize(_) => CliError::data(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<argmine_core::dataset::DatasetError> for CliError {
    fn from(e: argmine_core::dataset::DatasetError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<argmine_core::augment::AugmentError> for CliError {
    fn from(e: argmine_core::augment::AugmentError) -> Self {
        use argmine_core::augment::AugmentError as A;
        match e {
            A::TargetTooSmall { .. } | A::ZeroTarget => CliError::usage(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<crate::evaluate::EvaluateError> for CliError {
    fn from(e: crate::evaluate::EvaluateError) -> Self {
        use crate::evaluate::EvaluateError as E;
        match e {
            E::Model(m) => m.into(),
            E::Graph(_) | E::Dataset(_) => CliError::data(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::runtime(format!("{}: {e}", path.display()))
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run_command(command: Command) -> Result<(), CliError> {
    match command {
        Command::Stats(o) => cmd_stats(&o),
        Command::Validate(a) => cmd_validate(&a),
        Command::ConvertPe(a) => cmd_convert_pe(&a),
        Command::Build(a) => run::run_until(Stage::Build, &a),
        Command::Augment(a) => run::run_until(Stage::Augment, &a),
        Command::Train(a) => run::run_until(Stage::Train, &a),
        Command::Eval(a) => run::run_until(Stage::Eval, &a),
        Command::Report(a) | Command::Pipeline(a) => run::run_until(Stage::Report, &a),
    }
}

pub fn parse_options(lenient: bool) -> ParseOptions {
    if lenient {
        ParseOptions::lenient()
    } else {
        ParseOptions::default()
    }
}

fn cmd_stats(o: &Overrides) -> Result<(), CliError> {
    let cfg = RunConfig::load(o)?;
    let options = parse_options(cfg.lenient);
    let en = load_corpus(&cfg.en_dir, Language::En, options)?;
    let en_stats = corpus_stats(&en.corpus);
    let fa_stats = match &cfg.fa_dir {
        Some(dir) => Some(corpus_stats(
            &load_corpus(dir, Language::Fa, options)?.corpus,
        )),
        None => {
            eprintln!("warning: no fa_dir given; showing English only");
            None
        }
    };
    let mut columns = vec![("EN", &en_stats)];
    if let Some(fa) = &fa_stats {
        columns.push(("FA", fa));
    }
    print!("{}", render_stats_table(&columns));
    if let Some(dir) = &cfg.pe_dir {
        let (_, s) = load_pe_dir(dir).map_err(|e| CliError::data(e.to_string()))?;
        println!();
        println!(
            "Persuasive essays: {} essays, {} paragraphs",
            s.essays, s.paragraphs
        );
        for (kind, n) in &s.components {
            println!("  {kind}: {n}");
        }
        println!("  relations: {}", s.relations);
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), CliError> {
    let files = corpus_files(&a.dir)?;
    if files.is_empty() {
        eprintln!("warning: no document files in {}", a.dir.display());
    }
    let options = ParseOptions {
        strict: false,
        ..ParseOptions::default()
    };
    let mut violations = 0;
    let mut unreadable = 0;
    for path in &files {
        let bytes = fs::read(path).map_err(io_error(path))?;
        match parse_microtext(&bytes, a.language, options) {
            Ok(p) => {
                for v in &p.report.violations {
                    println!("{}: {} at `{}`", p.graph.doc_id, v.code, v.offending_id);
                    violations += 1;
                }
            }
            Err(e) => {
                println!("{}: {e}", path.display());
                unreadable += 1;
            }
        }
    }
    println!(
        "{} documents, {violations} violations, {unreadable} unreadable files",
        files.len() - unreadable
    );
    if unreadable > 0 {
        return Err(CliError::data(format!(
            "{unreadable} files could not be parsed"
        )));
    }
    if violations > 0 {
        return Err(CliError::data(format!("{violations} violations")));
    }
    Ok(())
}

fn cmd_convert_pe(a: &ConvertArgs) -> Result<(), CliError> {
    let (essays, summary) = load_pe_dir(&a.pe_dir).map_err(|e| CliError::data(e.to_string()))?;
    fs::create_dir_all(&a.out).map_err(io_error(&a.out))?;
    let options = MappingOptions { lenient: a.lenient };
    let mut traces = String::new();
    let mut written = 0;
    for essay in &essays {
        let id = &essay.document.essay_id;
        let (graph, trace) = match map_pe_to_microtext(&essay.document, options) {
            Ok(r) => r,
            Err(e) if a.lenient => {
                eprintln!("warning: skipped {id}: {e}");
                continue;
            }
            Err(e) => return Err(CliError::data(format!("{id}: {e}"))),
        };
        for w in &trace.warnings {
            log::warn!("{id}: {w:?}");
        }
        let path = a.out.join(format!("{id}.xml"));
        fs::write(&path, to_microtext_xml(&graph)).map_err(io_error(&path))?;
        traces.push_str(&serde_json::to_string(&trace).expect("trace serializes"));
        traces.push('\n');
        written += 1;
    }
    let path = a.out.join("traces.jsonl");
    fs::write(&path, traces).map_err(io_error(&path))?;
    println!(
        "converted {written} of {} essays ({} paragraphs) into {}",
        summary.essays,
        summary.paragraphs,
        a.out.display()
    );
    Ok(())
}
