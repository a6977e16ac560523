//! `sdp`: command-line driver for the defect prediction pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 data or schema error, 3 numeric
//! failure. Failures print one line on stderr:
//! `error: class=<usage|data|numeric> reason=<message>`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;

use sdp_core::harness::{
    clean_stage, correlate_stage, emit_report, evaluate_stage, explain_stage, generate_dataset, load_cleaned,
    model_path, run_pipeline, train_stage, GeneratorConfig, RunConfig,
};
use sdp_core::learners::ModelKind;
use sdp_core::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(name = "sdp", version, about = "Defect-count prediction from project metrics")]
struct Cli {
    /// Log stage progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic raw export and its ground-truth sidecar.
    Generate {
        /// CSV path; the sidecar lands next to it as <stem>.truth.json.
        #[arg(long = "out")]
        out: PathBuf,
        /// Generator settings (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of rows.
        #[arg(long)]
        n: Option<usize>,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Clean a raw export into <out>/cleaned.csv and <out>/cleaning_report.json.
    Clean(StageArgs),
    /// Correlate numeric predictors with the target.
    Correlate(StageArgs),
    /// Search hyperparameters and fit models into <out>/models.
    Train(StageArgs),
    /// Score model files on their train and test rows.
    Evaluate(ModelStageArgs),
    /// Impurity importances and SHAP attributions.
    Explain(ModelStageArgs),
    /// Build <in>/report from a run directory.
    Report {
        /// Run directory holding the stage artifacts.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Every stage from a raw export to the report.
    Pipeline(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Raw export (clean, pipeline) or cleaned CSV (later stages).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the split, folds, search and learners.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict the roster; repeatable.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Cross-validation folds.
    #[arg(long)]
    cv: Option<usize>,
    /// Random-search trials per model.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct ModelStageArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Explicit model file instead of <out>/models/<model>.json; repeatable.
    #[arg(long = "model-file")]
    model_files: Vec<PathBuf>,
}

impl StageArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(k) = self.cv {
            c.cv_folds = k;
        }
        if let Some(t) = self.trials {
            c.trials = t;
        }
        if !self.models.is_empty() {
            for m in &self.models {
                m.parse::<ModelKind>()?;
            }
            c.models = self.models.clone();
        }
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.out.is_some() {
            c.output = self.out.clone();
        }
        c.validate().map_err(|e| match e {
            Error::Config(m) if self.config.is_none() => Error::usage(m),
            e => e,
        })?;
        Ok(c)
    }
}

fn required(p: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| Error::usage(format!("{flag} is required (flag or config file)")))
}

fn model_files(args: &ModelStageArgs, config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if !args.model_files.is_empty() {
        return Ok(args.model_files.clone());
    }
    Ok(config.kinds()?.into_iter().map(|k| model_path(out, k)).collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { out, config, n, seed } => {
            let mut c = match config {
                Some(p) => GeneratorConfig::load(&p)?,
                None => GeneratorConfig::default(),
            };
            if let Some(n) = n {
                c.n_records = n;
            }
            if let Some(s) = seed {
                c.seed = s;
            }
            let g = generate_dataset(&c)?;
            g.save(&out)?;
        }
        Command::Clean(a) => {
            let c = a.config()?;
            clean_stage(&required(&c.input, "--in")?, &required(&c.output, "--out")?, &c)?;
        }
        Command::Correlate(a) => {
            let c = a.config()?;
            let records = load_cleaned(&required(&c.input, "--in")?)?;
            correlate_stage(&records, &required(&c.output, "--out")?, &c)?;
        }
        Command::Train(a) => {
            let c = a.config()?;
            let records = load_cleaned(&required(&c.input, "--in")?)?;
            train_stage(&records, &required(&c.output, "--out")?, &c, &c.kinds()?)?;
        }
        Command::Evaluate(a) => {
            let c = a.stage.config()?;
            let out = required(&c.output, "--out")?;
            let files = model_files(&a, &c, &out)?;
            let records = load_cleaned(&required(&c.input, "--in")?)?;
            let rows = evaluate_stage(&records, &out, &c, &files)?;
            for r in rows {
                println!("{}\ttest_r2={:.6}\tcv={:.6}", r.model, r.test.r2, r.cv_score);
            }
        }
        Command::Explain(a) => {
            let c = a.stage.config()?;
            let out = required(&c.output, "--out")?;
            let files = model_files(&a, &c, &out)?;
            let records = load_cleaned(&required(&c.input, "--in")?)?;
            explain_stage(&records, &out, &c, &files)?;
        }
        Command::Report { input } => {
            emit_report(&input)?;
        }
        Command::Pipeline(a) => {
            let c = a.config()?;
            run_pipeline(&required(&c.input, "--in")?, &required(&c.output, "--out")?, &c)?;
        }
    }
    Ok(())
}

fn fail(class: &str, message: &str) -> ExitCode {
    let one_line = message.replace(['\n', '\r'], " ");
    eprintln!("error: class={class} reason={one_line}");
    ExitCode::from(match class {
        "usage" => 1,
        "data" => 2,
        _ => 3,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return fail("usage", first.trim_start_matches("error: "));
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { LevelFilter::Info } else { LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(
            match e.class() {
                ErrorClass::Usage => "usage",
                ErrorClass::Data => "data",
                ErrorClass::Numeric => "numeric",
            },
            &e.to_string(),
        ),
    }
}
