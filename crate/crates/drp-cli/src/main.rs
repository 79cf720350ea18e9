//! `drp` — run the difference-aware personalization pipeline end to end:
//! corpus validation, pipeline runs (with baselines), metric evaluation,
//! and unique-valid-feature analysis. Exit codes: 0 success, 2 input or
//! validation error, 3 provider or runtime error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::CliConfig;
use drp_core::corpus::{load_corpus, Corpus, FormatTag};
use drp_core::gateway::{Gateway, GatewayError, ProviderKind};
use drp_core::metrics::{average_reports, evaluate_run, MetricReport};
use drp_core::pipeline::{
    mockgen, read_jsonl, run_pipeline, temperature_label, GeneratedReview, Mode, PipelineError,
    ReportRecord, RunManifest,
};
use drp_core::uvq::{judge_and_aggregate, UvqError};

const EXIT_INPUT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "drp",
    version,
    about = "Difference-aware personalized review generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    Drp,
    Rag,
    NonP,
}

impl From<ModeArg> for Mode {
    fn from(mode: ModeArg) -> Mode {
        match mode {
            ModeArg::Drp => Mode::Drp,
            ModeArg::Rag => Mode::Rag,
            ModeArg::NonP => Mode::NonP,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and print split/user counts.
    Ingest { corpus: PathBuf },
    /// Execute a pipeline run and write the artifact bundle.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Override the configured pipeline mode.
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Force every LLM role onto its mock provider.
        #[arg(long)]
        mock: bool,
    },
    /// Score a run's generations against the corpus test references.
    Eval { run_dir: PathBuf, corpus: PathBuf },
    /// Judge extracted features and compute unique-valid-quantity reports.
    Uvq {
        run_dir: PathBuf,
        /// Force the judge role onto its mock provider.
        #[arg(long)]
        mock_judge: bool,
    },
    /// Generate the mock fixture set for a corpus + config.
    Mockgen {
        #[arg(short, long)]
        config: PathBuf,
        /// Override the configured pipeline mode.
        #[arg(long)]
        mode: Option<ModeArg>,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

fn pipeline_error(e: PipelineError) -> CliError {
    let code = match &e {
        PipelineError::Corpus(_) | PipelineError::Config(_) => EXIT_INPUT,
        _ => EXIT_RUNTIME,
    };
    CliError {
        code,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    // Die quietly on SIGPIPE so `drp ... | head` works like any Unix tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { corpus } => cmd_ingest(&corpus),
        Command::Run { config, mode, mock } => cmd_run(&config, mode.map(Mode::from), mock),
        Command::Eval { run_dir, corpus } => cmd_eval(&run_dir, &corpus),
        Command::Uvq {
            run_dir,
            mock_judge,
        } => cmd_uvq(&run_dir, mock_judge),
        Command::Mockgen { config, mode } => cmd_mockgen(&config, mode.map(Mode::from)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn load_corpus_cli(path: &Path) -> Result<Corpus, CliError> {
    load_corpus(path, FormatTag::Jsonl).map_err(|e| CliError::input(e.to_string()))
}

fn cmd_ingest(corpus_path: &Path) -> Result<(), CliError> {
    let corpus = load_corpus_cli(corpus_path)?;
    let users = corpus.all_users();
    println!(
        "users: {}, train: {}, test: {}",
        users.len(),
        corpus.train.len(),
        corpus.test.len()
    );
    for (user, (train, test)) in corpus.per_user_counts() {
        println!("  {user}: train {train}, test {test}");
    }
    Ok(())
}

fn load_config(config_path: &Path, mode: Option<Mode>, mock: bool) -> Result<CliConfig, CliError> {
    let mut config = CliConfig::load(config_path).map_err(CliError::input)?;
    if let Some(mode) = mode {
        config.run.mode = mode;
    }
    if mock {
        config.force_mock().map_err(CliError::input)?;
    }
    config.run.validate().map_err(pipeline_error)?;
    Ok(config)
}

fn cmd_run(config_path: &Path, mode: Option<Mode>, mock: bool) -> Result<(), CliError> {
    let config = load_config(config_path, mode, mock)?;
    let corpus = load_corpus_cli(&config.corpus_path)?;
    let artifact = run_pipeline(
        &corpus,
        &config.run,
        &config.output_dir,
        Some(&config.cache_dir),
    )
    .map_err(pipeline_error)?;
    let manifest = &artifact.manifest;
    println!("run dir: {}", artifact.run_dir.display());
    println!("manifest digest: {}", manifest.digest());
    for run in &manifest.temperature_runs {
        println!(
            "T={}: {} samples ok, {} failed; calls extractor={} validator={} summarizer={} generator={}",
            run.temperature,
            run.samples_ok,
            run.errors.len(),
            run.counts.extractor,
            run.counts.validator,
            run.counts.summarizer,
            run.counts.generator,
        );
    }
    println!(
        "provider calls: {} (remote: {}), cache hits: {}",
        manifest.gateway.provider_calls, manifest.gateway.remote_calls, manifest.gateway.cache_hits
    );
    Ok(())
}

fn write_report(path: &Path, report: &MetricReport) -> Result<(), CliError> {
    let bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    std::fs::write(path, bytes)
        .map_err(|e| CliError::runtime(format!("write {}: {e}", path.display())))
}

fn cmd_eval(run_dir: &Path, corpus_path: &Path) -> Result<(), CliError> {
    let manifest = RunManifest::load(run_dir).map_err(|e| CliError::input(e.to_string()))?;
    let corpus = load_corpus_cli(corpus_path)?;
    let mut reports = Vec::new();
    for run in &manifest.temperature_runs {
        let label = temperature_label(run.temperature);
        let path = run_dir.join(format!("generations.{label}.jsonl"));
        if !path.is_file() {
            return Err(CliError::input(format!(
                "missing generations file {}",
                path.display()
            )));
        }
        let generations: Vec<GeneratedReview> =
            read_jsonl(&path).map_err(|e| CliError::input(e.to_string()))?;
        let report = evaluate_run(&generations, &corpus)
            .map_err(|e| CliError::input(format!("evaluate T={}: {e}", run.temperature)))?;
        println!(
            "T={}: bleu {:.4}, meteor {:.4}, rouge1 {:.4}, rougeL {:.4} over {} samples",
            run.temperature,
            report.corpus.bleu,
            report.corpus.meteor,
            report.corpus.rouge1_f,
            report.corpus.rouge_l_f,
            report.n_samples,
        );
        write_report(&run_dir.join(format!("metrics.{label}.json")), &report)?;
        reports.push(report);
    }
    let averaged = average_reports(&reports).map_err(|e| CliError::input(e.to_string()))?;
    println!(
        "avg: bleu {:.4}, meteor {:.4}, rouge1 {:.4}, rougeL {:.4}",
        averaged.corpus.bleu,
        averaged.corpus.meteor,
        averaged.corpus.rouge1_f,
        averaged.corpus.rouge_l_f
    );
    write_report(&run_dir.join("metrics.avg.json"), &averaged)?;
    Ok(())
}

fn uvq_error(e: UvqError) -> CliError {
    match e {
        UvqError::Gateway(GatewayError::FixtureMiss(d)) => {
            CliError::runtime(format!("no mock fixture for digest {d}"))
        }
        UvqError::Gateway(e) => CliError::runtime(e.to_string()),
        other => CliError::runtime(other.to_string()),
    }
}

fn cmd_uvq(run_dir: &Path, mock_judge: bool) -> Result<(), CliError> {
    let manifest = RunManifest::load(run_dir).map_err(|e| CliError::input(e.to_string()))?;
    let mut judge = manifest.config.roles.judge.clone();
    if mock_judge {
        judge.kind = ProviderKind::Mock;
        if judge.fixture_dir.is_none() {
            return Err(CliError::input(
                "--mock-judge: judge spec has no fixture_dir",
            ));
        }
    }
    let gateway = Gateway::new(
        Some(run_dir.join("uvq-cache")),
        manifest.config.max_concurrency,
    )
    .map_err(|e| CliError::runtime(e.to_string()))?;

    for run in &manifest.temperature_runs {
        let label = temperature_label(run.temperature);
        let path = run_dir.join(format!("reports.{label}.jsonl"));
        if !path.is_file() {
            return Err(CliError::input(format!(
                "missing reports file {}",
                path.display()
            )));
        }
        let records: Vec<ReportRecord> =
            read_jsonl(&path).map_err(|e| CliError::input(e.to_string()))?;
        let report = judge_and_aggregate(
            &gateway,
            &records,
            &judge,
            &manifest.config.prompts,
            manifest.config.max_tokens,
            manifest.config.uvq_aggregation,
        )
        .map_err(uvq_error)?;
        println!(
            "T={}: dataset UVQ {} over {} users ({} features judged)",
            run.temperature,
            report.dataset_uvq,
            report.per_user.len(),
            records.iter().map(|r| r.report.kept.len()).sum::<usize>(),
        );
        for (category, proportion) in &report.category_proportions {
            println!("  {category}: {proportion:.3}");
        }
        let bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
        std::fs::write(run_dir.join(format!("uvq.{label}.json")), bytes)
            .map_err(|e| CliError::runtime(format!("write uvq report: {e}")))?;
    }
    Ok(())
}

fn cmd_mockgen(config_path: &Path, mode: Option<Mode>) -> Result<(), CliError> {
    let config = load_config(config_path, mode, true)?;
    let corpus = load_corpus_cli(&config.corpus_path)?;
    let report = mockgen::generate_fixtures(&corpus, &config.run).map_err(pipeline_error)?;
    println!(
        "fixtures written: {} (extractor {}, validator {}, summarizer {}, generator {}, judge {})",
        report.total(),
        report.extractor,
        report.validator,
        report.summarizer,
        report.generator,
        report.judge,
    );
    Ok(())
}
