mod config;
mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use config::{BackendFlags, DataFlags, Mode, PartitionFlags, RunConfig};
use uniscore::discriminate::DEFAULT_EPSILON;
use uniscore::{ahp, inference, pipeline, Error, Scorer, SignalKind};

#[derive(Parser)]
#[command(
    name = "uniscore",
    version,
    about = "Interpretable text-quality scoring from weighted criteria"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a weight model from a labeled dataset.
    Fit(FitArgs),
    /// Score new texts with a fitted model.
    Infer(InferArgs),
    /// Compare scored texts against ground truth.
    Evaluate(EvaluateArgs),
    /// Show a fitted model's weight table.
    Report(ReportArgs),
    /// Consistency ratios of matrices built from random distance vectors.
    CheckCr(CheckCrArgs),
    /// Sweep the percentile p and report held-out correlations.
    Ablate(AblateArgs),
    /// Show the low/high groups a partition config selects.
    Partition(PartitionArgs),
}

#[derive(Args)]
struct FitArgs {
    /// JSON run config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    partition: PartitionFlags,
    #[command(flatten)]
    backend: BackendFlags,
    #[arg(long)]
    criteria: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Model output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every judge call as JSONL.
    #[arg(long)]
    judge_log: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    criteria: Option<PathBuf>,
    /// Texts to score (.jsonl or .csv).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text")]
    text_field: String,
    #[arg(long)]
    id_field: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    backend: BackendFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Output of `infer`.
    #[arg(long)]
    scored: PathBuf,
    /// Labeled dataset with the true signal.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value = "text")]
    text_field: String,
    #[arg(long, default_value = "signal")]
    signal_field: String,
    #[arg(long)]
    id_field: Option<String>,
    /// Decision threshold for discrete truth.
    #[arg(long)]
    threshold: Option<f64>,
    /// Take the decision threshold from this model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Tail fraction used to form Welch groups for continuous truth.
    #[arg(long, default_value_t = 0.25)]
    welch_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

#[derive(Args)]
struct CheckCrArgs {
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    backend: BackendFlags,
    #[arg(long)]
    criteria: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated percentiles.
    #[arg(long = "p", value_delimiter = ',', required = true)]
    p_values: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    partition: PartitionFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn fit(args: FitArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    args.data.apply(&mut cfg);
    args.partition.apply(&mut cfg);
    args.backend.apply(&mut cfg)?;
    if args.criteria.is_some() {
        cfg.criteria = args.criteria;
    }
    if args.epsilon.is_some() {
        cfg.epsilon = args.epsilon;
    }
    if args.out.is_some() {
        cfg.output = args.out;
    }
    let fit_config = cfg.fit_config()?;
    let outcome = pipeline::fit(&fit_config)?;
    eprint!("{}", pipeline::weight_table(&outcome.model));
    if let Some(path) = &args.judge_log {
        let mut lines = String::new();
        for record in &outcome.judge_log {
            lines.push_str(&serde_json::to_string(record)?);
            lines.push('\n');
        }
        write_output(Some(path), &lines)?;
    }
    if fit_config.output.is_none() {
        write_output(None, &(outcome.model.to_json() + "\n"))?;
    }
    Ok(())
}

fn infer(args: InferArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    args.backend.apply(&mut cfg)?;
    if args.criteria.is_some() {
        cfg.criteria = args.criteria;
    }
    let model = uniscore::load_model(&args.model)?;
    let criteria = uniscore::load_criteria(cfg.criteria()?)?;
    let texts = uniscore::load_texts(&args.input, &args.text_field, args.id_field.as_deref())?;
    let scorer = Scorer::from_backend(&cfg.backend()?)?;
    let scored = inference::score_texts(&model, &scorer, &criteria, &texts)?;
    let fallbacks: usize = scored.iter().map(|s| s.fallbacks).sum();
    if fallbacks > 0 {
        log::warn!("{fallbacks} judge calls fell back to the neutral score");
    }
    let mut buf = Vec::new();
    inference::write_scored(&scored, &mut buf)?;
    write_output(args.out.as_deref(), &String::from_utf8(buf)?)
}

fn evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let mode = SignalKind::from(args.mode);
    let mut schema = uniscore::DatasetSchema::new(&args.text_field, &args.signal_field, mode);
    schema.id_field = args.id_field.clone();
    let truth = uniscore::load_dataset(&args.truth, &schema)?;
    let scored = inference::load_scored(&args.scored)?;
    let threshold = match (args.threshold, &args.model) {
        (Some(t), _) => Some(t),
        (None, Some(path)) => uniscore::load_model(path)?.fit_metadata().decision_threshold,
        (None, None) => None,
    };
    let report = pipeline::evaluate_scored(&scored, &truth, mode, threshold, args.welch_fraction)?;
    if let Some(path) = &args.svg {
        let mut bars: Vec<(&str, f64)> = Vec::new();
        let named = [
            ("pearson", report.pearson_r),
            ("spearman", report.spearman_rho),
            ("kendall", report.kendall_tau),
            ("f1", report.f1),
            ("accuracy", report.accuracy),
            ("cv", report.cv),
            ("skewness", Some(report.skewness)),
        ];
        bars.extend(named.iter().filter_map(|(n, v)| v.map(|v| (*n, v))));
        write_output(Some(path), &svg::bar_chart("Evaluation", &bars))?;
    }
    write_output(args.out.as_deref(), &pretty(&report)?)
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let model = uniscore::load_model(&args.model)?;
    match args.format {
        ReportFormat::Text => write_output(None, &pipeline::weight_table(&model)),
        ReportFormat::Json => {
            let rows: Vec<_> = (0..model.len())
                .map(|i| {
                    json!({
                        "criterion": model.criteria()[i],
                        "jsd_distance": model.jsd_distances()[i],
                        "sign": model.signs()[i],
                        "weight": model.unsigned_weights()[i],
                        "signed_weight": model.signed_weights()[i],
                    })
                })
                .collect();
            let value = json!({
                "criteria": rows,
                "lambda_max": model.lambda_max(),
                "consistency_ratio": model.consistency_ratio(),
                "consistency_pass": model.consistency_ratio() <= ahp::CR_THRESHOLD,
                "fit_metadata": model.fit_metadata(),
            });
            write_output(None, &pretty(&value)?)
        }
    }
}

fn check_cr(args: CheckCrArgs) -> anyhow::Result<()> {
    let summary = ahp::check_consistency(args.m, args.trials, args.seed)?;
    write_output(args.out.as_deref(), &pretty(&summary)?)
}

fn ablate(args: AblateArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    args.data.apply(&mut cfg);
    args.backend.apply(&mut cfg)?;
    if args.criteria.is_some() {
        cfg.criteria = args.criteria;
    }
    let schema = cfg.schema()?;
    if schema.signal_type != SignalKind::Continuous {
        return Err(Error::InvalidInput("ablate needs a continuous-signal dataset".into()).into());
    }
    let samples = uniscore::load_dataset(cfg.dataset()?, &schema)?;
    let criteria = uniscore::load_criteria(cfg.criteria()?)?;
    let scorer = Scorer::from_backend(&cfg.backend()?)?;
    let epsilon = args.epsilon.or(cfg.epsilon).unwrap_or(DEFAULT_EPSILON);
    let rows = pipeline::ablate_samples(&samples, &criteria, &scorer, &args.p_values, epsilon, cfg.seed())?;
    if let Some(path) = &args.svg {
        let series = [
            ("pearson", rows.iter().map(|r| r.pearson_r).collect()),
            ("spearman", rows.iter().map(|r| r.spearman_rho).collect()),
            ("kendall", rows.iter().map(|r| r.kendall_tau).collect()),
        ];
        let chart = svg::line_chart(
            "Held-out correlation by percentile",
            "p",
            "correlation",
            &args.p_values,
            &series,
        );
        write_output(Some(path), &chart)?;
    }
    write_output(args.out.as_deref(), &pretty(&rows)?)
}

fn partition(args: PartitionArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    args.data.apply(&mut cfg);
    args.partition.apply(&mut cfg);
    let samples = uniscore::load_dataset(cfg.dataset()?, &cfg.schema()?)?;
    let config = cfg.partition()?;
    config.validate()?;
    let groups = uniscore::partition::partition(&samples, &config)?;
    let ids = |g: &[uniscore::TextSample]| g.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
    let value = json!({
        "partition": config,
        "sizes": groups.sizes(),
        "thresholds": groups.thresholds,
        "low": ids(&groups.low),
        "high": ids(&groups.high),
    });
    write_output(args.out.as_deref(), &pretty(&value)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Fit(a) => fit(a).context("fit failed"),
        Command::Infer(a) => infer(a).context("infer failed"),
        Command::Evaluate(a) => evaluate(a).context("evaluate failed"),
        Command::Report(a) => report(a).context("report failed"),
        Command::CheckCr(a) => check_cr(a).context("check-cr failed"),
        Command::Ablate(a) => ablate(a).context("ablate failed"),
        Command::Partition(a) => partition(a).context("partition failed"),
    }
}

/// 1 for bad input, 2 for failures inside the pipeline.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
