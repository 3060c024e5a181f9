//! Command-line entry point: prequential runs, alpha sweeps, sampling
//! ablations and one-pass schema inference, all against JSON configs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use farf::dataio::{DatasetConfig, OrderDirection, SynthSpec};
use farf::evalharness::{
    ablate, ablation_table_csv, run, sweep_alpha, sweep_table_csv, DataSource, LearnerKind,
    PrequentialLog, RunConfig,
};
use farf::core::{Attribute, StreamSchema};
use farf::sampling::SamplingMode;

#[derive(Parser)]
#[command(name = "farf", version, about = "Fair and adaptive random forests over data streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one learner prequentially and write its logs.
    Run(RunArgs),
    /// Run the fair forest once per alpha on a shared stream and seed.
    Sweep(SweepArgs),
    /// Compare the four sampling strategies on one stream and seed.
    Ablate(AblateArgs),
    /// Infer a dataset config (column kinds and nominal domains) from a CSV.
    InferSchema(InferArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Dataset config JSON describing a CSV-backed stream.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic stream spec JSON.
    #[arg(long)]
    synth: Option<PathBuf>,
    /// Full run-config JSON; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Learner: farf | ht | rf.
    #[arg(long)]
    learner: Option<String>,
    /// Ensemble size.
    #[arg(long)]
    m: Option<usize>,
    /// Fixed under-sampling ratio; implies the custom mode.
    #[arg(long)]
    alpha: Option<f64>,
    /// Sampling mode: plain | fair | custom | oversample | overunder.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Instances per logged metrics window.
    #[arg(long)]
    window: Option<usize>,
    /// Split confidence (Hoeffding delta).
    #[arg(long)]
    delta: Option<f64>,
    /// Tie threshold for near-equal split scores.
    #[arg(long)]
    tie: Option<f64>,
    /// Weight a leaf accumulates between split attempts.
    #[arg(long)]
    grace: Option<f64>,
    /// Histogram bins for numeric attributes.
    #[arg(long)]
    bins: Option<usize>,
    /// Output directory for logs and the resolved config echo.
    #[arg(long)]
    out: PathBuf,
    /// Also write one CSV row per prequential decision.
    #[arg(long)]
    dump_predictions: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated alpha grid, e.g. 0.3,0.6,0.9,1.2,1.5.
    #[arg(long)]
    alphas: String,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct InferArgs {
    /// CSV file to scan.
    #[arg(long)]
    csv: PathBuf,
    /// First row is a header; otherwise columns are named col0, col1, ...
    #[arg(long)]
    header: bool,
    /// Token standing for a missing value.
    #[arg(long, default_value = "?")]
    missing: String,
    /// Sensitive column name.
    #[arg(long)]
    sensitive: String,
    /// Value of the sensitive column marking the protected group.
    #[arg(long)]
    sensitive_value: String,
    /// Class column name.
    #[arg(long)]
    class: String,
    /// Class value counted as the positive outcome.
    #[arg(long)]
    positive: String,
    /// Column to order the stream by.
    #[arg(long)]
    order_by: Option<String>,
    /// Where to write the dataset config JSON.
    #[arg(long)]
    out: PathBuf,
}

/// Errors split into usage problems (exit 2) and runtime failures (exit 1).
struct CliError {
    message: String,
    usage: bool,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            usage: true,
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            usage: false,
        }
    }
}

fn classify(e: farf::FarfError) -> CliError {
    match &e {
        farf::FarfError::Config(_)
        | farf::FarfError::InvalidArgument(_)
        | farf::FarfError::Schema(_) => CliError::usage(e.to_string()),
        _ => CliError::runtime(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::InferSchema(args) => cmd_infer(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if e.usage {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {what} '{}': {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("malformed {what} '{}': {e}", path.display())))
}

/// Makes a dataset path inside a config absolute relative to the config
/// file's directory, so runs do not depend on the working directory.
fn resolve_data_path(config: &mut DatasetConfig, config_file: &Path) {
    let data_path = Path::new(&config.path);
    if data_path.is_relative() {
        if let Some(parent) = config_file.parent() {
            config.path = parent.join(data_path).to_string_lossy().into_owned();
        }
    }
}

fn parse_learner(raw: &str) -> Result<LearnerKind, CliError> {
    match raw {
        "farf" => Ok(LearnerKind::Farf),
        "ht" | "hoeffding_tree" => Ok(LearnerKind::HoeffdingTree),
        "rf" | "plain_forest" => Ok(LearnerKind::PlainForest),
        other => Err(CliError::usage(format!(
            "unknown learner '{other}' (expected farf | ht | rf)"
        ))),
    }
}

fn parse_mode(raw: &str, alpha: Option<f64>) -> Result<SamplingMode<f64>, CliError> {
    match raw {
        "plain" => Ok(SamplingMode::Plain),
        "fair" => Ok(SamplingMode::Fair),
        "custom" => {
            let alpha = alpha.ok_or_else(|| {
                CliError::usage("mode 'custom' requires --alpha".to_string())
            })?;
            Ok(SamplingMode::Custom { alpha })
        }
        "oversample" | "oversample_protected" => Ok(SamplingMode::OversampleProtected),
        "overunder" | "over_and_under" => Ok(SamplingMode::OverAndUnder),
        other => Err(CliError::usage(format!(
            "unknown mode '{other}' (expected plain | fair | custom | oversample | overunder)"
        ))),
    }
}

/// Builds the fully resolved run config from an optional config file plus
/// flag overrides.
fn resolve_run_config(common: &CommonArgs) -> Result<RunConfig<f64>, CliError> {
    let mut config: RunConfig<f64> = match &common.config {
        Some(path) => {
            let mut config: RunConfig<f64> = read_json(path, "run config")?;
            if let DataSource::Csv(dataset) = &mut config.data {
                resolve_data_path(dataset, path);
            }
            config
        }
        None => {
            let data = data_source_from_flags(common)?.ok_or_else(|| {
                CliError::usage("one of --data, --synth or --config is required")
            })?;
            RunConfig {
                learner: LearnerKind::Farf,
                data,
                seed: 0,
                window_size: 1000,
                members: 10,
                mode: None,
                split: Default::default(),
                adwin_delta: 0.002,
                dump_predictions: false,
            }
        }
    };

    if common.config.is_some() {
        if let Some(data) = data_source_from_flags(common)? {
            config.data = data;
        }
    }
    if let Some(learner) = &common.learner {
        config.learner = parse_learner(learner)?;
    }
    if let Some(m) = common.m {
        config.members = m;
    }
    if let Some(mode) = &common.mode {
        config.mode = Some(parse_mode(mode, common.alpha)?);
    } else if let Some(alpha) = common.alpha {
        config.mode = Some(SamplingMode::Custom { alpha });
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(window) = common.window {
        config.window_size = window;
    }
    if let Some(delta) = common.delta {
        config.split.delta = delta;
    }
    if let Some(tie) = common.tie {
        config.split.tie_threshold = tie;
    }
    if let Some(grace) = common.grace {
        config.split.grace_period = grace;
    }
    if let Some(bins) = common.bins {
        config.split.numeric_bins = bins;
    }
    if common.dump_predictions {
        config.dump_predictions = true;
    }
    config.validate().map_err(classify)?;
    Ok(config)
}

fn data_source_from_flags(common: &CommonArgs) -> Result<Option<DataSource>, CliError> {
    match (&common.data, &common.synth) {
        (Some(_), Some(_)) => Err(CliError::usage(
            "--data and --synth are mutually exclusive",
        )),
        (Some(path), None) => {
            let mut dataset: DatasetConfig = read_json(path, "dataset config")?;
            resolve_data_path(&mut dataset, path);
            dataset.validate().map_err(classify)?;
            Ok(Some(DataSource::Csv(dataset)))
        }
        (None, Some(path)) => {
            let spec: SynthSpec = read_json(path, "synthetic spec")?;
            spec.validate().map_err(classify)?;
            Ok(Some(DataSource::Synthetic(spec)))
        }
        (None, None) => Ok(None),
    }
}

/// Writes the resolved config echo and returns its JSON text.
fn echo_config(config: &RunConfig<f64>, out: &Path) -> Result<String, CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::runtime(format!("cannot create '{}': {e}", out.display())))?;
    let mut text = serde_json::to_string_pretty(config)
        .map_err(|e| CliError::runtime(format!("config echo: {e}")))?;
    text.push('\n');
    write_file(&out.join("resolved_config.json"), &text)?;
    Ok(text)
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::runtime(format!("cannot write '{}': {e}", path.display())))
}

fn write_log(log: &PrequentialLog<f64>, out: &Path) -> Result<(), CliError> {
    write_file(
        &out.join("windows.csv"),
        &log.windows_csv().map_err(classify)?,
    )?;
    write_file(
        &out.join("summary.json"),
        &log.summary_json().map_err(classify)?,
    )?;
    if let Some(predictions) = log.predictions_csv() {
        write_file(&out.join("predictions.csv"), &predictions.map_err(classify)?)?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = resolve_run_config(&args.common)?;
    let echo = echo_config(&config, &args.common.out)?;
    print!("{echo}");
    let log = run(&config).map_err(classify)?;
    write_log(&log, &args.common.out)?;
    println!(
        "instances={} disc%={:.4} acc%={:.4} kappa%={:.4} standbys={} replacements={}",
        log.summary.instances,
        log.summary.disc_pct,
        log.summary.acc_pct,
        log.summary.kappa_pct,
        log.summary.standby_creations,
        log.summary.replacements
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut config = resolve_run_config(&args.common)?;
    config.learner = LearnerKind::Farf;
    let alphas: Vec<f64> = args
        .alphas
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad alpha '{a}'")))
        })
        .collect::<Result<_, _>>()?;
    if alphas.iter().any(|a| *a <= 0.0) {
        return Err(CliError::usage("alphas must be positive"));
    }
    let echo = echo_config(&config, &args.common.out)?;
    print!("{echo}");
    let rows = sweep_alpha(&config, &alphas).map_err(classify)?;
    let table = sweep_table_csv(&rows).map_err(classify)?;
    write_file(&args.common.out.join("sweep.csv"), &table)?;
    let mut report = String::new();
    for (alpha, summary) in &rows {
        let _ = writeln!(
            report,
            "alpha={alpha} disc%={:.4} acc%={:.4} kappa%={:.4}",
            summary.disc_pct, summary.acc_pct, summary.kappa_pct
        );
    }
    print!("{report}");
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CliError> {
    let config = resolve_run_config(&args.common)?;
    let echo = echo_config(&config, &args.common.out)?;
    print!("{echo}");
    let rows = ablate(&config).map_err(classify)?;
    let table = ablation_table_csv(&rows).map_err(classify)?;
    write_file(&args.common.out.join("ablation.csv"), &table)?;
    for (label, summary) in &rows {
        println!(
            "{label}: disc%={:.4} acc%={:.4} kappa%={:.4}",
            summary.disc_pct, summary.acc_pct, summary.kappa_pct
        );
    }
    Ok(())
}

/// One pass over the CSV: a column is numeric when every present value
/// parses as a number; nominal domains collect values in first-appearance
/// order. The sensitive and class columns are always nominal.
fn cmd_infer(args: InferArgs) -> Result<(), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(args.header)
        .trim(csv::Trim::All)
        .from_path(&args.csv)
        .map_err(|e| CliError::usage(format!("cannot open '{}': {e}", args.csv.display())))?;

    let names: Vec<String> = if args.header {
        reader
            .headers()
            .map_err(|e| CliError::runtime(e.to_string()))?
            .iter()
            .map(|h| h.to_string())
            .collect()
    } else {
        let first = reader
            .records()
            .next()
            .ok_or_else(|| CliError::usage("empty csv".to_string()))?
            .map_err(|e| CliError::runtime(e.to_string()))?;
        let names = (0..first.len()).map(|i| format!("col{i}")).collect();
        // reopen so the first data row is scanned as data
        reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(&args.csv)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        names
    };

    let n = names.len();
    let mut numeric_ok = vec![true; n];
    let mut domains: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut seen: Vec<std::collections::HashSet<String>> =
        vec![std::collections::HashSet::new(); n];
    for record in reader.records() {
        let record = record.map_err(|e| CliError::runtime(e.to_string()))?;
        if record.len() != n {
            return Err(CliError::runtime(format!(
                "ragged csv row with {} cells, expected {n}",
                record.len()
            )));
        }
        for (i, raw) in record.iter().enumerate() {
            if raw == args.missing || raw.is_empty() {
                continue;
            }
            if numeric_ok[i] && raw.parse::<f64>().is_err() {
                numeric_ok[i] = false;
            }
            if seen[i].insert(raw.to_string()) {
                domains[i].push(raw.to_string());
            }
        }
    }

    let attributes: Vec<Attribute> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let forced_nominal = *name == args.sensitive || *name == args.class;
            if numeric_ok[i] && !forced_nominal {
                Attribute::numeric(name.clone())
            } else {
                let domain: Vec<&str> = domains[i].iter().map(|s| s.as_str()).collect();
                Attribute::nominal(name.clone(), &domain)
            }
        })
        .collect();

    let schema = StreamSchema::new(
        attributes,
        &args.sensitive,
        &args.sensitive_value,
        &args.class,
        &args.positive,
    )
    .map_err(classify)?;

    let config = DatasetConfig {
        path: args.csv.to_string_lossy().into_owned(),
        header: args.header,
        missing_token: args.missing.clone(),
        schema,
        order_by: args.order_by.clone(),
        order_direction: if args.order_by.is_some() {
            OrderDirection::Asc
        } else {
            OrderDirection::AsIs
        },
        strict: true,
        provenance: None,
    };
    config.validate().map_err(classify)?;

    let mut text = serde_json::to_string_pretty(&config)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    text.push('\n');
    write_file(&args.out, &text)?;
    println!(
        "wrote {} ({} columns, {} nominal)",
        args.out.display(),
        n,
        config
            .schema
            .attributes()
            .iter()
            .filter(|a| a.is_nominal())
            .count()
    );
    Ok(())
}
