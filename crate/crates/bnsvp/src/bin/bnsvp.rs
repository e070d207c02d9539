//! Experiment pipeline runner: seeded dataset generation, partitioning,
//! training, evaluation, and reporting.
//!
//! Every subcommand writes a `run.json` recording the resolved
//! configuration; identical flags and seed reproduce identical artifact
//! bytes (timestamps aside). Exit codes: 0 success, 1 I/O or numeric
//! failure, 2 argument error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use bnsvp::data::{load_dataset, save_dataset, Dataset};
use bnsvp::metrics::{report, roc_auc, sanitize_name, RocResult};
use bnsvp::mil::{train, MilLossKind, ScorerModel, TrainConfig};
use bnsvp::partition::{run_gibbs, PartitionConfig};
use bnsvp::rng::derive_seed;
use bnsvp::synth::{
    generate_mode_datasets, generate_planted, inject_outliers, make_multimodal_bags,
    ScenarioConfig,
};
use bnsvp::{Error, Result};

/// Outlier count per abnormal training segment when `--outlier-count` is
/// not given, scaling a 120-in-2016 reference ratio to the dataset.
const OUTLIER_RATE: f64 = 120.0 / 2016.0;

#[derive(Parser)]
#[command(name = "bnsvp", version, about = "Video anomaly detection experiment pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test dataset pair.
    Generate(GenerateArgs),
    /// Partition each positive bag of a dataset into scenes and components.
    Partition(PartitionArgs),
    /// Train a segment scorer with a MIL ranking loss.
    Train(TrainArgs),
    /// Score a dataset with a trained model and write ROC/AUC files.
    Eval(EvalArgs),
    /// Recompute metrics (and optional SVG plots) from ROC files in a directory.
    Report(ReportArgs),
    /// Sweep the epsilon percentile for the bnsvp loss and record AUCs.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    /// Markov scene bags with planted anomaly blocks.
    Planted,
    /// Planted bags whose training split gets standard-Gaussian outliers.
    Outlier,
    /// Bags concatenating videos from several single-mode datasets.
    Multimodal,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::Planted => "planted",
            Scenario::Outlier => "outlier",
            Scenario::Multimodal => "multimodal",
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    scenario: Scenario,
    /// Directory receiving train/ and test/ subdirectories.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 32)]
    segments: usize,
    /// Positive training bags (the test split gets half, rounded up).
    #[arg(long, default_value_t = 20)]
    pos_bags: usize,
    /// Negative training bags (the test split gets half, rounded up).
    #[arg(long, default_value_t = 20)]
    neg_bags: usize,
    /// Outlier scenario: training segments to replace (default scales with
    /// the abnormal segment count).
    #[arg(long)]
    outlier_count: Option<usize>,
    /// Anomaly modes (default 1; multimodal defaults to 3 and needs >= 3).
    #[arg(long)]
    modes: Option<usize>,
    /// Distance between cluster means in emission-noise units.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    /// Fraction of each positive bag's segments that are anomalous.
    #[arg(long, default_value_t = 0.25)]
    fraction: f64,
    /// Factor applied to generated features before outlier injection, so
    /// standard-normal outlier rows land outside the feature range. The
    /// outlier scenario defaults to 0.125, other scenarios to 1.
    #[arg(long)]
    feature_scale: Option<f64>,
}

#[derive(Args)]
struct PartitionArgs {
    /// Dataset manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory receiving one partition JSON per positive bag.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 10)]
    max_states: usize,
    #[arg(long, default_value_t = 5)]
    max_components: usize,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file; the training log and run record are written
    /// beside it.
    #[arg(long)]
    out: PathBuf,
    /// Loss kind: max, topk, or bnsvp.
    #[arg(long)]
    loss: MilLossKind,
    /// Top-k selection size (topk loss only).
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Score percentile forming the epsilon threshold (bnsvp loss only).
    #[arg(long, default_value_t = 35.0)]
    epsilon_percentile: f64,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.001)]
    l2: f64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Acknowledge that the bnsvp loss partitions positive bags inline.
    #[arg(long, default_value_t = false)]
    auto_partition: bool,
    /// Recompute partitions every this many epochs (default: never).
    #[arg(long)]
    refresh_every: Option<usize>,
    /// Propagate features over similarity and temporal graphs before scoring.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    propagation: bool,
    /// Gibbs iterations per training-time partition (burn-in is a third).
    #[arg(long, default_value_t = 100)]
    partition_iters: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset manifest JSON to score.
    #[arg(long)]
    manifest: PathBuf,
    /// Trained model JSON; its file stem names the ROC curve.
    #[arg(long)]
    model: PathBuf,
    /// Directory receiving metrics.csv and the ROC curve file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding roc_<name>.csv files; metrics.csv is rewritten here.
    #[arg(long = "in")]
    dir: PathBuf,
    /// Also write an SVG plot per curve.
    #[arg(long, default_value_t = false)]
    svg: bool,
}

#[derive(Args)]
struct AblateArgs {
    /// Training dataset manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Held-out dataset manifest JSON used for the AUC of each sweep point.
    #[arg(long)]
    eval_manifest: PathBuf,
    /// Directory receiving ablate.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.001)]
    l2: f64,
    /// Gibbs iterations per training-time partition (burn-in is a third).
    #[arg(long, default_value_t = 100)]
    partition_iters: usize,
}

/// Epsilon percentiles swept by the ablate subcommand.
const ABLATION_EPSILONS: [f64; 5] = [10.0, 20.0, 35.0, 50.0, 75.0];

#[derive(Serialize)]
struct RunRecord {
    command: Vec<String>,
    config: serde_json::Value,
    seed: Option<u64>,
    threads: usize,
    started_at: u64,
    finished_at: u64,
    outputs: Vec<String>,
}

/// What a subcommand reports back for the run record.
struct Outcome {
    run_dir: PathBuf,
    config: serde_json::Value,
    seed: Option<u64>,
    outputs: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Argument(_) | Error::DegenerateSelection(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = thread_cap()?;
    let started_at = epoch_seconds();
    let command: Vec<String> = std::env::args().collect();
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(&args)?,
        Command::Partition(args) => cmd_partition(&args)?,
        Command::Train(args) => cmd_train(&args)?,
        Command::Eval(args) => cmd_eval(&args)?,
        Command::Report(args) => cmd_report(&args)?,
        Command::Ablate(args) => cmd_ablate(&args)?,
    };
    let record = RunRecord {
        command,
        config: outcome.config,
        seed: outcome.seed,
        threads,
        started_at,
        finished_at: epoch_seconds(),
        outputs: outcome.outputs,
    };
    let path = outcome.run_dir.join("run.json");
    let mut text = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Format(format!("run record serialization failed: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Validates BNSVP_THREADS (reserved to cap internal parallelism; all
/// current pipelines are single-threaded).
fn thread_cap() -> Result<usize> {
    match std::env::var("BNSVP_THREADS") {
        Ok(raw) => raw.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::Argument(format!("BNSVP_THREADS must be a positive integer, got '{raw}'"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(Error::Argument("BNSVP_THREADS must be a positive integer".into()))
        }
    }
}

fn epoch_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn cmd_generate(args: &GenerateArgs) -> Result<Outcome> {
    let test_pos = args.pos_bags.div_ceil(2);
    let test_neg = args.neg_bags.div_ceil(2);
    let modes = args.modes.unwrap_or(match args.scenario {
        Scenario::Multimodal => 3,
        _ => 1,
    });
    let base = ScenarioConfig {
        n_bags_pos: args.pos_bags,
        n_bags_neg: args.neg_bags,
        n_segments: args.segments,
        dim: args.dim,
        anomaly_modes: modes,
        anomaly_fraction: args.fraction,
        mean_separation: args.separation,
        seed: derive_seed(args.seed, 0),
        ..ScenarioConfig::default()
    };
    let test_base = ScenarioConfig {
        n_bags_pos: test_pos,
        n_bags_neg: test_neg,
        seed: derive_seed(args.seed, 1),
        ..base.clone()
    };

    let feature_scale = args.feature_scale.unwrap_or(match args.scenario {
        Scenario::Outlier => 0.125,
        _ => 1.0,
    });
    if !(feature_scale > 0.0 && feature_scale.is_finite()) {
        return Err(Error::Argument(format!(
            "--feature-scale must be a positive finite number, got {feature_scale}"
        )));
    }

    let mut outlier_count = None;
    let (mut train_set, mut test_set) = match args.scenario {
        Scenario::Planted | Scenario::Outlier => {
            let mut train_set = generate_planted(&base)?;
            let mut test_set = generate_planted(&test_base)?;
            scale_features(&mut train_set, feature_scale);
            scale_features(&mut test_set, feature_scale);
            if args.scenario == Scenario::Outlier {
                let abnormal_segments: usize =
                    train_set.abnormal_bags().map(|b| b.n_segments()).sum();
                let count = args
                    .outlier_count
                    .unwrap_or_else(|| (abnormal_segments as f64 * OUTLIER_RATE).round() as usize);
                outlier_count = Some(count);
                train_set = inject_outliers(&train_set, count, derive_seed(args.seed, 2))?;
            }
            (train_set, test_set)
        }
        Scenario::Multimodal => {
            let train_modes = generate_mode_datasets(&base, modes)?;
            let test_modes = generate_mode_datasets(&test_base, modes)?;
            let mut train_set =
                make_multimodal_bags(&train_modes, args.pos_bags, args.neg_bags, derive_seed(args.seed, 2))?;
            let mut test_set =
                make_multimodal_bags(&test_modes, test_pos, test_neg, derive_seed(args.seed, 3))?;
            scale_features(&mut train_set, feature_scale);
            scale_features(&mut test_set, feature_scale);
            (train_set, test_set)
        }
    };
    train_set.name = "train".into();
    test_set.name = "test".into();
    let train_manifest = save_dataset(&train_set, &args.out.join("train"))?;
    let test_manifest = save_dataset(&test_set, &args.out.join("test"))?;

    Ok(Outcome {
        run_dir: args.out.clone(),
        config: json!({
            "scenario": args.scenario.name(),
            "dim": args.dim,
            "segments": args.segments,
            "pos_bags": args.pos_bags,
            "neg_bags": args.neg_bags,
            "test_pos_bags": test_pos,
            "test_neg_bags": test_neg,
            "modes": modes,
            "separation": args.separation,
            "fraction": args.fraction,
            "feature_scale": feature_scale,
            "outlier_count": outlier_count,
        }),
        seed: Some(args.seed),
        outputs: vec![display(&train_manifest), display(&test_manifest)],
    })
}

fn scale_features(dataset: &mut Dataset, factor: f64) {
    if factor == 1.0 {
        return;
    }
    for bag in &mut dataset.bags {
        bag.features *= factor;
    }
}

fn cmd_partition(args: &PartitionArgs) -> Result<Outcome> {
    let dataset = load_dataset(&args.manifest)?;
    let config = PartitionConfig {
        alpha: args.alpha,
        gamma: args.gamma,
        rho: args.rho,
        tau: args.tau,
        max_states: args.max_states,
        max_components: args.max_components,
        n_iters: args.iters,
        burn_in: args.burn_in,
        seed: args.seed,
        emission_prior: None,
    };
    config.validate()?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let mut outputs = Vec::new();
    for (idx, bag) in dataset.abnormal_bags().enumerate() {
        let bag_config = PartitionConfig {
            seed: derive_seed(args.seed, idx as u64),
            ..config.clone()
        };
        let result = run_gibbs(&bag.features, &bag_config)?;
        let path = args.out.join(format!("partition_{}.json", sanitize_name(&bag.id)));
        fs::write(&path, result.to_json_string()).map_err(|e| Error::io(&path, e))?;
        outputs.push(display(&path));
    }

    Ok(Outcome {
        run_dir: args.out.clone(),
        config: json!({
            "manifest": display(&args.manifest),
            "alpha": args.alpha,
            "gamma": args.gamma,
            "rho": args.rho,
            "tau": args.tau,
            "max_states": args.max_states,
            "max_components": args.max_components,
            "iters": args.iters,
            "burn_in": args.burn_in,
        }),
        seed: Some(args.seed),
        outputs,
    })
}

fn cmd_train(args: &TrainArgs) -> Result<Outcome> {
    if args.loss == MilLossKind::Bnsvp && !args.auto_partition {
        return Err(Error::Argument(
            "--loss bnsvp partitions positive bags inline; pass --auto-partition to confirm"
                .into(),
        ));
    }
    let dataset = load_dataset(&args.manifest)?;
    let config = TrainConfig {
        loss_kind: args.loss,
        k: args.k,
        learning_rate: args.lr,
        l2_coeff: args.l2,
        epochs: args.epochs,
        partition_refresh_every: args.refresh_every,
        epsilon_percentile: args.epsilon_percentile,
        partition_config: PartitionConfig {
            n_iters: args.partition_iters,
            burn_in: args.partition_iters / 3,
            ..PartitionConfig::default()
        },
        seed: args.seed,
        use_propagation: args.propagation,
        ..TrainConfig::default()
    };
    let (model, log) = train(&dataset, &config)?;

    let run_dir = args.out.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    fs::write(&args.out, model.to_json_string()).map_err(|e| Error::io(&args.out, e))?;
    let log_path = run_dir.join("training_log.csv");
    fs::write(&log_path, log.to_csv_string()).map_err(|e| Error::io(&log_path, e))?;

    Ok(Outcome {
        run_dir,
        config: json!({
            "manifest": display(&args.manifest),
            "loss": args.loss.to_string(),
            "k": args.k,
            "epsilon_percentile": args.epsilon_percentile,
            "lr": args.lr,
            "l2": args.l2,
            "epochs": args.epochs,
            "auto_partition": args.auto_partition,
            "refresh_every": args.refresh_every,
            "propagation": args.propagation,
            "partition_iters": args.partition_iters,
        }),
        seed: Some(args.seed),
        outputs: vec![display(&args.out), display(&log_path)],
    })
}

/// Pools segment scores and ground-truth labels over a whole dataset.
/// Normal bags without stored labels count as all-normal; abnormal bags
/// must carry labels.
fn score_dataset(model: &ScorerModel, dataset: &Dataset) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for bag in &dataset.bags {
        scores.extend(model.score_bag(bag)?);
        match &bag.segment_labels {
            Some(ls) => labels.extend(ls.iter().copied()),
            None if !bag.label.is_abnormal() => {
                labels.extend(std::iter::repeat_n(false, bag.n_segments()))
            }
            None => {
                return Err(Error::Argument(format!(
                    "bag '{}' is abnormal but carries no segment labels to evaluate against",
                    bag.id
                )))
            }
        }
    }
    Ok((scores, labels))
}

fn cmd_eval(args: &EvalArgs) -> Result<Outcome> {
    let dataset = load_dataset(&args.manifest)?;
    let text = fs::read_to_string(&args.model).map_err(|e| Error::io(&args.model, e))?;
    let model = ScorerModel::from_json_str(&text)?;
    let name = args
        .model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string());

    let (scores, labels) = score_dataset(&model, &dataset)?;
    let roc = roc_auc(&scores, &labels)?;
    report(&[(name.clone(), roc)], &args.out, false)?;

    let stem = sanitize_name(&name);
    Ok(Outcome {
        run_dir: args.out.clone(),
        config: json!({
            "manifest": display(&args.manifest),
            "model": display(&args.model),
            "curve": name,
        }),
        seed: None,
        outputs: vec![
            display(&args.out.join("metrics.csv")),
            display(&args.out.join(format!("roc_{stem}.csv"))),
        ],
    })
}

/// Parses a `fpr,tpr` curve file back into an ROC result, recomputing the
/// trapezoidal area.
fn parse_roc_csv(path: &Path) -> Result<RocResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("fpr,tpr") {
        return Err(Error::Format(format!(
            "{}: expected header 'fpr,tpr'",
            path.display()
        )));
    }
    let mut points = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let (fpr, tpr) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!("{}: malformed row '{line}'", path.display()))
        })?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("{}: malformed number '{s}'", path.display())))
        };
        points.push((parse(fpr)?, parse(tpr)?));
    }
    if points.len() < 2 {
        return Err(Error::Format(format!(
            "{}: an ROC curve needs at least two points",
            path.display()
        )));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum();
    Ok(RocResult { points, auc })
}

fn cmd_report(args: &ReportArgs) -> Result<Outcome> {
    let entries = fs::read_dir(&args.dir).map_err(|e| Error::io(&args.dir, e))?;
    let mut results = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&args.dir, e))?;
        let file_name = entry.file_name().to_string_lossy().into_owned();
        if let Some(name) = file_name
            .strip_prefix("roc_")
            .and_then(|rest| rest.strip_suffix(".csv"))
        {
            results.push((name.to_string(), parse_roc_csv(&entry.path())?));
        }
    }
    if results.is_empty() {
        return Err(Error::Argument(format!(
            "no roc_<name>.csv files found in {}",
            args.dir.display()
        )));
    }
    results.sort_by(|a, b| a.0.cmp(&b.0));
    report(&results, &args.dir, args.svg)?;

    let mut outputs = vec![display(&args.dir.join("metrics.csv"))];
    for (name, _) in &results {
        let stem = sanitize_name(name);
        outputs.push(display(&args.dir.join(format!("roc_{stem}.csv"))));
        if args.svg {
            outputs.push(display(&args.dir.join(format!("roc_{stem}.svg"))));
        }
    }
    Ok(Outcome {
        run_dir: args.dir.clone(),
        config: json!({
            "in": display(&args.dir),
            "svg": args.svg,
            "curves": results.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        }),
        seed: None,
        outputs,
    })
}

fn cmd_ablate(args: &AblateArgs) -> Result<Outcome> {
    let train_set = load_dataset(&args.manifest)?;
    let eval_set = load_dataset(&args.eval_manifest)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let mut rows = String::from("epsilon,auc\n");
    for epsilon in ABLATION_EPSILONS {
        let config = TrainConfig {
            loss_kind: MilLossKind::Bnsvp,
            learning_rate: args.lr,
            l2_coeff: args.l2,
            epochs: args.epochs,
            epsilon_percentile: epsilon,
            partition_config: PartitionConfig {
                n_iters: args.partition_iters,
                burn_in: args.partition_iters / 3,
                ..PartitionConfig::default()
            },
            seed: args.seed,
            ..TrainConfig::default()
        };
        let (model, _) = train(&train_set, &config)?;
        let (scores, labels) = score_dataset(&model, &eval_set)?;
        let roc = roc_auc(&scores, &labels)?;
        rows.push_str(&format!("{epsilon},{}\n", roc.auc));
    }
    let path = args.out.join("ablate.csv");
    fs::write(&path, rows).map_err(|e| Error::io(&path, e))?;

    Ok(Outcome {
        run_dir: args.out.clone(),
        config: json!({
            "manifest": display(&args.manifest),
            "eval_manifest": display(&args.eval_manifest),
            "epsilons": ABLATION_EPSILONS,
            "epochs": args.epochs,
            "lr": args.lr,
            "l2": args.l2,
            "partition_iters": args.partition_iters,
        }),
        seed: Some(args.seed),
        outputs: vec![display(&path)],
    })
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
