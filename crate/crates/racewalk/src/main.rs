use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use racewalk::config::{ConfigOverrides, RunConfig};
use racewalk::formats;
use racewalk::pipeline;
use racewalk_core::classifier;
use racewalk_core::pose::{assemble_dataset, FaultLabel};
use racewalk_core::pose_metrics::{self, KeypointConstants, MAP_THRESHOLDS};
use racewalk_core::synth::{DatasetParams, GaitParams};

/// Race-walking fault detection from 2D keypoint time series.
#[derive(Parser)]
#[command(name = "racewalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process keypoint files into the 85-frame feature CSV.
    Process(ProcessArgs),
    /// Train leave-one-walker-out fold models for one fault type.
    Train(TrainArgs),
    /// Cross-validate one fault type and write the metrics table.
    Eval(EvalArgs),
    /// Aggregate feature importance from trained fold models.
    Importance(ImportanceArgs),
    /// Score predicted keypoints against ground truth (OKS/AP/mAP).
    PoseEval(PoseEvalArgs),
    /// Generate a synthetic keypoint dataset.
    Synth(SynthArgs),
}

/// Pipeline constants; flags override the config file, which overrides
/// the built-in defaults.
#[derive(Args)]
struct ConfigArgs {
    /// TOML config file with the same keys as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    outlier_sd_mult: Option<f64>,
    #[arg(long)]
    min_prominence_deg: Option<f64>,
    #[arg(long)]
    min_separation_frames: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let overrides = ConfigOverrides {
            outlier_sd_mult: self.outlier_sd_mult,
            min_prominence_deg: self.min_prominence_deg,
            min_separation_frames: self.min_separation_frames,
            lambda: self.lambda,
            tol: self.tol,
            max_iter: self.max_iter,
            threshold: self.threshold,
        };
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

fn parse_fault(s: &str) -> Result<FaultLabel> {
    match FaultLabel::parse(s) {
        Some(FaultLabel::Normal) | None => bail!("fault must be bk or lc"),
        Some(f) => Ok(f),
    }
}

#[derive(Args)]
struct ProcessArgs {
    /// Directory of keypoint JSON files (*.json).
    #[arg(long)]
    input_dir: PathBuf,
    /// Labels CSV with the three referee judgments per video.
    #[arg(long)]
    labels: PathBuf,
    /// Output processed-cycle CSV.
    #[arg(long)]
    out: PathBuf,
    /// Screening report JSON; defaults to <out>.report.json.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Processed-cycle CSV from `process`.
    #[arg(long)]
    cycles: PathBuf,
    /// Fault type: bk or lc.
    #[arg(long, value_parser = parse_fault)]
    fault: FaultLabel,
    /// Directory for the per-fold model JSON files.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    cycles: PathBuf,
    #[arg(long, value_parser = parse_fault)]
    fault: FaultLabel,
    /// Metrics table CSV (one row per walker).
    #[arg(long)]
    out_csv: PathBuf,
    /// Metrics JSON with fold manifests for leakage audits.
    #[arg(long)]
    out_json: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Model JSON files of one fault type (typically all folds).
    #[arg(required = true)]
    models: Vec<PathBuf>,
    /// Output CSV with the 9 category importances.
    #[arg(long)]
    out_category: PathBuf,
    /// Output CSV with per-channel 5-frame bin importances.
    #[arg(long)]
    out_frames: PathBuf,
}

#[derive(Args)]
struct PoseEvalArgs {
    /// Predicted keypoint JSON file.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth JSON file with visibility flags and scales.
    #[arg(long)]
    gt: PathBuf,
    /// Keypoint-constants file overriding the built-in defaults.
    #[arg(long)]
    constants: Option<PathBuf>,
    /// Also write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory; receives keypoints/*.json and labels.csv.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    walkers: usize,
    #[arg(long, default_value_t = 10)]
    samples_per_class: usize,
    /// BK support-phase extension deficit, degrees.
    #[arg(long, default_value_t = 15.0)]
    bk_severity: f64,
    /// LC flight-phase lift, body lengths.
    #[arg(long, default_value_t = 0.1)]
    lc_lift: f64,
    /// Gaussian keypoint noise, pixels.
    #[arg(long, default_value_t = 1.5)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    n_frames: usize,
    #[arg(long, default_value_t = 40)]
    cycle_frames: usize,
    #[arg(long, default_value_t = 60.0)]
    fps: f64,
    /// Body lengths per frame.
    #[arg(long, default_value_t = 0.02)]
    forward_speed: f64,
}

fn cmd_process(args: &ProcessArgs) -> Result<ExitCode> {
    let config = args.config.resolve()?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.input_dir)
        .with_context(|| format!("reading {}", args.input_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no keypoint JSON files in {}", args.input_dir.display());
    }
    let sequences = paths
        .iter()
        .map(|p| formats::read_keypoint_file(p))
        .collect::<Result<Vec<_>>>()?;
    let records = formats::read_labels_csv(&args.labels)?;
    let (dataset, excluded) = assemble_dataset(sequences, &records)?;

    let (cycles, report) = pipeline::process_dataset(&dataset, excluded, &config)?;
    formats::write_cycles_csv(&args.out, &cycles)?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| args.out.with_extension("report.json"));
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", report_path.display()))?;

    println!(
        "processed {} videos: {} kept, {} removed by the outlier screen, {} failed \
         (pooled sigma {:.3} deg); {} excluded by unresolved labels",
        report.dispositions.len(),
        report.kept,
        report.removed_outlier,
        report.failed,
        report.pooled_sigma,
        report.excluded_unresolved.len(),
    );
    if report.kept == 0 {
        bail!("no video produced a usable cycle");
    }
    Ok(if report.failed > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_train(args: &TrainArgs) -> Result<ExitCode> {
    let config = args.config.resolve()?;
    let cycles = formats::read_cycles_csv(&args.cycles)?;
    let result = pipeline::run_cv(&cycles, args.fault, &config)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    for model in &result.models {
        let path = args.out_dir.join(format!("{}.json", model.training_fold_id));
        formats::write_model_file(&path, model, &config)?;
        println!(
            "wrote {} (converged: {})",
            path.display(),
            model.converged
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: &EvalArgs) -> Result<ExitCode> {
    let config = args.config.resolve()?;
    let cycles = formats::read_cycles_csv(&args.cycles)?;
    let result = pipeline::run_cv(&cycles, args.fault, &config)?;
    formats::write_metrics_csv(&args.out_csv, &result.rows)?;
    formats::write_metrics_json(
        &args.out_json,
        args.fault,
        &config,
        &result.rows,
        &result.manifests,
    )?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".to_string());
    for row in &result.rows {
        println!(
            "{} {}: accuracy {:.4}, precision {}, recall {}, F {}",
            row.fault_type.as_str(),
            row.walker_id,
            row.accuracy,
            fmt(row.precision),
            fmt(row.recall),
            fmt(row.f_score),
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_importance(args: &ImportanceArgs) -> Result<ExitCode> {
    let models = args
        .models
        .iter()
        .map(|p| formats::read_model_file(p))
        .collect::<Result<Vec<_>>>()?;
    let report = classifier::feature_importance(&models)?;
    formats::write_importance_category_csv(&args.out_category, &report)?;
    formats::write_importance_frame_csv(&args.out_frames, &report)?;
    println!(
        "{} importance over {} models: top category {}",
        report.fault_type.as_str(),
        report.n_models_averaged,
        report.top_category().name()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PoseEvalReport {
    video_id: String,
    n_frames: usize,
    mean_oks: f64,
    ap: Vec<ApEntry>,
    map: f64,
}

#[derive(Serialize)]
struct ApEntry {
    threshold: f64,
    ap: f64,
}

fn cmd_pose_eval(args: &PoseEvalArgs) -> Result<ExitCode> {
    let pred = formats::read_keypoint_file(&args.pred)?;
    let (gt_video, gts) = formats::read_ground_truth_file(&args.gt)?;
    if pred.frames.len() != gts.len() {
        bail!(
            "prediction has {} frames but ground truth has {}",
            pred.frames.len(),
            gts.len()
        );
    }
    let constants = match &args.constants {
        Some(path) => formats::read_constants_file(path)?,
        None => KeypointConstants::default(),
    };
    let pairs: Vec<_> = pred.frames.iter().cloned().zip(gts).collect();
    let mean_oks = pairs
        .iter()
        .map(|(p, g)| pose_metrics::oks(p, g, &constants))
        .sum::<racewalk_core::Result<f64>>()?
        / pairs.len() as f64;
    let ap = MAP_THRESHOLDS
        .iter()
        .map(|&t| {
            Ok(ApEntry {
                threshold: t,
                ap: pose_metrics::keypoint_ap(&pairs, &constants, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let map = pose_metrics::mean_ap(&pairs, &constants)?;
    let report = PoseEvalReport {
        video_id: gt_video,
        n_frames: pairs.len(),
        mean_oks,
        ap,
        map,
    };
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(out) = &args.out {
        std::fs::write(out, &json).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: &SynthArgs) -> Result<ExitCode> {
    let params = DatasetParams {
        n_walkers: args.walkers,
        samples_per_class: args.samples_per_class,
        bk_severity: args.bk_severity,
        lc_lift: args.lc_lift,
        base: GaitParams {
            n_frames: args.n_frames,
            fps: args.fps,
            cycle_frames: args.cycle_frames,
            forward_speed: args.forward_speed,
            fault: FaultLabel::Normal,
            severity: 0.0,
            noise_sigma: args.noise_sigma,
            seed: args.seed,
        },
    };
    let (samples, records) = racewalk_core::synth::generate_dataset(&params)?;
    let keypoint_dir = args.out_dir.join("keypoints");
    std::fs::create_dir_all(&keypoint_dir)
        .with_context(|| format!("creating {}", keypoint_dir.display()))?;
    for sample in &samples {
        let path = keypoint_dir.join(format!("{}.json", sample.sequence.video_id));
        formats::write_keypoint_file(&path, &sample.sequence)?;
    }
    formats::write_labels_csv(&args.out_dir.join("labels.csv"), &records)?;
    println!(
        "wrote {} keypoint files and labels.csv to {}",
        samples.len(),
        args.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Process(args) => cmd_process(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Importance(args) => cmd_importance(args),
        Command::PoseEval(args) => cmd_pose_eval(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
