//! On-disk schemas: keypoint JSON, labels CSV, processed-cycle CSV,
//! model JSON, metrics CSV/JSON, importance CSVs, ground-truth JSON,
//! and the keypoint-constants file.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use racewalk_core::classifier::{
    FeatureCategory, Hyperparameters, ImportanceReport, LogisticModel, Standardizer,
    CATEGORY_COUNT, FRAME_BIN_COUNT,
};
use racewalk_core::evaluation::{ConfusionMatrix, FoldManifest, MetricsRow};
use racewalk_core::gait::{ChannelMatrix, ProcessedCycle, CHANNEL_COUNT, CHANNEL_NAMES, RESAMPLE_LEN};
use racewalk_core::pose::{
    FaultLabel, Keypoint, KeypointName, LabelRecord, Pose, PoseSequence, KEYPOINT_COUNT,
};
use racewalk_core::pose_metrics::{GroundTruthPose, KeypointConstants};

use crate::config::RunConfig;

fn parse_label(s: &str) -> Result<FaultLabel> {
    FaultLabel::parse(s).ok_or_else(|| anyhow!("unknown label {s:?} (expected normal, bk, or lc)"))
}

// ---------------------------------------------------------------------
// Keypoint JSON: one file per video.

#[derive(Serialize, Deserialize)]
struct KeypointFileRepr {
    video_id: String,
    walker_id: String,
    fps: f64,
    /// Per frame, 17 [x, y, confidence] triples in the fixed order.
    frames: Vec<Vec<[f64; 3]>>,
}

pub fn parse_keypoint_json(bytes: &[u8]) -> Result<PoseSequence> {
    let repr: KeypointFileRepr =
        serde_json::from_slice(bytes).context("malformed keypoint JSON")?;
    let mut frames = Vec::with_capacity(repr.frames.len());
    for (i, frame) in repr.frames.iter().enumerate() {
        let kps = frame
            .iter()
            .map(|[x, y, c]| Keypoint::new(*x, *y, *c))
            .collect::<racewalk_core::Result<Vec<_>>>()
            .with_context(|| format!("frame {i}"))?;
        frames.push(Pose::from_slice(&kps).with_context(|| format!("frame {i}"))?);
    }
    Ok(PoseSequence::new(
        repr.video_id,
        repr.walker_id,
        repr.fps,
        frames,
    )?)
}

pub fn read_keypoint_file(path: &Path) -> Result<PoseSequence> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_keypoint_json(&bytes).with_context(|| format!("in {}", path.display()))
}

pub fn write_keypoint_file(path: &Path, seq: &PoseSequence) -> Result<()> {
    let repr = KeypointFileRepr {
        video_id: seq.video_id.clone(),
        walker_id: seq.walker_id.clone(),
        fps: seq.fps,
        frames: seq
            .frames
            .iter()
            .map(|p| p.keypoints().iter().map(|k| [k.x, k.y, k.confidence]).collect())
            .collect(),
    };
    let json = serde_json::to_string(&repr)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

// ---------------------------------------------------------------------
// Labels CSV: video_id,referee1,referee2,referee3.

pub fn read_labels_csv(path: &Path) -> Result<Vec<LabelRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let expected = ["video_id", "referee1", "referee2", "referee3"];
    if headers.iter().ne(expected) {
        bail!("labels CSV header must be {}", expected.join(","));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() != 4 {
            bail!("labels CSV row with {} fields", row.len());
        }
        let judgments = [
            parse_label(&row[1])?,
            parse_label(&row[2])?,
            parse_label(&row[3])?,
        ];
        records.push(LabelRecord::new(row[0].to_string(), judgments));
    }
    Ok(records)
}

pub fn write_labels_csv(path: &Path, records: &[LabelRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["video_id", "referee1", "referee2", "referee3"])?;
    for rec in records {
        let [a, b, c] = rec.referee_judgments;
        writer.write_record([rec.video_id.as_str(), a.as_str(), b.as_str(), c.as_str()])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------
// Processed-cycle CSV: one row per sample, 1530 feature columns named
// c{channel}_f{frame}, floats at 17 significant digits for a bit-exact
// decimal round trip.

fn cycles_header() -> Vec<String> {
    let mut header = vec![
        "video_id".to_string(),
        "walker_id".to_string(),
        "label".to_string(),
    ];
    for ch in 0..CHANNEL_COUNT {
        for f in 0..RESAMPLE_LEN {
            header.push(format!("c{ch}_f{f}"));
        }
    }
    header
}

pub fn write_cycles_csv(path: &Path, cycles: &[ProcessedCycle]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(cycles_header())?;
    for c in cycles {
        let mut row = vec![c.video_id.clone(), c.walker_id.clone(), c.label.as_str().to_string()];
        row.extend(c.features.values.iter().map(|v| format!("{v:.16e}")));
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_cycles_csv(path: &Path) -> Result<Vec<ProcessedCycle>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(cycles_header().iter().map(|s| s.as_str())) {
        bail!("processed-cycle CSV header does not match the v1 layout");
    }
    let mut cycles = Vec::new();
    for row in reader.records() {
        let row = row?;
        let values = row
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().map_err(|e| anyhow!("bad float {v:?}: {e}")))
            .collect::<Result<Vec<f64>>>()?;
        let matrix = ChannelMatrix::from_flat(values)?;
        cycles.push(ProcessedCycle::new(
            row[0].to_string(),
            row[1].to_string(),
            parse_label(&row[2])?,
            matrix,
        ));
    }
    Ok(cycles)
}

// ---------------------------------------------------------------------
// Model JSON.

#[derive(Serialize, Deserialize)]
struct HyperparametersRepr {
    lambda: f64,
    tol: f64,
    max_iter: usize,
}

#[derive(Serialize, Deserialize)]
struct StandardizerRepr {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFileRepr {
    layout_version: String,
    fault_type: String,
    hyperparameters: HyperparametersRepr,
    standardizer: StandardizerRepr,
    weights: Vec<f64>,
    bias: f64,
    training_fold_id: String,
    converged: bool,
    config: RunConfig,
}

pub fn write_model_file(path: &Path, model: &LogisticModel, config: &RunConfig) -> Result<()> {
    let repr = ModelFileRepr {
        layout_version: model.layout_version.clone(),
        fault_type: model.fault_type.as_str().to_string(),
        hyperparameters: HyperparametersRepr {
            lambda: model.hyperparameters.lambda,
            tol: model.hyperparameters.tol,
            max_iter: model.hyperparameters.max_iter,
        },
        standardizer: StandardizerRepr {
            mean: model.standardizer.mean.clone(),
            std: model.standardizer.std.clone(),
        },
        weights: model.weights.clone(),
        bias: model.bias,
        training_fold_id: model.training_fold_id.clone(),
        converged: model.converged,
        config: *config,
    };
    let json = serde_json::to_string(&repr)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_model_file(path: &Path) -> Result<LogisticModel> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let repr: ModelFileRepr = serde_json::from_slice(&bytes)
        .with_context(|| format!("malformed model JSON {}", path.display()))?;
    let fault_type = parse_label(&repr.fault_type)?;
    if repr.standardizer.mean.len() != repr.weights.len()
        || repr.standardizer.std.len() != repr.weights.len()
    {
        bail!("model standardizer and weight lengths disagree");
    }
    Ok(LogisticModel {
        weights: repr.weights,
        bias: repr.bias,
        standardizer: Standardizer {
            mean: repr.standardizer.mean,
            std: repr.standardizer.std,
        },
        layout_version: repr.layout_version,
        fault_type,
        hyperparameters: Hyperparameters {
            lambda: repr.hyperparameters.lambda,
            tol: repr.hyperparameters.tol,
            max_iter: repr.hyperparameters.max_iter,
        },
        training_fold_id: repr.training_fold_id,
        converged: repr.converged,
    })
}

// ---------------------------------------------------------------------
// Metrics CSV and JSON. Undefined metrics appear as empty CSV fields and
// JSON nulls, never as zero.

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["walker_id", "fault", "accuracy", "precision", "recall", "f_score"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        writer.write_record([
            row.walker_id.clone(),
            row.fault_type.as_str().to_string(),
            row.accuracy.to_string(),
            opt(row.precision),
            opt(row.recall),
            opt(row.f_score),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ConfusionRepr {
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    tn: usize,
}

#[derive(Serialize, Deserialize)]
struct MetricsRowRepr {
    walker_id: String,
    fault: String,
    accuracy: f64,
    precision: Option<f64>,
    recall: Option<f64>,
    f_score: Option<f64>,
    confusion: ConfusionRepr,
}

#[derive(Serialize, Deserialize)]
struct FoldManifestRepr {
    fold_id: String,
    train_video_ids: Vec<String>,
    test_video_ids: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MetricsFileRepr {
    fault_type: String,
    config: RunConfig,
    rows: Vec<MetricsRowRepr>,
    folds: Vec<FoldManifestRepr>,
}

pub fn write_metrics_json(
    path: &Path,
    fault: FaultLabel,
    config: &RunConfig,
    rows: &[MetricsRow],
    manifests: &[FoldManifest],
) -> Result<()> {
    let repr = MetricsFileRepr {
        fault_type: fault.as_str().to_string(),
        config: *config,
        rows: rows
            .iter()
            .map(|r| MetricsRowRepr {
                walker_id: r.walker_id.clone(),
                fault: r.fault_type.as_str().to_string(),
                accuracy: r.accuracy,
                precision: r.precision,
                recall: r.recall,
                f_score: r.f_score,
                confusion: ConfusionRepr {
                    tp: r.confusion.tp,
                    fp: r.confusion.fp,
                    fn_: r.confusion.fn_,
                    tn: r.confusion.tn,
                },
            })
            .collect(),
        folds: manifests
            .iter()
            .map(|m| FoldManifestRepr {
                fold_id: m.fold_id.clone(),
                train_video_ids: m.train_video_ids.clone(),
                test_video_ids: m.test_video_ids.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&repr)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reload of the JSON metrics artifact (rows plus fold manifests), used
/// for leakage audits.
pub fn read_metrics_json(
    path: &Path,
) -> Result<(FaultLabel, RunConfig, Vec<MetricsRow>, Vec<FoldManifest>)> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let repr: MetricsFileRepr = serde_json::from_slice(&bytes)
        .with_context(|| format!("malformed metrics JSON {}", path.display()))?;
    let fault = parse_label(&repr.fault_type)?;
    let rows = repr
        .rows
        .into_iter()
        .map(|r| {
            Ok(MetricsRow {
                walker_id: r.walker_id,
                fault_type: parse_label(&r.fault)?,
                accuracy: r.accuracy,
                precision: r.precision,
                recall: r.recall,
                f_score: r.f_score,
                confusion: ConfusionMatrix {
                    tp: r.confusion.tp,
                    fp: r.confusion.fp,
                    fn_: r.confusion.fn_,
                    tn: r.confusion.tn,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let folds = repr
        .folds
        .into_iter()
        .map(|m| FoldManifest {
            fold_id: m.fold_id,
            train_video_ids: m.train_video_ids,
            test_video_ids: m.test_video_ids,
        })
        .collect();
    Ok((fault, repr.config, rows, folds))
}

// ---------------------------------------------------------------------
// Importance CSVs: 9 category rows, and per-channel 5-frame bin means.

pub fn write_importance_category_csv(path: &Path, report: &ImportanceReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.write_record(["category", "importance"])?;
    for c in FeatureCategory::ALL {
        writer.write_record([
            c.name().to_string(),
            report.category_importance[c.index()].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_importance_frame_csv(path: &Path, report: &ImportanceReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["channel".to_string()];
    header.extend((0..FRAME_BIN_COUNT).map(|b| format!("bin{b}")));
    writer.write_record(header)?;
    for (ch, name) in CHANNEL_NAMES.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(report.frame_importance[ch].iter().map(|v| v.to_string()));
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_importance_category_csv(path: &Path) -> Result<[f64; CATEGORY_COUNT]> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = [0.0; CATEGORY_COUNT];
    let mut seen = 0;
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let expected = FeatureCategory::ALL
            .get(i)
            .ok_or_else(|| anyhow!("too many category rows"))?;
        if &row[0] != expected.name() {
            bail!("category row {i} is {:?}, expected {:?}", &row[0], expected.name());
        }
        out[i] = row[1].parse()?;
        seen += 1;
    }
    if seen != CATEGORY_COUNT {
        bail!("expected {CATEGORY_COUNT} category rows, got {seen}");
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Ground-truth JSON for pose evaluation: keypoint frames plus visibility
// flags and a per-pose object scale.

#[derive(Serialize, Deserialize)]
struct GtFrameRepr {
    /// 17 [x, y] pairs in the fixed keypoint order.
    keypoints: Vec<[f64; 2]>,
    /// Per-keypoint visibility; 0 means invisible.
    v: Vec<u8>,
    /// Object scale (square root of the annotated bounding-box area).
    scale: f64,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthFileRepr {
    video_id: String,
    frames: Vec<GtFrameRepr>,
}

pub fn read_ground_truth_file(path: &Path) -> Result<(String, Vec<GroundTruthPose>)> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let repr: GroundTruthFileRepr = serde_json::from_slice(&bytes)
        .with_context(|| format!("malformed ground-truth JSON {}", path.display()))?;
    let mut poses = Vec::with_capacity(repr.frames.len());
    for (i, frame) in repr.frames.iter().enumerate() {
        if frame.keypoints.len() != KEYPOINT_COUNT || frame.v.len() != KEYPOINT_COUNT {
            bail!("ground-truth frame {i} does not have {KEYPOINT_COUNT} keypoints");
        }
        let mut keypoints = [(0.0, 0.0); KEYPOINT_COUNT];
        let mut visibility = [0u8; KEYPOINT_COUNT];
        for (j, ([x, y], v)) in frame.keypoints.iter().zip(&frame.v).enumerate() {
            keypoints[j] = (*x, *y);
            visibility[j] = *v;
        }
        let pose = GroundTruthPose {
            keypoints,
            visibility,
            scale: frame.scale,
        };
        pose.validate().with_context(|| format!("ground-truth frame {i}"))?;
        poses.push(pose);
    }
    Ok((repr.video_id, poses))
}

pub fn write_ground_truth_file(
    path: &Path,
    video_id: &str,
    poses: &[GroundTruthPose],
) -> Result<()> {
    let repr = GroundTruthFileRepr {
        video_id: video_id.to_string(),
        frames: poses
            .iter()
            .map(|p| GtFrameRepr {
                keypoints: p.keypoints.iter().map(|(x, y)| [*x, *y]).collect(),
                v: p.visibility.to_vec(),
                scale: p.scale,
            })
            .collect(),
    };
    let json = serde_json::to_string(&repr)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

// ---------------------------------------------------------------------
// Keypoint-constants file: a flat TOML document with one positive number
// per keypoint name.

pub fn read_constants_file(path: &Path) -> Result<KeypointConstants> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let table: std::collections::BTreeMap<String, f64> = toml::from_str(&text)
        .with_context(|| format!("parsing constants file {}", path.display()))?;
    if table.len() != KEYPOINT_COUNT {
        bail!("constants file must define exactly {KEYPOINT_COUNT} values");
    }
    let mut k = [0.0; KEYPOINT_COUNT];
    for (i, name) in KeypointName::ALL.iter().enumerate() {
        k[i] = *table
            .get(name.as_str())
            .ok_or_else(|| anyhow!("constants file is missing {:?}", name.as_str()))?;
    }
    Ok(KeypointConstants::new(k)?)
}

pub fn write_constants_file(path: &Path, constants: &KeypointConstants) -> Result<()> {
    let mut text = String::new();
    for (name, k) in KeypointName::ALL.iter().zip(&constants.k) {
        text.push_str(&format!("{} = {}\n", name.as_str(), k));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
