//! End-to-end wiring of the processing pipeline on top of the core
//! crate, with per-video disposition reporting.

use serde::{Deserialize, Serialize};

use anyhow::Result;
use racewalk_core::evaluation::{self, CvResult};
use racewalk_core::gait::{self, ProcessedCycle};
use racewalk_core::pose::{Dataset, FaultLabel};
use racewalk_core::preprocess::{self, KneeAngleSeries, Side};

use crate::config::RunConfig;

/// What happened to one input video during processing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Disposition {
    Kept,
    RemovedOutlier,
    Failed { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoDisposition {
    pub video_id: String,
    #[serde(flatten)]
    pub disposition: Disposition,
}

/// Screening and processing report for one `process` run; the effective
/// config is embedded so the artifact is self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessReport {
    pub config: RunConfig,
    pub pooled_sigma: f64,
    pub kept: usize,
    pub removed_outlier: usize,
    pub failed: usize,
    /// Videos excluded before processing because the referee vote was a
    /// three-way split.
    pub excluded_unresolved: Vec<String>,
    pub dispositions: Vec<VideoDisposition>,
}

/// Runs normalization, knee angles, the pooled outlier screen, cycle
/// extraction, and resampling over a whole dataset. Videos that fail a
/// stage are reported, not fatal.
pub fn process_dataset(
    dataset: &Dataset,
    excluded_unresolved: Vec<String>,
    config: &RunConfig,
) -> Result<(Vec<ProcessedCycle>, ProcessReport)> {
    struct Prepared {
        video_id: String,
        walker_id: String,
        label: FaultLabel,
        frames: Vec<preprocess::NormalizedFrame>,
        left: Vec<f64>,
        right: Vec<f64>,
    }

    let mut prepared = Vec::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    for seq in &dataset.sequences {
        let label = dataset
            .label_of(&seq.video_id)
            .expect("dataset invariant: every sequence is labeled");
        let result = (|| -> racewalk_core::Result<Prepared> {
            let dir = preprocess::walking_direction(seq)?;
            let frames = seq
                .frames
                .iter()
                .map(|p| preprocess::normalize_pose(p, dir))
                .collect::<racewalk_core::Result<Vec<_>>>()?;
            let left = preprocess::knee_angle_series(&frames, Side::Left)?.theta;
            let right = preprocess::knee_angle_series(&frames, Side::Right)?.theta;
            Ok(Prepared {
                video_id: seq.video_id.clone(),
                walker_id: seq.walker_id.clone(),
                label,
                frames,
                left,
                right,
            })
        })();
        match result {
            Ok(p) => prepared.push(p),
            Err(e) => failures.push((seq.video_id.clone(), e.to_string())),
        }
    }

    // Pooled screen over every successfully prepared video.
    let (pooled_sigma, removed) = if prepared.is_empty() {
        (0.0, Vec::new())
    } else {
        let series: Vec<(String, KneeAngleSeries)> = prepared
            .iter()
            .map(|p| {
                (
                    p.video_id.clone(),
                    KneeAngleSeries {
                        side: Side::Right,
                        theta: p.right.clone(),
                    },
                )
            })
            .collect();
        let report = preprocess::reject_outliers(&series, config.outlier_sd_mult)?;
        (report.pooled_sigma, report.removed)
    };

    let mut cycles = Vec::new();
    let mut dispositions = Vec::new();
    for p in prepared {
        if removed.contains(&p.video_id) {
            dispositions.push(VideoDisposition {
                video_id: p.video_id,
                disposition: Disposition::RemovedOutlier,
            });
            continue;
        }
        let result = gait::detect_cycle(
            &p.right,
            config.min_prominence_deg,
            config.min_separation_frames,
        )
        .and_then(|window| gait::extract_channel_matrix(&p.frames, &p.left, &p.right, window));
        match result {
            Ok(matrix) => {
                cycles.push(ProcessedCycle::new(
                    p.video_id.clone(),
                    p.walker_id,
                    p.label,
                    matrix,
                ));
                dispositions.push(VideoDisposition {
                    video_id: p.video_id,
                    disposition: Disposition::Kept,
                });
            }
            Err(e) => failures.push((p.video_id, e.to_string())),
        }
    }
    for (video_id, reason) in failures {
        dispositions.push(VideoDisposition {
            video_id,
            disposition: Disposition::Failed { reason },
        });
    }
    dispositions.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let kept = cycles.len();
    let removed_outlier = removed.len();
    let failed = dispositions.len() - kept - removed_outlier;
    let report = ProcessReport {
        config: *config,
        pooled_sigma,
        kept,
        removed_outlier,
        failed,
        excluded_unresolved,
        dispositions,
    };
    Ok((cycles, report))
}

/// Leave-one-walker-out training and evaluation for one fault type.
pub fn run_cv(cycles: &[ProcessedCycle], fault: FaultLabel, config: &RunConfig) -> Result<CvResult> {
    Ok(evaluation::run_cv(
        cycles,
        fault,
        config.hyperparameters(),
        config.threshold,
    )?)
}
