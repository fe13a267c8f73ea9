//! Object keypoint similarity (OKS) and keypoint-level average
//! precision for comparing predicted poses against ground truth.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pose::{Pose, KEYPOINT_COUNT};

/// Annotated pose with per-keypoint visibility and an object scale
/// (square root of the annotated bounding-box area by convention).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPose {
    pub keypoints: [(f64, f64); KEYPOINT_COUNT],
    /// 0 means invisible; positive values count as visible.
    pub visibility: [u8; KEYPOINT_COUNT],
    pub scale: f64,
}

impl GroundTruthPose {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidParameter("object scale must be > 0"));
        }
        if self.visibility.iter().all(|&v| v == 0) {
            return Err(Error::NoVisibleKeypoints);
        }
        Ok(())
    }
}

/// Per-keypoint falloff constants k_i of the OKS Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointConstants {
    pub k: [f64; KEYPOINT_COUNT],
}

impl KeypointConstants {
    pub fn new(k: [f64; KEYPOINT_COUNT]) -> Result<Self> {
        if k.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("keypoint constants must be > 0"));
        }
        Ok(KeypointConstants { k })
    }
}

impl Default for KeypointConstants {
    /// The published per-keypoint constants of the common keypoint
    /// benchmark convention (twice the per-keypoint sigma), in the fixed
    /// keypoint order: nose, eyes, ears, shoulders, elbows, wrists,
    /// hips, knees, ankles.
    fn default() -> Self {
        KeypointConstants {
            k: [
                0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144, 0.124, 0.124,
                0.214, 0.214, 0.174, 0.174, 0.178, 0.178,
            ],
        }
    }
}

/// Gaussian similarity term exp(-d^2 / (2 s^2 k^2)) for each visible
/// keypoint, in keypoint order.
pub fn similarity_terms(
    pred: &Pose,
    gt: &GroundTruthPose,
    constants: &KeypointConstants,
) -> Result<Vec<f64>> {
    gt.validate()?;
    let mut terms = Vec::new();
    for i in 0..KEYPOINT_COUNT {
        if gt.visibility[i] == 0 {
            continue;
        }
        let kp = pred.keypoints()[i];
        let (gx, gy) = gt.keypoints[i];
        let d2 = (kp.x - gx) * (kp.x - gx) + (kp.y - gy) * (kp.y - gy);
        let denom = 2.0 * gt.scale * gt.scale * constants.k[i] * constants.k[i];
        terms.push(libm::exp(-d2 / denom));
    }
    Ok(terms)
}

/// OKS: mean of the similarity terms over visible keypoints.
pub fn oks(pred: &Pose, gt: &GroundTruthPose, constants: &KeypointConstants) -> Result<f64> {
    let terms = similarity_terms(pred, gt, constants)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Fraction of visible keypoints, over all pairs, whose similarity term
/// exceeds the threshold.
pub fn keypoint_ap(
    pairs: &[(Pose, GroundTruthPose)],
    constants: &KeypointConstants,
    threshold: f64,
) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter("threshold must be in (0, 1)"));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pose pairs"));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (pred, gt) in pairs {
        let terms = similarity_terms(pred, gt, constants)?;
        total += terms.len();
        hits += terms.iter().filter(|&&t| t > threshold).count();
    }
    if total == 0 {
        return Err(Error::NoVisibleKeypoints);
    }
    Ok(hits as f64 / total as f64)
}

pub const MAP_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// Mean AP over thresholds 0.50 to 0.95 in steps of 0.05.
pub fn mean_ap(pairs: &[(Pose, GroundTruthPose)], constants: &KeypointConstants) -> Result<f64> {
    let mut sum = 0.0;
    for t in MAP_THRESHOLDS {
        sum += keypoint_ap(pairs, constants, t)?;
    }
    Ok(sum / MAP_THRESHOLDS.len() as f64)
}
