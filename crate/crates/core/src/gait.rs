//! Two-step window extraction, 85-frame resampling, and feature layout.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pose::{FaultLabel, KeypointName};
use crate::preprocess::{NormalizedFrame, Point};

pub const RESAMPLE_LEN: usize = 85;
pub const CHANNEL_COUNT: usize = 18;
pub const FEATURE_LEN: usize = CHANNEL_COUNT * RESAMPLE_LEN;
pub const LAYOUT_VERSION: &str = "v1";

/// Channel order, frozen as layout "v1": for side in (left, right), for
/// joint in (hip, knee, shank, ankle), coordinates x then y (16
/// channels), then left knee angle, right knee angle.
pub const CHANNEL_NAMES: [&str; CHANNEL_COUNT] = [
    "l_hip_x",
    "l_hip_y",
    "l_knee_x",
    "l_knee_y",
    "l_shank_x",
    "l_shank_y",
    "l_ankle_x",
    "l_ankle_y",
    "r_hip_x",
    "r_hip_y",
    "r_knee_x",
    "r_knee_y",
    "r_shank_x",
    "r_shank_y",
    "r_ankle_x",
    "r_ankle_y",
    "l_knee_angle",
    "r_knee_angle",
];

/// Inclusive two-step analysis window bounded by knee-angle minima.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleWindow {
    pub start: usize,
    pub end: usize,
}

/// Finds the two-step window "from the most bent right knee": local
/// minima of `theta` with prominence at least `min_prominence` degrees
/// and pairwise separation at least `min_separation` frames. The window
/// starts at the deepest qualifying minimum that still has a subsequent
/// minimum and ends at the next one.
pub fn detect_cycle(
    theta: &[f64],
    min_prominence: f64,
    min_separation: usize,
) -> Result<CycleWindow> {
    if theta.len() < min_separation + 2 {
        return Err(Error::TooFewFrames {
            required: min_separation + 2,
            got: theta.len(),
        });
    }
    let minima = qualifying_minima(theta, min_prominence, min_separation);
    if minima.len() < 2 {
        return Err(Error::NoFullCycle);
    }
    // Deepest minimum that has a successor.
    let mut start = minima[0];
    for &i in &minima[..minima.len() - 1] {
        if theta[i] < theta[start] {
            start = i;
        }
    }
    let end = *minima.iter().find(|&&i| i > start).unwrap();
    Ok(CycleWindow { start, end })
}

/// Local minima filtered by prominence, then greedily thinned (deepest
/// first) to enforce the minimum separation. Returned in frame order.
pub(crate) fn qualifying_minima(theta: &[f64], min_prominence: f64, min_separation: usize) -> Vec<usize> {
    let n = theta.len();
    let mut candidates = Vec::new();
    for i in 1..n - 1 {
        if theta[i] >= theta[i - 1] {
            continue;
        }
        // Allow flat-bottomed troughs: skip the plateau and require the
        // first differing value to the right to be larger.
        let mut j = i + 1;
        while j < n && theta[j] == theta[i] {
            j += 1;
        }
        if j < n && theta[j] > theta[i] && prominence(theta, i) >= min_prominence {
            candidates.push(i);
        }
    }
    candidates.sort_by(|&a, &b| theta[a].partial_cmp(&theta[b]).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for &i in &candidates {
        if kept.iter().all(|&j| i.abs_diff(j) >= min_separation) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Prominence of a local minimum: walk outward on each side until a
/// value below the minimum (or the series edge), tracking the running
/// maximum; the prominence is the lower of the two maxima minus the
/// minimum value.
fn prominence(theta: &[f64], i: usize) -> f64 {
    let v = theta[i];
    let mut left_max = v;
    let mut j = i;
    while j > 0 {
        j -= 1;
        if theta[j] < v {
            break;
        }
        left_max = left_max.max(theta[j]);
    }
    let mut right_max = v;
    let mut j = i;
    while j + 1 < theta.len() {
        j += 1;
        if theta[j] < v {
            break;
        }
        right_max = right_max.max(theta[j]);
    }
    left_max.min(right_max) - v
}

/// Linear resampling of a series to `n` evenly spaced positions over its
/// index range; endpoints are preserved exactly.
pub fn resample(series: &[f64], n: usize) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::WindowTooShort);
    }
    if n < 2 {
        return Err(Error::InvalidParameter("resample target below 2"));
    }
    let last = series.len() - 1;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Integer numerator keeps on-grid positions exact.
        let t = (i * last) as f64 / (n - 1) as f64;
        let k = t as usize;
        if k >= last {
            out.push(series[last]);
        } else {
            let frac = t - k as f64;
            out.push(series[k] + frac * (series[k + 1] - series[k]));
        }
    }
    Ok(out)
}

/// 18 named channels by 85 samples, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    data: Vec<f64>,
}

impl ChannelMatrix {
    pub fn from_channels(channels: &[Vec<f64>]) -> Result<Self> {
        if channels.len() != CHANNEL_COUNT {
            return Err(Error::ShapeMismatch {
                expected: CHANNEL_COUNT,
                got: channels.len(),
            });
        }
        let mut data = Vec::with_capacity(FEATURE_LEN);
        for ch in channels {
            if ch.len() != RESAMPLE_LEN {
                return Err(Error::ShapeMismatch {
                    expected: RESAMPLE_LEN,
                    got: ch.len(),
                });
            }
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("channel matrix"));
            }
            data.extend_from_slice(ch);
        }
        Ok(ChannelMatrix { data })
    }

    pub fn from_flat(data: Vec<f64>) -> Result<Self> {
        if data.len() != FEATURE_LEN {
            return Err(Error::ShapeMismatch {
                expected: FEATURE_LEN,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("channel matrix"));
        }
        Ok(ChannelMatrix { data })
    }

    pub fn get(&self, channel: usize, frame: usize) -> f64 {
        self.data[channel * RESAMPLE_LEN + frame]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.data[channel * RESAMPLE_LEN..(channel + 1) * RESAMPLE_LEN]
    }
}

/// Flattened classifier input: index = channel * 85 + frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout_version: String,
}

/// Channel-major flattening of the matrix; bijective with it.
pub fn assemble_features(matrix: &ChannelMatrix) -> FeatureVector {
    FeatureVector {
        values: matrix.data.clone(),
        layout_version: String::from(LAYOUT_VERSION),
    }
}

pub fn unflatten(features: &FeatureVector) -> Result<ChannelMatrix> {
    if features.layout_version != LAYOUT_VERSION {
        return Err(Error::LayoutMismatch {
            expected: String::from(LAYOUT_VERSION),
            got: features.layout_version.clone(),
        });
    }
    ChannelMatrix::from_flat(features.values.clone())
}

/// One fully processed walking sample, ready for the classifier.
#[derive(Debug, Clone)]
pub struct ProcessedCycle {
    pub video_id: String,
    pub walker_id: String,
    pub label: FaultLabel,
    pub matrix: ChannelMatrix,
    pub features: FeatureVector,
}

impl ProcessedCycle {
    pub fn new(
        video_id: String,
        walker_id: String,
        label: FaultLabel,
        matrix: ChannelMatrix,
    ) -> Self {
        let features = assemble_features(&matrix);
        ProcessedCycle {
            video_id,
            walker_id,
            label,
            matrix,
            features,
        }
    }
}

/// Extracts the window from already-normalized frames, resamples all 18
/// channels to 85 samples, and returns the channel matrix.
pub fn extract_channel_matrix(
    frames: &[NormalizedFrame],
    left_theta: &[f64],
    right_theta: &[f64],
    window: CycleWindow,
) -> Result<ChannelMatrix> {
    let span = &frames[window.start..=window.end];
    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(CHANNEL_COUNT);
    let sides: [(KeypointName, KeypointName, KeypointName, bool); 2] = [
        (
            KeypointName::LHip,
            KeypointName::LKnee,
            KeypointName::LAnkle,
            true,
        ),
        (
            KeypointName::RHip,
            KeypointName::RKnee,
            KeypointName::RAnkle,
            false,
        ),
    ];
    for (hip, knee, ankle, is_left) in sides {
        let joints: [&dyn Fn(&NormalizedFrame) -> Point; 4] = [
            &|f| f.keypoint(hip),
            &|f| f.keypoint(knee),
            &|f| if is_left { f.l_shank() } else { f.r_shank() },
            &|f| f.keypoint(ankle),
        ];
        for joint in joints {
            let xs: Vec<f64> = span.iter().map(|f| joint(f).x).collect();
            let ys: Vec<f64> = span.iter().map(|f| joint(f).y).collect();
            channels.push(resample(&xs, RESAMPLE_LEN)?);
            channels.push(resample(&ys, RESAMPLE_LEN)?);
        }
    }
    for theta in [left_theta, right_theta] {
        channels.push(resample(&theta[window.start..=window.end], RESAMPLE_LEN)?);
    }
    ChannelMatrix::from_channels(&channels)
}
