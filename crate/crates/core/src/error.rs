use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors from validation and the numerical pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A frame did not contain exactly 17 keypoints.
    KeypointCount { expected: usize, got: usize },
    /// A coordinate or derived quantity was NaN or infinite.
    NonFinite(&'static str),
    /// Keypoint confidence outside [0, 1].
    InvalidConfidence(f64),
    /// A sequence had fewer frames than required.
    TooFewFrames { required: usize, got: usize },
    /// fps must be positive and finite.
    InvalidFps(f64),
    /// Net nose displacement is zero; walking direction undefined.
    AmbiguousDirection,
    /// Nose-to-mid-hip distance is zero or non-finite.
    DegenerateFrame,
    /// Hip or ankle coincides with the knee; angle undefined.
    DegenerateLimb,
    /// Fewer than two qualifying knee-angle minima.
    NoFullCycle,
    /// Resampling window shorter than two frames.
    WindowTooShort,
    /// An operation received an empty collection.
    EmptyInput(&'static str),
    DuplicateVideoId(String),
    /// A label refers to a video_id with no sequence.
    UnknownVideoId(String),
    /// Training data contains a single class.
    SingleClass,
    /// Matrix / vector dimensions disagree.
    ShapeMismatch { expected: usize, got: usize },
    /// Feature layout versions differ between artifacts.
    LayoutMismatch { expected: String, got: String },
    /// Models passed to importance analysis target different faults.
    MixedFaultTypes,
    /// No visible keypoints in a ground-truth pose (or whole set).
    NoVisibleKeypoints,
    InvalidParameter(&'static str),
    /// Fewer than two walkers eligible for cross-validation.
    TooFewWalkers,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::KeypointCount { expected, got } => {
                write!(f, "keypoint count: expected {expected}, got {got}")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::InvalidConfidence(c) => write!(f, "confidence {c} outside [0, 1]"),
            Error::TooFewFrames { required, got } => {
                write!(f, "too few frames: need {required}, got {got}")
            }
            Error::InvalidFps(v) => write!(f, "invalid fps: {v}"),
            Error::AmbiguousDirection => write!(f, "ambiguous direction"),
            Error::DegenerateFrame => write!(f, "degenerate frame"),
            Error::DegenerateLimb => write!(f, "degenerate limb"),
            Error::NoFullCycle => write!(f, "no full cycle"),
            Error::WindowTooShort => write!(f, "resampling window shorter than 2 frames"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::DuplicateVideoId(id) => write!(f, "duplicate video_id: {id}"),
            Error::UnknownVideoId(id) => write!(f, "label for unknown video_id: {id}"),
            Error::SingleClass => write!(f, "training data contains a single class"),
            Error::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: expected {expected}, got {got}")
            }
            Error::LayoutMismatch { expected, got } => {
                write!(f, "layout mismatch: expected {expected}, got {got}")
            }
            Error::MixedFaultTypes => write!(f, "models target different fault types"),
            Error::NoVisibleKeypoints => write!(f, "no visible keypoints"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::TooFewWalkers => write!(f, "fewer than two eligible walkers"),
        }
    }
}

impl core::error::Error for Error {}
