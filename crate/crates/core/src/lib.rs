//! Core algorithms for race-walking fault detection from 2D keypoint
//! time series: pose normalization, knee-angle computation, gait-cycle
//! extraction, logistic-regression judgment models, leave-one-walker-out
//! evaluation, OKS/AP keypoint metrics, and a synthetic gait generator.
//!
//! This crate is `no_std` (with `alloc`); all IO and file formats live in
//! the companion `racewalk` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classifier;
pub mod error;
pub mod evaluation;
pub mod gait;
pub mod pose;
pub mod pose_metrics;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
