//! File formats, configuration, and pipeline wiring for the
//! race-walking fault detection toolkit. The math lives in
//! `racewalk-core`; this crate adds IO and the command-line surface.

pub mod config;
pub mod formats;
pub mod pipeline;

pub use racewalk_core as core;
