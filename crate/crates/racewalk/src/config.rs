//! Run configuration: defaults, config-file loading, and flag overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use racewalk_core::classifier::Hyperparameters;

/// Every tunable constant of the pipeline. Precedence when resolving:
/// command-line flags, then the config file, then these defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Outlier screen multiplier k on the pooled sigma.
    pub outlier_sd_mult: f64,
    /// Minimum prominence of a knee-angle minimum, degrees.
    pub min_prominence_deg: f64,
    /// Minimum separation between knee-angle minima, frames.
    pub min_separation_frames: usize,
    /// L2 regularization strength.
    pub lambda: f64,
    /// Gradient infinity-norm convergence tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Fault decision threshold on the predicted probability.
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            outlier_sd_mult: 3.0,
            min_prominence_deg: 20.0,
            min_separation_frames: 30,
            lambda: 1.0,
            tol: 1e-6,
            max_iter: 10_000,
            threshold: 0.5,
        }
    }
}

/// Optional per-field overrides, typically from command-line flags.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfigOverrides {
    pub outlier_sd_mult: Option<f64>,
    pub min_prominence_deg: Option<f64>,
    pub min_separation_frames: Option<usize>,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub threshold: Option<f64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outlier_sd_mult > 0.0
            && self.min_prominence_deg > 0.0
            && self.min_separation_frames > 0
            && self.lambda >= 0.0
            && self.tol > 0.0
            && self.max_iter > 0)
        {
            bail!("all numeric config fields must be positive (lambda may be 0)");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            bail!("threshold must be in (0, 1)");
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))?;
        Ok(cfg)
    }

    /// Resolves the effective config: file values (when a file is given)
    /// over defaults, then flag overrides over both.
    pub fn resolve(file: Option<&Path>, overrides: &ConfigOverrides) -> Result<Self> {
        let mut cfg = match file {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = overrides.outlier_sd_mult {
            cfg.outlier_sd_mult = v;
        }
        if let Some(v) = overrides.min_prominence_deg {
            cfg.min_prominence_deg = v;
        }
        if let Some(v) = overrides.min_separation_frames {
            cfg.min_separation_frames = v;
        }
        if let Some(v) = overrides.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = overrides.tol {
            cfg.tol = v;
        }
        if let Some(v) = overrides.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = overrides.threshold {
            cfg.threshold = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            lambda: self.lambda,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}
