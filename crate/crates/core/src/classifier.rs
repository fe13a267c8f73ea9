//! Standardization, L2-regularized logistic regression, and
//! standardized-coefficient feature importance.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gait::{CHANNEL_COUNT, FEATURE_LEN, RESAMPLE_LEN};
use crate::pose::FaultLabel;

/// Row-major dense matrix of raw or standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("feature matrix"));
        }
        let n_cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::ShapeMismatch {
                    expected: n_cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(FeatureMatrix {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

/// Per-feature mean and population standard deviation fit on training
/// data. Zero-variance features keep std 1 so they standardize to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                expected: self.mean.len(),
                got: raw.len(),
            });
        }
        Ok(raw
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_matrix(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let rows: Vec<Vec<f64>> = (0..x.n_rows)
            .map(|i| self.apply(x.row(i)))
            .collect::<Result<_>>()?;
        FeatureMatrix::from_rows(&rows)
    }
}

pub fn fit_standardizer(x: &FeatureMatrix) -> Result<Standardizer> {
    if x.n_rows < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            got: x.n_rows,
        });
    }
    let n = x.n_rows as f64;
    let p = x.n_cols;
    let mut mean = vec![0.0; p];
    for i in 0..x.n_rows {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; p];
    for i in 0..x.n_rows {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let std = var
        .iter()
        .map(|s| {
            let sd = libm::sqrt(s / n);
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(Standardizer { mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            lambda: 1.0,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

/// Binary judgment model for one fault type, on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub layout_version: String,
    pub fault_type: FaultLabel,
    pub hyperparameters: Hyperparameters,
    pub training_fold_id: String,
    pub converged: bool,
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + libm::exp(-s))
    } else {
        let e = libm::exp(s);
        e / (1.0 + e)
    }
}

/// Average log-loss plus (lambda / 2n) ||w||^2, with its exact gradient.
/// The gradient vector holds the weight components followed by the bias
/// component; the bias is unregularized.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    x: &FeatureMatrix,
    y: &[f64],
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    let p = x.n_cols;
    if weights.len() != p {
        return Err(Error::ShapeMismatch {
            expected: p,
            got: weights.len(),
        });
    }
    if y.len() != x.n_rows {
        return Err(Error::ShapeMismatch {
            expected: x.n_rows,
            got: y.len(),
        });
    }
    let n = x.n_rows as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p + 1];
    for i in 0..x.n_rows {
        let row = x.row(i);
        let s = bias + row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
        // Stable log(1 + exp(s)) - y s.
        loss += s.max(0.0) - y[i] * s + libm::log(1.0 + libm::exp(-libm::fabs(s)));
        let r = sigmoid(s) - y[i];
        for (g, v) in grad[..p].iter_mut().zip(row) {
            *g += r * v;
        }
        grad[p] += r;
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    let mut w_sq = 0.0;
    for (g, w) in grad[..p].iter_mut().zip(weights) {
        *g += lambda * w / n;
        w_sq += w * w;
    }
    loss += lambda / (2.0 * n) * w_sq;
    if !loss.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    Ok((loss, grad))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(libm::fabs(*b)))
}

/// Deterministic full-batch L-BFGS with Armijo backtracking, from a zero
/// start. Returns (params, converged) where the last param is the bias.
fn minimize(
    x: &FeatureMatrix,
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, bool)> {
    const HISTORY: usize = 10;
    let p = x.n_cols;
    let mut params = vec![0.0; p + 1];
    let eval = |params: &[f64]| loss_and_gradient(&params[..p], params[p], x, y, lambda);
    let (mut loss, mut grad) = eval(&params)?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        if inf_norm(&grad) <= tol {
            converged = true;
            break;
        }
        // Two-loop recursion.
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = vec![0.0; s_hist.len()];
        for j in (0..s_hist.len()).rev() {
            let rho = 1.0 / dot(&y_hist[j], &s_hist[j]);
            let a = rho * dot(&s_hist[j], &dir);
            alphas[j] = a;
            axpy(-a, &y_hist[j], &mut dir);
        }
        if let Some(j) = s_hist.len().checked_sub(1) {
            let gamma = dot(&s_hist[j], &y_hist[j]) / dot(&y_hist[j], &y_hist[j]);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
        }
        for j in 0..s_hist.len() {
            let rho = 1.0 / dot(&y_hist[j], &s_hist[j]);
            let beta = rho * dot(&y_hist[j], &dir);
            axpy(alphas[j] - beta, &s_hist[j], &mut dir);
        }
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            // Fall back to steepest descent.
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
            s_hist.clear();
            y_hist.clear();
        }
        // Armijo backtracking.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = params
                .iter()
                .zip(&dir)
                .map(|(v, d)| v + step * d)
                .collect();
            let (trial_loss, trial_grad) = eval(&trial)?;
            if trial_loss <= loss + 1e-4 * step * slope {
                accepted = Some((trial, trial_loss, trial_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((new_params, new_loss, new_grad)) = accepted else {
            // Line search stalled at numerical precision.
            converged = inf_norm(&grad) <= tol;
            break;
        };
        let s: Vec<f64> = new_params
            .iter()
            .zip(&params)
            .map(|(a, b)| a - b)
            .collect();
        let yv: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        if dot(&s, &yv) > 1e-12 {
            if s_hist.len() == HISTORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
        }
        params = new_params;
        loss = new_loss;
        grad = new_grad;
    }
    if inf_norm(&grad) <= tol {
        converged = true;
    }
    Ok((params, converged))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// Fits the standardizer on `x`, then minimizes the regularized log-loss
/// on the standardized features. `y` holds 0/1 labels (1 = fault).
pub fn train(
    x: &FeatureMatrix,
    y: &[f64],
    fault_type: FaultLabel,
    hp: Hyperparameters,
    training_fold_id: String,
    layout_version: String,
) -> Result<LogisticModel> {
    if y.len() != x.n_rows() {
        return Err(Error::ShapeMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if !(hp.lambda >= 0.0 && hp.tol > 0.0) {
        return Err(Error::InvalidParameter("lambda >= 0 and tol > 0 required"));
    }
    let has_pos = y.iter().any(|&v| v == 1.0);
    let has_neg = y.iter().any(|&v| v == 0.0);
    if !has_pos || !has_neg {
        return Err(Error::SingleClass);
    }
    let standardizer = fit_standardizer(x)?;
    let z = standardizer.apply_matrix(x)?;
    let (params, converged) = minimize(&z, y, hp.lambda, hp.tol, hp.max_iter)?;
    let p = x.n_cols();
    Ok(LogisticModel {
        weights: params[..p].to_vec(),
        bias: params[p],
        standardizer,
        layout_version,
        fault_type,
        hyperparameters: hp,
        training_fold_id,
        converged,
    })
}

/// Fault probability for one raw feature vector.
pub fn predict_proba(model: &LogisticModel, raw: &[f64]) -> Result<f64> {
    let z = model.standardizer.apply(raw)?;
    Ok(sigmoid(model.bias + dot(&model.weights, &z)))
}

/// Hard judgment at the given threshold: `true` means the fault.
pub fn predict(model: &LogisticModel, raw: &[f64], threshold: f64) -> Result<bool> {
    Ok(predict_proba(model, raw)? >= threshold)
}

/// The nine feature categories of the importance analysis; left and
/// right sides pool into the same category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureCategory {
    HipX,
    HipY,
    KneeX,
    KneeY,
    ShankX,
    ShankY,
    AnkleX,
    AnkleY,
    KneeAngle,
}

pub const CATEGORY_COUNT: usize = 9;

impl FeatureCategory {
    pub const ALL: [FeatureCategory; CATEGORY_COUNT] = [
        FeatureCategory::HipX,
        FeatureCategory::HipY,
        FeatureCategory::KneeX,
        FeatureCategory::KneeY,
        FeatureCategory::ShankX,
        FeatureCategory::ShankY,
        FeatureCategory::AnkleX,
        FeatureCategory::AnkleY,
        FeatureCategory::KneeAngle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureCategory::HipX => "hip-x",
            FeatureCategory::HipY => "hip-y",
            FeatureCategory::KneeX => "knee-x",
            FeatureCategory::KneeY => "knee-y",
            FeatureCategory::ShankX => "shank-x",
            FeatureCategory::ShankY => "shank-y",
            FeatureCategory::AnkleX => "ankle-x",
            FeatureCategory::AnkleY => "ankle-y",
            FeatureCategory::KneeAngle => "knee-angle",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }
}

/// Category of a channel in the "v1" layout.
pub fn category_of_channel(channel: usize) -> FeatureCategory {
    match channel {
        16 | 17 => FeatureCategory::KneeAngle,
        c => {
            // Sides (8 channels each) collapse; joints keep (x, y) pairs.
            let within_side = c % 8;
            FeatureCategory::ALL[within_side]
        }
    }
}

/// Category of a flattened feature index (index = channel * 85 + frame).
pub fn category_of_feature(index: usize) -> FeatureCategory {
    category_of_channel(index / RESAMPLE_LEN)
}

pub const FRAME_BIN_SIZE: usize = 5;
pub const FRAME_BIN_COUNT: usize = RESAMPLE_LEN / FRAME_BIN_SIZE;

/// Importance aggregated from the absolute standardized coefficients of
/// several fold models.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    /// Indexed by `FeatureCategory::index()`.
    pub category_importance: [f64; CATEGORY_COUNT],
    /// Per channel, 17 bins of 5 frames each.
    pub frame_importance: [[f64; FRAME_BIN_COUNT]; CHANNEL_COUNT],
    pub n_models_averaged: usize,
    pub fault_type: FaultLabel,
}

impl ImportanceReport {
    pub fn top_category(&self) -> FeatureCategory {
        let mut best = 0;
        for (i, v) in self.category_importance.iter().enumerate() {
            if *v > self.category_importance[best] {
                best = i;
            }
        }
        FeatureCategory::ALL[best]
    }
}

/// Mean over models of |weight| per feature, then averaged within each
/// of the nine categories and within per-channel 5-frame bins.
pub fn feature_importance(models: &[LogisticModel]) -> Result<ImportanceReport> {
    let first = models.first().ok_or(Error::EmptyInput("models"))?;
    for m in models {
        if m.layout_version != first.layout_version {
            return Err(Error::LayoutMismatch {
                expected: first.layout_version.clone(),
                got: m.layout_version.clone(),
            });
        }
        if m.fault_type != first.fault_type {
            return Err(Error::MixedFaultTypes);
        }
        if m.weights.len() != FEATURE_LEN {
            return Err(Error::ShapeMismatch {
                expected: FEATURE_LEN,
                got: m.weights.len(),
            });
        }
    }
    let mut per_feature = vec![0.0; FEATURE_LEN];
    for m in models {
        for (acc, w) in per_feature.iter_mut().zip(&m.weights) {
            *acc += libm::fabs(*w);
        }
    }
    let n_models = models.len() as f64;
    for v in per_feature.iter_mut() {
        *v /= n_models;
    }

    let mut category_sum = [0.0; CATEGORY_COUNT];
    let mut category_n = [0usize; CATEGORY_COUNT];
    for (i, v) in per_feature.iter().enumerate() {
        let c = category_of_feature(i).index();
        category_sum[c] += v;
        category_n[c] += 1;
    }
    let mut category_importance = [0.0; CATEGORY_COUNT];
    for c in 0..CATEGORY_COUNT {
        category_importance[c] = category_sum[c] / category_n[c] as f64;
    }

    let mut frame_importance = [[0.0; FRAME_BIN_COUNT]; CHANNEL_COUNT];
    for ch in 0..CHANNEL_COUNT {
        for bin in 0..FRAME_BIN_COUNT {
            let start = ch * RESAMPLE_LEN + bin * FRAME_BIN_SIZE;
            let sum: f64 = per_feature[start..start + FRAME_BIN_SIZE].iter().sum();
            frame_importance[ch][bin] = sum / FRAME_BIN_SIZE as f64;
        }
    }
    Ok(ImportanceReport {
        category_importance,
        frame_importance,
        n_models_averaged: models.len(),
        fault_type: first.fault_type,
    })
}
