//! Leave-one-walker-out cross-validation and metric computation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::classifier::{self, FeatureMatrix, Hyperparameters, LogisticModel};
use crate::error::{Error, Result};
use crate::gait::ProcessedCycle;
use crate::pose::FaultLabel;

/// One cross-validation fold: test on one walker, train on the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSpec {
    pub fold_id: String,
    pub test_walker_id: String,
    pub train_walker_ids: Vec<String>,
}

/// Video ids actually used by a fold, for leakage audits.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldManifest {
    pub fold_id: String,
    pub train_video_ids: Vec<String>,
    pub test_video_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, actual_fault: bool, predicted_fault: bool) {
        match (actual_fault, predicted_fault) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// Per-walker metric row; metrics undefined by a zero denominator are
/// absent rather than zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub walker_id: String,
    pub fault_type: FaultLabel,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_score: Option<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_score: Option<f64>,
}

/// Accuracy, precision = tp/(tp+fp), recall = tp/(tp+fn), and
/// F = 2PR/(P+R); any 0/0 yields an absent value.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix"));
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f_score = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f_score,
    })
}

fn is_task_sample(label: FaultLabel, fault: FaultLabel) -> bool {
    label == fault || label == FaultLabel::Normal
}

/// One fold per walker that has at least one sample of the fault class.
/// Training pools the fault-vs-Normal samples of every other walker, so
/// a walker without fault samples (like walker E for BK) never becomes a
/// test fold but still contributes Normal training samples.
pub fn make_lowo_folds(cycles: &[ProcessedCycle], fault: FaultLabel) -> Result<Vec<FoldSpec>> {
    if fault == FaultLabel::Normal {
        return Err(Error::InvalidParameter("fault must be BK or LC"));
    }
    let mut task_walkers: BTreeSet<&str> = BTreeSet::new();
    let mut fault_walkers: BTreeSet<&str> = BTreeSet::new();
    for c in cycles {
        if is_task_sample(c.label, fault) {
            task_walkers.insert(&c.walker_id);
        }
        if c.label == fault {
            fault_walkers.insert(&c.walker_id);
        }
    }
    if fault_walkers.len() < 2 {
        return Err(Error::TooFewWalkers);
    }
    let folds = fault_walkers
        .iter()
        .map(|&test| FoldSpec {
            fold_id: format!("{}_{}", fault.as_str(), test),
            test_walker_id: String::from(test),
            train_walker_ids: task_walkers
                .iter()
                .filter(|&&w| w != test)
                .map(|&w| String::from(w))
                .collect(),
        })
        .collect();
    Ok(folds)
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub rows: Vec<MetricsRow>,
    pub models: Vec<LogisticModel>,
    pub manifests: Vec<FoldManifest>,
}

/// Runs the full leave-one-walker-out protocol for one fault type:
/// fit standardizer and model on the training walkers' fault-vs-Normal
/// samples, evaluate on the held-out walker, one metrics row per fold.
pub fn run_cv(
    cycles: &[ProcessedCycle],
    fault: FaultLabel,
    hp: Hyperparameters,
    threshold: f64,
) -> Result<CvResult> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter("threshold must be in (0, 1)"));
    }
    let folds = make_lowo_folds(cycles, fault)?;
    let mut by_walker: BTreeMap<&str, Vec<&ProcessedCycle>> = BTreeMap::new();
    for c in cycles {
        if is_task_sample(c.label, fault) {
            by_walker.entry(&c.walker_id).or_default().push(c);
        }
    }
    let mut rows = Vec::new();
    let mut models = Vec::new();
    let mut manifests = Vec::new();
    for fold in &folds {
        let mut train: Vec<&ProcessedCycle> = Vec::new();
        for w in &fold.train_walker_ids {
            train.extend(by_walker.get(w.as_str()).into_iter().flatten());
        }
        let test = &by_walker[fold.test_walker_id.as_str()];

        let x_rows: Vec<_> = train.iter().map(|c| c.features.values.clone()).collect();
        let x = FeatureMatrix::from_rows(&x_rows)?;
        let y: Vec<f64> = train
            .iter()
            .map(|c| if c.label == fault { 1.0 } else { 0.0 })
            .collect();
        let layout = train[0].features.layout_version.clone();
        let model = classifier::train(&x, &y, fault, hp, fold.fold_id.clone(), layout)?;

        let mut cm = ConfusionMatrix::default();
        for c in test.iter() {
            let predicted = classifier::predict(&model, &c.features.values, threshold)?;
            cm.record(c.label == fault, predicted);
        }
        let m = compute_metrics(&cm)?;
        rows.push(MetricsRow {
            walker_id: fold.test_walker_id.clone(),
            fault_type: fault,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f_score: m.f_score,
            confusion: cm,
        });
        manifests.push(FoldManifest {
            fold_id: fold.fold_id.clone(),
            train_video_ids: train.iter().map(|c| c.video_id.clone()).collect(),
            test_video_ids: test.iter().map(|c| c.video_id.clone()).collect(),
        });
        models.push(model);
    }
    Ok(CvResult {
        rows,
        models,
        manifests,
    })
}
