//! Gradient-boosted decision trees for binary classification.
//!
//! Second-order boosting on weighted logistic loss with exact greedy split
//! finding, learned per-node default directions for missing values, class
//! weighting for rare events, and a compact versioned binary model file.
//! Training is fully deterministic: no subsampling, ties broken by lowest
//! feature index, then lowest threshold, then missing-left.

mod io;
mod train;
mod tree;

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use train::{default_feature_names, initial_gradients, root_split_for_test, train, TrainResult};
pub use tree::{Node, Tree};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("non-finite feature value at row {row}, feature {feature} (missing must be NaN)")]
    NonFiniteFeature { row: usize, feature: usize },
    #[error("feature dimension mismatch: model has {expected}, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("model format version {got} unsupported (expected {expected})")]
    FormatVersionMismatch { expected: u32, got: u32 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    BadConfig(String),
}

/// Training hyperparameters. Defaults mirror the conventional gradient
/// boosting reference configuration; no tuning happens anywhere downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: u32,
    pub max_depth: u32,
    pub learning_rate: f64,
    /// Minimum hessian sum in each child for a split to be admissible.
    pub min_child_weight: f64,
    /// L2 regularization on leaf weights.
    pub l2_lambda: f64,
    /// Minimum gain for a split to be kept.
    pub gamma: f64,
    /// Loss multiplier for positive examples.
    pub scale_pos_weight: f64,
    /// Stamped into the model metadata; training itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 100,
            max_depth: 6,
            learning_rate: 0.3,
            min_child_weight: 1.0,
            l2_lambda: 1.0,
            gamma: 0.0,
            scale_pos_weight: 1.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GbdtError> {
        if self.n_trees < 1 {
            return Err(GbdtError::BadConfig("n_trees must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbdtError::BadConfig("learning_rate must be in (0, 1]".into()));
        }
        if self.max_depth < 1 {
            return Err(GbdtError::BadConfig("max_depth must be >= 1".into()));
        }
        if !(self.scale_pos_weight > 0.0) {
            return Err(GbdtError::BadConfig("scale_pos_weight must be > 0".into()));
        }
        if self.min_child_weight < 0.0 || self.l2_lambda < 0.0 || self.gamma < 0.0 {
            return Err(GbdtError::BadConfig("regularizers must be >= 0".into()));
        }
        Ok(())
    }
}

/// Model provenance carried inside the serialized file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub station: String,
    pub horizon_h: u32,
    pub train_start: String,
    pub train_end: String,
    pub n_train_rows: u64,
}

/// A trained ensemble for one (station, horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub trees: Vec<Tree>,
    /// Initial log-odds: the weighted class prevalence.
    pub base_score: f64,
    pub feature_names: Vec<String>,
    pub config: TrainConfig,
    pub metadata: ModelMetadata,
}

impl Model {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_dim(&self, row: &[f64]) -> Result<(), GbdtError> {
        if row.len() != self.n_features() {
            return Err(GbdtError::DimensionMismatch { expected: self.n_features(), got: row.len() });
        }
        Ok(())
    }

    /// Raw additive margin (log-odds) for one dense row; NaN marks missing.
    pub fn predict_margin(&self, row: &[f64]) -> Result<f64, GbdtError> {
        self.check_dim(row)?;
        let mut margin = self.base_score;
        for tree in &self.trees {
            margin += tree.predict_leaf(row).weight;
        }
        Ok(margin)
    }

    /// Probability of the positive class; deterministic and total over every
    /// missingness pattern (missing values follow stored default directions).
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, GbdtError> {
        Ok(sigmoid(self.predict_margin(row)?))
    }

    /// Probability from a feature vector in the model's canonical order.
    pub fn predict_features(&self, fv: &crate::features::FeatureVector) -> Result<f64, GbdtError> {
        self.predict_proba(&fv.to_row())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Negative-to-positive count ratio: the class-imbalance weight.
pub fn compute_scale_pos_weight(labels: &[u8]) -> Result<f64, GbdtError> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(GbdtError::SingleClass);
    }
    Ok(neg as f64 / pos as f64)
}

/// Exact ROC AUC by the Mann-Whitney statistic: P(score+ > score-) plus half
/// the tie probability. No binning.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, GbdtError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels must align");
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(GbdtError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of positive ranks with midranks for ties.
    let mut rank_sum_pos = 0.0_f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let pos = pos as f64;
    let neg = neg as f64;
    Ok((rank_sum_pos - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Dense feature matrix with labels; missing values encode as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_features: usize,
    values: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(n_features: usize) -> Self {
        Dataset { n_features, values: Vec::new(), labels: Vec::new() }
    }

    pub fn push_row(&mut self, row: &[f64], label: u8) {
        assert_eq!(row.len(), self.n_features, "row width mismatch");
        self.values.extend_from_slice(row);
        self.labels.push(label);
    }

    pub fn from_examples(examples: &[crate::features::LabeledExample]) -> Self {
        let mut ds = Dataset::new(crate::features::N_FEATURES);
        for e in examples {
            ds.push_row(&e.features.to_row(), e.label);
        }
        ds
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.n_features..(r + 1) * self.n_features]
    }

    pub fn value(&self, r: usize, f: usize) -> f64 {
        self.values[r * self.n_features + f]
    }

    /// Reject infinities; NaN (missing) is fine.
    pub fn check_finite(&self) -> Result<(), GbdtError> {
        for r in 0..self.n_rows() {
            for f in 0..self.n_features {
                if self.value(r, f).is_infinite() {
                    return Err(GbdtError::NonFiniteFeature { row: r, feature: f });
                }
            }
        }
        Ok(())
    }

    /// A copy with the given feature columns forced missing.
    pub fn with_features_masked(&self, features: &[usize]) -> Dataset {
        let mut out = self.clone();
        for r in 0..out.n_rows() {
            for &f in features {
                out.values[r * out.n_features + f] = f64::NAN;
            }
        }
        out
    }
}

/// Independent exhaustive split search used by the test suites to verify the
/// incremental scan. Candidates are enumerated per (feature, boundary,
/// default direction) and each gain is recomputed from scratch; the
/// summation conventions mirror the trainer's so float ties resolve
/// identically (totals in row order, present values in sorted order).
pub mod reference {
    use super::{Dataset, TrainConfig};

    /// Best root split by direct enumeration: `(feature, threshold,
    /// default_left, gain)`, or None when nothing clears the gain floor.
    /// Ties break to lowest feature, lowest threshold, missing-left.
    pub fn exhaustive_root_split(
        data: &Dataset,
        grad: &[f64],
        hess: &[f64],
        config: &TrainConfig,
    ) -> Option<(u32, f64, bool, f64)> {
        let lambda = config.l2_lambda;
        let total_g: f64 = grad.iter().sum();
        let total_h: f64 = hess.iter().sum();
        let parent = total_g * total_g / (total_h + lambda);

        let mut best: Option<(u32, f64, bool, f64)> = None;
        for f in 0..data.n_features {
            let mut present: Vec<usize> =
                (0..data.n_rows()).filter(|&r| !data.value(r, f).is_nan()).collect();
            present.sort_by(|&a, &b| data.value(a, f).total_cmp(&data.value(b, f)).then(a.cmp(&b)));

            let mut present_g = 0.0;
            let mut present_h = 0.0;
            for &r in &present {
                present_g += grad[r];
                present_h += hess[r];
            }
            let miss_g = total_g - present_g;
            let miss_h = total_h - present_h;

            for k in 1..present.len() {
                let lo = data.value(present[k - 1], f);
                let hi = data.value(present[k], f);
                if hi <= lo {
                    continue;
                }
                let threshold = 0.5 * (lo + hi);
                if !(threshold > lo && threshold <= hi) {
                    continue;
                }
                // Left-present sums recomputed from scratch, in sorted order.
                let mut lg = 0.0;
                let mut lh = 0.0;
                for &r in &present[..k] {
                    lg += grad[r];
                    lh += hess[r];
                }
                for default_left in [true, false] {
                    let (gl, hl) = if default_left { (lg + miss_g, lh + miss_h) } else { (lg, lh) };
                    let (gr, hr) = (total_g - gl, total_h - hl);
                    if hl < config.min_child_weight || hr < config.min_child_weight {
                        continue;
                    }
                    let gain =
                        0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent)
                            - config.gamma;
                    if gain <= 0.0 {
                        continue;
                    }
                    let cand = (f as u32, threshold, default_left, gain);
                    let wins = match best {
                        None => true,
                        Some((bf, bt, bd, bg)) => {
                            gain > bg
                                || (gain == bg
                                    && (f as u32, threshold, !default_left)
                                        < (bf, bt, !bd))
                        }
                    };
                    if wins {
                        best = Some(cand);
                    }
                }
            }
        }
        best
    }
}
