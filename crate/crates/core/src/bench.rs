//! Forecast verification: confusion matrices, derived skill metrics, the
//! TAF-versus-model comparison protocol, and feature-group ablation.
//!
//! The comparison is symmetric by construction: for every decision hour both
//! agents predict the same target from information available at the same
//! time, rows either agent cannot cover are excluded from both (and
//! counted), and both are scored against the same observed outcomes.

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::features::{build_matrix, temporal_split, Horizon, FEATURE_NAMES};
use crate::gbdt::{auc, compute_scale_pos_weight, train, Dataset, Model, ModelMetadata, TrainConfig};
use crate::obs::HourlySeries;
use crate::taf::{select_bulletin, taf_predicts_ifr, TafBulletin};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("prediction and truth lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("no positive truth rows: recall undefined")]
    NoPositiveTruth,
    #[error("no positive predictions: precision undefined")]
    NoPositivePred,
    #[error("no overlap between series, bulletins and ground truth")]
    NoOverlap,
    #[error("model horizon is {model}h but benchmark asked for {asked}h")]
    HorizonMismatch { model: u32, asked: u32 },
    #[error("unknown feature group: {0:?} (expected lags, thermodynamic or kinematic)")]
    UnknownGroup(String),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Gbdt(#[from] crate::gbdt::GbdtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_pos: u64,
}

impl ConfusionMatrix {
    pub fn new(true_neg: u64, false_pos: u64, false_neg: u64, true_pos: u64) -> Self {
        ConfusionMatrix { true_neg, false_pos, false_neg, true_pos }
    }

    pub fn total(&self) -> u64 {
        self.true_neg + self.false_pos + self.false_neg + self.true_pos
    }
}

/// Cell counts from aligned binary predictions and truth.
pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionMatrix, BenchError> {
    if pred.len() != truth.len() {
        return Err(BenchError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in pred.iter().zip(truth) {
        match (p, y) {
            (0, 0) => cm.true_neg += 1,
            (1, 0) => cm.false_pos += 1,
            (0, 1) => cm.false_neg += 1,
            (1, 1) => cm.true_pos += 1,
            _ => panic!("predictions and truth must be 0/1"),
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// Recall, precision and F1 from a confusion matrix. Undefined denominators
/// are signaled, never returned as NaN.
pub fn metrics(cm: &ConfusionMatrix) -> Result<ClassMetrics, BenchError> {
    if cm.true_pos + cm.false_neg == 0 {
        return Err(BenchError::NoPositiveTruth);
    }
    if cm.true_pos + cm.false_pos == 0 {
        return Err(BenchError::NoPositivePred);
    }
    let tp = cm.true_pos as f64;
    let recall = tp / (tp + cm.false_neg as f64);
    let precision = tp / (tp + cm.false_pos as f64);
    let f1 = if recall + precision > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassMetrics { recall, precision, f1 })
}

/// Fixed-threshold alert rule: probability at or above the threshold alerts.
/// The boundary classifies as 1 — missed events are the critical failure.
pub fn classify(probability: f64, threshold: f64) -> u8 {
    u8::from(probability >= threshold)
}

/// F1 across a range of thresholds, for sensitivity reporting. Thresholds
/// where F1 is undefined (no alerts or no events) carry None.
pub fn threshold_sweep(
    probs: &[f64],
    truth: &[u8],
    lo: f64,
    hi: f64,
    step: f64,
) -> Vec<(f64, Option<f64>)> {
    assert!(step > 0.0 && hi >= lo);
    let mut out = Vec::new();
    let mut thr = lo;
    while thr <= hi + 1e-12 {
        let pred: Vec<u8> = probs.iter().map(|&p| classify(p, thr)).collect();
        let f1 = confusion(&pred, truth).ok().and_then(|cm| metrics(&cm).ok()).map(|m| m.f1);
        out.push(((thr * 1000.0).round() / 1000.0, f1));
        thr += step;
    }
    out
}

/// One agent's scores. Metrics are None where undefined (signaled upstream);
/// AUC only exists for probabilistic agents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentScore {
    pub confusion: ConfusionMatrix,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

impl AgentScore {
    fn from_confusion(cm: ConfusionMatrix, auc: Option<f64>) -> Self {
        match metrics(&cm) {
            Ok(m) => AgentScore {
                confusion: cm,
                recall: Some(m.recall),
                precision: Some(m.precision),
                f1: Some(m.f1),
                auc,
            },
            Err(BenchError::NoPositiveTruth) => {
                // Precision may still be defined without positive truth.
                let precision = (cm.true_pos + cm.false_pos > 0)
                    .then(|| cm.true_pos as f64 / (cm.true_pos + cm.false_pos) as f64);
                AgentScore { confusion: cm, recall: None, precision, f1: None, auc }
            }
            Err(BenchError::NoPositivePred) => {
                let recall = (cm.true_pos + cm.false_neg > 0)
                    .then(|| cm.true_pos as f64 / (cm.true_pos + cm.false_neg) as f64);
                AgentScore { confusion: cm, recall, precision: None, f1: None, auc }
            }
            Err(_) => unreachable!("metrics only signals undefined denominators"),
        }
    }
}

/// Side-by-side verification of the model and the TAF baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub station: String,
    pub horizon_h: u32,
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    /// Rows scored for both agents.
    pub n_evaluated: u64,
    /// Rows dropped because one agent lacked coverage (dropped from both).
    pub n_excluded: u64,
    pub ml: AgentScore,
    pub taf: AgentScore,
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let pct = |v: Option<f64>| match v {
            Some(x) => format!("{:.1}%", x * 100.0),
            None => "-".to_string(),
        };
        writeln!(
            f,
            "Station {}  horizon +{}h  window {} .. {}",
            self.station,
            self.horizon_h,
            self.window_start.format("%Y-%m-%d %H:%MZ"),
            self.window_end.format("%Y-%m-%d %H:%MZ"),
        )?;
        writeln!(
            f,
            "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>8} {:>7}",
            "Agent", "TN", "FP", "FN", "TP", "Recall", "Precision", "F1", "AUC"
        )?;
        for (name, s) in [("Human (TAF)", &self.taf), ("ML", &self.ml)] {
            writeln!(
                f,
                "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>8} {:>7}",
                name,
                s.confusion.true_neg,
                s.confusion.false_pos,
                s.confusion.false_neg,
                s.confusion.true_pos,
                pct(s.recall),
                pct(s.precision),
                pct(s.f1),
                s.auc.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into()),
            )?;
        }
        write!(f, "evaluated {} rows, excluded {} (coverage)", self.n_evaluated, self.n_excluded)
    }
}

/// Row produced for each scored decision hour, for the resolved-forecast CSV.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRow {
    pub valid_utc: DateTime<Utc>,
    pub ml_probability: f64,
    pub ml_ifr: u8,
    pub taf_vis_sm: Option<f64>,
    pub taf_ifr: u8,
    pub observed_ifr: u8,
}

/// Run the comparison protocol over the overlap of series, bulletins and
/// ground truth.
///
/// For each decision hour `t0` with a usable feature row and an observed
/// label at `t0 + h`, the model classifies `predict_proba` at `threshold`
/// and the TAF agent resolves the latest bulletin issued at or before `t0`.
/// Hours the TAF cannot cover are excluded from both agents.
#[allow(clippy::too_many_arguments)]
pub fn run_benchmark(
    model: &Model,
    series: &HourlySeries,
    lat: f64,
    lon: f64,
    bulletins: &[TafBulletin],
    horizon: Horizon,
    threshold: f64,
    window: Option<(DateTime<Utc>, DateTime<Utc>)>,
) -> Result<(VerificationReport, Vec<ResolvedRow>), BenchError> {
    if model.metadata.horizon_h != 0 && model.metadata.horizon_h != horizon.hours() as u32 {
        return Err(BenchError::HorizonMismatch {
            model: model.metadata.horizon_h,
            asked: horizon.hours() as u32,
        });
    }

    let examples = build_matrix(series, lat, lon, horizon)?;
    let mut rows = Vec::new();
    let mut n_excluded = 0u64;
    let mut window_start = None;
    let mut window_end = None;
    for e in &examples {
        if let Some((lo, hi)) = window {
            if e.t < lo || e.t > hi {
                continue;
            }
        }
        window_start.get_or_insert(e.t);
        window_end = Some(e.t);
        let target = e.t + chrono::Duration::hours(horizon.hours());
        let taf_call = select_bulletin(bulletins, e.t, target).and_then(|b| {
            taf_predicts_ifr(b, target).map(|ifr| (crate::taf::resolve_visibility(b, target), ifr))
        });
        let Some((taf_vis, taf_ifr)) = taf_call else {
            n_excluded += 1;
            continue;
        };
        let prob = model.predict_features(&e.features)?;
        rows.push(ResolvedRow {
            valid_utc: e.t,
            ml_probability: prob,
            ml_ifr: classify(prob, threshold),
            taf_vis_sm: taf_vis,
            taf_ifr,
            observed_ifr: e.label,
        });
    }
    if rows.is_empty() {
        return Err(BenchError::NoOverlap);
    }

    let truth: Vec<u8> = rows.iter().map(|r| r.observed_ifr).collect();
    let ml_pred: Vec<u8> = rows.iter().map(|r| r.ml_ifr).collect();
    let taf_pred: Vec<u8> = rows.iter().map(|r| r.taf_ifr).collect();
    let probs: Vec<f64> = rows.iter().map(|r| r.ml_probability).collect();

    let ml_cm = confusion(&ml_pred, &truth)?;
    let taf_cm = confusion(&taf_pred, &truth)?;
    // Fairness invariant: identical row sets by construction.
    assert_eq!(ml_cm.total(), taf_cm.total());

    let report = VerificationReport {
        station: series.station.clone(),
        horizon_h: horizon.hours() as u32,
        window_start: window_start.unwrap(),
        window_end: window_end.unwrap(),
        n_evaluated: rows.len() as u64,
        n_excluded,
        ml: AgentScore::from_confusion(ml_cm, auc(&probs, &truth).ok()),
        taf: AgentScore::from_confusion(taf_cm, None),
    };
    Ok((report, rows))
}

/// Feature groups for ablation, following the lags / thermodynamic /
/// kinematic partition of the feature stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureGroup {
    /// current_visibility plus the 1/3/6-hour visibility lags.
    Lags,
    /// dew_point_depression, cooling_rate, relative_humidity.
    Thermodynamic,
    /// wind_sin, wind_cos, wind_speed.
    Kinematic,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] =
        [FeatureGroup::Lags, FeatureGroup::Thermodynamic, FeatureGroup::Kinematic];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Lags => "lags",
            FeatureGroup::Thermodynamic => "thermodynamic",
            FeatureGroup::Kinematic => "kinematic",
        }
    }

    pub fn feature_indices(self) -> &'static [usize] {
        // Indices into FEATURE_NAMES order.
        match self {
            FeatureGroup::Lags => &[4, 8, 9, 10],
            FeatureGroup::Thermodynamic => &[0, 3, 1],
            FeatureGroup::Kinematic => &[6, 7, 5],
        }
    }
}

impl std::str::FromStr for FeatureGroup {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lags" => Ok(FeatureGroup::Lags),
            "thermodynamic" => Ok(FeatureGroup::Thermodynamic),
            "kinematic" => Ok(FeatureGroup::Kinematic),
            other => Err(BenchError::UnknownGroup(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub group: String,
    pub auc: Option<f64>,
    pub delta_auc: Option<f64>,
    pub recall: Option<f64>,
    pub delta_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub baseline_auc: Option<f64>,
    pub baseline_recall: Option<f64>,
    pub rows: Vec<AblationRow>,
}

/// Retrain with each group's columns forced missing and report the change in
/// test AUC and recall against the full model, same split and config.
pub fn run_ablation(
    series: &HourlySeries,
    lat: f64,
    lon: f64,
    horizon: Horizon,
    groups: &[FeatureGroup],
    train_fraction: f64,
    config: &TrainConfig,
) -> Result<AblationReport, BenchError> {
    let examples = build_matrix(series, lat, lon, horizon)?;
    let (train_ex, test_ex) = temporal_split(examples, train_fraction)?;
    let train_full = Dataset::from_examples(&train_ex);
    let test_full = Dataset::from_examples(&test_ex);

    let mut config = config.clone();
    config.scale_pos_weight = compute_scale_pos_weight(&train_full.labels)?;

    let evaluate = |train_ds: &Dataset, test_ds: &Dataset| -> Result<(Option<f64>, Option<f64>), BenchError> {
        let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        let trained = train(train_ds, test_ds, &config, &names, ModelMetadata::default())?;
        let probs: Vec<f64> = (0..test_ds.n_rows())
            .map(|i| trained.model.predict_proba(test_ds.row(i)))
            .collect::<Result<_, _>>()?;
        let auc_v = auc(&probs, &test_ds.labels).ok();
        let pred: Vec<u8> = probs.iter().map(|&p| classify(p, 0.5)).collect();
        let recall = confusion(&pred, &test_ds.labels)
            .ok()
            .and_then(|cm| metrics(&cm).ok())
            .map(|m| m.recall);
        Ok((auc_v, recall))
    };

    let (baseline_auc, baseline_recall) = evaluate(&train_full, &test_full)?;
    let mut rows = Vec::new();
    for g in groups {
        let masked_train = train_full.with_features_masked(g.feature_indices());
        let masked_test = test_full.with_features_masked(g.feature_indices());
        let (a, r) = evaluate(&masked_train, &masked_test)?;
        rows.push(AblationRow {
            group: g.name().to_string(),
            auc: a,
            delta_auc: a.zip(baseline_auc).map(|(x, b)| x - b),
            recall: r,
            delta_recall: r.zip(baseline_recall).map(|(x, b)| x - b),
        });
    }
    Ok(AblationReport { baseline_auc, baseline_recall, rows })
}
