//! Physics-guided feature engineering: the Clean-14 feature stack, labels
//! and chronological train/test splits.
//!
//! Each grid hour yields a missing-aware feature vector of twelve variables:
//! five thermodynamic (dew point depression, relative humidity, surface
//! pressure, 3-hour cooling rate, current visibility), three kinematic
//! (wind speed and the unit-circle direction encoding), three visibility
//! lags (1/3/6 h) and the day/night flag. Missing inputs propagate as
//! missing features; the model handles them natively, so no imputation
//! happens here.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obs::{FillFlag, HourlySeries};
use crate::solar;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty series")]
    EmptySeries,
    #[error("too few examples for a split: {0} (need at least 100)")]
    TooFewExamples(usize),
    #[error("train fraction must be in (0, 1), got {0}")]
    BadTrainFraction(f64),
}

/// Forecast horizon in hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Horizon {
    H2,
    H3,
    H6,
}

impl Horizon {
    pub const ALL: [Horizon; 3] = [Horizon::H2, Horizon::H3, Horizon::H6];

    pub fn hours(self) -> i64 {
        match self {
            Horizon::H2 => 2,
            Horizon::H3 => 3,
            Horizon::H6 => 6,
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2" => Ok(Horizon::H2),
            "3" => Ok(Horizon::H3),
            "6" => Ok(Horizon::H6),
            other => Err(format!("horizon must be 2, 3 or 6, got {other:?}")),
        }
    }
}

impl std::fmt::Display for Horizon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.hours())
    }
}

/// Canonical feature order. Serialized models carry these names, so the
/// order is part of the model format.
pub const FEATURE_NAMES: [&str; 12] = [
    "dew_point_depression",
    "relative_humidity",
    "surface_pressure",
    "cooling_rate",
    "current_visibility",
    "wind_speed",
    "wind_sin",
    "wind_cos",
    "visibility_lag_1h",
    "visibility_lag_3h",
    "visibility_lag_6h",
    "is_night",
];

pub const N_FEATURES: usize = FEATURE_NAMES.len();

/// One missing-aware feature vector in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector {
    pub dew_point_depression: Option<f64>,
    pub relative_humidity: Option<f64>,
    pub surface_pressure: Option<f64>,
    pub cooling_rate: Option<f64>,
    pub current_visibility: Option<f64>,
    pub wind_speed: Option<f64>,
    pub wind_sin: Option<f64>,
    pub wind_cos: Option<f64>,
    pub visibility_lag_1h: Option<f64>,
    pub visibility_lag_3h: Option<f64>,
    pub visibility_lag_6h: Option<f64>,
    pub is_night: Option<f64>,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn as_array(&self) -> [Option<f64>; N_FEATURES] {
        [
            self.dew_point_depression,
            self.relative_humidity,
            self.surface_pressure,
            self.cooling_rate,
            self.current_visibility,
            self.wind_speed,
            self.wind_sin,
            self.wind_cos,
            self.visibility_lag_1h,
            self.visibility_lag_3h,
            self.visibility_lag_6h,
            self.is_night,
        ]
    }

    /// Dense row for the model: missing encodes as NaN.
    pub fn to_row(&self) -> [f64; N_FEATURES] {
        self.as_array().map(|v| v.unwrap_or(f64::NAN))
    }

    pub fn from_array(values: [Option<f64>; N_FEATURES]) -> Self {
        let [dpd, rh, sp, cr, cv, ws, wsin, wcos, l1, l3, l6, night] = values;
        FeatureVector {
            dew_point_depression: dpd,
            relative_humidity: rh,
            surface_pressure: sp,
            cooling_rate: cr,
            current_visibility: cv,
            wind_speed: ws,
            wind_sin: wsin,
            wind_cos: wcos,
            visibility_lag_1h: l1,
            visibility_lag_3h: l3,
            visibility_lag_6h: l6,
            is_night: night,
        }
    }
}

/// One training/evaluation example: features at `t`, label at `t + horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub t: DateTime<Utc>,
    pub features: FeatureVector,
    /// 1 iff observed visibility at `t + horizon` is below 3 SM.
    pub label: u8,
    pub horizon: Horizon,
}

/// Magnus saturation constants (degrees Celsius domain).
const MAGNUS_A: f64 = 17.625;
const MAGNUS_B: f64 = 243.04;

/// Dew point beyond this far above temperature is a sensor fault; both
/// thermodynamic features go missing.
const DEW_EXCESS_TOLERANCE_C: f64 = 0.5;

/// Mild supersaturation cap on the derived relative humidity, percent.
const RH_CAP_PCT: f64 = 100.5;

/// Relative humidity from the August-Roche-Magnus approximation, percent.
///
/// Missing inputs, or a dew point more than 0.5 degC above the temperature,
/// yield a missing feature. Values from dew points within the tolerance are
/// capped at 100.5%.
pub fn relative_humidity(temp_c: Option<f64>, dewpoint_c: Option<f64>) -> Option<f64> {
    let t = temp_c?;
    let td = dewpoint_c?;
    if td - t > DEW_EXCESS_TOLERANCE_C {
        return None;
    }
    let rh = 100.0 * (MAGNUS_A * td / (MAGNUS_B + td) - MAGNUS_A * t / (MAGNUS_B + t)).exp();
    Some(rh.min(RH_CAP_PCT))
}

/// Dew point depression T - Td, subject to the same sensor tolerance.
pub fn dew_point_depression(temp_c: Option<f64>, dewpoint_c: Option<f64>) -> Option<f64> {
    let t = temp_c?;
    let td = dewpoint_c?;
    if td - t > DEW_EXCESS_TOLERANCE_C {
        return None;
    }
    Some(t - td)
}

/// Unit-circle encoding of wind direction, continuous across north.
pub fn wind_components(dir_deg: Option<f64>) -> (Option<f64>, Option<f64>) {
    match dir_deg {
        Some(d) => {
            let r = d.to_radians();
            (Some(r.sin()), Some(r.cos()))
        }
        None => (None, None),
    }
}

/// Instantaneous features of one grid row (everything except cooling rate
/// and the visibility lags, which need the series).
pub fn derive_instant_features(
    row: &crate::obs::HourlyRow,
    lat: f64,
    lon: f64,
    t: DateTime<Utc>,
) -> FeatureVector {
    let (wind_sin, wind_cos) = wind_components(row.wind_dir_deg);
    FeatureVector {
        dew_point_depression: dew_point_depression(row.temp_c, row.dewpoint_c),
        relative_humidity: relative_humidity(row.temp_c, row.dewpoint_c),
        surface_pressure: row.pressure_hpa,
        cooling_rate: None,
        current_visibility: row.visibility_sm,
        wind_speed: row.wind_speed_kt,
        wind_sin,
        wind_cos,
        visibility_lag_1h: None,
        visibility_lag_3h: None,
        visibility_lag_6h: None,
        is_night: Some(f64::from(solar::is_night(lat, lon, t))),
    }
}

/// T(t) - T(t-3h) in degrees Celsius; negative when cooling. Missing when
/// either endpoint lacks an observed temperature.
pub fn cooling_rate(series: &HourlySeries, idx: usize) -> Option<f64> {
    if idx < 3 || idx >= series.rows.len() {
        return None;
    }
    let now = &series.rows[idx];
    let past = &series.rows[idx - 3];
    if now.flags.temp != FillFlag::Observed || past.flags.temp != FillFlag::Observed {
        return None;
    }
    Some(now.temp_c? - past.temp_c?)
}

/// IFR visibility threshold in statute miles.
pub const IFR_THRESHOLD_SM: f64 = 3.0;

/// Build the labeled feature matrix for one horizon.
///
/// A grid hour `t` yields an example iff the current observation has a
/// temperature and the hour `t + horizon` has an *observed* (never filled)
/// visibility. Lags read grid hours `t-1`, `t-3`, `t-6` and go missing when
/// those hours are absent.
pub fn build_matrix(
    series: &HourlySeries,
    lat: f64,
    lon: f64,
    horizon: Horizon,
) -> Result<Vec<LabeledExample>, FeatureError> {
    if series.rows.is_empty() {
        return Err(FeatureError::EmptySeries);
    }
    let h = horizon.hours() as usize;
    let mut out = Vec::new();
    for idx in 0..series.rows.len() {
        let row = &series.rows[idx];
        if row.flags.temp != FillFlag::Observed {
            continue;
        }
        let Some(label_row) = series.rows.get(idx + h) else { continue };
        if label_row.flags.visibility != FillFlag::Observed {
            continue;
        }
        let Some(label_vis) = label_row.visibility_sm else { continue };

        let t = series.hour(idx);
        let mut fv = derive_instant_features(row, lat, lon, t);
        fv.cooling_rate = cooling_rate(series, idx);
        let lag = |back: usize| -> Option<f64> {
            idx.checked_sub(back).and_then(|j| series.rows[j].visibility_sm)
        };
        fv.visibility_lag_1h = lag(1);
        fv.visibility_lag_3h = lag(3);
        fv.visibility_lag_6h = lag(6);

        out.push(LabeledExample {
            t,
            features: fv,
            label: u8::from(label_vis < IFR_THRESHOLD_SM),
            horizon,
        });
    }
    Ok(out)
}

/// Chronological split: the first `floor(n * train_fraction)` examples train,
/// the remainder test. Input order does not matter; examples are sorted by
/// time internally, so identical inputs give identical splits.
pub fn temporal_split(
    mut examples: Vec<LabeledExample>,
    train_fraction: f64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>), FeatureError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FeatureError::BadTrainFraction(train_fraction));
    }
    if examples.len() < 100 {
        return Err(FeatureError::TooFewExamples(examples.len()));
    }
    examples.sort_by_key(|e| e.t);
    let n_train = (examples.len() as f64 * train_fraction).floor() as usize;
    let test = examples.split_off(n_train);
    Ok((examples, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metar::Observation;
    use crate::obs::{downsample_hourly, forward_fill};
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    fn utc(d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 6, d, h, 0, 0).unwrap()
    }

    #[test]
    fn saturation_is_exactly_100() {
        assert!((relative_humidity(Some(8.0), Some(8.0)).unwrap() - 100.0).abs() < 1e-9);
        assert!((relative_humidity(Some(0.0), Some(0.0)).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn magnus_reference_point() {
        // Direct evaluation of the Magnus expression at T=20, Td=10.
        let rh = relative_humidity(Some(20.0), Some(10.0)).unwrap();
        assert!((rh - 52.5).abs() < 0.05, "got {rh}");
    }

    #[test]
    fn sensor_tolerance_behavior() {
        // Td slightly above T is kept (capped), far above goes missing.
        let rh = relative_humidity(Some(10.0), Some(10.3)).unwrap();
        assert!(rh <= 100.5 && rh > 100.0, "got {rh}");
        assert_eq!(relative_humidity(Some(10.0), Some(11.0)), None);
        let dpd = dew_point_depression(Some(10.0), Some(10.3)).unwrap();
        assert!((dpd - (-0.3)).abs() < 1e-12);
        assert_eq!(dew_point_depression(Some(10.0), Some(11.0)), None);
        assert_eq!(relative_humidity(None, Some(5.0)), None);
    }

    #[test]
    fn wind_encoding_unit_circle() {
        let (s, c) = wind_components(Some(90.0));
        assert!((s.unwrap() - 1.0).abs() < 1e-12);
        assert!(c.unwrap().abs() < 1e-12);
        let (s, c) = wind_components(None);
        assert!(s.is_none() && c.is_none());
    }

    proptest! {
        #[test]
        fn wind_encoding_is_normalized(dir in 0.0_f64..360.0) {
            let (s, c) = wind_components(Some(dir));
            let norm = s.unwrap().powi(2) + c.unwrap().powi(2);
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rh_monotonicity(t in -20.0_f64..40.0, d1 in 0.1_f64..10.0, d2 in 0.1_f64..10.0) {
            // At fixed T, RH increases in Td; at fixed Td, decreases in T.
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assume!(hi - lo > 1e-6);
            let rh_wet = relative_humidity(Some(t), Some(t - lo)).unwrap();
            let rh_dry = relative_humidity(Some(t), Some(t - hi)).unwrap();
            prop_assert!(rh_wet > rh_dry);
            let td = t - hi;
            let rh_cold = relative_humidity(Some(t - lo), Some(td)).unwrap();
            let rh_warm = relative_humidity(Some(t), Some(td)).unwrap();
            prop_assert!(rh_cold > rh_warm);
        }

        #[test]
        fn angular_continuity_at_north(eps in 1e-9_f64..1e-3) {
            let (s_hi, c_hi) = wind_components(Some(360.0 - eps));
            let (s0, c0) = wind_components(Some(0.0));
            prop_assert!((s_hi.unwrap() - s0.unwrap()).abs() < 1e-2);
            prop_assert!((c_hi.unwrap() - c0.unwrap()).abs() < 1e-2);
        }
    }

    fn obs_at(t: DateTime<Utc>, temp: f64, vis: f64) -> Observation {
        Observation {
            station: "KTST".into(),
            time: t,
            wind_dir_deg: Some(270.0),
            wind_speed_kt: Some(6.0),
            visibility_sm: Some(vis),
            temp_c: Some(temp),
            dewpoint_c: Some(temp - 2.0),
            pressure_hpa: Some(1014.0),
            wx_codes: vec![],
            raw: String::new(),
        }
    }

    fn series_hours(n: usize) -> HourlySeries {
        let reports: Vec<Observation> = (0..n)
            .map(|i| obs_at(utc(1, 0) + Duration::hours(i as i64), 10.0 + (i % 5) as f64, 8.0))
            .collect();
        downsample_hourly(&reports).unwrap()
    }

    #[test]
    fn cooling_rate_sign_and_missing() {
        let mut s = series_hours(8);
        s.rows[3].temp_c = Some(10.0);
        s.rows[0].temp_c = Some(14.0);
        assert_eq!(cooling_rate(&s, 3), Some(-4.0));
        assert_eq!(cooling_rate(&s, 2), None); // no t-3 in grid
        s.rows[1].temp_c = None;
        s.rows[1].flags.temp = FillFlag::Missing;
        assert_eq!(cooling_rate(&s, 4), None);
        s.rows[5].temp_c = s.rows[2].temp_c;
        assert_eq!(cooling_rate(&s, 5), Some(0.0));
    }

    #[test]
    fn labels_use_strict_threshold() {
        let mut s = series_hours(10);
        s.rows[5].visibility_sm = Some(2.5);
        s.rows[6].visibility_sm = Some(3.0);
        let m = build_matrix(&s, 40.0, -70.0, Horizon::H2).unwrap();
        let at = |d: u32, h: u32| m.iter().find(|e| e.t == utc(d, h)).unwrap();
        assert_eq!(at(1, 3).label, 1); // label hour 5: 2.5 SM
        assert_eq!(at(1, 4).label, 0); // label hour 6: exactly 3 SM
    }

    #[test]
    fn rows_without_observed_label_visibility_are_excluded() {
        let mut s = series_hours(10);
        // Hour 7 visibility becomes filled, not observed: no example at t=5 (h=2).
        s.rows[7].flags.visibility = FillFlag::Filled;
        let m = build_matrix(&s, 40.0, -70.0, Horizon::H2).unwrap();
        assert!(m.iter().all(|e| e.t != utc(1, 5)));
        // Missing visibility excludes too.
        let mut s = series_hours(10);
        s.rows[7].visibility_sm = None;
        s.rows[7].flags.visibility = FillFlag::Missing;
        let m = build_matrix(&s, 40.0, -70.0, Horizon::H2).unwrap();
        assert!(m.iter().all(|e| e.t != utc(1, 5)));
    }

    #[test]
    fn lags_read_the_calendar_grid() {
        let mut s = series_hours(12);
        for (i, row) in s.rows.iter_mut().enumerate() {
            row.visibility_sm = Some(i as f64);
        }
        let m = build_matrix(&s, 40.0, -70.0, Horizon::H2).unwrap();
        let e = m.iter().find(|e| e.t == utc(1, 7)).unwrap();
        assert_eq!(e.features.current_visibility, Some(7.0));
        assert_eq!(e.features.visibility_lag_1h, Some(6.0));
        assert_eq!(e.features.visibility_lag_3h, Some(4.0));
        assert_eq!(e.features.visibility_lag_6h, Some(1.0));
        // Early hours lack deep lags.
        let e = m.iter().find(|e| e.t == utc(1, 2)).unwrap();
        assert_eq!(e.features.visibility_lag_6h, None);
    }

    #[test]
    fn lag_consistency_with_current() {
        let s = {
            let mut s = series_hours(24);
            for (i, row) in s.rows.iter_mut().enumerate() {
                row.visibility_sm = Some((i % 7) as f64 + 0.5);
            }
            forward_fill(&s, 0)
        };
        let m = build_matrix(&s, 40.0, -70.0, Horizon::H2).unwrap();
        for e in &m {
            if let Some(prev) = m.iter().find(|p| p.t == e.t - Duration::hours(1)) {
                if let (Some(lag), Some(cur)) =
                    (e.features.visibility_lag_1h, prev.features.current_visibility)
                {
                    assert_eq!(lag, cur, "lag mismatch at {}", e.t);
                }
            }
        }
    }

    #[test]
    fn calm_wind_keeps_speed_drops_direction() {
        let mut s = series_hours(10);
        s.rows[6].wind_dir_deg = None;
        s.rows[6].wind_speed_kt = Some(0.0);
        let m = build_matrix(&s, 40.0, -70.0, Horizon::H2).unwrap();
        let e = m.iter().find(|e| e.t == utc(1, 6)).unwrap();
        assert_eq!(e.features.wind_speed, Some(0.0));
        assert_eq!(e.features.wind_sin, None);
        assert_eq!(e.features.wind_cos, None);
    }

    fn examples(n: usize) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| LabeledExample {
                t: utc(1, 0) + Duration::hours(i as i64),
                features: FeatureVector::default(),
                label: (i % 11 == 0) as u8,
                horizon: Horizon::H2,
            })
            .collect()
    }

    #[test]
    fn split_index_arithmetic() {
        let (train, test) = temporal_split(examples(100), 0.8).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        assert!(train.last().unwrap().t < test.first().unwrap().t);
    }

    #[test]
    fn split_sorts_unsorted_input() {
        let mut ex = examples(120);
        ex.reverse();
        let (train_a, test_a) = temporal_split(ex, 0.8).unwrap();
        let (train_b, test_b) = temporal_split(examples(120), 0.8).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
    }

    #[test]
    fn split_rejects_small_sets() {
        assert!(matches!(
            temporal_split(examples(99), 0.8),
            Err(FeatureError::TooFewExamples(99))
        ));
        assert!(temporal_split(examples(100), 0.0).is_err());
        assert!(temporal_split(examples(100), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn no_leakage(n in 100_usize..400, frac in 0.05_f64..0.95, seed in 0_u64..1000) {
            // Randomly shuffled example times; every train label time must
            // strictly precede every test label time.
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut ex = examples(n);
            ex.shuffle(&mut rng);
            let (train, test) = temporal_split(ex, frac).unwrap();
            prop_assume!(!train.is_empty() && !test.is_empty());
            let h = Duration::hours(Horizon::H2.hours());
            let max_train_label = train.iter().map(|e| e.t + h).max().unwrap();
            let min_test_label = test.iter().map(|e| e.t + h).min().unwrap();
            prop_assert!(max_train_label < min_test_label);
        }
    }
}
