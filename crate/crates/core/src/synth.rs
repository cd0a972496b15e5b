//! Seeded synthetic station generator for offline evaluation.
//!
//! Emits raw METAR text with a known causal structure so the full pipeline
//! (parse, QC, features, training, attribution) can be verified end to end
//! without real archives:
//!
//! - A two-state humidity regime (dry/humid episodes) drives an integer dew
//!   point depression chain; saturation (DPD = 0) gives RH = 100%.
//! - Fog occurs exactly when RH > 95% AND it is night at the station, except
//!   that 2% of fog-condition hours fail to materialize (label noise).
//! - Fog hours report visibility below 3 SM (quarter-mile steps), humid
//!   daytime hours report 3-5 SM haze, everything else 6-10 SM, so labels
//!   derived from decoded visibility match the generating condition exactly.
//! - Temperature follows seasonal + diurnal cycles (evening cooling is
//!   visible in the 3-hour cooling rate); pressure wanders slowly; wind is a
//!   circular random walk with occasional calm and VRB groups.
//! - About 1% of hours skip their report entirely and a few fields go
//!   missing at random, exercising the gap and missing-value handling.
//!
//! Event prevalence lands near 8% of hours. Everything is a pure function of
//! the seed.

use chrono::{DateTime, Datelike, Duration, TimeZone, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::relative_humidity;
use crate::metar::{parse_metar, TimeAnchor};
use crate::obs::{downsample_hourly, forward_fill, HourlySeries};
use crate::solar;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub station: String,
    pub lat: f64,
    pub lon: f64,
    pub start: DateTime<Utc>,
    pub hours: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            station: "TEST".into(),
            lat: 45.0,
            lon: 0.0,
            start: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            hours: 30_000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthStats {
    pub reports_emitted: usize,
    pub fog_hours: usize,
    pub suppressed_fog_hours: usize,
    pub total_hours: usize,
}

impl SynthStats {
    /// Fraction of hours with materialized fog (the label prevalence before
    /// row exclusions).
    pub fn prevalence(&self) -> f64 {
        self.fog_hours as f64 / self.total_hours as f64
    }
}

/// RH above this, at night, produces fog (modulo the failure noise).
pub const FOG_RH_THRESHOLD: f64 = 95.0;
/// Fraction of fog-condition hours that fail to materialize: the label noise.
pub const FOG_FAILURE_RATE: f64 = 0.02;

const P_DRY_TO_HUMID: f64 = 0.034;
const P_HUMID_TO_DRY: f64 = 0.042;
/// Humid-regime DPD chain: P(stay saturated), P(recover to saturated).
const P_SAT_STAY: f64 = 0.8;
const P_SAT_ENTER: f64 = 0.2;

/// Generate raw METAR report lines plus ground-truth bookkeeping.
pub fn generate(cfg: &SynthConfig) -> (Vec<String>, SynthStats) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stats = SynthStats { total_hours: cfg.hours, ..SynthStats::default() };
    let mut reports = Vec::with_capacity(cfg.hours);

    let mut humid = rng.gen_bool(0.45);
    // Integer DPD level inside the humid regime: 0 = saturated.
    let mut humid_dpd: i64 = 1;
    let mut dry_dpd: i64 = 6;
    let mut synoptic_t = 0.0f64; // slow temperature anomaly
    let mut pressure = 1013.0f64;
    let mut wind_dir: f64 = rng.gen_range(0.0..360.0);

    for i in 0..cfg.hours {
        let t = cfg.start + Duration::hours(i as i64);

        // Regime and moisture evolution.
        if humid {
            if rng.gen_bool(P_HUMID_TO_DRY) {
                humid = false;
            }
        } else if rng.gen_bool(P_DRY_TO_HUMID) {
            humid = true;
        }
        humid_dpd = if humid_dpd == 0 {
            if rng.gen_bool(P_SAT_STAY) { 0 } else { 1 }
        } else if rng.gen_bool(P_SAT_ENTER) {
            (humid_dpd - 1).max(0)
        } else {
            (humid_dpd + i64::from(rng.gen_bool(0.3))).min(2)
        };
        dry_dpd = (dry_dpd + rng.gen_range(-1..=1)).clamp(3, 12);

        // Temperature: seasonal + diurnal (peaks 15:00 local = UTC at lon 0)
        // + slow anomaly. Integer degrees, METAR style.
        synoptic_t = 0.98 * synoptic_t + rng.gen_range(-0.35..0.35);
        let doy = t.ordinal() as f64;
        let hour = t.hour() as f64;
        let seasonal = 6.0 * ((doy - 110.0) / 365.0 * std::f64::consts::TAU).sin();
        let diurnal = 5.0 * ((hour - 9.0) / 24.0 * std::f64::consts::TAU).sin();
        let temp = (12.0 + seasonal + diurnal + synoptic_t).round();
        let dpd = if humid { humid_dpd } else { dry_dpd };
        let dewpoint = temp - dpd as f64;

        pressure = 0.995 * pressure + 0.005 * 1013.0 + rng.gen_range(-0.6..0.6);
        let pressure_q = pressure.round().clamp(960.0, 1050.0);

        wind_dir = (wind_dir + rng.gen_range(-25.0..25.0)).rem_euclid(360.0);
        let wind_speed: i64 = (rng.gen_range(-2.0..14.0) as i64).clamp(0, 30);

        // The causal rule, evaluated on the decodable integer temperatures.
        let rh = relative_humidity(Some(temp), Some(dewpoint)).expect("synth inputs valid");
        let night = solar::is_night(cfg.lat, cfg.lon, t) == 1;
        let fog_condition = rh > FOG_RH_THRESHOLD && night;
        let suppressed = fog_condition && rng.gen_bool(FOG_FAILURE_RATE);
        let fog = fog_condition && !suppressed;
        if fog {
            stats.fog_hours += 1;
        }
        if suppressed {
            stats.suppressed_fog_hours += 1;
        }

        let vis_token = if fog {
            const LADDER: [&str; 9] = [
                "1/4SM", "1/2SM", "3/4SM", "1SM", "1 1/4SM", "1 1/2SM", "2SM", "2 1/2SM",
                "2 3/4SM",
            ];
            LADDER[rng.gen_range(0..LADDER.len())].to_string()
        } else if humid && !night && dpd <= 2 {
            format!("{}SM", rng.gen_range(3..=5)) // daytime haze, never below 3
        } else {
            format!("{}SM", rng.gen_range(6..=10))
        };

        // ~1% of hours lose their report entirely.
        if rng.gen_bool(0.01) {
            continue;
        }

        let minute = rng.gen_range(0..9) as u32;
        let wind_token = if wind_speed == 0 {
            "00000KT".to_string()
        } else if rng.gen_bool(0.02) {
            format!("VRB{:02}KT", wind_speed.min(6))
        } else {
            let dir10 = {
                let d = ((wind_dir / 10.0).round() * 10.0) as i64 % 360;
                if d == 0 { 360 } else { d }
            };
            format!("{dir10:03}{wind_speed:02}KT")
        };

        let wx_token = if fog && vis_token.contains("1/4") {
            " FG"
        } else if fog {
            " BR"
        } else if humid && !night && dpd <= 2 {
            " HZ"
        } else {
            ""
        };

        let fmt_temp = |v: f64| {
            if v < 0.0 { format!("M{:02}", -v as i64) } else { format!("{:02}", v as i64) }
        };
        let temp_group = if rng.gen_bool(0.02) {
            format!("{}/", fmt_temp(temp)) // dewpoint drop-out
        } else {
            format!("{}/{}", fmt_temp(temp), fmt_temp(dewpoint))
        };
        let pressure_group = if rng.gen_bool(0.05) {
            String::new() // pressure drop-out
        } else {
            format!(" Q{:04}", pressure_q as i64)
        };

        reports.push(format!(
            "{} {:02}{:02}{:02}Z {} {}{} {}{}",
            cfg.station,
            t.day(),
            t.hour(),
            minute,
            wind_token,
            vis_token,
            wx_token,
            temp_group,
            pressure_group,
        ));
        stats.reports_emitted += 1;
    }
    (reports, stats)
}

/// Generate and run the real decoding pipeline: parse every report,
/// downsample to the hourly grid and forward-fill with the given gap cap.
pub fn generate_series(cfg: &SynthConfig, max_fill_gap_h: u32) -> (HourlySeries, SynthStats) {
    let (reports, stats) = generate(cfg);
    let mut anchor_time = cfg.start;
    let mut observations = Vec::with_capacity(reports.len());
    let mut last_day = cfg.start.day();
    for raw in &reports {
        // Reports are chronological; advance the month anchor on day rollover.
        let day: u32 = raw.split_whitespace().nth(1).unwrap()[..2].parse().unwrap();
        if day < last_day {
            let (y, m) = (anchor_time.year(), anchor_time.month());
            anchor_time = if m == 12 {
                Utc.with_ymd_and_hms(y + 1, 1, 1, 0, 0, 0).unwrap()
            } else {
                Utc.with_ymd_and_hms(y, m + 1, 1, 0, 0, 0).unwrap()
            };
        }
        last_day = day;
        let anchor = TimeAnchor::new(anchor_time.year(), anchor_time.month());
        observations.push(parse_metar(raw, anchor).expect("synthetic reports decode").obs);
    }
    let series = downsample_hourly(&observations).expect("non-empty synthetic series");
    (forward_fill(&series, max_fill_gap_h), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_matrix, Horizon};

    #[test]
    fn prevalence_is_near_eight_percent() {
        let cfg = SynthConfig { hours: 8000, ..SynthConfig::default() };
        let (_, stats) = generate(&cfg);
        let p = stats.prevalence();
        assert!((0.05..=0.11).contains(&p), "prevalence {p}");
        assert!(stats.suppressed_fog_hours > 0, "noise should fire on 8k hours");
    }

    #[test]
    fn reports_decode_and_grid() {
        let cfg = SynthConfig { hours: 2000, ..SynthConfig::default() };
        let (series, stats) = generate_series(&cfg, 3);
        assert!(series.len() >= stats.reports_emitted,
            "grid covers at least the reported hours");
        let matrix = build_matrix(&series, cfg.lat, cfg.lon, Horizon::H2).unwrap();
        assert!(matrix.len() > 1500);
        let pos = matrix.iter().filter(|e| e.label == 1).count();
        let prev = pos as f64 / matrix.len() as f64;
        assert!((0.04..=0.12).contains(&prev), "label prevalence {prev}");
        // The causal features are actually present.
        let with_rh = matrix.iter().filter(|e| e.features.relative_humidity.is_some()).count();
        assert!(with_rh as f64 / matrix.len() as f64 > 0.95);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig { hours: 500, ..SynthConfig::default() };
        let (a, _) = generate(&cfg);
        let (b, _) = generate(&cfg);
        assert_eq!(a, b);
        let (c, _) = generate(&SynthConfig { seed: 43, hours: 500, ..SynthConfig::default() });
        assert_ne!(a, c);
    }

    #[test]
    fn fog_hours_match_the_documented_condition() {
        let cfg = SynthConfig { hours: 4000, ..SynthConfig::default() };
        let (series, _) = generate_series(&cfg, 0);
        // Wherever visibility was observed below 3 SM, the decoded RH must
        // exceed the threshold and it must be night (noise only removes fog).
        let mut fog_rows = 0;
        for (i, row) in series.rows.iter().enumerate() {
            if let (Some(vis), Some(t), Some(td)) = (row.visibility_sm, row.temp_c, row.dewpoint_c) {
                if vis < 3.0 {
                    fog_rows += 1;
                    let rh = relative_humidity(Some(t), Some(td)).unwrap();
                    assert!(rh > FOG_RH_THRESHOLD, "fog row {i} with RH {rh}");
                    assert_eq!(solar::is_night(cfg.lat, cfg.lon, series.hour(i)), 1);
                }
            }
        }
        assert!(fog_rows > 100, "expected plenty of fog rows, got {fog_rows}");
    }
}
