//! Quality control and temporal regularization of raw report streams.
//!
//! Raw METAR cadence runs from 1-minute ASOS output to hourly routine
//! reports. [`downsample_hourly`] reduces that to one row per UTC hour,
//! keeping only reports that carry a temperature, and [`forward_fill`]
//! carries the persistence-dominated fields (pressure, visibility) across
//! short gaps. Hours with no qualifying report stay in the grid as missing
//! rows so lag indexing stays calendar-true.

use std::fmt;
use std::path::Path;

use chrono::{DateTime, Duration, DurationRound, Utc};
use thiserror::Error;

use crate::metar::Observation;

#[derive(Debug, Error)]
pub enum ObsError {
    #[error("reports span more than one station: {0} and {1}")]
    MixedStations(String, String),
    #[error("no qualifying reports to grid")]
    EmptyInput,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad hourly csv row {row}: {msg}")]
    BadRow { row: usize, msg: String },
}

/// Provenance of one field value in an hourly row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillFlag {
    Observed,
    Filled,
    #[default]
    Missing,
}

impl FillFlag {
    fn code(self) -> char {
        match self {
            FillFlag::Observed => 'o',
            FillFlag::Filled => 'f',
            FillFlag::Missing => '-',
        }
    }

    fn from_code(c: char) -> Option<Self> {
        match c {
            'o' => Some(FillFlag::Observed),
            'f' => Some(FillFlag::Filled),
            '-' => Some(FillFlag::Missing),
            _ => None,
        }
    }
}

/// Per-field provenance flags, serialized as a 6-character string in field
/// order: temp, dewpoint, wind_dir, wind_speed, visibility, pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FieldFlags {
    pub temp: FillFlag,
    pub dewpoint: FillFlag,
    pub wind_dir: FillFlag,
    pub wind_speed: FillFlag,
    pub visibility: FillFlag,
    pub pressure: FillFlag,
}

impl fmt::Display for FieldFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for flag in [self.temp, self.dewpoint, self.wind_dir, self.wind_speed, self.visibility, self.pressure] {
            write!(f, "{}", flag.code())?;
        }
        Ok(())
    }
}

impl FieldFlags {
    fn parse(s: &str) -> Option<Self> {
        let mut it = s.chars();
        let mut next = || it.next().and_then(FillFlag::from_code);
        let flags = FieldFlags {
            temp: next()?,
            dewpoint: next()?,
            wind_dir: next()?,
            wind_speed: next()?,
            visibility: next()?,
            pressure: next()?,
        };
        it.next().is_none().then_some(flags)
    }
}

/// One grid hour. Values are `None` when missing; flags say whether a present
/// value was observed or forward-filled.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HourlyRow {
    pub temp_c: Option<f64>,
    pub dewpoint_c: Option<f64>,
    pub wind_dir_deg: Option<f64>,
    pub wind_speed_kt: Option<f64>,
    pub visibility_sm: Option<f64>,
    pub pressure_hpa: Option<f64>,
    pub wx_codes: Vec<String>,
    pub flags: FieldFlags,
}

/// A QC'd, hourly-gridded observation timeline for one station.
///
/// The grid is gapless: `rows[i]` is the hour `start + i`, and hours with no
/// qualifying report are present as all-missing rows.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub station: String,
    pub start: DateTime<Utc>,
    pub rows: Vec<HourlyRow>,
}

impl HourlySeries {
    pub fn hour(&self, idx: usize) -> DateTime<Utc> {
        self.start + Duration::hours(idx as i64)
    }

    pub fn index_of(&self, t: DateTime<Utc>) -> Option<usize> {
        let dt = t - self.start;
        if dt.num_minutes() < 0 || dt.num_minutes() % 60 != 0 {
            return None;
        }
        let idx = dt.num_hours() as usize;
        (idx < self.rows.len()).then_some(idx)
    }

    pub fn row_at(&self, t: DateTime<Utc>) -> Option<&HourlyRow> {
        self.index_of(t).map(|i| &self.rows[i])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reduce a raw report stream to one row per hour.
///
/// For each hour, the report nearest the top of the hour within +/-30 min
/// *that has a temperature* is selected (ties go to the earlier report).
/// Reports lacking temperature are filtered out entirely.
pub fn downsample_hourly(reports: &[Observation]) -> Result<HourlySeries, ObsError> {
    let mut station: Option<&str> = None;
    for r in reports {
        match station {
            None => station = Some(&r.station),
            Some(s) if s != r.station => {
                return Err(ObsError::MixedStations(s.to_string(), r.station.clone()))
            }
            _ => {}
        }
    }

    // (candidate hour, |offset|, time, report) for temperature-bearing reports.
    let mut candidates: Vec<(DateTime<Utc>, i64, DateTime<Utc>, &Observation)> = reports
        .iter()
        .filter(|r| r.temp_c.is_some())
        .map(|r| {
            let hour = nearest_hour(r.time);
            let offset = (r.time - hour).num_minutes().abs();
            (hour, offset, r.time, r)
        })
        .filter(|(_, offset, _, _)| *offset <= 30)
        .collect();
    if candidates.is_empty() {
        return Err(ObsError::EmptyInput);
    }
    candidates.sort_by_key(|(hour, offset, time, _)| (*hour, *offset, *time));

    let first = candidates.first().unwrap().0;
    let last = candidates.last().unwrap().0;
    let n = ((last - first).num_hours() + 1) as usize;
    let mut rows = vec![HourlyRow::default(); n];

    let mut seen: Option<DateTime<Utc>> = None;
    for (hour, _, _, report) in candidates {
        if seen == Some(hour) {
            continue; // a better-ranked report already filled this hour
        }
        seen = Some(hour);
        let idx = ((hour - first).num_hours()) as usize;
        rows[idx] = row_from_report(report);
    }

    Ok(HourlySeries { station: station.unwrap_or_default().to_string(), start: first, rows })
}

fn nearest_hour(t: DateTime<Utc>) -> DateTime<Utc> {
    // duration_round half-way rounds up, putting minute 30 on the next hour.
    t.duration_round(Duration::hours(1)).expect("in-range timestamp")
}

fn row_from_report(r: &Observation) -> HourlyRow {
    let of = |v: Option<f64>| if v.is_some() { FillFlag::Observed } else { FillFlag::Missing };
    HourlyRow {
        flags: FieldFlags {
            temp: of(r.temp_c),
            dewpoint: of(r.dewpoint_c),
            wind_dir: of(r.wind_dir_deg),
            wind_speed: of(r.wind_speed_kt),
            visibility: of(r.visibility_sm),
            pressure: of(r.pressure_hpa),
        },
        temp_c: r.temp_c,
        dewpoint_c: r.dewpoint_c,
        wind_dir_deg: r.wind_dir_deg,
        wind_speed_kt: r.wind_speed_kt,
        visibility_sm: r.visibility_sm,
        pressure_hpa: r.pressure_hpa,
        wx_codes: r.wx_codes.clone(),
    }
}

/// Carry pressure and visibility forward across gaps of up to `max_gap_h`
/// hours. Temperature, dew point and wind are never filled: they feed the
/// thermodynamic features and must stay honest. Idempotent.
pub fn forward_fill(series: &HourlySeries, max_gap_h: u32) -> HourlySeries {
    let mut out = series.clone();
    fill_field(
        &mut out,
        max_gap_h,
        |r| r.visibility_sm,
        |r, v| r.visibility_sm = v,
        |r| &mut r.flags.visibility,
    );
    fill_field(
        &mut out,
        max_gap_h,
        |r| r.pressure_hpa,
        |r, v| r.pressure_hpa = v,
        |r| &mut r.flags.pressure,
    );
    out
}

fn fill_field(
    series: &mut HourlySeries,
    max_gap_h: u32,
    get: impl Fn(&HourlyRow) -> Option<f64>,
    set: impl Fn(&mut HourlyRow, Option<f64>),
    flag: impl Fn(&mut HourlyRow) -> &mut FillFlag,
) {
    let mut origin: Option<(usize, f64)> = None;
    for i in 0..series.rows.len() {
        let row = &mut series.rows[i];
        let f = *flag(row);
        if f == FillFlag::Observed {
            origin = Some((i, get(row).expect("observed value present")));
            continue;
        }
        // Previously filled values are re-derived so the pass is idempotent.
        match origin {
            Some((at, v)) if i - at <= max_gap_h as usize && max_gap_h > 0 => {
                set(row, Some(v));
                *flag(row) = FillFlag::Filled;
            }
            _ => {
                set(row, None);
                *flag(row) = FillFlag::Missing;
            }
        }
    }
}

/// CSV schema for the interchange file, one row per grid hour:
/// `station,valid_utc,temp_c,dewpoint_c,wind_dir_deg,wind_speed_kt,visibility_sm,pressure_hpa,wx_codes,fill_flags`
pub const HOURLY_CSV_HEADER: [&str; 10] = [
    "station",
    "valid_utc",
    "temp_c",
    "dewpoint_c",
    "wind_dir_deg",
    "wind_speed_kt",
    "visibility_sm",
    "pressure_hpa",
    "wx_codes",
    "fill_flags",
];

pub fn write_hourly_csv(series: &HourlySeries, path: &Path) -> Result<(), ObsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HOURLY_CSV_HEADER)?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, row) in series.rows.iter().enumerate() {
        w.write_record([
            series.station.as_str(),
            &series.hour(i).format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            &num(row.temp_c),
            &num(row.dewpoint_c),
            &num(row.wind_dir_deg),
            &num(row.wind_speed_kt),
            &num(row.visibility_sm),
            &num(row.pressure_hpa),
            &row.wx_codes.join(";"),
            &row.flags.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_hourly_csv(path: &Path) -> Result<HourlySeries, ObsError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut station = String::new();
    let mut hours: Vec<(DateTime<Utc>, HourlyRow)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |msg: &str| ObsError::BadRow { row: i + 2, msg: msg.to_string() };
        if rec.len() != HOURLY_CSV_HEADER.len() {
            return Err(bad("wrong column count"));
        }
        if station.is_empty() {
            station = rec[0].to_string();
        } else if station != rec[0] {
            return Err(ObsError::MixedStations(station, rec[0].to_string()));
        }
        let t = DateTime::parse_from_rfc3339(&rec[1])
            .map_err(|e| bad(&format!("bad valid_utc: {e}")))?
            .with_timezone(&Utc);
        let num = |idx: usize| -> Result<Option<f64>, ObsError> {
            let s = rec[idx].trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|e| ObsError::BadRow {
                row: i + 2,
                msg: format!("bad {}: {e}", HOURLY_CSV_HEADER[idx]),
            })
        };
        let wx_codes: Vec<String> = if rec[8].is_empty() {
            Vec::new()
        } else {
            rec[8].split(';').map(str::to_string).collect()
        };
        let flags = FieldFlags::parse(&rec[9]).ok_or_else(|| bad("bad fill_flags"))?;
        hours.push((
            t,
            HourlyRow {
                temp_c: num(2)?,
                dewpoint_c: num(3)?,
                wind_dir_deg: num(4)?,
                wind_speed_kt: num(5)?,
                visibility_sm: num(6)?,
                pressure_hpa: num(7)?,
                wx_codes,
                flags,
            },
        ));
    }
    if hours.is_empty() {
        return Err(ObsError::EmptyInput);
    }
    let start = hours[0].0;
    for (i, (t, _)) in hours.iter().enumerate() {
        if *t != start + Duration::hours(i as i64) {
            return Err(ObsError::BadRow { row: i + 2, msg: "grid hour out of sequence".into() });
        }
    }
    Ok(HourlySeries { station, start, rows: hours.into_iter().map(|(_, r)| r).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn utc(d: u32, h: u32, mi: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 6, d, h, mi, 0).unwrap()
    }

    fn report(t: DateTime<Utc>, temp: Option<f64>, vis: Option<f64>, pres: Option<f64>) -> Observation {
        Observation {
            station: "KTST".into(),
            time: t,
            wind_dir_deg: Some(270.0),
            wind_speed_kt: Some(8.0),
            visibility_sm: vis,
            temp_c: temp,
            dewpoint_c: temp.map(|t| t - 2.0),
            pressure_hpa: pres,
            wx_codes: vec![],
            raw: String::new(),
        }
    }

    #[test]
    fn nearest_report_with_temperature_wins() {
        let reports = vec![
            report(utc(5, 12, 2), Some(10.0), Some(9.0), Some(1015.0)),
            report(utc(5, 12, 20), Some(11.0), Some(8.0), Some(1015.0)),
        ];
        let s = downsample_hourly(&reports).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.rows[0].temp_c, Some(10.0)); // +2 min beats +20 min
    }

    #[test]
    fn temperatureless_hours_are_missing() {
        let reports = vec![
            report(utc(5, 12, 0), Some(10.0), Some(9.0), None),
            report(utc(5, 13, 1), None, Some(5.0), Some(1013.0)),
            report(utc(5, 14, 0), Some(9.0), Some(9.0), None),
        ];
        let s = downsample_hourly(&reports).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.rows[1], HourlyRow::default());
        assert_eq!(s.rows[1].flags.temp, FillFlag::Missing);
    }

    #[test]
    fn closest_offset_wins_across_the_hour() {
        let reports = vec![
            report(utc(5, 11, 35), Some(10.0), None, None), // H-25
            report(utc(5, 12, 20), Some(11.0), None, None), // H+20
        ];
        let s = downsample_hourly(&reports).unwrap();
        assert_eq!(s.rows[0].temp_c, Some(11.0));
    }

    #[test]
    fn equal_offsets_prefer_earlier_report() {
        let reports = vec![
            report(utc(5, 11, 50), Some(10.0), None, None), // H-10
            report(utc(5, 12, 10), Some(11.0), None, None), // H+10
        ];
        let s = downsample_hourly(&reports).unwrap();
        assert_eq!(s.rows[0].temp_c, Some(10.0));
    }

    #[test]
    fn mixed_stations_rejected() {
        let mut other = report(utc(5, 12, 0), Some(9.0), None, None);
        other.station = "KOTH".into();
        let reports = vec![report(utc(5, 12, 2), Some(10.0), None, None), other];
        assert!(matches!(downsample_hourly(&reports), Err(ObsError::MixedStations(..))));
    }

    #[test]
    fn grid_is_gapless() {
        let reports = vec![
            report(utc(5, 12, 0), Some(10.0), None, None),
            report(utc(5, 17, 0), Some(12.0), None, None),
        ];
        let s = downsample_hourly(&reports).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.hour(5), utc(5, 17, 0));
    }

    fn gap_series() -> HourlySeries {
        let mut reports = vec![report(utc(5, 0, 0), Some(10.0), Some(6.0), Some(1012.0))];
        for h in 1..=5 {
            reports.push(report(utc(5, h, 0), Some(10.0), None, None));
        }
        downsample_hourly(&reports).unwrap()
    }

    #[test]
    fn fill_respects_gap_cap() {
        let filled = forward_fill(&gap_series(), 3);
        assert_eq!(filled.rows[2].pressure_hpa, Some(1012.0));
        assert_eq!(filled.rows[2].flags.pressure, FillFlag::Filled);
        assert_eq!(filled.rows[3].visibility_sm, Some(6.0));
        assert_eq!(filled.rows[4].pressure_hpa, None); // 4 h > cap
        assert_eq!(filled.rows[4].flags.pressure, FillFlag::Missing);
    }

    #[test]
    fn zero_gap_is_identity() {
        let s = gap_series();
        assert_eq!(forward_fill(&s, 0), s);
    }

    #[test]
    fn fill_is_idempotent() {
        let once = forward_fill(&gap_series(), 3);
        let twice = forward_fill(&once, 3);
        assert_eq!(once, twice);
    }

    #[test]
    fn temperature_is_never_filled() {
        let mut reports = vec![report(utc(5, 0, 0), Some(10.0), None, None)];
        reports.push(report(utc(5, 2, 0), Some(12.0), None, None));
        let s = downsample_hourly(&reports).unwrap();
        let filled = forward_fill(&s, 3);
        assert_eq!(filled.rows[1].temp_c, None);
    }

    #[test]
    fn hourly_csv_round_trip() {
        let filled = forward_fill(&gap_series(), 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hourly.csv");
        write_hourly_csv(&filled, &path).unwrap();
        let back = read_hourly_csv(&path).unwrap();
        assert_eq!(filled, back);
    }
}
