//! METAR surface report decoder.
//!
//! Decodes raw report text into an [`Observation`] with normalized units:
//! visibility in statute miles, pressure in hectopascals, temperatures in
//! degrees Celsius, wind in degrees true / knots. Only station and time are
//! mandatory; every other group that fails to decode becomes a missing field
//! plus a diagnostic, never a parse failure.

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{HPA_PER_INHG, METERS_PER_STATUTE_MILE, UNLIMITED_VISIBILITY_SM};

/// One decoded surface report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// 4-character ICAO identifier.
    pub station: String,
    /// Report time, minute precision, UTC.
    pub time: DateTime<Utc>,
    /// Wind direction in degrees true, `[0, 360)`. Missing for calm or VRB.
    pub wind_dir_deg: Option<f64>,
    /// Wind speed in knots.
    pub wind_speed_kt: Option<f64>,
    /// Prevailing visibility in statute miles.
    pub visibility_sm: Option<f64>,
    /// Air temperature in degrees Celsius.
    pub temp_c: Option<f64>,
    /// Dew point in degrees Celsius.
    pub dewpoint_c: Option<f64>,
    /// Sea-level / altimeter pressure in hPa, plausibility-gated to [850, 1100].
    pub pressure_hpa: Option<f64>,
    /// Present-weather tokens as reported (e.g. `FG`, `BR`, `-RA`, `VCFG`).
    pub wx_codes: Vec<String>,
    /// Original report text, byte-identical, for audit.
    pub raw: String,
}

/// Parse result: the observation plus notes about skipped or odd groups.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub obs: Observation,
    /// Groups that were skipped (sky condition, RVR, remarks, unknown tokens).
    pub diagnostics: Vec<String>,
}

/// How a bare numeric visibility group is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionConvention {
    /// Bare 4-digit groups are meters (international form).
    Meters,
    /// Bare numbers are statute miles (for archives that strip the SM suffix).
    Statute,
}

#[derive(Debug, Error)]
pub enum MetarError {
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error("unparseable visibility group: {0:?}")]
    UnparseableVisibility(String),
}

/// Year/month context used to resolve the day-of-month in report time groups.
///
/// METAR time groups carry only day, hour and minute; archives supply the
/// month. A day token that does not fit the anchor month is resolved against
/// the previous month (reports filed just before a month boundary).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeAnchor {
    pub year: i32,
    pub month: u32,
}

impl TimeAnchor {
    pub fn new(year: i32, month: u32) -> Self {
        Self { year, month }
    }

    pub fn from_date(d: NaiveDate) -> Self {
        Self { year: d.year(), month: d.month() }
    }

    fn resolve(&self, day: u32, hour: u32, minute: u32) -> Option<DateTime<Utc>> {
        if let Some(date) = NaiveDate::from_ymd_opt(self.year, self.month, day) {
            return Utc
                .from_utc_datetime(&date.and_hms_opt(hour, minute, 0)?)
                .into();
        }
        // Day does not exist in the anchor month: try the month before.
        let (py, pm) = if self.month == 1 { (self.year - 1, 12) } else { (self.year, self.month - 1) };
        let date = NaiveDate::from_ymd_opt(py, pm, day)?;
        Utc.from_utc_datetime(&date.and_hms_opt(hour, minute, 0)?).into()
    }
}

/// Parse one METAR report. `METAR`/`SPECI` headers are tolerated.
///
/// Station and time groups are mandatory; everything else degrades to a
/// missing field with a note in [`Decoded::diagnostics`].
pub fn parse_metar(raw: &str, anchor: TimeAnchor) -> Result<Decoded, MetarError> {
    let tokens: Vec<&str> = raw.split_whitespace().collect();
    let mut idx = 0;

    // Skip report-type headers and correction flags.
    while idx < tokens.len() && matches!(tokens[idx], "METAR" | "SPECI" | "COR" | "AMD") {
        idx += 1;
    }

    let station = match tokens.get(idx) {
        Some(t) if is_station(t) => {
            idx += 1;
            (*t).to_string()
        }
        _ => return Err(MetarError::MalformedReport("no station group".into())),
    };

    let time = match tokens.get(idx).and_then(|t| parse_time(t, anchor)) {
        Some(t) => {
            idx += 1;
            t
        }
        None => return Err(MetarError::MalformedReport("no time group".into())),
    };

    let mut obs = Observation {
        station,
        time,
        wind_dir_deg: None,
        wind_speed_kt: None,
        visibility_sm: None,
        temp_c: None,
        dewpoint_c: None,
        pressure_hpa: None,
        wx_codes: Vec::new(),
        raw: raw.to_string(),
    };
    let mut diagnostics = Vec::new();
    let mut have_wind = false;
    let mut have_vis = false;
    let mut have_temp = false;
    let mut have_pressure = false;

    while idx < tokens.len() {
        let tok = tokens[idx];
        idx += 1;

        match tok {
            "AUTO" | "COR" | "NIL" | "RTD" | "CCA" | "CCB" => continue,
            "RMK" => {
                diagnostics.push("remarks section skipped".into());
                break;
            }
            "NOSIG" | "TEMPO" | "BECMG" => {
                diagnostics.push(format!("trend section skipped from {tok}"));
                break;
            }
            _ => {}
        }
        if tok.starts_with("FM") && tok.len() >= 6 && tok[2..].chars().all(|c| c.is_ascii_digit()) {
            diagnostics.push(format!("trend section skipped from {tok}"));
            break;
        }

        if !have_wind {
            if let Some(w) = parse_wind(tok) {
                obs.wind_dir_deg = w.dir_deg;
                obs.wind_speed_kt = Some(w.speed_kt);
                if w.gust_kt.is_some() {
                    diagnostics.push(format!("gust group retained in raw only: {tok}"));
                }
                if w.suspect_dir {
                    diagnostics.push(format!("wind direction 000 with nonzero speed: {tok}"));
                }
                have_wind = true;
                continue;
            }
        }
        // Wind variability group (e.g. 280V350): informational.
        if is_wind_variability(tok) {
            diagnostics.push(format!("wind variability group skipped: {tok}"));
            continue;
        }

        if !have_vis {
            // A lone whole-mile digit followed by a fraction ("1 1/2SM").
            if let (Ok(whole), Some(next)) = (tok.parse::<u32>(), tokens.get(idx)) {
                if whole <= 9 && is_fraction_sm(next) {
                    let combined = format!("{tok} {next}");
                    if let Ok(v) = normalize_visibility(&combined, RegionConvention::Meters) {
                        obs.visibility_sm = Some(v);
                        have_vis = true;
                        idx += 1;
                        continue;
                    }
                }
            }
            if looks_like_visibility(tok) {
                match normalize_visibility(tok, RegionConvention::Meters) {
                    Ok(v) => {
                        obs.visibility_sm = Some(v);
                        have_vis = true;
                    }
                    Err(_) => diagnostics.push(format!("undecodable visibility group: {tok}")),
                }
                continue;
            }
        }

        if is_rvr(tok) {
            diagnostics.push(format!("RVR group skipped: {tok}"));
            continue;
        }

        if is_sky(tok) {
            diagnostics.push(format!("sky condition skipped: {tok}"));
            continue;
        }

        if !have_temp {
            if let Some((t, d)) = parse_temp_group(tok) {
                obs.temp_c = t;
                obs.dewpoint_c = d;
                have_temp = true;
                continue;
            }
        }

        if !have_pressure {
            if let Some(p) = parse_pressure(tok) {
                if (850.0..=1100.0).contains(&p) {
                    obs.pressure_hpa = Some(p);
                } else {
                    diagnostics.push(format!("implausible pressure dropped: {tok}"));
                }
                have_pressure = true;
                continue;
            }
        }

        if is_wx_token(tok) {
            obs.wx_codes.push(tok.to_string());
            continue;
        }

        diagnostics.push(format!("unrecognized group skipped: {tok}"));
    }

    Ok(Decoded { obs, diagnostics })
}

/// Normalize a METAR/TAF visibility group to statute miles.
///
/// Accepts statute forms (`10SM`, `1 1/2SM`, `M1/4SM`, `P6SM`), metric forms
/// (`0800`, `9999`, optionally with a direction suffix), and `CAVOK`.
/// `9999`, `CAVOK` and `P6SM` map to the unlimited sentinel (10 km).
pub fn normalize_visibility(token: &str, convention: RegionConvention) -> Result<f64, MetarError> {
    let tok = token.trim();
    if tok.is_empty() {
        return Err(MetarError::UnparseableVisibility(token.into()));
    }
    if tok == "CAVOK" || tok == "9999" {
        return Ok(UNLIMITED_VISIBILITY_SM);
    }
    if let Some(sm) = tok.strip_suffix("SM") {
        return parse_statute_body(sm).ok_or_else(|| MetarError::UnparseableVisibility(token.into()));
    }
    // Metric group: 4 digits plus an optional direction / NDV suffix.
    let (digits, rest): (String, String) = {
        let d: String = tok.chars().take_while(|c| c.is_ascii_digit()).collect();
        let r: String = tok.chars().skip(d.len()).collect();
        (d, r)
    };
    if digits.len() == 4 && (rest.is_empty() || is_direction_suffix(&rest)) {
        let meters: f64 = digits.parse().unwrap();
        return Ok(meters / METERS_PER_STATUTE_MILE);
    }
    if convention == RegionConvention::Statute {
        if let Some(v) = parse_statute_body(tok) {
            return Ok(v);
        }
    }
    Err(MetarError::UnparseableVisibility(token.into()))
}

/// Statute-mile body without the `SM` suffix: `10`, `1 1/2`, `3/4`, `M1/4`, `P6`.
fn parse_statute_body(body: &str) -> Option<f64> {
    let body = body.trim();
    if body.is_empty() {
        return None;
    }
    if let Some(rest) = body.strip_prefix('P') {
        // "P6" = more than six: the unlimited sentinel by convention.
        let v: f64 = rest.parse().ok()?;
        return Some(if v == 6.0 { UNLIMITED_VISIBILITY_SM } else { v });
    }
    // "M" = less than; floored at the reportable value.
    let body = body.strip_prefix('M').unwrap_or(body);
    let mut whole = 0.0;
    let mut frac_part = body;
    if let Some((w, f)) = body.split_once(' ') {
        whole = w.parse::<f64>().ok()?;
        frac_part = f;
    }
    if let Some((num, den)) = frac_part.split_once('/') {
        let num: f64 = num.parse().ok()?;
        let den: f64 = den.parse().ok()?;
        if den == 0.0 {
            return None;
        }
        Some(whole + num / den)
    } else if whole == 0.0 {
        frac_part.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0)
    } else {
        None
    }
}

/// Re-encode a decoded wind field as a METAR group, for round-trip audits.
/// Calm encodes as `00000KT`; a missing direction with nonzero speed has no
/// standard non-VRB encoding and returns `None`.
pub fn encode_wind(dir_deg: Option<f64>, speed_kt: Option<f64>) -> Option<String> {
    let speed = speed_kt?;
    match dir_deg {
        Some(d) => Some(format!("{:03}{:02}KT", d.round() as u32, speed.round() as u32)),
        None if speed == 0.0 => Some("00000KT".to_string()),
        None => None,
    }
}

fn is_station(tok: &str) -> bool {
    tok.len() == 4
        && tok.chars().all(|c| c.is_ascii_alphanumeric() && !c.is_ascii_lowercase())
        && tok.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
}

fn parse_time(tok: &str, anchor: TimeAnchor) -> Option<DateTime<Utc>> {
    let body = tok.strip_suffix('Z')?;
    if body.len() != 6 || !body.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let day: u32 = body[0..2].parse().ok()?;
    let hour: u32 = body[2..4].parse().ok()?;
    let minute: u32 = body[4..6].parse().ok()?;
    if !(1..=31).contains(&day) || hour > 23 || minute > 59 {
        return None;
    }
    anchor.resolve(day, hour, minute)
}

struct Wind {
    dir_deg: Option<f64>,
    speed_kt: f64,
    gust_kt: Option<f64>,
    suspect_dir: bool,
}

fn parse_wind(tok: &str) -> Option<Wind> {
    let (body, to_kt) = if let Some(b) = tok.strip_suffix("KT") {
        (b, 1.0)
    } else if let Some(b) = tok.strip_suffix("MPS") {
        (b, 1.943_844_5)
    } else if let Some(b) = tok.strip_suffix("KMH") {
        (b, 1.0 / 1.852)
    } else {
        return None;
    };
    let (dir_part, rest) = body.split_at_checked(3)?;
    let (speed_part, gust_part) = match rest.split_once('G') {
        Some((s, g)) => (s, Some(g)),
        None => (rest, None),
    };
    if speed_part.is_empty() || !speed_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let speed_raw: f64 = speed_part.parse().ok()?;
    let gust_kt = match gust_part {
        Some(g) => Some(g.parse::<f64>().ok()? * to_kt),
        None => None,
    };
    let speed_kt = speed_raw * to_kt;

    let mut suspect_dir = false;
    let dir_deg = if dir_part == "VRB" {
        None
    } else if dir_part.chars().all(|c| c.is_ascii_digit()) {
        let d: f64 = dir_part.parse().ok()?;
        if d > 360.0 {
            return None;
        }
        if speed_raw == 0.0 && d == 0.0 {
            // Calm: direction 0 is not a northerly observation.
            None
        } else if d == 0.0 {
            suspect_dir = true;
            None
        } else {
            Some(d % 360.0)
        }
    } else {
        return None;
    };
    Some(Wind { dir_deg, speed_kt, gust_kt, suspect_dir })
}

fn is_wind_variability(tok: &str) -> bool {
    tok.len() == 7
        && tok.as_bytes()[3] == b'V'
        && tok[..3].chars().all(|c| c.is_ascii_digit())
        && tok[4..].chars().all(|c| c.is_ascii_digit())
}

fn looks_like_visibility(tok: &str) -> bool {
    if tok == "CAVOK" || tok == "9999" {
        return true;
    }
    if tok.ends_with("SM") {
        let body = &tok[..tok.len() - 2];
        return !body.is_empty()
            && body
                .chars()
                .all(|c| c.is_ascii_digit() || c == '/' || c == 'M' || c == 'P');
    }
    let digits: String = tok.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.len() == 4 && is_direction_suffix(&tok[4..])
}

fn is_direction_suffix(rest: &str) -> bool {
    matches!(rest, "" | "N" | "S" | "E" | "W" | "NE" | "NW" | "SE" | "SW" | "NDV")
}

fn is_fraction_sm(tok: &str) -> bool {
    tok.strip_suffix("SM")
        .and_then(|b| b.split_once('/'))
        .is_some_and(|(n, d)| {
            !n.is_empty()
                && !d.is_empty()
                && n.chars().all(|c| c.is_ascii_digit())
                && d.chars().all(|c| c.is_ascii_digit())
        })
}

fn is_rvr(tok: &str) -> bool {
    let Some(body) = tok.strip_prefix('R') else { return false };
    let Some((rwy, vis)) = body.split_once('/') else { return false };
    rwy.len() >= 2
        && rwy[..2].chars().all(|c| c.is_ascii_digit())
        && !vis.is_empty()
}

fn is_sky(tok: &str) -> bool {
    if matches!(tok, "SKC" | "CLR" | "NSC" | "NCD" | "VV///") {
        return true;
    }
    for prefix in ["FEW", "SCT", "BKN", "OVC", "VV"] {
        if let Some(rest) = tok.strip_prefix(prefix) {
            let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
            if digits.len() == 3 && matches!(&rest[3..], "" | "CB" | "TCU") {
                return true;
            }
        }
    }
    false
}

fn parse_temp_half(s: &str) -> Option<Option<f64>> {
    if s.is_empty() || s.chars().all(|c| c == '/') {
        return Some(None);
    }
    let (neg, digits) = match s.strip_prefix('M') {
        Some(d) => (true, d),
        None => (false, s),
    };
    if digits.is_empty() || digits.len() > 2 || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let v: f64 = digits.parse().ok()?;
    Some(Some(if neg { -v } else { v }))
}

/// `M05/M17`, `08/08`, `15/` and `///05` forms. Returns (temp, dewpoint).
fn parse_temp_group(tok: &str) -> Option<(Option<f64>, Option<f64>)> {
    let (t, d) = tok.split_once('/')?;
    // Avoid eating visibility fractions like "1/2".
    let looks_numeric = |s: &str| {
        s.is_empty() || s.chars().all(|c| c == '/') || {
            let body = s.strip_prefix('M').unwrap_or(s);
            !body.is_empty() && body.len() <= 2 && body.chars().all(|c| c.is_ascii_digit())
        }
    };
    if !looks_numeric(t) || !looks_numeric(d) {
        return None;
    }
    // A bare "d/d" with no M prefix could be a fraction; temperatures always
    // appear after visibility in practice, and fractions carry the SM suffix,
    // so single-digit/single-digit is accepted as a temperature group.
    let temp = parse_temp_half(t)?;
    let dew = parse_temp_half(d)?;
    if temp.is_none() && dew.is_none() {
        return None;
    }
    Some((temp, dew))
}

fn parse_pressure(tok: &str) -> Option<f64> {
    if tok.len() != 5 {
        return None;
    }
    let digits = &tok[1..];
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    match tok.as_bytes()[0] {
        b'A' => Some(digits.parse::<f64>().unwrap() / 100.0 * HPA_PER_INHG),
        b'Q' => Some(digits.parse::<f64>().unwrap()),
        _ => None,
    }
}

const WX_DESCRIPTORS: [&str; 8] = ["MI", "PR", "BC", "DR", "BL", "SH", "TS", "FZ"];
const WX_PHENOMENA: [&str; 22] = [
    "DZ", "RA", "SN", "SG", "IC", "PL", "GR", "GS", "UP", "BR", "FG", "FU", "VA", "DU", "SA",
    "HZ", "PY", "PO", "SQ", "FC", "SS", "DS",
];

fn is_wx_token(tok: &str) -> bool {
    let body = tok.strip_prefix('+').or_else(|| tok.strip_prefix('-')).unwrap_or(tok);
    let body = body.strip_prefix("VC").unwrap_or(body);
    if body.is_empty() || body.len() % 2 != 0 || body.len() > 8 {
        return false;
    }
    let mut saw_phenomenon = false;
    let mut i = 0;
    while i < body.len() {
        let code = &body[i..i + 2];
        if WX_PHENOMENA.contains(&code) {
            saw_phenomenon = true;
        } else if !WX_DESCRIPTORS.contains(&code) {
            return false;
        }
        i += 2;
    }
    // Pure descriptor tokens (e.g. "TS") are valid present weather too.
    saw_phenomenon || WX_DESCRIPTORS.contains(&body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchor() -> TimeAnchor {
        TimeAnchor::new(2024, 6)
    }

    fn parse(raw: &str) -> Decoded {
        parse_metar(raw, anchor()).expect("parse")
    }

    #[test]
    fn decodes_us_report() {
        let d = parse("KJFK 051251Z 31015KT 10SM FEW250 M05/M17 A3011");
        let o = &d.obs;
        assert_eq!(o.station, "KJFK");
        assert_eq!(o.time, Utc.with_ymd_and_hms(2024, 6, 5, 12, 51, 0).unwrap());
        assert_eq!(o.wind_dir_deg, Some(310.0));
        assert_eq!(o.wind_speed_kt, Some(15.0));
        assert_eq!(o.visibility_sm, Some(10.0));
        assert_eq!(o.temp_c, Some(-5.0));
        assert_eq!(o.dewpoint_c, Some(-17.0));
        let p = o.pressure_hpa.unwrap();
        assert!((p - 1019.6).abs() < 0.05, "pressure {p}");
        assert_eq!(o.raw, "KJFK 051251Z 31015KT 10SM FEW250 M05/M17 A3011");
    }

    #[test]
    fn decodes_metric_report() {
        let d = parse("SCEL 120300Z 18005KT 0800 FG 08/08 Q1020");
        let o = &d.obs;
        assert!((o.visibility_sm.unwrap() - 0.497).abs() < 0.001);
        assert_eq!(o.temp_c, Some(8.0));
        assert_eq!(o.dewpoint_c, Some(8.0));
        assert_eq!(o.pressure_hpa, Some(1020.0));
        assert_eq!(o.wx_codes, vec!["FG"]);
    }

    #[test]
    fn missing_temperature_group_is_missing_field() {
        let d = parse("KLGA 010151Z 00000KT 10SM A2992");
        let o = &d.obs;
        assert_eq!(o.temp_c, None);
        assert_eq!(o.dewpoint_c, None);
        assert_eq!(o.visibility_sm, Some(10.0));
        assert_eq!(o.wind_speed_kt, Some(0.0));
        assert_eq!(o.wind_dir_deg, None, "calm wind must not record a direction");
    }

    #[test]
    fn vrb_wind_keeps_speed_only() {
        let d = parse("KLGA 010151Z VRB03KT 10SM 21/12 A2992");
        assert_eq!(d.obs.wind_dir_deg, None);
        assert_eq!(d.obs.wind_speed_kt, Some(3.0));
    }

    #[test]
    fn fractional_visibility_with_modifier() {
        let d = parse("KBOS 010151Z 00000KT M1/4SM FG 10/10 A2992");
        assert_eq!(d.obs.visibility_sm, Some(0.25));
        let d = parse("KBOS 010151Z 00000KT 1 1/2SM BR 10/10 A2992");
        assert_eq!(d.obs.visibility_sm, Some(1.5));
    }

    #[test]
    fn visibility_normalization_table() {
        let m = RegionConvention::Meters;
        assert_eq!(normalize_visibility("1 1/2SM", m).unwrap(), 1.5);
        assert!((normalize_visibility("0800", m).unwrap() - 0.497).abs() < 0.001);
        assert!((normalize_visibility("9999", m).unwrap() - 6.2137).abs() < 0.001);
        assert!((normalize_visibility("CAVOK", m).unwrap() - 6.2137).abs() < 0.001);
        assert!((normalize_visibility("P6SM", m).unwrap() - 6.2137).abs() < 0.001);
        assert_eq!(normalize_visibility("10SM", m).unwrap(), 10.0);
        assert_eq!(normalize_visibility("3/4SM", m).unwrap(), 0.75);
        assert!(normalize_visibility("XYZSM", m).is_err());
        assert!(normalize_visibility("", m).is_err());
        assert_eq!(normalize_visibility("3", RegionConvention::Statute).unwrap(), 3.0);
    }

    #[test]
    fn meters_round_trip_within_half_meter() {
        for meters in [100.0_f64, 800.0, 3000.0, 9000.0] {
            let token = format!("{:04}", meters as u32);
            let sm = normalize_visibility(&token, RegionConvention::Meters).unwrap();
            assert!((sm * METERS_PER_STATUTE_MILE - meters).abs() < 0.5);
        }
    }

    #[test]
    fn missing_station_or_time_is_error() {
        assert!(parse_metar("", anchor()).is_err());
        assert!(parse_metar("12345 051251Z", anchor()).is_err());
        assert!(parse_metar("KJFK", anchor()).is_err());
        assert!(parse_metar("KJFK 991251Z", anchor()).is_err());
    }

    #[test]
    fn unknown_groups_become_diagnostics() {
        let d = parse("KJFK 051251Z 31015KT 10SM R04R/3000FT BKN015 M05/M17 A3011 $GLITCH");
        assert_eq!(d.obs.temp_c, Some(-5.0));
        assert!(d.diagnostics.iter().any(|m| m.contains("RVR")));
        assert!(d.diagnostics.iter().any(|m| m.contains("sky")));
        assert!(d.diagnostics.iter().any(|m| m.contains("$GLITCH")));
    }

    #[test]
    fn remarks_and_trends_are_skipped() {
        let d = parse("KJFK 051251Z 31015KT 10SM M05/M17 A3011 RMK AO2 SLP093 T10501172");
        assert_eq!(d.obs.temp_c, Some(-5.0));
        assert!(d.diagnostics.iter().any(|m| m.contains("remarks")));
        let d = parse("SCEL 120300Z 18005KT 0800 FG 08/08 Q1020 NOSIG");
        assert!(d.diagnostics.iter().any(|m| m.contains("trend")));
    }

    #[test]
    fn mps_wind_converts_to_knots() {
        let d = parse("UUEE 051251Z 31005MPS 9999 08/03 Q1020");
        assert!((d.obs.wind_speed_kt.unwrap() - 9.719).abs() < 0.01);
    }

    #[test]
    fn implausible_pressure_is_dropped() {
        let d = parse("KJFK 051251Z 31015KT 10SM M05/M17 Q0700");
        assert_eq!(d.obs.pressure_hpa, None);
        assert!(d.diagnostics.iter().any(|m| m.contains("implausible")));
    }

    #[test]
    fn month_boundary_rolls_back() {
        let a = TimeAnchor::new(2024, 3);
        // Day 31 does not exist going forward from a 30-day context; here March
        // has 31 days so it resolves inside the anchor month.
        let d = parse_metar("KJFK 311251Z 31015KT 10SM M05/M17 A3011", a).unwrap();
        assert_eq!(d.obs.time, Utc.with_ymd_and_hms(2024, 3, 31, 12, 51, 0).unwrap());
        // Day 31 under an April anchor resolves to March 31.
        let a = TimeAnchor::new(2024, 4);
        let d = parse_metar("KJFK 311251Z 31015KT 10SM M05/M17 A3011", a).unwrap();
        assert_eq!(d.obs.time, Utc.with_ymd_and_hms(2024, 3, 31, 12, 51, 0).unwrap());
    }

    #[test]
    fn wind_round_trip_audit() {
        for raw in [
            "KJFK 051251Z 31015KT 10SM M05/M17 A3011",
            "SCEL 120300Z 18005KT 0800 FG 08/08 Q1020",
            "KLGA 010151Z 00000KT 10SM A2992",
        ] {
            let d = parse(raw);
            let token = encode_wind(d.obs.wind_dir_deg, d.obs.wind_speed_kt).unwrap();
            assert!(raw.contains(&token), "{token} not in {raw}");
        }
    }
}
