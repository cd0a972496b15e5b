//! TAF bulletin decoder and valid-time resolution.
//!
//! A bulletin decodes into an ordered list of [`ForecastGroup`]s with fully
//! resolved UTC windows. Visibility resolution at a query time takes the
//! minimum over all groups covering the time (worst-case rule): TEMPO and
//! PROB fluctuations count toward the IFR prediction, and BECMG transitions
//! adopt the new condition from the start of the change window while the old
//! condition persists to its end.

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

use crate::metar::{normalize_visibility, RegionConvention, TimeAnchor};

#[derive(Debug, Error)]
pub enum TafError {
    #[error("malformed bulletin: {0}")]
    MalformedBulletin(String),
    #[error("group time cannot be placed in the validity window: {0}")]
    UnresolvableGroupTime(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// Prevailing conditions from the bulletin header.
    Base,
    /// FM: abrupt change; prevails until the next FM or the end of validity.
    From,
    /// BECMG: gradual change over the stated window.
    Becmg,
    /// TEMPO: temporary fluctuation inside the stated window.
    Tempo,
    /// PROB30/PROB40 (optionally with TEMPO): probabilistic condition.
    Prob,
}

/// One forecast group with a resolved UTC window.
///
/// Windows are half-open `[start, end)` except that the bulletin's final
/// instant belongs to the groups ending there.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastGroup {
    pub kind: GroupKind,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    /// Statute miles; inherited from the prevailing group when the change
    /// group does not restate visibility.
    pub visibility_sm: Option<f64>,
    /// Only for PROB groups.
    pub probability_pct: Option<u8>,
}

/// A decoded TAF bulletin.
#[derive(Debug, Clone, PartialEq)]
pub struct TafBulletin {
    pub station: String,
    pub issue_time: DateTime<Utc>,
    pub valid_from: DateTime<Utc>,
    pub valid_to: DateTime<Utc>,
    pub groups: Vec<ForecastGroup>,
    /// AMD/COR bulletins replace their predecessor from issue time forward.
    pub amended: bool,
}

impl TafBulletin {
    pub fn covers(&self, t: DateTime<Utc>) -> bool {
        self.valid_from <= t && t <= self.valid_to
    }
}

/// Parse one full TAF bulletin. AMD/COR markers are tolerated and flagged.
pub fn parse_taf(raw: &str, anchor: TimeAnchor) -> Result<TafBulletin, TafError> {
    let tokens: Vec<&str> = raw.split_whitespace().collect();
    let mut idx = 0;
    let mut amended = false;

    if tokens.get(idx) == Some(&"TAF") {
        idx += 1;
    }
    while matches!(tokens.get(idx), Some(&"AMD") | Some(&"COR")) {
        amended = true;
        idx += 1;
    }

    let station = match tokens.get(idx) {
        Some(t) if t.len() == 4 && t.chars().all(|c| c.is_ascii_alphanumeric()) => {
            idx += 1;
            (*t).to_string()
        }
        _ => return Err(TafError::MalformedBulletin("no station group".into())),
    };

    let issue_time = match tokens.get(idx).and_then(|t| parse_issue_time(t, anchor)) {
        Some(t) => {
            idx += 1;
            t
        }
        None => return Err(TafError::MalformedBulletin("no issue time group".into())),
    };

    if tokens.get(idx) == Some(&"NIL") {
        return Err(TafError::MalformedBulletin("NIL bulletin".into()));
    }

    let (valid_from, valid_to) = match tokens.get(idx).and_then(|t| parse_validity(t, issue_time)) {
        Some(w) => {
            idx += 1;
            w
        }
        None => return Err(TafError::MalformedBulletin("no validity window".into())),
    };
    if valid_from >= valid_to {
        return Err(TafError::MalformedBulletin("empty validity window".into()));
    }
    if tokens.get(idx) == Some(&"CNL") {
        return Err(TafError::MalformedBulletin("cancelled bulletin".into()));
    }

    // Split the remaining tokens into the base segment and change segments.
    #[derive(Debug)]
    struct RawGroup<'a> {
        kind: GroupKind,
        time_spec: Option<&'a str>,
        probability_pct: Option<u8>,
        body: Vec<&'a str>,
    }
    let mut raw_groups: Vec<RawGroup> =
        vec![RawGroup { kind: GroupKind::Base, time_spec: None, probability_pct: None, body: Vec::new() }];

    while idx < tokens.len() {
        let tok = tokens[idx];
        idx += 1;
        if tok == "RMK" {
            break;
        }
        if let Some(fm) = tok.strip_prefix("FM") {
            if fm.len() == 6 && fm.chars().all(|c| c.is_ascii_digit()) {
                raw_groups.push(RawGroup {
                    kind: GroupKind::From,
                    time_spec: Some(fm),
                    probability_pct: None,
                    body: Vec::new(),
                });
                continue;
            }
        }
        if tok == "BECMG" || tok == "TEMPO" {
            let kind = if tok == "BECMG" { GroupKind::Becmg } else { GroupKind::Tempo };
            let spec = tokens.get(idx).copied();
            idx += 1;
            raw_groups.push(RawGroup { kind, time_spec: spec, probability_pct: None, body: Vec::new() });
            continue;
        }
        if let Some(p) = tok.strip_prefix("PROB") {
            if let Ok(pct) = p.parse::<u8>() {
                if tokens.get(idx) == Some(&"TEMPO") {
                    idx += 1;
                }
                let spec = tokens.get(idx).copied();
                idx += 1;
                raw_groups.push(RawGroup {
                    kind: GroupKind::Prob,
                    time_spec: Some(""),
                    probability_pct: Some(pct),
                    body: Vec::new(),
                });
                raw_groups.last_mut().unwrap().time_spec = spec;
                continue;
            }
        }
        raw_groups.last_mut().unwrap().body.push(tok);
    }

    // Resolve the prevailing chain first: base + FM groups tile the validity.
    let mut groups: Vec<ForecastGroup> = Vec::new();
    let mut fm_times: Vec<DateTime<Utc>> = Vec::new();
    for g in &raw_groups {
        if g.kind == GroupKind::From {
            let spec = g.time_spec.unwrap();
            let t = resolve_day_hour_minute(spec, valid_from, valid_to)
                .ok_or_else(|| TafError::UnresolvableGroupTime(format!("FM{spec}")))?;
            fm_times.push(t);
        }
    }

    let mut fm_seen = 0usize;
    for g in &raw_groups {
        let visibility_sm = extract_visibility(&g.body);
        match g.kind {
            GroupKind::Base => {
                let end = fm_times.first().copied().unwrap_or(valid_to);
                groups.push(ForecastGroup {
                    kind: GroupKind::Base,
                    start: valid_from,
                    end,
                    visibility_sm,
                    probability_pct: None,
                });
            }
            GroupKind::From => {
                let start = fm_times[fm_seen];
                let end = fm_times.get(fm_seen + 1).copied().unwrap_or(valid_to);
                fm_seen += 1;
                groups.push(ForecastGroup {
                    kind: GroupKind::From,
                    start,
                    end,
                    visibility_sm,
                    probability_pct: None,
                });
            }
            GroupKind::Becmg | GroupKind::Tempo | GroupKind::Prob => {
                let spec = g
                    .time_spec
                    .ok_or_else(|| TafError::UnresolvableGroupTime("missing change window".into()))?;
                let (start, end) = parse_change_window(spec, valid_from, valid_to)
                    .ok_or_else(|| TafError::UnresolvableGroupTime(spec.to_string()))?;
                groups.push(ForecastGroup {
                    kind: g.kind,
                    start,
                    end,
                    visibility_sm,
                    probability_pct: g.probability_pct,
                });
            }
        }
    }

    // Inheritance and BECMG adoption against the prevailing chain, in order.
    apply_change_semantics(&mut groups, valid_to);

    Ok(TafBulletin { station, issue_time, valid_from, valid_to, groups, amended })
}

/// Post-process groups: inherit visibility into change groups that omit it,
/// and give BECMG groups their early-adoption window (new condition from the
/// change-window start until the prevailing segment ends; the old condition
/// is truncated at the change-window end).
fn apply_change_semantics(groups: &mut Vec<ForecastGroup>, valid_to: DateTime<Utc>) {
    for i in 0..groups.len() {
        let kind = groups[i].kind;
        if !matches!(kind, GroupKind::Becmg | GroupKind::Tempo | GroupKind::Prob) {
            continue;
        }
        let start = groups[i].start;
        let becmg_end = groups[i].end;

        // Prevailing group in force at the change start: latest-starting
        // Base/From/Becmg group (before this one) whose window contains it.
        let prevailing = groups[..i]
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                matches!(p.kind, GroupKind::Base | GroupKind::From | GroupKind::Becmg)
                    && p.start <= start
                    && (start < p.end || (start == p.end && p.end == valid_to))
            })
            .max_by_key(|(j, p)| (p.start, *j))
            .map(|(j, _)| j);

        if groups[i].visibility_sm.is_none() {
            if let Some(j) = prevailing {
                groups[i].visibility_sm = groups[j].visibility_sm;
            }
        }
        if kind == GroupKind::Becmg {
            if let Some(j) = prevailing {
                // The new condition runs to the end of the prevailing segment;
                // the old one ceases once the transition completes.
                groups[i].end = groups[j].end;
                groups[j].end = becmg_end.min(groups[j].end);
            }
        }
    }
}

/// Minimum forecast visibility over all groups valid at `t`, or `None` when
/// the bulletin does not cover `t` (or no covering group states visibility).
pub fn resolve_visibility(bulletin: &TafBulletin, t: DateTime<Utc>) -> Option<f64> {
    if !bulletin.covers(t) {
        return None;
    }
    bulletin
        .groups
        .iter()
        .filter(|g| g.start <= t && (t < g.end || (t == g.end && g.end == bulletin.valid_to)))
        .filter_map(|g| g.visibility_sm)
        .min_by(|a, b| a.total_cmp(b))
}

/// The TAF agent's IFR call at `t`: 1 iff resolved visibility < 3 SM.
/// `None` when the bulletin does not cover `t`.
pub fn taf_predicts_ifr(bulletin: &TafBulletin, t: DateTime<Utc>) -> Option<u8> {
    resolve_visibility(bulletin, t).map(|v| u8::from(v < 3.0))
}

/// Latest bulletin issued at or before the decision time `t0` that covers the
/// target time. Both agents may only use information available at `t0`.
pub fn select_bulletin<'a>(
    bulletins: &'a [TafBulletin],
    t0: DateTime<Utc>,
    target: DateTime<Utc>,
) -> Option<&'a TafBulletin> {
    bulletins
        .iter()
        .filter(|b| b.issue_time <= t0 && b.covers(target))
        .max_by_key(|b| b.issue_time)
}

fn parse_issue_time(tok: &str, anchor: TimeAnchor) -> Option<DateTime<Utc>> {
    let body = tok.strip_suffix('Z')?;
    if body.len() != 6 || !body.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let day: u32 = body[0..2].parse().ok()?;
    let hour: u32 = body[2..4].parse().ok()?;
    let minute: u32 = body[4..6].parse().ok()?;
    if hour > 23 || minute > 59 {
        return None;
    }
    anchor_resolve(anchor, day, hour, minute)
}

fn anchor_resolve(anchor: TimeAnchor, day: u32, hour: u32, minute: u32) -> Option<DateTime<Utc>> {
    use chrono::{NaiveDate, TimeZone};
    if let Some(date) = NaiveDate::from_ymd_opt(anchor.year, anchor.month, day) {
        return Some(Utc.from_utc_datetime(&date.and_hms_opt(hour, minute, 0)?));
    }
    let (py, pm) = if anchor.month == 1 { (anchor.year - 1, 12) } else { (anchor.year, anchor.month - 1) };
    let date = NaiveDate::from_ymd_opt(py, pm, day)?;
    Some(Utc.from_utc_datetime(&date.and_hms_opt(hour, minute, 0)?))
}

/// `DDHH/DDHH` validity. Days are resolved against the issue time's month;
/// a to-day smaller than the from-day rolls into the next month, and hour 24
/// means the end of the day.
fn parse_validity(tok: &str, issue: DateTime<Utc>) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
    let (from, to) = tok.split_once('/')?;
    if from.len() != 4 || to.len() != 4 {
        return None;
    }
    let start = resolve_ddhh(from, issue, None)?;
    let end = resolve_ddhh(to, issue, Some(start))?;
    Some((start, end))
}

/// Resolve a DDHH token near a reference time. With `not_before`, the result
/// is advanced by one month if it would otherwise precede that bound.
fn resolve_ddhh(tok: &str, near: DateTime<Utc>, not_before: Option<DateTime<Utc>>) -> Option<DateTime<Utc>> {
    use chrono::{Datelike, NaiveDate, TimeZone};
    if tok.len() != 4 || !tok.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let day: u32 = tok[0..2].parse().ok()?;
    let hour: u32 = tok[2..4].parse().ok()?;
    if hour > 24 {
        return None;
    }
    let build = |year: i32, month: u32| -> Option<DateTime<Utc>> {
        let date = NaiveDate::from_ymd_opt(year, month, day)?;
        let t = Utc.from_utc_datetime(&date.and_hms_opt(hour.min(23), 0, 0)?);
        Some(if hour == 24 { t + Duration::hours(1) } else { t })
    };
    let (y, m) = (near.year(), near.month());
    let candidate = build(y, m);
    let next_month = if m == 12 { build(y + 1, 1) } else { build(y, m + 1) };
    match (candidate, not_before) {
        (Some(c), Some(bound)) if c < bound => next_month,
        (Some(c), _) => Some(c),
        (None, _) => next_month,
    }
}

/// FM time `DDHHMM`, required to sit inside the validity window.
fn resolve_day_hour_minute(
    spec: &str,
    valid_from: DateTime<Utc>,
    valid_to: DateTime<Utc>,
) -> Option<DateTime<Utc>> {
    use chrono::{Datelike, NaiveDate, TimeZone};
    if spec.len() != 6 || !spec.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let day: u32 = spec[0..2].parse().ok()?;
    let hour: u32 = spec[2..4].parse().ok()?;
    let minute: u32 = spec[4..6].parse().ok()?;
    if hour > 23 || minute > 59 {
        return None;
    }
    for (y, m) in [
        (valid_from.year(), valid_from.month()),
        (valid_to.year(), valid_to.month()),
    ] {
        if let Some(date) = NaiveDate::from_ymd_opt(y, m, day) {
            let t = Utc.from_utc_datetime(&date.and_hms_opt(hour, minute, 0)?);
            if valid_from <= t && t <= valid_to {
                return Some(t);
            }
        }
    }
    None
}

/// Change windows `DDHH/DDHH` must lie inside the bulletin validity.
fn parse_change_window(
    spec: &str,
    valid_from: DateTime<Utc>,
    valid_to: DateTime<Utc>,
) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
    let (from, to) = spec.split_once('/')?;
    let start = resolve_ddhh(from, valid_from, None)?;
    let end = resolve_ddhh(to, valid_from, Some(start))?;
    if start < valid_from || end > valid_to || start >= end {
        return None;
    }
    Some((start, end))
}

/// First visibility token in a group body, in statute miles.
fn extract_visibility(body: &[&str]) -> Option<f64> {
    let mut i = 0;
    while i < body.len() {
        let tok = body[i];
        // Whole-plus-fraction form spans two tokens.
        if let Ok(whole) = tok.parse::<u32>() {
            if whole <= 9 {
                if let Some(next) = body.get(i + 1) {
                    if next.ends_with("SM") && next.contains('/') {
                        let combined = format!("{tok} {next}");
                        if let Ok(v) = normalize_visibility(&combined, RegionConvention::Meters) {
                            return Some(v);
                        }
                    }
                }
            }
        }
        if taf_vis_candidate(tok) {
            if let Ok(v) = normalize_visibility(tok, RegionConvention::Meters) {
                return Some(v);
            }
        }
        i += 1;
    }
    None
}

fn taf_vis_candidate(tok: &str) -> bool {
    if tok == "CAVOK" || tok == "9999" {
        return true;
    }
    if tok.ends_with("SM") {
        let body = &tok[..tok.len() - 2];
        return !body.is_empty()
            && body.chars().all(|c| c.is_ascii_digit() || c == '/' || c == 'M' || c == 'P');
    }
    // Bare 4-digit meters, but not a wind group (those end in KT/MPS) and not
    // a cloud group (handled by prefix letters).
    tok.len() == 4 && tok.chars().all(|c| c.is_ascii_digit())
}
