//! Curated METAR fixtures with hand-checked expected values, plus a seeded
//! mutation fuzz over the same corpus.

use chrono::{Datelike, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viscast_core::metar::{encode_wind, parse_metar, TimeAnchor};

const CORPUS: &str = include_str!("fixtures/metar_corpus.csv");
const ANCHOR_YEAR: i32 = 2024;
const ANCHOR_MONTH: u32 = 6;

struct Fixture {
    raw: String,
    station: String,
    day: u32,
    hour: u32,
    minute: u32,
    wind_dir_deg: Option<f64>,
    wind_speed_kt: Option<f64>,
    visibility_sm: Option<f64>,
    temp_c: Option<f64>,
    dewpoint_c: Option<f64>,
    pressure_hpa: Option<f64>,
    wx_codes: Vec<String>,
}

fn load_corpus() -> Vec<Fixture> {
    let mut reader = csv::Reader::from_reader(CORPUS.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.expect("well-formed corpus csv");
        let opt = |i: usize| -> Option<f64> {
            let s = rec[i].trim();
            (!s.is_empty()).then(|| s.parse().expect("numeric cell"))
        };
        out.push(Fixture {
            raw: rec[0].to_string(),
            station: rec[1].to_string(),
            day: rec[2].parse().unwrap(),
            hour: rec[3].parse().unwrap(),
            minute: rec[4].parse().unwrap(),
            wind_dir_deg: opt(5),
            wind_speed_kt: opt(6),
            visibility_sm: opt(7),
            temp_c: opt(8),
            dewpoint_c: opt(9),
            pressure_hpa: opt(10),
            wx_codes: if rec[11].is_empty() {
                Vec::new()
            } else {
                rec[11].split(';').map(str::to_string).collect()
            },
        });
    }
    out
}

fn assert_field(name: &str, raw: &str, got: Option<f64>, want: Option<f64>, tol: f64) {
    match (got, want) {
        (None, None) => {}
        (Some(g), Some(w)) => {
            assert!((g - w).abs() <= tol, "{name} for {raw:?}: got {g}, want {w}");
        }
        _ => panic!("{name} for {raw:?}: got {got:?}, want {want:?}"),
    }
}

#[test]
fn corpus_has_at_least_sixty_fixtures() {
    assert!(load_corpus().len() >= 60);
}

#[test]
fn every_fixture_decodes_to_expected_values() {
    let anchor = TimeAnchor::new(ANCHOR_YEAR, ANCHOR_MONTH);
    for f in load_corpus() {
        let d = parse_metar(&f.raw, anchor)
            .unwrap_or_else(|e| panic!("fixture failed to parse: {:?}: {e}", f.raw));
        let o = &d.obs;
        assert_eq!(o.station, f.station, "station for {:?}", f.raw);
        assert_eq!(o.raw, f.raw, "raw must be preserved byte-identical");
        assert_eq!(
            (o.time.day(), o.time.hour(), o.time.minute()),
            (f.day, f.hour, f.minute),
            "time for {:?}",
            f.raw
        );
        assert_field("wind_dir", &f.raw, o.wind_dir_deg, f.wind_dir_deg, 1e-9);
        assert_field("wind_speed", &f.raw, o.wind_speed_kt, f.wind_speed_kt, 1e-4);
        assert_field("visibility", &f.raw, o.visibility_sm, f.visibility_sm, 1e-4);
        assert_field("temp", &f.raw, o.temp_c, f.temp_c, 1e-9);
        assert_field("dewpoint", &f.raw, o.dewpoint_c, f.dewpoint_c, 1e-9);
        assert_field("pressure", &f.raw, o.pressure_hpa, f.pressure_hpa, 0.01);
        assert_eq!(o.wx_codes, f.wx_codes, "wx for {:?}", f.raw);
    }
}

#[test]
fn wind_groups_round_trip_against_raw() {
    let anchor = TimeAnchor::new(ANCHOR_YEAR, ANCHOR_MONTH);
    let mut checked = 0;
    for f in load_corpus() {
        // The re-encoded group must appear verbatim for non-VRB, non-gust,
        // knot-unit reports.
        if f.raw.contains("VRB") || f.raw.contains('G') || !f.raw.contains("KT") {
            continue;
        }
        let d = parse_metar(&f.raw, anchor).unwrap();
        let token = encode_wind(d.obs.wind_dir_deg, d.obs.wind_speed_kt)
            .unwrap_or_else(|| panic!("encodable wind for {:?}", f.raw));
        // 360 reports re-encode as 000; both name north.
        let alt = token.replace("000", "360");
        assert!(
            f.raw.contains(&token) || f.raw.contains(&alt),
            "wind {token} not found in {:?}",
            f.raw
        );
        checked += 1;
    }
    assert!(checked >= 40, "round-trip should cover most fixtures, got {checked}");
}

#[test]
fn fuzzed_reports_never_panic() {
    let corpus: Vec<String> = load_corpus().into_iter().map(|f| f.raw).collect();
    let anchor = TimeAnchor::new(ANCHOR_YEAR, ANCHOR_MONTH);
    let mut rng = ChaCha8Rng::seed_from_u64(0xFADE);
    let printable: Vec<char> =
        (b' '..=b'~').map(char::from).chain(['\u{00b5}', '\u{2014}', '\u{4e2d}']).collect();

    for _ in 0..100_000 {
        let seed = &corpus[rng.gen_range(0..corpus.len())];
        let mut chars: Vec<char> = seed.chars().collect();
        for _ in 0..rng.gen_range(1..=4) {
            if chars.is_empty() {
                break;
            }
            match rng.gen_range(0..5) {
                0 => {
                    let at = rng.gen_range(0..chars.len());
                    chars.truncate(at);
                }
                1 => {
                    let at = rng.gen_range(0..chars.len());
                    chars[at] = printable[rng.gen_range(0..printable.len())];
                }
                2 => {
                    let at = rng.gen_range(0..=chars.len());
                    chars.insert(at, printable[rng.gen_range(0..printable.len())]);
                }
                3 => {
                    let at = rng.gen_range(0..chars.len());
                    chars.remove(at);
                }
                _ => {
                    let at = rng.gen_range(0..chars.len());
                    let bt = rng.gen_range(0..chars.len());
                    chars.swap(at, bt);
                }
            }
        }
        let mangled: String = chars.into_iter().collect();
        // Must return Ok or Err, never panic.
        let _ = parse_metar(&mangled, anchor);
    }
}
