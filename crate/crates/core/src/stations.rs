//! Bundled ICAO station coordinates.
//!
//! Latitude/longitude is the only station-specific input the pipeline needs
//! (it drives the day/night flag). Unknown stations can always be supplied
//! via explicit coordinates.

/// (ICAO, latitude deg N, longitude deg E)
const STATIONS: &[(&str, f64, f64)] = &[
    ("SCEL", -33.393, -70.786),
    ("KSFO", 37.620, -122.365),
    ("EGLL", 51.477, -0.461),
    ("SBGR", -23.436, -46.473),
    ("VIDP", 28.567, 77.103),
    ("KORD", 41.978, -87.906),
    ("KJFK", 40.640, -73.779),
    ("KDEN", 39.862, -104.673),
    ("KATL", 33.637, -84.428),
    ("KLGA", 40.777, -73.873),
    ("SABE", -34.559, -58.416),
    ("KBOS", 42.363, -71.006),
    ("KSEA", 47.450, -122.309),
    ("LFPG", 49.010, 2.548),
    ("EDDF", 50.033, 8.571),
    ("RJTT", 35.552, 139.780),
];

/// Look up bundled coordinates for a station id.
pub fn coordinates(icao: &str) -> Option<(f64, f64)> {
    STATIONS
        .iter()
        .find(|(id, _, _)| id.eq_ignore_ascii_case(icao))
        .map(|(_, lat, lon)| (*lat, *lon))
}
