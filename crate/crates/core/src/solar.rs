//! Low-precision solar position, sufficient for a day/night flag.
//!
//! Implements the standard declination + equation-of-time series (accuracy a
//! few hundredths of a degree, minutes-level sunrise error), evaluated
//! directly from a UTC timestamp.

use chrono::{DateTime, Datelike, Timelike, Utc};

/// Elevation threshold for night: the conventional sunrise/sunset definition
/// including refraction and solar semidiameter.
pub const NIGHT_ELEVATION_DEG: f64 = -0.833;

/// Solar elevation angle in degrees at (lat, lon) and UTC time.
/// Latitude/longitude in degrees, east and north positive.
pub fn solar_elevation_deg(lat_deg: f64, lon_deg: f64, t: DateTime<Utc>) -> f64 {
    let day_of_year = t.ordinal() as f64;
    let hour = t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0;
    let days_in_year = if t.date_naive().leap_year() { 366.0 } else { 365.0 };

    // Fractional year in radians.
    let g = 2.0 * std::f64::consts::PI / days_in_year * (day_of_year - 1.0 + (hour - 12.0) / 24.0);

    let eqtime_min = 229.18
        * (0.000075 + 0.001868 * g.cos()
            - 0.032077 * g.sin()
            - 0.014615 * (2.0 * g).cos()
            - 0.040849 * (2.0 * g).sin());
    let decl = 0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin()
        - 0.006758 * (2.0 * g).cos()
        + 0.000907 * (2.0 * g).sin()
        - 0.002697 * (3.0 * g).cos()
        + 0.00148 * (3.0 * g).sin();

    // True solar time in minutes; hour angle in degrees.
    let time_offset = eqtime_min + 4.0 * lon_deg;
    let tst = hour * 60.0 + time_offset;
    let ha = (tst / 4.0 - 180.0).to_radians();

    let lat = lat_deg.to_radians();
    let cos_zenith = lat.sin() * decl.sin() + lat.cos() * decl.cos() * ha.cos();
    90.0 - cos_zenith.clamp(-1.0, 1.0).acos().to_degrees()
}

/// 1 if the sun is below the sunrise/sunset threshold at (lat, lon, t).
pub fn is_night(lat_deg: f64, lon_deg: f64, t: DateTime<Utc>) -> u8 {
    u8::from(solar_elevation_deg(lat_deg, lon_deg, t) < NIGHT_ELEVATION_DEG)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn utc(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, mo, d, h, mi, 0).unwrap()
    }

    #[test]
    fn equator_equinox_noon_and_midnight() {
        // At the March equinox the sun crosses the equator; local solar noon at
        // lon 0 is ~12:07 UTC that day (equation of time ~ -7 min).
        assert_eq!(is_night(0.0, 0.0, utc(2024, 3, 20, 12, 7)), 0);
        assert_eq!(is_night(0.0, 0.0, utc(2024, 3, 20, 0, 7)), 1);
        let elev = solar_elevation_deg(0.0, 0.0, utc(2024, 3, 20, 12, 7));
        assert!(elev > 85.0, "near-zenith sun, got {elev}");
    }

    #[test]
    fn santiago_winter_solstice() {
        // Published Santiago (33.45S, 70.67W) times for 2024-06-21:
        // sunrise 07:46 local (11:46 UTC), sunset 17:43 local (21:43 UTC).
        let lat = -33.45;
        let lon = -70.67;
        assert_eq!(is_night(lat, lon, utc(2024, 6, 21, 6, 0)), 1); // 02:00 local
        assert_eq!(is_night(lat, lon, utc(2024, 6, 21, 11, 0)), 1); // pre-dawn
        assert_eq!(is_night(lat, lon, utc(2024, 6, 21, 12, 30)), 0); // mid-morning
        assert_eq!(is_night(lat, lon, utc(2024, 6, 21, 21, 0)), 0); // before sunset
        assert_eq!(is_night(lat, lon, utc(2024, 6, 21, 22, 30)), 1); // after sunset
    }

    #[test]
    fn new_york_summer() {
        // KJFK (40.64N, 73.78W), 2010-07-15: sunrise 05:37 local (09:37 UTC),
        // sunset 20:25 local (00:25 UTC next day).
        let lat = 40.64;
        let lon = -73.78;
        assert_eq!(is_night(lat, lon, utc(2010, 7, 15, 4, 0)), 1); // midnight local
        assert_eq!(is_night(lat, lon, utc(2010, 7, 15, 10, 30)), 0);
        assert_eq!(is_night(lat, lon, utc(2010, 7, 15, 23, 0)), 0); // 19:00 local
        assert_eq!(is_night(lat, lon, utc(2010, 7, 16, 1, 30)), 1); // 21:30 local
    }

    #[test]
    fn high_latitude_midsummer_has_no_night() {
        // Tromso-ish latitude, midnight sun in late June.
        for h in 0..24 {
            assert_eq!(is_night(69.6, 18.9, utc(2024, 6, 21, h, 0)), 0, "hour {h}");
        }
    }
}
