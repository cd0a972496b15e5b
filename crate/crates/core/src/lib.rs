//! Station-local aviation visibility nowcasting.
//!
//! The crate covers the full path from raw aerodrome reports to a verified
//! forecast model:
//!
//! - [`metar`] — decode METAR surface reports into structured observations
//! - [`taf`] — decode TAF bulletins and resolve the forecast valid at a time
//! - [`obs`] — quality control and hourly regularization of report streams
//! - [`features`] — the physics-guided feature matrix, labels and splits
//! - [`gbdt`] — gradient-boosted tree classifier with native missing routing
//! - [`explain`] — exact TreeSHAP attribution for the tree ensemble
//! - [`bench`] — confusion matrices, skill metrics and the TAF comparison
//! - [`synth`] — a seeded synthetic fog generator for offline evaluation
//! - [`stations`] — bundled ICAO coordinate lookup
//!
//! All randomness is seeded, and every pipeline stage is a pure function of
//! its inputs, so identical runs produce identical artifacts.

pub mod bench;
pub mod explain;
pub mod features;
pub mod gbdt;
pub mod metar;
pub mod obs;
pub mod solar;
pub mod stations;
pub mod synth;
pub mod taf;

pub use features::{FeatureVector, Horizon, LabeledExample, FEATURE_NAMES};
pub use gbdt::{Model, TrainConfig};
pub use metar::Observation;
pub use obs::HourlySeries;
pub use taf::TafBulletin;

/// Meters in one statute mile; the canonical visibility unit is statute miles.
pub const METERS_PER_STATUTE_MILE: f64 = 1609.344;

/// Hectopascals per inch of mercury, for altimeter-group conversion.
pub const HPA_PER_INHG: f64 = 33.8639;

/// Decoded visibility assigned to "unlimited" groups (9999, CAVOK, P6SM):
/// 10 km expressed in statute miles. Everything that matters happens below
/// the 3 SM target threshold, so the exact cap is a convention.
pub const UNLIMITED_VISIBILITY_SM: f64 = 10_000.0 / METERS_PER_STATUTE_MILE;
