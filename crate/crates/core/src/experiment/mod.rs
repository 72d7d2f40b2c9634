//! Regime presets, decay-time extraction, scans and file output.

pub mod output;
pub mod preset;
pub mod run;
pub mod scan;
pub mod tau;

pub use output::TauRow;
pub use preset::{Overrides, PresetName, RegimePreset};
pub use run::{preset_from_manifest, run_preset, RunOutput};
pub use scan::{collapse_scan, delta_scan, delta_scan_with_horizons, CollapseReport, DeltaScan, Measure};
pub use tau::{crossing_time, extract_tau, TauRecord};
