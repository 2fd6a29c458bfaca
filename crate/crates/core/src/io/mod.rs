//! File formats, the synthetic building generator and run directories.
//!
//! Load and temperature files are two-column CSVs (`timestamp,power_w` and
//! `timestamp,temp_c`) with ISO-8601 timestamps. Holiday files hold one
//! `YYYY-MM-DD` date per line.

mod export;
mod files;
mod generator;

pub use export::{
    abstentions_csv, boxplot_csv, daily_mae_csv, export_simulation, failures_csv, file_digest, file_stem,
    forecasts_csv, metrics_csv, refits_csv, sha256_hex, summarize, FileDigest, ForecasterSummary, Manifest, RunDir,
};
pub use files::{
    align_to, infer_step, ingest, quality_report, read_holidays, read_series_csv, read_series_file, to_grid,
    write_series_csv, IngestReport, QualityReport, LOAD_HEADER, TEMPERATURE_HEADER,
};
pub use generator::{gen_building_load, gen_temperature, load_stats, LoadStats, SyntheticBuildingSpec};
