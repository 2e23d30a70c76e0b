//! Experiment orchestration: versioned config files, scenario presets,
//! source pretraining, SSKT runs with on-disk artifacts, and run comparison.
//!
//! Every run directory holds `metrics.csv`, `summary.json`,
//! `checkpoint.bin`, and `checkpoint.manifest`.

mod compare;
mod config;
mod presets;
mod run;

pub use compare::{compare, write_comparison, Comparison, ComparisonRow, GroupStats};
pub use config::{
    BinaryData, DataSpec, ExperimentConfig, Overrides, Scenario, SourceRecipe, SourceRef,
    CONFIG_VERSION,
};
pub use presets::{preset, PRESET_NAMES};
pub use run::{
    evaluate_checkpoint, load_splits, pretrain_source, read_summary, run_experiment, write_dataset,
    Role, RunSummary, Split, METRICS_CSV, SUMMARY_JSON,
};
