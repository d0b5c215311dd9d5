//! Driver library for the `fxpf` binary: the pipeline configuration document
//! and the subcommand implementations, exposed as plain functions so the
//! integration suite exercises exactly what the binary runs.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_beamform, cmd_compare, cmd_evaluate, cmd_simulate, CompareReport, RegionRow,
    SimulateSummary, VariantRow, COMPARE_VARIANTS,
};
pub use config::{
    AberrationSettings, BeamformSettings, FxpfMode, FxpfSettings, GridSettings, PipelineConfig,
};
