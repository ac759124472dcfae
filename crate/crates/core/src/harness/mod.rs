//! Experiment orchestration: configs, seeded training campaigns, the
//! requirement sweep and the files they produce.

pub mod campaign;
pub mod config;
pub mod metrics;
pub mod output;
pub mod svg;

pub use campaign::{run_campaign, run_cell, sweep_requirement, AlgorithmSummary, Campaign, CampaignSummary, CellResult, Sweep, SweepRow, SweepTable};
pub use config::{ExperimentConfig, RunConfig};
pub use output::{emit_outputs, emit_sweep, records_to_csv, CSV_HEADER};
