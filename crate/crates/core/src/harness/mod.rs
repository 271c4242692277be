//! Experiment orchestration on synthetic data.

pub mod config;
pub mod experiments;
pub mod pipeline;

pub use config::{DurationSpec, ExperimentConfig, IdvMode, PipelineConfig, PldaConfig, ProtocolConfig, SnormMode};
pub use experiments::{
    derive_seed, plda_seed, run_experiment, run_idv_comparison, run_in_vs_out_domain, run_matched_length_snorm,
    ExperimentKind, ExperimentReport, ResultRow, SeedData,
};
pub use pipeline::Backend;
