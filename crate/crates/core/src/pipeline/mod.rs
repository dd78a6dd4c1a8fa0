//! Orchestration: synthetic data, evaluation, reports and runs.

pub mod config;
pub mod evaluate;
pub mod run;
pub mod synth;

pub use config::{ConfigError, RunConfig};
pub use evaluate::{evaluate, EvaluateOptions, EvaluationReport};
pub use run::{run_all, run_stage, PipelineError, RunDir, Stage};
pub use synth::{synth_dataset, DatasetSizes, SynthDataset};
