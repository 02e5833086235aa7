//! Library side of the `longtail` command-line tool.
//!
//! The binary in `main.rs` is a thin argument-parsing shell; the actual
//! commands live in [`commands`] and operate on an [`config::ExperimentConfig`],
//! so integration tests can drive them in-process.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_dump_features, cmd_evaluate, cmd_generate, cmd_sweep_alpha, cmd_train, fnv1a64, CliError,
};
pub use config::{
    ExperimentConfig, ImbalanceChoice, LossChoice, MetricChoice, ScheduleChoice, SplitChoice,
};
