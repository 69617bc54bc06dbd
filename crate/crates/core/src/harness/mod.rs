//! Experiment configuration, multi-seed orchestration, aggregation and
//! artifact output.

mod aggregate;
mod config;
mod experiment;

use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::OracleError;
use crate::dynamics::DynamicsError;
use crate::game::GameError;
use crate::network::NetworkError;
use crate::schedule::ScheduleError;

pub use aggregate::{aggregate, write_csv, AggregateStats, ArmStats, AGGREGATE_HEADER};
pub use config::{
    load_config, Arm, ExperimentConfig, GameBlock, NetworkBlock, RunsBlock, ScheduleBlock, VarianceBlock,
};
pub use experiment::{
    constants_text, execute, execute_prepared, prepare, run_experiment, variance_study, write_artifacts,
    ExecOptions, ExperimentResult, Prepared, VariancePoint, VarianceStudy,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("aggregation: {0}")]
    Aggregate(String),
    #[error("pairing violated: {0}")]
    Pairing(String),
    #[error("step-size conditions fail:\n{0}")]
    ConditionsFailed(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl HarnessError {
    /// 1 for configuration and I/O problems, 2 for oracle, schedule and
    /// run failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Io { .. } => 1,
            HarnessError::Game(GameError::Config(_)) | HarnessError::Network(NetworkError::Invalid(_)) => 1,
            _ => 2,
        }
    }
}
