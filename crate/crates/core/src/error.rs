use thiserror::Error;

use crate::analysis::OracleError;
use crate::dynamics::DynamicsError;
use crate::game::GameError;
use crate::harness::HarnessError;
use crate::network::NetworkError;
use crate::schedule::ScheduleError;

/// Crate-wide error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl Error {
    /// Process exit code: 1 for configuration errors, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Harness(e) => e.exit_code(),
            Error::Game(crate::game::GameError::Config(_)) => 1,
            _ => 2,
        }
    }
}
