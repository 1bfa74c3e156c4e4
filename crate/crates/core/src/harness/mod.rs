//! Experiment configs and runners producing CSV tables.

mod config;
mod experiments;

use thiserror::Error;

use crate::certificates::CertificateError;
use crate::games::GameError;
use crate::optimizers::OptimizerError;
use crate::toygan::ToyGanError;

pub use config::{
    default_cs, default_etas, parse_config, AlgSpec, Coefficients, ExperimentConfig,
    ExperimentKind, GameSpec,
};
pub use experiments::{
    cauchy_csv, cauchy_table, certify, distance_csv, distance_vs_k, format_float, gan_train,
    grid_csv, max_step_csv, max_step_for, max_step_size_search, run_experiment, run_grid,
    trajectory_csv, trajectory_dump, CauchyRow, DistanceRow, GridRow, MaxStepRow, TrajectoryDump,
    FINAL_DISTANCE_CAP,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation {
        field: &'static str,
        message: String,
    },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    ToyGan(#[from] ToyGanError),
}

impl HarnessError {
    pub(crate) fn validation(field: &'static str, message: impl Into<String>) -> Self {
        Self::Validation {
            field,
            message: message.into(),
        }
    }

    /// Whether the error stems from the config rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Self::Parse { .. } | Self::Validation { .. })
    }

    pub fn is_numerical_blowup(&self) -> bool {
        matches!(self, Self::ToyGan(ToyGanError::NumericalBlowup { .. }))
    }
}
