//! The coupled chemotaxis-fluid integrator in shifted variables.

mod data;
mod flux;
mod sensitivity;
mod state;
mod step;

pub use data::{
    build_data, vortex, DataPreset, Forcing, ForcingPreset, GivenData, HypothesisResiduals,
    PotentialPreset,
};
pub use flux::{
    advection, advective_flux, boundary_chemotactic, chemotactic_flux, momentum_advection,
};
pub use sensitivity::{frobenius, mat_vec, Mat2, SensitivitySpec, IDENTITY, QUARTER_TURN};
pub use state::{c_offset, shift_transform, unshift, BoundaryRecord, ShiftedState, SimState};
pub use step::{
    picard_step, run, step, PicardOptions, PicardOutcome, RunOptions, RunOutput, StepOptions,
};

use thiserror::Error;

use crate::diagnostics::DiagnosticsSeries;
use crate::grid::GridError;
use crate::linstep::LinStepError;

#[derive(Debug, Error)]
pub enum KsnsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linear(#[from] LinStepError),
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("final time {t_end} must be positive and at least one time step {dt}")]
    BadHorizon { t_end: f64, dt: f64 },
    #[error("Picard iteration needs k_max >= 1")]
    BadPicard,
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        /// Last state that passed the finiteness and ceiling checks.
        last: Box<SimState>,
        /// Diagnostics recorded up to the last valid state, when run by [`run`].
        series: Option<Box<DiagnosticsSeries>>,
    },
}
