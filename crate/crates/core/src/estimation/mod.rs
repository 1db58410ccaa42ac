//! Inverse pipeline: Lorentzian fits of the two read-out traces, cooperativity from
//! linewidths, sideband asymmetry, and occupancy with propagated uncertainty.

mod asymmetry;
mod calibration;
mod fit;

use thiserror::Error;

use crate::physics::PhysicsError;

pub use asymmetry::{
    cooperativity_from_linewidths, eta_ideal, eta_prime, occupancy_from_asymmetry,
    occupancy_from_asymmetry_with, Cooperativity, EstimateIntervals, EstimateOptions,
    OccupancyEstimate, DEFAULT_POWER_MISMATCH_REL95,
};
pub use calibration::{calibrated_occupancy, corrected_occupancy, ChainCalibration};
pub use fit::{
    fit_lorentzian, fit_lorentzian_with, FitError, FitIntervals, FitOptions, LorentzianFit,
    Weighting, MIN_FIT_POINTS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("sideband asymmetry {0} is not positive: occupancy undefined")]
    NonPositiveAsymmetry(f64),
    #[error("cooperativity {0} outside (-1, 1)")]
    CooperativityOutOfRange(f64),
    #[error("fit for the {0} sideband did not converge")]
    Unconverged(&'static str),
    #[error("calibration underdetermined: {0} is not set")]
    GainUnderdetermined(&'static str),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}
