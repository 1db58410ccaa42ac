//! Absolute occupancy from a single sideband, by inverting the calibrated
//! transduction chain instead of comparing sidebands.

use serde::{Deserialize, Serialize};

use super::{EstimationError, LorentzianFit};
use crate::physics::{scattering_rates_unchecked, DriveState, OpticalModeParams, Sideband, HBAR};
use crate::spectra::DetectionChain;

/// Gains of the detection chain as known to the analyst; any may be unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainCalibration {
    pub g_edfa: Option<f64>,
    pub g_e: Option<f64>,
    pub quantum_efficiency: Option<f64>,
}

impl From<&DetectionChain> for ChainCalibration {
    fn from(chain: &DetectionChain) -> Self {
        Self {
            g_edfa: Some(chain.g_edfa),
            g_e: Some(chain.g_e),
            quantum_efficiency: Some(chain.quantum_efficiency),
        }
    }
}

/// Occupancy `n_+` or `n_-` seen at one read-out detuning, from the fitted area in V^2.
///
/// The mechanical frequency is taken as `|detuning|`.
pub fn calibrated_occupancy(
    fit: &LorentzianFit,
    readout_mode: &OpticalModeParams,
    readout_drive: &DriveState,
    chain: &ChainCalibration,
    which: Sideband,
) -> Result<f64, EstimationError> {
    if !fit.converged {
        return Err(EstimationError::Unconverged(which.label()));
    }
    let g_edfa = chain
        .g_edfa
        .ok_or(EstimationError::GainUnderdetermined("g_edfa"))?;
    let g_e = chain
        .g_e
        .ok_or(EstimationError::GainUnderdetermined("g_e"))?;
    let qe = chain
        .quantum_efficiency
        .ok_or(EstimationError::GainUnderdetermined("quantum_efficiency"))?;
    if !(g_edfa > 0.0 && g_e > 0.0 && qe > 0.0) {
        return Err(EstimationError::InvalidInput(
            "calibration gains must be > 0".into(),
        ));
    }
    let omega_m = readout_drive.detuning.abs();
    let side = Sideband::of_detuning(readout_drive.detuning, omega_m)?;
    if side != which || omega_m == 0.0 {
        return Err(EstimationError::InvalidInput(format!(
            "read-out detuning {:e} rad/s does not belong to the {} sideband",
            readout_drive.detuning,
            which.label()
        )));
    }
    let volts_per_photon_rate = HBAR * readout_drive.laser_omega(readout_mode) * g_edfa * g_e;
    let photon_rate = fit.area / (volts_per_photon_rate * volts_per_photon_rate * qe);
    let (a_plus, a_minus) = scattering_rates_unchecked(readout_mode, omega_m, readout_drive);
    let eta_c = readout_mode.coupling_ratio();
    Ok(match which {
        Sideband::Plus => photon_rate / (eta_c * a_minus),
        Sideband::Minus => photon_rate / (eta_c * a_plus) - 1.0,
    })
}

/// Removes read-out back-action from a single-detuning occupancy: `n_c = n_+/- (1 +/- C_r)`.
pub fn corrected_occupancy(n_branch: f64, c_r: f64, which: Sideband) -> f64 {
    n_branch * (1.0 + which.sign() * c_r)
}
