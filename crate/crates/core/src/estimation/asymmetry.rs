use serde::{Deserialize, Serialize};

use super::{EstimationError, LorentzianFit};

/// Default 95% relative uncertainty of the transmitted read-out power between the
/// two detunings.
pub const DEFAULT_POWER_MISMATCH_REL95: f64 = 0.02;

const Z95: f64 = 1.959_963_984_540_054;

/// Read-out cooperativity inferred from the two damped linewidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cooperativity {
    pub value: f64,
    /// Negative value: the `+` trace is narrower than the `-` trace, which the
    /// model forbids; usually a label swap or noise on a very small `C_r`.
    pub negative: bool,
}

/// `C_r = (gamma_+ - gamma_-) / (gamma_+ + gamma_-)`.
pub fn cooperativity_from_linewidths(
    gamma_plus: f64,
    gamma_minus: f64,
) -> Result<Cooperativity, EstimationError> {
    if !(gamma_plus > 0.0 && gamma_minus > 0.0) || !(gamma_plus + gamma_minus).is_finite() {
        return Err(EstimationError::InvalidInput(format!(
            "linewidths must be finite and > 0, got {gamma_plus} and {gamma_minus}"
        )));
    }
    let value = (gamma_plus - gamma_minus) / (gamma_plus + gamma_minus);
    if !(value > -1.0 && value < 1.0) {
        return Err(EstimationError::CooperativityOutOfRange(value));
    }
    if value < 0.0 {
        log::warn!("negative read-out cooperativity {value:.4}: sideband labels may be swapped");
    }
    Ok(Cooperativity {
        value,
        negative: value < 0.0,
    })
}

fn check_areas(i_minus: f64, i_plus: f64) -> Result<(), EstimationError> {
    if !(i_plus > 0.0 && i_plus.is_finite()) || !i_minus.is_finite() {
        return Err(EstimationError::InvalidInput(format!(
            "sideband areas must be finite with I_+ > 0, got I_- = {i_minus}, I_+ = {i_plus}"
        )));
    }
    Ok(())
}

/// Uncorrected sideband asymmetry `I_-/I_+ - 1`; equals `1/n` without read-out back-action.
pub fn eta_ideal(i_minus: f64, i_plus: f64) -> Result<f64, EstimationError> {
    check_areas(i_minus, i_plus)?;
    Ok(i_minus / i_plus - 1.0)
}

/// Back-action-corrected asymmetry `(I_-/I_+)/(1 + C_r) - 1/(1 - C_r)`; equals `1/n_c`.
pub fn eta_prime(i_minus: f64, i_plus: f64, c_r: f64) -> Result<f64, EstimationError> {
    check_areas(i_minus, i_plus)?;
    if !(c_r > -1.0 && c_r < 1.0) {
        return Err(EstimationError::CooperativityOutOfRange(c_r));
    }
    Ok(i_minus / i_plus / (1.0 + c_r) - 1.0 / (1.0 - c_r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// 95% relative uncertainty on the ratio of transmitted read-out powers.
    pub power_mismatch_rel95: f64,
    /// Multiplier taking the measured `I_-/I_+` to a ratio of photon fluxes:
    /// `(omega_l+ / omega_l-)^2` when the chain converts optical power, since the two
    /// detunings put the read-out laser at slightly different frequencies.
    pub photon_energy_ratio: f64,
}

impl EstimateOptions {
    /// Photon-energy correction for traces taken with lasers at `laser_plus_hz` and
    /// `laser_minus_hz` through a power-sensing chain.
    pub fn photon_energy_ratio(laser_plus_hz: f64, laser_minus_hz: f64) -> f64 {
        (laser_plus_hz / laser_minus_hz).powi(2)
    }
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            power_mismatch_rel95: DEFAULT_POWER_MISMATCH_REL95,
            photon_energy_ratio: 1.0,
        }
    }
}

/// 95% half-widths from first-order propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateIntervals {
    #[serde(rename = "ci95_n_c")]
    pub n_c: f64,
    #[serde(rename = "ci95_c_r")]
    pub c_r: f64,
    #[serde(rename = "ci95_eta_prime")]
    pub eta_prime: f64,
    #[serde(rename = "ci95_n_plus")]
    pub n_plus: f64,
    #[serde(rename = "ci95_n_minus")]
    pub n_minus: f64,
}

/// Occupancy inferred from a pair of sideband fits, with every intermediate kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEstimate {
    pub n_c_est: f64,
    pub c_r_est: f64,
    pub eta_prime: f64,
    pub n_plus_est: f64,
    pub n_minus_est: f64,
    #[serde(flatten)]
    pub ci95: EstimateIntervals,
    pub i_plus: f64,
    pub i_minus: f64,
    pub gamma_plus_hz: f64,
    pub gamma_minus_hz: f64,
    /// `I_-/I_+` after the photon-energy correction.
    pub area_ratio: f64,
    pub power_mismatch_rel95: f64,
    pub cooperativity_negative: bool,
    pub fit_plus: LorentzianFit,
    pub fit_minus: LorentzianFit,
}

pub fn occupancy_from_asymmetry(
    fit_plus: &LorentzianFit,
    fit_minus: &LorentzianFit,
) -> Result<OccupancyEstimate, EstimationError> {
    occupancy_from_asymmetry_with(fit_plus, fit_minus, &EstimateOptions::default())
}

/// Combines the `detuning = +omega_m` and `-omega_m` fits into an occupancy estimate.
///
/// Uncertainties propagate the fits' area/width covariances and the power-matching
/// uncertainty through the estimator to first order.
pub fn occupancy_from_asymmetry_with(
    fit_plus: &LorentzianFit,
    fit_minus: &LorentzianFit,
    options: &EstimateOptions,
) -> Result<OccupancyEstimate, EstimationError> {
    if !fit_plus.converged {
        return Err(EstimationError::Unconverged("plus"));
    }
    if !fit_minus.converged {
        return Err(EstimationError::Unconverged("minus"));
    }
    let (a_p, f_p) = (fit_plus.area, fit_plus.fwhm_hz);
    let (a_m, f_m) = (fit_minus.area, fit_minus.fwhm_hz);
    let coop = cooperativity_from_linewidths(f_p, f_m)?;
    let c = coop.value;
    let k = options.photon_energy_ratio;
    if !(k > 0.0 && k.is_finite()) {
        return Err(EstimationError::InvalidInput(format!(
            "photon energy ratio must be finite and > 0, got {k}"
        )));
    }
    let eta = eta_prime(k * a_m, a_p, c)?;
    if !(eta > 0.0) {
        return Err(EstimationError::NonPositiveAsymmetry(eta));
    }
    let ratio = k * a_m / a_p;
    let n_c = 1.0 / eta;
    let n_plus = n_c / (1.0 + c);
    let n_minus = n_c / (1.0 - c);

    // Covariance of (R, C) where R = I_-/I_+.
    let sigma_p = options.power_mismatch_rel95 / Z95;
    let s = f_p + f_m;
    let dc_dfp = 2.0 * f_m / (s * s);
    let dc_dfm = -2.0 * f_p / (s * s);
    let var_r = (ratio / a_p).powi(2) * fit_plus.area_variance()
        + (k / a_p).powi(2) * fit_minus.area_variance()
        + (ratio * sigma_p).powi(2);
    let var_c =
        dc_dfp.powi(2) * fit_plus.fwhm_variance() + dc_dfm.powi(2) * fit_minus.fwhm_variance();
    let cov_rc = (-ratio / a_p) * dc_dfp * fit_plus.area_fwhm_covariance()
        + (k / a_p) * dc_dfm * fit_minus.area_fwhm_covariance();
    let half = |g: (f64, f64)| {
        let var = g.0 * g.0 * var_r + 2.0 * g.0 * g.1 * cov_rc + g.1 * g.1 * var_c;
        Z95 * var.max(0.0).sqrt()
    };

    let g_eta = (
        1.0 / (1.0 + c),
        -ratio / (1.0 + c).powi(2) - 1.0 / (1.0 - c).powi(2),
    );
    let g_nc = (-g_eta.0 / (eta * eta), -g_eta.1 / (eta * eta));
    let g_plus = (
        g_nc.0 / (1.0 + c),
        g_nc.1 / (1.0 + c) - n_c / (1.0 + c).powi(2),
    );
    let g_minus = (
        g_nc.0 / (1.0 - c),
        g_nc.1 / (1.0 - c) + n_c / (1.0 - c).powi(2),
    );

    Ok(OccupancyEstimate {
        n_c_est: n_c,
        c_r_est: c,
        eta_prime: eta,
        n_plus_est: n_plus,
        n_minus_est: n_minus,
        ci95: EstimateIntervals {
            n_c: half(g_nc),
            c_r: half((0.0, 1.0)),
            eta_prime: half(g_eta),
            n_plus: half(g_plus),
            n_minus: half(g_minus),
        },
        i_plus: a_p,
        i_minus: a_m,
        gamma_plus_hz: f_p,
        gamma_minus_hz: f_m,
        area_ratio: ratio,
        power_mismatch_rel95: options.power_mismatch_rel95,
        cooperativity_negative: coop.negative,
        fit_plus: fit_plus.clone(),
        fit_minus: fit_minus.clone(),
    })
}
