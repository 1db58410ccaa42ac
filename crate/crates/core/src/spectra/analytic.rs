use std::f64::consts::{FRAC_2_PI, TAU};

use num_complex::Complex64;

use super::{
    FrequencyGrid, SpectraError, SpectrumTrace, TraceMeta, Units, MIN_POINTS_PER_LINEWIDTH,
};
use crate::physics::{
    scattering_rates_unchecked, BackactionState, DriveState, MechanicalModeParams, ModeRole,
    OpticalModeParams, PhysicsError, Sideband,
};

/// Lorentzian density in Hz with full width `fwhm` and integral `area`.
pub fn lorentzian_density(nu: f64, center: f64, fwhm: f64, area: f64) -> f64 {
    let d = nu - center;
    FRAC_2_PI * area * fwhm / (4.0 * d * d + fwhm * fwhm)
}

/// Quantum position autocorrelation `<x(t) x(0)>` of a damped oscillator with
/// occupancy `n_occ` and total (full-width) damping `gamma`.
pub fn autocorrelation(mech: &MechanicalModeParams, n_occ: f64, gamma: f64, t: f64) -> Complex64 {
    let decay = (-0.5 * gamma * t.abs()).exp();
    let phase = Complex64::from_polar(1.0, mech.omega_m * t);
    let x2 = mech.x_zpf * mech.x_zpf;
    x2 * decay * (n_occ * phase + (n_occ + 1.0) * phase.conj())
}

/// Two-sided displacement PSD at angular frequency `omega`, per unit ordinary frequency.
///
/// Positive frequencies carry the `n + 1` (emission) peak.
pub fn displacement_psd_at(mech: &MechanicalModeParams, n_occ: f64, gamma: f64, omega: f64) -> f64 {
    let hw2 = 0.25 * gamma * gamma;
    let x2 = mech.x_zpf * mech.x_zpf;
    x2 * (gamma * n_occ / ((mech.omega_m + omega).powi(2) + hw2)
        + gamma * (n_occ + 1.0) / ((mech.omega_m - omega).powi(2) + hw2))
}

/// Symmetric grid covering both displacement peaks and 100 linewidths beyond each,
/// with 8 points per linewidth.
pub fn default_displacement_grid(
    mech: &MechanicalModeParams,
    gamma: f64,
) -> Result<FrequencyGrid, SpectraError> {
    let fwhm_hz = gamma / TAU;
    let step = fwhm_hz / MIN_POINTS_PER_LINEWIDTH;
    let half_steps = ((mech.omega_m / TAU + 100.0 * fwhm_hz) / step).ceil();
    if !(half_steps.is_finite() && half_steps < 5e7) {
        return Err(SpectraError::InvalidArgument(format!(
            "damping {gamma:e} rad/s is too narrow for a full-span grid"
        )));
    }
    FrequencyGrid::centered(0.0, half_steps * step, 2 * half_steps as usize + 1)
}

/// Displacement PSD (m^2/Hz) sampled on a signed grid. Integrates to `x_zpf^2 (2n + 1)`.
pub fn displacement_psd(
    mech: &MechanicalModeParams,
    n_occ: f64,
    gamma: f64,
    grid: &FrequencyGrid,
) -> Result<SpectrumTrace, SpectraError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(SpectraError::InvalidArgument(format!(
            "damping must be > 0, got {gamma}"
        )));
    }
    if !(n_occ.is_finite() && n_occ >= 0.0) {
        return Err(SpectraError::InvalidArgument(format!(
            "occupancy must be >= 0, got {n_occ}"
        )));
    }
    let psd = grid
        .frequencies()
        .map(|f| displacement_psd_at(mech, n_occ, gamma, TAU * f))
        .collect();
    SpectrumTrace::new(*grid, psd, 0.0, TraceMeta::exact(Units::MetersSquaredPerHz))
}

fn readout_sideband(
    readout_mode: &OpticalModeParams,
    readout_drive: &DriveState,
    omega_m: f64,
) -> Result<Sideband, PhysicsError> {
    if readout_mode.role != ModeRole::Readout || readout_drive.target != ModeRole::Readout {
        return Err(PhysicsError::RoleMismatch {
            mode: readout_mode.role,
            drive: readout_drive.target,
        });
    }
    Sideband::of_detuning(readout_drive.detuning, omega_m)
}

/// Integrated sideband weights (photons/s) of the read-out spectrum: the Lorentzian
/// at `+omega_m` and the one at `-omega_m` about the laser line.
pub fn sideband_areas(
    readout_mode: &OpticalModeParams,
    mech: &MechanicalModeParams,
    back: &BackactionState,
    readout_drive: &DriveState,
) -> Result<(f64, f64), SpectraError> {
    let side = readout_sideband(readout_mode, readout_drive, mech.omega_m)?;
    let (_, n) = back.at(side);
    let (a_plus, a_minus) = scattering_rates_unchecked(readout_mode, mech.omega_m, readout_drive);
    let eta = readout_mode.coupling_ratio();
    Ok((eta * a_minus * n, eta * a_plus * (n + 1.0)))
}

/// Transmitted carrier flux (photons/s) of a drive holding `n_photons` in the cavity.
pub fn transmitted_carrier(mode: &OpticalModeParams, drive: &DriveState) -> f64 {
    if mode.kappa_e <= 0.0 {
        return 0.0;
    }
    let residual = 0.5 * mode.kappa - mode.kappa_e;
    drive.n_photons * (residual * residual + drive.detuning * drive.detuning) / mode.kappa_e
}

/// Transmitted read-out spectrum (photons/s/Hz) about the laser line, for a read-out
/// beam parked at `detuning = +/- omega_m`.
///
/// The delta-function carrier is returned in `carrier_power` rather than on the grid.
pub fn optical_psd(
    readout_mode: &OpticalModeParams,
    mech: &MechanicalModeParams,
    back: &BackactionState,
    readout_drive: &DriveState,
    grid: &FrequencyGrid,
) -> Result<SpectrumTrace, SpectraError> {
    let side = readout_sideband(readout_mode, readout_drive, mech.omega_m)?;
    let (gamma, _) = back.at(side);
    let fwhm_hz = gamma / TAU;
    let f_m = mech.omega_m / TAU;
    let step = grid.step();
    if step * MIN_POINTS_PER_LINEWIDTH > fwhm_hz {
        return Err(SpectraError::Unresolved {
            step_hz: step,
            fwhm_hz,
        });
    }
    if !grid.contains(f_m) && !grid.contains(-f_m) {
        return Err(SpectraError::MissesSideband {
            start_hz: grid.start,
            stop_hz: grid.stop,
            sideband_hz: f_m,
        });
    }
    let (area_up, area_down) = sideband_areas(readout_mode, mech, back, readout_drive)?;
    let psd = grid
        .frequencies()
        .map(|f| {
            lorentzian_density(f, f_m, fwhm_hz, area_up)
                + lorentzian_density(f, -f_m, fwhm_hz, area_down)
        })
        .collect();
    let meta = TraceMeta {
        units: Units::PhotonsPerSecondPerHz,
        detuning_hz: readout_drive.detuning / TAU,
        averages: None,
        seed: None,
        laser_hz: Some(readout_drive.laser_omega(readout_mode) / TAU),
    };
    SpectrumTrace::new(
        *grid,
        psd,
        transmitted_carrier(readout_mode, readout_drive),
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mech() -> MechanicalModeParams {
        MechanicalModeParams::from_hz(3.99e9, 43e3, 94.0, 2.7e-15).unwrap()
    }

    fn readout() -> OpticalModeParams {
        OpticalModeParams::from_hz(ModeRole::Readout, 194.1e12, 1.0e9, 300e6, 430e3).unwrap()
    }

    fn backaction(n_c: f64, c_r: f64) -> BackactionState {
        BackactionState::from_cooperativity(TAU * 1.5e6, TAU * 1.45e6, n_c, c_r).unwrap()
    }

    /// Window of `half` linewidths around one sideband with `per_fwhm` points per linewidth.
    fn window(center_hz: f64, fwhm_hz: f64, half: f64, per_fwhm: f64) -> FrequencyGrid {
        let n = (2.0 * half * per_fwhm) as usize + 1;
        FrequencyGrid::centered(center_hz, half * fwhm_hz, n).unwrap()
    }

    #[test]
    fn autocorrelation_at_zero_delay() {
        let m = mech();
        let x2 = m.x_zpf * m.x_zpf;
        let g = autocorrelation(&m, 2.6, 1e6, 0.0);
        assert_relative_eq!(g.re, x2 * 6.2, max_relative = 1e-14);
        assert_eq!(g.im, 0.0);
        assert_relative_eq!(
            autocorrelation(&m, 0.0, 1e6, 0.0).re,
            x2,
            max_relative = 1e-14
        );
    }

    #[test]
    fn displacement_peaks_carry_quantum_asymmetry() {
        let m = mech();
        let gamma = TAU * 1e6;
        let x2 = m.x_zpf * m.x_zpf;
        let n = 2.6;
        let up = displacement_psd_at(&m, n, gamma, m.omega_m);
        let down = displacement_psd_at(&m, n, gamma, -m.omega_m);
        assert_relative_eq!(up, 4.0 * (n + 1.0) * x2 / gamma, max_relative = 1e-6);
        assert_relative_eq!(down, 4.0 * n * x2 / gamma, max_relative = 1e-6);
        assert_relative_eq!(up / down, (n + 1.0) / n, max_relative = 1e-6);
        // Classical limit.
        let big = 1e4;
        let ratio = displacement_psd_at(&m, big, gamma, m.omega_m)
            / displacement_psd_at(&m, big, gamma, -m.omega_m);
        assert!((ratio - 1.0).abs() <= 1.0 / big + 1e-9);
    }

    #[test]
    fn displacement_window_integral_matches_truncated_lorentzian() {
        // Two windows of +/-20 gamma around +/-omega_m. The captured fraction of each
        // unit Lorentzian is (2/pi) atan(40); compare against that closed form.
        let m = mech();
        let gamma = TAU * 1e6;
        let fwhm_hz = gamma / TAU;
        let f_m = m.omega_m / TAU;
        let n = 2.6;
        let x2 = m.x_zpf * m.x_zpf;
        let up = displacement_psd(&m, n, gamma, &window(f_m, fwhm_hz, 20.0, 32.0)).unwrap();
        let down = displacement_psd(&m, n, gamma, &window(-f_m, fwhm_hz, 20.0, 32.0)).unwrap();
        let numeric = up.integral() + down.integral();
        let captured = FRAC_2_PI * 40f64.atan();
        let expected = x2 * (2.0 * n + 1.0) * captured;
        assert_relative_eq!(numeric, expected, max_relative = 5e-4);
        // The truncation alone is 1.6%: +/-20 gamma is too narrow for a 0.5% total.
        assert!(1.0 - captured > 0.005);
    }

    #[test]
    fn displacement_full_span_integral() {
        let m = MechanicalModeParams::from_hz(50e6, 43e3, 94.0, 2.7e-15).unwrap();
        let gamma = TAU * 1e6;
        let f_m = m.omega_m / TAU;
        let half = f_m + 100.0 * 1e6;
        let n_points = (2.0 * half / 1e6 * 8.0) as usize + 1;
        let grid = FrequencyGrid::centered(0.0, half, n_points).unwrap();
        let n = 2.6;
        let trace = displacement_psd(&m, n, gamma, &grid).unwrap();
        let x2 = m.x_zpf * m.x_zpf;
        assert_relative_eq!(trace.integral(), x2 * (2.0 * n + 1.0), max_relative = 5e-3);
    }

    #[test]
    fn optical_areas_follow_detuning() {
        let m = mech();
        let mode = readout();
        let back = backaction(2.6, 0.03);
        let f_m = m.omega_m / TAU;
        let plus = DriveState::red_sideband(ModeRole::Readout, &m, 10.0).unwrap();
        let minus = plus.mirrored();

        let (a_plus_p, a_minus_p) = scattering_rates_unchecked(&mode, m.omega_m, &plus);
        let (a_plus_m, _) = scattering_rates_unchecked(&mode, m.omega_m, &minus);
        let eta = mode.coupling_ratio();

        let (i_plus, _) = sideband_areas(&mode, &m, &back, &plus).unwrap();
        assert_relative_eq!(i_plus, eta * a_minus_p * back.n_plus, max_relative = 1e-14);
        let (_, i_minus) = sideband_areas(&mode, &m, &back, &minus).unwrap();
        assert_relative_eq!(
            i_minus,
            eta * a_plus_m * (back.n_minus + 1.0),
            max_relative = 1e-14
        );
        assert!(a_plus_p < a_minus_p);

        // Numerical area over +/-400 linewidths agrees with the analytic weight.
        let fwhm = back.gamma_plus / TAU;
        let grid = window(f_m, fwhm, 400.0, 10.0);
        let trace = optical_psd(&mode, &m, &back, &plus, &grid).unwrap();
        assert_relative_eq!(trace.integral(), i_plus, max_relative = 2e-3);
        assert!(trace.carrier_power > 0.0);
        assert_eq!(trace.meta.units, Units::PhotonsPerSecondPerHz);

        // Forward-model ratio closes the back-action-corrected asymmetry.
        let ratio = i_minus / i_plus;
        assert!((ratio - 1.4580).abs() < 1e-4, "{ratio}");
        let eta_prime = ratio / 1.03 - 1.0 / 0.97;
        assert_relative_eq!(eta_prime, 1.0 / 2.6, max_relative = 1e-12);
    }

    #[test]
    fn ground_state_has_no_anti_stokes_sideband() {
        let m = mech();
        let back = backaction(0.0, 0.0);
        let plus = DriveState::red_sideband(ModeRole::Readout, &m, 10.0).unwrap();
        let (i_plus, _) = sideband_areas(&readout(), &m, &back, &plus).unwrap();
        assert_eq!(i_plus, 0.0);
    }

    #[test]
    fn sideband_area_stable_under_refinement() {
        let m = mech();
        let back = backaction(2.6, 0.03);
        let plus = DriveState::red_sideband(ModeRole::Readout, &m, 10.0).unwrap();
        let fwhm = back.gamma_plus / TAU;
        let coarse = window(m.omega_m / TAU, fwhm, 10.0, 10.0);
        let fine = FrequencyGrid::new(coarse.start, coarse.stop, 2 * coarse.n_points - 1).unwrap();
        let a = optical_psd(&readout(), &m, &back, &plus, &coarse)
            .unwrap()
            .integral();
        let b = optical_psd(&readout(), &m, &back, &plus, &fine)
            .unwrap()
            .integral();
        assert!((a - b).abs() / b < 1e-3);
    }

    #[test]
    fn classical_rescaling_limit() {
        // (n_- + 1) gamma_- / (n_+ gamma_+) -> 1 as n_c grows.
        let mut last = f64::INFINITY;
        for n_c in [1.0, 10.0, 100.0, 1e4] {
            let back = backaction(n_c, 0.05);
            let r = (back.n_minus + 1.0) * back.gamma_minus / (back.n_plus * back.gamma_plus);
            assert!(r > 1.0 && r < last);
            last = r;
        }
        assert!((last - 1.0).abs() < 2e-4);
    }

    #[test]
    fn optical_psd_rejects_coarse_grid() {
        let m = mech();
        let back = backaction(2.6, 0.03);
        let plus = DriveState::red_sideband(ModeRole::Readout, &m, 10.0).unwrap();
        let grid = FrequencyGrid::centered(m.omega_m / TAU, 50e6, 64).unwrap();
        assert!(matches!(
            optical_psd(&readout(), &m, &back, &plus, &grid),
            Err(SpectraError::Unresolved { .. })
        ));
    }

    #[test]
    fn optical_psd_rejects_grid_without_sideband() {
        let m = mech();
        let back = backaction(2.6, 0.03);
        let plus = DriveState::red_sideband(ModeRole::Readout, &m, 10.0).unwrap();
        let grid = FrequencyGrid::centered(1e9, 1e6, 201).unwrap();
        assert!(matches!(
            optical_psd(&readout(), &m, &back, &plus, &grid),
            Err(SpectraError::MissesSideband { .. })
        ));
    }
}
