//! Parameter model and closed-form rates for a two-optical-mode, one-mechanical-mode
//! optomechanical cavity.
//!
//! All rates and frequencies are stored as angular frequencies (rad/s). Conversion
//! from the ordinary-frequency (Hz) values used in configuration files happens at
//! the boundary, through the `*_hz` constructors.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;

/// Relative tolerance used when checking that a read-out detuning sits on a sideband.
const DETUNING_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("{param}: {message}")]
    InvalidParameter {
        param: &'static str,
        message: String,
    },
    #[error("drive targets the {drive:?} mode but the optical mode is {mode:?}")]
    RoleMismatch { mode: ModeRole, drive: ModeRole },
    #[error("read-out detuning {detuning:e} rad/s is not +/- omega_m ({omega_m:e} rad/s)")]
    NotOnSideband { detuning: f64, omega_m: f64 },
    #[error(
        "read-out cooperativity {0} >= 1: back-action dominates and the occupancy model is invalid"
    )]
    CooperativityTooLarge(f64),
}

fn invalid(param: &'static str, message: impl Into<String>) -> PhysicsError {
    PhysicsError::InvalidParameter {
        param,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeRole {
    Cooling,
    Readout,
}

/// One optical cavity resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalModeParams {
    pub omega: f64,
    /// Total energy decay rate.
    pub kappa: f64,
    /// Extrinsic (waveguide) part of `kappa`.
    pub kappa_e: f64,
    /// Vacuum optomechanical coupling rate.
    pub g0: f64,
    pub role: ModeRole,
}

impl OpticalModeParams {
    pub fn new(
        role: ModeRole,
        omega: f64,
        kappa: f64,
        kappa_e: f64,
        g0: f64,
    ) -> Result<Self, PhysicsError> {
        let mode = Self {
            omega,
            kappa,
            kappa_e,
            g0,
            role,
        };
        mode.validate()?;
        Ok(mode)
    }

    /// Builds a mode from ordinary frequencies (Hz), i.e. the `x/2pi` values.
    pub fn from_hz(
        role: ModeRole,
        frequency_hz: f64,
        kappa_hz: f64,
        kappa_e_hz: f64,
        g0_hz: f64,
    ) -> Result<Self, PhysicsError> {
        Self::new(
            role,
            TAU * frequency_hz,
            TAU * kappa_hz,
            TAU * kappa_e_hz,
            TAU * g0_hz,
        )
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(invalid("omega", format!("must be > 0, got {}", self.omega)));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(invalid("kappa", format!("must be > 0, got {}", self.kappa)));
        }
        if !(self.kappa_e.is_finite() && self.kappa_e >= 0.0) {
            return Err(invalid(
                "kappa_e",
                format!("must be >= 0, got {}", self.kappa_e),
            ));
        }
        if self.kappa_e > self.kappa {
            return Err(invalid(
                "kappa_e",
                format!(
                    "extrinsic decay rate {} must not exceed total decay rate kappa {}",
                    self.kappa_e, self.kappa
                ),
            ));
        }
        if !(self.g0.is_finite() && self.g0 >= 0.0) {
            return Err(invalid("g0", format!("must be >= 0, got {}", self.g0)));
        }
        Ok(())
    }

    /// Fraction of intracavity decay that leaves through the waveguide.
    pub fn coupling_ratio(&self) -> f64 {
        self.kappa_e / self.kappa
    }
}

/// The mechanical breathing mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanicalModeParams {
    pub omega_m: f64,
    /// Intrinsic damping rate to the thermal bath.
    pub gamma_i: f64,
    /// Bath phonon occupancy.
    pub n_b: f64,
    /// Zero-point fluctuation amplitude (m).
    pub x_zpf: f64,
}

impl MechanicalModeParams {
    pub fn new(omega_m: f64, gamma_i: f64, n_b: f64, x_zpf: f64) -> Result<Self, PhysicsError> {
        let mech = Self {
            omega_m,
            gamma_i,
            n_b,
            x_zpf,
        };
        mech.validate()?;
        Ok(mech)
    }

    pub fn from_hz(
        frequency_hz: f64,
        gamma_i_hz: f64,
        n_b: f64,
        x_zpf: f64,
    ) -> Result<Self, PhysicsError> {
        Self::new(TAU * frequency_hz, TAU * gamma_i_hz, n_b, x_zpf)
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.omega_m.is_finite() && self.omega_m > 0.0) {
            return Err(invalid(
                "omega_m",
                format!("must be > 0, got {}", self.omega_m),
            ));
        }
        if !(self.gamma_i.is_finite() && self.gamma_i > 0.0) {
            return Err(invalid(
                "gamma_i",
                format!("must be > 0, got {}", self.gamma_i),
            ));
        }
        if !(self.n_b.is_finite() && self.n_b >= 0.0) {
            return Err(invalid("n_b", format!("must be >= 0, got {}", self.n_b)));
        }
        if !(self.x_zpf.is_finite() && self.x_zpf > 0.0) {
            return Err(invalid("x_zpf", format!("must be > 0, got {}", self.x_zpf)));
        }
        Ok(())
    }

    /// Intrinsic mechanical quality factor.
    pub fn quality_factor(&self) -> f64 {
        self.omega_m / self.gamma_i
    }
}

/// A laser beam addressing one cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveState {
    pub target: ModeRole,
    /// Cavity minus laser angular frequency.
    pub detuning: f64,
    /// Mean intracavity photon number.
    pub n_photons: f64,
}

impl DriveState {
    pub fn new(target: ModeRole, detuning: f64, n_photons: f64) -> Result<Self, PhysicsError> {
        if !detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if !(n_photons.is_finite() && n_photons >= 0.0) {
            return Err(invalid(
                "n_photons",
                format!("must be >= 0, got {n_photons}"),
            ));
        }
        Ok(Self {
            target,
            detuning,
            n_photons,
        })
    }

    /// Red-detuned drive at `detuning = +omega_m`.
    pub fn red_sideband(
        target: ModeRole,
        mech: &MechanicalModeParams,
        n_photons: f64,
    ) -> Result<Self, PhysicsError> {
        Self::new(target, mech.omega_m, n_photons)
    }

    /// Blue-detuned drive at `detuning = -omega_m`.
    pub fn blue_sideband(
        target: ModeRole,
        mech: &MechanicalModeParams,
        n_photons: f64,
    ) -> Result<Self, PhysicsError> {
        Self::new(target, -mech.omega_m, n_photons)
    }

    /// Same beam with the detuning sign flipped.
    pub fn mirrored(&self) -> Self {
        Self {
            detuning: -self.detuning,
            ..*self
        }
    }

    /// Laser angular frequency given the cavity it addresses.
    pub fn laser_omega(&self, mode: &OpticalModeParams) -> f64 {
        mode.omega - self.detuning
    }
}

/// Which read-out detuning a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sideband {
    /// `detuning = +omega_m`: anti-Stokes-weighted spectrum, area proportional to `n`.
    Plus,
    /// `detuning = -omega_m`: Stokes-weighted spectrum, area proportional to `n + 1`.
    Minus,
}

impl Sideband {
    pub fn sign(self) -> f64 {
        match self {
            Sideband::Plus => 1.0,
            Sideband::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sideband::Plus => "plus",
            Sideband::Minus => "minus",
        }
    }

    /// Classifies a read-out detuning, which must equal `+/- omega_m`.
    pub fn of_detuning(detuning: f64, omega_m: f64) -> Result<Self, PhysicsError> {
        let tol = DETUNING_RTOL * omega_m.abs();
        if (detuning - omega_m).abs() <= tol {
            Ok(Sideband::Plus)
        } else if (detuning + omega_m).abs() <= tol {
            Ok(Sideband::Minus)
        } else {
            Err(PhysicsError::NotOnSideband { detuning, omega_m })
        }
    }
}

/// Read-out back-action on a mode already damped by the cooling beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionState {
    pub gamma_c: f64,
    /// `gamma_i + gamma_c`: damping with the cooling beam alone.
    pub gamma_total: f64,
    pub n_cooled: f64,
    pub c_r: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub n_plus: f64,
    pub n_minus: f64,
}

impl BackactionState {
    /// Assembles the state from a cooled mode and a read-out cooperativity.
    pub fn from_cooperativity(
        gamma_total: f64,
        gamma_c: f64,
        n_cooled: f64,
        c_r: f64,
    ) -> Result<Self, PhysicsError> {
        if !(c_r.is_finite() && c_r >= 0.0) {
            return Err(invalid("c_r", format!("must be >= 0, got {c_r}")));
        }
        if c_r >= 1.0 {
            return Err(PhysicsError::CooperativityTooLarge(c_r));
        }
        if !(gamma_total.is_finite() && gamma_total > 0.0) {
            return Err(invalid(
                "gamma_total",
                format!("must be > 0, got {gamma_total}"),
            ));
        }
        if !(n_cooled.is_finite() && n_cooled >= 0.0) {
            return Err(invalid("n_cooled", format!("must be >= 0, got {n_cooled}")));
        }
        Ok(Self {
            gamma_c,
            gamma_total,
            n_cooled,
            c_r,
            gamma_plus: gamma_total * (1.0 + c_r),
            gamma_minus: gamma_total * (1.0 - c_r),
            n_plus: n_cooled / (1.0 + c_r),
            n_minus: n_cooled / (1.0 - c_r),
        })
    }

    /// Total damping and occupancy seen at the given read-out detuning.
    pub fn at(&self, side: Sideband) -> (f64, f64) {
        match side {
            Sideband::Plus => (self.gamma_plus, self.n_plus),
            Sideband::Minus => (self.gamma_minus, self.n_minus),
        }
    }

    /// `(gamma_+ + gamma_-)/2`, equal to `gamma_total` in this model.
    pub fn gamma_bar(&self) -> f64 {
        0.5 * (self.gamma_plus + self.gamma_minus)
    }
}

/// Bose-Einstein occupancy of a mode at angular frequency `omega_m` and temperature `t` (K).
pub fn bose_occupancy(omega_m: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega_m / (K_B * t);
    1.0 / x.exp_m1()
}

/// Temperature at which a mode at `omega_m` holds `n` thermal quanta on average.
pub fn bath_temperature(omega_m: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    HBAR * omega_m / (K_B * (1.0 / n).ln_1p())
}

/// Anti-Stokes (`A_+`) and Stokes (`A_-`) motional scattering rates of a drive.
pub fn scattering_rates(
    mode: &OpticalModeParams,
    mech: &MechanicalModeParams,
    drive: &DriveState,
) -> Result<(f64, f64), PhysicsError> {
    check_role(mode, drive)?;
    Ok(scattering_rates_unchecked(mode, mech.omega_m, drive))
}

pub(crate) fn scattering_rates_unchecked(
    mode: &OpticalModeParams,
    omega_m: f64,
    drive: &DriveState,
) -> (f64, f64) {
    let numerator = mode.g0 * mode.g0 * mode.kappa * drive.n_photons;
    let half_kappa_sq = 0.25 * mode.kappa * mode.kappa;
    let plus = numerator / ((drive.detuning + omega_m).powi(2) + half_kappa_sq);
    let minus = numerator / ((drive.detuning - omega_m).powi(2) + half_kappa_sq);
    (plus, minus)
}

fn check_role(mode: &OpticalModeParams, drive: &DriveState) -> Result<(), PhysicsError> {
    if mode.role != drive.target {
        return Err(PhysicsError::RoleMismatch {
            mode: mode.role,
            drive: drive.target,
        });
    }
    Ok(())
}

/// Optical damping `4 g^2 n / kappa` added by a red-sideband cooling beam.
pub fn cooling_rate(mode: &OpticalModeParams, drive: &DriveState) -> Result<f64, PhysicsError> {
    if mode.role != ModeRole::Cooling {
        return Err(PhysicsError::RoleMismatch {
            mode: mode.role,
            drive: ModeRole::Cooling,
        });
    }
    check_role(mode, drive)?;
    Ok(4.0 * mode.g0 * mode.g0 * drive.n_photons / mode.kappa)
}

/// Occupancy of the mode under back-action cooling alone, `gamma_i n_b / (gamma_i + gamma_c)`.
///
/// This is the deep resolved-sideband form; the quantum back-action floor of
/// order `(kappa/4 omega_m)^2` is not included.
pub fn cooled_occupancy(mech: &MechanicalModeParams, gamma_c: f64) -> f64 {
    mech.gamma_i * mech.n_b / (mech.gamma_i + gamma_c)
}

/// Back-action of a weak read-out beam parked on one of the two mechanical sidebands.
pub fn readout_backaction(
    mech: &MechanicalModeParams,
    gamma_c: f64,
    readout_mode: &OpticalModeParams,
    readout_drive: &DriveState,
) -> Result<BackactionState, PhysicsError> {
    check_role(readout_mode, readout_drive)?;
    Sideband::of_detuning(readout_drive.detuning, mech.omega_m)?;
    if !(gamma_c.is_finite() && gamma_c >= 0.0) {
        return Err(invalid("gamma_c", format!("must be >= 0, got {gamma_c}")));
    }
    let (a_plus, a_minus) = scattering_rates_unchecked(readout_mode, mech.omega_m, readout_drive);
    let gamma_total = mech.gamma_i + gamma_c;
    let c_r = (a_plus - a_minus).abs() / gamma_total;
    BackactionState::from_cooperativity(gamma_total, gamma_c, cooled_occupancy(mech, gamma_c), c_r)
}

/// Intracavity photon number for an input power `p_in` (W) at the given detuning,
/// `n = P kappa_e / (hbar omega_l (detuning^2 + kappa^2/4))`.
pub fn photons_from_power(mode: &OpticalModeParams, p_in: f64, detuning: f64) -> f64 {
    let omega_l = mode.omega - detuning;
    p_in * mode.kappa_e / (HBAR * omega_l * (detuning * detuning + 0.25 * mode.kappa * mode.kappa))
}

/// Optional lookup for absorption heating: bath occupancy and intrinsic damping as a
/// function of cooling-beam photon number, linearly interpolated and clamped at the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingTable {
    pub n_c: Vec<f64>,
    pub n_b: Vec<f64>,
    /// Angular intrinsic damping at each `n_c`.
    pub gamma_i: Vec<f64>,
}

impl HeatingTable {
    pub fn new(n_c: Vec<f64>, n_b: Vec<f64>, gamma_i: Vec<f64>) -> Result<Self, PhysicsError> {
        if n_c.is_empty() || n_c.len() != n_b.len() || n_c.len() != gamma_i.len() {
            return Err(invalid(
                "heating",
                "n_c, n_b and gamma_i must be non-empty and of equal length",
            ));
        }
        if n_c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("heating.n_c", "must be strictly increasing"));
        }
        if n_b.iter().any(|&v| !(v >= 0.0)) || gamma_i.iter().any(|&v| !(v > 0.0)) {
            return Err(invalid("heating", "n_b must be >= 0 and gamma_i > 0"));
        }
        Ok(Self { n_c, n_b, gamma_i })
    }

    /// Mechanical parameters at cooling photon number `n_c`.
    pub fn apply(&self, mech: &MechanicalModeParams, n_c: f64) -> MechanicalModeParams {
        MechanicalModeParams {
            n_b: interpolate(&self.n_c, &self.n_b, n_c),
            gamma_i: interpolate(&self.n_c, &self.gamma_i, n_c),
            ..*mech
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let hi = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[hi - 1], xs[hi]);
    let t = (x - x0) / (x1 - x0);
    ys[hi - 1] + t * (ys[hi] - ys[hi - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn device_mech() -> MechanicalModeParams {
        MechanicalModeParams::from_hz(3.99e9, 43e3, 94.0, 2.7e-15).unwrap()
    }

    fn readout() -> OpticalModeParams {
        OpticalModeParams::from_hz(ModeRole::Readout, 194.1e12, 1.0e9, 300e6, 430e3).unwrap()
    }

    fn cooling() -> OpticalModeParams {
        OpticalModeParams::from_hz(ModeRole::Cooling, 205.3e12, 390e6, 46e6, 960e3).unwrap()
    }

    #[test]
    fn bose_occupancy_values() {
        let omega_m = TAU * 3.99e9;
        assert!((bose_occupancy(omega_m, 18.0) - 94.0).abs() <= 0.5);
        assert_eq!(bose_occupancy(omega_m, 0.0), 0.0);
        // High-temperature expansion kT/(hbar w) - 1/2.
        let n = bose_occupancy(omega_m, 300.0);
        let classical = K_B * 300.0 / (HBAR * omega_m);
        assert_relative_eq!(n, classical - 0.5, max_relative = 1e-6);
        assert!((n - 1566.0).abs() / classical < 1e-3);
    }

    #[test]
    fn bath_temperature_inverts_bose() {
        let omega_m = TAU * 3.99e9;
        assert!((bath_temperature(omega_m, 94.0) - 18.0).abs() < 0.2);
        let t = 4.2;
        assert_relative_eq!(
            bath_temperature(omega_m, bose_occupancy(omega_m, t)),
            t,
            max_relative = 1e-12
        );
    }

    #[test]
    fn quality_factor_matches_device() {
        let q = device_mech().quality_factor();
        assert!((q - 9.2e4).abs() / 9.2e4 < 0.01, "Q = {q}");
    }

    #[test]
    fn scattering_rates_at_red_sideband() {
        let mech = device_mech();
        let mode = readout();
        let drive = DriveState::red_sideband(ModeRole::Readout, &mech, 10.0).unwrap();
        let (a_plus, a_minus) = scattering_rates(&mode, &mech, &drive).unwrap();
        assert_relative_eq!(
            a_minus,
            4.0 * mode.g0 * mode.g0 * 10.0 / mode.kappa,
            max_relative = 1e-14
        );
        assert!((a_minus / TAU - 7.40e3).abs() < 5.0);
        assert!((a_plus / TAU - 28.9).abs() < 0.05);
    }

    #[test]
    fn scattering_rates_reject_role_mismatch() {
        let mech = device_mech();
        let drive = DriveState::red_sideband(ModeRole::Cooling, &mech, 1.0).unwrap();
        assert!(matches!(
            scattering_rates(&readout(), &mech, &drive),
            Err(PhysicsError::RoleMismatch { .. })
        ));
    }

    #[test]
    fn cooling_rate_values() {
        let mech = device_mech();
        let mode = cooling();
        let off = DriveState::red_sideband(ModeRole::Cooling, &mech, 0.0).unwrap();
        assert_eq!(cooling_rate(&mode, &off).unwrap(), 0.0);

        let drive = DriveState::red_sideband(ModeRole::Cooling, &mech, 100.0).unwrap();
        let gamma_c = cooling_rate(&mode, &drive).unwrap();
        assert!((gamma_c / TAU - 945e3).abs() < 1e3);

        // Deep resolved-sideband limit: the red drive makes A_- resonant, and the
        // net scattering |A_+ - A_-| approaches gamma_c.
        let (a_plus, a_minus) = scattering_rates(&mode, &mech, &drive).unwrap();
        let net = (a_plus - a_minus).abs();
        let bound = (mode.kappa / (4.0 * mech.omega_m)).powi(2);
        assert!(
            (net - gamma_c).abs() / gamma_c <= bound,
            "{net} vs {gamma_c}"
        );
    }

    #[test]
    fn cooled_occupancy_values() {
        let mech = device_mech();
        assert_eq!(cooled_occupancy(&mech, 0.0), mech.n_b);
        let n = cooled_occupancy(&mech, TAU * 945.3e3);
        assert!((n - 4.09).abs() < 0.005, "{n}");
        // gamma_bar tuned to gamma_i n_b / 2.6.
        let gamma_c = mech.gamma_i * mech.n_b / 2.6 - mech.gamma_i;
        assert_relative_eq!(cooled_occupancy(&mech, gamma_c), 2.6, max_relative = 1e-12);
    }

    #[test]
    fn readout_backaction_without_readout_beam() {
        let mech = device_mech();
        let drive = DriveState::red_sideband(ModeRole::Readout, &mech, 0.0).unwrap();
        let gamma_c = TAU * 1e6;
        let back = readout_backaction(&mech, gamma_c, &readout(), &drive).unwrap();
        assert_eq!(back.c_r, 0.0);
        assert_eq!(back.gamma_plus, mech.gamma_i + gamma_c);
        assert_eq!(back.gamma_minus, mech.gamma_i + gamma_c);
        assert_eq!(back.n_plus, back.n_cooled);
        assert_eq!(back.n_minus, back.n_cooled);
    }

    #[test]
    fn backaction_occupancies_at_three_percent() {
        let back = BackactionState::from_cooperativity(1.0, 0.9, 2.6, 0.03).unwrap();
        assert!((back.n_plus - 2.524).abs() < 5e-4);
        assert!((back.n_minus - 2.680).abs() < 5e-4);
    }

    #[test]
    fn readout_backaction_requires_sideband_detuning() {
        let mech = device_mech();
        let drive = DriveState::new(ModeRole::Readout, 0.5 * mech.omega_m, 1.0).unwrap();
        assert!(matches!(
            readout_backaction(&mech, 0.0, &readout(), &drive),
            Err(PhysicsError::NotOnSideband { .. })
        ));
    }

    #[test]
    fn readout_backaction_rejects_large_cooperativity() {
        let mech = device_mech();
        // No cooling, a strong read-out beam: C_r = 7.37 kHz * n / 43 kHz.
        let drive = DriveState::red_sideband(ModeRole::Readout, &mech, 100.0).unwrap();
        assert!(matches!(
            readout_backaction(&mech, 0.0, &readout(), &drive),
            Err(PhysicsError::CooperativityTooLarge(_))
        ));
    }

    #[test]
    fn kappa_e_above_kappa_is_rejected() {
        let err = OpticalModeParams::from_hz(ModeRole::Readout, 194e12, 1e9, 2e9, 1e5).unwrap_err();
        assert!(err.to_string().contains("kappa_e"));
        assert!(err.to_string().contains("must not exceed"));
    }

    #[test]
    fn photons_from_power_round_trip() {
        let mode = readout();
        let detuning = TAU * 3.99e9;
        let n = photons_from_power(&mode, 1e-6, detuning);
        let omega_l = mode.omega - detuning;
        let p = n * HBAR * omega_l * (detuning * detuning + 0.25 * mode.kappa * mode.kappa)
            / mode.kappa_e;
        assert_relative_eq!(p, 1e-6, max_relative = 1e-12);
    }

    #[test]
    fn heating_table_interpolates_and_clamps() {
        let table = HeatingTable::new(vec![0.0, 100.0], vec![94.0, 104.0], vec![1.0, 3.0]).unwrap();
        let mech = device_mech();
        let at = table.apply(&mech, 50.0);
        assert_relative_eq!(at.n_b, 99.0);
        assert_relative_eq!(at.gamma_i, 2.0);
        assert_eq!(table.apply(&mech, 500.0).n_b, 104.0);
        assert!(HeatingTable::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn scattering_mirror_symmetry(detuning_ghz in -20.0f64..20.0, n in 0.0f64..1e3) {
            let mech = device_mech();
            let mode = readout();
            let drive = DriveState::new(ModeRole::Readout, TAU * detuning_ghz * 1e9, n).unwrap();
            let (a_plus, _) = scattering_rates(&mode, &mech, &drive).unwrap();
            let (_, a_minus_mirror) = scattering_rates(&mode, &mech, &drive.mirrored()).unwrap();
            prop_assert_eq!(a_plus, a_minus_mirror);
            prop_assert!(a_plus >= 0.0);
        }

        #[test]
        fn phonon_flux_identity(c_r in 0.0f64..0.999, n_c in 0.01f64..1e3, gamma in 1.0f64..1e9) {
            let back = BackactionState::from_cooperativity(gamma, 0.0, n_c, c_r).unwrap();
            let lhs = back.gamma_plus * back.n_plus;
            let rhs = back.gamma_minus * back.n_minus;
            prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * lhs);
            let damping_ratio = back.gamma_minus / back.gamma_plus;
            let occupancy_ratio = back.n_plus / back.n_minus;
            prop_assert!((damping_ratio - occupancy_ratio).abs() <= 4.0 * f64::EPSILON);
            prop_assert!(back.gamma_plus >= back.gamma_minus);
        }

        #[test]
        fn cooled_occupancy_monotone(a in 0.0f64..1e8, b in 0.0f64..1e8) {
            let mech = device_mech();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(cooled_occupancy(&mech, hi) <= cooled_occupancy(&mech, lo));
        }
    }
}
