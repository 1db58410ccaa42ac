//! Scenario files, the cooling-power sweep and its report tables.

mod report;
mod scenario;

use std::f64::consts::TAU;
use std::path::PathBuf;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    calibrated_occupancy, cooperativity_from_linewidths, corrected_occupancy, fit_lorentzian_with,
    occupancy_from_asymmetry_with, ChainCalibration, EstimateOptions, EstimationError, FitError,
    FitOptions, LorentzianFit, OccupancyEstimate,
};
use crate::physics::{cooling_rate, readout_backaction, DriveState, PhysicsError, Sideband};
use crate::spectra::{
    detected_psd, optical_psd, sideband_areas, simulate_trace, FrequencyGrid, SpectraError,
    SpectrumTrace, Units,
};

pub use report::{report, ReportTables};
pub use scenario::{
    DetectionConfig, DriveConfig, DriveSection, GridSettings, HeatingConfig, MechanicsConfig,
    NoiseSettings, OpticalConfig, OpticalSection, Scenario, ScenarioConfig, Spacing, SweepConfig,
    MAX_READOUT_COOPERATIVITY, WARN_READOUT_COOPERATIVITY,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario file: {0}")]
    Parse(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    pub(crate) fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("sweep has no points")]
    EmptySweep,
}

/// Model values at one cooling photon number. Rates in Hz, areas in detected V^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointTruth {
    pub n_c: f64,
    pub n_b: f64,
    pub gamma_i_hz: f64,
    pub gamma_c_hz: f64,
    pub gamma_plus_hz: f64,
    pub gamma_minus_hz: f64,
    pub gamma_bar_hz: f64,
    pub c_r: f64,
    /// Occupancy without the read-out beam.
    pub n_cooled: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    /// `gamma_i n_b / gamma_bar`.
    pub n_ideal: f64,
    pub i_plus: f64,
    pub i_minus: f64,
    pub eta_prime: f64,
    pub laser_plus_hz: f64,
    pub laser_minus_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    FitFailedPlus,
    FitFailedMinus,
    NonPositiveAsymmetry,
    EstimationFailed,
}

/// One sweep point: truth, estimates (empty where the estimator failed) and status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: usize,
    pub n_c: f64,
    pub n_b: f64,
    pub gamma_i_hz: f64,
    pub gamma_c_hz: f64,
    pub gamma_plus_hz: f64,
    pub gamma_minus_hz: f64,
    pub gamma_bar_hz: f64,
    pub c_r_true: f64,
    pub n_c_true: f64,
    pub n_plus_true: f64,
    pub n_minus_true: f64,
    pub n_ideal: f64,
    pub i_plus_true: f64,
    pub i_minus_true: f64,
    pub eta_prime_true: f64,
    pub status: PointStatus,
    pub message: String,
    pub gamma_plus_hz_est: Option<f64>,
    pub gamma_minus_hz_est: Option<f64>,
    pub gamma_bar_hz_est: Option<f64>,
    pub ci95_gamma_plus_hz: Option<f64>,
    pub ci95_gamma_minus_hz: Option<f64>,
    pub i_plus: Option<f64>,
    pub i_minus: Option<f64>,
    pub c_r_est: Option<f64>,
    pub ci95_c_r: Option<f64>,
    pub eta_prime_est: Option<f64>,
    pub ci95_eta_prime: Option<f64>,
    pub n_c_est: Option<f64>,
    pub ci95_n_c: Option<f64>,
    pub n_plus_est: Option<f64>,
    pub ci95_n_plus: Option<f64>,
    pub n_minus_est: Option<f64>,
    pub ci95_n_minus: Option<f64>,
    /// Occupancies from the calibrated gain chain, one per detuning.
    pub n_plus_cal: Option<f64>,
    pub n_minus_cal: Option<f64>,
    /// Mean of the two calibrated branches after removing read-out back-action.
    pub n_c_cal: Option<f64>,
    pub seed_plus: Option<u64>,
    pub seed_minus: Option<u64>,
    /// Multiplier applied to the minus-detuning signal to emulate power mismatch.
    pub power_factor: f64,
}

/// Two synthetic analyzer traces and the model behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSimulation {
    pub truth: PointTruth,
    pub plus: SpectrumTrace,
    pub minus: SpectrumTrace,
    pub power_factor: f64,
}

/// Fits and estimate for a pair of traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceAnalysis {
    pub fit_plus: Result<LorentzianFit, FitError>,
    pub fit_minus: Result<LorentzianFit, FitError>,
    /// Absent when either fit failed.
    pub estimate: Option<Result<OccupancyEstimate, EstimationError>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub record: SweepRecord,
    pub simulation: PointSimulation,
    pub analysis: TraceAnalysis,
}

/// Aggregate checks over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: usize,
    pub failures: usize,
    /// Largest `|n_c_est - n_c_true| / n_c_true` over successful points.
    pub max_rel_error: Option<f64>,
    /// Largest `|n_c_true - n_ideal| / n_c_true`.
    pub max_ideal_residual: f64,
    /// Largest `|n_c_true - n_ideal| / n_c_true - C_r`; non-positive when read-out
    /// back-action explains every deviation from the ideal curve.
    pub max_ideal_excess: f64,
    pub max_c_r_true: f64,
    pub terminal_n_c_true: f64,
    pub terminal_n_c_est: Option<f64>,
    pub terminal_ci95_n_c: Option<f64>,
    /// Fraction of successful points whose interval contains the truth.
    pub ci_coverage: Option<f64>,
    /// `n_c_true` strictly decreasing along the sweep.
    pub monotonic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub summary: SweepSummary,
}

/// Seeds for the plus trace, the minus trace and the power-mismatch draw of one point.
fn point_seeds(base: u64, index: usize) -> [u64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(base ^ index as u64);
    [rng.next_u64(), rng.next_u64(), rng.next_u64()]
}

/// Model values at cooling photon number `n_c`.
pub fn point_truth(scenario: &Scenario, n_c: f64) -> Result<PointTruth, ExperimentError> {
    let mech = scenario.mechanics_at(n_c);
    let gamma_c = cooling_rate(&scenario.cooling_mode, &scenario.cooling_drive(n_c)?)?;
    let drive_plus = scenario.readout_drive()?;
    let drive_minus = drive_plus.mirrored();
    let back = readout_backaction(&mech, gamma_c, &scenario.readout_mode, &drive_plus)?;
    let laser_plus = drive_plus.laser_omega(&scenario.readout_mode) / TAU;
    let laser_minus = drive_minus.laser_omega(&scenario.readout_mode) / TAU;
    let chain = &scenario.chain;
    let (up, _) = sideband_areas(&scenario.readout_mode, &mech, &back, &drive_plus)?;
    let (_, down) = sideband_areas(&scenario.readout_mode, &mech, &back, &drive_minus)?;
    let i_plus = up * chain.transduction(Units::PhotonsPerSecondPerHz, Some(laser_plus))?;
    let i_minus = down * chain.transduction(Units::PhotonsPerSecondPerHz, Some(laser_minus))?;
    let gamma_bar = back.gamma_bar();
    Ok(PointTruth {
        n_c,
        n_b: mech.n_b,
        gamma_i_hz: mech.gamma_i / TAU,
        gamma_c_hz: gamma_c / TAU,
        gamma_plus_hz: back.gamma_plus / TAU,
        gamma_minus_hz: back.gamma_minus / TAU,
        gamma_bar_hz: gamma_bar / TAU,
        c_r: back.c_r,
        n_cooled: back.n_cooled,
        n_plus: back.n_plus,
        n_minus: back.n_minus,
        n_ideal: mech.gamma_i * mech.n_b / gamma_bar,
        i_plus,
        i_minus,
        eta_prime: 1.0 / back.n_cooled,
        laser_plus_hz: laser_plus,
        laser_minus_hz: laser_minus,
    })
}

/// Synthesizes the analyzer traces at both read-out detunings for sweep point `index`.
///
/// Each trace is centered on its sideband and spans `span_linewidths` of its own
/// linewidth on either side. Randomness derives from `noise.seed ^ index` only.
pub fn simulate_point(
    scenario: &Scenario,
    index: usize,
    n_c: f64,
) -> Result<PointSimulation, ExperimentError> {
    let truth = point_truth(scenario, n_c)?;
    let mech = scenario.mechanics_at(n_c);
    let gamma_c = TAU * truth.gamma_c_hz;
    let drive_plus = scenario.readout_drive()?;
    let back = readout_backaction(&mech, gamma_c, &scenario.readout_mode, &drive_plus)?;
    let noise = scenario.noise;
    let [seed_plus, seed_minus, seed_power] = point_seeds(noise.seed, index);
    let power_factor = if noise.enabled && noise.power_mismatch_rel95 > 0.0 {
        let z: f64 = ChaCha8Rng::seed_from_u64(seed_power).sample(StandardNormal);
        (noise.power_mismatch_rel95 / 1.959_963_984_540_054 * z).exp()
    } else {
        1.0
    };

    let trace =
        |side: Sideband, seed: u64, factor: f64| -> Result<SpectrumTrace, ExperimentError> {
            let drive = match side {
                Sideband::Plus => drive_plus,
                Sideband::Minus => drive_plus.mirrored(),
            };
            let (gamma, _) = back.at(side);
            let grid = FrequencyGrid::centered(
                side.sign() * mech.omega_m / TAU,
                scenario.grid.span_linewidths * gamma / TAU,
                scenario.grid.n_points,
            )?;
            let optical = optical_psd(&scenario.readout_mode, &mech, &back, &drive, &grid)?;
            let detected = detected_psd(&optical.scaled(factor), &scenario.chain)?;
            Ok(if noise.enabled {
                simulate_trace(&detected, noise.n_averages, seed)?
            } else {
                detected
            })
        };
    Ok(PointSimulation {
        truth,
        plus: trace(Sideband::Plus, seed_plus, 1.0)?,
        minus: trace(Sideband::Minus, seed_minus, power_factor)?,
        power_factor,
    })
}

/// Fits both traces and, if both fits succeed, combines them into an occupancy.
pub fn analyze_traces(
    plus: &SpectrumTrace,
    minus: &SpectrumTrace,
    power_mismatch_rel95: f64,
) -> TraceAnalysis {
    let fit_plus = fit_lorentzian_with(plus, &FitOptions::default());
    let fit_minus = fit_lorentzian_with(minus, &FitOptions::default());
    let photon_energy_ratio = match (plus.meta.laser_hz, minus.meta.laser_hz) {
        (Some(lp), Some(lm)) if plus.meta.units != Units::PhotonsPerSecondPerHz => {
            EstimateOptions::photon_energy_ratio(lp, lm)
        }
        _ => 1.0,
    };
    let options = EstimateOptions {
        power_mismatch_rel95,
        photon_energy_ratio,
    };
    let estimate = match (&fit_plus, &fit_minus) {
        (Ok(p), Ok(m)) => Some(occupancy_from_asymmetry_with(p, m, &options)),
        _ => None,
    };
    TraceAnalysis {
        fit_plus,
        fit_minus,
        estimate,
    }
}

fn calibrated(
    scenario: &Scenario,
    fit: &LorentzianFit,
    drive: &DriveState,
    side: Sideband,
) -> Option<f64> {
    let chain = ChainCalibration::from(&scenario.chain);
    calibrated_occupancy(fit, &scenario.readout_mode, drive, &chain, side).ok()
}

fn build_record(
    scenario: &Scenario,
    index: usize,
    sim: &PointSimulation,
    analysis: &TraceAnalysis,
) -> SweepRecord {
    let t = &sim.truth;
    let (seed_plus, seed_minus) = (sim.plus.meta.seed, sim.minus.meta.seed);
    let mut record = SweepRecord {
        index,
        n_c: t.n_c,
        n_b: t.n_b,
        gamma_i_hz: t.gamma_i_hz,
        gamma_c_hz: t.gamma_c_hz,
        gamma_plus_hz: t.gamma_plus_hz,
        gamma_minus_hz: t.gamma_minus_hz,
        gamma_bar_hz: t.gamma_bar_hz,
        c_r_true: t.c_r,
        n_c_true: t.n_cooled,
        n_plus_true: t.n_plus,
        n_minus_true: t.n_minus,
        n_ideal: t.n_ideal,
        i_plus_true: t.i_plus,
        i_minus_true: t.i_minus,
        eta_prime_true: t.eta_prime,
        status: PointStatus::Ok,
        message: String::new(),
        gamma_plus_hz_est: None,
        gamma_minus_hz_est: None,
        gamma_bar_hz_est: None,
        ci95_gamma_plus_hz: None,
        ci95_gamma_minus_hz: None,
        i_plus: None,
        i_minus: None,
        c_r_est: None,
        ci95_c_r: None,
        eta_prime_est: None,
        ci95_eta_prime: None,
        n_c_est: None,
        ci95_n_c: None,
        n_plus_est: None,
        ci95_n_plus: None,
        n_minus_est: None,
        ci95_n_minus: None,
        n_plus_cal: None,
        n_minus_cal: None,
        n_c_cal: None,
        seed_plus,
        seed_minus,
        power_factor: sim.power_factor,
    };

    let fit_plus = match &analysis.fit_plus {
        Ok(f) if f.converged => Some(f),
        Ok(_) => {
            record.status = PointStatus::FitFailedPlus;
            record.message = "plus fit did not converge".into();
            None
        }
        Err(e) => {
            record.status = PointStatus::FitFailedPlus;
            record.message = format!("plus: {e}");
            None
        }
    };
    let fit_minus = match &analysis.fit_minus {
        Ok(f) if f.converged => Some(f),
        Ok(_) => {
            if record.status == PointStatus::Ok {
                record.status = PointStatus::FitFailedMinus;
                record.message = "minus fit did not converge".into();
            }
            None
        }
        Err(e) => {
            if record.status == PointStatus::Ok {
                record.status = PointStatus::FitFailedMinus;
                record.message = format!("minus: {e}");
            }
            None
        }
    };
    let drive_plus = scenario.readout_drive().expect("validated scenario");
    if let Some(f) = fit_plus {
        record.gamma_plus_hz_est = Some(f.fwhm_hz);
        record.ci95_gamma_plus_hz = Some(f.ci95.fwhm_hz);
        record.i_plus = Some(f.area);
        record.n_plus_cal = calibrated(scenario, f, &drive_plus, Sideband::Plus);
    }
    if let Some(f) = fit_minus {
        record.gamma_minus_hz_est = Some(f.fwhm_hz);
        record.ci95_gamma_minus_hz = Some(f.ci95.fwhm_hz);
        record.i_minus = Some(f.area);
        record.n_minus_cal = calibrated(scenario, f, &drive_plus.mirrored(), Sideband::Minus);
    }
    if let (Some(p), Some(m)) = (fit_plus, fit_minus) {
        record.gamma_bar_hz_est = Some(0.5 * (p.fwhm_hz + m.fwhm_hz));
        if let Ok(c) = cooperativity_from_linewidths(p.fwhm_hz, m.fwhm_hz) {
            record.c_r_est = Some(c.value);
            if let (Some(np), Some(nm)) = (record.n_plus_cal, record.n_minus_cal) {
                let nc_plus = corrected_occupancy(np, c.value, Sideband::Plus);
                let nc_minus = corrected_occupancy(nm, c.value, Sideband::Minus);
                record.n_c_cal = Some(0.5 * (nc_plus + nc_minus));
            }
        }
    }
    match &analysis.estimate {
        Some(Ok(est)) => {
            record.c_r_est = Some(est.c_r_est);
            record.ci95_c_r = Some(est.ci95.c_r);
            record.eta_prime_est = Some(est.eta_prime);
            record.ci95_eta_prime = Some(est.ci95.eta_prime);
            record.n_c_est = Some(est.n_c_est);
            record.ci95_n_c = Some(est.ci95.n_c);
            record.n_plus_est = Some(est.n_plus_est);
            record.ci95_n_plus = Some(est.ci95.n_plus);
            record.n_minus_est = Some(est.n_minus_est);
            record.ci95_n_minus = Some(est.ci95.n_minus);
        }
        Some(Err(EstimationError::NonPositiveAsymmetry(eta))) => {
            record.status = PointStatus::NonPositiveAsymmetry;
            record.message = format!("sideband asymmetry {eta:e} is not positive");
            record.eta_prime_est = Some(*eta);
        }
        Some(Err(e)) if record.status == PointStatus::Ok => {
            record.status = PointStatus::EstimationFailed;
            record.message = e.to_string();
        }
        _ => {}
    }
    record
}

/// Simulates, fits and estimates one sweep point, keeping the intermediate products.
pub fn run_point_detailed(
    scenario: &Scenario,
    index: usize,
    n_c: f64,
) -> Result<PointOutcome, ExperimentError> {
    let simulation = simulate_point(scenario, index, n_c)?;
    let analysis = analyze_traces(
        &simulation.plus,
        &simulation.minus,
        scenario.noise.power_mismatch_rel95,
    );
    let record = build_record(scenario, index, &simulation, &analysis);
    if record.status != PointStatus::Ok {
        log::warn!("sweep point {index} (n_c = {n_c}): {}", record.message);
    }
    Ok(PointOutcome {
        record,
        simulation,
        analysis,
    })
}

/// Runs one sweep point. Estimator failures are reported through `status`, not `Err`.
pub fn run_point(
    scenario: &Scenario,
    index: usize,
    n_c: f64,
) -> Result<SweepRecord, ExperimentError> {
    Ok(run_point_detailed(scenario, index, n_c)?.record)
}

/// Runs every sweep point (in parallel on the current rayon pool), in sweep order.
pub fn run_sweep_detailed(scenario: &Scenario) -> Result<Vec<PointOutcome>, ExperimentError> {
    if scenario.sweep.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    scenario
        .sweep
        .par_iter()
        .enumerate()
        .map(|(i, &n_c)| run_point_detailed(scenario, i, n_c))
        .collect()
}

pub fn run_sweep(scenario: &Scenario) -> Result<SweepResult, ExperimentError> {
    let records: Vec<SweepRecord> = run_sweep_detailed(scenario)?
        .into_iter()
        .map(|o| o.record)
        .collect();
    let summary = summarize(&records);
    Ok(SweepResult { records, summary })
}

pub fn summarize(records: &[SweepRecord]) -> SweepSummary {
    let ok: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| r.status == PointStatus::Ok)
        .collect();
    let rel = |r: &SweepRecord| r.n_c_est.map(|e| (e - r.n_c_true).abs() / r.n_c_true);
    let max_rel_error = ok.iter().filter_map(|r| rel(r)).reduce(f64::max);
    let residual = |r: &SweepRecord| (r.n_c_true - r.n_ideal).abs() / r.n_c_true;
    let covered = ok
        .iter()
        .filter(|r| match (r.n_c_est, r.ci95_n_c) {
            (Some(e), Some(ci)) => (e - r.n_c_true).abs() <= ci,
            _ => false,
        })
        .count();
    let last = records.last();
    SweepSummary {
        points: records.len(),
        failures: records.len() - ok.len(),
        max_rel_error,
        max_ideal_residual: records.iter().map(residual).fold(0.0, f64::max),
        max_ideal_excess: records
            .iter()
            .map(|r| residual(r) - r.c_r_true)
            .fold(f64::NEG_INFINITY, f64::max),
        max_c_r_true: records.iter().map(|r| r.c_r_true).fold(0.0, f64::max),
        terminal_n_c_true: last.map_or(f64::NAN, |r| r.n_c_true),
        terminal_n_c_est: last.and_then(|r| r.n_c_est),
        terminal_ci95_n_c: last.and_then(|r| r.ci95_n_c),
        ci_coverage: (!ok.is_empty()).then(|| covered as f64 / ok.len() as f64),
        monotonic: records.windows(2).all(|w| w[1].n_c_true < w[0].n_c_true),
    }
}
