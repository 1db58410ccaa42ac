//! Analytic spectra, the detection chain, and Monte-Carlo trace generation.

mod analytic;
mod detection;
mod noise;
mod periodogram;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::PhysicsError;

pub use analytic::{
    autocorrelation, default_displacement_grid, displacement_psd, displacement_psd_at,
    lorentzian_density, optical_psd, sideband_areas, transmitted_carrier,
};
pub use detection::{detected_psd, DetectionChain};
pub use noise::{simulate_trace, OuEnvelope};
pub use periodogram::{periodogram, welch_psd};

/// Minimum number of grid points per mechanical linewidth accepted by [`optical_psd`].
pub const MIN_POINTS_PER_LINEWIDTH: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("grid step {step_hz:e} Hz does not resolve linewidth {fwhm_hz:e} Hz (need >= 8 points per linewidth)")]
    Unresolved { step_hz: f64, fwhm_hz: f64 },
    #[error("grid [{start_hz:e}, {stop_hz:e}] Hz contains neither mechanical sideband at +/-{sideband_hz:e} Hz")]
    MissesSideband {
        start_hz: f64,
        stop_hz: f64,
        sideband_hz: f64,
    },
    #[error("cannot convert a trace in {0} through the detection chain")]
    UnsupportedUnits(Units),
    #[error("photon-flux trace has no laser frequency; cannot convert to optical power")]
    MissingLaserFrequency,
    #[error("one-sided conversion needs a grid on one side of zero, got [{0:e}, {1:e}] Hz")]
    StraddlesZero(f64, f64),
    #[error("time series length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("{0}")]
    InvalidArgument(String),
}

/// Uniform frequency grid in Hz, inclusive of both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start: f64,
    pub stop: f64,
    pub n_points: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, n_points: usize) -> Result<Self, SpectraError> {
        if !(start.is_finite() && stop.is_finite()) {
            return Err(SpectraError::InvalidGrid(
                "end points must be finite".into(),
            ));
        }
        if stop <= start {
            return Err(SpectraError::InvalidGrid(format!(
                "stop {stop} must exceed start {start}"
            )));
        }
        if n_points < 8 {
            return Err(SpectraError::InvalidGrid(format!(
                "need at least 8 points, got {n_points}"
            )));
        }
        Ok(Self {
            start,
            stop,
            n_points,
        })
    }

    /// Grid of `n_points` centred on `center` covering `center +/- half_span`.
    pub fn centered(center: f64, half_span: f64, n_points: usize) -> Result<Self, SpectraError> {
        Self::new(center - half_span, center + half_span, n_points)
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.n_points - 1) as f64
    }

    pub fn frequency(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.stop
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.frequency(i))
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.start && f <= self.stop
    }

    /// Grid reflected through zero frequency (still ascending).
    pub fn mirrored(&self) -> Self {
        Self {
            start: -self.stop,
            stop: -self.start,
            n_points: self.n_points,
        }
    }
}

/// Physical units of a trace's PSD values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    /// Displacement PSD.
    MetersSquaredPerHz,
    /// Optical photon-flux PSD about the laser line.
    PhotonsPerSecondPerHz,
    WattsPerHz,
    /// Detector-voltage PSD.
    VoltsSquaredPerHz,
    /// Uncalibrated, e.g. a synthetic envelope.
    ArbitraryPerHz,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::MetersSquaredPerHz => "m^2/Hz",
            Units::PhotonsPerSecondPerHz => "photons/s/Hz",
            Units::WattsPerHz => "W/Hz",
            Units::VoltsSquaredPerHz => "V^2/Hz",
            Units::ArbitraryPerHz => "arb/Hz",
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Units {
    type Err = SpectraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Units::MetersSquaredPerHz,
            Units::PhotonsPerSecondPerHz,
            Units::WattsPerHz,
            Units::VoltsSquaredPerHz,
            Units::ArbitraryPerHz,
        ]
        .into_iter()
        .find(|u| u.as_str() == s)
        .ok_or_else(|| SpectraError::InvalidTrace(format!("unknown units `{s}`")))
    }
}

/// Acquisition metadata carried alongside a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub units: Units,
    /// Read-out detuning (Hz); zero where not applicable.
    pub detuning_hz: f64,
    /// Number of averaged periodograms; `None` for an exact (noiseless) spectrum.
    pub averages: Option<u32>,
    pub seed: Option<u64>,
    /// Laser frequency (Hz) for optical traces.
    #[serde(skip)]
    pub laser_hz: Option<f64>,
}

impl TraceMeta {
    pub fn exact(units: Units) -> Self {
        Self {
            units,
            detuning_hz: 0.0,
            averages: None,
            seed: None,
            laser_hz: None,
        }
    }
}

/// A sampled PSD on a uniform grid, plus the weight of any delta-function carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub grid: FrequencyGrid,
    pub psd: Vec<f64>,
    pub carrier_power: f64,
    pub meta: TraceMeta,
}

impl SpectrumTrace {
    pub fn new(
        grid: FrequencyGrid,
        psd: Vec<f64>,
        carrier_power: f64,
        meta: TraceMeta,
    ) -> Result<Self, SpectraError> {
        let trace = Self {
            grid,
            psd,
            carrier_power,
            meta,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), SpectraError> {
        if self.psd.len() != self.grid.n_points {
            return Err(SpectraError::InvalidTrace(format!(
                "{} PSD values for a {}-point grid",
                self.psd.len(),
                self.grid.n_points
            )));
        }
        if let Some(i) = self.psd.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SpectraError::InvalidTrace(format!(
                "PSD value {} at index {i} is not finite and non-negative",
                self.psd[i]
            )));
        }
        if !self.carrier_power.is_finite() {
            return Err(SpectraError::InvalidTrace(
                "carrier power is not finite".into(),
            ));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.grid.frequencies().collect()
    }

    /// Trapezoidal integral of the PSD over the grid.
    pub fn integral(&self) -> f64 {
        let step = self.grid.step();
        let inner: f64 = self.psd.iter().sum();
        step * (inner - 0.5 * (self.psd[0] + self.psd[self.psd.len() - 1]))
    }

    /// Trace with every PSD value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            psd: self.psd.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}
