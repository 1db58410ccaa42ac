use serde::{Deserialize, Serialize};

use super::{FrequencyGrid, SpectraError, SpectrumTrace, TraceMeta, Units};
use crate::physics::HBAR;
use std::f64::consts::TAU;

/// Optical pre-amplifier, photodetector and analyzer noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    /// EDFA optical power gain.
    pub g_edfa: f64,
    /// Optical power to detector voltage conversion (V/W).
    pub g_e: f64,
    /// White PSD added after the gain stages (V^2/Hz).
    pub noise_floor: f64,
    pub quantum_efficiency: f64,
}

impl DetectionChain {
    pub fn new(
        g_edfa: f64,
        g_e: f64,
        noise_floor: f64,
        quantum_efficiency: f64,
    ) -> Result<Self, SpectraError> {
        let chain = Self {
            g_edfa,
            g_e,
            noise_floor,
            quantum_efficiency,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Unit gains, no floor, perfect efficiency.
    pub fn identity() -> Self {
        Self {
            g_edfa: 1.0,
            g_e: 1.0,
            noise_floor: 0.0,
            quantum_efficiency: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SpectraError> {
        let bad = |what: &str, v: f64| {
            Err(SpectraError::InvalidArgument(format!(
                "detection chain: {what} out of range, got {v}"
            )))
        };
        if !(self.g_edfa.is_finite() && self.g_edfa > 0.0) {
            return bad("g_edfa must be > 0", self.g_edfa);
        }
        if !(self.g_e.is_finite() && self.g_e > 0.0) {
            return bad("g_e must be > 0", self.g_e);
        }
        if !(self.noise_floor.is_finite() && self.noise_floor >= 0.0) {
            return bad("noise_floor must be >= 0", self.noise_floor);
        }
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return bad(
                "quantum_efficiency must lie in [0, 1]",
                self.quantum_efficiency,
            );
        }
        Ok(())
    }

    /// Multiplier from an optical PSD in `units` to detector V^2/Hz (before the floor).
    pub fn transduction(&self, units: Units, laser_hz: Option<f64>) -> Result<f64, SpectraError> {
        let power_gain = match units {
            Units::WattsPerHz => 1.0,
            Units::PhotonsPerSecondPerHz => {
                let nu = laser_hz.ok_or(SpectraError::MissingLaserFrequency)?;
                HBAR * TAU * nu
            }
            other => return Err(SpectraError::UnsupportedUnits(other)),
        };
        let volts_per_unit = power_gain * self.g_edfa * self.g_e;
        Ok(volts_per_unit * volts_per_unit * self.quantum_efficiency)
    }
}

/// Passes an optical trace through the detection chain, yielding the one-sided
/// analyzer spectrum in V^2/Hz.
///
/// A trace sampled at negative offsets from the laser is reflected onto positive
/// frequencies, where the analyzer displays it. The carrier weight is passed through.
pub fn detected_psd(
    optical: &SpectrumTrace,
    chain: &DetectionChain,
) -> Result<SpectrumTrace, SpectraError> {
    chain.validate()?;
    let scale = chain.transduction(optical.meta.units, optical.meta.laser_hz)?;
    let grid = &optical.grid;
    let (out_grid, ordered): (FrequencyGrid, Box<dyn Iterator<Item = &f64>>) = if grid.start >= 0.0
    {
        (*grid, Box::new(optical.psd.iter()))
    } else if grid.stop <= 0.0 {
        (grid.mirrored(), Box::new(optical.psd.iter().rev()))
    } else {
        return Err(SpectraError::StraddlesZero(grid.start, grid.stop));
    };
    let psd = ordered.map(|v| v * scale + chain.noise_floor).collect();
    let meta = TraceMeta {
        units: Units::VoltsSquaredPerHz,
        ..optical.meta
    };
    SpectrumTrace::new(out_grid, psd, optical.carrier_power, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::lorentzian_density;
    use approx::assert_relative_eq;

    fn optical(center: f64) -> SpectrumTrace {
        let grid = FrequencyGrid::centered(center, 10e6, 201).unwrap();
        let psd = grid
            .frequencies()
            .map(|f| lorentzian_density(f, center, 1e6, 5e4))
            .collect();
        let meta = TraceMeta {
            laser_hz: Some(194e12),
            ..TraceMeta::exact(Units::PhotonsPerSecondPerHz)
        };
        SpectrumTrace::new(grid, psd, 3.0, meta).unwrap()
    }

    #[test]
    fn identity_chain_only_converts_units() {
        let trace = optical(4e9);
        let out = detected_psd(&trace, &DetectionChain::identity()).unwrap();
        let photon_energy = HBAR * TAU * 194e12;
        for (a, b) in trace.psd.iter().zip(&out.psd) {
            assert_relative_eq!(*b, a * photon_energy * photon_energy, max_relative = 1e-14);
        }
        assert_eq!(out.carrier_power, 3.0);
        assert_eq!(out.meta.units, Units::VoltsSquaredPerHz);
    }

    #[test]
    fn zero_signal_gives_flat_floor() {
        let mut trace = optical(4e9);
        trace.psd.iter_mut().for_each(|v| *v = 0.0);
        let chain = DetectionChain::new(100.0, 10.0, 2.5e-9, 0.7).unwrap();
        let out = detected_psd(&trace, &chain).unwrap();
        assert!(out.psd.iter().all(|&v| v == 2.5e-9));
    }

    #[test]
    fn negative_offsets_are_reflected() {
        let trace = optical(-4e9);
        let out = detected_psd(&trace, &DetectionChain::identity()).unwrap();
        assert_eq!(out.grid.start, 4e9 - 10e6);
        assert!(out.grid.start > 0.0);
        let scale = DetectionChain::identity()
            .transduction(Units::PhotonsPerSecondPerHz, Some(194e12))
            .unwrap();
        let n = out.psd.len();
        for i in 0..n {
            assert_eq!(out.psd[i], trace.psd[n - 1 - i] * scale);
        }
    }

    #[test]
    fn straddling_grid_is_rejected() {
        let trace = optical(0.0);
        assert!(matches!(
            detected_psd(&trace, &DetectionChain::identity()),
            Err(SpectraError::StraddlesZero(..))
        ));
    }

    #[test]
    fn displacement_trace_is_rejected() {
        let mut trace = optical(4e9);
        trace.meta.units = Units::MetersSquaredPerHz;
        assert!(matches!(
            detected_psd(&trace, &DetectionChain::identity()),
            Err(SpectraError::UnsupportedUnits(_))
        ));
    }

    #[test]
    fn edfa_gain_quadruples_signal() {
        let trace = optical(4e9);
        let base = DetectionChain::new(10.0, 5.0, 0.0, 1.0).unwrap();
        let doubled = DetectionChain {
            g_edfa: 20.0,
            ..base
        };
        let a = detected_psd(&trace, &base).unwrap();
        let b = detected_psd(&trace, &doubled).unwrap();
        for (x, y) in a.psd.iter().zip(&b.psd) {
            assert_relative_eq!(*y, 4.0 * x, max_relative = 1e-14);
        }
    }
}
