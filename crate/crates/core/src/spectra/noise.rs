use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{SpectraError, SpectrumTrace};

/// Emulates an `n_averages`-fold averaged analyzer trace of `detected`.
///
/// Each point is drawn as `psd / N * Gamma(N, 1)`, the exact law of an average of
/// `N` independent periodogram ordinates of Gaussian noise. Deterministic in `seed`.
pub fn simulate_trace(
    detected: &SpectrumTrace,
    n_averages: u32,
    seed: u64,
) -> Result<SpectrumTrace, SpectraError> {
    if n_averages == 0 {
        return Err(SpectraError::InvalidArgument(
            "n_averages must be >= 1".into(),
        ));
    }
    let shape = f64::from(n_averages);
    let gamma = Gamma::new(shape, 1.0)
        .map_err(|e| SpectraError::InvalidArgument(format!("gamma distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psd = detected
        .psd
        .iter()
        .map(|&p| {
            let g: f64 = gamma.sample(&mut rng);
            p * g / shape
        })
        .collect();
    let mut meta = detected.meta;
    meta.averages = Some(n_averages);
    meta.seed = Some(seed);
    SpectrumTrace::new(detected.grid, psd, detected.carrier_power, meta)
}

/// Complex Ornstein-Uhlenbeck envelope: a rotating, exponentially decorrelating
/// phasor whose PSD is a single Lorentzian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuEnvelope {
    /// Full width of the resulting Lorentzian (rad/s); the amplitude decays at half this.
    pub gamma: f64,
    /// Rotation (rad/s); sets the Lorentzian centre.
    pub omega0: f64,
    /// Stationary `E|z|^2`, equal to the Lorentzian area.
    pub variance: f64,
}

impl OuEnvelope {
    /// Envelope whose PSD is a Lorentzian at `center_hz` with the given width and area.
    pub fn for_sideband(center_hz: f64, fwhm_hz: f64, area: f64) -> Self {
        Self {
            gamma: TAU * fwhm_hz,
            omega0: TAU * center_hz,
            variance: area,
        }
    }

    /// Exact discretisation at spacing `dt`, started from the stationary law.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, dt: f64, rng: &mut R) -> Vec<Complex64> {
        let propagator = Complex64::new(-0.5 * self.gamma * dt, self.omega0 * dt).exp();
        let kick = (self.variance * (-(self.gamma * dt)).exp_m1().abs()).sqrt();
        let mut draw = |scale: f64| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * (scale * FRAC_1_SQRT_2)
        };
        let mut z = draw(self.variance.sqrt());
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(z);
            z = z * propagator + draw(kick);
        }
        out
    }
}
