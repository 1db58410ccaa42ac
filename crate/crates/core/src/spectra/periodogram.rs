use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{FrequencyGrid, SpectraError, SpectrumTrace, TraceMeta, Units};

/// Two-sided periodogram of a complex envelope sampled at spacing `dt`.
pub fn periodogram(envelope: &[Complex64], dt: f64) -> Result<SpectrumTrace, SpectraError> {
    welch_psd(envelope, dt, envelope.len())
}

/// Welch-averaged two-sided PSD using non-overlapping rectangular segments of
/// `segment_len` samples. Output is ordered from `-1/(2 dt)` upwards, per Hz.
pub fn welch_psd(
    envelope: &[Complex64],
    dt: f64,
    segment_len: usize,
) -> Result<SpectrumTrace, SpectraError> {
    if !envelope.len().is_power_of_two() {
        return Err(SpectraError::NotPowerOfTwo(envelope.len()));
    }
    if !segment_len.is_power_of_two() || segment_len > envelope.len() {
        return Err(SpectraError::NotPowerOfTwo(segment_len));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SpectraError::InvalidArgument(format!(
            "sample spacing must be > 0, got {dt}"
        )));
    }
    let n = segment_len;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut buf = vec![Complex64::default(); n];
    let segments = envelope.len() / n;
    for chunk in envelope.chunks_exact(n) {
        buf.copy_from_slice(chunk);
        fft.process(&mut buf);
        for (a, x) in acc.iter_mut().zip(&buf) {
            *a += x.norm_sqr();
        }
    }
    let norm = dt / (n as f64 * segments as f64);
    let half = n / 2;
    // fftshift: bins N/2..N are the negative frequencies.
    let psd = acc[half..]
        .iter()
        .chain(&acc[..half])
        .map(|v| v * norm)
        .collect();
    let df = 1.0 / (n as f64 * dt);
    let grid = FrequencyGrid::new(-(half as f64) * df, (half as f64 - 1.0) * df, n)?;
    let meta = TraceMeta {
        averages: Some(segments as u32),
        ..TraceMeta::exact(Units::ArbitraryPerHz)
    };
    SpectrumTrace::new(grid, psd, 0.0, meta)
}
