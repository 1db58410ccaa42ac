//! Single-Lorentzian-plus-offset least-squares fitting.
//!
//! The model is `offset + (2 area / pi) fwhm / (4 (nu - center)^2 + fwhm^2)`, so the
//! fitted area is analytic. The default weighting takes the variance of each point to
//! scale with the square of the model, which is the law of averaged periodogram
//! ordinates; the iteration then solves the quasi-likelihood score equations.

use std::f64::consts::FRAC_2_PI;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::spectra::SpectrumTrace;

pub const MIN_FIT_POINTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("only {available} points in the fit window, need at least {MIN_FIT_POINTS}")]
    TooFewPoints { available: usize },
    #[error("no peak: maximum {max:e} is below twice the median floor {median:e}")]
    NoPeak { max: f64, median: f64 },
    #[error("fit did not converge within {iterations} iterations")]
    NotConverged {
        iterations: usize,
        partial: Box<LorentzianFit>,
    },
    #[error("normal equations are singular")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Ordinary least squares.
    Uniform,
    /// Weights `1/model^2`, recomputed every iteration.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Explicit frequency window (Hz). When absent the window is
    /// `center +/- auto_window_fwhm * fwhm` from the initial estimate.
    pub window: Option<(f64, f64)>,
    pub auto_window_fwhm: f64,
    pub weighting: Weighting,
    pub max_iterations: usize,
    /// Relative cost change below which the fit is converged.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            window: None,
            auto_window_fwhm: 10.0,
            weighting: Weighting::Model,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

/// 95% half-widths of the fitted parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitIntervals {
    #[serde(rename = "ci95_center_hz")]
    pub center_hz: f64,
    #[serde(rename = "ci95_fwhm_hz")]
    pub fwhm_hz: f64,
    #[serde(rename = "ci95_area")]
    pub area: f64,
    #[serde(rename = "ci95_offset")]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub center_hz: f64,
    pub fwhm_hz: f64,
    /// Trace units times Hz.
    pub area: f64,
    pub offset: f64,
    pub residual_rms: f64,
    #[serde(flatten)]
    pub ci95: FitIntervals,
    pub converged: bool,
    pub window_lo_hz: f64,
    pub window_hi_hz: f64,
    pub n_points: usize,
    pub iterations: usize,
    /// Parameter covariance, ordered (center, fwhm, area, offset).
    pub covariance: [[f64; 4]; 4],
}

impl LorentzianFit {
    pub fn evaluate(&self, nu: f64) -> f64 {
        model(nu, self.center_hz, self.fwhm_hz, self.area, self.offset)
    }

    pub fn area_variance(&self) -> f64 {
        self.covariance[2][2]
    }

    pub fn fwhm_variance(&self) -> f64 {
        self.covariance[1][1]
    }

    pub fn area_fwhm_covariance(&self) -> f64 {
        self.covariance[1][2]
    }
}

fn model(nu: f64, center: f64, fwhm: f64, area: f64, offset: f64) -> f64 {
    let d = nu - center;
    offset + FRAC_2_PI * area * fwhm / (4.0 * d * d + fwhm * fwhm)
}

/// Fits a Lorentzian with flat offset using default options and an optional window.
pub fn fit_lorentzian(
    trace: &SpectrumTrace,
    window: Option<(f64, f64)>,
) -> Result<LorentzianFit, FitError> {
    fit_lorentzian_with(
        trace,
        &FitOptions {
            window,
            ..FitOptions::default()
        },
    )
}

struct Initial {
    center: f64,
    fwhm: f64,
    height: f64,
    offset: f64,
}

pub fn fit_lorentzian_with(
    trace: &SpectrumTrace,
    options: &FitOptions,
) -> Result<LorentzianFit, FitError> {
    let freqs = trace.frequencies();
    let select = |lo: f64, hi: f64| -> (Vec<f64>, Vec<f64>) {
        freqs
            .iter()
            .zip(&trace.psd)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, y)| (*f, *y))
            .unzip()
    };
    let (mut xs, mut ys) = match options.window {
        Some((lo, hi)) => select(lo, hi),
        None => (freqs.clone(), trace.psd.clone()),
    };
    if xs.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints {
            available: xs.len(),
        });
    }
    let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let median = quantile(&ys, 0.5);
    if !(max > 2.0 * median) || max <= 0.0 {
        return Err(FitError::NoPeak { max, median });
    }

    let init = initial_guess(&xs, &ys, trace.grid.step());
    if options.window.is_none() {
        let half = options.auto_window_fwhm * init.fwhm;
        let (wx, wy) = select(init.center - half, init.center + half);
        if wx.len() >= MIN_FIT_POINTS {
            xs = wx;
            ys = wy;
        }
    }
    solve(&xs, &ys, &init, options)
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn initial_guess(xs: &[f64], ys: &[f64], step: f64) -> Initial {
    let n = ys.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            ys[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let offset = quantile(ys, 0.1);
    let (peak, peak_value) = smooth
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let height = (peak_value - offset).max(f64::MIN_POSITIVE);
    let level = offset + 0.5 * height;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = peak;
        for i in range {
            if smooth[i] < level {
                let t = (smooth[prev] - level) / (smooth[prev] - smooth[i]);
                return Some(xs[prev] + t * (xs[i] - xs[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..peak).rev());
    let right = crossing(&mut (peak + 1..n));
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (xs[peak] - l),
        (None, Some(r)) => 2.0 * (r - xs[peak]),
        (None, None) => 0.5 * (xs[n - 1] - xs[0]),
    };
    Initial {
        center: xs[peak],
        fwhm: fwhm.max(2.0 * step),
        height,
        offset,
    }
}

/// Residuals and Jacobian rows of the scaled problem.
struct Scaled<'a> {
    u: &'a [f64],
    y: &'a [f64],
}

impl Scaled<'_> {
    fn model(&self, p: &Vector4<f64>, u: f64) -> f64 {
        model(u, p[0], p[1], p[2], p[3])
    }

    fn gradient(p: &Vector4<f64>, u: f64) -> Vector4<f64> {
        let (c, f, a) = (p[0], p[1], p[2]);
        let d = u - c;
        let den = 4.0 * d * d + f * f;
        let den2 = den * den;
        Vector4::new(
            FRAC_2_PI * a * f * 8.0 * d / den2,
            FRAC_2_PI * a * (4.0 * d * d - f * f) / den2,
            FRAC_2_PI * f / den,
            1.0,
        )
    }

    fn weights(&self, p: &Vector4<f64>, weighting: Weighting, floor: f64) -> Vec<f64> {
        match weighting {
            Weighting::Uniform => vec![1.0; self.u.len()],
            Weighting::Model => self
                .u
                .iter()
                .map(|&u| {
                    let m = self.model(p, u).max(floor);
                    1.0 / (m * m)
                })
                .collect(),
        }
    }

    fn cost(&self, p: &Vector4<f64>, w: &[f64]) -> f64 {
        self.u
            .iter()
            .zip(self.y)
            .zip(w)
            .map(|((&u, &y), &wi)| {
                let r = y - self.model(p, u);
                wi * r * r
            })
            .sum()
    }

    fn normal_equations(&self, p: &Vector4<f64>, w: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for ((&u, &y), &wi) in self.u.iter().zip(self.y).zip(w) {
            let g = Self::gradient(p, u);
            let r = y - self.model(p, u);
            jtj += wi * g * g.transpose();
            jtr += wi * r * g;
        }
        (jtj, jtr)
    }
}

fn solve(
    xs: &[f64],
    ys: &[f64],
    init: &Initial,
    options: &FitOptions,
) -> Result<LorentzianFit, FitError> {
    if xs.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints {
            available: xs.len(),
        });
    }
    // Work in units of the initial width (frequency) and the peak value (amplitude)
    // so the normal equations are well conditioned.
    let f_scale = init.fwhm;
    let y_scale = ys.iter().copied().fold(0.0, f64::max);
    let u: Vec<f64> = xs.iter().map(|x| (x - init.center) / f_scale).collect();
    let y: Vec<f64> = ys.iter().map(|v| v / y_scale).collect();
    let problem = Scaled { u: &u, y: &y };
    let floor = 1e-12;
    let signal_norm: f64 = y.iter().map(|v| v * v).sum();

    let mut p = Vector4::new(
        0.0,
        1.0,
        init.height / y_scale * std::f64::consts::FRAC_PI_2,
        init.offset / y_scale,
    );
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    'outer: while iterations < options.max_iterations {
        iterations += 1;
        let w = problem.weights(&p, options.weighting, floor);
        let cost = problem.cost(&p, &w);
        let weighted_norm: f64 = w.iter().zip(&y).map(|(wi, v)| wi * v * v).sum();
        if cost <= 1e-28 * weighted_norm.max(signal_norm) {
            converged = true;
            break;
        }
        let (jtj, jtr) = problem.normal_equations(&p, &w);
        loop {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let step = damped.lu().solve(&jtr).ok_or(FitError::Singular)?;
            let trial = p + step;
            let trial_cost = if trial[1] > 0.0 && trial.iter().all(|v| v.is_finite()) {
                problem.cost(&trial, &w)
            } else {
                f64::INFINITY
            };
            if trial_cost < cost {
                p = trial;
                lambda = (lambda / 10.0).max(1e-12);
                let rel_step = step
                    .iter()
                    .zip(p.iter())
                    .map(|(s, v)| s.abs() / v.abs().max(1e-12))
                    .fold(0.0, f64::max);
                if (cost - trial_cost) / cost < options.tolerance || rel_step < 1e-13 {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No descent direction left at working precision.
                converged = true;
                break 'outer;
            }
        }
    }

    let w = problem.weights(&p, options.weighting, floor);
    let cost = problem.cost(&p, &w);
    let (jtj, _) = problem.normal_equations(&p, &w);
    let dof = (xs.len() - 4) as f64;
    let inv = jtj.try_inverse().ok_or(FitError::Singular)?;
    let scaled_cov = inv * (cost / dof);
    let jac = Vector4::new(f_scale, f_scale, f_scale * y_scale, y_scale);
    let mut covariance = [[0.0; 4]; 4];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = scaled_cov[(i, j)] * jac[i] * jac[j];
        }
    }
    let t = StudentsT::new(0.0, 1.0, dof)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(1.959_963_984_540_054);
    let half = |i: usize| t * covariance[i][i].max(0.0).sqrt();

    let residual_ss: f64 = u
        .iter()
        .zip(&y)
        .map(|(&ui, &yi)| (yi - problem.model(&p, ui)).powi(2))
        .sum();
    let fit = LorentzianFit {
        center_hz: init.center + p[0] * f_scale,
        fwhm_hz: p[1] * f_scale,
        area: p[2] * f_scale * y_scale,
        offset: p[3] * y_scale,
        residual_rms: y_scale * (residual_ss / u.len() as f64).sqrt(),
        ci95: FitIntervals {
            center_hz: half(0),
            fwhm_hz: half(1),
            area: half(2),
            offset: half(3),
        },
        converged,
        window_lo_hz: xs[0],
        window_hi_hz: xs[xs.len() - 1],
        n_points: xs.len(),
        iterations,
        covariance,
    };
    if !converged {
        return Err(FitError::NotConverged {
            iterations,
            partial: Box::new(fit),
        });
    }
    if !(fit.area > 0.0) {
        return Err(FitError::NoPeak {
            max: y_scale,
            median: quantile(ys, 0.5),
        });
    }
    Ok(fit)
}
