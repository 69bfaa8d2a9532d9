//! Gaussian spatial-frequency channel fit and octave bandwidth.
//!
//! Sensitivity in band `i` is `s_i = 1 / threshold_sd_i` at
//! `x_i = log2(center_freq_i)`. The channel is
//!
//! ```text
//! s(x) = A · exp(-(x - μ)² / (2σ²))
//! ```
//!
//! and its bandwidth is the full width at half maximum on the log2 axis,
//! `2·sqrt(2·ln 2)·σ` octaves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{self, solve_dense, LeastSquaresProblem, SolverOptions};
use crate::psychometrics::{Censoring, ThresholdPoint};

/// `2·sqrt(2·ln 2)`: FWHM of a unit-σ Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub const MIN_POINTS: usize = 3;
pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-10;
/// Fits wider than this (in octaves of σ) are treated as flat.
pub const MAX_SIGMA_OCTAVES: f64 = 100.0;

pub fn bandwidth_from_sigma(sigma_octaves: f64) -> Result<f64> {
    if !(sigma_octaves > 0.0 && sigma_octaves.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma_octaves}")));
    }
    Ok(FWHM_PER_SIGMA * sigma_octaves)
}

/// What the Gaussian is fitted to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelTarget {
    /// Least squares on linear sensitivity (Gauss–Newton).
    #[default]
    Sensitivity,
    /// Least squares on ln(sensitivity): a parabola in log2-frequency.
    LogSensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredBand {
    pub band_index: usize,
    pub center_freq: f64,
    pub censoring: Censoring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    /// μ, in octaves above 1 cycle/image.
    pub peak_log2_freq: f64,
    pub sigma_octaves: f64,
    /// A, in 1/SD units.
    pub peak_sensitivity: f64,
    pub bandwidth_octaves: f64,
    pub n_points: usize,
    /// Sum of squared residuals in sensitivity units.
    pub residual: f64,
    pub iterations: usize,
    pub target: ChannelTarget,
    pub censored_bands: Vec<CensoredBand>,
}

impl ChannelFit {
    pub fn peak_freq(&self) -> f64 {
        self.peak_log2_freq.exp2()
    }

    pub fn sensitivity_at_log2(&self, x: f64) -> f64 {
        gaussian(&[self.peak_sensitivity, self.peak_log2_freq, self.sigma_octaves], x)
    }
}

/// Gaussian parameters `[A, μ, σ]` evaluated at `x`.
pub fn gaussian(p: &[f64], x: f64) -> f64 {
    let z = (x - p[1]) / p[2];
    p[0] * (-0.5 * z * z).exp()
}

/// Residuals `model(x_i) - s_i` of the Gaussian channel and their analytic
/// Jacobian with respect to `[A, μ, σ]`.
#[derive(Debug, Clone)]
pub struct GaussianChannelProblem {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
}

impl LeastSquaresProblem for GaussianChannelProblem {
    fn n_params(&self) -> usize {
        3
    }

    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, (&x, &s)) in self.x.iter().zip(&self.s).enumerate() {
            out[i] = gaussian(p, x) - s;
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (a, mu, sigma) = (p[0], p[1], p[2]);
        for (i, &x) in self.x.iter().enumerate() {
            let d = x - mu;
            let e = (-0.5 * d * d / (sigma * sigma)).exp();
            out[3 * i] = e;
            out[3 * i + 1] = a * e * d / (sigma * sigma);
            out[3 * i + 2] = a * e * d * d / (sigma * sigma * sigma);
        }
    }

    fn project(&self, p: &mut [f64]) {
        // The model depends on σ², keep the positive branch.
        p[2] = p[2].abs().max(1e-12);
    }
}

/// Raw Gaussian fit on (x, s) pairs. Returns `[A, μ, σ]`, residual and
/// iteration count.
pub fn fit_gaussian(x: &[f64], s: &[f64], target: ChannelTarget) -> Result<([f64; 3], f64, usize)> {
    if x.len() != s.len() {
        return Err(Error::Shape("x and sensitivity lengths differ".into()));
    }
    if x.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!("{} points, need {MIN_POINTS}", x.len())));
    }
    if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("sensitivities must be positive and finite".into()));
    }
    let (lo, hi) = s.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo <= 1e-12 * hi {
        return Err(Error::Degenerate("all sensitivities are equal; the channel has no peak".into()));
    }

    let problem = GaussianChannelProblem {
        x: x.to_vec(),
        s: s.to_vec(),
    };
    let (params, iterations) = match target {
        ChannelTarget::Sensitivity => {
            let imax = (0..s.len()).max_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap();
            let init = [s[imax], x[imax], 1.0];
            let sol = lsq::minimize(
                &problem,
                &init,
                SolverOptions {
                    max_iterations: MAX_ITERATIONS,
                    step_tolerance: STEP_TOLERANCE,
                    ..SolverOptions::default()
                },
            );
            if !sol.converged {
                return Err(Error::NonConvergence {
                    iterations: sol.iterations,
                    last_residual: sol.rss,
                    last_iterate: sol.params,
                    residual_trace: sol.residual_trace,
                });
            }
            ([sol.params[0], sol.params[1], sol.params[2]], sol.iterations)
        }
        ChannelTarget::LogSensitivity => (fit_log_parabola(x, s)?, 1),
    };

    if !(params[2].is_finite() && params[2] < MAX_SIGMA_OCTAVES && params[0] > 0.0) {
        return Err(Error::Degenerate(format!(
            "fit ran away (A = {}, σ = {} octaves)",
            params[0], params[2]
        )));
    }
    let mut r = vec![0.0; x.len()];
    problem.residuals(&params, &mut r);
    Ok((params, r.iter().map(|v| v * v).sum(), iterations))
}

/// ln s = c0 + c1·x + c2·x², requiring c2 < 0.
fn fit_log_parabola(x: &[f64], s: &[f64]) -> Result<[f64; 3]> {
    let mut ata = vec![0.0; 9];
    let mut atb = vec![0.0; 3];
    for (&xi, &si) in x.iter().zip(s) {
        let row = [1.0, xi, xi * xi];
        let y = si.ln();
        for a in 0..3 {
            atb[a] += row[a] * y;
            for b in 0..3 {
                ata[a * 3 + b] += row[a] * row[b];
            }
        }
    }
    let c = solve_dense(ata, atb).ok_or_else(|| Error::Degenerate("frequencies are not distinct enough".into()))?;
    if !(c[2] < 0.0) {
        return Err(Error::Degenerate("log-sensitivity is not concave; the channel has no peak".into()));
    }
    let sigma = (-1.0 / (2.0 * c[2])).sqrt();
    let mu = -c[1] / (2.0 * c[2]);
    let ln_a = c[0] - c[1] * c[1] / (4.0 * c[2]);
    Ok([ln_a.exp(), mu, sigma])
}

/// Fit the channel to measured thresholds; censored bands are excluded
/// and listed.
pub fn fit_channel(points: &[ThresholdPoint]) -> Result<ChannelFit> {
    fit_channel_with(points, ChannelTarget::default())
}

pub fn fit_channel_with(points: &[ThresholdPoint], target: ChannelTarget) -> Result<ChannelFit> {
    let censored_bands: Vec<CensoredBand> = points
        .iter()
        .filter(|p| !p.is_measured())
        .map(|p| CensoredBand {
            band_index: p.band_index,
            center_freq: p.band.center_freq,
            censoring: p.censoring,
        })
        .collect();
    let measured: Vec<&ThresholdPoint> = points.iter().filter(|p| p.is_measured()).collect();
    if measured.len() < MIN_POINTS {
        let listed = censored_bands
            .iter()
            .map(|c| format!("{} cyc/img ({})", c.center_freq, c.censoring.as_str()))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::InsufficientData(format!(
            "{} usable bands, need {MIN_POINTS}; censored: [{listed}]",
            measured.len()
        )));
    }
    let x: Vec<f64> = measured.iter().map(|p| p.band.log2_center()).collect();
    let s: Vec<f64> = measured.iter().map(|p| 1.0 / p.threshold_sd.unwrap()).collect();
    let (params, residual, iterations) = fit_gaussian(&x, &s, target)?;
    Ok(ChannelFit {
        model_id: None,
        peak_log2_freq: params[1],
        sigma_octaves: params[2],
        peak_sensitivity: params[0],
        bandwidth_octaves: bandwidth_from_sigma(params[2])?,
        n_points: measured.len(),
        residual,
        iterations,
        target,
        censored_bands,
    })
}
