//! Band-limited Gaussian noise synthesis.
//!
//! A band is a radial passband in cycles/image, flat over
//! `|log2(r / center)| ≤ width/2` and rolled off to zero over a further
//! `transition` octaves with a raised cosine. Noise is white Gaussian noise
//! from a seeded ChaCha stream, filtered in the Fourier domain, made
//! zero-mean and rescaled to the exact target SD.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;

/// Smallest image side accepted by the mask designer.
pub const MIN_SIDE: usize = 8;
/// Lowest admissible passband edge, in cycles/image.
pub const MIN_LOW_EDGE: f64 = 0.5;

const EDGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    /// Center frequency in cycles/image.
    pub center_freq: f64,
    /// Full passband width in octaves.
    #[serde(default = "default_width")]
    pub width_octaves: f64,
    /// Raised-cosine roll-off beyond each passband edge, in octaves.
    #[serde(default)]
    pub transition_octaves: f64,
}

fn default_width() -> f64 {
    1.0
}

impl FrequencyBand {
    pub fn new(center_freq: f64, width_octaves: f64, transition_octaves: f64) -> Self {
        Self {
            center_freq,
            width_octaves,
            transition_octaves,
        }
    }

    /// Octave ladder 1, 2, 4, … 64 cycles/image, one octave wide with a
    /// quarter-octave roll-off.
    pub fn default_ladder() -> Vec<FrequencyBand> {
        (0..7).map(|k| FrequencyBand::new(f64::from(1u32 << k), 1.0, 0.25)).collect()
    }

    pub fn log2_center(&self) -> f64 {
        self.center_freq.log2()
    }

    pub fn low_edge(&self) -> f64 {
        self.center_freq * (-self.width_octaves / 2.0).exp2()
    }

    pub fn high_edge(&self) -> f64 {
        self.center_freq * (self.width_octaves / 2.0).exp2()
    }

    /// Outer radius of the transition region, beyond which the mask is zero.
    pub fn support_high(&self) -> f64 {
        self.center_freq * (self.width_octaves / 2.0 + self.transition_octaves).exp2()
    }

    pub fn support_low(&self) -> f64 {
        self.center_freq * (-(self.width_octaves / 2.0 + self.transition_octaves)).exp2()
    }

    /// Check the band against an image of the given size.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let nyquist = width.min(height) as f64 / 2.0;
        if !(self.center_freq.is_finite() && self.center_freq > 0.0) {
            return Err(Error::InvalidBand(format!(
                "center_freq must be > 0, got {}",
                self.center_freq
            )));
        }
        if self.center_freq > nyquist {
            return Err(Error::InvalidBand(format!(
                "center_freq {} exceeds Nyquist {} cycles/image",
                self.center_freq, nyquist
            )));
        }
        if !(self.width_octaves.is_finite() && self.width_octaves > 0.0) {
            return Err(Error::InvalidBand(format!(
                "width_octaves must be > 0, got {}",
                self.width_octaves
            )));
        }
        if !(self.transition_octaves.is_finite() && self.transition_octaves >= 0.0) {
            return Err(Error::InvalidBand(format!(
                "transition_octaves must be >= 0, got {}",
                self.transition_octaves
            )));
        }
        if self.low_edge() < MIN_LOW_EDGE {
            return Err(Error::InvalidBand(format!(
                "low edge {:.4} is below {} cycles/image",
                self.low_edge(),
                MIN_LOW_EDGE
            )));
        }
        Ok(())
    }

    /// Mask gain at radial frequency `r` (cycles/image).
    pub fn response(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let d = (r / self.center_freq).log2().abs();
        let half = self.width_octaves / 2.0;
        if d <= half + EDGE_EPS {
            1.0
        } else if self.transition_octaves == 0.0 || d >= half + self.transition_octaves {
            0.0
        } else {
            0.5 * (1.0 + (PI * (d - half) / self.transition_octaves).cos())
        }
    }
}

/// Signed frequency index of FFT bin `k` out of `n`.
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Radial frequency in cycles/image of FFT bin (`kx`, `ky`).
pub fn radial_frequency(kx: usize, ky: usize, width: usize, height: usize) -> f64 {
    signed_frequency(kx, width).hypot(signed_frequency(ky, height))
}

/// Real 2-D grid, row-major, `height` rows of `width` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Radial band-pass mask in unshifted FFT coordinates.
pub fn design_bandpass_mask(band: &FrequencyBand, width: usize, height: usize) -> Result<Grid> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::Shape(format!(
            "image must be at least {MIN_SIDE}x{MIN_SIDE}, got {width}x{height}"
        )));
    }
    band.validate(width, height)?;
    let mut values = Vec::with_capacity(width * height);
    for ky in 0..height {
        for kx in 0..width {
            values.push(band.response(radial_frequency(kx, ky, width, height)));
        }
    }
    values[0] = 0.0;
    Ok(Grid {
        width,
        height,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub band: FrequencyBand,
    /// Standard deviation on the [0,1] pixel scale.
    pub target_sd: f64,
    pub seed: u64,
}

/// Zero-mean noise field with SD equal to the requested target.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl NoiseField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population standard deviation.
    pub fn sd(&self) -> f64 {
        population_sd(&self.values)
    }
}

fn population_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// In-place 2-D FFT over a row-major `width`×`height` buffer. The inverse is
/// unnormalized.
pub fn fft2d(data: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    row_fft.process(data);
    let mut column = vec![Complex::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col_fft.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
}

/// Seeded white noise → band-pass in the Fourier domain → zero mean → exact SD.
pub fn synthesize_noise(spec: &NoiseSpec, width: usize, height: usize) -> Result<NoiseField> {
    if !(spec.target_sd.is_finite() && spec.target_sd >= 0.0) {
        return Err(Error::Config(format!("target_sd must be >= 0, got {}", spec.target_sd)));
    }
    let mask = design_bandpass_mask(&spec.band, width, height)?;
    if spec.target_sd == 0.0 {
        return Ok(NoiseField::zeros(width, height));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut buf: Vec<Complex<f64>> = (0..width * height)
        .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    fft2d(&mut buf, width, height, false);
    for (c, m) in buf.iter_mut().zip(&mask.values) {
        *c *= *m;
    }
    fft2d(&mut buf, width, height, true);

    let mut values: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    let sd = population_sd(&values);
    if !(sd > 0.0) {
        return Err(Error::InvalidBand(format!(
            "band centered at {} has no FFT bins on a {width}x{height} grid",
            spec.band.center_freq
        )));
    }
    let scale = spec.target_sd / sd;
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(NoiseField {
        width,
        height,
        values,
    })
}

/// Add the same luminance field to every channel and clamp to [0,1].
/// Returns the perturbed image and the fraction of values that were clipped.
pub fn apply_noise(image: &Image, field: &NoiseField) -> Result<(Image, f64)> {
    if image.width != field.width || image.height != field.height {
        return Err(Error::Shape(format!(
            "image is {}x{} but noise field is {}x{}",
            image.width, image.height, field.width, field.height
        )));
    }
    let c = image.channels;
    let mut clipped = 0usize;
    let data = image
        .data
        .iter()
        .enumerate()
        .map(|(i, &px)| {
            let v = px + field.values[i / c];
            if !(0.0..=1.0).contains(&v) {
                clipped += 1;
            }
            v.clamp(0.0, 1.0)
        })
        .collect::<Vec<_>>();
    let fraction = clipped as f64 / data.len().max(1) as f64;
    Ok((
        Image {
            width: image.width,
            height: image.height,
            channels: c,
            data,
        },
        fraction,
    ))
}
