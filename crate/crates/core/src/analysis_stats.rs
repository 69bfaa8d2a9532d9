//! Cross-model statistics: bandwidth-vs-size regression and extrapolation,
//! Welch group comparison, Pearson correlation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const MIN_REGRESSION_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XTransform {
    Identity,
    Log10,
}

impl XTransform {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            XTransform::Identity => x,
            XTransform::Log10 => x.log10(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
    pub n: usize,
    pub x_transform: XTransform,
}

impl RegressionResult {
    /// Fitted y at an untransformed x.
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * self.x_transform.apply(x)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centered sums (Sxx, Syy, Sxy).
fn centered_sums(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).fold((0.0, 0.0, 0.0), |(sxx, syy, sxy), (&a, &b)| {
        let (dx, dy) = (a - mx, b - my);
        (sxx + dx * dx, syy + dy * dy, sxy + dx * dy)
    })
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape("x and y lengths differ".into()));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least two points".into()));
    }
    let (sxx, syy, sxy) = centered_sums(x, y);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation undefined for a constant variable".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ordinary least squares of y on transformed x. When y is constant the
/// correlation is undefined and reported as 0.
pub fn regress(points: &[(f64, f64)], x_transform: XTransform) -> Result<RegressionResult> {
    if points.len() < MIN_REGRESSION_POINTS {
        return Err(Error::InsufficientData(format!(
            "regression needs {MIN_REGRESSION_POINTS} points, got {}",
            points.len()
        )));
    }
    if x_transform == XTransform::Log10 && points.iter().any(|(x, _)| !(*x > 0.0)) {
        return Err(Error::Domain("log10 transform needs positive x".into()));
    }
    let x: Vec<f64> = points.iter().map(|(x, _)| x_transform.apply(*x)).collect();
    let y: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
    let (sxx, syy, sxy) = centered_sums(&x, &y);
    if sxx == 0.0 {
        return Err(Error::Degenerate("zero variance in x".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean(&y) - slope * mean(&x);
    let pearson_r = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        pearson_r,
        n: points.len(),
        x_transform,
    })
}

/// Untransformed x (e.g. parameter count) at which a log10 regression line
/// reaches `target_bw`.
pub fn extrapolate_to_bandwidth(fit: &RegressionResult, target_bw: f64) -> Result<f64> {
    if fit.x_transform != XTransform::Log10 {
        return Err(Error::Domain("extrapolation needs a log10 regression".into()));
    }
    if !(fit.slope < 0.0) {
        return Err(Error::Domain(format!(
            "no crossing: bandwidth does not decrease with size (slope {})",
            fit.slope
        )));
    }
    Ok(10f64.powf((target_bw - fit.intercept) / fit.slope))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group_a_label: String,
    pub group_b_label: String,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Sample standard deviations (n − 1).
    pub sd_a: f64,
    pub sd_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub welch_t: f64,
    pub df: f64,
    /// Two-sided p from the Student-t distribution.
    pub approx_p: f64,
    /// Both groups have zero variance and equal means.
    pub degenerate: bool,
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Welch's unequal-variance t-test of `a` against `b`.
pub fn compare_groups(a: &[f64], b: &[f64], label_a: &str, label_b: &str) -> Result<GroupComparison> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "each group needs at least two values ({} has {}, {} has {})",
            label_a,
            a.len(),
            label_b,
            b.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_var(a), sample_var(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;

    let mut out = GroupComparison {
        group_a_label: label_a.to_string(),
        group_b_label: label_b.to_string(),
        mean_a: ma,
        mean_b: mb,
        sd_a: va.sqrt(),
        sd_b: vb.sqrt(),
        n_a: a.len(),
        n_b: b.len(),
        welch_t: 0.0,
        df: f64::NAN,
        approx_p: 1.0,
        degenerate: false,
    };
    if se2 == 0.0 {
        if ma == mb {
            out.degenerate = true;
            out.approx_p = f64::NAN;
            out.welch_t = f64::NAN;
        } else {
            out.welch_t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
            out.approx_p = 0.0;
        }
        return Ok(out);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Domain(e.to_string()))?;
    out.welch_t = t;
    out.df = df;
    out.approx_p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(out)
}
