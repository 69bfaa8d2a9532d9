//! Per-band psychometric fits and 50%-accuracy noise thresholds.
//!
//! Accuracy is modeled as a logistic in `x = log2(sd)` with both asymptotes
//! pinned: the upper at the unperturbed baseline and the lower at chance.
//!
//! ```text
//! acc(x) = lower + (upper - lower) / (1 + exp(-slope * (x - midpoint)))
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{self, LeastSquaresProblem, SolverOptions};
use crate::prediction_log::CellAccuracy;
use crate::spectral_noise::FrequencyBand;

pub const DEFAULT_CRITERION: f64 = 0.5;
pub const DEFAULT_CHANCE: f64 = 1.0 / 16.0;
pub const MIN_CELLS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// Absolute accuracy level that defines the threshold.
    pub criterion: f64,
    /// Lower asymptote of the logistic.
    pub chance: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            criterion: DEFAULT_CRITERION,
            chance: DEFAULT_CHANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsychometricFit {
    pub band_index: usize,
    pub band: FrequencyBand,
    pub midpoint_log2_sd: f64,
    /// d acc / d log2(sd) scale; never positive.
    pub slope: f64,
    pub upper: f64,
    pub lower: f64,
    pub rss: f64,
    pub n_cells: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl PsychometricFit {
    pub fn accuracy_at_log2(&self, x: f64) -> f64 {
        self.lower + (self.upper - self.lower) * logistic(self.slope * (x - self.midpoint_log2_sd))
    }

    pub fn accuracy_at(&self, sd: f64) -> f64 {
        if sd <= 0.0 {
            return self.upper;
        }
        self.accuracy_at_log2(sd.log2())
    }

    /// SD at which the fitted curve equals `level`, if the curve crosses it.
    pub fn solve(&self, level: f64) -> Option<f64> {
        if self.slope >= 0.0 || !(self.lower < level && level < self.upper) {
            return None;
        }
        let q = (level - self.lower) / (self.upper - self.lower);
        let x = self.midpoint_log2_sd + (q / (1.0 - q)).ln() / self.slope;
        Some(x.exp2())
    }
}

struct LogisticProblem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    upper: f64,
    lower: f64,
}

impl LogisticProblem<'_> {
    fn parts(&self, p: &[f64], x: f64) -> (f64, f64) {
        let g = logistic(p[1] * (x - p[0]));
        (self.lower + (self.upper - self.lower) * g, (self.upper - self.lower) * g * (1.0 - g))
    }
}

impl LeastSquaresProblem for LogisticProblem<'_> {
    fn n_params(&self) -> usize {
        2
    }

    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, (&x, &y)) in self.x.iter().zip(self.y).enumerate() {
            out[i] = self.parts(p, x).0 - y;
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        for (i, &x) in self.x.iter().enumerate() {
            let (_, dg) = self.parts(p, x);
            out[2 * i] = -dg * p[1];
            out[2 * i + 1] = dg * (x - p[0]);
        }
    }

    fn project(&self, p: &mut [f64]) {
        p[1] = p[1].min(0.0);
    }
}

/// Least-squares logistic fit of accuracy against log2(sd) for one band.
///
/// `cells` are the nonzero-SD cells of the band; `baseline` is the accuracy
/// of the shared unperturbed row.
pub fn fit_psychometric(cells: &[CellAccuracy], baseline: f64, opts: &ThresholdOptions) -> Result<PsychometricFit> {
    let mut cells: Vec<&CellAccuracy> = cells.iter().filter(|c| c.sd > 0.0).collect();
    let Some((band_index, band)) = cells.first().and_then(|c| c.band_index.zip(c.band)) else {
        return Err(Error::InsufficientData("no noise cells for band".into()));
    };
    if cells.iter().any(|c| c.band_index != Some(band_index)) {
        return Err(Error::Data("cells from several bands passed to one psychometric fit".into()));
    }
    if cells.len() < MIN_CELLS {
        return Err(Error::InsufficientData(format!(
            "band {band_index} ({} cyc/img) has {} noise cells, need {MIN_CELLS}",
            band.center_freq,
            cells.len()
        )));
    }
    if !(0.0..=1.0).contains(&baseline) {
        return Err(Error::Data(format!("baseline accuracy {baseline} outside [0,1]")));
    }
    cells.sort_by(|a, b| a.sd.total_cmp(&b.sd));
    let x: Vec<f64> = cells.iter().map(|c| c.sd.log2()).collect();
    let y: Vec<f64> = cells.iter().map(|c| c.accuracy).collect();

    let nearest = cells
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (a.accuracy - opts.criterion).abs().total_cmp(&(b.accuracy - opts.criterion).abs())
        })
        .map(|(i, _)| i)
        .unwrap();
    let init = [x[nearest], -1.0];
    let problem = LogisticProblem {
        x: &x,
        y: &y,
        upper: baseline,
        lower: opts.chance,
    };

    let (params, rss, iterations, converged) = if baseline > opts.chance {
        let sol = lsq::minimize(
            &problem,
            &init,
            SolverOptions {
                max_iterations: 500,
                step_tolerance: 1e-12,
                ..SolverOptions::default()
            },
        );
        (sol.params, sol.rss, sol.iterations, sol.converged)
    } else {
        // Flat at or below chance: nothing to fit.
        let p = vec![init[0], 0.0];
        let mut r = vec![0.0; x.len()];
        problem.residuals(&p, &mut r);
        (p, r.iter().map(|v| v * v).sum(), 0, true)
    };

    Ok(PsychometricFit {
        band_index,
        band,
        midpoint_log2_sd: params[0],
        slope: params[1],
        upper: baseline,
        lower: opts.chance,
        rss,
        n_cells: cells.len(),
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    Measured,
    /// Accuracy stays above the criterion up to the largest tested SD.
    NeverDrops,
    /// Baseline accuracy is at or below the criterion.
    Floor,
}

impl Censoring {
    pub fn as_str(&self) -> &'static str {
        match self {
            Censoring::Measured => "measured",
            Censoring::NeverDrops => "never_drops",
            Censoring::Floor => "floor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub band_index: usize,
    pub band: FrequencyBand,
    /// Present only when `censoring` is `Measured`.
    pub threshold_sd: Option<f64>,
    pub baseline_accuracy: f64,
    pub censoring: Censoring,
    /// Curve crossing beyond the tested range, kept for diagnostics.
    pub extrapolated_sd: Option<f64>,
}

impl ThresholdPoint {
    pub fn is_measured(&self) -> bool {
        self.censoring == Censoring::Measured
    }
}

/// Closed-form threshold from a fit, with censoring outside the ladder.
pub fn extract_threshold(fit: &PsychometricFit, sd_ladder: &[f64], criterion: f64) -> ThresholdPoint {
    let sd_max = sd_ladder.iter().copied().fold(0.0f64, f64::max);
    let mut point = ThresholdPoint {
        band_index: fit.band_index,
        band: fit.band,
        threshold_sd: None,
        baseline_accuracy: fit.upper,
        censoring: Censoring::NeverDrops,
        extrapolated_sd: None,
    };
    if fit.upper <= criterion {
        point.censoring = Censoring::Floor;
        return point;
    }
    match fit.solve(criterion) {
        Some(sd) if sd > 0.0 && sd <= sd_max => {
            point.threshold_sd = Some(sd);
            point.censoring = Censoring::Measured;
        }
        Some(sd) => point.extrapolated_sd = Some(sd),
        None => {}
    }
    point
}

/// Fit every band found in `cells` (which must include the baseline row)
/// and extract its threshold. Bands are returned in index order.
pub fn fit_thresholds(cells: &[CellAccuracy], opts: &ThresholdOptions) -> Result<Vec<(PsychometricFit, ThresholdPoint)>> {
    let baseline = cells
        .iter()
        .find(|c| c.is_baseline())
        .ok_or_else(|| Error::InsufficientData("no unperturbed (sd = 0) cell".into()))?
        .accuracy;
    let mut by_band: BTreeMap<usize, Vec<CellAccuracy>> = BTreeMap::new();
    for c in cells.iter().filter(|c| !c.is_baseline()) {
        by_band.entry(c.band_index.unwrap()).or_default().push(c.clone());
    }
    if by_band.is_empty() {
        return Err(Error::InsufficientData("no noise cells".into()));
    }
    by_band
        .values()
        .map(|band_cells| {
            let fit = fit_psychometric(band_cells, baseline, opts)?;
            let mut ladder: Vec<f64> = band_cells.iter().map(|c| c.sd).collect();
            ladder.push(0.0);
            let point = extract_threshold(&fit, &ladder, opts.criterion);
            Ok((fit, point))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ThresholdRow {
    model_id: String,
    band_index: usize,
    center_freq: f64,
    width_octaves: f64,
    transition_octaves: f64,
    threshold_sd: Option<f64>,
    censoring: Censoring,
    baseline_accuracy: f64,
    midpoint_log2_sd: Option<f64>,
    slope: Option<f64>,
    rss: Option<f64>,
    n_cells: Option<usize>,
    converged: Option<bool>,
    extrapolated_sd: Option<f64>,
}

pub fn write_thresholds_csv(path: &Path, model_id: &str, rows: &[(PsychometricFit, ThresholdPoint)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (fit, point) in rows {
        w.serialize(ThresholdRow {
            model_id: model_id.to_string(),
            band_index: point.band_index,
            center_freq: point.band.center_freq,
            width_octaves: point.band.width_octaves,
            transition_octaves: point.band.transition_octaves,
            threshold_sd: point.threshold_sd,
            censoring: point.censoring,
            baseline_accuracy: point.baseline_accuracy,
            midpoint_log2_sd: Some(fit.midpoint_log2_sd),
            slope: Some(fit.slope),
            rss: Some(fit.rss),
            n_cells: Some(fit.n_cells),
            converged: Some(fit.converged),
            extrapolated_sd: point.extrapolated_sd,
        })?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read a thresholds CSV. Only the threshold columns are required; fit
/// diagnostics may be empty.
pub fn read_thresholds_csv(path: &Path) -> Result<(String, Vec<ThresholdPoint>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut model_id = None;
    let mut points = Vec::new();
    for (i, row) in reader.deserialize::<ThresholdRow>().enumerate() {
        let err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message,
        };
        let row = row.map_err(|e| err(e.to_string()))?;
        if model_id.get_or_insert_with(|| row.model_id.clone()) != &row.model_id {
            return Err(err("thresholds file mixes several models".into()));
        }
        if (row.censoring == Censoring::Measured) != row.threshold_sd.is_some() {
            return Err(err("threshold_sd must be set exactly for measured rows".into()));
        }
        if let Some(t) = row.threshold_sd {
            if !(t > 0.0 && t.is_finite()) {
                return Err(err(format!("threshold_sd {t} must be positive")));
            }
        }
        points.push(ThresholdPoint {
            band_index: row.band_index,
            band: FrequencyBand::new(row.center_freq, row.width_octaves, row.transition_octaves),
            threshold_sd: row.threshold_sd,
            baseline_accuracy: row.baseline_accuracy,
            censoring: row.censoring,
            extrapolated_sd: row.extrapolated_sd,
        });
    }
    let model_id = model_id.ok_or_else(|| Error::Data(format!("{} has no rows", path.display())))?;
    Ok((model_id, points))
}
