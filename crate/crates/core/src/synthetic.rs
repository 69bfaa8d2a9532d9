//! Planted observer with a known Gaussian channel, used to check that the
//! threshold and channel fits recover what was put in.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::channel_fit::FWHM_PER_SIGMA;
use crate::prediction_log::PredictionRecord;
use crate::spectral_noise::FrequencyBand;
use crate::stimulus_gen::{GridConfig, SourceImage, StimulusManifest};
use crate::superclass::SuperclassSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticObserver {
    pub peak_log2_freq: f64,
    pub bandwidth_octaves: f64,
    /// Sensitivity (1 / threshold SD) at the peak.
    pub peak_sensitivity: f64,
    /// Logistic slope in log2(sd); negative.
    pub slope: f64,
    pub baseline: f64,
    pub chance: f64,
    /// Accuracy level reached exactly at the planted threshold.
    pub criterion: f64,
}

impl Default for SyntheticObserver {
    fn default() -> Self {
        Self {
            peak_log2_freq: 3.0,
            bandwidth_octaves: 2.0,
            peak_sensitivity: 10.0,
            slope: -3.0,
            baseline: 0.95,
            chance: 1.0 / 16.0,
            criterion: 0.5,
        }
    }
}

impl SyntheticObserver {
    pub fn sigma_octaves(&self) -> f64 {
        self.bandwidth_octaves / FWHM_PER_SIGMA
    }

    pub fn sensitivity(&self, band: &FrequencyBand) -> f64 {
        let d = band.log2_center() - self.peak_log2_freq;
        self.peak_sensitivity * (-d * d / (2.0 * self.sigma_octaves().powi(2))).exp()
    }

    pub fn threshold_sd(&self, band: &FrequencyBand) -> f64 {
        1.0 / self.sensitivity(band)
    }

    /// Expected accuracy for a stimulus; `band` is `None` for the baseline.
    pub fn accuracy(&self, band: Option<&FrequencyBand>, sd: f64) -> f64 {
        let Some(band) = band.filter(|_| sd > 0.0) else {
            return self.baseline;
        };
        let q = (self.criterion - self.chance) / (self.baseline - self.chance);
        let mid = self.threshold_sd(band).log2() - (q / (1.0 - q)).ln() / self.slope;
        let g = 1.0 / (1.0 + (-self.slope * (sd.log2() - mid)).exp());
        self.chance + (self.baseline - self.chance) * g
    }
}

/// Grid with the SD ladder extended to 2.56 so that bands one octave from
/// the peak of the default observer still cross 50%.
pub fn synthetic_grid() -> GridConfig {
    GridConfig {
        sd_ladder: vec![0.0, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64, 1.28, 2.56],
        ..GridConfig::default()
    }
}

/// `n` virtual sources cycling through the superclasses. Paths are never read.
pub fn synthetic_corpus(n: usize, classes: &SuperclassSet) -> Vec<SourceImage> {
    (0..n)
        .map(|i| SourceImage {
            id: format!("syn{i:04}"),
            path: PathBuf::from(format!("virtual/syn{i:04}.png")),
            true_superclass: classes.names()[i % classes.len()].clone(),
            dataset_tag: "in-distribution".into(),
        })
        .collect()
}

/// Prediction records for every manifest entry. Each cell gets exactly
/// `round(p * n)` correct responses; which sources answer correctly rotates
/// between cells. Wrong answers name the next superclass over.
pub fn simulate(
    observer: &SyntheticObserver,
    manifest: &StimulusManifest,
    model_id: &str,
    classes: &SuperclassSet,
) -> Vec<PredictionRecord> {
    let mut cells: BTreeMap<(Option<usize>, u64), Vec<usize>> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        cells.entry((e.band_index, e.target_sd.to_bits())).or_default().push(i);
    }
    let names = classes.names();
    let mut records: Vec<Option<PredictionRecord>> = vec![None; manifest.entries.len()];
    for (cell_no, members) in cells.values().enumerate() {
        let first = &manifest.entries[members[0]];
        let p = observer.accuracy(first.band.as_ref(), first.target_sd);
        let n = members.len();
        let k = (p * n as f64).round() as usize;
        for (j, &idx) in members.iter().enumerate() {
            let e = &manifest.entries[idx];
            let correct = (j + cell_no * 7) % n < k;
            let label = if correct {
                e.true_superclass.clone()
            } else {
                let t = names.iter().position(|c| *c == e.true_superclass).unwrap_or(0);
                names[(t + 1) % names.len()].clone()
            };
            records[idx] = Some(PredictionRecord {
                stimulus_id: e.stimulus_id.clone(),
                raw_label: label,
                model_id: model_id.into(),
                raw_confidence: None,
            });
        }
    }
    records.into_iter().flatten().collect()
}
