//! OOD accuracy over the benchmark collection and cue-conflict shape bias.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction_log::{PredictionRecord, SuperclassMapping};

/// Dataset names of the shipped OOD collection, one per line.
pub const OOD_DATASETS_FIXTURE: &str = include_str!("../fixtures/ood_datasets.txt");

pub fn parse_dataset_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn default_ood_datasets() -> Vec<String> {
    parse_dataset_list(OOD_DATASETS_FIXTURE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAccuracy {
    pub dataset_tag: String,
    pub accuracy: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OodWeighting {
    /// Mean of per-dataset accuracies.
    #[default]
    Unweighted,
    /// Correct trials over all trials.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OodOptions {
    pub datasets: Vec<String>,
    /// Allow a subset of the configured datasets.
    pub partial: bool,
    pub weighting: OodWeighting,
}

impl Default for OodOptions {
    fn default() -> Self {
        Self {
            datasets: default_ood_datasets(),
            partial: false,
            weighting: OodWeighting::Unweighted,
        }
    }
}

pub fn ood_accuracy(per_dataset: &[DatasetAccuracy], opts: &OodOptions) -> Result<f64> {
    let configured: BTreeSet<&str> = opts.datasets.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    for d in per_dataset {
        if !seen.insert(d.dataset_tag.as_str()) {
            return Err(Error::Data(format!("duplicate dataset {:?}", d.dataset_tag)));
        }
        if !configured.contains(d.dataset_tag.as_str()) {
            return Err(Error::Data(format!("dataset {:?} is not configured", d.dataset_tag)));
        }
        if !(0.0..=1.0).contains(&d.accuracy) {
            return Err(Error::Data(format!("{}: accuracy {} outside [0,1]", d.dataset_tag, d.accuracy)));
        }
    }
    let missing: Vec<&str> = opts.datasets.iter().map(String::as_str).filter(|t| !seen.contains(t)).collect();
    if !missing.is_empty() && !opts.partial {
        return Err(Error::Data(format!("missing datasets: {}", missing.join(", "))));
    }
    if per_dataset.is_empty() {
        return Err(Error::InsufficientData("no dataset accuracies".into()));
    }
    Ok(match opts.weighting {
        OodWeighting::Unweighted => per_dataset.iter().map(|d| d.accuracy).sum::<f64>() / per_dataset.len() as f64,
        OodWeighting::Pooled => {
            let trials: usize = per_dataset.iter().map(|d| d.n_trials).sum();
            if trials == 0 {
                return Err(Error::InsufficientData("pooled OOD accuracy needs trial counts".into()));
            }
            per_dataset.iter().map(|d| d.accuracy * d.n_trials as f64).sum::<f64>() / trials as f64
        }
    })
}

#[derive(Debug, Deserialize)]
struct TruthRow {
    stimulus_id: String,
    superclass: String,
}

/// Read `stimulus_id,superclass` ground truth.
pub fn read_truth_csv(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for (i, row) in reader.deserialize::<TruthRow>().enumerate() {
        let err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message,
        };
        let row = row.map_err(|e| err(e.to_string()))?;
        if out.insert(row.stimulus_id.clone(), row.superclass).is_some() {
            return Err(err(format!("duplicate stimulus_id {:?}", row.stimulus_id)));
        }
    }
    Ok(out)
}

/// Accuracy of one model on one dataset. Later duplicates of a stimulus
/// replace earlier ones.
pub fn dataset_accuracy(
    tag: &str,
    records: &[PredictionRecord],
    truth: &BTreeMap<String, String>,
    mapping: &SuperclassMapping,
) -> Result<DatasetAccuracy> {
    let mut latest: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    let mut unknown = BTreeSet::new();
    for r in records {
        if truth.contains_key(&r.stimulus_id) {
            latest.insert(&r.stimulus_id, r);
        } else {
            unknown.insert(r.stimulus_id.clone());
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownStimuli(unknown.into_iter().collect()));
    }
    if latest.is_empty() {
        return Err(Error::InsufficientData(format!("no predictions for dataset {tag:?}")));
    }
    let correct = latest
        .iter()
        .filter(|(id, r)| mapping.map(&r.raw_label) == Some(truth[**id].as_str()))
        .count();
    Ok(DatasetAccuracy {
        dataset_tag: tag.to_string(),
        accuracy: correct as f64 / latest.len() as f64,
        n_trials: latest.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueConflictTrial {
    pub stimulus_id: String,
    pub shape_label: String,
    pub texture_label: String,
    /// Mapped superclass, or `None` when the raw label had no mapping.
    pub predicted: Option<String>,
}

/// Counts of cue-consistent responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CueCounts {
    pub shape: usize,
    pub texture: usize,
    pub neither: usize,
}

pub fn cue_counts(trials: &[CueConflictTrial]) -> Result<CueCounts> {
    let mut counts = CueCounts::default();
    for t in trials {
        if t.shape_label == t.texture_label {
            return Err(Error::Data(format!(
                "trial {:?}: shape and texture labels are both {:?}",
                t.stimulus_id, t.shape_label
            )));
        }
        match t.predicted.as_deref() {
            Some(p) if p == t.shape_label => counts.shape += 1,
            Some(p) if p == t.texture_label => counts.texture += 1,
            _ => counts.neither += 1,
        }
    }
    Ok(counts)
}

/// Shape accuracy over shape-plus-texture accuracy. Both accuracies share
/// the trial count as denominator, so the ratio reduces to counts.
pub fn shape_bias(trials: &[CueConflictTrial]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::InsufficientData("no cue-conflict trials".into()));
    }
    let c = cue_counts(trials)?;
    if c.shape + c.texture == 0 {
        return Err(Error::Data("shape bias undefined: no cue-consistent responses".into()));
    }
    Ok(c.shape as f64 / (c.shape + c.texture) as f64)
}

#[derive(Debug, Deserialize)]
struct CueTruthRow {
    stimulus_id: String,
    shape_label: String,
    texture_label: String,
}

/// Join a cue-conflict log with its `stimulus_id,shape_label,texture_label`
/// listing.
pub fn cue_conflict_trials(
    records: &[PredictionRecord],
    truth_path: &Path,
    mapping: &SuperclassMapping,
) -> Result<Vec<CueConflictTrial>> {
    let mut reader = csv::Reader::from_path(truth_path)?;
    let mut truth = BTreeMap::new();
    for (i, row) in reader.deserialize::<CueTruthRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: truth_path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        truth.insert(row.stimulus_id.clone(), row);
    }
    let mut latest: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    let mut unknown = BTreeSet::new();
    for r in records {
        if truth.contains_key(&r.stimulus_id) {
            latest.insert(&r.stimulus_id, r);
        } else {
            unknown.insert(r.stimulus_id.clone());
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownStimuli(unknown.into_iter().collect()));
    }
    Ok(latest
        .into_iter()
        .map(|(id, r)| {
            let t = &truth[id];
            CueConflictTrial {
                stimulus_id: id.to_string(),
                shape_label: t.shape_label.clone(),
                texture_label: t.texture_label.clone(),
                predicted: mapping.map(&r.raw_label).map(str::to_string),
            }
        })
        .collect())
}

/// One row of the model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_octaves: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_bias: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_count: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_shot: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_supervised: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in1k: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trained_in22k: Option<bool>,
    /// Comparison group for table highlighting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl ModelMetrics {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            bandwidth_octaves: None,
            ood_accuracy: None,
            shape_bias: None,
            param_count: None,
            zero_shot: None,
            clip_supervised: None,
            in1k: None,
            trained_in22k: None,
            group: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_id.is_empty() {
            return Err(Error::Data("model_id is empty".into()));
        }
        for (name, v) in [("ood_accuracy", self.ood_accuracy), ("shape_bias", self.shape_bias)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Data(format!("{}: {name} {v} outside [0,1]", self.model_id)));
                }
            }
        }
        if let Some(p) = self.param_count {
            if !(p > 0.0) {
                return Err(Error::Data(format!("{}: param_count must be positive", self.model_id)));
            }
        }
        if let Some(bw) = self.bandwidth_octaves {
            if !(bw > 0.0 && bw.is_finite()) {
                return Err(Error::Data(format!("{}: bandwidth must be positive", self.model_id)));
            }
        }
        Ok(())
    }
}

/// Load a JSON file holding one `ModelMetrics` object or an array of them.
pub fn load_metrics_file(path: &Path) -> Result<Vec<ModelMetrics>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let rows: Vec<ModelMetrics> = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    for r in &rows {
        r.validate()?;
    }
    Ok(rows)
}

/// Load a metrics file, or every `*.json` in a directory in file-name order.
pub fn load_metrics(path: &Path) -> Result<Vec<ModelMetrics>> {
    if path.is_file() {
        return load_metrics_file(path);
    }
    if !path.is_dir() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| Error::io(format!("listing {}", path.display()), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(load_metrics_file(&f)?);
    }
    Ok(out)
}
