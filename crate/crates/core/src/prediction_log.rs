//! Prediction-record ingestion and per-cell accuracy aggregation.
//!
//! A prediction log is JSON-lines, one object per classifier decision:
//!
//! ```text
//! {"stimulus_id":"img000_b03_sd02_r00","raw_label":"207","model_id":"resnet50"}
//! {"stimulus_id":"img000_b03_sd03_r00","raw_label":"dog","model_id":"resnet50","raw_confidence":0.41}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_noise::FrequencyBand;
use crate::stimulus_gen::StimulusManifest;
use crate::superclass::SuperclassSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub stimulus_id: String,
    /// Top-1 output: an ImageNet-1K class identifier or a superclass name.
    pub raw_label: String,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_confidence: Option<f64>,
}

impl PredictionRecord {
    fn check(&self) -> std::result::Result<(), String> {
        if self.model_id.is_empty() {
            return Err("model_id is empty".into());
        }
        if self.stimulus_id.is_empty() {
            return Err("stimulus_id is empty".into());
        }
        if let Some(c) = self.raw_confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(format!("raw_confidence {c} outside [0,1]"));
            }
        }
        Ok(())
    }
}

/// Parse a JSON-lines prediction log. Blank lines are skipped.
pub fn read_prediction_log(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        rec.check().map_err(parse_err)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_prediction_log(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    use std::io::Write;
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("writing prediction log", e))?;
    }
    w.flush().map_err(|e| Error::io("writing prediction log", e))
}

/// Many-to-one map from raw classifier labels to superclasses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperclassMapping {
    table: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct MappingRow {
    raw_label: String,
    superclass: String,
}

impl SuperclassMapping {
    /// Identity rows only, for runners that emit superclass names directly.
    pub fn identity(classes: &SuperclassSet) -> Self {
        Self {
            table: classes.names().iter().map(|n| (n.clone(), n.clone())).collect(),
        }
    }

    /// Load a CSV with header `raw_label,superclass`.
    pub fn load(path: &Path, classes: &SuperclassSet) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["raw_label", "superclass"] {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                message: "expected header `raw_label,superclass`".into(),
            });
        }
        let mut table = BTreeMap::new();
        for (i, row) in reader.deserialize::<MappingRow>().enumerate() {
            let line = i + 2;
            let err = |message: String| Error::Parse {
                path: path.display().to_string(),
                line,
                message,
            };
            let row = row.map_err(|e| err(e.to_string()))?;
            let (raw, sup) = (row.raw_label.trim().to_string(), row.superclass.trim().to_string());
            if !classes.contains(&sup) {
                return Err(err(format!("row {raw:?} maps to unknown superclass {sup:?}")));
            }
            if table.insert(raw.clone(), sup).is_some() {
                return Err(err(format!("duplicate raw_label {raw:?}")));
            }
        }
        Ok(Self { table })
    }

    pub fn map(&self, raw_label: &str) -> Option<&str> {
        self.table.get(raw_label.trim()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Accuracy in one (band, SD) cell. The shared unperturbed row has no band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAccuracy {
    pub band_index: Option<usize>,
    pub band: Option<FrequencyBand>,
    pub sd: f64,
    pub n_trials: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

impl CellAccuracy {
    pub fn from_counts(band_index: Option<usize>, band: Option<FrequencyBand>, sd: f64, n_trials: usize, n_correct: usize) -> Self {
        Self {
            band_index,
            band,
            sd,
            n_trials,
            n_correct,
            accuracy: n_correct as f64 / n_trials as f64,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.band_index.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub model_id: String,
    pub cells: Vec<CellAccuracy>,
    pub n_records: usize,
    pub duplicate_warnings: usize,
    /// Records whose raw label had no mapping (scored incorrect).
    pub unmapped: usize,
}

impl IngestReport {
    pub fn baseline(&self) -> Option<&CellAccuracy> {
        self.cells.iter().find(|c| c.is_baseline())
    }
}

/// Aggregate predictions of one model into per-(band, SD) accuracies.
///
/// `model` selects a model when the log holds several; it may be omitted
/// for single-model logs.
pub fn ingest_predictions(
    records: &[PredictionRecord],
    manifest: &StimulusManifest,
    mapping: &SuperclassMapping,
    model: Option<&str>,
) -> Result<IngestReport> {
    let models: BTreeSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    let model_id = match model {
        Some(m) => m.to_string(),
        None if models.len() == 1 => models.iter().next().unwrap().to_string(),
        None if models.is_empty() => return Err(Error::Data("prediction log is empty".into())),
        None => {
            return Err(Error::Data(format!(
                "log contains several models ({}); select one",
                models.into_iter().collect::<Vec<_>>().join(", ")
            )))
        }
    };

    let by_id: HashMap<&str, &crate::stimulus_gen::ManifestEntry> =
        manifest.entries.iter().map(|e| (e.stimulus_id.as_str(), e)).collect();

    let mut latest: HashMap<&str, &PredictionRecord> = HashMap::new();
    let mut duplicate_warnings = 0;
    let mut unknown = BTreeSet::new();
    let mut failed = BTreeSet::new();
    for rec in records.iter().filter(|r| r.model_id == model_id) {
        match by_id.get(rec.stimulus_id.as_str()) {
            None => {
                unknown.insert(rec.stimulus_id.clone());
            }
            Some(e) if e.error.is_some() => {
                failed.insert(rec.stimulus_id.clone());
            }
            Some(_) => {
                if latest.insert(rec.stimulus_id.as_str(), rec).is_some() {
                    duplicate_warnings += 1;
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownStimuli(unknown.into_iter().collect()));
    }
    if !failed.is_empty() {
        return Err(Error::Data(format!(
            "predictions reference stimuli that failed to generate: {}",
            failed.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    // (band, sd bits) orders baseline first, then bands, then ascending SD.
    let mut counts: BTreeMap<(Option<usize>, u64), (usize, usize)> = BTreeMap::new();
    let mut unmapped = 0;
    for (id, rec) in &latest {
        let entry = by_id[id];
        let predicted = mapping.map(&rec.raw_label);
        if predicted.is_none() {
            unmapped += 1;
        }
        let correct = predicted == Some(entry.true_superclass.as_str());
        let slot = counts.entry((entry.band_index, entry.target_sd.to_bits())).or_default();
        slot.0 += 1;
        slot.1 += usize::from(correct);
    }

    let bands = &manifest.header.grid.bands;
    let cells = counts
        .into_iter()
        .map(|((band_index, sd_bits), (n, k))| {
            let band = band_index.map(|b| bands[b]);
            CellAccuracy::from_counts(band_index, band, f64::from_bits(sd_bits), n, k)
        })
        .collect();

    Ok(IngestReport {
        model_id,
        cells,
        n_records: latest.len(),
        duplicate_warnings,
        unmapped,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CellRow {
    model_id: String,
    band_index: Option<usize>,
    center_freq: Option<f64>,
    width_octaves: Option<f64>,
    transition_octaves: Option<f64>,
    sd: f64,
    n_trials: usize,
    n_correct: usize,
    accuracy: f64,
}

/// Write per-cell accuracies as CSV; the baseline row leaves band columns empty.
pub fn write_cells_csv(path: &Path, model_id: &str, cells: &[CellAccuracy]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for c in cells {
        w.serialize(CellRow {
            model_id: model_id.to_string(),
            band_index: c.band_index,
            center_freq: c.band.map(|b| b.center_freq),
            width_octaves: c.band.map(|b| b.width_octaves),
            transition_octaves: c.band.map(|b| b.transition_octaves),
            sd: c.sd,
            n_trials: c.n_trials,
            n_correct: c.n_correct,
            accuracy: c.accuracy,
        })?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read a cells CSV, returning the model id and the cells.
pub fn read_cells_csv(path: &Path) -> Result<(String, Vec<CellAccuracy>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut model_id: Option<String> = None;
    let mut cells = Vec::new();
    for (i, row) in reader.deserialize::<CellRow>().enumerate() {
        let err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message,
        };
        let row = row.map_err(|e| err(e.to_string()))?;
        match &model_id {
            None => model_id = Some(row.model_id.clone()),
            Some(m) if *m != row.model_id => return Err(err("cells file mixes several models".into())),
            _ => {}
        }
        if row.n_trials == 0 || row.n_correct > row.n_trials {
            return Err(err(format!("invalid counts {}/{}", row.n_correct, row.n_trials)));
        }
        let band = match (row.band_index, row.center_freq) {
            (Some(_), Some(c)) => Some(FrequencyBand::new(
                c,
                row.width_octaves.unwrap_or(1.0),
                row.transition_octaves.unwrap_or(0.0),
            )),
            (None, None) => None,
            _ => return Err(err("band_index and center_freq must both be set or both empty".into())),
        };
        cells.push(CellAccuracy::from_counts(row.band_index, band, row.sd, row.n_trials, row.n_correct));
    }
    let model_id = model_id.ok_or_else(|| Error::Data(format!("{} has no rows", path.display())))?;
    Ok((model_id, cells))
}
