//! Stage functions and the composite pipeline run.
//!
//! Each stage reads files and writes files under an output root; the CLI
//! subcommands call the same functions. A run holds a lockfile on the
//! output root and finishes by writing `run_summary.json`.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel_fit::{fit_channel_with, ChannelFit, ChannelTarget};
use crate::error::{Error, Result};
use crate::prediction_log::{
    ingest_predictions, read_cells_csv, read_prediction_log, write_cells_csv, IngestReport, SuperclassMapping,
};
use crate::psychometrics::{fit_thresholds, read_thresholds_csv, write_thresholds_csv, ThresholdOptions, DEFAULT_CHANCE, DEFAULT_CRITERION};
use crate::report::{analyze, emit_report, write_analyses, write_channel_figure, ReportOptions};
use crate::robustness_metrics::{
    cue_conflict_trials, dataset_accuracy, default_ood_datasets, load_metrics, ood_accuracy, read_truth_csv,
    shape_bias, DatasetAccuracy, ModelMetrics, OodOptions, OodWeighting,
};
use crate::stimulus_gen::{generate_stimuli, load_corpus, GridConfig, StimulusManifest, MANIFEST_FILE};
use crate::superclass::SuperclassSet;

pub const CELLS_FILE: &str = "cells.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.csv";
pub const CHANNEL_FILE: &str = "channel_fit.json";
pub const CHANNEL_FIGURE: &str = "channel.svg";
pub const METRICS_FILE: &str = "metrics.json";
pub const ANALYSIS_DIR: &str = "analysis";
pub const REPORT_DIR: &str = "report";
pub const SUMMARY_FILE: &str = "run_summary.json";
pub const LOCK_FILE: &str = ".vfa.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    GenStimuli,
    Ingest,
    FitThresholds,
    FitChannel,
    Metrics,
    Analyze,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::GenStimuli,
        Stage::Ingest,
        Stage::FitThresholds,
        Stage::FitChannel,
        Stage::Metrics,
        Stage::Analyze,
        Stage::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::GenStimuli => "gen-stimuli",
            Stage::Ingest => "ingest",
            Stage::FitThresholds => "fit-thresholds",
            Stage::FitChannel => "fit-channel",
            Stage::Metrics => "metrics",
            Stage::Analyze => "analyze",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_dir: Option<PathBuf>,
    /// `id,file,superclass[,dataset_tag]` labels for the corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Existing manifest; defaults to the one in the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Prediction log for the noise grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
    /// `raw_label,superclass`; identity over the superclasses when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superclasses: Option<PathBuf>,
    /// Directory of `<tag>.jsonl` logs with `<tag>.truth.csv` ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue_conflict_log: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue_conflict_truth: Option<PathBuf>,
    /// Descriptive fields (param count, training flags) for this model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_info: Option<PathBuf>,
    /// Metrics of further models to include in analyses and the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PathBuf>,
    pub output_root: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionConfig {
    #[serde(default = "default_criterion")]
    pub threshold_criterion: f64,
    #[serde(default = "default_chance")]
    pub chance: f64,
    #[serde(default)]
    pub channel_target: ChannelTarget,
}

fn default_criterion() -> f64 {
    DEFAULT_CRITERION
}

fn default_chance() -> f64 {
    DEFAULT_CHANCE
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            threshold_criterion: DEFAULT_CRITERION,
            chance: DEFAULT_CHANCE,
            channel_target: ChannelTarget::default(),
        }
    }
}

impl CriterionConfig {
    pub fn threshold_options(&self) -> ThresholdOptions {
        ThresholdOptions {
            criterion: self.threshold_criterion,
            chance: self.chance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisToggles {
    #[serde(default)]
    pub ood_weighting: OodWeighting,
    #[serde(default)]
    pub partial_ood: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_datasets: Option<Vec<String>>,
    #[serde(default = "yes")]
    pub channel_figure: bool,
}

fn yes() -> bool {
    true
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        Self {
            ood_weighting: OodWeighting::default(),
            partial_ood: false,
            ood_datasets: None,
            channel_figure: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub criterion: CriterionConfig,
    #[serde(default)]
    pub analysis: AnalysisToggles,
    /// Model to select from multi-model logs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

impl PipelineConfig {
    /// Parse a config file. Relative paths are resolved against the file's
    /// directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.resolve_relative(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.corpus_dir,
            &mut p.labels,
            &mut p.manifest,
            &mut p.predictions,
            &mut p.mapping,
            &mut p.superclasses,
            &mut p.ood_dir,
            &mut p.cue_conflict_log,
            &mut p.cue_conflict_truth,
            &mut p.model_info,
            &mut p.metrics,
        ] {
            if let Some(path) = slot.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        if p.output_root.is_relative() {
            p.output_root = base.join(&p.output_root);
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn runs(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.paths.manifest.clone().unwrap_or_else(|| self.paths.output_root.join(MANIFEST_FILE))
    }

    /// Check stage list, grid and that every needed input exists or is
    /// produced by an earlier stage of this run. Touches nothing on disk.
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("no stages selected".into()));
        }
        if self.stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("stages must be listed once each, in pipeline order".into()));
        }
        let c = &self.criterion;
        if !(c.chance >= 0.0 && c.chance < c.threshold_criterion && c.threshold_criterion < 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= chance < criterion < 1 (chance {}, criterion {})",
                c.chance, c.threshold_criterion
            )));
        }
        let p = &self.paths;
        let exists = |path: &Option<PathBuf>, what: &str| -> Result<()> {
            match path {
                Some(path) if !path.exists() => Err(Error::MissingPath(path.clone())),
                Some(_) => Ok(()),
                None => Err(Error::Config(format!("{what} path is required"))),
            }
        };
        for path in [&p.mapping, &p.superclasses, &p.model_info, &p.metrics].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::MissingPath(path.clone()));
            }
        }
        let produced = |file: &str, by: Stage| self.runs(by) || p.output_root.join(file).exists();
        if self.runs(Stage::GenStimuli) {
            self.grid.validate()?;
            exists(&p.corpus_dir, "corpus_dir")?;
            exists(&p.labels, "labels")?;
        }
        if self.runs(Stage::Ingest) {
            exists(&p.predictions, "predictions")?;
            match &p.manifest {
                Some(m) if !m.exists() => return Err(Error::MissingPath(m.clone())),
                Some(_) => {}
                None if produced(MANIFEST_FILE, Stage::GenStimuli) => {}
                None => return Err(Error::MissingPath(self.manifest_path())),
            }
        }
        if self.runs(Stage::FitThresholds) && !produced(CELLS_FILE, Stage::Ingest) {
            return Err(Error::MissingPath(p.output_root.join(CELLS_FILE)));
        }
        if self.runs(Stage::FitChannel) && !produced(THRESHOLDS_FILE, Stage::FitThresholds) {
            return Err(Error::MissingPath(p.output_root.join(THRESHOLDS_FILE)));
        }
        if self.runs(Stage::Metrics) {
            if let Some(d) = &p.ood_dir {
                if !d.is_dir() {
                    return Err(Error::MissingPath(d.clone()));
                }
            }
            match (&p.cue_conflict_log, &p.cue_conflict_truth) {
                (Some(_), Some(_)) => {
                    exists(&p.cue_conflict_log, "cue_conflict_log")?;
                    exists(&p.cue_conflict_truth, "cue_conflict_truth")?;
                }
                (None, None) => {}
                _ => return Err(Error::Config("cue_conflict_log and cue_conflict_truth go together".into())),
            }
        }
        if (self.runs(Stage::Analyze) || self.runs(Stage::Report))
            && p.metrics.is_none()
            && !produced(METRICS_FILE, Stage::Metrics)
        {
            return Err(Error::Config("analyze/report need metrics: set paths.metrics or run the metrics stage".into()));
        }
        Ok(())
    }
}

pub fn load_classes(path: Option<&Path>) -> Result<SuperclassSet> {
    match path {
        Some(p) => SuperclassSet::from_file(p),
        None => Ok(SuperclassSet::default()),
    }
}

pub fn load_mapping(path: Option<&Path>, classes: &SuperclassSet) -> Result<SuperclassMapping> {
    match path {
        Some(p) => SuperclassMapping::load(p, classes),
        None => Ok(SuperclassMapping::identity(classes)),
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

pub fn stage_gen_stimuli(corpus_dir: &Path, labels: &Path, classes: &SuperclassSet, grid: &GridConfig, out: &Path) -> Result<StimulusManifest> {
    let corpus = load_corpus(corpus_dir, labels, classes)?;
    create_dir(out)?;
    generate_stimuli(&corpus, grid, out)
}

/// Writes `cells.csv` and `ingest.json`.
pub fn stage_ingest(
    manifest_path: &Path,
    predictions: &Path,
    mapping: &SuperclassMapping,
    model: Option<&str>,
    out: &Path,
) -> Result<IngestReport> {
    let manifest = StimulusManifest::read_jsonl(manifest_path)?;
    let records = read_prediction_log(predictions)?;
    let report = ingest_predictions(&records, &manifest, mapping, model)?;
    create_dir(out)?;
    write_cells_csv(&out.join(CELLS_FILE), &report.model_id, &report.cells)?;
    write_json(
        &out.join("ingest.json"),
        &serde_json::json!({
            "model_id": report.model_id,
            "n_records": report.n_records,
            "duplicate_warnings": report.duplicate_warnings,
            "unmapped": report.unmapped,
            "n_cells": report.cells.len(),
        }),
    )?;
    Ok(report)
}

/// Writes `thresholds.csv` and `psychometric_fits.json`.
pub fn stage_fit_thresholds(cells_csv: &Path, opts: &ThresholdOptions, out: &Path) -> Result<String> {
    let (model_id, cells) = read_cells_csv(cells_csv)?;
    let rows = fit_thresholds(&cells, opts)?;
    create_dir(out)?;
    write_thresholds_csv(&out.join(THRESHOLDS_FILE), &model_id, &rows)?;
    let fits: Vec<_> = rows.iter().map(|(f, _)| f).collect();
    write_json(&out.join("psychometric_fits.json"), &fits)?;
    Ok(model_id)
}

/// Writes `channel_fit.json`, plus the channel figure when `figure` is set.
pub fn stage_fit_channel(
    thresholds_csv: &Path,
    target: ChannelTarget,
    out: &Path,
    figure: Option<&ReportOptions>,
) -> Result<ChannelFit> {
    let (model_id, points) = read_thresholds_csv(thresholds_csv)?;
    let mut fit = fit_channel_with(&points, target)?;
    fit.model_id = Some(model_id);
    create_dir(out)?;
    write_json(&out.join(CHANNEL_FILE), &fit)?;
    if let Some(opts) = figure {
        write_channel_figure(&fit, &points, &out.join(CHANNEL_FIGURE), opts)?;
    }
    Ok(fit)
}

#[derive(Debug, Clone, Default)]
pub struct MetricsInputs {
    pub model_id: Option<String>,
    pub channel_fit: Option<PathBuf>,
    pub ood_dir: Option<PathBuf>,
    pub cue_conflict_log: Option<PathBuf>,
    pub cue_conflict_truth: Option<PathBuf>,
    pub model_info: Option<PathBuf>,
    pub ood: OodOptions,
}

fn select_model(records: Vec<crate::prediction_log::PredictionRecord>, model: &str) -> Vec<crate::prediction_log::PredictionRecord> {
    records.into_iter().filter(|r| r.model_id == model).collect()
}

/// Per-dataset accuracies from `<tag>.jsonl` + `<tag>.truth.csv` pairs,
/// in configured dataset order.
pub fn ood_dataset_accuracies(dir: &Path, model: &str, datasets: &[String], mapping: &SuperclassMapping) -> Result<Vec<DatasetAccuracy>> {
    let mut out = Vec::new();
    for tag in datasets {
        let log = dir.join(format!("{tag}.jsonl"));
        if !log.exists() {
            continue;
        }
        let truth_path = dir.join(format!("{tag}.truth.csv"));
        if !truth_path.exists() {
            return Err(Error::MissingPath(truth_path));
        }
        let truth = read_truth_csv(&truth_path)?;
        let records = select_model(read_prediction_log(&log)?, model);
        out.push(dataset_accuracy(tag, &records, &truth, mapping)?);
    }
    Ok(out)
}

/// Assemble one model's metrics; writes `metrics.json`.
pub fn stage_metrics(inputs: &MetricsInputs, mapping: &SuperclassMapping, out: &Path) -> Result<ModelMetrics> {
    let mut metrics = match &inputs.model_info {
        Some(p) => {
            let mut rows = crate::robustness_metrics::load_metrics_file(p)?;
            if rows.len() != 1 {
                return Err(Error::Data(format!("{}: model_info must describe one model", p.display())));
            }
            rows.remove(0)
        }
        None => ModelMetrics::new(""),
    };
    let channel = match &inputs.channel_fit {
        Some(p) if p.exists() => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?;
            Some(serde_json::from_str::<ChannelFit>(&text)?)
        }
        Some(p) => return Err(Error::MissingPath(p.clone())),
        None => None,
    };
    let model_id = inputs
        .model_id
        .clone()
        .or_else(|| channel.as_ref().and_then(|c| c.model_id.clone()))
        .or_else(|| (!metrics.model_id.is_empty()).then(|| metrics.model_id.clone()))
        .ok_or_else(|| Error::Config("model id unknown: pass one or provide a channel fit".into()))?;
    metrics.model_id = model_id.clone();
    if let Some(c) = &channel {
        metrics.bandwidth_octaves = Some(c.bandwidth_octaves);
    }
    if let Some(dir) = &inputs.ood_dir {
        let per_dataset = ood_dataset_accuracies(dir, &model_id, &inputs.ood.datasets, mapping)?;
        metrics.ood_accuracy = Some(ood_accuracy(&per_dataset, &inputs.ood)?);
        create_dir(out)?;
        write_json(&out.join("ood_datasets.json"), &per_dataset)?;
    }
    if let (Some(log), Some(truth)) = (&inputs.cue_conflict_log, &inputs.cue_conflict_truth) {
        let records = select_model(read_prediction_log(log)?, &model_id);
        metrics.shape_bias = Some(shape_bias(&cue_conflict_trials(&records, truth, mapping)?)?);
    }
    metrics.validate()?;
    create_dir(out)?;
    write_json(&out.join(METRICS_FILE), &metrics)?;
    Ok(metrics)
}

/// Load metrics from `extra` and `own`, the latter replacing same-named
/// models.
pub fn collect_metrics(extra: Option<&Path>, own: Option<&Path>) -> Result<Vec<ModelMetrics>> {
    let mut all = match extra {
        Some(p) => load_metrics(p)?,
        None => Vec::new(),
    };
    if let Some(p) = own.filter(|p| p.exists()) {
        for m in load_metrics(p)? {
            match all.iter_mut().find(|x| x.model_id == m.model_id) {
                Some(slot) => *slot = m,
                None => all.push(m),
            }
        }
    }
    Ok(all)
}

pub fn stage_analyze(metrics: &[ModelMetrics], out: &Path, opts: &ReportOptions) -> Result<()> {
    write_analyses(&analyze(metrics), out, opts)
}

pub fn stage_report(metrics: &[ModelMetrics], out: &Path, opts: &ReportOptions) -> Result<()> {
    emit_report(metrics, &analyze(metrics), out, opts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub success: bool,
    pub stages: Vec<StageRecord>,
    /// Headline results of this run, when the stage ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelFit>,
}

/// Error from a named pipeline stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {}: {}", self.stage.name(), self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(LOCK_FILE);
        let mut f: File = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Config(format!("{} exists: another run is using this output root", path.display()))
            } else {
                Error::io(format!("creating {}", path.display()), e)
            }
        })?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(Self(path))
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Recorded in the summary and figures; `None` for reproducible output.
    pub timestamp: Option<String>,
}

/// Validate, then run the selected stages in order. The summary is written
/// even when a stage fails; later stages are marked skipped and outputs of
/// earlier stages are kept.
pub fn run_pipeline(config: &PipelineConfig, opts: &RunOptions) -> Result<RunSummary, StageError> {
    let first = config.stages.first().copied().unwrap_or(Stage::GenStimuli);
    let setup_err = |error| StageError { stage: first, error };
    config.validate().map_err(setup_err)?;
    let classes = load_classes(config.paths.superclasses.as_deref()).map_err(setup_err)?;
    let mapping = load_mapping(config.paths.mapping.as_deref(), &classes).map_err(setup_err)?;

    let root = &config.paths.output_root;
    create_dir(root).map_err(setup_err)?;
    let _lock = Lock::acquire(root).map_err(setup_err)?;

    let report_opts = ReportOptions {
        timestamp: opts.timestamp.clone(),
    };
    let mut summary = RunSummary {
        tool: "vfa".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: config.hash(),
        timestamp: opts.timestamp.clone(),
        success: true,
        stages: Vec::new(),
        channel: None,
    };
    let mut failure = None;
    for &stage in &config.stages {
        if failure.is_some() {
            summary.stages.push(StageRecord {
                stage,
                status: StageStatus::Skipped,
                error: None,
            });
            continue;
        }
        let result = run_stage(stage, config, &classes, &mapping, &report_opts, &mut summary);
        match result {
            Ok(()) => summary.stages.push(StageRecord {
                stage,
                status: StageStatus::Ok,
                error: None,
            }),
            Err(error) => {
                summary.success = false;
                summary.stages.push(StageRecord {
                    stage,
                    status: StageStatus::Failed,
                    error: Some(error.to_string()),
                });
                failure = Some(StageError { stage, error });
            }
        }
    }
    let written = write_json(&root.join(SUMMARY_FILE), &summary);
    if let Some(f) = failure {
        return Err(f);
    }
    written.map_err(|error| StageError {
        stage: *config.stages.last().unwrap(),
        error,
    })?;
    Ok(summary)
}

fn run_stage(
    stage: Stage,
    config: &PipelineConfig,
    classes: &SuperclassSet,
    mapping: &SuperclassMapping,
    report_opts: &ReportOptions,
    summary: &mut RunSummary,
) -> Result<()> {
    let p = &config.paths;
    let root = &p.output_root;
    match stage {
        Stage::GenStimuli => {
            stage_gen_stimuli(
                p.corpus_dir.as_deref().unwrap(),
                p.labels.as_deref().unwrap(),
                classes,
                &config.grid,
                root,
            )?;
        }
        Stage::Ingest => {
            stage_ingest(
                &config.manifest_path(),
                p.predictions.as_deref().unwrap(),
                mapping,
                config.model.as_deref(),
                root,
            )?;
        }
        Stage::FitThresholds => {
            stage_fit_thresholds(&root.join(CELLS_FILE), &config.criterion.threshold_options(), root)?;
        }
        Stage::FitChannel => {
            let figure = config.analysis.channel_figure.then_some(report_opts);
            summary.channel = Some(stage_fit_channel(
                &root.join(THRESHOLDS_FILE),
                config.criterion.channel_target,
                root,
                figure,
            )?);
        }
        Stage::Metrics => {
            let channel = root.join(CHANNEL_FILE);
            let inputs = MetricsInputs {
                model_id: config.model.clone(),
                channel_fit: channel.exists().then_some(channel),
                ood_dir: p.ood_dir.clone(),
                cue_conflict_log: p.cue_conflict_log.clone(),
                cue_conflict_truth: p.cue_conflict_truth.clone(),
                model_info: p.model_info.clone(),
                ood: OodOptions {
                    datasets: config.analysis.ood_datasets.clone().unwrap_or_else(default_ood_datasets),
                    partial: config.analysis.partial_ood,
                    weighting: config.analysis.ood_weighting,
                },
            };
            stage_metrics(&inputs, mapping, root)?;
        }
        Stage::Analyze => {
            let metrics = collect_metrics(p.metrics.as_deref(), Some(&root.join(METRICS_FILE)))?;
            stage_analyze(&metrics, &root.join(ANALYSIS_DIR), report_opts)?;
        }
        Stage::Report => {
            let metrics = collect_metrics(p.metrics.as_deref(), Some(&root.join(METRICS_FILE)))?;
            stage_report(&metrics, &root.join(REPORT_DIR), report_opts)?;
        }
    }
    Ok(())
}
