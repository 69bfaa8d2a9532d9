//! Spatial-frequency noise experiments for image classifiers.
//!
//! The crate generates band-limited noise stimuli, turns model predictions
//! on them into per-band noise thresholds, fits a Gaussian channel to the
//! resulting sensitivities and relates channel bandwidth to robustness
//! metrics across models. Model inference happens elsewhere; the boundary
//! is a stimulus manifest going out and a prediction log coming back.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis_stats;
pub mod channel_fit;
pub mod error;
pub mod lsq;
pub mod pipeline;
pub mod prediction_log;
pub mod psychometrics;
pub mod raster;
pub mod report;
pub mod robustness_metrics;
pub mod spectral_noise;
pub mod stimulus_gen;
pub mod superclass;
pub mod svg;
pub mod synthetic;

pub use channel_fit::{bandwidth_from_sigma, fit_channel, ChannelFit, ChannelTarget};
pub use error::{Error, ErrorKind, Result};
pub use pipeline::{run_pipeline, PipelineConfig, Stage};
pub use prediction_log::{ingest_predictions, CellAccuracy, PredictionRecord, SuperclassMapping};
pub use psychometrics::{fit_thresholds, Censoring, ThresholdOptions, ThresholdPoint};
pub use robustness_metrics::{shape_bias, ModelMetrics};
pub use spectral_noise::{design_bandpass_mask, synthesize_noise, FrequencyBand, NoiseField, NoiseSpec};
pub use stimulus_gen::{generate_stimuli, GridConfig, StimulusManifest};
pub use superclass::SuperclassSet;
