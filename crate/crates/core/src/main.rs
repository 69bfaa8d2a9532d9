use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vfa::channel_fit::ChannelTarget;
use vfa::pipeline::{self, MetricsInputs, PipelineConfig, RunOptions, Stage};
use vfa::psychometrics::ThresholdOptions;
use vfa::report::ReportOptions;
use vfa::robustness_metrics::{default_ood_datasets, OodOptions, OodWeighting};
use vfa::stimulus_gen::{plan_stimuli, GridConfig, MANIFEST_FILE};
use vfa::synthetic::{simulate, synthetic_corpus, synthetic_grid, SyntheticObserver};
use vfa::{Error, Result};

#[derive(Parser)]
#[command(name = "vfa", version, about = "Critical-band noise experiments for image classifiers")]
struct Cli {
    /// Pipeline config (JSON). Required by `run`; supplies defaults elsewhere.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed for noise synthesis.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log warnings and errors only.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Omit timestamps so outputs are byte-identical across runs.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the noise grid for a corpus and write the manifest.
    GenStimuli {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// `id,file,superclass[,dataset_tag]` CSV.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Grid JSON (bands, sd_ladder, image_size, seeds_per_cell, base_seed).
        #[arg(long)]
        grid: Option<PathBuf>,
        #[command(flatten)]
        vocab: Vocab,
    },
    /// Turn a prediction log into per-cell accuracies.
    Ingest {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        vocab: Vocab,
    },
    /// Fit psychometric curves and extract per-band thresholds.
    FitThresholds {
        #[arg(long)]
        cells: Option<PathBuf>,
        #[arg(long)]
        criterion: Option<f64>,
        #[arg(long)]
        chance: Option<f64>,
    },
    /// Fit the Gaussian channel to measured thresholds.
    FitChannel {
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, value_enum)]
        target: Option<TargetArg>,
        /// Also write the channel figure (SVG + CSV).
        #[arg(long)]
        svg: bool,
    },
    /// Assemble the model's metrics record.
    Metrics {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        channel_fit: Option<PathBuf>,
        #[arg(long)]
        ood_dir: Option<PathBuf>,
        #[arg(long, requires = "cue_conflict_truth")]
        cue_conflict_log: Option<PathBuf>,
        #[arg(long, requires = "cue_conflict_log")]
        cue_conflict_truth: Option<PathBuf>,
        #[arg(long)]
        model_info: Option<PathBuf>,
        /// Pool trials across datasets instead of averaging accuracies.
        #[arg(long)]
        pooled: bool,
        /// Accept a subset of the OOD datasets.
        #[arg(long)]
        partial: bool,
        #[command(flatten)]
        vocab: Vocab,
    },
    /// Cross-model regressions and group comparison.
    Analyze {
        /// Metrics JSON file or directory of them.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Model table plus all figures.
    Report {
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run the stages listed in the config.
    Run,
    /// Write a planted-observer fixture: manifest, prediction log, config.
    Simulate {
        /// Trials per grid cell.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value = "synthetic-observer")]
        model: String,
    },
}

#[derive(Args, Clone, Default)]
struct Vocab {
    /// `raw_label,superclass` CSV; identity mapping when absent.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Superclass names, one per line.
    #[arg(long)]
    superclasses: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Sensitivity,
    LogSensitivity,
}

impl From<TargetArg> for ChannelTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Sensitivity => ChannelTarget::Sensitivity,
            TargetArg::LogSensitivity => ChannelTarget::LogSensitivity,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .format_timestamp(None)
        .format_target(false)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => {
            match stage {
                Some(s) => eprintln!("error: stage {s}: {e}"),
                None => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn require(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn timestamp(cli: &Cli) -> Option<String> {
    (!cli.no_timestamp).then(|| humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string())
}

type CliResult = std::result::Result<(), (Option<&'static str>, Error)>;

fn execute(cli: Cli) -> CliResult {
    let config = match &cli.config {
        Some(p) => Some(PipelineConfig::from_json_file(p).map_err(|e| (None, e))?),
        None => None,
    };
    if let Command::Run = cli.command {
        let mut config = config.ok_or((None, Error::Config("run needs --config".into())))?;
        if let Some(out) = &cli.out {
            config.paths.output_root = out.clone();
        }
        if let Some(seed) = cli.seed {
            config.grid.base_seed = seed;
        }
        let summary = pipeline::run_pipeline(&config, &RunOptions { timestamp: timestamp(&cli) })
            .map_err(|e| (Some(e.stage.name()), e.error))?;
        for s in &summary.stages {
            log::info!("{}: {:?}", s.stage.name(), s.status);
        }
        if let Some(c) = &summary.channel {
            log::info!("bandwidth {:.4} octaves, peak {:.3} cyc/img", c.bandwidth_octaves, c.peak_freq());
        }
        return Ok(());
    }
    let stage = match &cli.command {
        Command::GenStimuli { .. } => Some(Stage::GenStimuli),
        Command::Ingest { .. } => Some(Stage::Ingest),
        Command::FitThresholds { .. } => Some(Stage::FitThresholds),
        Command::FitChannel { .. } => Some(Stage::FitChannel),
        Command::Metrics { .. } => Some(Stage::Metrics),
        Command::Analyze { .. } => Some(Stage::Analyze),
        Command::Report { .. } => Some(Stage::Report),
        Command::Run | Command::Simulate { .. } => None,
    };
    single(&cli, config.as_ref()).map_err(|e| (stage.map(|s| s.name()), e))
}

fn single(cli: &Cli, config: Option<&PipelineConfig>) -> Result<()> {
    let out = cli
        .out
        .clone()
        .or_else(|| config.map(|c| c.paths.output_root.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    let paths = config.map(|c| c.paths.clone()).unwrap_or_default();
    let report_opts = ReportOptions { timestamp: timestamp(cli) };
    let vocab = |v: &Vocab| -> Result<_> {
        let classes = pipeline::load_classes(v.superclasses.as_deref().or(paths.superclasses.as_deref()))?;
        let mapping = pipeline::load_mapping(v.mapping.as_deref().or(paths.mapping.as_deref()), &classes)?;
        Ok((classes, mapping))
    };
    match &cli.command {
        Command::GenStimuli { corpus, labels, grid, vocab: v } => {
            let mut grid_cfg = match grid {
                Some(g) => GridConfig::from_json_file(g)?,
                None => config.map(|c| c.grid.clone()).unwrap_or_default(),
            };
            if let Some(seed) = cli.seed {
                grid_cfg.base_seed = seed;
            }
            let (classes, _) = vocab(v)?;
            let corpus = require(corpus.clone().or(paths.corpus_dir), "corpus")?;
            let labels = require(labels.clone().or(paths.labels), "labels")?;
            let manifest = pipeline::stage_gen_stimuli(&corpus, &labels, &classes, &grid_cfg, &out)?;
            let failed = manifest.entries.iter().filter(|e| e.error.is_some()).count();
            log::info!("{} stimuli ({} failed) -> {}", manifest.entries.len(), failed, out.join(MANIFEST_FILE).display());
        }
        Command::Ingest { manifest, predictions, model, vocab: v } => {
            let (_, mapping) = vocab(v)?;
            let manifest = manifest
                .clone()
                .or(paths.manifest)
                .unwrap_or_else(|| out.join(MANIFEST_FILE));
            let predictions = require(predictions.clone().or(paths.predictions), "predictions")?;
            let model = model.clone().or_else(|| config.and_then(|c| c.model.clone()));
            let report = pipeline::stage_ingest(&manifest, &predictions, &mapping, model.as_deref(), &out)?;
            if report.duplicate_warnings > 0 {
                log::warn!("{} duplicate stimulus ids (last record kept)", report.duplicate_warnings);
            }
            log::info!("{}: {} records, {} unmapped, {} cells", report.model_id, report.n_records, report.unmapped, report.cells.len());
        }
        Command::FitThresholds { cells, criterion, chance } => {
            let defaults = config.map(|c| c.criterion.threshold_options()).unwrap_or_default();
            let opts = ThresholdOptions {
                criterion: criterion.unwrap_or(defaults.criterion),
                chance: chance.unwrap_or(defaults.chance),
            };
            let cells = cells.clone().unwrap_or_else(|| out.join(pipeline::CELLS_FILE));
            let model = pipeline::stage_fit_thresholds(&cells, &opts, &out)?;
            log::info!("{model}: thresholds -> {}", out.join(pipeline::THRESHOLDS_FILE).display());
        }
        Command::FitChannel { thresholds, target, svg } => {
            let target = target
                .map(ChannelTarget::from)
                .or_else(|| config.map(|c| c.criterion.channel_target))
                .unwrap_or_default();
            let thresholds = thresholds.clone().unwrap_or_else(|| out.join(pipeline::THRESHOLDS_FILE));
            let fit = pipeline::stage_fit_channel(&thresholds, target, &out, svg.then_some(&report_opts))?;
            for c in &fit.censored_bands {
                log::info!("excluded band {} ({} cyc/img): {}", c.band_index, c.center_freq, c.censoring.as_str());
            }
            log::info!(
                "bandwidth {:.4} octaves, peak {:.3} cyc/img, {} bands",
                fit.bandwidth_octaves,
                fit.peak_freq(),
                fit.n_points
            );
        }
        Command::Metrics {
            model,
            channel_fit,
            ood_dir,
            cue_conflict_log,
            cue_conflict_truth,
            model_info,
            pooled,
            partial,
            vocab: v,
        } => {
            let (_, mapping) = vocab(v)?;
            let default_channel = out.join(pipeline::CHANNEL_FILE);
            let toggles = config.map(|c| c.analysis.clone()).unwrap_or_default();
            let inputs = MetricsInputs {
                model_id: model.clone().or_else(|| config.and_then(|c| c.model.clone())),
                channel_fit: channel_fit.clone().or_else(|| default_channel.exists().then_some(default_channel)),
                ood_dir: ood_dir.clone().or(paths.ood_dir),
                cue_conflict_log: cue_conflict_log.clone().or(paths.cue_conflict_log),
                cue_conflict_truth: cue_conflict_truth.clone().or(paths.cue_conflict_truth),
                model_info: model_info.clone().or(paths.model_info),
                ood: OodOptions {
                    datasets: toggles.ood_datasets.unwrap_or_else(default_ood_datasets),
                    partial: *partial || toggles.partial_ood,
                    weighting: if *pooled { OodWeighting::Pooled } else { toggles.ood_weighting },
                },
            };
            let m = pipeline::stage_metrics(&inputs, &mapping, &out)?;
            log::info!("{} -> {}", m.model_id, out.join(pipeline::METRICS_FILE).display());
        }
        Command::Analyze { metrics } | Command::Report { metrics } => {
            let source = require(metrics.clone().or(paths.metrics), "metrics")?;
            let rows = pipeline::collect_metrics(Some(&source), None)?;
            if matches!(cli.command, Command::Analyze { .. }) {
                pipeline::stage_analyze(&rows, &out, &report_opts)?;
            } else {
                pipeline::stage_report(&rows, &out, &report_opts)?;
            }
            log::info!("{} models -> {}", rows.len(), out.display());
        }
        Command::Simulate { trials, model } => write_fixture(&out, *trials, model, cli.seed)?,
        Command::Run => unreachable!(),
    }
    Ok(())
}

fn write_fixture(out: &Path, trials: usize, model: &str, seed: Option<u64>) -> Result<()> {
    let classes = vfa::SuperclassSet::default();
    let mut grid = synthetic_grid();
    grid.base_seed = seed.unwrap_or(0);
    let manifest = plan_stimuli(&synthetic_corpus(trials, &classes), &grid)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        context: format!("creating {}", out.display()),
        source: e,
    })?;
    manifest.write_jsonl(&out.join(MANIFEST_FILE))?;
    let records = simulate(&SyntheticObserver::default(), &manifest, model, &classes);
    vfa::prediction_log::write_prediction_log(&out.join("predictions.jsonl"), &records)?;
    let config = PipelineConfig {
        paths: pipeline::PathsConfig {
            manifest: Some(MANIFEST_FILE.into()),
            predictions: Some("predictions.jsonl".into()),
            output_root: "run".into(),
            ..Default::default()
        },
        grid,
        criterion: Default::default(),
        analysis: Default::default(),
        model: None,
        stages: vec![Stage::Ingest, Stage::FitThresholds, Stage::FitChannel],
    };
    std::fs::write(out.join("config.json"), config.to_json()? + "\n").map_err(|e| Error::Io {
        context: "writing config.json".into(),
        source: e,
    })?;
    log::info!("fixture with {} records -> {}", records.len(), out.display());
    Ok(())
}
