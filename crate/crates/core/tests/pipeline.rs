use vfa::pipeline::{run_pipeline, PathsConfig, PipelineConfig, RunOptions, Stage, StageStatus, SUMMARY_FILE};
use vfa::prediction_log::write_prediction_log;
use vfa::stimulus_gen::plan_stimuli;
use vfa::synthetic::{simulate, synthetic_corpus, synthetic_grid, SyntheticObserver};
use vfa::{Error, SuperclassSet};

fn fixture_config(dir: &std::path::Path, observer: SyntheticObserver, stages: Vec<Stage>) -> PipelineConfig {
    let classes = SuperclassSet::default();
    let manifest = plan_stimuli(&synthetic_corpus(32, &classes), &synthetic_grid()).unwrap();
    manifest.write_jsonl(&dir.join("manifest.jsonl")).unwrap();
    write_prediction_log(&dir.join("preds.jsonl"), &simulate(&observer, &manifest, "obs", &classes)).unwrap();
    PipelineConfig {
        paths: PathsConfig {
            manifest: Some(dir.join("manifest.jsonl")),
            predictions: Some(dir.join("preds.jsonl")),
            output_root: dir.join("out"),
            ..Default::default()
        },
        grid: synthetic_grid(),
        criterion: Default::default(),
        analysis: Default::default(),
        model: None,
        stages,
    }
}

#[test]
fn config_roundtrips_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture_config(tmp.path(), SyntheticObserver::default(), Stage::ALL.to_vec());
    let json = config.to_json().unwrap();
    let back: PipelineConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, config);
    assert_eq!(back.hash(), config.hash());
    assert_eq!(back.to_json().unwrap(), json);
}

#[test]
fn relative_paths_resolve_against_config_dir() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("sub")).unwrap();
    std::fs::write(
        tmp.path().join("sub/c.json"),
        r#"{"paths": {"predictions": "p.jsonl", "output_root": "o"}, "stages": ["ingest"]}"#,
    )
    .unwrap();
    let c = PipelineConfig::from_json_file(&tmp.path().join("sub/c.json")).unwrap();
    assert_eq!(c.paths.predictions.unwrap(), tmp.path().join("sub/p.jsonl"));
    assert_eq!(c.paths.output_root, tmp.path().join("sub/o"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.json"), r#"{"paths": {"output_root": "o"}, "stagez": []}"#).unwrap();
    let err = PipelineConfig::from_json_file(&tmp.path().join("c.json")).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn failed_stage_is_marked_and_earlier_outputs_kept() {
    let tmp = tempfile::tempdir().unwrap();
    // centred at 1 cyc/img with a narrow channel: too few bands cross 50%
    let observer = SyntheticObserver {
        peak_log2_freq: 0.0,
        bandwidth_octaves: 0.8,
        ..SyntheticObserver::default()
    };
    let config = fixture_config(tmp.path(), observer, vec![Stage::Ingest, Stage::FitThresholds, Stage::FitChannel, Stage::Metrics]);
    let err = run_pipeline(&config, &RunOptions::default()).unwrap_err();
    assert_eq!(err.stage, Stage::FitChannel);
    assert!(matches!(err.error, Error::InsufficientData(_)), "{}", err.error);
    assert!(err.to_string().starts_with("stage fit-channel:"));

    let out = &config.paths.output_root;
    assert!(out.join("cells.csv").exists());
    assert!(out.join("thresholds.csv").exists());
    assert!(!out.join("channel_fit.json").exists());
    let summary: vfa::pipeline::RunSummary =
        serde_json::from_str(&std::fs::read_to_string(out.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert!(!summary.success);
    let statuses: Vec<_> = summary.stages.iter().map(|s| s.status.clone()).collect();
    assert_eq!(statuses, [StageStatus::Ok, StageStatus::Ok, StageStatus::Failed, StageStatus::Skipped]);
    assert!(!out.join(".vfa.lock").exists());
}

#[test]
fn rerun_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture_config(tmp.path(), SyntheticObserver::default(), vec![Stage::Ingest, Stage::FitThresholds, Stage::FitChannel]);
    let first = run_pipeline(&config, &RunOptions::default()).unwrap();
    let bytes = std::fs::read(config.paths.output_root.join("thresholds.csv")).unwrap();
    let second = run_pipeline(&config, &RunOptions::default()).unwrap();
    assert_eq!(first, second);
    assert_eq!(bytes, std::fs::read(config.paths.output_root.join("thresholds.csv")).unwrap());
}

#[test]
fn stages_out_of_order_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture_config(tmp.path(), SyntheticObserver::default(), vec![Stage::FitThresholds, Stage::Ingest]);
    assert!(matches!(config.validate(), Err(Error::Config(_))));
}
