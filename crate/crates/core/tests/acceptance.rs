//! Acceptance criteria 1–8. Each test prints one `ACCEPTANCE #n PASS|FAIL`
//! line and then asserts, so `cargo test --test acceptance -- --nocapture`
//! gives a one-line-per-criterion summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use vfa::analysis_stats::{compare_groups, extrapolate_to_bandwidth, pearson, regress, XTransform};
use vfa::channel_fit::{fit_gaussian, gaussian, ChannelTarget, GaussianChannelProblem, FWHM_PER_SIGMA};
use vfa::lsq::LeastSquaresProblem;
use vfa::pipeline::{self, PathsConfig, PipelineConfig, RunOptions, Stage};
use vfa::prediction_log::{write_prediction_log, CellAccuracy, PredictionRecord, SuperclassMapping};
use vfa::psychometrics::{fit_psychometric, fit_thresholds, ThresholdOptions};
use vfa::report::{analyze, emit_report, ReportOptions};
use vfa::robustness_metrics::{
    cue_conflict_trials, dataset_accuracy, load_metrics_file, ood_accuracy, shape_bias, CueConflictTrial,
    DatasetAccuracy, ModelMetrics, OodOptions,
};
use vfa::spectral_noise::{synthesize_noise, FrequencyBand, NoiseSpec};
use vfa::stimulus_gen::plan_stimuli;
use vfa::synthetic::{simulate, synthetic_corpus, synthetic_grid, SyntheticObserver};
use vfa::SuperclassSet;

fn report(n: u32, pass: bool, detail: String) {
    println!("ACCEPTANCE #{n} {}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- #1

/// Fraction of non-DC power inside `|log2(r / c)| <= w/2 + t`, with the
/// spectrum from a fresh 2D FFT and radii from signed bin indices.
fn energy_inside(values: &[f64], n: usize, band: &FrequencyBand) -> f64 {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in buf.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = buf[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            buf[y * n + x] = col[y];
        }
    }
    let half_support = band.width_octaves / 2.0 + band.transition_octaves;
    let signed = |k: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    let (mut inside, mut total) = (0.0, 0.0);
    for ky in 0..n {
        for kx in 0..n {
            if kx == 0 && ky == 0 {
                continue;
            }
            let r = signed(kx).hypot(signed(ky));
            let p = buf[ky * n + kx].norm_sqr();
            total += p;
            if (r / band.center_freq).log2().abs() <= half_support + 1e-9 {
                inside += p;
            }
        }
    }
    inside / total
}

#[test]
fn criterion_1_spectral_confinement() {
    let n = 224;
    let bands = FrequencyBand::default_ladder();
    let start = Instant::now();
    let worst: Vec<(f64, f64)> = bands
        .iter()
        .map(|band| {
            let min = (0..128u64)
                .into_par_iter()
                .map(|seed| {
                    let spec = NoiseSpec {
                        band: *band,
                        target_sd: 0.1,
                        seed,
                    };
                    let field = synthesize_noise(&spec, n, n).unwrap();
                    energy_inside(&field.values, n, band)
                })
                .reduce(|| 1.0, f64::min);
            (band.center_freq, min)
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = bands.len() == 7
        && bands.iter().all(|b| b.width_octaves == 1.0 && b.transition_octaves == 0.25)
        && worst.iter().all(|&(_, f)| f >= 0.95)
        && elapsed < 30.0;
    let min = worst.iter().map(|w| w.1).fold(1.0, f64::min);
    report(1, ok, format!("7 bands x 128 seeds, min in-band energy {min:.12}, {elapsed:.1} s (< 30 s)"));
    assert!(ok, "{worst:?} in {elapsed:.1} s");
}

// ---------------------------------------------------------------- #2

#[test]
fn criterion_2_noise_determinism_and_sd() {
    let start = Instant::now();
    let mut worst_rel: f64 = 0.0;
    let mut identical = true;
    for (i, band) in FrequencyBand::default_ladder().iter().enumerate() {
        for &sd in &[0.02, 0.1, 0.64] {
            let spec = NoiseSpec {
                band: *band,
                target_sd: sd,
                seed: 1000 + i as u64,
            };
            let a = synthesize_noise(&spec, 224, 224).unwrap();
            let b = synthesize_noise(&spec, 224, 224).unwrap();
            identical &= a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits());
            let n = a.values.len() as f64;
            let mean = a.values.iter().sum::<f64>() / n;
            let emp = (a.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            worst_rel = worst_rel.max(rel(emp, sd));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = identical && worst_rel <= 1e-9 && elapsed < 5.0;
    report(2, ok, format!("bit-identical {identical}, max SD rel err {worst_rel:.2e} (<= 1e-9), {elapsed:.2} s (< 5 s)"));
    assert!(ok);
}

// ---------------------------------------------------------------- #3 and #8

fn write_synthetic_fixture(dir: &Path, trials: usize) {
    let classes = SuperclassSet::default();
    let grid = synthetic_grid();
    let manifest = plan_stimuli(&synthetic_corpus(trials, &classes), &grid).unwrap();
    manifest.write_jsonl(&dir.join("manifest.jsonl")).unwrap();
    let records = simulate(&SyntheticObserver::default(), &manifest, "planted", &classes);
    write_prediction_log(&dir.join("predictions.jsonl"), &records).unwrap();
}

fn synthetic_config(dir: &Path, out: &str, stages: Vec<Stage>) -> PipelineConfig {
    PipelineConfig {
        paths: PathsConfig {
            manifest: Some(dir.join("manifest.jsonl")),
            predictions: Some(dir.join("predictions.jsonl")),
            metrics: Some(fixture("table1.json")),
            output_root: dir.join(out),
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
fn criterion_3_synthetic_observer_recovery() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic_fixture(tmp.path(), 200);
    let config = synthetic_config(tmp.path(), "run", vec![Stage::Ingest, Stage::FitThresholds, Stage::FitChannel]);
    let summary = pipeline::run_pipeline(&config, &RunOptions::default()).unwrap();
    // read back the artifact, not the in-memory summary
    let text = std::fs::read_to_string(config.paths.output_root.join(pipeline::CHANNEL_FILE)).unwrap();
    let fit: vfa::ChannelFit = serde_json::from_str(&text).unwrap();
    assert_eq!(summary.channel.as_ref(), Some(&fit));

    // planted values, computed from first principles
    let planted_bw = 2.0;
    let planted_mu = 8f64.log2();
    let elapsed = start.elapsed().as_secs_f64();
    let bw_err = (fit.bandwidth_octaves - planted_bw).abs();
    let mu_err = (fit.peak_log2_freq - planted_mu).abs();
    let ok = bw_err <= 0.15 && mu_err <= 0.2 && fit.n_points >= 3 && elapsed < 60.0;
    report(
        3,
        ok,
        format!(
            "bandwidth {:.4} (|err| {bw_err:.4} <= 0.15), mu {:.4} (|err| {mu_err:.4} <= 0.2), {} bands, {elapsed:.1} s",
            fit.bandwidth_octaves, fit.peak_log2_freq, fit.n_points
        ),
    );
    assert!(ok, "{fit:?}");
}

#[test]
fn criterion_8_pipeline_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic_fixture(tmp.path(), 64);
    let stages = vec![
        Stage::Ingest,
        Stage::FitThresholds,
        Stage::FitChannel,
        Stage::Metrics,
        Stage::Analyze,
        Stage::Report,
    ];
    let mut trees = Vec::new();
    for out in ["run_a", "run_b"] {
        let config = synthetic_config(tmp.path(), out, stages.clone());
        pipeline::run_pipeline(&config, &RunOptions { timestamp: None }).unwrap();
        let root = config.paths.output_root;
        let mut files = BTreeMap::new();
        for entry in walk(&root) {
            let relp = entry.strip_prefix(&root).unwrap().to_path_buf();
            files.insert(relp, std::fs::read(&entry).unwrap());
        }
        trees.push(files);
    }
    let csvs: Vec<&PathBuf> = trees[0].keys().filter(|p| p.extension().is_some_and(|e| e == "csv")).collect();
    let same_names = trees[0].keys().eq(trees[1].keys());
    let differing: Vec<String> = trees[0]
        .iter()
        .filter(|(p, _)| p.extension().is_some_and(|e| e == "csv" || e == "svg"))
        .filter(|(p, bytes)| trees[1].get(*p) != Some(bytes))
        .map(|(p, _)| p.display().to_string())
        .collect();
    let ok = same_names && differing.is_empty() && csvs.len() >= 8;
    report(8, ok, format!("{} CSV files byte-identical across two runs, differing: {differing:?}", csvs.len()));
    assert!(ok);
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

// ---------------------------------------------------------------- #4

#[test]
fn criterion_4_psychometric_exactness() {
    let band = FrequencyBand::new(8.0, 1.0, 0.25);
    let (upper, lower) = (0.92, 1.0 / 16.0);
    let mut worst: f64 = 0.0;
    let mut worst_resub: f64 = 0.0;
    for &(mid, slope) in &[(-2.0, -2.5), (-3.3, -1.2), (-1.0, -4.0), (-4.5, -0.9)] {
        let acc = |sd: f64| lower + (upper - lower) / (1.0 + (-slope * (sd.log2() - mid)).exp());
        let cells: Vec<CellAccuracy> = [0.02, 0.04, 0.08, 0.16, 0.32, 0.64]
            .iter()
            .map(|&sd| CellAccuracy {
                band_index: Some(0),
                band: Some(band),
                sd,
                n_trials: 1000,
                n_correct: 0,
                accuracy: acc(sd),
            })
            .collect();
        let opts = ThresholdOptions {
            criterion: 0.5,
            chance: lower,
        };
        let fit = fit_psychometric(&cells, upper, &opts).unwrap();
        worst = worst.max(rel(fit.midpoint_log2_sd, mid)).max(rel(fit.slope, slope));
        worst = worst.max(rel(fit.upper, upper)).max(rel(fit.lower, lower));

        let mut all = cells.clone();
        all.push(CellAccuracy {
            band_index: None,
            band: None,
            sd: 0.0,
            n_trials: 1000,
            n_correct: 0,
            accuracy: upper,
        });
        let (_, point) = &fit_thresholds(&all, &opts).unwrap()[0];
        let t = point.threshold_sd.expect("measured threshold");
        worst_resub = worst_resub.max((acc(t) - 0.5).abs());
    }
    let ok = worst <= 1e-6 && worst_resub <= 1e-9;
    report(4, ok, format!("max param rel err {worst:.2e} (<= 1e-6), resubstitution |acc - 0.5| {worst_resub:.2e} (<= 1e-9)"));
    assert!(ok);
}

// ---------------------------------------------------------------- #5

#[test]
fn criterion_5_channel_fit_properties() {
    let xs: Vec<f64> = (0..7).map(f64::from).collect();
    // noisy, non-Gaussian perturbation so invariances are not trivially exact
    let wiggle = [1.03, 0.97, 1.05, 0.99, 1.02, 0.96, 1.04];
    let base: Vec<f64> = xs.iter().zip(wiggle).map(|(&x, w)| w * gaussian(&[8.0, 3.2, 1.1], x)).collect();
    let (p0, _, _) = fit_gaussian(&xs, &base, ChannelTarget::Sensitivity).unwrap();

    let mut scale_err: f64 = 0.0;
    for k in [0.01, 7.0, 1e3] {
        let scaled: Vec<f64> = base.iter().map(|s| s * k).collect();
        let (p, _, _) = fit_gaussian(&xs, &scaled, ChannelTarget::Sensitivity).unwrap();
        scale_err = scale_err.max(rel(p[1], p0[1])).max(rel(p[2], p0[2])).max(rel(p[0], k * p0[0]));
    }
    let mut shift_err: f64 = 0.0;
    for c in [-1.5, 0.5, 2.0] {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let (p, _, _) = fit_gaussian(&shifted, &base, ChannelTarget::Sensitivity).unwrap();
        shift_err = shift_err.max((p[1] - (p0[1] + c)).abs()).max(rel(p[2], p0[2]));
    }

    // analytic Jacobian vs central differences
    let problem = GaussianChannelProblem {
        x: xs.clone(),
        s: base.clone(),
    };
    let mut jac_err: f64 = 0.0;
    for params in [[8.0, 3.2, 1.1], [2.0, 1.0, 0.6], [15.0, 5.5, 2.3]] {
        let m = xs.len();
        let mut jac = vec![0.0; m * 3];
        problem.jacobian(&params, &mut jac);
        for j in 0..3 {
            let h = 1e-6 * params[j].abs().max(1.0);
            let (mut plus, mut minus) = (params, params);
            plus[j] += h;
            minus[j] -= h;
            let (mut rp, mut rm) = (vec![0.0; m], vec![0.0; m]);
            problem.residuals(&plus, &mut rp);
            problem.residuals(&minus, &mut rm);
            for i in 0..m {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                let an = jac[i * 3 + j];
                jac_err = jac_err.max((fd - an).abs() / an.abs().max(1e-3));
            }
        }
    }

    let sigma = 2.0 / FWHM_PER_SIGMA;
    let clean: Vec<f64> = xs.iter().map(|&x| gaussian(&[10.0, 3.0, sigma], x)).collect();
    let (p, _, _) = fit_gaussian(&xs, &clean, ChannelTarget::Sensitivity).unwrap();
    let exact_err = rel(p[0], 10.0).max(rel(p[1], 3.0)).max(rel(p[2], sigma));

    let ok = scale_err <= 1e-9 && shift_err <= 1e-9 && jac_err <= 1e-5 && exact_err <= 1e-6;
    report(
        5,
        ok,
        format!(
            "scale {scale_err:.1e}, shift {shift_err:.1e} (<= 1e-9), jacobian vs FD {jac_err:.1e} (<= 1e-5), noiseless recovery {exact_err:.1e} (<= 1e-6)"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- #6

fn rec(id: &str, label: &str) -> PredictionRecord {
    PredictionRecord {
        stimulus_id: id.into(),
        raw_label: label.into(),
        model_id: "m".into(),
        raw_confidence: None,
    }
}

#[test]
fn criterion_6_metric_exactness() {
    let classes = SuperclassSet::default();
    let mapping = SuperclassMapping::identity(&classes);
    let names = classes.names();
    let tmp = tempfile::tempdir().unwrap();

    // cue conflict: hand-built answers cycling through shape / texture / other
    let mut truth_csv = String::from("stimulus_id,shape_label,texture_label\n");
    let mut records = Vec::new();
    let (mut n_shape, mut n_texture) = (0usize, 0usize);
    for i in 0..97 {
        let shape = &names[i % 16];
        let texture = &names[(i + 5) % 16];
        let other = &names[(i + 9) % 16];
        truth_csv.push_str(&format!("cc{i},{shape},{texture}\n"));
        let answer = match i % 7 {
            0 | 1 | 4 => {
                n_shape += 1;
                shape
            }
            2 | 5 => {
                n_texture += 1;
                texture
            }
            _ => other,
        };
        records.push(rec(&format!("cc{i}"), answer));
    }
    let truth_path = tmp.path().join("cue.csv");
    std::fs::write(&truth_path, truth_csv).unwrap();
    let trials = cue_conflict_trials(&records, &truth_path, &mapping).unwrap();
    let sb = shape_bias(&trials).unwrap();
    let brute_sb = n_shape as f64 / (n_shape + n_texture) as f64;

    let mut padded: Vec<CueConflictTrial> = trials.clone();
    for i in 0..50 {
        padded.push(CueConflictTrial {
            stimulus_id: format!("pad{i}"),
            shape_label: names[0].clone(),
            texture_label: names[1].clone(),
            predicted: Some(names[2 + i % 14].clone()),
        });
    }
    let invariant = shape_bias(&padded).unwrap().to_bits() == sb.to_bits();

    // OOD: per-dataset recounts over the configured dataset list
    let datasets = ["contrast", "sketch", "stylized"];
    let mut per_dataset = Vec::new();
    let mut brute_accs = Vec::new();
    for (d, tag) in datasets.iter().enumerate() {
        let mut truth = BTreeMap::new();
        let mut recs = Vec::new();
        let mut correct = 0usize;
        let n = 20 + 7 * d;
        for i in 0..n {
            let id = format!("{tag}{i}");
            let t = names[(i * 3 + d) % 16].clone();
            let hit = (i * (d + 2)) % 5 != 0;
            correct += hit as usize;
            recs.push(rec(&id, if hit { &t } else { &names[(i * 3 + d + 1) % 16] }));
            truth.insert(id, t);
        }
        per_dataset.push(dataset_accuracy(tag, &recs, &truth, &mapping).unwrap());
        brute_accs.push(correct as f64 / n as f64);
    }
    let opts = OodOptions {
        datasets: datasets.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let ood = ood_accuracy(&per_dataset, &opts).unwrap();
    let brute_ood = brute_accs.iter().sum::<f64>() / brute_accs.len() as f64;
    let table_like = ood_accuracy(
        &[DatasetAccuracy {
            dataset_tag: "contrast".into(),
            accuracy: 0.96,
            n_trials: 100,
        }],
        &OodOptions {
            datasets: vec!["contrast".into()],
            ..Default::default()
        },
    )
    .unwrap();

    // reference table rows through serialization and into the report CSV
    let rows = load_metrics_file(&fixture("table1.json")).unwrap();
    let json = serde_json::to_string(&rows).unwrap();
    let back: Vec<ModelMetrics> = serde_json::from_str(&json).unwrap();
    let roundtrip = back == rows;
    let out = tmp.path().join("report");
    emit_report(&rows, &analyze(&rows), &out, &ReportOptions::default()).unwrap();
    let mut reader = csv::Reader::from_path(out.join("model_table.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let table: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let find = |model: &str| table.iter().find(|r| &r[0] == model).cloned();
    let triple = |r: &csv::StringRecord| (r[col("BW")].to_string(), r[col("OOD")].to_string(), r[col("Shape Bias")].to_string());
    let human = find("Humans").map(|r| triple(&r));
    let beit = find("BEiT-V2 ViT-L/16 IN-22k").map(|r| triple(&r));
    let s = |a: &str, b: &str, c: &str| Some((a.to_string(), b.to_string(), c.to_string()));
    let human_ok = human == s("1.0000", "0.7304", "0.9600");
    let beit_ok = beit == s("0.8285", "0.7560", "0.5610");
    let columns_ok = header.iter().take(8).eq(["Model", "Z-Shot", "CLIP", "IN-1k", "IN-22k", "BW", "OOD", "Shape Bias"]);

    let ok = sb == brute_sb
        && invariant
        && ood == brute_ood
        && table_like == 0.96
        && roundtrip
        && human_ok
        && beit_ok
        && columns_ok
        && table.len() == 9;
    report(
        6,
        ok,
        format!(
            "shape bias {sb} == recount {brute_sb}, neither-invariant {invariant}, OOD {ood} == recount {brute_ood}, \
             humans {human:?}, BEiT-V2 IN-22k {beit:?}"
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------- #7

fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Γ(v) for v a positive multiple of 1/2.
fn half_gamma(v: f64) -> f64 {
    if (v - 0.5).abs() < 1e-12 {
        std::f64::consts::PI.sqrt()
    } else if (v - 1.0).abs() < 1e-12 {
        1.0
    } else {
        (v - 1.0) * half_gamma(v - 1.0)
    }
}

/// Two-sided p from Simpson integration of the Student-t density on [0, |t|].
fn quadrature_p(t: f64, df: f64) -> f64 {
    let c = half_gamma((df + 1.0) / 2.0) / ((df * std::f64::consts::PI).sqrt() * half_gamma(df / 2.0));
    let f = |u: f64| c * (1.0 + u * u / df).powf(-(df + 1.0) / 2.0);
    let n = 20_000;
    let h = t.abs() / n as f64;
    let mut s = f(0.0) + f(t.abs());
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

#[test]
fn criterion_7_statistics() {
    // exact line
    let pts: Vec<(f64, f64)> = (0..9).map(|i| (i as f64 * 0.5 - 1.0, -2.5 * (i as f64 * 0.5 - 1.0) + 4.0)).collect();
    let fit = regress(&pts, XTransform::Identity).unwrap();
    let line_ok = (fit.slope + 2.5).abs() <= 1e-12 && (fit.intercept - 4.0).abs() <= 1e-12 && (fit.pearson_r + 1.0).abs() <= 1e-12;

    // reference table (BW, OOD)
    let rows = load_metrics_file(&fixture("table1.json")).unwrap();
    let bw: Vec<f64> = rows.iter().map(|m| m.bandwidth_octaves.unwrap()).collect();
    let ood: Vec<f64> = rows.iter().map(|m| m.ood_accuracy.unwrap()).collect();
    let r = pearson(&bw, &ood).unwrap();
    let r_brute = brute_pearson(&bw, &ood);
    let pearson_ok = rows.len() == 9 && (r - r_brute).abs() <= 1e-12 && r < 0.0;

    // Welch
    let a = [1.0, 2.0, 3.0];
    let b = [4.0, 5.0, 6.0];
    let g = compare_groups(&a, &b, "a", "b").unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| v.iter().map(|x| (x - mean(v)).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    let (va, vb) = (var(&a), var(&b));
    let se2: f64 = va / 3.0 + vb / 3.0;
    let t_brute = (mean(&a) - mean(&b)) / se2.sqrt();
    let df_brute = se2 * se2 / ((va / 3.0f64).powi(2) / 2.0 + (vb / 3.0f64).powi(2) / 2.0);
    let p_brute = quadrature_p(t_brute, df_brute);
    let welch_ok = (g.welch_t - t_brute).abs() <= 1e-8 && (g.df - df_brute).abs() <= 1e-8 && (g.approx_p - p_brute).abs() <= 1e-8;

    // extrapolation inverts the regression
    let mut inv_err: f64 = 0.0;
    for &(slope, intercept) in &[(-0.37, 4.0), (-0.2, 3.1), (-0.9, 9.0)] {
        let pts: Vec<(f64, f64)> = [1e6, 3e7, 1e8, 6e8, 2e9].iter().map(|&p: &f64| (p, intercept + slope * p.log10())).collect();
        let fit = regress(&pts, XTransform::Log10).unwrap();
        for target in [1.0, 2.0] {
            let p = extrapolate_to_bandwidth(&fit, target).unwrap();
            let planted = 10f64.powf((target - intercept) / slope);
            inv_err = inv_err.max(rel(p, planted)).max((fit.predict(p) - target).abs());
        }
    }
    let rising: Vec<(f64, f64)> = [1e6, 1e7, 1e8].iter().map(|&p: &f64| (p, 1.0 + 0.5 * p.log10())).collect();
    let no_crossing = extrapolate_to_bandwidth(&regress(&rising, XTransform::Log10).unwrap(), 1.0).is_err();
    let inv_ok = inv_err <= 1e-9 && no_crossing;

    let ok = line_ok && pearson_ok && welch_ok && inv_ok;
    report(
        7,
        ok,
        format!(
            "line exact {line_ok}, reference-table r = {r:.8} vs brute {r_brute:.8}, Welch t = {:.10} df = {} p = {:.10} (quadrature {p_brute:.10}), extrapolation err {inv_err:.1e}",
            g.welch_t, g.df, g.approx_p
        ),
    );
    assert!(ok);
}
