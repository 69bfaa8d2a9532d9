//! Cross-model analyses and report emission: the model table as CSV and
//! figures as SVG, each with a CSV sidecar holding exactly the plotted values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::analysis_stats::{
    compare_groups, extrapolate_to_bandwidth, regress, GroupComparison, RegressionResult, XTransform,
    MIN_REGRESSION_POINTS,
};
use crate::channel_fit::ChannelFit;
use crate::error::{Error, Result};
use crate::psychometrics::ThresholdPoint;
use crate::robustness_metrics::ModelMetrics;
use crate::svg::Figure;

/// Human channel bandwidth used as the extrapolation target.
pub const HUMAN_BANDWIDTH: f64 = 1.0;

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Leading comment for SVG files; `None` keeps output byte-stable.
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scatter {
    pub x_label: String,
    pub y_label: String,
    pub models: Vec<String>,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<RegressionResult>,
    /// Models dropped for lacking one of the two values.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analyses {
    pub bandwidth_vs_size: Scatter,
    /// Parameter count where the size regression reaches human bandwidth.
    pub params_at_human_bandwidth: Option<f64>,
    pub in22k_comparison: Option<GroupComparison>,
    pub in22k_groups: Vec<(String, bool, f64)>,
    pub bandwidth_vs_ood: Scatter,
    pub shape_bias_vs_ood: Scatter,
    pub notes: Vec<String>,
}

fn scatter(
    metrics: &[ModelMetrics],
    x_label: &str,
    y_label: &str,
    x_of: impl Fn(&ModelMetrics) -> Option<f64>,
    y_of: impl Fn(&ModelMetrics) -> Option<f64>,
    transform: XTransform,
    notes: &mut Vec<String>,
) -> Scatter {
    let mut out = Scatter {
        x_label: x_label.into(),
        y_label: y_label.into(),
        models: Vec::new(),
        points: Vec::new(),
        fit: None,
        excluded: Vec::new(),
    };
    for m in metrics {
        match (x_of(m), y_of(m)) {
            (Some(x), Some(y)) => {
                out.models.push(m.model_id.clone());
                out.points.push((x, y));
            }
            _ => out.excluded.push(m.model_id.clone()),
        }
    }
    if out.points.len() >= MIN_REGRESSION_POINTS {
        match regress(&out.points, transform) {
            Ok(fit) => out.fit = Some(fit),
            Err(e) => notes.push(format!("{y_label} vs {x_label}: {e}")),
        }
    } else {
        notes.push(format!(
            "{y_label} vs {x_label}: {} points, no regression line",
            out.points.len()
        ));
    }
    out
}

pub fn analyze(metrics: &[ModelMetrics]) -> Analyses {
    let mut notes = Vec::new();
    let bandwidth_vs_size = scatter(
        metrics,
        "parameters",
        "bandwidth (octaves)",
        |m| m.param_count,
        |m| m.bandwidth_octaves,
        XTransform::Log10,
        &mut notes,
    );
    let params_at_human_bandwidth = bandwidth_vs_size.fit.as_ref().and_then(|fit| {
        extrapolate_to_bandwidth(fit, HUMAN_BANDWIDTH)
            .map_err(|e| notes.push(format!("extrapolation: {e}")))
            .ok()
    });

    let in22k_groups: Vec<(String, bool, f64)> = metrics
        .iter()
        .filter_map(|m| Some((m.model_id.clone(), m.trained_in22k?, m.bandwidth_octaves?)))
        .collect();
    let with: Vec<f64> = in22k_groups.iter().filter(|g| g.1).map(|g| g.2).collect();
    let without: Vec<f64> = in22k_groups.iter().filter(|g| !g.1).map(|g| g.2).collect();
    let in22k_comparison = match compare_groups(&with, &without, "IN-22k", "no IN-22k") {
        Ok(c) => Some(c),
        Err(e) => {
            notes.push(format!("IN-22k comparison: {e}"));
            None
        }
    };

    let bandwidth_vs_ood = scatter(
        metrics,
        "bandwidth (octaves)",
        "OOD accuracy",
        |m| m.bandwidth_octaves,
        |m| m.ood_accuracy,
        XTransform::Identity,
        &mut notes,
    );
    let shape_bias_vs_ood = scatter(
        metrics,
        "shape bias",
        "OOD accuracy",
        |m| m.shape_bias,
        |m| m.ood_accuracy,
        XTransform::Identity,
        &mut notes,
    );
    Analyses {
        bandwidth_vs_size,
        params_at_human_bandwidth,
        in22k_comparison,
        in22k_groups,
        bandwidth_vs_ood,
        shape_bias_vs_ood,
        notes,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_scatter_csv(path: &Path, s: &Scatter) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", s.x_label.as_str(), s.y_label.as_str()])?;
    for (m, (x, y)) in s.models.iter().zip(&s.points) {
        w.write_record([m.clone(), x.to_string(), y.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn scatter_figure(title: &str, s: &Scatter, log_x: bool, opts: &ReportOptions) -> Figure {
    let mut fig = Figure {
        title: title.into(),
        x_label: s.x_label.clone(),
        y_label: s.y_label.clone(),
        x_log10: log_x,
        points: s.points.clone(),
        point_labels: s.models.clone(),
        timestamp: opts.timestamp.clone(),
        ..Figure::default()
    };
    if let Some(fit) = &s.fit {
        let (lo, hi) = s.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
        let n = 24;
        fig.line = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let x = if log_x {
                    10f64.powf(lo.log10() + t * (hi.log10() - lo.log10()))
                } else {
                    lo + t * (hi - lo)
                };
                (x, fit.predict(x))
            })
            .collect();
        fig.annotation = Some(format!("r = {:.3} (n = {})", fit.pearson_r, fit.n));
    }
    fig
}

/// Write figures (SVG + CSV sidecars), regression table and analysis JSON.
pub fn write_analyses(analyses: &Analyses, out_dir: &Path, opts: &ReportOptions) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;

    let figs = [
        ("bandwidth_vs_size", "Bandwidth vs model size", &analyses.bandwidth_vs_size, true),
        ("bandwidth_vs_ood", "OOD accuracy vs bandwidth", &analyses.bandwidth_vs_ood, false),
        ("shape_bias_vs_ood", "OOD accuracy vs shape bias", &analyses.shape_bias_vs_ood, false),
    ];
    let mut reg = csv::Writer::from_path(out_dir.join("regressions.csv"))?;
    reg.write_record(["analysis", "x_transform", "n", "slope", "intercept", "pearson_r"])?;
    for (name, title, s, log_x) in figs {
        write_scatter_csv(&out_dir.join(format!("{name}.csv")), s)?;
        write_text(&out_dir.join(format!("{name}.svg")), &scatter_figure(title, s, log_x, opts).render())?;
        if let Some(f) = &s.fit {
            let transform = match f.x_transform {
                XTransform::Log10 => "log10",
                XTransform::Identity => "identity",
            };
            reg.write_record([
                name.to_string(),
                transform.to_string(),
                f.n.to_string(),
                f.slope.to_string(),
                f.intercept.to_string(),
                f.pearson_r.to_string(),
            ])?;
        }
    }
    reg.flush().map_err(|e| Error::io("writing regressions.csv", e))?;

    // IN-22k strip plot: group index on x, group means as segments.
    let mut w = csv::Writer::from_path(out_dir.join("in22k_groups.csv"))?;
    w.write_record(["model", "group", "bandwidth_octaves"])?;
    let mut fig = Figure {
        title: "Bandwidth by IN-22k training".into(),
        x_label: "training data".into(),
        y_label: "bandwidth (octaves)".into(),
        x_categories: vec![(0.0, "IN-22k".into()), (1.0, "no IN-22k".into())],
        timestamp: opts.timestamp.clone(),
        ..Figure::default()
    };
    for (model, in22k, bw) in &analyses.in22k_groups {
        let gx = if *in22k { 0.0 } else { 1.0 };
        w.write_record([model.clone(), if *in22k { "IN-22k" } else { "no IN-22k" }.to_string(), bw.to_string()])?;
        fig.points.push((gx, *bw));
    }
    w.flush().map_err(|e| Error::io("writing in22k_groups.csv", e))?;
    if let Some(c) = &analyses.in22k_comparison {
        fig.segments = vec![(-0.2, 0.2, c.mean_a), (0.8, 1.2, c.mean_b)];
        fig.annotation = Some(format!("Welch t = {:.3}, p = {:.3}", c.welch_t, c.approx_p));
    }
    write_text(&out_dir.join("in22k_groups.svg"), &fig.render())?;
    write_text(
        &out_dir.join("group_comparison.json"),
        &serde_json::to_string_pretty(&analyses.in22k_comparison)?,
    )?;
    write_text(&out_dir.join("analysis.json"), &serde_json::to_string_pretty(analyses)?)?;
    Ok(())
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "✓",
        Some(false) => "×",
        None => "",
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// Best and second-best per comparison group: lowest bandwidth, highest OOD
/// accuracy and shape bias. Groups need at least two candidates.
fn highlights(metrics: &[ModelMetrics], value: impl Fn(&ModelMetrics) -> Option<f64>, lower_is_better: bool) -> Vec<&'static str> {
    let mut marks = vec![""; metrics.len()];
    let mut groups: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, m) in metrics.iter().enumerate() {
        if let (Some(g), Some(v)) = (m.group.as_deref(), value(m)) {
            groups.entry(g).or_default().push((i, v));
        }
    }
    for members in groups.values_mut().filter(|m| m.len() >= 2) {
        members.sort_by(|a, b| if lower_is_better { a.1.total_cmp(&b.1) } else { b.1.total_cmp(&a.1) });
        marks[members[0].0] = "best";
        marks[members[1].0] = "second";
    }
    marks
}

pub const TABLE_HEADER: [&str; 11] = [
    "Model",
    "Z-Shot",
    "CLIP",
    "IN-1k",
    "IN-22k",
    "BW",
    "OOD",
    "Shape Bias",
    "BW highlight",
    "OOD highlight",
    "Shape Bias highlight",
];

pub fn write_model_table(path: &Path, metrics: &[ModelMetrics]) -> Result<()> {
    let bw = highlights(metrics, |m| m.bandwidth_octaves, true);
    let ood = highlights(metrics, |m| m.ood_accuracy, false);
    let shape = highlights(metrics, |m| m.shape_bias, false);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TABLE_HEADER)?;
    for (i, m) in metrics.iter().enumerate() {
        w.write_record([
            m.model_id.clone(),
            flag(m.zero_shot).into(),
            flag(m.clip_supervised).into(),
            flag(m.in1k).into(),
            flag(m.trained_in22k).into(),
            cell(m.bandwidth_octaves),
            cell(m.ood_accuracy),
            cell(m.shape_bias),
            bw[i].into(),
            ood[i].into(),
            shape[i].into(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Model table plus every analysis figure.
pub fn emit_report(metrics: &[ModelMetrics], analyses: &Analyses, out_dir: &Path, opts: &ReportOptions) -> Result<()> {
    if metrics.is_empty() {
        return Err(Error::InsufficientData("report needs at least one model".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    write_model_table(&out_dir.join("model_table.csv"), metrics)?;
    write_analyses(analyses, out_dir, opts)
}

/// Channel figure: measured sensitivities and the fitted Gaussian over
/// log2 frequency. Sidecar columns: `kind,log2_freq,sensitivity`.
pub fn write_channel_figure(fit: &ChannelFit, points: &[ThresholdPoint], svg_path: &Path, opts: &ReportOptions) -> Result<()> {
    let measured: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| Some((p.band.log2_center(), 1.0 / p.threshold_sd?)))
        .collect();
    let (lo, hi) = measured
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (lo, hi) = (lo.min(fit.peak_log2_freq - 2.5 * fit.sigma_octaves), hi.max(fit.peak_log2_freq + 2.5 * fit.sigma_octaves));
    let n = 60;
    let curve: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            (x, fit.sensitivity_at_log2(x))
        })
        .collect();

    let sidecar = svg_path.with_extension("csv");
    let mut w = csv::Writer::from_path(&sidecar)?;
    w.write_record(["kind", "log2_freq", "sensitivity"])?;
    for (x, y) in &measured {
        w.write_record(["measured".to_string(), x.to_string(), y.to_string()])?;
    }
    for (x, y) in &curve {
        w.write_record(["fit".to_string(), x.to_string(), y.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", sidecar.display()), e))?;

    let fig = Figure {
        title: format!(
            "Spatial-frequency channel{}",
            fit.model_id.as_deref().map(|m| format!(" ({m})")).unwrap_or_default()
        ),
        x_label: "log2 frequency (cycles/image)".into(),
        y_label: "sensitivity (1 / threshold SD)".into(),
        points: measured,
        line: curve,
        annotation: Some(format!("bandwidth = {:.4} octaves", fit.bandwidth_octaves)),
        timestamp: opts.timestamp.clone(),
        ..Figure::default()
    };
    write_text(svg_path, &fig.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_model_has_no_regression() {
        let mut m = ModelMetrics::new("only");
        m.bandwidth_octaves = Some(2.0);
        m.ood_accuracy = Some(0.6);
        m.shape_bias = Some(0.3);
        let a = analyze(&[m]);
        assert_eq!(a.bandwidth_vs_ood.points.len(), 1);
        assert!(a.bandwidth_vs_ood.fit.is_none());
        assert!(a.in22k_comparison.is_none());
        assert_eq!(a.bandwidth_vs_size.excluded, vec!["only".to_string()]);
    }

    #[test]
    fn missing_param_count_is_excluded() {
        let rows: Vec<ModelMetrics> = (0..4)
            .map(|i| {
                let mut m = ModelMetrics::new(format!("m{i}"));
                m.bandwidth_octaves = Some(3.0 - 0.3 * i as f64);
                m.param_count = (i != 2).then(|| 10f64.powi(7 + i));
                m
            })
            .collect();
        let a = analyze(&rows);
        assert_eq!(a.bandwidth_vs_size.excluded, vec!["m2".to_string()]);
        assert_eq!(a.bandwidth_vs_size.points.len(), 3);
        assert!(a.bandwidth_vs_size.fit.is_some());
    }

    #[test]
    fn highlight_ranks_within_group() {
        let mk = |id: &str, g: &str, bw: f64| {
            let mut m = ModelMetrics::new(id);
            m.group = Some(g.into());
            m.bandwidth_octaves = Some(bw);
            m
        };
        let rows = vec![mk("a", "x", 3.0), mk("b", "x", 1.0), mk("c", "x", 2.0), mk("d", "y", 0.5)];
        assert_eq!(highlights(&rows, |m| m.bandwidth_octaves, true), vec!["", "best", "second", ""]);
    }
}
