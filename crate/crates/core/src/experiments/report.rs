use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::gp::RejectionRow;

/// Grid resolution of the filter-curve series.
pub const CURVE_POINTS: usize = 400;
const AGGREGATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Default, Serialize)]
pub struct RepetitionRow {
    pub repetition: usize,
    pub fraction: f64,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_mother: Option<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction_mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted: Option<FilterSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elbo_trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RepetitionRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "filter_mae" => self.filter_mae,
            "prediction_mae" => self.prediction_mae,
            "accuracy" => self.accuracy,
            _ => None,
        }
    }

    /// Label distinguishing series within a report.
    pub fn series(&self) -> String {
        match &self.fit_mother {
            Some(m) => format!("{}/{m}", self.mode),
            None => self.mode.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub series: String,
    pub fraction: f64,
    pub metric: String,
    pub count: usize,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Median and 5%/95% quantiles per (series, fraction, metric), over
/// successful rows only.
pub fn aggregate(rows: &[RepetitionRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(String, u64, &str), Vec<f64>> = BTreeMap::new();
    for row in rows.iter().filter(|r| !r.failed()) {
        for metric in ["filter_mae", "prediction_mae", "accuracy"] {
            if let Some(v) = row.metric(metric) {
                groups
                    .entry((row.series(), row.fraction.to_bits(), metric))
                    .or_default()
                    .push(v);
            }
        }
    }
    groups
        .into_iter()
        .map(|((series, fraction, metric), mut values)| {
            values.sort_by(f64::total_cmp);
            Aggregate {
                series,
                fraction: f64::from_bits(fraction),
                metric: metric.to_string(),
                count: values.len(),
                q05: quantile(&values, 0.05),
                median: quantile(&values, 0.5),
                q95: quantile(&values, 0.95),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterCurve {
    pub label: String,
    pub spec: FilterSpec,
    /// Monomial coefficients when the curve is a polynomial approximation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl FilterCurve {
    pub fn evaluate(&self, lambda: f64) -> f64 {
        match &self.coefficients {
            Some(c) => c.iter().rev().fold(0.0, |acc, &k| acc * lambda + k),
            None => self.spec.evaluate(lambda),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySeries {
    pub points: Vec<f64>,
    pub cdf: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_cdf: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PlotData {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySeries>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub filter_curves: Vec<FilterCurve>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub elbo_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rejection: Vec<RejectionRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub impulse: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub version: String,
    pub config: ExperimentConfig,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub rows: Vec<RepetitionRow>,
    pub aggregates: Vec<Aggregate>,
    pub failures: usize,
    pub wall_clock_secs: f64,
    pub plots: PlotData,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, rows: Vec<RepetitionRow>) -> Self {
        ExperimentReport {
            kind: config.kind,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            metadata: BTreeMap::new(),
            failures: rows.iter().filter(|r| r.failed()).count(),
            aggregates: aggregate(&rows),
            rows,
            wall_clock_secs: 0.0,
            plots: PlotData::default(),
        }
    }

    pub fn aggregate_for(&self, series: &str, fraction: f64, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.series == series && a.fraction == fraction && a.metric == metric)
    }

    /// Checks that the stored aggregates match a recomputation from the rows.
    pub fn verify_aggregates(&self) -> Result<()> {
        let fresh = aggregate(&self.rows);
        let close =
            |a: f64, b: f64| (a - b).abs() <= AGGREGATE_TOLERANCE * a.abs().max(1.0) || (a.is_nan() && b.is_nan());
        let same = fresh.len() == self.aggregates.len()
            && fresh.iter().zip(&self.aggregates).all(|(a, b)| {
                a.series == b.series
                    && a.fraction == b.fraction
                    && a.metric == b.metric
                    && a.count == b.count
                    && close(a.q05, b.q05)
                    && close(a.median, b.median)
                    && close(a.q95, b.q95)
            });
        let failures = self.rows.iter().filter(|r| r.failed()).count();
        if same && failures == self.failures {
            Ok(())
        } else {
            Err(Error::invalid("report aggregates do not match its rows"))
        }
    }

    /// Writes `report.json` and every plot series the report carries.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.verify_aggregates()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))?;
        let mut written = vec![path];
        for kind in PlotKind::ALL {
            if self.has_plot(kind) {
                written.extend(emit_plot_data(self, kind, dir)?);
            }
        }
        Ok(written)
    }

    fn has_plot(&self, kind: PlotKind) -> bool {
        let p = &self.plots;
        match kind {
            PlotKind::Boxplot => !self.aggregates.is_empty(),
            PlotKind::Spectrum => !p.eigenvalues.is_empty() || p.density.is_some(),
            PlotKind::FilterCurves => !p.filter_curves.is_empty(),
            PlotKind::Elbo => !p.elbo_trace.is_empty(),
            PlotKind::Rejection => !p.rejection.is_empty(),
            PlotKind::Impulse => !p.impulse.is_empty(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Boxplot,
    Spectrum,
    FilterCurves,
    Elbo,
    Rejection,
    Impulse,
}

impl PlotKind {
    pub const ALL: [PlotKind; 6] = [
        PlotKind::Boxplot,
        PlotKind::Spectrum,
        PlotKind::FilterCurves,
        PlotKind::Elbo,
        PlotKind::Rejection,
        PlotKind::Impulse,
    ];
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "boxplot" => PlotKind::Boxplot,
            "spectrum" => PlotKind::Spectrum,
            "filter-curves" => PlotKind::FilterCurves,
            "elbo" => PlotKind::Elbo,
            "rejection" => PlotKind::Rejection,
            "impulse" => PlotKind::Impulse,
            other => return Err(Error::invalid(format!("unknown plot kind {other:?}"))),
        })
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV series for one plot kind; returns the files written.
pub fn emit_plot_data(report: &ExperimentReport, kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    if !report.has_plot(kind) {
        return Err(Error::invalid(format!("report has no data for {kind:?}")));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = &report.plots;
    let mut files: Vec<(String, String)> = Vec::new();
    match kind {
        PlotKind::Boxplot => {
            let mut out = String::from("series,fraction,metric,count,q05,median,q95\n");
            for a in &report.aggregates {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    a.series, a.fraction, a.metric, a.count, a.q05, a.median, a.q95
                );
            }
            files.push(("boxplot.csv".into(), out));
        }
        PlotKind::Spectrum => {
            if !p.eigenvalues.is_empty() {
                let mut sorted = p.eigenvalues.clone();
                sorted.sort_by(f64::total_cmp);
                let mut out = String::from("rank,eigenvalue\n");
                for (i, l) in sorted.iter().enumerate() {
                    let _ = writeln!(out, "{i},{l}");
                }
                files.push(("spectrum.csv".into(), out));
            }
            if let Some(d) = &p.density {
                let mut out = String::from("xi,cdf,weight,exact_cdf\n");
                for i in 0..d.points.len() {
                    let exact = d.exact_cdf.as_ref().map(|e| e[i]);
                    let _ = writeln!(out, "{},{},{},{}", d.points[i], d.cdf[i], d.weights[i], fmt_opt(exact));
                }
                files.push(("density.csv".into(), out));
            }
        }
        PlotKind::FilterCurves => {
            let header: Vec<&str> = p.filter_curves.iter().map(|c| c.label.as_str()).collect();
            let mut grid = format!("lambda,{}\n", header.join(","));
            for i in 0..CURVE_POINTS {
                let l = 2.0 * i as f64 / (CURVE_POINTS - 1) as f64;
                let values: Vec<String> = p.filter_curves.iter().map(|c| c.evaluate(l).to_string()).collect();
                let _ = writeln!(grid, "{l},{}", values.join(","));
            }
            files.push(("filter_curves.csv".into(), grid));
            if !p.eigenvalues.is_empty() {
                let mut markers = format!("eigenvalue,{}\n", header.join(","));
                for &l in &p.eigenvalues {
                    let values: Vec<String> = p.filter_curves.iter().map(|c| c.evaluate(l).to_string()).collect();
                    let _ = writeln!(markers, "{l},{}", values.join(","));
                }
                files.push(("filter_markers.csv".into(), markers));
            }
        }
        PlotKind::Elbo => files.push(("elbo.csv".into(), crate::gp::classify::elbo_trace_csv(&p.elbo_trace))),
        PlotKind::Rejection => {
            let mut out = String::from("threshold,kept_fraction,kept,accuracy\n");
            for r in &p.rejection {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.threshold,
                    r.kept_fraction,
                    r.kept,
                    fmt_opt(r.accuracy)
                );
            }
            files.push(("rejection.csv".into(), out));
        }
        PlotKind::Impulse => {
            let mut out = String::from("node,value\n");
            for (i, v) in p.impulse.iter().enumerate() {
                let _ = writeln!(out, "{i},{v}");
            }
            files.push(("impulse.csv".into(), out));
        }
    }
    files
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert!((quantile(&v, 0.05) - 1.2).abs() < 1e-12);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn aggregates_skip_failures() {
        let row = |rep, mae: f64, failed: bool| RepetitionRow {
            repetition: rep,
            fraction: 0.5,
            mode: "exact".into(),
            filter_mae: Some(mae),
            error: failed.then(|| "boom".to_string()),
            ..Default::default()
        };
        let rows = vec![row(0, 1.0, false), row(1, 3.0, false), row(2, 100.0, true)];
        let mut report = ExperimentReport::new(ExperimentConfig::default(), rows);
        assert_eq!(report.failures, 1);
        let a = report.aggregate_for("exact", 0.5, "filter_mae").unwrap();
        assert_eq!((a.count, a.median), (2, 2.0));
        report.verify_aggregates().unwrap();
        report.aggregates[0].median = 7.0;
        assert!(report.verify_aggregates().is_err());
    }

    #[test]
    fn unknown_plot_kind() {
        assert!("violin".parse::<PlotKind>().is_err());
        assert_eq!("filter-curves".parse::<PlotKind>().unwrap(), PlotKind::FilterCurves);
    }
}
