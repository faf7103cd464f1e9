//! Machine-readable analysis reports and their JSON and CSV forms.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{AugmentationForm, Estimand, SeMethod};
use crate::propensity::{FittedPropensity, PsKind};
use crate::simulation::{McReport, TruthTable};

pub const SCHEMA_VERSION: u32 = 1;

pub const CURVE_HEADER: [&str; 6] = ["time", "estimate", "se_naive", "se_corrected", "ci_lo", "ci_hi"];

/// Formats a float with the shortest digits that parse back to the same
/// value, switching to scientific notation for very small or large magnitudes.
pub fn format_number(x: f64) -> String {
    let magnitude = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e17).contains(&magnitude) {
        if x == 0.0 { "0".into() } else { x.to_string() }
    } else {
        format!("{x:e}")
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsSummary {
    pub kind: PsKind,
    pub theta: Vec<f64>,
    pub min_score: f64,
    pub max_score: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub positivity_warning: bool,
}

impl PsSummary {
    pub fn from_model(model: &FittedPropensity) -> Self {
        let d = model.diagnostics();
        Self {
            kind: model.kind(),
            theta: model.theta().to_vec(),
            min_score: d.min_score,
            max_score: d.max_score,
            iterations: d.iterations,
            gradient_norm: d.gradient_norm,
            positivity_warning: d.positivity_warning,
        }
    }
}

/// One estimand at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub estimand: Estimand,
    pub time: f64,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_oracle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_naive: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_corrected: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se_bootstrap: Option<f64>,
    /// Method behind the interval and p-value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_method: Option<SeMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_hi: Option<f64>,
    /// Two-sided test of a zero effect, for treatment effects only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

impl ReportRow {
    pub fn se(&self, method: SeMethod) -> Option<f64> {
        match method {
            SeMethod::Oracle => self.se_oracle,
            SeMethod::Naive => self.se_naive,
            SeMethod::Corrected => self.se_corrected,
            SeMethod::Bootstrap => self.se_bootstrap,
        }
    }

    pub fn set_se(&mut self, method: SeMethod, se: f64) {
        let slot = match method {
            SeMethod::Oracle => &mut self.se_oracle,
            SeMethod::Naive => &mut self.se_naive,
            SeMethod::Corrected => &mut self.se_corrected,
            SeMethod::Bootstrap => &mut self.se_bootstrap,
        };
        *slot = Some(se);
    }
}

/// A full estimated step function as `(time, value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub estimand: Estimand,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub n: usize,
    pub n_events: usize,
    pub level: f64,
    pub seed: u64,
    pub methods: Vec<SeMethod>,
    pub augmentation: AugmentationForm,
    pub times: Vec<f64>,
    pub propensity: PsSummary,
    pub rows: Vec<ReportRow>,
    pub curves: Vec<Curve>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Report = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report schema version {} is not {SCHEMA_VERSION}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Rows of one estimand, in time order.
    pub fn rows_for(&self, estimand: Estimand) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.estimand == estimand).collect()
    }

    pub fn estimands(&self) -> Vec<Estimand> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.estimand) {
                seen.push(r.estimand);
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidInput(format!("unknown output format `{other}`"))),
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path)?))
}

fn write_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Writes the curve table `time,estimate,se_naive,se_corrected,ci_lo,ci_hi`
/// for the rows of one estimand.
pub fn write_curve_csv<W: std::io::Write>(out: W, rows: &[&ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER).map_err(write_err)?;
    for r in rows {
        w.write_record([
            format_number(r.time),
            format_number(r.estimate),
            optional(r.se_naive.or(r.se_oracle)),
            optional(r.se_corrected),
            optional(r.ci_lo),
            optional(r.ci_hi),
        ])
        .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, report: &Report) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "estimand", "time", "estimate", "se_oracle", "se_naive", "se_corrected", "se_bootstrap",
        "interval_method", "ci_lo", "ci_hi", "p_value",
    ])
    .map_err(write_err)?;
    for r in &report.rows {
        w.write_record([
            r.estimand.label(),
            format_number(r.time),
            format_number(r.estimate),
            optional(r.se_oracle),
            optional(r.se_naive),
            optional(r.se_corrected),
            optional(r.se_bootstrap),
            r.interval_method.map(|m| m.name().to_string()).unwrap_or_default(),
            optional(r.ci_lo),
            optional(r.ci_hi),
            optional(r.p_value),
        ])
        .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the report under `dir`: `report.json`, or one CSV per estimand
/// plus `summary.csv`. Returns the files written.
pub fn emit_report(report: &Report, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        OutputFormat::Json => {
            let path = dir.join("report.json");
            let mut file = fs::File::create(&path)?;
            file.write_all(report.to_json()?.as_bytes())?;
            file.write_all(b"\n")?;
            written.push(path);
        }
        OutputFormat::Csv => {
            for estimand in report.estimands() {
                let path = dir.join(format!("{}.csv", estimand.label()));
                write_curve_csv(fs::File::create(&path)?, &report.rows_for(estimand))?;
                written.push(path);
            }
            let path = dir.join("summary.csv");
            write_summary_csv(&path, report)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Statistics tabulated by the simulation command.
pub const MC_STATISTICS: [&str; 4] = ["bias", "sd", "se", "coverage"];

/// Table in the layout of the simulation tables: methods as rows, times as
/// columns. Bias and SD rows describe the oracle and adjusted estimators.
pub fn mc_table(report: &McReport, estimand: Estimand, statistic: &str) -> Vec<(String, Vec<f64>)> {
    let times = &report.config.dgp.eval_times;
    let pick = |method: SeMethod, f: &dyn Fn(&crate::simulation::McRow) -> f64| -> Option<Vec<f64>> {
        times
            .iter()
            .map(|&t| report.row(estimand, method, t).map(f))
            .collect()
    };
    let mut rows = Vec::new();
    match statistic {
        "bias" | "sd" => {
            let f: &dyn Fn(&crate::simulation::McRow) -> f64 = if statistic == "bias" {
                &|r| r.bias
            } else {
                &|r| r.sd
            };
            for (label, method) in [("oracle", SeMethod::Oracle), ("adjusted", SeMethod::Naive)] {
                if let Some(v) = pick(method, f) {
                    rows.push((label.to_string(), v));
                }
            }
        }
        _ => {
            let f: &dyn Fn(&crate::simulation::McRow) -> f64 = if statistic == "se" {
                &|r| r.mean_se
            } else {
                &|r| r.coverage
            };
            for method in SeMethod::ALL {
                if let Some(v) = pick(method, f) {
                    rows.push((method.name().to_string(), v));
                }
            }
        }
    }
    rows
}

/// Writes `report.json`, `truth.csv` and one table per estimand and statistic.
pub fn emit_mc_report(report: &McReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&path, text + "\n")?;
    written.push(path);

    let path = dir.join("truth.csv");
    write_truth_csv(&path, &report.truth)?;
    written.push(path);

    let times = &report.config.dgp.eval_times;
    for estimand in report.config.estimands() {
        for statistic in MC_STATISTICS {
            let path = dir.join(format!("{}_{statistic}.csv", estimand.label()));
            let mut w = csv_writer(&path)?;
            let header: Vec<String> = std::iter::once("method".to_string())
                .chain(times.iter().map(|&t| format_number(t)))
                .collect();
            w.write_record(&header).map_err(write_err)?;
            for (label, values) in mc_table(report, estimand, statistic) {
                let record: Vec<String> = std::iter::once(label)
                    .chain(values.into_iter().map(format_number))
                    .collect();
                w.write_record(&record).map_err(write_err)?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

fn write_truth_csv(path: &Path, truth: &TruthTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time", "treated", "control", "effect"]).map_err(write_err)?;
    for k in 0..truth.times.len() {
        w.write_record([
            format_number(truth.times[k]),
            format_number(truth.treated[k]),
            format_number(truth.control[k]),
            format_number(truth.effect[k]),
        ])
        .map_err(write_err)?;
    }
    w.flush()?;
    Ok(())
}
