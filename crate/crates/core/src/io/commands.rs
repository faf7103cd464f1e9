//! The `estimate` and `simulate` workflows behind the command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::inference::{bootstrap_se, wald_interval, AugmentationForm, Estimand, SeMethod};
use crate::model::Arm;
use crate::pipeline::{Analysis, PsSpec};
use crate::propensity::PsKind;
use crate::simulation::{run_monte_carlo, run_sensitivity, truth_oracle, McReport};

use super::config::SimConfigFile;
use super::input::{read_cohort, read_scores};
use super::report::{
    emit_mc_report, emit_report, format_number, Curve, OutputFormat, PsSummary, Report, ReportRow,
    SCHEMA_VERSION,
};

/// Propensity source named on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum PsChoice {
    Fit(PsKind),
    /// One-column CSV of known `e(1; X_i)`.
    KnownFile(PathBuf),
}

impl std::str::FromStr for PsChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("known", file)) if !file.is_empty() => Ok(PsChoice::KnownFile(file.into())),
            _ => match s.parse::<PsKind>()? {
                PsKind::Known => Err(Error::InvalidInput(
                    "known propensity scores are given as known:FILE".into(),
                )),
                kind => Ok(PsChoice::Fit(kind)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRequest {
    pub data: PathBuf,
    /// Event types of interest.
    pub events: Vec<usize>,
    /// Number of competing event types; inferred from the data when absent.
    pub n_events: Option<usize>,
    pub times: Vec<f64>,
    pub ps: PsChoice,
    pub methods: Vec<SeMethod>,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub level: f64,
    pub augmentation: AugmentationForm,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl EstimateRequest {
    fn validate(&self) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::InvalidInput("at least one event type is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("at least one variance method is required".into()));
        }
        if let Some(t) = self.times.iter().find(|&&t| !(t.is_finite() && t > 0.0)) {
            return Err(Error::InvalidInput(format!("evaluation time {t} must be positive")));
        }
        if self.methods.contains(&SeMethod::Bootstrap) && self.bootstrap_reps < 2 {
            return Err(Error::InvalidInput(
                "bootstrap standard errors need --boot-reps of at least 2".into(),
            ));
        }
        let known = matches!(self.ps, PsChoice::KnownFile(_));
        if known && self.methods.contains(&SeMethod::Corrected) {
            return Err(Error::InvalidInput(
                "corrected standard errors apply to estimated propensity scores; use naive (oracle) with known scores".into(),
            ));
        }
        if !known && self.methods.contains(&SeMethod::Oracle) {
            return Err(Error::InvalidInput(
                "oracle standard errors require known propensity scores (--ps known:FILE)".into(),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
    /// Human-readable table for standard output.
    pub summary: String,
}

const INTERVAL_PREFERENCE: [SeMethod; 4] = [
    SeMethod::Corrected,
    SeMethod::Bootstrap,
    SeMethod::Naive,
    SeMethod::Oracle,
];

/// Runs the full analysis and builds the report without touching the disk
/// beyond reading inputs.
pub fn build_report(request: &EstimateRequest) -> Result<Report> {
    request.validate()?;
    let cohort = read_cohort(&request.data, request.n_events)?;
    if let Some(&j) = request.events.iter().find(|&&j| j == 0 || j > cohort.n_events()) {
        return Err(Error::InvalidInput(format!(
            "event {j} outside 1..={}",
            cohort.n_events()
        )));
    }
    let spec = match &request.ps {
        PsChoice::Fit(kind) => PsSpec::Fit(*kind),
        PsChoice::KnownFile(path) => PsSpec::Known(read_scores(path)?),
    };
    let known = spec.kind() == PsKind::Known;
    let analysis = Analysis::with_form(&cohort, spec.model(&cohort)?, request.augmentation)?;
    let grid = &request.times;

    let mut warnings = cohort.positivity_warnings();
    if analysis.model.diagnostics().positivity_warning {
        warnings.push(format!(
            "fitted propensity scores span [{}, {}], close to 0 or 1",
            analysis.model.diagnostics().min_score,
            analysis.model.diagnostics().max_score
        ));
    }
    for arm in [Arm::Treated, Arm::Control] {
        let last = cohort.last_time(arm);
        for &t in grid.iter().filter(|&&t| t > last) {
            // every estimate is constant after the arm's last follow-up time
            warnings.push(format!(
                "time {t} is beyond the last {arm} follow-up time {last}; reporting the estimate at {last}"
            ));
        }
    }

    let mut estimands = Vec::new();
    let mut curves = Vec::new();
    for &j in &request.events {
        for arm in [Arm::Treated, Arm::Control] {
            let hazard = analysis.hazard(arm, j)?;
            curves.push(Curve {
                estimand: Estimand::Hazard { arm, event: j },
                points: hazard.lambda.points(),
            });
            let cif = analysis.cif(arm, j)?;
            if cif.exceeds_one {
                warnings.push(format!("estimated incidence of event {j} in the {arm} arm exceeds 1"));
            }
            curves.push(Curve {
                estimand: Estimand::Cif { arm, event: j },
                points: cif.cif.points(),
            });
            estimands.push(Estimand::Cif { arm, event: j });
        }
        let effect = crate::estimator::ate(&analysis.cif(Arm::Treated, j)?, &analysis.cif(Arm::Control, j)?)?;
        curves.push(Curve {
            estimand: Estimand::Ate { event: j },
            points: effect.points(),
        });
        estimands.push(Estimand::Ate { event: j });
    }

    let mut rows = Vec::new();
    for &e in &estimands {
        let values = analysis.estimate(e, grid)?;
        for (k, &t) in grid.iter().enumerate() {
            rows.push(ReportRow {
                estimand: e,
                time: t,
                estimate: values[k],
                se_oracle: None,
                se_naive: None,
                se_corrected: None,
                se_bootstrap: None,
                interval_method: None,
                ci_lo: None,
                ci_hi: None,
                p_value: None,
            });
        }
    }
    let g = grid.len();
    for &method in &request.methods {
        match method {
            SeMethod::Naive | SeMethod::Oracle | SeMethod::Corrected => {
                let corrected = method == SeMethod::Corrected;
                let slot = if known { SeMethod::Oracle } else { method };
                for (m, &e) in estimands.iter().enumerate() {
                    let se = analysis.influence(e, grid, corrected)?.se();
                    for k in 0..g {
                        rows[m * g + k].set_se(slot, se[k]);
                    }
                }
            }
            SeMethod::Bootstrap => {
                let boot = bootstrap_se(&cohort, &spec, &estimands, grid, request.bootstrap_reps, request.seed)?;
                if boot.failures > 0 {
                    warnings.push(format!(
                        "{} of {} bootstrap resamples failed and were skipped",
                        boot.failures, boot.reps
                    ));
                }
                for (m, r) in boot.reports.iter().enumerate() {
                    for k in 0..g {
                        rows[m * g + k].set_se(SeMethod::Bootstrap, r.se[k]);
                    }
                }
            }
        }
    }
    for row in &mut rows {
        let Some((method, se)) = INTERVAL_PREFERENCE
            .iter()
            .find_map(|&m| row.se(m).map(|se| (m, se)))
        else {
            continue;
        };
        let ci = wald_interval(row.estimate, se, request.level)?;
        row.interval_method = Some(method);
        row.ci_lo = Some(ci.lo);
        row.ci_hi = Some(ci.hi);
        if matches!(row.estimand, Estimand::Ate { .. }) {
            row.p_value = Some(ci.p_value);
        }
    }
    let mut methods = request.methods.clone();
    methods.sort();
    methods.dedup();
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        n: cohort.n(),
        n_events: cohort.n_events(),
        level: request.level,
        seed: request.seed,
        methods,
        augmentation: request.augmentation,
        times: grid.clone(),
        propensity: PsSummary::from_model(&analysis.model),
        rows,
        curves,
        warnings,
    })
}

fn summary_table(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n = {}, J = {}, propensity model {} (scores in [{:.4}, {:.4}])",
        report.n,
        report.n_events,
        report.propensity.kind.name(),
        report.propensity.min_score,
        report.propensity.max_score
    );
    let _ = writeln!(
        s,
        "{:<24} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "estimand", "time", "estimate", "se", "ci_lo", "ci_hi", "p"
    );
    for r in &report.rows {
        let se = r.interval_method.and_then(|m| r.se(m));
        let cell = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<24} {:>8} {:>10.4} {:>10} {:>10} {:>10} {:>10}",
            r.estimand.label(),
            format_number(r.time),
            r.estimate,
            cell(se),
            cell(r.ci_lo),
            cell(r.ci_hi),
            cell(r.p_value)
        );
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Estimates, writes the report under `request.out`, and summarises.
pub fn cmd_estimate(request: &EstimateRequest) -> Result<EstimateOutcome> {
    let report = build_report(request)?;
    let files = emit_report(&report, &request.out, request.format)?;
    Ok(EstimateOutcome {
        summary: summary_table(&report),
        report,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub report: McReport,
    pub files: Vec<PathBuf>,
    pub out: PathBuf,
}

/// Runs the study described by a configuration file. The output directory
/// is `out` when given, otherwise the file's `output` entry.
pub fn cmd_simulate(config_path: &Path, out: Option<&Path>) -> Result<SimulateOutcome> {
    let file = SimConfigFile::load(config_path)?;
    let out = match (out, &file.output) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => dir.clone(),
        (None, None) => {
            return Err(Error::InvalidInput(
                "no output directory: pass --out or set `output` in the config".into(),
            ))
        }
    };
    let config = file.mc_config();
    let truth = truth_oracle(&config.dgp, config.event, file.truth_samples, file.truth_seed())?;
    let report = match config.ps_kind {
        PsKind::Logistic => run_monte_carlo(&config, &truth)?,
        kind => run_sensitivity(&config, &truth, kind)?,
    };
    let files = emit_mc_report(&report, &out)?;
    Ok(SimulateOutcome { report, files, out })
}
