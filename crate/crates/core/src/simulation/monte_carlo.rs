//! Monte Carlo comparison of the oracle and adjusted estimators and of the
//! standard-error methods.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{bootstrap_se, normal_quantile, rep_rng, AugmentationForm, Estimand, SeMethod};
use crate::model::Arm;
use crate::pipeline::{Analysis, PsSpec};
use crate::propensity::{known_propensity, PsKind};

use super::dgp::{sample_cohort, DgpConfig};
use super::truth::TruthTable;

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dgp: DgpConfig,
    pub reps: usize,
    pub seed: u64,
    /// Model fitted for the adjusted estimator.
    pub ps_kind: PsKind,
    /// Resamples per bootstrap; 0 disables the bootstrap.
    pub bootstrap_reps: usize,
    /// Only the first this many replications are bootstrapped.
    pub bootstrap_rep_limit: usize,
    pub level: f64,
    pub event: usize,
    #[serde(default)]
    pub augmentation: AugmentationForm,
}

impl McConfig {
    pub fn new(dgp: DgpConfig, reps: usize, seed: u64) -> Self {
        Self {
            dgp,
            reps,
            seed,
            ps_kind: PsKind::Logistic,
            bootstrap_reps: 0,
            bootstrap_rep_limit: 0,
            level: 0.95,
            event: 1,
            augmentation: AugmentationForm::default(),
        }
    }

    pub fn estimands(&self) -> [Estimand; 3] {
        [
            Estimand::Cif {
                arm: Arm::Treated,
                event: self.event,
            },
            Estimand::Cif {
                arm: Arm::Control,
                event: self.event,
            },
            Estimand::Ate { event: self.event },
        ]
    }
}

/// Estimates and standard errors of one replication, indexed `[estimand][time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub oracle_estimate: Vec<Vec<f64>>,
    pub oracle_se: Vec<Vec<f64>>,
    pub estimate: Vec<Vec<f64>>,
    pub naive_se: Vec<Vec<f64>>,
    pub corrected_se: Vec<Vec<f64>>,
    pub bootstrap_se: Option<Vec<Vec<f64>>>,
}

/// Runs one replication on its own random stream.
pub fn run_rep(config: &McConfig, rep: usize) -> Result<RepOutcome> {
    let mut rng = rep_rng(config.seed, rep as u64);
    let sample = sample_cohort(&config.dgp, &mut rng)?;
    let boot_seed = rng.next_u64();
    let cohort = &sample.cohort;
    let grid = &config.dgp.eval_times;
    let estimands = config.estimands();

    let oracle = Analysis::with_model(cohort, known_propensity(cohort, sample.true_scores.clone())?)?;
    let adjusted = Analysis::with_form(
        cohort,
        PsSpec::Fit(config.ps_kind).model(cohort)?,
        config.augmentation,
    )?;
    let mut out = RepOutcome {
        oracle_estimate: Vec::new(),
        oracle_se: Vec::new(),
        estimate: Vec::new(),
        naive_se: Vec::new(),
        corrected_se: Vec::new(),
        bootstrap_se: None,
    };
    for e in estimands {
        out.oracle_estimate.push(oracle.estimate(e, grid)?);
        out.oracle_se.push(oracle.influence(e, grid, false)?.se());
        out.estimate.push(adjusted.estimate(e, grid)?);
        out.naive_se.push(adjusted.influence(e, grid, false)?.se());
        out.corrected_se.push(adjusted.influence(e, grid, true)?.se());
    }
    if config.bootstrap_reps > 0 && rep < config.bootstrap_rep_limit {
        let boot = bootstrap_se(
            cohort,
            &PsSpec::Fit(config.ps_kind),
            &estimands,
            grid,
            config.bootstrap_reps,
            boot_seed,
        )?;
        out.bootstrap_se = Some(boot.reports.into_iter().map(|r| r.se).collect());
    }
    Ok(out)
}

/// Summary of one standard-error method for one estimand and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub estimand: Estimand,
    pub time: f64,
    pub method: SeMethod,
    pub truth: f64,
    /// Replications contributing to this row.
    pub count: usize,
    pub bias: f64,
    pub sd: f64,
    pub mean_se: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub truth: TruthTable,
    pub reps: usize,
    pub failures: usize,
    /// Largest `|corrected SE - naive SE|` over replications, estimands and times.
    pub max_corrected_naive_gap: f64,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn row(&self, estimand: Estimand, method: SeMethod, time: f64) -> Option<&McRow> {
        self.rows
            .iter()
            .find(|r| r.estimand == estimand && r.method == method && r.time == time)
    }
}

fn truth_for(truth: &TruthTable, estimand: Estimand) -> Result<&[f64]> {
    match estimand {
        Estimand::Cif { arm, event } if event == truth.event => Ok(truth.arm(arm)),
        Estimand::Ate { event } if event == truth.event => Ok(&truth.effect),
        other => Err(Error::InvalidInput(format!(
            "no true value for {}",
            other.label()
        ))),
    }
}

fn summarize(pairs: &[(f64, f64)], truth: f64, z: f64) -> (f64, f64, f64, f64) {
    let m = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let sd = if pairs.len() > 1 {
        (pairs.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    let mean_se = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let covered = pairs
        .iter()
        .filter(|(est, se)| (est - truth).abs() <= z * se)
        .count() as f64;
    (mean - truth, sd, mean_se, covered / m)
}

/// Replicates `config.reps` data sets in parallel and reduces them in
/// replication order, so the report depends only on the configuration.
pub fn run_monte_carlo(config: &McConfig, truth: &TruthTable) -> Result<McReport> {
    config.dgp.validate()?;
    if config.reps == 0 {
        return Err(Error::InvalidInput("at least one replication is required".into()));
    }
    if truth.times != config.dgp.eval_times {
        return Err(Error::InvalidInput(
            "truth table and configuration use different evaluation times".into(),
        ));
    }
    let z = normal_quantile(config.level)?;
    let outcomes: Vec<Result<RepOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_rep(config, rep))
        .collect();
    let ok: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failures = config.reps - ok.len();
    if failures as f64 > MAX_FAILURE_FRACTION * config.reps as f64 || ok.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: config.reps,
        });
    }

    let mut gap = 0.0f64;
    for o in &ok {
        for (a, b) in o.corrected_se.iter().flatten().zip(o.naive_se.iter().flatten()) {
            gap = gap.max((a - b).abs());
        }
    }

    let mut rows = Vec::new();
    for (e, estimand) in config.estimands().into_iter().enumerate() {
        let true_values = truth_for(truth, estimand)?;
        for (k, &time) in config.dgp.eval_times.iter().enumerate() {
            for method in SeMethod::ALL {
                let pairs: Vec<(f64, f64)> = ok
                    .iter()
                    .filter_map(|o| match method {
                        SeMethod::Oracle => Some((o.oracle_estimate[e][k], o.oracle_se[e][k])),
                        SeMethod::Naive => Some((o.estimate[e][k], o.naive_se[e][k])),
                        SeMethod::Corrected => Some((o.estimate[e][k], o.corrected_se[e][k])),
                        SeMethod::Bootstrap => {
                            o.bootstrap_se.as_ref().map(|b| (o.estimate[e][k], b[e][k]))
                        }
                    })
                    .collect();
                if pairs.is_empty() {
                    continue;
                }
                let (bias, sd, mean_se, coverage) = summarize(&pairs, true_values[k], z);
                rows.push(McRow {
                    estimand,
                    time,
                    method,
                    truth: true_values[k],
                    count: pairs.len(),
                    bias,
                    sd,
                    mean_se,
                    coverage,
                });
            }
        }
    }
    Ok(McReport {
        config: config.clone(),
        truth: truth.clone(),
        reps: config.reps,
        failures,
        max_corrected_naive_gap: gap,
        rows,
    })
}

/// The same study with a misspecified propensity model. Under the constant
/// model the corrected and naive standard errors must agree exactly.
pub fn run_sensitivity(config: &McConfig, truth: &TruthTable, ps_kind: PsKind) -> Result<McReport> {
    if !matches!(ps_kind, PsKind::Constant | PsKind::Probit) {
        return Err(Error::InvalidInput(format!(
            "sensitivity analysis uses the constant or probit model, not {}",
            ps_kind.name()
        )));
    }
    let mut config = config.clone();
    config.ps_kind = ps_kind;
    let report = run_monte_carlo(&config, truth)?;
    if ps_kind == PsKind::Constant && report.max_corrected_naive_gap != 0.0 {
        return Err(Error::InvalidInput(format!(
            "corrected and naive standard errors differ by {} under a constant propensity model",
            report.max_corrected_naive_gap
        )));
    }
    Ok(report)
}
