//! Standard errors from influence functions, the finite-sample oracle
//! variance, and Wald intervals.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::estimator::HazardEstimate;
use crate::model::{Cohort, WeightVector};
use crate::propensity::PsKind;

use super::influence::{if_hazard_naive, AugmentationTerm, IfKind, IfMatrix};
use super::residuals::MartingaleResiduals;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeMethod {
    Oracle,
    Naive,
    Corrected,
    Bootstrap,
}

impl SeMethod {
    pub const ALL: [SeMethod; 4] = [
        SeMethod::Oracle,
        SeMethod::Naive,
        SeMethod::Corrected,
        SeMethod::Bootstrap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SeMethod::Oracle => "oracle",
            SeMethod::Naive => "naive",
            SeMethod::Corrected => "corrected",
            SeMethod::Bootstrap => "bootstrap",
        }
    }
}

impl std::str::FromStr for SeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(SeMethod::Oracle),
            "naive" => Ok(SeMethod::Naive),
            "corrected" => Ok(SeMethod::Corrected),
            "bootstrap" => Ok(SeMethod::Bootstrap),
            other => Err(Error::InvalidInput(format!("unknown variance method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub grid: Vec<f64>,
    pub se: Vec<f64>,
    pub method: SeMethod,
    /// `b(t)` on the grid, for corrected hazard variances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<Vec<Vec<f64>>>,
}

impl VarianceReport {
    pub fn from_influence(influence: &IfMatrix, method: SeMethod) -> Self {
        Self {
            grid: influence.grid.clone(),
            se: influence.se(),
            method,
            augmentation: None,
        }
    }
}

/// `σ̃²(t) = (1/n²) Σ_i [Σ_{s<=t} dM̂_i(s) / P_n ψ̂₂(s)]²`.
pub fn variance_naive(residuals: &MartingaleResiduals, grid: &[f64]) -> VarianceReport {
    VarianceReport::from_influence(&if_hazard_naive(residuals, grid), SeMethod::Naive)
}

/// `σ̂²(t) = (1/n²) Σ_i IF_i(t)²` for a corrected influence matrix.
pub fn variance_corrected(
    influence: &IfMatrix,
    augmentation: Option<&AugmentationTerm>,
) -> Result<VarianceReport> {
    if influence.kind != IfKind::Corrected {
        return Err(Error::InvalidInput(
            "corrected variance needs a corrected influence function".into(),
        ));
    }
    let mut report = VarianceReport::from_influence(influence, SeMethod::Corrected);
    report.augmentation = augmentation.map(|b| b.on_grid(&influence.grid));
    Ok(report)
}

/// Empirical counterpart of the exact variance of the oracle estimator,
/// `(1/n) Σ_{s<=t} P_n{ŵ² Y(s)} ΔΛ̂(s) / [P_n ψ̂₂(s)]²`.
pub fn variance_oracle_finite_sample(
    cohort: &Cohort,
    weights: &WeightVector,
    hazard: &HazardEstimate,
    grid: &[f64],
) -> Result<VarianceReport> {
    if weights.source() != PsKind::Known {
        return Err(Error::InvalidInput(
            "finite-sample oracle variance requires known propensity scores".into(),
        ));
    }
    if weights.len() != cohort.n() || hazard.n != cohort.n() || hazard.arm != weights.arm() {
        return Err(Error::DimensionMismatch(
            "cohort, weights and hazard do not belong together".into(),
        ));
    }
    let n = cohort.n() as f64;
    let mut members: Vec<(f64, f64)> = cohort
        .subjects()
        .iter()
        .zip(weights.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, &w)| (s.time, w * w))
        .collect();
    members.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut suffix = vec![0.0; members.len() + 1];
    for k in (0..members.len()).rev() {
        suffix[k] = suffix[k + 1] + members[k].1;
    }
    let jumps = hazard.jump_times();
    let mut cumulative = Vec::with_capacity(jumps.len());
    let mut running = 0.0;
    for (k, &s) in jumps.iter().enumerate() {
        let start = members.partition_point(|m| m.0 < s);
        let mean_sq = suffix[start] / n;
        let mean_risk = hazard.risk_weight_at_jump[k] / n;
        running += mean_sq * hazard.increments[k] / (mean_risk * mean_risk) / n;
        cumulative.push(running);
    }
    let se = grid
        .iter()
        .map(|&t| match jumps.partition_point(|&s| s <= t) {
            0 => 0.0,
            c => cumulative[c - 1].sqrt(),
        })
        .collect();
    Ok(VarianceReport {
        grid: grid.to_vec(),
        se,
        method: SeMethod::Oracle,
        augmentation: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldInterval {
    pub lo: f64,
    pub hi: f64,
    pub p_value: f64,
}

/// Normal quantile `z_{1 - α/2}` for a two-sided interval at `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("confidence level {level} outside (0, 1)")));
    }
    Ok(std::f64::consts::SQRT_2 * erfc_inv(1.0 - level))
}

/// `est ± z se` and the two-sided normal p-value for `H0: estimand = 0`.
pub fn wald_interval(estimate: f64, se: f64, level: f64) -> Result<WaldInterval> {
    if se.is_nan() || se < 0.0 {
        return Err(Error::InvalidInput(format!("standard error {se} is negative")));
    }
    let z = normal_quantile(level)?;
    let p_value = if estimate == 0.0 {
        1.0
    } else if se == 0.0 {
        0.0
    } else {
        erfc((estimate / se).abs() / std::f64::consts::SQRT_2)
    };
    Ok(WaldInterval {
        lo: estimate - z * se,
        hi: estimate + z * se,
        p_value,
    })
}
