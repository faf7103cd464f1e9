//! Influence functions of the adjusted Nelson–Aalen hazards, the derived
//! cumulative incidences and their treatment-effect contrasts.
//!
//! Every influence function here splits as `m_i(t) − c(t)'φ_i`: a martingale
//! part that is nonzero only for subjects of the estimand's arm, and a
//! propensity part driven by the MLE influence vectors `φ_i`, which every
//! subject carries. The oracle and naive forms drop the propensity part.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::CifEstimate;
use crate::model::{Arm, Cohort};
use crate::propensity::{ps_gradient, FittedPropensity, InfluenceVectors, PsKind};
use crate::step::StepFunction;

use super::residuals::MartingaleResiduals;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimand {
    Hazard { arm: Arm, event: usize },
    Cif { arm: Arm, event: usize },
    Ate { event: usize },
}

impl Estimand {
    pub fn label(&self) -> String {
        match self {
            Estimand::Hazard { arm, event } => format!("hazard_event{event}_{arm}"),
            Estimand::Cif { arm, event } => format!("cif_event{event}_{arm}"),
            Estimand::Ate { event } => format!("ate_event{event}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IfKind {
    /// Known propensity score.
    Oracle,
    /// Estimated propensity score, propensity uncertainty ignored.
    NaiveStructure,
    /// Estimated propensity score with the augmentation term.
    Corrected,
}

/// Per-subject influence values (`n × |grid|`).
#[derive(Debug, Clone, PartialEq)]
pub struct IfMatrix {
    pub estimand: Estimand,
    pub kind: IfKind,
    pub grid: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl IfMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.values.column_iter().map(|c| c.sum() / n).collect()
    }

    /// `(1/n²) Σ_i IF_i(t)²` per grid point.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.values
            .column_iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>() / (n * n))
            .collect()
    }

    pub fn se(&self) -> Vec<f64> {
        self.variance().into_iter().map(f64::sqrt).collect()
    }
}

/// `b_j(t; a) = Σ_{s <= t} (1 / P_n ψ̂₂(s)) P_n{dM̂_j(s) q}` with `q` from [`score_ratio`].
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationTerm {
    pub arm: Arm,
    pub form: AugmentationForm,
    pub event: usize,
    pub dim: usize,
    jump_times: Vec<f64>,
    /// Cumulative `b` after each jump, one `dim`-vector per jump.
    values: Vec<Vec<f64>>,
}

impl AugmentationTerm {
    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    fn at_count(&self, count: usize) -> Vec<f64> {
        match count {
            0 => vec![0.0; self.dim],
            k => self.values[k - 1].clone(),
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.at_count(self.jump_times.partition_point(|&s| s <= t))
    }

    pub fn eval_left(&self, t: f64) -> Vec<f64> {
        self.at_count(self.jump_times.partition_point(|&s| s < t))
    }

    /// Increment `Δb(s_k)`.
    pub fn jump(&self, k: usize) -> Vec<f64> {
        let prev = self.at_count(k);
        self.values[k].iter().zip(prev).map(|(a, b)| a - b).collect()
    }

    /// `b` on a grid, as `|grid|` vectors.
    pub fn on_grid(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        grid.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|&v| v == 0.0)
    }
}

/// How the propensity derivative enters the augmentation term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentationForm {
    /// `P_n{dM̂ ė/e}`: the exact derivative of `Λ̂(t; θ)` in `θ`, since the
    /// weighted residual `dM̂` already carries one factor `1/e`.
    #[default]
    Derived,
    /// `P_n{dM̂ ė/e²}`, with an extra factor `1/e`; kept for comparison.
    InverseSquare,
}

impl AugmentationForm {
    pub fn name(self) -> &'static str {
        match self {
            AugmentationForm::Derived => "derived",
            AugmentationForm::InverseSquare => "inverse-square",
        }
    }
}

impl std::str::FromStr for AugmentationForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived" => Ok(AugmentationForm::Derived),
            "inverse-square" => Ok(AugmentationForm::InverseSquare),
            other => Err(Error::InvalidInput(format!("unknown augmentation form `{other}`"))),
        }
    }
}

/// Rows `q_i = ė(a; X_i; θ̂) / e(a; X_i; θ̂)^k` for subjects of `arm`, zero
/// elsewhere, with `k = 1` for the derived form and `k = 2` for the inverse-square one.
pub fn score_ratio(
    model: &FittedPropensity,
    cohort: &Cohort,
    arm: Arm,
    form: AugmentationForm,
) -> Result<DMatrix<f64>> {
    let d = model.dim();
    let mut q = DMatrix::zeros(cohort.n(), d);
    for (i, s) in cohort.subjects().iter().enumerate() {
        if s.treatment != arm {
            continue;
        }
        let e = model.fitted(i, arm);
        let grad = ps_gradient(model, &s.covariates, arm)?;
        for (c, g) in grad.iter().enumerate() {
            q[(i, c)] = match form {
                AugmentationForm::Derived => g / e,
                AugmentationForm::InverseSquare => g / (e * e),
            };
        }
    }
    Ok(q)
}

/// Accumulates `b_j(t)` jump by jump.
///
/// `Σ_i dM̂_i(s) = 0` at every jump, so `q_i` is centred at the first
/// in-arm subject's value before summation; a model whose `q` is constant
/// within the arm (the constant model) therefore yields `b ≡ 0` exactly.
pub fn augmentation(
    cohort: &Cohort,
    model: &FittedPropensity,
    residuals: &MartingaleResiduals,
    form: AugmentationForm,
) -> Result<AugmentationTerm> {
    if model.kind() == PsKind::Known {
        return Err(Error::Unsupported(
            "augmentation term needs an estimated propensity model".into(),
        ));
    }
    if residuals.n() != cohort.n() || model.fitted_scores().len() != cohort.n() {
        return Err(Error::DimensionMismatch(
            "cohort, model and residuals disagree on the sample size".into(),
        ));
    }
    let arm = residuals.arm;
    let d = model.dim();
    let n = cohort.n() as f64;
    let mut q = score_ratio(model, cohort, arm, form)?;
    let members: Vec<usize> = (0..cohort.n()).filter(|&i| residuals.weights[i] > 0.0).collect();
    if let Some(&first) = members.first() {
        let reference: Vec<f64> = q.row(first).iter().copied().collect();
        for &i in &members {
            for c in 0..d {
                q[(i, c)] -= reference[c];
            }
        }
    }

    let jumps = residuals.jump_times();
    let m = jumps.len();
    // weighted q of events at each jump, and of everyone at risk
    let mut event_sum = vec![vec![0.0; d]; m];
    let mut by_time: Vec<usize> = members.clone();
    by_time.sort_by(|&a, &b| residuals.times[a].total_cmp(&residuals.times[b]).then(a.cmp(&b)));
    for &i in &members {
        if residuals.hit[i] {
            let k = jumps.partition_point(|&s| s < residuals.times[i]);
            for c in 0..d {
                event_sum[k][c] += residuals.weights[i] * q[(i, c)];
            }
        }
    }
    let mut suffix = vec![vec![0.0; d]; by_time.len() + 1];
    for pos in (0..by_time.len()).rev() {
        let i = by_time[pos];
        for c in 0..d {
            suffix[pos][c] = suffix[pos + 1][c] + residuals.weights[i] * q[(i, c)];
        }
    }
    let mut values = Vec::with_capacity(m);
    let mut running = vec![0.0; d];
    for k in 0..m {
        let start = by_time.partition_point(|&i| residuals.times[i] < jumps[k]);
        let scale = 1.0 / (residuals.mean_risk[k] * n);
        for c in 0..d {
            running[c] += scale * (event_sum[k][c] - residuals.increments[k] * suffix[start][c]);
        }
        values.push(running.clone());
    }
    Ok(AugmentationTerm {
        arm,
        form,
        event: residuals.event,
        dim: d,
        jump_times: jumps.to_vec(),
        values,
    })
}

/// The propensity correction attached to a hazard influence function.
#[derive(Debug, Clone, Copy)]
pub struct Correction<'a> {
    pub augmentation: &'a AugmentationTerm,
    pub phi: &'a InfluenceVectors,
}

/// `IF{Λ̂_k^a}` in structured form: residuals plus an optional correction.
#[derive(Debug, Clone, Copy)]
pub struct HazardInfluence<'a> {
    pub residuals: &'a MartingaleResiduals,
    pub correction: Option<Correction<'a>>,
}

fn dot_row(phi: &InfluenceVectors, i: usize, b: &[f64]) -> f64 {
    b.iter().enumerate().map(|(c, v)| v * phi.phi[(i, c)]).sum()
}

impl<'a> HazardInfluence<'a> {
    pub fn oracle(residuals: &'a MartingaleResiduals) -> Self {
        Self {
            residuals,
            correction: None,
        }
    }

    pub fn corrected(
        residuals: &'a MartingaleResiduals,
        augmentation: &'a AugmentationTerm,
        phi: &'a InfluenceVectors,
    ) -> Self {
        Self {
            residuals,
            correction: Some(Correction { augmentation, phi }),
        }
    }

    fn kind(&self) -> IfKind {
        match (self.correction, self.residuals.source) {
            (Some(_), _) => IfKind::Corrected,
            (None, PsKind::Known) => IfKind::Oracle,
            (None, _) => IfKind::NaiveStructure,
        }
    }

    /// `IF_i(t)`.
    pub fn value(&self, i: usize, t: f64) -> f64 {
        let base = self.residuals.scaled(i, t);
        match self.correction {
            Some(c) => base - dot_row(c.phi, i, &c.augmentation.eval(t)),
            None => base,
        }
    }

    /// `IF_i(t-)`.
    pub fn value_left(&self, i: usize, t: f64) -> f64 {
        let base = self.residuals.scaled_left(i, t);
        match self.correction {
            Some(c) => base - dot_row(c.phi, i, &c.augmentation.eval_left(t)),
            None => base,
        }
    }

    pub fn matrix(&self, grid: &[f64]) -> IfMatrix {
        let r = self.residuals;
        let n = r.n();
        let mut values = DMatrix::zeros(n, grid.len());
        for (col, &t) in grid.iter().enumerate() {
            let g_t = r.scaled_hazard.eval(t);
            for i in 0..n {
                let w = r.weights[i];
                if w == 0.0 {
                    continue;
                }
                values[(i, col)] = if r.times[i] <= t {
                    r.event_term[i] - w * r.scaled_at_exit[i]
                } else {
                    -w * g_t
                };
            }
            if let Some(c) = self.correction {
                let b = c.augmentation.eval(t);
                for i in 0..n {
                    values[(i, col)] -= dot_row(c.phi, i, &b);
                }
            }
        }
        IfMatrix {
            estimand: Estimand::Hazard {
                arm: r.arm,
                event: r.event,
            },
            kind: self.kind(),
            grid: grid.to_vec(),
            values,
        }
    }
}

/// Oracle influence function `Σ_{s <= t} dM̂_i(s) / P_n ψ̂₂(s)` under a known
/// propensity score.
pub fn if_hazard_oracle(residuals: &MartingaleResiduals, grid: &[f64]) -> Result<IfMatrix> {
    if residuals.source != PsKind::Known {
        return Err(Error::InvalidInput(format!(
            "oracle influence function requires known propensity scores, got {} weights; \
             use the corrected influence function",
            residuals.source.name()
        )));
    }
    Ok(HazardInfluence::oracle(residuals).matrix(grid))
}

/// The same functional form with estimated-propensity weights (no correction).
pub fn if_hazard_naive(residuals: &MartingaleResiduals, grid: &[f64]) -> IfMatrix {
    HazardInfluence::oracle(residuals).matrix(grid)
}

/// Corrected influence function `Σ dM̂_i/P_nψ̂₂ − b(t)'φ_i`.
pub fn if_hazard_corrected(
    residuals: &MartingaleResiduals,
    augmentation: &AugmentationTerm,
    phi: &InfluenceVectors,
    grid: &[f64],
) -> Result<IfMatrix> {
    if phi.n() != residuals.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} influence vectors for {} subjects",
            phi.n(),
            residuals.n()
        )));
    }
    if phi.dim() != augmentation.dim {
        return Err(Error::DimensionMismatch(format!(
            "influence vectors of dimension {} against an augmentation of dimension {}",
            phi.dim(),
            augmentation.dim
        )));
    }
    if augmentation.arm != residuals.arm || augmentation.event != residuals.event {
        return Err(Error::InvalidInput(
            "augmentation term belongs to a different hazard".into(),
        ));
    }
    Ok(HazardInfluence::corrected(residuals, augmentation, phi).matrix(grid))
}

/// Functional-delta-method influence function of `F̂_j^a`:
/// `Σ_{s<=t} F̄(s-) ΔIF{Λ̂_j}(s) − Σ_k Σ_{s<=t} IF{Λ̂_k}(s-) ΔF̂_j(s)`.
///
/// `hazard_ifs[k]` must be the influence function of event type `k + 1`.
pub fn if_cif(hazard_ifs: &[HazardInfluence<'_>], cif: &CifEstimate, grid: &[f64]) -> Result<IfMatrix> {
    let j = cif.event;
    if hazard_ifs.len() < j {
        return Err(Error::InvalidInput(format!(
            "incidence of event {j} needs influence functions for all event types, got {}",
            hazard_ifs.len()
        )));
    }
    let n = hazard_ifs[0].residuals.n();
    for (k, h) in hazard_ifs.iter().enumerate() {
        let r = h.residuals;
        if r.event != k + 1 || r.arm != cif.arm || r.n() != n {
            return Err(Error::InvalidInput(format!(
                "hazard influence {k} does not match event {} of the {} arm",
                k + 1,
                cif.arm
            )));
        }
        if h.correction.is_some() != hazard_ifs[0].correction.is_some() {
            return Err(Error::InvalidInput(
                "mixing corrected and uncorrected hazard influence functions".into(),
            ));
        }
    }
    let target = hazard_ifs[j - 1].residuals;
    let jumps = target.jump_times();
    if jumps != cif.cif.times() {
        return Err(Error::InvalidInput(
            "incidence estimate and hazard influence use different jump grids".into(),
        ));
    }

    // running sums over the target's jumps
    let survival_left: Vec<f64> = jumps.iter().map(|&s| cif.survival_left(s)).collect();
    let weighted: Vec<f64> = (0..jumps.len())
        .map(|l| survival_left[l] * target.increments[l] / target.mean_risk[l])
        .collect();
    let k_fn = StepFunction::from_increments(jumps.to_vec(), &weighted, 0.0)?;
    let h_fns = hazard_ifs
        .iter()
        .map(|h| {
            let incs: Vec<f64> = jumps
                .iter()
                .zip(&cif.increments)
                .map(|(&s, df)| df * h.residuals.scaled_hazard.eval_left(s))
                .collect();
            StepFunction::from_increments(jumps.to_vec(), &incs, 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let f_fn = &cif.cif;

    let mut values = DMatrix::zeros(n, grid.len());
    for i in 0..n {
        let w = target.weights[i];
        if w == 0.0 {
            continue;
        }
        let exit = target.times[i];
        let f_exit = f_fn.eval(exit);
        let k_exit = k_fn.eval(exit);
        let surv_exit = cif.survival_left(exit);
        for (col, &t) in grid.iter().enumerate() {
            let v = if exit <= t {
                let f_gain = f_fn.eval(t) - f_exit;
                let mut v = target.event_term[i] * surv_exit - w * k_exit;
                for (h, h_fn) in hazard_ifs.iter().zip(&h_fns) {
                    let r = h.residuals;
                    v -= r.event_term[i] * f_gain
                        - w * h_fn.eval(exit)
                        - w * r.scaled_at_exit[i] * f_gain;
                }
                v
            } else {
                let mut v = -w * k_fn.eval(t);
                for h_fn in &h_fns {
                    v += w * h_fn.eval(t);
                }
                v
            };
            values[(i, col)] = v;
        }
    }

    let corrected = hazard_ifs[0].correction.is_some();
    if corrected {
        let phi = hazard_ifs[0].correction.unwrap().phi;
        let d = phi.dim();
        let target_aug = hazard_ifs[j - 1].correction.unwrap().augmentation;
        // C(t) = Σ_{s<=t} F̄(s-) Δb_j(s) − Σ_k Σ_{s<=t} b_k(s-) ΔF̂_j(s)
        let mut running = vec![0.0; d];
        let mut cumulative = Vec::with_capacity(jumps.len());
        for (l, &s) in jumps.iter().enumerate() {
            let db = target_aug.jump(l);
            for c in 0..d {
                running[c] += survival_left[l] * db[c];
            }
            for h in hazard_ifs {
                let b_left = h.correction.unwrap().augmentation.eval_left(s);
                for c in 0..d {
                    running[c] -= b_left[c] * cif.increments[l];
                }
            }
            cumulative.push(running.clone());
        }
        for (col, &t) in grid.iter().enumerate() {
            let count = jumps.partition_point(|&s| s <= t);
            if count == 0 {
                continue;
            }
            let c_t = &cumulative[count - 1];
            for i in 0..n {
                values[(i, col)] -= dot_row(phi, i, c_t);
            }
        }
    }

    Ok(IfMatrix {
        estimand: Estimand::Cif {
            arm: cif.arm,
            event: j,
        },
        kind: if corrected {
            IfKind::Corrected
        } else {
            hazard_ifs[0].kind()
        },
        grid: grid.to_vec(),
        values,
    })
}

/// Influence function of `τ̂_j = F̂_j^1 − F̂_j^0`, by additivity.
pub fn if_ate(treated: &IfMatrix, control: &IfMatrix) -> Result<IfMatrix> {
    let event = match (treated.estimand, control.estimand) {
        (
            Estimand::Cif {
                arm: Arm::Treated,
                event: e1,
            },
            Estimand::Cif {
                arm: Arm::Control,
                event: e0,
            },
        ) if e1 == e0 => e1,
        _ => {
            return Err(Error::InvalidInput(
                "treatment effect needs incidence influence functions for the treated and control arms of one event".into(),
            ))
        }
    };
    if treated.grid != control.grid || treated.n() != control.n() {
        return Err(Error::InvalidInput(
            "influence functions are on different grids or samples".into(),
        ));
    }
    if treated.kind != control.kind {
        return Err(Error::InvalidInput(
            "influence functions of different kinds".into(),
        ));
    }
    Ok(IfMatrix {
        estimand: Estimand::Ate { event },
        kind: treated.kind,
        grid: treated.grid.clone(),
        values: &treated.values - &control.values,
    })
}
