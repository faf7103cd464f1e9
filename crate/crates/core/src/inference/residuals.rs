//! Plug-in martingale residuals
//! `M̂_ij(t) = ŵ_i N_ij(t) − ∫₀ᵗ ŵ_i Y_i(s) dΛ̂_j(s)`.

use crate::error::{Error, Result};
use crate::estimator::HazardEstimate;
use crate::model::{Arm, Cohort, WeightVector};
use crate::propensity::PsKind;
use crate::step::StepFunction;

/// Residuals for one arm and event type, stored in closed form so that any
/// subject's path can be evaluated without materialising an `n × jumps` table.
#[derive(Debug, Clone)]
pub struct MartingaleResiduals {
    pub(crate) arm: Arm,
    pub(crate) event: usize,
    pub(crate) source: PsKind,
    pub(crate) weights: Vec<f64>,
    pub(crate) times: Vec<f64>,
    pub(crate) hit: Vec<bool>,
    pub(crate) hazard: StepFunction,
    pub(crate) increments: Vec<f64>,
    /// `P_n ψ̂₂(s)` at each jump.
    pub(crate) mean_risk: Vec<f64>,
    /// `G(u) = Σ_{s <= u} ΔΛ̂(s) / P_n ψ̂₂(s)`.
    pub(crate) scaled_hazard: StepFunction,
    /// `ŵ_i / P_n ψ̂₂(T_i)` for subjects with an event of this type, else 0.
    pub(crate) event_term: Vec<f64>,
    /// `G(T_i)`.
    pub(crate) scaled_at_exit: Vec<f64>,
}

/// Builds residuals for `hazard`, which must come from the same weights.
pub fn martingale_residuals(
    cohort: &Cohort,
    weights: &WeightVector,
    hazard: &HazardEstimate,
) -> Result<MartingaleResiduals> {
    if weights.len() != cohort.n() || hazard.n != cohort.n() {
        return Err(Error::DimensionMismatch(format!(
            "cohort of {} subjects, {} weights, hazard fitted on {}",
            cohort.n(),
            weights.len(),
            hazard.n
        )));
    }
    if hazard.arm != weights.arm() {
        return Err(Error::InvalidInput(format!(
            "hazard is for the {} arm but weights target the {} arm",
            hazard.arm,
            weights.arm()
        )));
    }
    let n = cohort.n() as f64;
    let jump_times = hazard.jump_times();
    let mean_risk: Vec<f64> = hazard.risk_weight_at_jump.iter().map(|r| r / n).collect();
    let scaled: Vec<f64> = hazard
        .increments
        .iter()
        .zip(&mean_risk)
        .map(|(d, p)| d / p)
        .collect();
    let scaled_hazard = StepFunction::from_increments(jump_times.to_vec(), &scaled, 0.0)?;

    let mut event_term = vec![0.0; cohort.n()];
    let mut scaled_at_exit = vec![0.0; cohort.n()];
    let mut hit = vec![false; cohort.n()];
    let mut times = Vec::with_capacity(cohort.n());
    for (i, s) in cohort.subjects().iter().enumerate() {
        times.push(s.time);
        let w = weights.get(i);
        if w == 0.0 {
            continue;
        }
        scaled_at_exit[i] = scaled_hazard.eval(s.time);
        if s.event == hazard.event {
            hit[i] = true;
            let k = jump_times.partition_point(|&t| t < s.time);
            if k == jump_times.len() || jump_times[k] != s.time {
                return Err(Error::InvalidInput(format!(
                    "subject {} has an event at {} that is not a jump of the hazard; \
                     were the hazard and weights built together?",
                    i + 1,
                    s.time
                )));
            }
            event_term[i] = w / mean_risk[k];
        }
    }
    Ok(MartingaleResiduals {
        arm: hazard.arm,
        event: hazard.event,
        source: weights.source(),
        weights: weights.weights().to_vec(),
        times,
        hit,
        hazard: hazard.lambda.clone(),
        increments: hazard.increments.clone(),
        mean_risk,
        scaled_hazard,
        event_term,
        scaled_at_exit,
    })
}

impl MartingaleResiduals {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    pub fn event(&self) -> usize {
        self.event
    }

    pub fn source(&self) -> PsKind {
        self.source
    }

    pub fn jump_times(&self) -> &[f64] {
        self.hazard.times()
    }

    /// `P_n ψ̂₂(s_k)` at jump `k`.
    pub fn mean_risk(&self) -> &[f64] {
        &self.mean_risk
    }

    /// `dM̂_i(s_k) = ŵ_i dN_i(s_k) − ŵ_i Y_i(s_k) ΔΛ̂(s_k)`.
    pub fn increment(&self, i: usize, k: usize) -> f64 {
        let w = self.weights[i];
        if w == 0.0 {
            return 0.0;
        }
        let s = self.jump_times()[k];
        let t = self.times[i];
        let dn = if self.hit[i] && t == s { 1.0 } else { 0.0 };
        let y = if t >= s { 1.0 } else { 0.0 };
        w * (dn - y * self.increments[k])
    }

    /// All subjects' increments at jump `k`.
    pub fn increments_at(&self, k: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.increment(i, k)).collect()
    }

    /// `M̂_i(t)`.
    pub fn value(&self, i: usize, t: f64) -> f64 {
        let w = self.weights[i];
        if w == 0.0 {
            return 0.0;
        }
        let exit = self.times[i];
        let counted = if self.hit[i] && exit <= t { 1.0 } else { 0.0 };
        w * (counted - self.hazard.eval(t.min(exit)))
    }

    /// The residual path of subject `i` as a step function.
    pub fn path(&self, i: usize) -> StepFunction {
        let upto = if self.weights[i] == 0.0 {
            0
        } else {
            self.hazard.count_le(self.times[i])
        };
        let times = self.jump_times()[..upto].to_vec();
        let values = times.iter().map(|&s| self.value(i, s)).collect();
        StepFunction::new(times, values, 0.0).expect("jump times are increasing")
    }

    /// `Σ_{s <= t} dM̂_i(s) / P_n ψ̂₂(s)`, the oracle-structure influence value.
    pub fn scaled(&self, i: usize, t: f64) -> f64 {
        let w = self.weights[i];
        if w == 0.0 {
            0.0
        } else if self.times[i] <= t {
            self.event_term[i] - w * self.scaled_at_exit[i]
        } else {
            -w * self.scaled_hazard.eval(t)
        }
    }

    /// Left limit of [`Self::scaled`] at `t`.
    pub fn scaled_left(&self, i: usize, t: f64) -> f64 {
        let w = self.weights[i];
        if w == 0.0 {
            0.0
        } else if self.times[i] < t {
            self.event_term[i] - w * self.scaled_at_exit[i]
        } else {
            -w * self.scaled_hazard.eval_left(t)
        }
    }
}
