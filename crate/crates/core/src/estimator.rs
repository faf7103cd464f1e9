//! Adjusted (IPW) Nelson–Aalen estimation of counterfactual cause-specific
//! cumulative hazards and cumulative incidence functions.

use crate::error::{Error, Result};
use crate::model::{Arm, Cohort, WeightVector};
use crate::step::{union_times, StepFunction};

/// `Λ̂_j^a`: weighted Nelson–Aalen estimate for one arm and one event type.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardEstimate {
    pub arm: Arm,
    pub event: usize,
    /// Size of the full cohort (both arms); empirical means divide by it.
    pub n: usize,
    pub lambda: StepFunction,
    /// `ΔΛ̂_j^a(s)` at each jump, i.e. event weight / risk weight.
    pub increments: Vec<f64>,
    /// `Σ_i ŵ_i Y_i(s)` at each jump.
    pub risk_weight_at_jump: Vec<f64>,
    /// `Σ_i ŵ_i dN_ij(s)` at each jump.
    pub event_weight_at_jump: Vec<f64>,
}

impl HazardEstimate {
    pub fn jump_times(&self) -> &[f64] {
        self.lambda.times()
    }

    /// `P_n ψ̂₂(s)` at each jump: the risk weight divided by `n`.
    pub fn mean_risk_weight(&self, k: usize) -> f64 {
        self.risk_weight_at_jump[k] / self.n as f64
    }
}

/// Subjects of one arm sorted by follow-up time, with suffix sums of weights.
pub(crate) struct SortedArm {
    /// Cohort indices of weight-positive subjects, ascending in time.
    pub order: Vec<usize>,
    pub times: Vec<f64>,
    /// `suffix[k] = Σ_{m >= k} w_{order[m]}`.
    pub suffix: Vec<f64>,
}

impl SortedArm {
    pub fn new(cohort: &Cohort, weights: &WeightVector) -> Self {
        let mut order: Vec<usize> = (0..cohort.n()).filter(|&i| weights.get(i) > 0.0).collect();
        order.sort_by(|&a, &b| {
            cohort
                .subject(a)
                .time
                .total_cmp(&cohort.subject(b).time)
                .then(a.cmp(&b))
        });
        let times: Vec<f64> = order.iter().map(|&i| cohort.subject(i).time).collect();
        let mut suffix = vec![0.0; order.len() + 1];
        for k in (0..order.len()).rev() {
            suffix[k] = suffix[k + 1] + weights.get(order[k]);
        }
        suffix.pop();
        Self {
            order,
            times,
            suffix,
        }
    }
}

/// Adjusted Nelson–Aalen estimator: at every distinct time `s` with a
/// weight-positive type-`j` event, jumps by `Σ ŵ dN_j(s) / Σ ŵ Y(s)`.
pub fn adjusted_nelson_aalen(
    cohort: &Cohort,
    weights: &WeightVector,
    event: usize,
) -> Result<HazardEstimate> {
    if weights.len() != cohort.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} subjects",
            weights.len(),
            cohort.n()
        )));
    }
    if event == 0 || event > cohort.n_events() {
        return Err(Error::InvalidInput(format!(
            "event type {event} outside 1..={}",
            cohort.n_events()
        )));
    }
    let sorted = SortedArm::new(cohort, weights);
    if sorted.order.is_empty() {
        return Err(Error::EmptyArm(weights.arm()));
    }
    let mut times = Vec::new();
    let mut increments = Vec::new();
    let mut risk = Vec::new();
    let mut events = Vec::new();
    let mut k = 0;
    while k < sorted.order.len() {
        let t = sorted.times[k];
        let mut end = k;
        let mut event_weight = 0.0;
        while end < sorted.order.len() && sorted.times[end] == t {
            let i = sorted.order[end];
            if cohort.subject(i).event == event {
                event_weight += weights.get(i);
            }
            end += 1;
        }
        if event_weight > 0.0 {
            let risk_weight = sorted.suffix[k];
            if risk_weight <= 0.0 || risk_weight.is_nan() {
                return Err(Error::RiskSetExhausted { time: t });
            }
            times.push(t);
            increments.push(event_weight / risk_weight);
            risk.push(risk_weight);
            events.push(event_weight);
        }
        k = end;
    }
    let lambda = StepFunction::from_increments(times, &increments, 0.0)?;
    Ok(HazardEstimate {
        arm: weights.arm(),
        event,
        n: cohort.n(),
        lambda,
        increments,
        risk_weight_at_jump: risk,
        event_weight_at_jump: events,
    })
}

/// Adjusted Nelson–Aalen estimates for every event type `1..=J` of one arm.
pub fn all_hazards(cohort: &Cohort, weights: &WeightVector) -> Result<Vec<HazardEstimate>> {
    (1..=cohort.n_events())
        .map(|j| adjusted_nelson_aalen(cohort, weights, j))
        .collect()
}

/// `F̂_j^a` and the overall survival `exp{-Σ_k Λ̂_k^a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CifEstimate {
    pub arm: Arm,
    pub event: usize,
    /// Jumps at the jump times of `Λ̂_j^a`.
    pub cif: StepFunction,
    /// Jumps at the union of all cause-specific jump times.
    pub survival: StepFunction,
    /// `ΔF̂_j(s)` at the jumps of `cif`.
    pub increments: Vec<f64>,
    /// Some value of `F̂_j` exceeds 1; values are reported unclipped.
    pub exceeds_one: bool,
}

impl CifEstimate {
    /// `exp{-Σ_k Λ̂_k(s-)}`, the survival factor applied to a jump at `s`.
    pub fn survival_left(&self, t: f64) -> f64 {
        self.survival.eval_left(t)
    }
}

fn check_hazard_set(hazards: &[HazardEstimate]) -> Result<Arm> {
    let Some(first) = hazards.first() else {
        return Err(Error::InvalidInput("no cause-specific hazards supplied".into()));
    };
    let arm = first.arm;
    if let Some(h) = hazards.iter().find(|h| h.arm != arm) {
        return Err(Error::InvalidInput(format!(
            "hazards mix arms {arm} and {}",
            h.arm
        )));
    }
    for (k, h) in hazards.iter().enumerate() {
        if h.event != k + 1 {
            return Err(Error::InvalidInput(format!(
                "hazard {k} is for event type {}, expected {}",
                h.event,
                k + 1
            )));
        }
    }
    Ok(arm)
}

/// `F̂_j(t) = Σ_{s <= t} exp{-Σ_k Λ̂_k(s-)} ΔΛ̂_j(s)`.
///
/// `hazards[k]` must hold event type `k + 1`, all for the same arm.
pub fn cumulative_incidence(hazards: &[HazardEstimate], event: usize) -> Result<CifEstimate> {
    let arm = check_hazard_set(hazards)?;
    if event == 0 || event > hazards.len() {
        return Err(Error::InvalidInput(format!(
            "event type {event} outside 1..={}",
            hazards.len()
        )));
    }
    let all_times = hazards
        .iter()
        .fold(Vec::new(), |acc, h| union_times(&acc, h.jump_times()));
    let mut survival_values = Vec::with_capacity(all_times.len());
    let mut cursors = vec![0usize; hazards.len()];
    let mut cumulative = 0.0f64;
    let target = &hazards[event - 1];
    let mut increments = Vec::with_capacity(target.increments.len());
    for &t in &all_times {
        let left = (-cumulative).exp();
        for (h, cursor) in hazards.iter().zip(cursors.iter_mut()) {
            if *cursor < h.increments.len() && h.jump_times()[*cursor] == t {
                if h.event == event {
                    increments.push(left * h.increments[*cursor]);
                }
                cumulative += h.increments[*cursor];
                *cursor += 1;
            }
        }
        survival_values.push((-cumulative).exp());
    }
    let cif = StepFunction::from_increments(target.jump_times().to_vec(), &increments, 0.0)?;
    let exceeds_one = cif.values().iter().any(|&v| v > 1.0);
    Ok(CifEstimate {
        arm,
        event,
        survival: StepFunction::new(all_times, survival_values, 1.0)?,
        cif,
        increments,
        exceeds_one,
    })
}

/// `τ̂_j = F̂_j^1 - F̂_j^0` on the union of jump times.
pub fn ate(treated: &CifEstimate, control: &CifEstimate) -> Result<StepFunction> {
    if treated.event != control.event {
        return Err(Error::InvalidInput(format!(
            "treatment effect compares event {} with event {}",
            treated.event, control.event
        )));
    }
    if treated.arm != Arm::Treated || control.arm != Arm::Control {
        return Err(Error::InvalidInput(
            "treatment effect needs a treated and a control incidence".into(),
        ));
    }
    Ok(treated.cif.combine(&control.cif, |a, b| a - b))
}
