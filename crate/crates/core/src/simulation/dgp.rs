//! Data-generating process with confounded treatment, arm-specific
//! proportional cause-specific hazards and uniform censoring.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arm, Cohort, Subject};

pub const COVARIATE_DIM: usize = 3;

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64; COVARIATE_DIM], x: &[f64; COVARIATE_DIM]) -> f64 {
    a.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// All-cause hazard `dΛ(t; x) = scale · t^power · exp(β'x) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardModel {
    pub scale: f64,
    pub power: f64,
    pub beta: [f64; COVARIATE_DIM],
}

impl HazardModel {
    pub fn cumulative(&self, t: f64, x: &[f64; COVARIATE_DIM]) -> f64 {
        let k = self.power + 1.0;
        self.scale * t.powf(k) / k * dot(&self.beta, x).exp()
    }

    /// Inverse of `t ↦ 1 - exp(-Λ(t; x))` evaluated at `1 - u`, so that
    /// `u → 1` maps to time 0.
    pub fn inverse(&self, u: f64, x: &[f64; COVARIATE_DIM]) -> f64 {
        let k = self.power + 1.0;
        (k * (-u.ln()) / (self.scale * dot(&self.beta, x).exp())).powf(1.0 / k)
    }
}

/// `P(type 1 | T = t, x) = expit(intercept + coef'x + slope · t)`; otherwise type 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeModel {
    pub intercept: f64,
    pub coef: [f64; COVARIATE_DIM],
    pub slope: f64,
}

impl TypeModel {
    pub fn prob_first(&self, t: f64, x: &[f64; COVARIATE_DIM]) -> f64 {
        expit(self.intercept + dot(&self.coef, x) + self.slope * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    /// Logistic treatment model `(intercept, x₁, x₂, x₃)`.
    pub ps_coef: [f64; COVARIATE_DIM + 1],
    pub treated_hazard: HazardModel,
    pub control_hazard: HazardModel,
    pub treated_type: TypeModel,
    pub control_type: TypeModel,
    pub censor_lo: f64,
    pub censor_hi: f64,
    pub eval_times: Vec<f64>,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 500,
            ps_coef: [0.2, 0.5, -0.5, 0.0],
            treated_hazard: HazardModel {
                scale: 0.2,
                power: 2.0,
                beta: [0.0, 0.2, 0.2],
            },
            control_hazard: HazardModel {
                scale: 1.0 / 3.0,
                power: 1.0,
                beta: [0.0, 1.0 / 3.0, -1.0 / 3.0],
            },
            treated_type: TypeModel {
                intercept: -0.1,
                coef: [0.2, 0.2, 0.2],
                slope: 0.03,
            },
            control_type: TypeModel {
                intercept: 0.0,
                coef: [0.2, -0.1, 0.1],
                slope: 0.05,
            },
            censor_lo: 6.0,
            censor_hi: 12.0,
            eval_times: (1..=8).map(f64::from).collect(),
        }
    }
}

impl DgpConfig {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("sample size {} below 2", self.n)));
        }
        if !(self.censor_lo < self.censor_hi && self.censor_lo >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "censoring interval [{}, {}] is empty or negative",
                self.censor_lo, self.censor_hi
            )));
        }
        if let Some(t) = self.eval_times.iter().find(|&&t| !(t > 0.0 && t < self.censor_hi)) {
            return Err(Error::InvalidInput(format!(
                "evaluation time {t} outside (0, {})",
                self.censor_hi
            )));
        }
        if self.eval_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("evaluation times must increase".into()));
        }
        for h in [&self.treated_hazard, &self.control_hazard] {
            if !(h.scale > 0.0 && h.power > -1.0) {
                return Err(Error::InvalidInput(
                    "hazard scale must be positive and power above -1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn hazard(&self, arm: Arm) -> &HazardModel {
        match arm {
            Arm::Treated => &self.treated_hazard,
            Arm::Control => &self.control_hazard,
        }
    }

    pub fn type_model(&self, arm: Arm) -> &TypeModel {
        match arm {
            Arm::Treated => &self.treated_type,
            Arm::Control => &self.control_type,
        }
    }

    /// True `e(1; x)`.
    pub fn propensity(&self, x: &[f64; COVARIATE_DIM]) -> f64 {
        let c = &self.ps_coef;
        expit(c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2])
    }
}

/// Potential outcome under one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub time: f64,
    pub event: usize,
}

/// Everything drawn for one subject, observed or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Latent {
    pub x: [f64; COVARIATE_DIM],
    pub treatment: Arm,
    pub treated: Potential,
    pub control: Potential,
    pub censoring: f64,
}

impl Latent {
    pub fn potential(&self, arm: Arm) -> Potential {
        match arm {
            Arm::Treated => self.treated,
            Arm::Control => self.control,
        }
    }
}

fn potential(config: &DgpConfig, arm: Arm, x: &[f64; COVARIATE_DIM], u_time: f64, u_type: f64) -> Potential {
    let time = config.hazard(arm).inverse(u_time, x);
    let event = if u_type < config.type_model(arm).prob_first(time, x) {
        1
    } else {
        2
    };
    Potential { time, event }
}

/// Draws one subject. The draw order is `x₁, x₂, x₃`, then the uniforms
/// for treatment, event time, event type and censoring; both potential
/// outcomes share the time and type uniforms.
pub fn draw_subject<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Latent {
    let x: [f64; COVARIATE_DIM] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let u_treat: f64 = rng.random();
    // (0, 1] so that the logarithm stays finite
    let u_time = 1.0 - rng.random::<f64>();
    let u_type: f64 = rng.random();
    let u_cens: f64 = rng.random();
    let treatment = if u_treat < config.propensity(&x) {
        Arm::Treated
    } else {
        Arm::Control
    };
    Latent {
        x,
        treatment,
        treated: potential(config, Arm::Treated, &x, u_time, u_type),
        control: potential(config, Arm::Control, &x, u_time, u_type),
        censoring: config.censor_lo + (config.censor_hi - config.censor_lo) * u_cens,
    }
}

/// One simulated data set.
#[derive(Debug, Clone)]
pub struct SimSample {
    pub cohort: Cohort,
    /// True `e(1; X_i)`.
    pub true_scores: Vec<f64>,
    pub latent: Vec<Latent>,
}

pub fn sample_cohort<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Result<SimSample> {
    config.validate()?;
    let latent: Vec<Latent> = (0..config.n).map(|_| draw_subject(config, rng)).collect();
    let subjects = latent
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let p = l.potential(l.treatment);
            let (time, event) = if p.time <= l.censoring {
                (p.time, p.event)
            } else {
                (l.censoring, 0)
            };
            Subject {
                id: (i + 1).to_string(),
                treatment: l.treatment,
                covariates: l.x.to_vec(),
                time,
                event,
            }
        })
        .collect();
    let true_scores = latent.iter().map(|l| config.propensity(&l.x)).collect();
    Ok(SimSample {
        cohort: Cohort::new(subjects, 2)?,
        true_scores,
        latent,
    })
}
