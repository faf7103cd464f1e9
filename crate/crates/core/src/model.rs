//! Cohorts of right-censored competing-risks observations and IPW weights.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propensity::PsKind;

/// Treatment level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Treated, Arm::Control];

    pub fn from_indicator(a: u8) -> Option<Arm> {
        match a {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treated),
            _ => None,
        }
    }

    pub fn indicator(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::Control => f.write_str("control"),
            Arm::Treated => f.write_str("treated"),
        }
    }
}

/// One observed subject: treatment, baseline covariates, follow-up time and
/// event code (0 = censored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub treatment: Arm,
    pub covariates: Vec<f64>,
    pub time: f64,
    pub event: usize,
}

impl Subject {
    /// Counting process `N_j(t) = I{T <= t, event = j}`.
    pub fn counting(&self, j: usize, t: f64) -> bool {
        self.event == j && self.time <= t
    }

    /// At-risk process `Y(t) = I{T >= t}`.
    pub fn at_risk(&self, t: f64) -> bool {
        self.time >= t
    }
}

/// An unvalidated input row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub id: String,
    pub treatment: i64,
    pub time: f64,
    pub event: i64,
    pub covariates: Vec<f64>,
}

/// A validated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    subjects: Vec<Subject>,
    p: usize,
    n_events: usize,
    t_star: f64,
}

impl Cohort {
    /// Validates already-typed subjects. Errors name the 1-based offending row.
    pub fn new(subjects: Vec<Subject>, n_events: usize) -> Result<Self> {
        if n_events == 0 {
            return Err(Error::InvalidInput("number of event types must be at least 1".into()));
        }
        let Some(first) = subjects.first() else {
            return Err(Error::InvalidInput("cohort has no subjects".into()));
        };
        let p = first.covariates.len();
        let mut t_star = 0.0f64;
        let mut counts = [0usize; 2];
        for (k, s) in subjects.iter().enumerate() {
            let row = k + 1;
            if s.time.is_nan() || !s.time.is_finite() {
                return Err(Error::Validation {
                    row,
                    message: "non-finite follow-up time".into(),
                });
            }
            if s.time < 0.0 {
                return Err(Error::Validation {
                    row,
                    message: "negative follow-up time".into(),
                });
            }
            if s.event > n_events {
                return Err(Error::Validation {
                    row,
                    message: format!("event code {} exceeds J = {n_events}", s.event),
                });
            }
            if s.covariates.len() != p {
                return Err(Error::Validation {
                    row,
                    message: format!(
                        "expected {p} covariates, found {}",
                        s.covariates.len()
                    ),
                });
            }
            if s.covariates.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation {
                    row,
                    message: "missing or non-finite covariate".into(),
                });
            }
            counts[s.treatment.indicator() as usize] += 1;
            t_star = t_star.max(s.time);
        }
        if counts[0] == 0 {
            return Err(Error::EmptyArm(Arm::Control));
        }
        if counts[1] == 0 {
            return Err(Error::EmptyArm(Arm::Treated));
        }
        Ok(Self {
            subjects,
            p,
            n_events,
            t_star,
        })
    }

    /// Overrides the evaluation horizon (defaults to the largest observed time).
    pub fn with_horizon(mut self, t_star: f64) -> Result<Self> {
        if !(t_star.is_finite() && t_star > 0.0) {
            return Err(Error::InvalidInput(format!("horizon {t_star} must be positive")));
        }
        self.t_star = t_star;
        Ok(self)
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn subject(&self, i: usize) -> &Subject {
        &self.subjects[i]
    }

    pub fn n(&self) -> usize {
        self.subjects.len()
    }

    /// Covariate dimension.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of competing event types.
    pub fn n_events(&self) -> usize {
        self.n_events
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn arm_size(&self, arm: Arm) -> usize {
        self.subjects.iter().filter(|s| s.treatment == arm).count()
    }

    /// Largest follow-up time among subjects of `arm`.
    pub fn last_time(&self, arm: Arm) -> f64 {
        self.subjects
            .iter()
            .filter(|s| s.treatment == arm)
            .map(|s| s.time)
            .fold(0.0, f64::max)
    }

    /// Positivity diagnostics: arms with nobody left at risk at the horizon.
    pub fn positivity_warnings(&self) -> Vec<String> {
        Arm::BOTH
            .iter()
            .filter(|&&arm| {
                !self
                    .subjects
                    .iter()
                    .any(|s| s.treatment == arm && s.at_risk(self.t_star))
            })
            .map(|arm| {
                format!(
                    "no {arm} subject remains at risk at the horizon t* = {}",
                    self.t_star
                )
            })
            .collect()
    }

    /// Sub-sample (with repetition) by index, used for resampling.
    pub fn resample(&self, indices: &[usize]) -> Result<Cohort> {
        let subjects = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        Cohort::new(subjects, self.n_events)
    }
}

/// Validates raw rows into a [`Cohort`].
pub fn build_cohort(rows: &[RawRow], n_events: usize) -> Result<Cohort> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no data rows".into()));
    }
    let p = rows[0].covariates.len();
    let mut subjects = Vec::with_capacity(rows.len());
    for (k, r) in rows.iter().enumerate() {
        let row = k + 1;
        if r.covariates.len() != p {
            return Err(Error::Validation {
                row,
                message: format!("inconsistent column count: expected {p} covariates, found {}", r.covariates.len()),
            });
        }
        let treatment = u8::try_from(r.treatment)
            .ok()
            .and_then(Arm::from_indicator)
            .ok_or_else(|| Error::Validation {
                row,
                message: format!("treatment {} is not 0 or 1", r.treatment),
            })?;
        if r.event < 0 {
            return Err(Error::Validation {
                row,
                message: format!("negative event code {}", r.event),
            });
        }
        subjects.push(Subject {
            id: r.id.clone(),
            treatment,
            covariates: r.covariates.clone(),
            time: r.time,
            event: r.event as usize,
        });
    }
    Cohort::new(subjects, n_events)
}

/// Inverse-probability-of-treatment weights `I{A = a} / e(a; X)` for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    arm: Arm,
    source: PsKind,
    max_weight: f64,
}

impl WeightVector {
    pub fn new(cohort: &Cohort, arm: Arm, weights: Vec<f64>, source: PsKind) -> Result<Self> {
        if weights.len() != cohort.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} subjects",
                weights.len(),
                cohort.n()
            )));
        }
        let mut max_weight = 0.0f64;
        for (i, (&w, s)) in weights.iter().zip(cohort.subjects()).enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation {
                    row: i + 1,
                    message: format!("weight {w} is not finite and nonnegative"),
                });
            }
            if (w > 0.0) != (s.treatment == arm) {
                return Err(Error::Validation {
                    row: i + 1,
                    message: format!("weight must be positive exactly on the {arm} arm"),
                });
            }
            max_weight = max_weight.max(w);
        }
        Ok(Self {
            weights,
            arm,
            source,
            max_weight,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    /// Kind of propensity model the weights came from.
    pub fn source(&self) -> PsKind {
        self.source
    }

    pub fn max_weight(&self) -> f64 {
        self.max_weight
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
