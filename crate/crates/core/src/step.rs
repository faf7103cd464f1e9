//! Right-continuous piecewise-constant functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A right-continuous step function on `[0, ∞)`.
///
/// `values[k]` is the value on `[times[k], times[k + 1])`; before the first
/// jump the function equals `value_at_zero`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    value_at_zero: f64,
}

impl StepFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>, value_at_zero: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "step function has {} jump times but {} values",
                times.len(),
                values.len()
            )));
        }
        for (k, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "step function jump time {t} is not a finite nonnegative number"
                )));
            }
            if k > 0 && t <= times[k - 1] {
                return Err(Error::InvalidInput(
                    "step function jump times must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self {
            times,
            values,
            value_at_zero,
        })
    }

    /// The identically-constant function.
    pub fn constant(value: f64) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            value_at_zero: value,
        }
    }

    /// Builds a function from jump sizes by cumulative summation.
    pub fn from_increments(times: Vec<f64>, increments: &[f64], value_at_zero: f64) -> Result<Self> {
        let mut acc = value_at_zero;
        let values = increments
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        Self::new(times, values, value_at_zero)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of jump times `<= t`.
    pub fn count_le(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Number of jump times `< t`.
    pub fn count_lt(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    /// Right-continuous evaluation `f(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => self.value_at_zero,
            k => self.values[k - 1],
        }
    }

    /// Left limit `f(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        match self.count_lt(t) {
            0 => self.value_at_zero,
            k => self.values[k - 1],
        }
    }

    /// Jump size at index `k`.
    pub fn jump(&self, k: usize) -> f64 {
        let before = if k == 0 {
            self.value_at_zero
        } else {
            self.values[k - 1]
        };
        self.values[k] - before
    }

    /// Iterator over `(time, jump size)`.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.times.len()).map(move |k| (self.times[k], self.jump(k)))
    }

    pub fn eval_many(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&t| self.eval(t)).collect()
    }

    /// Pointwise combination of two step functions on the union of their jump times.
    pub fn combine(&self, other: &StepFunction, op: impl Fn(f64, f64) -> f64) -> StepFunction {
        let times = union_times(&self.times, &other.times);
        let values = times
            .iter()
            .map(|&t| op(self.eval(t), other.eval(t)))
            .collect();
        StepFunction {
            times,
            values,
            value_at_zero: op(self.value_at_zero, other.value_at_zero),
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        let mut prev = self.value_at_zero;
        self.values.iter().all(|&v| {
            let ok = v >= prev;
            prev = v;
            ok
        })
    }

    /// `(time, value)` pairs including the origin.
    pub fn points(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, self.value_at_zero))
            .chain(self.times.iter().copied().zip(self.values.iter().copied()))
            .collect()
    }
}

/// Sorted union of two strictly increasing sequences.
pub fn union_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), Some(&y)) if y < x => {
                j += 1;
                y
            }
            (Some(&x), Some(_)) => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}
