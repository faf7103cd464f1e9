//! True counterfactual cumulative incidences by direct Monte Carlo over
//! potential outcomes, without censoring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::rep_rng;
use crate::model::Arm;

use super::dgp::{draw_subject, DgpConfig};

const CHUNK: usize = 1 << 16;

/// `F₁ᵃ(t)` for both arms on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub times: Vec<f64>,
    pub event: usize,
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
    /// `F¹ - F⁰`, from the same draws.
    pub effect: Vec<f64>,
    /// Largest binomial Monte Carlo standard error over the table.
    pub max_se: f64,
    pub method: String,
    pub samples: usize,
    pub seed: u64,
}

impl TruthTable {
    pub fn arm(&self, arm: Arm) -> &[f64] {
        match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        }
    }
}

/// Direct simulation with `samples` draws, split into fixed-size chunks that
/// each own a random stream, so the result does not depend on scheduling.
pub fn truth_oracle(config: &DgpConfig, event: usize, samples: usize, seed: u64) -> Result<TruthTable> {
    config.validate()?;
    if samples == 0 {
        return Err(Error::InvalidInput("truth oracle needs at least one draw".into()));
    }
    let times = &config.eval_times;
    let g = times.len();
    let chunks = samples.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rep_rng(seed, c as u64);
            let size = CHUNK.min(samples - c * CHUNK);
            let mut counts = vec![0u64; 3 * g];
            for _ in 0..size {
                let l = draw_subject(config, &mut rng);
                for (k, &t) in times.iter().enumerate() {
                    let hit1 = l.treated.event == event && l.treated.time <= t;
                    let hit0 = l.control.event == event && l.control.time <= t;
                    counts[k] += hit1 as u64;
                    counts[g + k] += hit0 as u64;
                    // squared difference for the effect's standard error
                    counts[2 * g + k] += (hit1 != hit0) as u64;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; 3 * g],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let m = samples as f64;
    let treated: Vec<f64> = counts[..g].iter().map(|&c| c as f64 / m).collect();
    let control: Vec<f64> = counts[g..2 * g].iter().map(|&c| c as f64 / m).collect();
    let effect: Vec<f64> = treated.iter().zip(&control).map(|(a, b)| a - b).collect();
    let mut max_se = 0.0f64;
    for k in 0..g {
        for p in [treated[k], control[k]] {
            max_se = max_se.max((p * (1.0 - p) / m).sqrt());
        }
        let second = counts[2 * g + k] as f64 / m;
        max_se = max_se.max(((second - effect[k].powi(2)).max(0.0) / m).sqrt());
    }
    Ok(TruthTable {
        times: times.clone(),
        event,
        treated,
        control,
        effect,
        max_se,
        method: "direct Monte Carlo over potential outcomes without censoring".into(),
        samples,
        seed,
    })
}
