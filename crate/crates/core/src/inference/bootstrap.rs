//! Nonparametric bootstrap of the whole pipeline, refitting the propensity
//! model on every resample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Cohort;
use crate::pipeline::{point_estimates, PsSpec};

use super::influence::Estimand;
use super::variance::{SeMethod, VarianceReport};

/// Largest tolerated fraction of failed resamples.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome {
    /// One report per requested estimand, in order.
    pub reports: Vec<VarianceReport>,
    pub reps: usize,
    pub failures: usize,
}

/// Random number stream of replicate `rep` under `seed`, independent of
/// how replicates are scheduled.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Per-time sample standard deviation of the point estimates across `reps`
/// resamples. Failed resamples (one arm absent, separation, an exhausted
/// risk set) are skipped and counted.
pub fn bootstrap_se(
    cohort: &Cohort,
    ps: &PsSpec,
    estimands: &[Estimand],
    grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<BootstrapOutcome> {
    if reps < 2 {
        return Err(Error::InvalidInput(format!("bootstrap needs at least 2 resamples, got {reps}")));
    }
    let n = cohort.n();
    let draws: Vec<Option<Vec<Vec<f64>>>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(seed, rep);
            let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resampled = cohort.resample(&indices).ok()?;
            point_estimates(&resampled, &ps.resample(&indices), estimands, grid).ok()
        })
        .collect();
    let ok: Vec<&Vec<Vec<f64>>> = draws.iter().flatten().collect();
    let failures = reps - ok.len();
    if failures as f64 > MAX_FAILURE_FRACTION * reps as f64 || ok.len() < 2 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total: reps,
        });
    }
    let m = ok.len() as f64;
    let reports = (0..estimands.len())
        .map(|e| {
            let se = (0..grid.len())
                .map(|g| {
                    let mean = ok.iter().map(|d| d[e][g]).sum::<f64>() / m;
                    let ss = ok.iter().map(|d| (d[e][g] - mean).powi(2)).sum::<f64>();
                    (ss / (m - 1.0)).sqrt()
                })
                .collect();
            VarianceReport {
                grid: grid.to_vec(),
                se,
                method: SeMethod::Bootstrap,
                augmentation: None,
            }
        })
        .collect();
    Ok(BootstrapOutcome {
        reports,
        reps,
        failures,
    })
}
