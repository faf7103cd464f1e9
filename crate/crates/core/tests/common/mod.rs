//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the estimation code it is used to check.

#![allow(dead_code)]

pub mod checks;

use adjna::simulation::{sample_cohort, DgpConfig, SimSample};
use adjna::{Arm, Cohort};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub fn simulate(n: usize, seed: u64) -> SimSample {
    let config = DgpConfig::default().with_n(n);
    sample_cohort(&config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Unweighted Nelson–Aalen on one arm: `(time, Λ(time))` at each event time.
pub fn textbook_nelson_aalen(cohort: &Cohort, arm: Arm, event: usize) -> Vec<(f64, f64)> {
    let members: Vec<_> = cohort.subjects().iter().filter(|s| s.treatment == arm).collect();
    let mut times: Vec<f64> = members.iter().filter(|s| s.event == event).map(|s| s.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut total = 0.0;
    times
        .into_iter()
        .map(|t| {
            let deaths = members.iter().filter(|s| s.time == t && s.event == event).count() as f64;
            let at_risk = members.iter().filter(|s| s.time >= t).count() as f64;
            total += deaths / at_risk;
            (t, total)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    Logit,
    Probit,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

impl Link {
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Probit => std_normal().cdf(eta),
        }
    }

    pub fn derivative(self, eta: f64) -> f64 {
        match self {
            Link::Logit => {
                let p = self.mean(eta);
                p * (1.0 - p)
            }
            Link::Probit => std_normal().pdf(eta),
        }
    }
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let d = b.len();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = m.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            row.iter_mut().zip(pivot_row).skip(col).for_each(|(r, p)| *r -= f * p);
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let s: f64 = (row + 1..d).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    x
}

fn design(x: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(x.iter().copied()).collect()
}

/// Case-weighted binary regression by Fisher scoring (iteratively
/// reweighted least squares with the expected information).
pub fn glm_oracle(cohort: &Cohort, link: Link, case_weights: &[f64]) -> Vec<f64> {
    let d = cohort.p() + 1;
    let mut theta = vec![0.0; d];
    for _ in 0..200 {
        let mut info = vec![vec![0.0; d]; d];
        let mut score = vec![0.0; d];
        for (s, &c) in cohort.subjects().iter().zip(case_weights) {
            let z = design(&s.covariates);
            let eta: f64 = z.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let p = link.mean(eta);
            let g = link.derivative(eta);
            let a = s.treatment.indicator() as f64;
            let v = p * (1.0 - p);
            for r in 0..d {
                score[r] += c * z[r] * g * (a - p) / v;
                for k in 0..d {
                    info[r][k] += c * z[r] * z[k] * g * g / v;
                }
            }
        }
        let step = solve(info, score);
        theta.iter_mut().zip(&step).for_each(|(t, s)| *t += s);
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-13 {
            break;
        }
    }
    theta
}

/// `e(1; x; θ)` for the oracle parametrisation.
pub fn glm_score(link: Link, theta: &[f64], x: &[f64]) -> f64 {
    let eta: f64 = design(x).iter().zip(theta).map(|(a, b)| a * b).sum();
    link.mean(eta)
}

/// Gauss–Hermite rule for `E f(Z)`, `Z ~ N(0, 1)`: nodes and weights by
/// Newton's method on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut roots: Vec<(f64, f64)> = Vec::with_capacity(n.div_ceil(2));
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        let nf = n as f64;
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0].0,
            3 => 1.91 * z - 0.91 * roots[1].0,
            _ => 2.0 * z - roots[i - 2].0,
        };
        let mut slope = 1.0;
        for _ in 0..100 {
            let (p, dp) = hermite(n, z);
            slope = dp;
            let step = p / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        roots.push((z, 2.0 / (slope * slope)));
    }
    let mut rule = Vec::with_capacity(n);
    for &(z, w) in &roots {
        let x = z * std::f64::consts::SQRT_2;
        let w = w / std::f64::consts::PI.sqrt();
        rule.push((x, w));
        if x.abs() > 1e-12 {
            rule.push((-x, w));
        }
    }
    rule
}

/// Orthonormal Hermite recurrence: `p_n(z)` and its derivative.
fn hermite(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
