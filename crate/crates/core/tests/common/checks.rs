//! One function per acceptance criterion. Each returns a [`Criterion`]
//! listing every individual comparison, so that the acceptance target can
//! print a verdict and the focused test files can assert on the same code.

use std::path::{Path, PathBuf};

use adjna::estimator::{adjusted_nelson_aalen, cumulative_incidence};
use adjna::inference::{
    martingale_residuals, variance_naive, wald_interval, AugmentationForm, Estimand, SeMethod,
};
use adjna::io::{cmd_estimate, cmd_simulate, EstimateRequest, OutputFormat, PsChoice, SimConfigFile};
use adjna::propensity::{evaluate_at, fit, gradient_at, influence_vectors};
use adjna::simulation::{draw_subject, run_monte_carlo, DgpConfig, McReport};
use adjna::{Analysis, Arm, Cohort, PsKind, PsSpec, Subject, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

#[derive(Debug, Default)]
pub struct Criterion {
    pub id: u8,
    pub title: String,
    pub items: Vec<(bool, String)>,
    /// Informational lines that do not affect the verdict.
    pub notes: Vec<String>,
}

impl Criterion {
    pub fn new(id: u8, title: &str) -> Self {
        Self {
            id,
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn check(&mut self, ok: bool, text: impl Into<String>) {
        self.items.push((ok, text.into()));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        !self.items.is_empty() && self.items.iter().all(|(ok, _)| *ok)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.items.iter().filter(|(ok, _)| !ok).map(|(_, t)| t.as_str()).collect()
    }

    pub fn report(&self) -> String {
        let mut s = format!(
            "criterion {} ({}): {}\n",
            self.id,
            self.title,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for (ok, text) in &self.items {
            s += &format!("    [{}] {text}\n", if *ok { "ok" } else { "not ok" });
        }
        for note in &self.notes {
            s += &format!("    note: {note}\n");
        }
        s
    }

    pub fn assert_passed(&self) {
        assert!(self.passed(), "{}", self.report());
    }
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn grid() -> Vec<f64> {
    (1..=8).map(f64::from).collect()
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().map(f64::abs).fold(0.0, f64::max)
}

fn all_estimands(j_max: usize) -> Vec<Estimand> {
    let mut out = Vec::new();
    for event in 1..=j_max {
        for arm in [Arm::Treated, Arm::Control] {
            out.push(Estimand::Hazard { arm, event });
            out.push(Estimand::Cif { arm, event });
        }
        out.push(Estimand::Ate { event });
    }
    out
}

/// Exact algebraic identities.
pub fn identities() -> Criterion {
    let mut c = Criterion::new(1, "exact identities");
    let sample = simulate(500, 101);
    let cohort = &sample.cohort;

    let logistic = Analysis::run(cohort, &PsSpec::Fit(PsKind::Logistic)).unwrap();
    let mut worst = 0.0f64;
    for arm in [Arm::Treated, Arm::Control] {
        for r in &logistic.arm(arm).residuals {
            for k in 0..r.jump_times().len() {
                worst = worst.max(r.increments_at(k).iter().sum::<f64>().abs());
            }
        }
    }
    c.check(worst <= 1e-12, format!("max |sum of residual increments| at a jump = {worst:.2e} (<= 1e-12)"));

    let known = Analysis::run(cohort, &PsSpec::Known(sample.true_scores.clone())).unwrap();
    for (name, analysis, corrected) in [("oracle", &known, false), ("corrected", &logistic, true)] {
        let worst = all_estimands(2)
            .into_iter()
            .map(|e| max_abs(analysis.influence(e, &grid(), corrected).unwrap().column_means()))
            .fold(0.0, f64::max);
        c.check(
            worst <= 1e-10,
            format!("{name} influence matrices: max |column mean| = {worst:.2e} (<= 1e-10)"),
        );
    }

    let constant = Analysis::run(cohort, &PsSpec::Fit(PsKind::Constant)).unwrap();
    let mut worst = 0.0f64;
    for e in all_estimands(2) {
        let naive = constant.influence(e, &grid(), false).unwrap().se();
        let corrected = constant.influence(e, &grid(), true).unwrap().se();
        for (a, b) in naive.iter().zip(&corrected) {
            if *a > 0.0 {
                worst = worst.max((a - b).abs() / a);
            }
        }
    }
    c.check(
        worst <= 1e-12,
        format!("constant model: max relative |corrected SE - naive SE| = {worst:.2e} (<= 1e-12)"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let subjects: Vec<Subject> = (0..50)
        .map(|i| Subject {
            id: i.to_string(),
            treatment: if i % 3 == 0 { Arm::Control } else { Arm::Treated },
            covariates: vec![],
            // coarse times so that ties occur
            time: (rng.random_range(1..=20) as f64) / 4.0,
            event: rng.random_range(0..=2),
        })
        .collect();
    let small = Cohort::new(subjects, 2).unwrap();
    let mut exact = true;
    for arm in [Arm::Treated, Arm::Control] {
        // a constant weight of 2 is an exact power-of-two rescaling
        let w: Vec<f64> = small
            .subjects()
            .iter()
            .map(|s| if s.treatment == arm { 2.0 } else { 0.0 })
            .collect();
        let weights = WeightVector::new(&small, arm, w, PsKind::Known).unwrap();
        for event in 1..=2 {
            let lambda = adjusted_nelson_aalen(&small, &weights, event).unwrap().lambda;
            let ours: Vec<(f64, f64)> = lambda.times().iter().copied().zip(lambda.values().iter().copied()).collect();
            let textbook = textbook_nelson_aalen(&small, arm, event);
            exact &= !textbook.is_empty() && ours == textbook;
        }
    }
    c.check(exact, "constant-weight estimator equals textbook Nelson-Aalen exactly (50 subjects, ties)");
    c
}

/// Three treated subjects at times 1, 2, 3 with events (1, censored, 1),
/// plus one control subject, which carries no weight in the treated arm.
pub fn hand_cohort() -> Cohort {
    let mut subjects: Vec<Subject> = [(1.0, 1), (2.0, 0), (3.0, 1)]
        .iter()
        .enumerate()
        .map(|(i, &(time, event))| Subject {
            id: format!("t{i}"),
            treatment: Arm::Treated,
            covariates: vec![],
            time,
            event,
        })
        .collect();
    subjects.push(Subject {
        id: "c".into(),
        treatment: Arm::Control,
        covariates: vec![],
        time: 1.5,
        event: 0,
    });
    Cohort::new(subjects, 1).unwrap()
}

pub fn hand_weights(cohort: &Cohort, w: [f64; 3]) -> WeightVector {
    WeightVector::new(cohort, Arm::Treated, vec![w[0], w[1], w[2], 0.0], PsKind::Known).unwrap()
}

/// Worked three-subject examples.
pub fn hand_oracles() -> Criterion {
    let mut c = Criterion::new(2, "hand-computed examples");
    let cohort = hand_cohort();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;

    let unit = hand_weights(&cohort, [1.0, 1.0, 1.0]);
    let h = adjusted_nelson_aalen(&cohort, &unit, 1).unwrap();
    c.check(
        h.lambda.times() == [1.0, 3.0] && close(h.increments[0], 1.0 / 3.0) && close(h.increments[1], 1.0),
        format!("unit weights: jumps {:?} at {:?}, expected 1/3 at 1 and 1 at 3", h.increments, h.lambda.times()),
    );
    let l3 = h.lambda.eval(3.0);
    c.check(close(l3, 4.0 / 3.0), format!("unit weights: cumulative hazard at 3 = {l3} (4/3)"));

    let weighted = hand_weights(&cohort, [2.0, 4.0, 2.0]);
    let hw = adjusted_nelson_aalen(&cohort, &weighted, 1).unwrap();
    c.check(
        close(hw.increments[0], 0.25) && close(hw.increments[1], 1.0),
        format!("weights (2, 4, 2): jumps {:?}, expected 0.25 and 1", hw.increments),
    );
    let l3 = hw.lambda.eval(3.0);
    c.check(close(l3, 1.25), format!("weights (2, 4, 2): cumulative hazard at 3 = {l3} (1.25)"));

    let r = martingale_residuals(&cohort, &unit, &h).unwrap();
    let inc = r.increments_at(0);
    let expected = [2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 0.0];
    c.check(
        inc.iter().zip(expected).all(|(a, b)| close(*a, b)),
        format!("residual increments at t = 1: {inc:?}, expected (2/3, -1/3, -1/3) and 0 off-arm"),
    );
    c.check(close(inc.iter().sum(), 0.0), "residual increments sum to zero");

    // dM = (2/3, -1/3, -1/3) over a mean risk weight of 3/n gives
    // IF = n dM / 3 and (1/n²) Σ IF² = Σ dM² / 9 = 2/27 whatever n is
    let var = variance_naive(&r, &[1.0]).se[0].powi(2);
    c.check(close(var, 2.0 / 27.0), format!("naive variance at t = 1: {var} (2/27)"));
    c.note("the naive variance at t = 1 is 2/27: the influence values are n dM / 3 = (8/9, -4/9, -4/9) for n = 4, not (2, -1, -1)");
    c
}

fn link_of(kind: PsKind) -> Link {
    match kind {
        PsKind::Logistic => Link::Logit,
        PsKind::Probit => Link::Probit,
        _ => unreachable!(),
    }
}

/// Propensity fits against an independent Fisher-scoring fitter, analytic
/// gradients against finite differences, and centred influence vectors.
pub fn propensity() -> Criterion {
    let mut c = Criterion::new(3, "propensity fitting");
    let sample = simulate(800, 303);
    let cohort = &sample.cohort;
    let ones = vec![1.0; cohort.n()];
    for kind in [PsKind::Logistic, PsKind::Probit] {
        let model = fit(kind, cohort).unwrap();
        let oracle = glm_oracle(cohort, link_of(kind), &ones);
        let diff = max_abs(model.theta().iter().zip(&oracle).map(|(a, b)| a - b));
        c.check(diff <= 1e-8, format!("{} coefficients vs oracle: max diff {diff:.2e} (<= 1e-8)", kind.name()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for kind in [PsKind::Logistic, PsKind::Probit, PsKind::Constant] {
        for _ in 0..20 {
            let theta: Vec<f64> = if kind == PsKind::Constant {
                vec![rng.random_range(0.1..0.9)]
            } else {
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            for arm in [Arm::Treated, Arm::Control] {
                let g = gradient_at(kind, &theta, &x, arm).unwrap();
                for k in 0..theta.len() {
                    let h = 1e-5;
                    let mut up = theta.clone();
                    let mut down = theta.clone();
                    up[k] += h;
                    down[k] -= h;
                    let fd = (evaluate_at(kind, &up, &x, arm).unwrap()
                        - evaluate_at(kind, &down, &x, arm).unwrap())
                        / (2.0 * h);
                    worst = worst.max((g[k] - fd).abs() / fd.abs().max(1e-3));
                }
            }
        }
    }
    c.check(worst <= 1e-6, format!("score gradient vs central differences: max relative error {worst:.2e} (<= 1e-6)"));

    for kind in [PsKind::Logistic, PsKind::Probit, PsKind::Constant] {
        let model = fit(kind, cohort).unwrap();
        let sums = influence_vectors(&model, cohort).unwrap().column_sums();
        let worst = max_abs(sums);
        c.check(worst <= 1e-8, format!("{}: max |sum of influence vectors| = {worst:.2e} (<= 1e-8)", kind.name()));
    }
    c
}

const TREATED_FIXED_X: [f64; 3] = [0.5, -0.3, 0.8];

/// Closed-form cumulative hazards of the simulation design.
fn treated_cumulative(t: f64, x: &[f64; 3]) -> f64 {
    t.powi(3) / 15.0 * (0.2 * x[1] + 0.2 * x[2]).exp()
}

fn control_cumulative(t: f64, x: &[f64; 3]) -> f64 {
    t * t / 6.0 * (x[1] / 3.0 - x[2] / 3.0).exp()
}

fn expit(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Sampling distribution of the simulation design.
pub fn dgp_validity() -> Criterion {
    let mut c = Criterion::new(4, "data-generating process");
    let config = DgpConfig::default();
    let n = 100_000;

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let fixed: Vec<f64> = (0..n)
        .map(|_| config.hazard(Arm::Treated).inverse(1.0 - rng.random::<f64>(), &TREATED_FIXED_X))
        .collect();
    let ks = ks_distance(fixed, |t| 1.0 - (-treated_cumulative(t, &TREATED_FIXED_X)).exp());
    c.check(ks <= 0.01, format!("treated potential time at fixed x: KS {ks:.4} (<= 0.01)"));

    let mut rng = ChaCha8Rng::seed_from_u64(405);
    let draws: Vec<_> = (0..n).map(|_| draw_subject(&config, &mut rng)).collect();
    let gh = gauss_hermite(24);
    let marginal = |cumulative: fn(f64, &[f64; 3]) -> f64, t: f64| {
        let mut total = 0.0;
        for &(x2, w2) in &gh {
            for &(x3, w3) in &gh {
                total += w2 * w3 * (1.0 - (-cumulative(t, &[0.0, x2, x3])).exp());
            }
        }
        total
    };
    for (arm, cumulative) in [
        (Arm::Treated, treated_cumulative as fn(f64, &[f64; 3]) -> f64),
        (Arm::Control, control_cumulative as fn(f64, &[f64; 3]) -> f64),
    ] {
        let times = draws.iter().map(|d| d.potential(arm).time).collect();
        let ks = ks_distance(times, |t| marginal(cumulative, t));
        c.check(ks <= 0.01, format!("{arm} potential time, marginal over x: KS {ks:.4} (<= 0.01)"));
    }

    let ks = ks_distance(draws.iter().map(|d| d.censoring).collect(), |t| ((t - 6.0) / 6.0).clamp(0.0, 1.0));
    c.check(ks <= 0.01, format!("censoring time vs U[6, 12]: KS {ks:.4} (<= 0.01)"));

    let mut expected = 0.0;
    for &(x1, w1) in &gh {
        for &(x2, w2) in &gh {
            expected += w1 * w2 * expit(0.2 + 0.5 * x1 - 0.5 * x2);
        }
    }
    let observed = draws.iter().filter(|d| d.treatment == Arm::Treated).count() as f64 / n as f64;
    c.check(
        (observed - expected).abs() <= 0.005,
        format!("treated fraction {observed:.4} vs {expected:.4} (within 0.005)"),
    );

    // P(type 1) = E ∫ p(t, x) dF(t | x), integrating over u = F(t | x)
    let gh_small = gauss_hermite(12);
    let cells = 400;
    for (arm, cumulative, type_coef) in [
        (Arm::Treated, treated_cumulative as fn(f64, &[f64; 3]) -> f64, [-0.1, 0.2, 0.2, 0.2, 0.03]),
        (Arm::Control, control_cumulative as fn(f64, &[f64; 3]) -> f64, [0.0, 0.2, -0.1, 0.1, 0.05]),
    ] {
        let mut expected = 0.0;
        for &(x1, w1) in &gh_small {
            for &(x2, w2) in &gh_small {
                for &(x3, w3) in &gh_small {
                    let x = [x1, x2, x3];
                    let scale = cumulative(1.0, &x);
                    let power = if arm == Arm::Treated { 3.0 } else { 2.0 };
                    let mut inner = 0.0;
                    for k in 0..cells {
                        let u = (k as f64 + 0.5) / cells as f64;
                        let t = (-(1.0 - u).ln() / scale).powf(1.0 / power);
                        let eta = type_coef[0] + type_coef[1] * x1 + type_coef[2] * x2 + type_coef[3] * x3 + type_coef[4] * t;
                        inner += expit(eta);
                    }
                    expected += w1 * w2 * w3 * inner / cells as f64;
                }
            }
        }
        let observed = draws.iter().filter(|d| d.potential(arm).event == 1).count() as f64 / n as f64;
        c.check(
            (observed - expected).abs() <= 0.005,
            format!("{arm} share of event type 1: {observed:.4} vs {expected:.4} (within 0.005)"),
        );
    }
    c
}

/// A study run through the command path, with its configuration.
pub struct Study {
    pub config: SimConfigFile,
    pub report: McReport,
    pub dir: PathBuf,
}

pub fn run_study(name: &str, out: &Path) -> Study {
    let path = workspace_root().join("configs").join(format!("{name}.toml"));
    let dir = out.join(name);
    let outcome = cmd_simulate(&path, Some(&dir)).unwrap();
    Study {
        config: SimConfigFile::load(&path).unwrap(),
        report: outcome.report,
        dir,
    }
}

/// Reruns a study's replications with the other augmentation form and no
/// bootstrap, for comparison only.
pub fn rerun_inverse_square(study: &Study) -> McReport {
    let mut config = study.config.mc_config();
    config.augmentation = AugmentationForm::InverseSquare;
    config.bootstrap_reps = 0;
    run_monte_carlo(&config, &study.report.truth).unwrap()
}

/// The `method` row of a written statistic table, cells as text.
pub fn table_row(dir: &Path, estimand: Estimand, statistic: &str, method: &str) -> Vec<String> {
    let path = dir.join(format!("{}_{statistic}.csv", estimand.label()));
    let mut reader = csv::Reader::from_path(&path).unwrap();
    for record in reader.records() {
        let record = record.unwrap();
        if &record[0] == method {
            return record.iter().skip(1).map(str::to_string).collect();
        }
    }
    panic!("no {method} row in {}", path.display());
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol + 1e-12
}

fn treated() -> Estimand {
    Estimand::Cif { arm: Arm::Treated, event: 1 }
}

fn control() -> Estimand {
    Estimand::Cif { arm: Arm::Control, event: 1 }
}

/// Logistic model, n = 500.
pub fn table1(study: &Study, alternative: Option<&McReport>) -> Criterion {
    let mut c = Criterion::new(5, "n = 500 logistic study");
    let r = &study.report;
    let row = |e, m| r.row(e, m, 4.0).unwrap();
    let naive = row(treated(), SeMethod::Naive);
    let corrected = row(treated(), SeMethod::Corrected);
    c.check(naive.bias.abs() <= 0.006, format!("treated t=4 |bias| {:.4} (<= 0.006)", naive.bias.abs()));
    c.check(within(naive.sd, 0.028, 0.004), format!("treated t=4 SD {:.4} (0.028 +- 0.004)", naive.sd));
    c.check(within(naive.mean_se, 0.028, 0.004), format!("treated t=4 naive SE {:.4} (0.028 +- 0.004)", naive.mean_se));
    let cell: f64 = table_row(&study.dir, treated(), "se", "corrected")[3].parse().unwrap();
    c.check(within(cell, 0.031, 0.004), format!("treated t=4 corrected SE table cell {cell:.4} (0.031 +- 0.004)"));
    match r.row(treated(), SeMethod::Bootstrap, 4.0) {
        Some(b) => c.check(within(b.mean_se, 0.027, 0.004), format!("treated t=4 bootstrap SE {:.4} over {} reps (0.027 +- 0.004)", b.mean_se, b.count)),
        None => c.check(false, "bootstrap rows missing"),
    }
    c.check((0.93..=0.98).contains(&corrected.coverage), format!("treated t=4 corrected coverage {:.3} in [0.93, 0.98]", corrected.coverage));
    c.check((0.92..=0.97).contains(&naive.coverage), format!("treated t=4 naive coverage {:.3} in [0.92, 0.97]", naive.coverage));
    let cn = row(control(), SeMethod::Naive);
    let cc = row(control(), SeMethod::Corrected);
    c.check(within(cn.sd, 0.034, 0.004), format!("control t=4 SD {:.4} (0.034 +- 0.004)", cn.sd));
    c.check((0.925..=0.975).contains(&cc.coverage), format!("control t=4 corrected coverage {:.3} in [0.925, 0.975]", cc.coverage));

    c.note(format!(
        "treated t=4: corrected SE / SD = {:.3}; control t=4: corrected SE {:.4}, SD {:.4}",
        corrected.mean_se / corrected.sd,
        cc.mean_se,
        cc.sd
    ));
    if let Some(p) = alternative {
        let pt = p.row(treated(), SeMethod::Corrected, 4.0).unwrap();
        let pc = p.row(control(), SeMethod::Corrected, 4.0).unwrap();
        c.note(format!(
            "inverse-square augmentation form: corrected SE {:.4} (coverage {:.3}) treated, {:.4} (coverage {:.3}) control",
            pt.mean_se, pt.coverage, pc.mean_se, pc.coverage
        ));
    }
    c
}

/// Logistic model, n = 2000.
pub fn table_s1(study: &Study) -> Criterion {
    let mut c = Criterion::new(6, "n = 2000 logistic study");
    for t in grid() {
        let row = study.report.row(treated(), SeMethod::Corrected, t).unwrap();
        let ratio = row.mean_se / row.sd;
        c.check(
            (ratio - 1.0).abs() <= 0.10,
            format!("treated t={t}: corrected SE {:.4} vs SD {:.4} (ratio {ratio:.3}, within 10%)", row.mean_se, row.sd),
        );
    }
    let cov = study.report.row(treated(), SeMethod::Corrected, 4.0).unwrap().coverage;
    c.check((0.93..=0.97).contains(&cov), format!("treated t=4 corrected coverage {cov:.3} in [0.93, 0.97]"));
    c
}

/// Misspecified and covariate-free propensity models.
pub fn sensitivity(constant: &Study, probit: &Study, alternative: Option<&McReport>) -> Criterion {
    let mut c = Criterion::new(7, "sensitivity to the propensity model");
    for e in [treated(), control(), Estimand::Ate { event: 1 }] {
        for stat in ["se", "coverage"] {
            let naive = table_row(&constant.dir, e, stat, "naive");
            let corrected = table_row(&constant.dir, e, stat, "corrected");
            c.check(naive == corrected, format!("constant model: {} {stat} corrected row identical to naive row", e.label()));
        }
    }
    let r = &probit.report;
    let n4 = r.row(treated(), SeMethod::Naive, 4.0).unwrap();
    let c4 = r.row(treated(), SeMethod::Corrected, 4.0).unwrap();
    c.check(within(c4.mean_se, 0.066, 0.010), format!("probit treated t=4 corrected SE {:.4} (0.066 +- 0.010)", c4.mean_se));
    c.check(within(n4.mean_se, 0.034, 0.005), format!("probit treated t=4 naive SE {:.4} (0.034 +- 0.005)", n4.mean_se));
    for t in 3..=8 {
        let t = t as f64;
        let nv = r.row(treated(), SeMethod::Naive, t).unwrap().coverage;
        let cv = r.row(treated(), SeMethod::Corrected, t).unwrap().coverage;
        c.check(cv >= nv, format!("probit treated t={t}: corrected coverage {cv:.3} >= naive {nv:.3}"));
    }
    let cn = r.row(control(), SeMethod::Naive, 4.0).unwrap();
    let cc = r.row(control(), SeMethod::Corrected, 4.0).unwrap();
    c.note(format!(
        "probit control t=4: naive SE {:.4}, corrected SE {:.4}, SD {:.4}",
        cn.mean_se, cc.mean_se, cc.sd
    ));
    if let Some(p) = alternative {
        let pt = p.row(treated(), SeMethod::Corrected, 4.0).unwrap();
        let pc = p.row(control(), SeMethod::Corrected, 4.0).unwrap();
        c.note(format!(
            "probit, inverse-square augmentation form: corrected SE {:.4} treated, {:.4} control",
            pt.mean_se, pc.mean_se
        ));
    }
    c
}

pub fn demo_request(out: &Path) -> EstimateRequest {
    let data = workspace_root().join("data");
    EstimateRequest {
        data: data.join("demo.csv"),
        events: vec![1, 2],
        n_events: None,
        times: vec![1.0, 2.0, 3.0, 4.0, 6.0],
        ps: PsChoice::Fit(PsKind::Logistic),
        methods: vec![SeMethod::Naive, SeMethod::Corrected, SeMethod::Bootstrap],
        bootstrap_reps: 100,
        seed: 2024,
        level: 0.95,
        augmentation: AugmentationForm::Derived,
        out: out.to_path_buf(),
        format: OutputFormat::Csv,
    }
}

pub fn snapshot_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/snapshots/demo_summary.csv")
}

/// Compares two summary tables cell by cell: text cells exactly, numbers to
/// a relative tolerance that absorbs platform libm differences.
pub fn compare_tables(actual: &str, expected: &str) -> Result<(), String> {
    let a: Vec<&str> = actual.lines().collect();
    let e: Vec<&str> = expected.lines().collect();
    if a.len() != e.len() {
        return Err(format!("{} lines, snapshot has {}", a.len(), e.len()));
    }
    for (k, (la, le)) in a.iter().zip(&e).enumerate() {
        let ca: Vec<&str> = la.split(',').collect();
        let ce: Vec<&str> = le.split(',').collect();
        if ca.len() != ce.len() {
            return Err(format!("line {}: column count differs", k + 1));
        }
        for (x, y) in ca.iter().zip(&ce) {
            let same = match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(u), Ok(v)) => (u - v).abs() <= 1e-9 * v.abs().max(1e-3),
                _ => x == y,
            };
            if !same {
                return Err(format!("line {}: `{x}` vs snapshot `{y}`", k + 1));
            }
        }
    }
    Ok(())
}

/// Real-data analysis substitute: the bundled demo against its snapshot,
/// and interval arithmetic on a reported effect estimate.
pub fn demo_and_wald(out: &Path) -> Criterion {
    let mut c = Criterion::new(8, "demo analysis and interval arithmetic");
    let outcome = cmd_estimate(&demo_request(out)).unwrap();
    let report = &outcome.report;
    let monotone = report
        .curves
        .iter()
        .filter(|curve| matches!(curve.estimand, Estimand::Cif { .. }))
        .all(|curve| curve.points.windows(2).all(|w| w[1].1 >= w[0].1));
    c.check(monotone, "demo incidence curves are nondecreasing");
    let finite = report.rows.iter().all(|r| {
        [r.se_naive, r.se_corrected, r.se_bootstrap]
            .iter()
            .all(|se| se.is_some_and(|v| v.is_finite() && v >= 0.0))
    });
    c.check(finite, "demo standard errors are finite for every method");
    let ordered = report
        .rows
        .iter()
        .all(|r| r.ci_lo.unwrap() <= r.estimate && r.estimate <= r.ci_hi.unwrap());
    c.check(ordered, "demo intervals contain their estimates");
    let actual = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
        std::fs::write(snapshot_path(), &actual).unwrap();
    }
    match std::fs::read_to_string(snapshot_path()) {
        Ok(expected) => {
            let verdict = compare_tables(&actual, &expected);
            c.check(verdict.is_ok(), format!("demo summary matches snapshot {}", verdict.err().unwrap_or_default()));
        }
        Err(e) => c.check(false, format!("snapshot unreadable: {e}")),
    }

    // an effect of -0.209 with interval (-0.349, -0.069) implies se = 0.140 / 1.96
    let se = 0.140 / adjna::inference::normal_quantile(0.95).unwrap();
    let w = wald_interval(-0.209, se, 0.95).unwrap();
    c.check(
        within(w.lo, -0.349, 5e-4) && within(w.hi, -0.069, 5e-4),
        format!("interval ({:.3}, {:.3}) vs (-0.349, -0.069)", w.lo, w.hi),
    );
    c.check(
        (w.p_value * 1000.0).round() == 3.0,
        format!("p-value {:.4} rounds to 0.003", w.p_value),
    );
    c
}

pub fn cif_of(cohort: &Cohort, weights: &WeightVector, event: usize) -> Vec<f64> {
    let hazards: Vec<_> = (1..=cohort.n_events())
        .map(|j| adjusted_nelson_aalen(cohort, weights, j).unwrap())
        .collect();
    cumulative_incidence(&hazards, event).unwrap().cif.eval_many(&grid())
}
