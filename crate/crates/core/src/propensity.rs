//! Propensity-score models `e(a; x; θ)`: fitting, parameter gradients, MLE
//! influence vectors and the resulting IPW weights.
//!
//! Logistic and probit models use the design row `g(x) = (1, x₁, …, x_p)`.
//! The constant model is parametrised directly by `θ = P(A = 1)`, so its
//! gradient is `±1` and the influence of `θ̂ = mean(A)` is `A − θ̂`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{Arm, Cohort, WeightVector};

const GRADIENT_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 50;
const SEPARATION_EPS: f64 = 1e-10;
const POSITIVITY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsKind {
    Logistic,
    Probit,
    Constant,
    Known,
}

impl PsKind {
    pub fn name(self) -> &'static str {
        match self {
            PsKind::Logistic => "logistic",
            PsKind::Probit => "probit",
            PsKind::Constant => "constant",
            PsKind::Known => "known",
        }
    }
}

impl std::str::FromStr for PsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(PsKind::Logistic),
            "probit" => Ok(PsKind::Probit),
            "constant" => Ok(PsKind::Constant),
            "known" => Ok(PsKind::Known),
            other => Err(Error::InvalidInput(format!("unknown propensity model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsDiagnostics {
    pub min_score: f64,
    pub max_score: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Some fitted score fell outside `[1e-8, 1 - 1e-8]`.
    pub positivity_warning: bool,
}

/// A fitted (or supplied) propensity model.
#[derive(Debug, Clone)]
pub struct FittedPropensity {
    kind: PsKind,
    theta: Vec<f64>,
    fitted_scores: Vec<f64>,
    info_inverse: Option<DMatrix<f64>>,
    diagnostics: PsDiagnostics,
}

/// Row `i` holds `φ(A_i, X_i; θ̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceVectors {
    pub phi: DMatrix<f64>,
}

impl InfluenceVectors {
    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.phi.row_sum().iter().copied().collect()
    }
}

#[derive(Clone, Copy)]
enum Link {
    Logit,
    Probit,
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse Mills ratio `φ(x) / Φ(x)`.
fn mills(x: f64) -> f64 {
    std_normal_pdf(x) / std_normal_cdf(x)
}

impl Link {
    fn mean(self, eta: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Probit => std_normal_cdf(eta),
        }
    }

    /// d mean / d eta.
    fn slope(self, eta: f64) -> f64 {
        match self {
            Link::Logit => {
                let m = self.mean(eta);
                m * (1.0 - m)
            }
            Link::Probit => std_normal_pdf(eta),
        }
    }

    fn loglik(self, eta: f64, treated: bool) -> f64 {
        match self {
            Link::Logit => {
                // log(1 + e^eta) computed without overflow
                let softplus = if eta > 0.0 {
                    eta + (-eta).exp().ln_1p()
                } else {
                    eta.exp().ln_1p()
                };
                if treated {
                    eta - softplus
                } else {
                    -softplus
                }
            }
            Link::Probit => {
                let s = if treated { eta } else { -eta };
                std_normal_cdf(s).ln()
            }
        }
    }

    /// Per-subject derivative of the log-likelihood with respect to eta.
    fn score(self, eta: f64, treated: bool) -> f64 {
        match self {
            Link::Logit => (treated as u8 as f64) - self.mean(eta),
            Link::Probit => {
                if treated {
                    mills(eta)
                } else {
                    -mills(-eta)
                }
            }
        }
    }

    /// Negative second derivative of the log-likelihood with respect to eta.
    fn curvature(self, eta: f64, treated: bool) -> f64 {
        match self {
            Link::Logit => self.slope(eta),
            Link::Probit => {
                let s = if treated { eta } else { -eta };
                let l = mills(s);
                l * (s + l)
            }
        }
    }
}

fn design_row(x: &[f64]) -> DVector<f64> {
    let mut g = DVector::zeros(x.len() + 1);
    g[0] = 1.0;
    for (k, &v) in x.iter().enumerate() {
        g[k + 1] = v;
    }
    g
}

fn linear_predictor(theta: &DVector<f64>, x: &[f64]) -> f64 {
    theta[0]
        + x.iter()
            .zip(theta.iter().skip(1))
            .map(|(a, b)| a * b)
            .sum::<f64>()
}

struct GlmState {
    loglik: f64,
    gradient: DVector<f64>,
    information: DMatrix<f64>,
    min_score: f64,
    max_score: f64,
}

fn glm_state(link: Link, cohort: &Cohort, theta: &DVector<f64>) -> GlmState {
    let d = theta.len();
    let mut loglik = 0.0;
    let mut gradient = DVector::zeros(d);
    let mut information = DMatrix::zeros(d, d);
    let mut min_score = f64::INFINITY;
    let mut max_score = f64::NEG_INFINITY;
    for s in cohort.subjects() {
        let treated = s.treatment == Arm::Treated;
        let eta = linear_predictor(theta, &s.covariates);
        let g = design_row(&s.covariates);
        loglik += link.loglik(eta, treated);
        gradient.axpy(link.score(eta, treated), &g, 1.0);
        information.ger(link.curvature(eta, treated), &g, &g, 1.0);
        let m = link.mean(eta);
        min_score = min_score.min(m);
        max_score = max_score.max(m);
    }
    GlmState {
        loglik,
        gradient,
        information,
        min_score,
        max_score,
    }
}

fn near_boundary(state: &GlmState) -> bool {
    state.min_score < SEPARATION_EPS || state.max_score > 1.0 - SEPARATION_EPS
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn fit_binary_glm(cohort: &Cohort, link: Link, kind: PsKind) -> Result<FittedPropensity> {
    let n = cohort.n() as f64;
    let d = cohort.p() + 1;
    let treated_frac = cohort.arm_size(Arm::Treated) as f64 / n;
    let mut theta = DVector::zeros(d);
    // start at the intercept-only MLE
    theta[0] = match link {
        Link::Logit => (treated_frac / (1.0 - treated_frac)).ln(),
        Link::Probit => statrs::function::erf::erfc_inv(2.0 * treated_frac) * -std::f64::consts::SQRT_2,
    };
    let mut state = glm_state(link, cohort, &theta);
    let mut iterations = 0;
    while max_abs(&state.gradient) >= GRADIENT_TOL {
        if near_boundary(&state) {
            return Err(Error::Separation);
        }
        if iterations == MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm: state.gradient.norm(),
            });
        }
        iterations += 1;
        let step = state
            .information
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("propensity information matrix; check for collinear covariates".into()))?
            .solve(&state.gradient);
        let mut scale = 1.0;
        let mut halvings = 0;
        loop {
            let candidate = &theta + &step * scale;
            let next = glm_state(link, cohort, &candidate);
            if next.loglik.is_finite() && next.loglik >= state.loglik - 1e-12 * state.loglik.abs() {
                theta = candidate;
                state = next;
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                if near_boundary(&next) || !next.loglik.is_finite() {
                    return Err(Error::Separation);
                }
                return Err(Error::NonConvergence {
                    iterations,
                    gradient_norm: state.gradient.norm(),
                });
            }
            scale *= 0.5;
        }
    }
    let info_inverse = (state.information.clone() / n)
        .try_inverse()
        .ok_or_else(|| Error::Singular("propensity information matrix".into()))?;
    let fitted_scores: Vec<f64> = cohort
        .subjects()
        .iter()
        .map(|s| link.mean(linear_predictor(&theta, &s.covariates)))
        .collect();
    Ok(FittedPropensity {
        kind,
        diagnostics: diagnostics(&fitted_scores, iterations, state.gradient.norm()),
        theta: theta.iter().copied().collect(),
        fitted_scores,
        info_inverse: Some(info_inverse),
    })
}

fn diagnostics(scores: &[f64], iterations: usize, gradient_norm: f64) -> PsDiagnostics {
    let min_score = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    PsDiagnostics {
        min_score,
        max_score,
        iterations,
        gradient_norm,
        positivity_warning: min_score < POSITIVITY_EPS || max_score > 1.0 - POSITIVITY_EPS,
    }
}

/// Logistic regression of treatment on an intercept plus covariates, by
/// Newton–Raphson with step halving.
pub fn fit_logistic(cohort: &Cohort) -> Result<FittedPropensity> {
    fit_binary_glm(cohort, Link::Logit, PsKind::Logistic)
}

/// Probit regression `Φ(θ₀ + x'θ₁)`, by Newton–Raphson on the observed information.
pub fn fit_probit(cohort: &Cohort) -> Result<FittedPropensity> {
    fit_binary_glm(cohort, Link::Probit, PsKind::Probit)
}

/// Covariate-free model `e(1; x) = θ`, fitted by the treated fraction.
pub fn fit_constant(cohort: &Cohort) -> Result<FittedPropensity> {
    let n = cohort.n();
    if n == 0 {
        return Err(Error::DegenerateFit("empty cohort".into()));
    }
    let theta = cohort.arm_size(Arm::Treated) as f64 / n as f64;
    if theta <= 0.0 || theta >= 1.0 {
        return Err(Error::DegenerateFit(
            "constant propensity requires both arms to be observed".into(),
        ));
    }
    let fitted_scores = vec![theta; n];
    Ok(FittedPropensity {
        kind: PsKind::Constant,
        theta: vec![theta],
        diagnostics: diagnostics(&fitted_scores, 0, 0.0),
        fitted_scores,
        info_inverse: Some(DMatrix::from_element(1, 1, theta * (1.0 - theta))),
    })
}

/// Wraps externally known treatment probabilities `e(1; X_i)`.
pub fn known_propensity(cohort: &Cohort, scores: Vec<f64>) -> Result<FittedPropensity> {
    if scores.len() != cohort.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} propensity scores for {} subjects",
            scores.len(),
            cohort.n()
        )));
    }
    if let Some(k) = scores.iter().position(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::Validation {
            row: k + 1,
            message: format!("propensity score {} outside (0, 1)", scores[k]),
        });
    }
    Ok(FittedPropensity {
        kind: PsKind::Known,
        theta: Vec::new(),
        diagnostics: diagnostics(&scores, 0, 0.0),
        fitted_scores: scores,
        info_inverse: None,
    })
}

impl FittedPropensity {
    pub fn kind(&self) -> PsKind {
        self.kind
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `e(1; X_i; θ̂)` for every subject of the fitted cohort.
    pub fn fitted_scores(&self) -> &[f64] {
        &self.fitted_scores
    }

    /// `e(a; X_i; θ̂)` for subject `i` of the fitted cohort.
    pub fn fitted(&self, i: usize, arm: Arm) -> f64 {
        let e1 = self.fitted_scores[i];
        match arm {
            Arm::Treated => e1,
            Arm::Control => 1.0 - e1,
        }
    }

    pub fn info_inverse(&self) -> Option<&DMatrix<f64>> {
        self.info_inverse.as_ref()
    }

    pub fn diagnostics(&self) -> &PsDiagnostics {
        &self.diagnostics
    }

    fn link(&self) -> Option<Link> {
        match self.kind {
            PsKind::Logistic => Some(Link::Logit),
            PsKind::Probit => Some(Link::Probit),
            _ => None,
        }
    }

    /// `e(a; x; θ̂)` at new covariates.
    pub fn value(&self, x: &[f64], arm: Arm) -> Result<f64> {
        let e1 = match (self.kind, self.link()) {
            (_, Some(link)) => {
                let theta = DVector::from_column_slice(&self.theta);
                link.mean(linear_predictor(&theta, x))
            }
            (PsKind::Constant, _) => self.theta[0],
            _ => {
                return Err(Error::Unsupported(
                    "known propensity scores cannot be evaluated at new covariates".into(),
                ))
            }
        };
        Ok(match arm {
            Arm::Treated => e1,
            Arm::Control => 1.0 - e1,
        })
    }
}

/// `e(a; x; θ)` for an arbitrary parameter value (used for gradient checks).
pub fn evaluate_at(kind: PsKind, theta: &[f64], x: &[f64], arm: Arm) -> Result<f64> {
    let e1 = match kind {
        PsKind::Logistic => Link::Logit.mean(linear_predictor(&DVector::from_column_slice(theta), x)),
        PsKind::Probit => Link::Probit.mean(linear_predictor(&DVector::from_column_slice(theta), x)),
        PsKind::Constant => theta[0],
        PsKind::Known => {
            return Err(Error::Unsupported("known propensity has no parameters".into()))
        }
    };
    Ok(match arm {
        Arm::Treated => e1,
        Arm::Control => 1.0 - e1,
    })
}

/// `ė(a; x; θ)`, the derivative of `e(a; x; θ)` in `θ`.
pub fn gradient_at(kind: PsKind, theta: &[f64], x: &[f64], arm: Arm) -> Result<Vec<f64>> {
    let sign = match arm {
        Arm::Treated => 1.0,
        Arm::Control => -1.0,
    };
    match kind {
        PsKind::Logistic | PsKind::Probit => {
            let link = if kind == PsKind::Logistic { Link::Logit } else { Link::Probit };
            let eta = linear_predictor(&DVector::from_column_slice(theta), x);
            let slope = sign * link.slope(eta);
            Ok(std::iter::once(slope)
                .chain(x.iter().map(|v| slope * v))
                .collect())
        }
        PsKind::Constant => Ok(vec![sign]),
        PsKind::Known => Err(Error::Unsupported(
            "known propensity scores have no parameter gradient".into(),
        )),
    }
}

/// `ė(a; x; θ̂)` at the fitted parameter.
pub fn ps_gradient(model: &FittedPropensity, x: &[f64], arm: Arm) -> Result<Vec<f64>> {
    gradient_at(model.kind, &model.theta, x, arm)
}

/// Per-subject MLE influence vectors `φ_i = I⁻¹ U_i(θ̂)` with the empirical information.
pub fn influence_vectors(model: &FittedPropensity, cohort: &Cohort) -> Result<InfluenceVectors> {
    if cohort.n() != model.fitted_scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "model fitted on {} subjects, cohort has {}",
            model.fitted_scores.len(),
            cohort.n()
        )));
    }
    let info_inverse = model.info_inverse.as_ref().ok_or_else(|| {
        Error::Unsupported("known propensity scores have no influence function".into())
    })?;
    let n = cohort.n();
    let d = model.dim();
    let mut phi = DMatrix::zeros(n, d);
    match model.link() {
        Some(link) => {
            let theta = DVector::from_column_slice(&model.theta);
            for (i, s) in cohort.subjects().iter().enumerate() {
                let eta = linear_predictor(&theta, &s.covariates);
                let u = design_row(&s.covariates) * link.score(eta, s.treatment == Arm::Treated);
                let row = info_inverse * u;
                phi.row_mut(i).copy_from(&row.transpose());
            }
        }
        None => {
            // score (A - θ)/(θ(1-θ)) times the inverse information θ(1-θ)
            let theta = model.theta[0];
            for (i, s) in cohort.subjects().iter().enumerate() {
                let a = s.treatment.indicator() as f64;
                let score = (a - theta) / (theta * (1.0 - theta));
                phi[(i, 0)] = info_inverse[(0, 0)] * score;
            }
        }
    }
    Ok(InfluenceVectors { phi })
}

/// IPW weights `I{A_i = a} / e(a; X_i; θ̂)`.
pub fn ipw_weights(model: &FittedPropensity, cohort: &Cohort, arm: Arm) -> Result<WeightVector> {
    if cohort.n() != model.fitted_scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "model fitted on {} subjects, cohort has {}",
            model.fitted_scores.len(),
            cohort.n()
        )));
    }
    let weights = cohort
        .subjects()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.treatment == arm {
                1.0 / model.fitted(i, arm)
            } else {
                0.0
            }
        })
        .collect();
    WeightVector::new(cohort, arm, weights, model.kind)
}

/// Fits the requested parametric kind.
pub fn fit(kind: PsKind, cohort: &Cohort) -> Result<FittedPropensity> {
    match kind {
        PsKind::Logistic => fit_logistic(cohort),
        PsKind::Probit => fit_probit(cohort),
        PsKind::Constant => fit_constant(cohort),
        PsKind::Known => Err(Error::Unsupported(
            "known propensity scores must be supplied, not fitted".into(),
        )),
    }
}
