//! The full analysis of one cohort: propensity model, weights, hazards,
//! incidences and their influence functions. Shared by the command line,
//! the bootstrap and the simulation harness.

use crate::error::{Error, Result};
use crate::estimator::{all_hazards, cumulative_incidence, CifEstimate, HazardEstimate};
use crate::inference::influence::{
    augmentation, if_ate, if_cif, AugmentationForm, AugmentationTerm, Estimand, HazardInfluence, IfMatrix,
};
use crate::inference::residuals::{martingale_residuals, MartingaleResiduals};
use crate::model::{Arm, Cohort, WeightVector};
use crate::propensity::{
    fit, influence_vectors, ipw_weights, known_propensity, FittedPropensity, InfluenceVectors,
    PsKind,
};

/// How to obtain propensity scores.
#[derive(Debug, Clone, PartialEq)]
pub enum PsSpec {
    Fit(PsKind),
    /// Known `e(1; X_i)`, one per subject.
    Known(Vec<f64>),
}

impl PsSpec {
    pub fn kind(&self) -> PsKind {
        match self {
            PsSpec::Fit(kind) => *kind,
            PsSpec::Known(_) => PsKind::Known,
        }
    }

    /// The same specification restricted to resampled subjects.
    pub fn resample(&self, indices: &[usize]) -> PsSpec {
        match self {
            PsSpec::Fit(kind) => PsSpec::Fit(*kind),
            PsSpec::Known(scores) => PsSpec::Known(indices.iter().map(|&i| scores[i]).collect()),
        }
    }

    pub fn model(&self, cohort: &Cohort) -> Result<FittedPropensity> {
        match self {
            PsSpec::Fit(kind) => fit(*kind, cohort),
            PsSpec::Known(scores) => known_propensity(cohort, scores.clone()),
        }
    }
}

/// Weights and hazards of one arm, with residuals for every event type.
#[derive(Debug, Clone)]
pub struct ArmAnalysis {
    pub arm: Arm,
    pub weights: WeightVector,
    pub hazards: Vec<HazardEstimate>,
    pub residuals: Vec<MartingaleResiduals>,
    /// One term per event type when the propensity model was estimated.
    pub augmentation: Option<Vec<AugmentationTerm>>,
}

impl ArmAnalysis {
    fn influence<'a>(&'a self, phi: Option<&'a InfluenceVectors>, corrected: bool) -> Result<Vec<HazardInfluence<'a>>> {
        if !corrected {
            return Ok(self.residuals.iter().map(HazardInfluence::oracle).collect());
        }
        let (Some(phi), Some(terms)) = (phi, self.augmentation.as_ref()) else {
            return Err(Error::InvalidInput(
                "corrected influence functions need an estimated propensity model".into(),
            ));
        };
        Ok(self
            .residuals
            .iter()
            .zip(terms)
            .map(|(r, b)| HazardInfluence::corrected(r, b, phi))
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub model: FittedPropensity,
    pub phi: Option<InfluenceVectors>,
    pub treated: ArmAnalysis,
    pub control: ArmAnalysis,
}

/// Propensity model and per-arm hazards only, enough for point estimates.
pub fn point_fit(cohort: &Cohort, ps: &PsSpec) -> Result<(FittedPropensity, [Vec<HazardEstimate>; 2])> {
    let model = ps.model(cohort)?;
    let treated = all_hazards(cohort, &ipw_weights(&model, cohort, Arm::Treated)?)?;
    let control = all_hazards(cohort, &ipw_weights(&model, cohort, Arm::Control)?)?;
    Ok((model, [treated, control]))
}

/// Point estimates of `estimands` on `grid`, skipping all variance work.
pub fn point_estimates(
    cohort: &Cohort,
    ps: &PsSpec,
    estimands: &[Estimand],
    grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let (_, [treated, control]) = point_fit(cohort, ps)?;
    let hazards = |arm: Arm| match arm {
        Arm::Treated => &treated,
        Arm::Control => &control,
    };
    estimands
        .iter()
        .map(|e| {
            Ok(match *e {
                Estimand::Hazard { arm, event } => {
                    hazard_of(hazards(arm), event)?.lambda.eval_many(grid)
                }
                Estimand::Cif { arm, event } => {
                    cumulative_incidence(hazards(arm), event)?.cif.eval_many(grid)
                }
                Estimand::Ate { event } => {
                    let f1 = cumulative_incidence(&treated, event)?;
                    let f0 = cumulative_incidence(&control, event)?;
                    grid.iter().map(|&t| f1.cif.eval(t) - f0.cif.eval(t)).collect()
                }
            })
        })
        .collect()
}

fn hazard_of(hazards: &[HazardEstimate], event: usize) -> Result<&HazardEstimate> {
    event
        .checked_sub(1)
        .and_then(|k| hazards.get(k))
        .ok_or_else(|| Error::InvalidInput(format!("event type {event} outside 1..={}", hazards.len())))
}

fn arm_analysis(
    cohort: &Cohort,
    model: &FittedPropensity,
    arm: Arm,
    form: Option<AugmentationForm>,
) -> Result<ArmAnalysis> {
    let weights = ipw_weights(model, cohort, arm)?;
    let hazards = all_hazards(cohort, &weights)?;
    let residuals = hazards
        .iter()
        .map(|h| martingale_residuals(cohort, &weights, h))
        .collect::<Result<Vec<_>>>()?;
    let augmentation = match form {
        Some(form) => Some(
            residuals
                .iter()
                .map(|r| augmentation(cohort, model, r, form))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(ArmAnalysis {
        arm,
        weights,
        hazards,
        residuals,
        augmentation,
    })
}

impl Analysis {
    pub fn run(cohort: &Cohort, ps: &PsSpec) -> Result<Self> {
        Self::with_form(cohort, ps.model(cohort)?, AugmentationForm::default())
    }

    pub fn with_model(cohort: &Cohort, model: FittedPropensity) -> Result<Self> {
        Self::with_form(cohort, model, AugmentationForm::default())
    }

    pub fn with_form(cohort: &Cohort, model: FittedPropensity, form: AugmentationForm) -> Result<Self> {
        let estimated = model.kind() != PsKind::Known;
        let phi = if estimated {
            Some(influence_vectors(&model, cohort)?)
        } else {
            None
        };
        let form = estimated.then_some(form);
        Ok(Self {
            treated: arm_analysis(cohort, &model, Arm::Treated, form)?,
            control: arm_analysis(cohort, &model, Arm::Control, form)?,
            model,
            phi,
        })
    }

    pub fn arm(&self, arm: Arm) -> &ArmAnalysis {
        match arm {
            Arm::Treated => &self.treated,
            Arm::Control => &self.control,
        }
    }

    /// True when the propensity scores were estimated rather than known.
    pub fn estimated(&self) -> bool {
        self.phi.is_some()
    }

    pub fn hazard(&self, arm: Arm, event: usize) -> Result<&HazardEstimate> {
        hazard_of(&self.arm(arm).hazards, event)
    }

    pub fn cif(&self, arm: Arm, event: usize) -> Result<CifEstimate> {
        cumulative_incidence(&self.arm(arm).hazards, event)
    }

    pub fn estimate(&self, estimand: Estimand, grid: &[f64]) -> Result<Vec<f64>> {
        Ok(match estimand {
            Estimand::Hazard { arm, event } => self.hazard(arm, event)?.lambda.eval_many(grid),
            Estimand::Cif { arm, event } => self.cif(arm, event)?.cif.eval_many(grid),
            Estimand::Ate { event } => {
                let f1 = self.cif(Arm::Treated, event)?;
                let f0 = self.cif(Arm::Control, event)?;
                grid.iter().map(|&t| f1.cif.eval(t) - f0.cif.eval(t)).collect()
            }
        })
    }

    /// Influence matrix of `estimand`. Without `corrected` this is the oracle
    /// form under known scores and the naive form otherwise.
    pub fn influence(&self, estimand: Estimand, grid: &[f64], corrected: bool) -> Result<IfMatrix> {
        match estimand {
            Estimand::Hazard { arm, event } => {
                let infl = self.arm(arm).influence(self.phi.as_ref(), corrected)?;
                let k = self.hazard(arm, event)?.event - 1;
                Ok(infl[k].matrix(grid))
            }
            Estimand::Cif { arm, event } => {
                let infl = self.arm(arm).influence(self.phi.as_ref(), corrected)?;
                if_cif(&infl, &self.cif(arm, event)?, grid)
            }
            Estimand::Ate { event } => {
                let f1 = self.influence(Estimand::Cif { arm: Arm::Treated, event }, grid, corrected)?;
                let f0 = self.influence(Estimand::Cif { arm: Arm::Control, event }, grid, corrected)?;
                if_ate(&f1, &f0)
            }
        }
    }
}
