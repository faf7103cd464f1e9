//! IPW-adjusted Nelson–Aalen estimation of counterfactual cause-specific
//! hazards and cumulative incidence functions under competing risks, with
//! influence-function standard errors that account for an estimated
//! propensity score.

pub mod error;
pub mod estimator;
pub mod inference;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod propensity;
pub mod simulation;
pub mod step;

pub use error::{Error, Result};
pub use estimator::{adjusted_nelson_aalen, all_hazards, ate, cumulative_incidence, CifEstimate, HazardEstimate};
pub use model::{build_cohort, Arm, Cohort, RawRow, Subject, WeightVector};
pub use pipeline::{Analysis, PsSpec};
pub use propensity::{FittedPropensity, InfluenceVectors, PsKind};
pub use step::StepFunction;
