pub mod bootstrap;
pub mod influence;
pub mod residuals;
pub mod variance;

pub use bootstrap::{bootstrap_se, rep_rng, BootstrapOutcome};
pub use influence::{
    augmentation, if_ate, if_cif, if_hazard_corrected, if_hazard_naive, if_hazard_oracle,
    score_ratio, AugmentationForm, AugmentationTerm, Estimand, HazardInfluence, IfKind, IfMatrix,
};
pub use residuals::{martingale_residuals, MartingaleResiduals};
pub use variance::{
    normal_quantile, variance_corrected, variance_naive, variance_oracle_finite_sample,
    wald_interval, SeMethod, VarianceReport, WaldInterval,
};
