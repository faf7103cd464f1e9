pub mod dgp;
pub mod monte_carlo;
pub mod truth;

pub use dgp::{draw_subject, sample_cohort, DgpConfig, HazardModel, Latent, SimSample, TypeModel};
pub use monte_carlo::{run_monte_carlo, run_rep, run_sensitivity, McConfig, McReport, McRow, RepOutcome};
pub use truth::{truth_oracle, TruthTable};
