pub mod commands;
pub mod config;
pub mod input;
pub mod report;

pub use commands::{build_report, cmd_estimate, cmd_simulate, EstimateOutcome, EstimateRequest, PsChoice, SimulateOutcome};
pub use config::SimConfigFile;
pub use input::{read_cohort, read_rows, read_scores, write_cohort};
pub use report::{emit_mc_report, emit_report, format_number, mc_table, Curve, OutputFormat, PsSummary, Report, ReportRow};
