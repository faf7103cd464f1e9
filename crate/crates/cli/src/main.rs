use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use adjna::inference::{AugmentationForm, SeMethod};
use adjna::io::{cmd_estimate, cmd_simulate, EstimateRequest, OutputFormat, PsChoice};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adjna",
    version,
    about = "Propensity-weighted Nelson-Aalen estimation of counterfactual cumulative incidence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate counterfactual hazards, cumulative incidences and their difference.
    Estimate {
        /// Cohort CSV with columns id, treatment, time, event and covariates.
        #[arg(long)]
        data: PathBuf,
        /// Event types of interest, comma separated.
        #[arg(long = "event", value_delimiter = ',', default_value = "1")]
        events: Vec<usize>,
        /// Number of competing event types (default: largest code in the data).
        #[arg(long)]
        n_events: Option<usize>,
        /// Evaluation times, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// logistic, probit, constant or known:FILE.
        #[arg(long, default_value = "logistic")]
        ps: PsChoice,
        /// Standard error methods: oracle, naive, corrected, bootstrap.
        #[arg(long = "variance", value_delimiter = ',', default_value = "naive,corrected")]
        methods: Vec<SeMethod>,
        #[arg(long, default_value_t = 200)]
        boot_reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// json or csv.
        #[arg(long, default_value = "json")]
        format: OutputFormat,
        /// derived or inverse-square.
        #[arg(long, default_value = "derived")]
        augmentation: AugmentationForm,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Run a Monte Carlo study from a TOML configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> adjna::Result<()> {
    // a closed pipe on stdout is not an error for the analysis
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Estimate {
            data,
            events,
            n_events,
            times,
            ps,
            methods,
            boot_reps,
            seed,
            out,
            format,
            augmentation,
            level,
        } => {
            let request = EstimateRequest {
                data,
                events,
                n_events,
                times,
                ps,
                methods,
                bootstrap_reps: boot_reps,
                seed,
                level,
                augmentation,
                out,
                format,
            };
            let outcome = cmd_estimate(&request)?;
            let _ = write!(stdout, "{}", outcome.summary);
            for file in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", file.display());
            }
        }
        Command::Simulate { config, out } => {
            let outcome = cmd_simulate(&config, out.as_deref())?;
            let r = &outcome.report;
            let _ = writeln!(
                stdout,
                "{} replications ({} failed), max |corrected - naive| SE gap {:.3e}",
                r.reps, r.failures, r.max_corrected_naive_gap
            );
            for file in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", file.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are validation errors; --help and --version succeed
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
