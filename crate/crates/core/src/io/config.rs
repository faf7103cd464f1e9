//! Simulation configuration files (TOML).
//!
//! ```toml
//! n = 500
//! reps = 1000
//! seed = 20240501
//! ps_kind = "logistic"        # logistic | probit | constant
//! bootstrap_reps = 200        # 0 disables the bootstrap
//! bootstrap_rep_limit = 200   # bootstrap only the first replications
//! eval_times = [1, 2, 3, 4, 5, 6, 7, 8]
//! output = "out/table1_n500"
//! truth_samples = 10000000
//! truth_seed = 1
//! augmentation = "derived"    # derived | inverse-square
//! level = 0.95
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::AugmentationForm;
use crate::propensity::PsKind;
use crate::simulation::{DgpConfig, McConfig};

fn default_eval_times() -> Vec<f64> {
    DgpConfig::default().eval_times
}

fn default_truth_samples() -> usize {
    10_000_000
}

fn default_level() -> f64 {
    0.95
}

fn default_ps_kind() -> PsKind {
    PsKind::Logistic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigFile {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_ps_kind")]
    pub ps_kind: PsKind,
    #[serde(default)]
    pub bootstrap_reps: usize,
    /// Defaults to every replication.
    #[serde(default)]
    pub bootstrap_rep_limit: Option<usize>,
    #[serde(default = "default_eval_times")]
    pub eval_times: Vec<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_truth_samples")]
    pub truth_samples: usize,
    /// Defaults to `seed`.
    #[serde(default)]
    pub truth_seed: Option<u64>,
    #[serde(default)]
    pub augmentation: AugmentationForm,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl SimConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let config: SimConfigFile =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ps_kind == PsKind::Known {
            return Err(Error::InvalidInput(
                "config: ps_kind must be logistic, probit or constant".into(),
            ));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("config: reps must be positive".into()));
        }
        if self.bootstrap_reps == 1 {
            return Err(Error::InvalidInput("config: bootstrap_reps must be 0 or at least 2".into()));
        }
        if self.truth_samples == 0 {
            return Err(Error::InvalidInput("config: truth_samples must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("config: level {} outside (0, 1)", self.level)));
        }
        self.mc_config().dgp.validate()
    }

    pub fn mc_config(&self) -> McConfig {
        let dgp = DgpConfig {
            n: self.n,
            eval_times: self.eval_times.clone(),
            ..DgpConfig::default()
        };
        let mut config = McConfig::new(dgp, self.reps, self.seed);
        config.ps_kind = self.ps_kind;
        config.bootstrap_reps = self.bootstrap_reps;
        config.bootstrap_rep_limit = self.bootstrap_rep_limit.unwrap_or(self.reps);
        config.augmentation = self.augmentation;
        config.level = self.level;
        config
    }

    pub fn truth_seed(&self) -> u64 {
        self.truth_seed.unwrap_or(self.seed)
    }
}
