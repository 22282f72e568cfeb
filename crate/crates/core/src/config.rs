//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::losses::LossVariant;
use crate::problems::{PdeProblem, ProblemId};
use crate::training::Schedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Xavier,
    Zeros,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureDemoConfig {
    pub n_list: Vec<u32>,
    pub tau: f64,
    /// Minimum radial node count; raised with the frequency.
    pub base_n: usize,
}

impl Default for FailureDemoConfig {
    fn default() -> Self {
        FailureDemoConfig {
            n_list: vec![2, 4, 8, 16, 32, 64],
            tau: 1.0,
            base_n: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    /// Loss variant for `fd-check`; the other runners fix their own variants.
    pub loss: String,
    /// Boundary penalty weight for penalty runs.
    pub tau: f64,
    pub hidden: Vec<usize>,
    pub init: Init,
    /// Gauss points per axis.
    pub quad_n: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Regularity constant to certify with instead of the convex formula.
    pub user_constant: Option<f64>,
    /// Operator-norm constant for the parabolic bound.
    pub parabolic_constant: Option<f64>,
    pub fd_coords: usize,
    pub schedule: Schedule,
    pub failure_demo: FailureDemoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "P1".into(),
            loss: "interior".into(),
            tau: 100.0,
            hidden: vec![16, 16],
            init: Init::Xavier,
            quad_n: 24,
            seeds: vec![0],
            out_dir: PathBuf::from("out"),
            user_constant: None,
            parabolic_constant: None,
            fd_coords: 20,
            schedule: Schedule::default(),
            failure_demo: FailureDemoConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.problem_id()?;
        self.loss_variant()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(
                "hidden widths must be nonempty and positive".into(),
            ));
        }
        if self.quad_n < 2 {
            return Err(Error::Config(format!(
                "quad_n must be at least 2, got {}",
                self.quad_n
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.schedule.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.schedule.record_every == 0 || self.schedule.checkpoint_every == 0 {
            return Err(Error::Config(
                "record and checkpoint strides must be positive".into(),
            ));
        }
        let demo = &self.failure_demo;
        if demo.n_list.is_empty()
            || demo.n_list.windows(2).any(|w| w[0] >= w[1])
            || demo.n_list[0] == 0
        {
            return Err(Error::Config(
                "failure_demo.n_list must be positive and strictly ascending".into(),
            ));
        }
        if !(demo.tau > 0.0) {
            return Err(Error::Config("failure_demo.tau must be positive".into()));
        }
        Ok(())
    }

    pub fn problem_id(&self) -> Result<ProblemId> {
        self.problem.parse()
    }

    pub fn problem(&self) -> Result<PdeProblem> {
        Ok(self.problem_id()?.problem())
    }

    pub fn loss_variant(&self) -> Result<LossVariant> {
        self.loss.parse()
    }

    /// Network widths `[input, hidden.., 1]` for a problem.
    pub fn widths(&self, problem: &PdeProblem) -> Vec<usize> {
        let mut w = vec![problem.dim()];
        w.extend(&self.hidden);
        w.push(1);
        w
    }

    /// Hex SHA-256 of the canonical serialisation without the output
    /// directory, truncated to 16 digits.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            out_dir: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
