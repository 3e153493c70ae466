//! Run configuration shared by every command. A config written to disk and
//! read back compares equal to the original.

use std::path::{Path, PathBuf};

use maxmin_core::accelerator::ProfileName;
use maxmin_core::geometry::SetupKind;
use serde::{Deserialize, Serialize};

use crate::format::InstanceKind;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Gen,
    Solve,
    Selftest,
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Accelerated,
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Mve,
    Mvm,
    Sampler,
    Geometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SetupArg {
    Ball,
    Simplex,
}

impl From<SetupArg> for SetupKind {
    fn from(s: SetupArg) -> Self {
        match s {
            SetupArg::Ball => SetupKind::Ball,
            SetupArg::Simplex => SetupKind::TruncatedSimplex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProfileArg {
    Theory,
    Practical,
}

impl From<ProfileArg> for ProfileName {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Theory => ProfileName::Theory,
            ProfileArg::Practical => ProfileName::Practical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandName,
    pub setup: SetupArg,
    pub eps: f64,
    pub seed: u64,
    pub profile: ProfileArg,
    pub input: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub kind: Option<InstanceKind>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub binary: bool,
    pub suite: Option<Suite>,
    pub r_sweep: Vec<f64>,
    pub methods: Vec<Method>,
    pub repeats: u32,
    pub baseline_steps: u64,
}

impl RunConfig {
    pub fn new(command: CommandName) -> Self {
        Self {
            command,
            setup: SetupArg::Ball,
            eps: 0.05,
            seed: 0,
            profile: ProfileArg::Practical,
            input: Vec::new(),
            output: None,
            kind: None,
            n: None,
            d: None,
            binary: false,
            suite: None,
            r_sweep: Vec::new(),
            methods: Vec::new(),
            repeats: 1,
            baseline_steps: 100_000,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        match self.command {
            CommandName::Gen => {
                if self.kind.is_none() || self.output.is_none() {
                    return bad("gen needs --kind and --out".into());
                }
                if self.n.unwrap_or(0) == 0 || self.d.unwrap_or(0) == 0 {
                    return bad("gen needs positive --n and --d".into());
                }
            }
            CommandName::Solve | CommandName::Bench => {
                if self.input.is_empty() {
                    return bad(format!("{:?} needs --in", self.command).to_lowercase());
                }
                if !(self.eps > 0.0 && self.eps < 1.0) {
                    return bad(format!("--eps must lie in (0, 1), got {}", self.eps));
                }
                if self.r_sweep.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
                    return bad("--r-sweep entries must be positive".into());
                }
                if self.repeats == 0 {
                    return bad("--repeats must be at least 1".into());
                }
            }
            CommandName::Selftest => {
                if self.suite.is_none() {
                    return bad("selftest needs --which".into());
                }
                if self.repeats == 0 {
                    return bad("--seeds must be at least 1".into());
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}
