//! Experiment description read from JSON.

use std::path::{Path, PathBuf};

use cellfree_otfs_core::pipeline::AllocationScheme;
use cellfree_otfs_core::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Parameter grid swept on top of the base configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Values of `num_users` to visit, in order.
    pub num_users: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
}

/// One JSON document: the system configuration plus what to run on it.
///
/// Missing keys fall back to defaults and unknown keys are rejected, both at
/// this level and inside `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub schemes: Vec<AllocationScheme>,
    pub n_drops: usize,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub output: OutputSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            base: SystemConfig::default(),
            schemes: AllocationScheme::ALL.to_vec(),
            n_drops: 50,
            seed: 1,
            sweep: None,
            output: OutputSpec::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked without running a drop.
    ///
    /// Embedded pilots with more users than the guard budget allows are not
    /// rejected here: such drops are reported as infeasible, which is exactly
    /// what a user-count sweep needs to show.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_drops == 0 {
            return Err(HarnessError::Config("n_drops must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(HarnessError::Config("at least one scheme is required".into()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(HarnessError::Config(format!("scheme {} listed twice", s.name())));
            }
        }
        self.base.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(sweep) = &self.sweep {
            if sweep.num_users.is_empty() {
                return Err(HarnessError::Config("sweep.num_users is empty".into()));
            }
            for &k in &sweep.num_users {
                self.config_for_users(k)
                    .validate()
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// The base configuration with the user count replaced.
    pub fn config_for_users(&self, num_users: usize) -> SystemConfig {
        let mut cfg = self.base.clone();
        cfg.num_users = num_users;
        if let Some(up) = &self.base.uplink_power {
            // A per-user list cannot follow a user-count sweep; keep its first value for everyone.
            let v = up.first().copied().unwrap_or(1.0);
            cfg.uplink_power = Some(vec![v; num_users]);
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let spec = ExperimentSpec::from_json("{}").unwrap();
        assert_eq!(spec, ExperimentSpec::default());
    }

    #[test]
    fn rejects_unknown_keys_at_every_level() {
        assert!(ExperimentSpec::from_json(r#"{"drops": 3}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"base": {"num_ap": 3}}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"sweep": {"num_users": [2], "x": 1}}"#).is_err());
    }

    #[test]
    fn rejects_zero_drops_and_bad_schemes() {
        assert!(ExperimentSpec::from_json(r#"{"n_drops": 0}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"schemes": ["sp_joint", "sp_joint"]}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"schemes": ["nope"]}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"sweep": {"num_users": [0]}}"#).is_err());
    }

    #[test]
    fn parses_a_full_document() {
        let spec = ExperimentSpec::from_json(
            r#"{"base": {"num_aps": 4, "num_users": 2}, "schemes": ["ep", "uniform_sp"],
                "n_drops": 3, "seed": 9, "sweep": {"num_users": [1, 2]},
                "output": {"dir": "out", "format": "json"}}"#,
        )
        .unwrap();
        assert_eq!(spec.base.num_aps, 4);
        assert_eq!(spec.schemes, vec![AllocationScheme::Ep, AllocationScheme::UniformSp]);
        assert_eq!(spec.output.format, OutputFormat::Json);
        assert_eq!(spec.config_for_users(1).num_users, 1);
    }
}
