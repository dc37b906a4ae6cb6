//! Experiment configuration, stored as TOML with three sections:
//!
//! ```toml
//! [environment]
//! arms = 2
//! dim = 1000
//!
//! [policy]
//! name = "th_lasso"
//! lambda0 = 0.03
//!
//! [experiment]
//! horizon = 1000
//! replications = 20
//! ```
//!
//! Every field has a default except `policy.name`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::environment::EnvironmentSpec;
use crate::policies::PolicyName;
use crate::sparse_linear::LassoOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub name: PolicyName,
    /// Defaults to the tuned value of the policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    LassoOptions::default().tol
}

fn default_max_iter() -> usize {
    LassoOptions::default().max_iter
}

impl PolicyConfig {
    pub fn new(name: PolicyName) -> Self {
        Self { name, lambda0: None, tol: default_tol(), max_iter: default_max_iter() }
    }

    pub fn lasso_options(&self) -> LassoOptions {
        LassoOptions { tol: self.tol, max_iter: self.max_iter, trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    pub horizon: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    /// Keep every `log_every`-th round (and the last) in the aggregate.
    pub log_every: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            horizon: 1000,
            replications: 20,
            base_seed: 0,
            workers: 1,
            output_dir: PathBuf::from("results"),
            log_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub environment: EnvironmentSpec,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub experiment: ExperimentSettings,
}

impl ExperimentConfig {
    pub fn new(environment: EnvironmentSpec, policy: PolicyName) -> Self {
        Self { environment, policy: PolicyConfig::new(policy), experiment: ExperimentSettings::default() }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        config.resolved()
    }

    /// Reads, resolves and validates a config file. Errors carry the path.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_toml_str(&text).map_err(|e| HarnessError::Config { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Fills in policy defaults and checks every field.
    pub fn resolved(mut self) -> Result<Self, HarnessError> {
        if self.policy.lambda0.is_none() {
            self.policy.lambda0 = self.policy.name.default_lambda0();
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        self.environment.validate().map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        let e = &self.experiment;
        if e.horizon < 1 {
            return bad("experiment.horizon must be >= 1".into());
        }
        if e.replications < 1 {
            return bad("experiment.replications must be >= 1".into());
        }
        if e.workers < 1 {
            return bad("experiment.workers must be >= 1".into());
        }
        if e.log_every < 1 {
            return bad("experiment.log_every must be >= 1".into());
        }
        let p = &self.policy;
        if let Some(l) = p.lambda0 {
            if !(l > 0.0) || !l.is_finite() {
                return bad(format!("policy.lambda0 must be finite and > 0, got {l}"));
            }
        }
        if matches!(p.name, PolicyName::ThLasso | PolicyName::SaLasso) {
            if p.lambda0.is_none() {
                return bad(format!("policy {} needs lambda0", p.name));
            }
            if self.environment.dim < 2 {
                return bad("LASSO policies need dim >= 2".into());
            }
        }
        if !(p.tol > 0.0) {
            return bad(format!("policy.tol must be > 0, got {}", p.tol));
        }
        if p.max_iter < 1 {
            return bad("policy.max_iter must be >= 1".into());
        }
        Ok(())
    }

    /// The config as TOML, defaults included.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml_str("[policy]\nname = \"th_lasso\"\n").unwrap();
        assert_eq!(c.policy.lambda0, Some(0.03));
        assert_eq!(c.experiment.replications, 20);
        assert_eq!(c.environment, EnvironmentSpec::default());
        let sa = ExperimentConfig::from_toml_str("[policy]\nname = \"sa_lasso\"\n").unwrap();
        assert_eq!(sa.policy.lambda0, Some(0.16));
    }

    #[test]
    fn echo_round_trips() {
        let text = "[environment]\ns_a = inf\narms = 3\n[policy]\nname = \"sa_lasso\"\nlambda0 = 0.2\n[experiment]\nhorizon = 7\n";
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(c.environment.s_a.is_infinite());
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml_string(), c.to_toml_string());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("[policy]\nname = \"greedy\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[policy]\nname = \"random\"\n[experiment]\nhorizon = 0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[policy]\nname = \"th_lasso\"\nlambda0 = -1.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[policy]\nname = \"random\"\n[environment]\nrho2 = 1.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[policy]\nname = \"random\"\ntypo = 1\n").is_err());
    }

    #[test]
    fn load_reports_path() {
        let err = ExperimentConfig::load(Path::new("/nonexistent/x.cfg")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.cfg"));
    }
}
