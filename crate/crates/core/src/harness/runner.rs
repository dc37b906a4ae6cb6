//! Seeded replications.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::environment::{generate_contexts, generate_theta, instantaneous_regret, sample_reward, GroundTruth};
use crate::policies::{PolicyName, PolicyState};
use crate::streams::StreamSeeds;

/// Metrics logged after round `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub chosen_arm: usize,
    pub reward: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    /// `|Ŝ \ S|`.
    pub fp: usize,
    /// `|S \ Ŝ|`.
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `‖θ̂_t − θ‖₂` after the update.
    pub l2_err: f64,
    pub lambda_t: f64,
    pub support_size: usize,
    pub kkt_residual: f64,
    /// Non-converged solver calls so far.
    pub solver_flags: usize,
}

/// Metrics carried into the aggregate, in output order.
pub const METRICS: [&str; 10] = [
    "reward",
    "inst_regret",
    "cum_regret",
    "fp",
    "fn",
    "l2_err",
    "lambda_t",
    "support_size",
    "kkt_residual",
    "solver_flags",
];

impl RoundRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "reward" => self.reward,
            "inst_regret" => self.inst_regret,
            "cum_regret" => self.cum_regret,
            "fp" => self.fp as f64,
            "fn" => self.fn_ as f64,
            "l2_err" => self.l2_err,
            "lambda_t" => self.lambda_t,
            "support_size" => self.support_size as f64,
            "kkt_residual" => self.kkt_residual,
            "solver_flags" => self.solver_flags as f64,
            _ => return None,
        })
    }
}

/// Builds the configured policy for one replication.
pub fn build_policy(config: &ExperimentConfig, truth: &GroundTruth, tie_seed: u64) -> Result<PolicyState, HarnessError> {
    let p = &config.policy;
    let dim = config.environment.dim;
    let lambda0 = || p.lambda0.or(p.name.default_lambda0()).expect("LASSO policies have a default lambda0");
    Ok(match p.name {
        PolicyName::ThLasso => PolicyState::th_lasso(dim, lambda0(), tie_seed, p.lasso_options())?,
        PolicyName::SaLasso => PolicyState::sa_lasso(dim, lambda0(), tie_seed, p.lasso_options())?,
        PolicyName::Oracle => PolicyState::oracle(&truth.theta, tie_seed),
        PolicyName::Random => PolicyState::random(dim, tie_seed),
    })
}

/// Runs `horizon` rounds; the result depends only on
/// `(config, base_seed, replication)`.
pub fn run_replication(config: &ExperimentConfig, replication: u64) -> Result<Vec<RoundRecord>, HarnessError> {
    let mut records = Vec::with_capacity(config.experiment.horizon);
    run_replication_with(config, replication, |_, rec| records.push(rec))?;
    Ok(records)
}

/// Like [`run_replication`] but hands each record, together with the policy
/// state after the update, to `observe`.
pub fn run_replication_with(
    config: &ExperimentConfig,
    replication: u64,
    mut observe: impl FnMut(&PolicyState, RoundRecord),
) -> Result<(), HarnessError> {
    config.validate()?;
    let env = &config.environment;
    let seeds = StreamSeeds::for_replication(config.experiment.base_seed, replication);
    let truth = generate_theta(env, seeds.theta)?;
    let mut policy = build_policy(config, &truth, seeds.tie_break)?;
    let mut cum_regret = 0.0;
    let mut flags = 0;
    for t in 1..=config.experiment.horizon {
        let round = t as u64;
        let contexts = generate_contexts(env, seeds.context, round)?;
        let choice = policy.select_arm(&contexts)?;
        let reward = sample_reward(&truth, contexts.row(choice.arm_index), env.sigma, seeds.noise, round);
        let inst_regret = instantaneous_regret(&truth, &contexts, choice.arm_index);
        cum_regret += inst_regret;
        let report = policy.update(choice, &contexts, reward)?;
        if !report.converged {
            flags += 1;
        }
        let record = RoundRecord {
            t,
            chosen_arm: choice.arm_index,
            reward,
            inst_regret,
            cum_regret,
            fp: report.support.difference(&truth.support).count(),
            fn_: truth.support.difference(&report.support).count(),
            l2_err: policy.theta_hat().l2_distance(&truth.theta),
            lambda_t: report.lambda_t,
            support_size: report.support.len(),
            kkt_residual: report.kkt_residual,
            solver_flags: flags,
        };
        observe(&policy, record);
    }
    Ok(())
}

/// All replications on a pool of `experiment.workers` threads; the output
/// is in replication order whatever the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<Vec<RoundRecord>>, HarnessError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.experiment.workers)
        .build()
        .map_err(|e| HarnessError::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..config.experiment.replications as u64)
            .into_par_iter()
            .map(|rep| run_replication(config, rep))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvironmentSpec;

    fn small(policy: PolicyName) -> ExperimentConfig {
        let env = EnvironmentSpec { dim: 20, sparsity: 2, ..EnvironmentSpec::default() };
        let mut c = ExperimentConfig::new(env, policy).resolved().unwrap();
        c.experiment.horizon = 30;
        c.experiment.replications = 3;
        c
    }

    #[test]
    fn oracle_has_no_regret() {
        let recs = run_replication(&small(PolicyName::Oracle), 0).unwrap();
        assert_eq!(recs.len(), 30);
        assert!(recs.iter().all(|r| r.cum_regret == 0.0 && r.fp == 0 && r.fn_ == 0 && r.l2_err == 0.0));
    }

    #[test]
    fn replications_are_reproducible() {
        let c = small(PolicyName::ThLasso);
        assert_eq!(run_replication(&c, 1).unwrap(), run_replication(&c, 1).unwrap());
        assert_ne!(run_replication(&c, 1).unwrap(), run_replication(&c, 2).unwrap());
    }

    #[test]
    fn worker_count_does_not_matter() {
        let mut c = small(PolicyName::SaLasso);
        let serial = run_experiment(&c).unwrap();
        c.experiment.workers = 3;
        assert_eq!(run_experiment(&c).unwrap(), serial);
    }

    #[test]
    fn record_invariants() {
        let recs = run_replication(&small(PolicyName::ThLasso), 0).unwrap();
        for w in recs.windows(2) {
            assert!(w[1].cum_regret >= w[0].cum_regret);
        }
        for r in &recs {
            assert!(r.fp <= r.support_size);
            assert_eq!(r.support_size - r.fp + r.fn_, 2);
        }
    }
}
