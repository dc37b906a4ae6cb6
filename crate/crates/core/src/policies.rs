//! Bandit policies sharing one interaction contract.
//!
//! All policies select greedily, `argmax_k ⟨A_{t,k}, θ̂_t⟩`, with ties broken
//! uniformly at random. They differ only in how θ̂ is maintained:
//!
//! * `ThLasso`: thresholded LASSO with least-squares refit, re-estimated
//!   every round.
//! * `SaLasso`: greedy selection on the plain LASSO estimate with the
//!   `λ₀·√((ln t + ln d)/t)` schedule. A stand-in for the published SA LASSO
//!   bandit, whose exact update is not reproduced here.
//! * `Oracle`: θ̂ ≡ θ.
//! * `Random`: θ̂ ≡ 0, so every round is an all-way tie.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::ContextSet;
use crate::estimator::{estimate_from, EstimationResult, EstimatorError, ScheduleParams};
use crate::sparse_linear::{LassoOptions, ParameterVector, RegressionData, Support};
use crate::streams::stream_rng;

/// Scores within this relative distance of the maximum count as tied.
pub const TIE_EPSILON: f64 = 1e-12;

pub const DEFAULT_TH_LAMBDA0: f64 = 0.03;
pub const DEFAULT_SA_LAMBDA0: f64 = 0.16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("context set is empty")]
    EmptyContextSet,
    #[error("context dimension {got} does not match policy dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    ThLasso,
    SaLasso,
    Oracle,
    Random,
}

impl PolicyName {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::ThLasso => "th_lasso",
            PolicyName::SaLasso => "sa_lasso",
            PolicyName::Oracle => "oracle",
            PolicyName::Random => "random",
        }
    }

    /// Tuned `λ₀` for the LASSO policies; `None` for the others.
    pub fn default_lambda0(self) -> Option<f64> {
        match self {
            PolicyName::ThLasso => Some(DEFAULT_TH_LAMBDA0),
            PolicyName::SaLasso => Some(DEFAULT_SA_LAMBDA0),
            _ => None,
        }
    }
}

impl std::fmt::Display for PolicyName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "th_lasso" => Ok(PolicyName::ThLasso),
            "sa_lasso" => Ok(PolicyName::SaLasso),
            "oracle" => Ok(PolicyName::Oracle),
            "random" => Ok(PolicyName::Random),
            other => Err(format!("unknown policy '{other}' (expected th_lasso, sa_lasso, oracle or random)")),
        }
    }
}

/// `λ₀·√((ln(max(t,2)) + ln d)/t)`.
pub fn sa_lasso_schedule(lambda0: f64, t: usize, d: usize) -> f64 {
    let ln_t = (t.max(2) as f64).ln();
    lambda0 * ((ln_t + (d as f64).ln()) / t.max(1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArmChoice {
    pub arm_index: usize,
    pub tie_broken: bool,
}

/// What one update produced, for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    /// Estimated support after the update.
    pub support: Support,
    /// Regularizer used this round; 0 for policies without one.
    pub lambda_t: f64,
    pub converged: bool,
    pub kkt_residual: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone)]
enum Rule {
    ThLasso { schedule: ScheduleParams },
    SaLasso { lambda0: f64 },
    Oracle { support: Support },
    Random,
}

/// Per-replication state of a policy.
#[derive(Debug, Clone)]
pub struct PolicyState {
    name: PolicyName,
    rule: Rule,
    /// Selected contexts and rewards so far; kept only by the LASSO policies.
    history: Option<RegressionData>,
    theta_hat: ParameterVector,
    /// Warm start for the next LASSO solve.
    lasso_iterate: Option<ParameterVector>,
    last_estimate: Option<EstimationResult>,
    round: usize,
    dim: usize,
    rng: ChaCha8Rng,
    options: LassoOptions,
}

impl PolicyState {
    pub fn th_lasso(dim: usize, lambda0: f64, tie_seed: u64, options: LassoOptions) -> Result<Self, PolicyError> {
        let schedule = ScheduleParams::new(lambda0, dim)?;
        Ok(Self::build(PolicyName::ThLasso, Rule::ThLasso { schedule }, dim, tie_seed, options, None))
    }

    pub fn sa_lasso(dim: usize, lambda0: f64, tie_seed: u64, options: LassoOptions) -> Result<Self, PolicyError> {
        if !(lambda0 >= 0.0) || !lambda0.is_finite() {
            return Err(EstimatorError::InvalidLambda0(lambda0).into());
        }
        if dim < 2 {
            return Err(EstimatorError::InvalidDimension(dim).into());
        }
        Ok(Self::build(PolicyName::SaLasso, Rule::SaLasso { lambda0 }, dim, tie_seed, options, None))
    }

    pub fn oracle(theta: &[f64], tie_seed: u64) -> Self {
        let theta = ParameterVector::from(theta.to_vec());
        let support = theta.nonzero_support();
        Self::build(
            PolicyName::Oracle,
            Rule::Oracle { support },
            theta.len(),
            tie_seed,
            LassoOptions::default(),
            Some(theta),
        )
    }

    pub fn random(dim: usize, tie_seed: u64) -> Self {
        Self::build(PolicyName::Random, Rule::Random, dim, tie_seed, LassoOptions::default(), None)
    }

    fn build(
        name: PolicyName,
        rule: Rule,
        dim: usize,
        tie_seed: u64,
        options: LassoOptions,
        theta_hat: Option<ParameterVector>,
    ) -> Self {
        let history = matches!(rule, Rule::ThLasso { .. } | Rule::SaLasso { .. }).then(|| RegressionData::new(dim));
        Self {
            name,
            rule,
            history,
            theta_hat: theta_hat.unwrap_or_else(|| ParameterVector::zeros(dim)),
            lasso_iterate: None,
            last_estimate: None,
            round: 1,
            dim,
            rng: stream_rng(tie_seed),
            options,
        }
    }

    pub fn name(&self) -> PolicyName {
        self.name
    }

    /// Estimate used for the next selection.
    pub fn theta_hat(&self) -> &ParameterVector {
        &self.theta_hat
    }

    /// Index of the next round (starts at 1).
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn history(&self) -> Option<&RegressionData> {
        self.history.as_ref()
    }

    /// The most recent thresholded-LASSO estimate (`ThLasso` only).
    pub fn last_estimate(&self) -> Option<&EstimationResult> {
        self.last_estimate.as_ref()
    }

    /// Current support estimate.
    pub fn support(&self) -> Support {
        match &self.rule {
            Rule::ThLasso { .. } => self.last_estimate.as_ref().map(|e| e.s1_hat.clone()).unwrap_or_default(),
            Rule::SaLasso { .. } => self.theta_hat.nonzero_support(),
            Rule::Oracle { support } => support.clone(),
            Rule::Random => Support::new(),
        }
    }

    /// Greedy arm under θ̂, ties broken uniformly via the tie-break stream.
    pub fn select_arm(&mut self, contexts: &ContextSet) -> Result<ArmChoice, PolicyError> {
        if contexts.arms() == 0 {
            return Err(PolicyError::EmptyContextSet);
        }
        if contexts.dim() != self.dim {
            return Err(PolicyError::DimensionMismatch { expected: self.dim, got: contexts.dim() });
        }
        let ties = argmax_set(&contexts.scores(&self.theta_hat));
        if ties.len() == 1 {
            return Ok(ArmChoice { arm_index: ties[0], tie_broken: false });
        }
        let pick = self.rng.random_range(0..ties.len());
        Ok(ArmChoice { arm_index: ties[pick], tie_broken: true })
    }

    /// Records `(A_t, r_t)` for the chosen arm and refreshes θ̂.
    ///
    /// Solver trouble never aborts: a non-converged LASSO is used as is and
    /// reported through `UpdateReport::converged`.
    pub fn update(&mut self, chosen: ArmChoice, contexts: &ContextSet, reward: f64) -> Result<UpdateReport, PolicyError> {
        if contexts.dim() != self.dim {
            return Err(PolicyError::DimensionMismatch { expected: self.dim, got: contexts.dim() });
        }
        let row = contexts.row(chosen.arm_index);
        self.round += 1;
        let report = match &self.rule {
            Rule::ThLasso { schedule } => {
                let history = self.history.as_mut().expect("lasso policies keep a history");
                history.push(row, reward);
                let est = estimate_from(history, schedule, self.lasso_iterate.as_deref(), &self.options)?;
                self.theta_hat = est.theta_next.clone();
                self.lasso_iterate = Some(est.theta0.clone());
                let report = UpdateReport {
                    support: est.s1_hat.clone(),
                    lambda_t: est.lambda_t,
                    converged: est.converged,
                    kkt_residual: est.kkt_residual,
                    sweeps: est.sweeps,
                };
                self.last_estimate = Some(est);
                report
            }
            Rule::SaLasso { lambda0 } => {
                let history = self.history.as_mut().expect("lasso policies keep a history");
                history.push(row, reward);
                let lambda_t = sa_lasso_schedule(*lambda0, history.len(), self.dim);
                let fit = history
                    .lasso(lambda_t, self.lasso_iterate.as_deref(), &self.options)
                    .map_err(EstimatorError::from)?;
                self.theta_hat = fit.theta.clone();
                self.lasso_iterate = Some(fit.theta);
                UpdateReport {
                    support: self.theta_hat.nonzero_support(),
                    lambda_t,
                    converged: fit.converged,
                    kkt_residual: fit.kkt_residual,
                    sweeps: fit.iterations,
                }
            }
            Rule::Oracle { support } => UpdateReport {
                support: support.clone(),
                lambda_t: 0.0,
                converged: true,
                kkt_residual: 0.0,
                sweeps: 0,
            },
            Rule::Random => UpdateReport {
                support: Support::new(),
                lambda_t: 0.0,
                converged: true,
                kkt_residual: 0.0,
                sweeps: 0,
            },
        };
        Ok(report)
    }
}

/// Indices whose score is within `TIE_EPSILON` (relative) of the maximum.
pub fn argmax_set(scores: &[f64]) -> Vec<usize> {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| (best - s) <= TIE_EPSILON * best.abs().max(s.abs()))
        .map(|(k, _)| k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sa_schedule_values() {
        let v = sa_lasso_schedule(0.16, 1000, 1000);
        assert!((v - 0.018_806_304_003_814_397).abs() < 1e-15);
        assert!((sa_lasso_schedule(1.0, 2, 2) - 0.832_554_611_157_697_8).abs() < 1e-15);
        assert_eq!(sa_lasso_schedule(0.0, 17, 100), 0.0);
    }

    #[test]
    fn argmax_with_ties() {
        assert_eq!(argmax_set(&[1.0, 1.0, 0.5]), vec![0, 1]);
        assert_eq!(argmax_set(&[0.0, 0.0]), vec![0, 1]);
        assert_eq!(argmax_set(&[0.2, 0.7, -1.0]), vec![1]);
        assert_eq!(argmax_set(&[1.0, 1.0 + 1e-14]), vec![0, 1]);
        assert_eq!(argmax_set(&[1.0, 1.0 + 1e-9]), vec![1]);
    }

    #[test]
    fn dominant_arm() {
        let mut p = PolicyState::oracle(&[1.0, 0.0, 0.0], 3);
        let ctx = ContextSet::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let c = p.select_arm(&ctx).unwrap();
        assert_eq!(c, ArmChoice { arm_index: 0, tie_broken: false });
    }

    #[test]
    fn empty_context_set() {
        let mut p = PolicyState::random(3, 1);
        let ctx = ContextSet::from_rows::<Vec<f64>>(&[]);
        assert_eq!(p.select_arm(&ctx), Err(PolicyError::EmptyContextSet));
    }

    #[test]
    fn oracle_and_random_estimates_are_fixed() {
        let theta = [0.0, 1.5, 0.0];
        let mut oracle = PolicyState::oracle(&theta, 1);
        let mut random = PolicyState::random(3, 1);
        let ctx = ContextSet::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]);
        for _ in 0..5 {
            let c = oracle.select_arm(&ctx).unwrap();
            oracle.update(c, &ctx, 1.0).unwrap();
            let c = random.select_arm(&ctx).unwrap();
            random.update(c, &ctx, 1.0).unwrap();
        }
        assert_eq!(&**oracle.theta_hat(), &theta);
        assert!(random.theta_hat().iter().all(|&v| v == 0.0));
        assert_eq!(oracle.round(), 6);
    }

    #[test]
    fn policy_name_parsing() {
        for n in [PolicyName::ThLasso, PolicyName::SaLasso, PolicyName::Oracle, PolicyName::Random] {
            assert_eq!(n.as_str().parse::<PolicyName>().unwrap(), n);
        }
        assert!("ucb".parse::<PolicyName>().is_err());
    }
}
