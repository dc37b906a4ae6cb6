//! Synthetic sparse contextual bandit.
//!
//! Per round, each of the `d` feature components is drawn jointly across
//! the `K` arms from `N(0, V)` with `V_kk = 1` and `V_kk' = ρ²`, then each
//! arm's context is projected onto the ℓ2 ball of radius `s_A`. Rewards are
//! `⟨A_t, θ⟩ + ε_t` with Gaussian noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse_linear::{dot, ParameterVector, Support};
use crate::streams::{round_rng, stream_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("invalid environment: {0}")]
    InvalidSpec(String),
    #[error("cross-arm correlation rho2 = {0} does not give a positive semidefinite covariance (need 0 <= rho2 < 1)")]
    InvalidCorrelation(f64),
}

/// Where the nonzero coordinates of θ go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SupportPlacement {
    #[default]
    Random,
    /// First `s0` coordinates; handy for debugging.
    Prefix,
}

/// How contexts are brought to norm `s_A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClipMode {
    /// Rescale only rows whose norm exceeds `s_A`.
    #[default]
    Ball,
    /// Rescale every nonzero row to norm exactly `s_A`.
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSpec {
    pub arms: usize,
    pub dim: usize,
    pub sparsity: usize,
    /// Context norm cap; `inf` disables clipping.
    pub s_a: f64,
    pub rho2: f64,
    pub sigma: f64,
    pub support: SupportPlacement,
    pub clip_mode: ClipMode,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            arms: 2,
            dim: 1000,
            sparsity: 5,
            s_a: 10.0,
            rho2: 0.7,
            sigma: 1.0,
            support: SupportPlacement::Random,
            clip_mode: ClipMode::Ball,
        }
    }
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<(), EnvironmentError> {
        if self.arms < 2 {
            return Err(EnvironmentError::InvalidSpec(format!("need at least 2 arms, got {}", self.arms)));
        }
        if self.dim < 1 {
            return Err(EnvironmentError::InvalidSpec("dimension must be >= 1".into()));
        }
        if self.sparsity < 1 || self.sparsity > self.dim {
            return Err(EnvironmentError::InvalidSpec(format!(
                "sparsity must lie in [1, dim = {}], got {}",
                self.dim, self.sparsity
            )));
        }
        if !(self.s_a > 0.0) {
            return Err(EnvironmentError::InvalidSpec(format!("s_a must be > 0 or inf, got {}", self.s_a)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(EnvironmentError::InvalidSpec(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.rho2) {
            return Err(EnvironmentError::InvalidCorrelation(self.rho2));
        }
        Ok(())
    }
}

/// The unknown parameter and its support.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta: ParameterVector,
    pub support: Support,
    pub theta_min: f64,
}

impl GroundTruth {
    pub fn from_theta(theta: Vec<f64>) -> Self {
        let theta = ParameterVector::from(theta);
        let support = theta.nonzero_support();
        let theta_min = support.iter().map(|&j| theta[j].abs()).fold(f64::INFINITY, f64::min);
        Self {
            theta,
            support,
            theta_min: if theta_min.is_finite() { theta_min } else { 0.0 },
        }
    }
}

/// `K × d` contexts of one round, row `k` is arm `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    arms: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ContextSet {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.as_ref().len(), dim, "context rows must share a dimension");
            data.extend_from_slice(r.as_ref());
        }
        Self { arms: rows.len(), dim, data }
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.arms)
    }

    /// `⟨A_k, θ⟩` for every arm.
    pub fn scores(&self, theta: &[f64]) -> Vec<f64> {
        self.iter_rows().map(|r| dot(r, theta)).collect()
    }
}

/// Draws θ: `s0` coordinates, each `Uniform[1, 2]`.
pub fn generate_theta(spec: &EnvironmentSpec, theta_seed: u64) -> Result<GroundTruth, EnvironmentError> {
    if spec.sparsity > spec.dim {
        return Err(EnvironmentError::InvalidSpec(format!(
            "sparsity {} exceeds dimension {}",
            spec.sparsity, spec.dim
        )));
    }
    let mut rng = stream_rng(theta_seed);
    let mut coords: Vec<usize> = match spec.support {
        SupportPlacement::Random => rand::seq::index::sample(&mut rng, spec.dim, spec.sparsity).into_vec(),
        SupportPlacement::Prefix => (0..spec.sparsity).collect(),
    };
    coords.sort_unstable();
    let mut theta = vec![0.0; spec.dim];
    for &j in &coords {
        theta[j] = rng.random_range(1.0..=2.0);
    }
    Ok(GroundTruth::from_theta(theta))
}

/// Contexts of round `t`; a pure function of `(spec, context_seed, t)`.
pub fn generate_contexts(spec: &EnvironmentSpec, context_seed: u64, t: u64) -> Result<ContextSet, EnvironmentError> {
    if !(0.0..1.0).contains(&spec.rho2) {
        return Err(EnvironmentError::InvalidCorrelation(spec.rho2));
    }
    let (k, d) = (spec.arms, spec.dim);
    let mut rng = round_rng(context_seed, t);
    // Equicorrelated N(0, V) as a shared factor plus independent parts.
    let shared = spec.rho2.sqrt();
    let own = (1.0 - spec.rho2).sqrt();
    let mut data = vec![0.0; k * d];
    for i in 0..d {
        let z0: f64 = StandardNormal.sample(&mut rng);
        for arm in 0..k {
            let z: f64 = StandardNormal.sample(&mut rng);
            data[arm * d + i] = shared * z0 + own * z;
        }
    }
    if spec.s_a.is_finite() {
        for row in data.chunks_exact_mut(d) {
            clip_row(row, spec.s_a, spec.clip_mode);
        }
    }
    Ok(ContextSet { arms: k, dim: d, data })
}

fn clip_row(row: &mut [f64], s_a: f64, mode: ClipMode) {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rescale = match mode {
        ClipMode::Ball => norm > s_a,
        ClipMode::Sphere => norm > 0.0,
    };
    if rescale {
        let c = s_a / norm;
        row.iter_mut().for_each(|v| *v *= c);
    }
}

/// `⟨A_t, θ⟩ + σ·z`, with `z` the first standard normal of round `t` of the
/// noise stream. The stream is consumed identically whichever arm was pulled.
pub fn sample_reward(truth: &GroundTruth, chosen_context: &[f64], sigma: f64, noise_seed: u64, t: u64) -> f64 {
    let z: f64 = StandardNormal.sample(&mut round_rng(noise_seed, t));
    truth.theta.dot(chosen_context) + sigma * z
}

/// `max_k ⟨A_k, θ⟩ − ⟨A_chosen, θ⟩`.
pub fn instantaneous_regret(truth: &GroundTruth, contexts: &ContextSet, chosen: usize) -> f64 {
    let scores = contexts.scores(&truth.theta);
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (best - scores[chosen]).max(0.0)
}
