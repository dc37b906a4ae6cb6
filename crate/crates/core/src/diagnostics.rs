//! Assumption checkers and theory calculators: compatibility constant,
//! restricted minimum eigenvalue, margin probe, and the regret bound
//! constants.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::environment::{generate_contexts, EnvironmentError, EnvironmentSpec, GroundTruth};
use crate::sparse_linear::{dot, DesignMatrix, Support};
use crate::streams::round_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("matrix has non-finite entries")]
    NumericalDomain,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
}

/// Symmetric `d × d` matrix `M` (row-major) and a nonempty index set `S₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityQuery {
    dim: usize,
    m: Vec<f64>,
    s0: Support,
}

impl CompatibilityQuery {
    pub fn new(dim: usize, m: Vec<f64>, s0: Support) -> Result<Self, DiagnosticsError> {
        if m.len() != dim * dim {
            return Err(DiagnosticsError::InvalidInput(format!(
                "matrix has {} entries, expected {}",
                m.len(),
                dim * dim
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(DiagnosticsError::NumericalDomain);
        }
        for i in 0..dim {
            for j in i + 1..dim {
                if (m[i * dim + j] - m[j * dim + i]).abs() > 1e-10 {
                    return Err(DiagnosticsError::InvalidInput(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        if s0.is_empty() {
            return Err(DiagnosticsError::InvalidInput("S0 must be nonempty".into()));
        }
        if let Some(&j) = s0.iter().find(|&&j| j >= dim) {
            return Err(DiagnosticsError::InvalidInput(format!("index {j} out of range for d = {dim}")));
        }
        Ok(Self { dim, m, s0 })
    }

    pub fn identity(dim: usize, s0: Support) -> Result<Self, DiagnosticsError> {
        let mut m = vec![0.0; dim * dim];
        (0..dim).for_each(|i| m[i * dim + i] = 1.0);
        Self::new(dim, m, s0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.m
    }

    pub fn support(&self) -> &Support {
        &self.s0
    }

    pub fn scaled(&self, c: f64) -> Result<Self, DiagnosticsError> {
        Self::new(self.dim, self.m.iter().map(|v| c * v).collect(), self.s0.clone())
    }

    fn quad(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        (0..d)
            .filter(|&i| x[i] != 0.0)
            .map(|i| x[i] * dot(&self.m[i * d..(i + 1) * d], x))
            .sum()
    }

    /// `s₀·xᵀMx / ‖x_S‖₁²`, or `None` outside the cone.
    fn ratio(&self, x: &[f64]) -> Option<f64> {
        let (mut on, mut off) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            if self.s0.contains(&j) {
                on += v.abs();
            } else {
                off += v.abs();
            }
        }
        if on == 0.0 || off > 3.0 * on {
            return None;
        }
        Some(self.s0.len() as f64 * self.quad(x) / (on * on))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompatibilityMethod {
    /// Exhaustive search over the lattice `{−n,…,n}^d / n`.
    Grid { resolution: usize },
    /// Random cone directions, each refined by projected gradient with the
    /// signs on `S₀` held fixed.
    Sampling { samples: usize, seed: u64 },
}

/// Estimate of `φ²(M, S₀)`. Both methods minimize over a subset of the cone
/// and therefore return an upper bound; `exhaustive` marks the grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityEstimate {
    pub value: f64,
    pub method: CompatibilityMethod,
    pub exhaustive: bool,
}

/// Largest dimension for the grid search.
pub const GRID_MAX_DIM: usize = 12;

/// Grid search for `d ≤ 12`, sampling with 2000 directions otherwise.
pub fn compatibility_constant(
    query: &CompatibilityQuery,
    grid_resolution: usize,
) -> Result<CompatibilityEstimate, DiagnosticsError> {
    let method = if query.dim <= GRID_MAX_DIM {
        CompatibilityMethod::Grid { resolution: grid_resolution }
    } else {
        CompatibilityMethod::Sampling { samples: 2000, seed: 0 }
    };
    compatibility_constant_with(query, method)
}

pub fn compatibility_constant_with(
    query: &CompatibilityQuery,
    method: CompatibilityMethod,
) -> Result<CompatibilityEstimate, DiagnosticsError> {
    let value = match method {
        CompatibilityMethod::Grid { resolution } => {
            if query.dim > GRID_MAX_DIM {
                return Err(DiagnosticsError::InvalidInput(format!(
                    "grid search needs d <= {GRID_MAX_DIM}, got {}",
                    query.dim
                )));
            }
            if resolution == 0 {
                return Err(DiagnosticsError::InvalidInput("grid resolution must be >= 1".into()));
            }
            grid_search(query, resolution)
        }
        CompatibilityMethod::Sampling { samples, seed } => {
            if samples == 0 {
                return Err(DiagnosticsError::InvalidInput("need at least one sample".into()));
            }
            sampled_search(query, samples, seed)
        }
    };
    Ok(CompatibilityEstimate {
        value: value.max(0.0),
        method,
        exhaustive: matches!(method, CompatibilityMethod::Grid { .. }),
    })
}

fn grid_search(query: &CompatibilityQuery, n: usize) -> f64 {
    let d = query.dim;
    let n_i = n as i64;
    let mut digits = vec![-n_i; d];
    let mut x = vec![0.0; d];
    let mut best = f64::INFINITY;
    loop {
        for (xi, &k) in x.iter_mut().zip(&digits) {
            *xi = k as f64 / n as f64;
        }
        if let Some(r) = query.ratio(&x) {
            best = best.min(r);
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == d {
                return best;
            }
            if digits[pos] < n_i {
                digits[pos] += 1;
                break;
            }
            digits[pos] = -n_i;
            pos += 1;
        }
    }
}

fn sampled_search(query: &CompatibilityQuery, samples: usize, seed: u64) -> f64 {
    let d = query.dim;
    let on: Vec<usize> = query.s0.iter().copied().collect();
    let off: Vec<usize> = (0..d).filter(|j| !query.s0.contains(j)).collect();
    let mut best = f64::INFINITY;
    for s in 0..samples {
        let mut rng = round_rng(seed, s as u64);
        let mut x = vec![0.0; d];
        for &j in &on {
            x[j] = StandardNormal.sample(&mut rng);
        }
        // Off-support mass anywhere from 0 to the cone limit, spread over a
        // random number of coordinates.
        if !off.is_empty() {
            let budget: f64 = rng.random::<f64>() * 3.0;
            let count = rng.random_range(1..=off.len());
            let picked = sample_indices(&mut rng, off.len(), count);
            let raw: Vec<f64> = picked.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
            let total: f64 = raw.iter().map(|v: &f64| v.abs()).sum();
            if total > 0.0 {
                for (p, v) in picked.iter().zip(&raw) {
                    x[off[p]] = v / total * budget;
                }
            }
        }
        let l1: f64 = on.iter().map(|&j| x[j].abs()).sum();
        if l1 == 0.0 {
            continue;
        }
        // Normalize to ‖x_S‖₁ = 1 before refining.
        let scale = 1.0 / l1;
        let off_l1: f64 = off.iter().map(|&j| x[j].abs()).sum::<f64>() * scale;
        x.iter_mut().for_each(|v| *v *= scale);
        if off_l1 > 3.0 {
            off.iter().for_each(|&j| x[j] *= 3.0 / off_l1);
        }
        if let Some(r) = query.ratio(&x) {
            best = best.min(r);
        }
        let refined = refine_fixed_signs(query, &on, &off, x);
        if let Some(r) = query.ratio(&refined) {
            best = best.min(r);
        }
    }
    best
}

/// Projected gradient on `xᵀMx` over `{x : sign(x_S) fixed, ‖x_S‖₁ = 1,
/// ‖x_{Sᶜ}‖₁ ≤ 3}`, a convex set on which the ratio is `s₀·xᵀMx`.
fn refine_fixed_signs(query: &CompatibilityQuery, on: &[usize], off: &[usize], mut x: Vec<f64>) -> Vec<f64> {
    let d = query.dim;
    let signs: Vec<f64> = on.iter().map(|&j| if x[j] < 0.0 { -1.0 } else { 1.0 }).collect();
    // Step 1/L with L the largest absolute row sum of 2M.
    let lip = (0..d)
        .map(|i| query.m[i * d..(i + 1) * d].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * 2.0;
    if lip == 0.0 {
        return x;
    }
    let step = 1.0 / lip;
    let mut value = query.quad(&x);
    for _ in 0..500 {
        let mut y = x.clone();
        for i in 0..d {
            let g = 2.0 * dot(&query.m[i * d..(i + 1) * d], &x);
            y[i] -= step * g;
        }
        let mut mags: Vec<f64> = on.iter().zip(&signs).map(|(&j, s)| y[j] * s).collect();
        project_simplex(&mut mags, 1.0);
        for ((&j, s), m) in on.iter().zip(&signs).zip(&mags) {
            y[j] = s * m;
        }
        let mut rest: Vec<f64> = off.iter().map(|&j| y[j]).collect();
        project_l1_ball(&mut rest, 3.0);
        for (&j, v) in off.iter().zip(&rest) {
            y[j] = *v;
        }
        let next = query.quad(&y);
        x = y;
        if value - next <= 1e-14 * value.abs().max(1e-300) {
            break;
        }
        value = next;
    }
    x
}

/// Euclidean projection onto `{v ≥ 0, Σv = radius}`.
fn project_simplex(v: &mut [f64], radius: f64) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let candidate = (cum - radius) / (k + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - shift).max(0.0));
}

/// Euclidean projection onto `{‖v‖₁ ≤ radius}`.
fn project_l1_ball(v: &mut [f64], radius: f64) {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= radius {
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    project_simplex(&mut mags, radius);
    for (x, m) in v.iter_mut().zip(mags) {
        *x = x.signum() * m;
    }
}

/// `λ_min((1/t)·Σₛ Aₛ(S)Aₛ(S)ᵀ)` over the rows of `history`. Rounding noise
/// below zero is reported as zero since the matrix is positive semidefinite.
pub fn restricted_min_eigenvalue(history: &DesignMatrix, support: &Support) -> Result<f64, DiagnosticsError> {
    if history.rows() == 0 {
        return Err(DiagnosticsError::InvalidInput("history is empty".into()));
    }
    if support.is_empty() {
        return Err(DiagnosticsError::InvalidInput("support is empty".into()));
    }
    if let Some(&j) = support.iter().find(|&&j| j >= history.cols()) {
        return Err(DiagnosticsError::InvalidInput(format!("index {j} out of range for d = {}", history.cols())));
    }
    let cols: Vec<usize> = support.iter().copied().collect();
    let a = history.restricted(&cols);
    let gram: DMatrix<f64> = a.transpose() * &a / history.rows() as f64;
    let eig = SymmetricEigen::new(gram);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0))
}

/// Monte-Carlo estimate of `Pr(0 < |⟨A_k − A_k', θ⟩| ≤ κ)` for each κ,
/// pooled over all arm pairs. Sample `s` uses round `s` of the `seed` stream,
/// so the result does not depend on `workers`.
pub fn margin_probe(
    spec: &EnvironmentSpec,
    truth: &GroundTruth,
    kappa_grid: &[f64],
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    spec.validate()?;
    if kappa_grid.iter().any(|k| !(*k > 0.0)) || kappa_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiagnosticsError::InvalidInput("kappa grid must be positive and increasing".into()));
    }
    if truth.theta.len() != spec.dim {
        return Err(DiagnosticsError::InvalidInput("theta length differs from dimension".into()));
    }
    let pairs = spec.arms * (spec.arms - 1) / 2;
    if n_samples == 0 || pairs == 0 {
        return Ok(kappa_grid.iter().map(|&k| (k, 0.0)).collect());
    }
    let count_sample = |s: usize| -> Result<Vec<u64>, DiagnosticsError> {
        let ctx = generate_contexts(spec, seed, s as u64)?;
        let scores = ctx.scores(&truth.theta);
        let mut counts = vec![0u64; kappa_grid.len()];
        for i in 0..scores.len() {
            for j in i + 1..scores.len() {
                let gap = (scores[i] - scores[j]).abs();
                if gap == 0.0 {
                    continue;
                }
                for (c, &k) in counts.iter_mut().zip(kappa_grid) {
                    if gap <= k {
                        *c += 1;
                    }
                }
            }
        }
        Ok(counts)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| DiagnosticsError::InvalidInput(e.to_string()))?;
    let per_sample: Vec<Vec<u64>> = pool.install(|| (0..n_samples).into_par_iter().map(count_sample).collect::<Result<_, _>>())?;
    let total = (n_samples * pairs) as f64;
    Ok(kappa_grid
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, per_sample.iter().map(|c| c[i]).sum::<u64>() as f64 / total))
        .collect())
}

/// Problem constants entering the regret bounds. `s2` bounds `‖θ‖₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    pub c0: f64,
    pub tau: u64,
    pub h0: u64,
    pub phi0_sq: f64,
    pub alpha: f64,
    pub cm: f64,
    pub sigma: f64,
    pub s2: f64,
}

impl TheoryConstants {
    /// Fills in `C₀`, `τ` and `h₀` from their closed forms.
    #[allow(clippy::too_many_arguments)]
    pub fn derive(
        phi0_sq: f64,
        alpha: f64,
        cm: f64,
        sigma: f64,
        s2: f64,
        s0: usize,
        s_a: f64,
        d: usize,
    ) -> Result<Self, DiagnosticsError> {
        for (name, v) in [("phi0_sq", phi0_sq), ("alpha", alpha), ("cm", cm), ("sigma", sigma), ("s2", s2), ("s_a", s_a)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DiagnosticsError::InvalidConstants(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if s0 == 0 || d < 2 {
            return Err(DiagnosticsError::InvalidConstants(format!("need s0 >= 1 and d >= 2, got s0 = {s0}, d = {d}")));
        }
        let s0f = s0 as f64;
        let df = d as f64;
        let c0 = (phi0_sq / (256.0 * s0f * s_a * s_a)).min(0.5);
        let cold = (2.0 * (2.0 * df * df).ln() / (c0 * c0)).floor();
        let loglog = (df.ln().ln() * df.ln()).floor();
        let tau = cold.max(loglog).max(0.0) as u64;
        let h0 = ((4.0 * near_support_size(s0f, phi0_sq)).ln().sqrt() + 1.0).floor() as u64;
        Ok(Self { c0, tau, h0, phi0_sq, alpha, cm, sigma, s2 })
    }

    fn check(&self) -> Result<(), DiagnosticsError> {
        for (name, v) in [
            ("c0", self.c0),
            ("phi0_sq", self.phi0_sq),
            ("alpha", self.alpha),
            ("cm", self.cm),
            ("sigma", self.sigma),
            ("s2", self.s2),
            ("tau", self.tau as f64),
            ("h0", self.h0 as f64),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DiagnosticsError::InvalidConstants(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `s₀ + 2√s₀/φ₀²`.
fn near_support_size(s0: f64, phi0_sq: f64) -> f64 {
    s0 + 2.0 * s0.sqrt() / phi0_sq
}

/// Regret upper bound at horizon `T`: the logarithmic bound under the margin
/// condition, the `√(T log T)` bound without it.
pub fn theorem_bound(
    constants: &TheoryConstants,
    spec: &EnvironmentSpec,
    horizon: u64,
    with_margin: bool,
) -> Result<f64, DiagnosticsError> {
    constants.check()?;
    if !(spec.s_a > 0.0) || !spec.s_a.is_finite() {
        return Err(DiagnosticsError::InvalidConstants(format!("s_A must be finite and > 0, got {}", spec.s_a)));
    }
    if spec.arms == 0 || spec.sparsity == 0 {
        return Err(DiagnosticsError::InvalidConstants("need K >= 1 and s0 >= 1".into()));
    }
    if horizon < 2 {
        return Err(DiagnosticsError::InvalidInput(format!("horizon must be >= 2, got {horizon}")));
    }
    let c = constants;
    let s_a = spec.s_a;
    let k1 = (spec.arms - 1) as f64;
    let q = near_support_size(spec.sparsity as f64, c.phi0_sq);
    let t = horizon as f64;
    let cold = 2.0 * s_a * c.s2 * c.tau as f64;
    let pi2_3 = PI * PI / 3.0;
    let value = if with_margin {
        cold + margin_log_coefficient(c, spec) * (t.ln() + 1.0)
            + 2.0 * k1 * s_a * c.s2 * (pi2_3 + 2.0 / (c.c0 * c.c0) + q * 10.0 * s_a * s_a / c.alpha)
    } else {
        cold + 16.0 * s_a * s_a * k1 * c.sigma * q.sqrt() / c.alpha * (t * t.ln()).sqrt()
            + 2.0 * k1 * s_a * c.s2 * ((pi2_3 + 10.0 * s_a * s_a / c.alpha) * q + pi2_3 + 2.0 / (c.c0 * c.c0))
    };
    Ok(value)
}

/// Coefficient of `log T` in the margin-case bound.
pub fn margin_log_coefficient(constants: &TheoryConstants, spec: &EnvironmentSpec) -> f64 {
    let c = constants;
    let h0 = c.h0 as f64;
    let q = near_support_size(spec.sparsity as f64, c.phi0_sq);
    352.0 * c.sigma * c.sigma * spec.s_a.powi(4) * c.cm * (spec.arms as f64 - 1.0) * h0 * h0 * h0 * q / (c.alpha * c.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ix: &[usize]) -> Support {
        ix.iter().copied().collect()
    }

    #[test]
    fn identity_compat_is_one() {
        let q = CompatibilityQuery::identity(4, set(&[0, 2])).unwrap();
        let est = compatibility_constant(&q, 4).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
        assert!(est.exhaustive);
    }

    #[test]
    fn zero_matrix_compat_is_zero() {
        let q = CompatibilityQuery::new(3, vec![0.0; 9], set(&[1])).unwrap();
        assert_eq!(compatibility_constant(&q, 3).unwrap().value, 0.0);
    }

    #[test]
    fn query_validation() {
        assert_eq!(
            CompatibilityQuery::new(2, vec![1.0, f64::NAN, f64::NAN, 1.0], set(&[0])),
            Err(DiagnosticsError::NumericalDomain)
        );
        assert!(CompatibilityQuery::new(2, vec![1.0, 0.5, 0.0, 1.0], set(&[0])).is_err());
        assert!(CompatibilityQuery::new(2, vec![1.0, 0.0, 0.0, 1.0], set(&[])).is_err());
        assert!(CompatibilityQuery::new(2, vec![1.0, 0.0, 0.0, 1.0], set(&[2])).is_err());
    }

    #[test]
    fn sampling_on_identity_is_close() {
        let q = CompatibilityQuery::identity(20, set(&[0, 5, 7])).unwrap();
        let est = compatibility_constant(&q, 2).unwrap();
        assert!(!est.exhaustive);
        assert!(est.value >= 1.0 - 1e-9 && est.value < 1.05, "{}", est.value);
    }

    #[test]
    fn projections() {
        let mut v = vec![0.5, 0.5, 2.0];
        project_simplex(&mut v, 1.0);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(v, vec![0.0, 0.0, 1.0]);
        let mut w = vec![1.0, -1.0];
        project_l1_ball(&mut w, 3.0);
        assert_eq!(w, vec![1.0, -1.0]);
        let mut w = vec![3.0, -3.0];
        project_l1_ball(&mut w, 3.0);
        assert_eq!(w, vec![1.5, -1.5]);
    }

    #[test]
    fn restricted_eigen_examples() {
        let one = DesignMatrix::from_rows(&[vec![0.3, 0.4, 1.0]]).unwrap();
        assert!(restricted_min_eigenvalue(&one, &set(&[0, 1])).unwrap() < 1e-15);

        let d = 4;
        let rows: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let basis = DesignMatrix::from_rows(&rows).unwrap();
        let v = restricted_min_eigenvalue(&basis, &set(&[0, 1])).unwrap();
        assert!((v - 0.25).abs() < 1e-15);

        let s_a = 10.0;
        let same = DesignMatrix::from_rows(&[vec![0.0, s_a], vec![0.0, s_a]]).unwrap();
        assert!((restricted_min_eigenvalue(&same, &set(&[1])).unwrap() - s_a * s_a).abs() < 1e-10);
        assert!(restricted_min_eigenvalue(&same, &set(&[])).is_err());
    }

    #[test]
    fn margin_probe_zero_theta() {
        let spec = EnvironmentSpec { dim: 10, sparsity: 1, ..EnvironmentSpec::default() };
        let truth = GroundTruth::from_theta(vec![0.0; 10]);
        let out = margin_probe(&spec, &truth, &[0.1, 1.0, 1e9], 50, 3, 1).unwrap();
        assert!(out.iter().all(|&(_, p)| p == 0.0));
    }

    #[test]
    fn margin_probe_is_worker_invariant() {
        let spec = EnvironmentSpec { arms: 3, dim: 8, sparsity: 2, ..EnvironmentSpec::default() };
        let mut theta = vec![0.0; 8];
        theta[1] = 1.5;
        theta[4] = -1.0;
        let truth = GroundTruth::from_theta(theta);
        let grid = [0.05, 0.5, 5.0];
        let a = margin_probe(&spec, &truth, &grid, 300, 9, 1).unwrap();
        let b = margin_probe(&spec, &truth, &grid, 300, 9, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(margin_probe(&spec, &truth, &[0.5, 0.1], 10, 9, 1).is_err());
    }

    fn ones() -> TheoryConstants {
        TheoryConstants { c0: 1.0, tau: 1, h0: 1, phi0_sq: 1.0, alpha: 1.0, cm: 1.0, sigma: 1.0, s2: 1.0 }
    }

    fn unit_spec(arms: usize) -> EnvironmentSpec {
        EnvironmentSpec { arms, dim: 10, sparsity: 1, s_a: 1.0, ..EnvironmentSpec::default() }
    }

    #[test]
    fn bound_all_ones() {
        // q = 3; 2 + 352·3·(ln 2 + 1) + 2·(π²/3 + 2 + 30).
        let expected = 2.0 + 1056.0 * (1.0 + 2f64.ln()) + 64.0 + 2.0 * PI * PI / 3.0;
        let got = theorem_bound(&ones(), &unit_spec(2), 2, true).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
    }

    #[test]
    fn bound_single_arm() {
        let mut c = ones();
        c.tau = 37;
        c.s2 = 2.5;
        let spec = EnvironmentSpec { s_a: 3.0, ..unit_spec(1) };
        for margin in [true, false] {
            assert_eq!(theorem_bound(&c, &spec, 1000, margin).unwrap(), 2.0 * 3.0 * 2.5 * 37.0);
        }
    }

    #[test]
    fn bound_rejects_bad_constants() {
        let mut c = ones();
        c.alpha = 0.0;
        assert!(matches!(theorem_bound(&c, &unit_spec(2), 10, true), Err(DiagnosticsError::InvalidConstants(_))));
        let mut c = ones();
        c.tau = 0;
        assert!(theorem_bound(&c, &unit_spec(2), 10, false).is_err());
        assert!(theorem_bound(&ones(), &unit_spec(2), 1, true).is_err());
    }

    #[test]
    fn derived_constants() {
        // φ₀² = 1, s0 = 1, sA = 1, d = 10: C₀ = 1/256.
        let c = TheoryConstants::derive(1.0, 1.0, 1.0, 1.0, 1.0, 1, 1.0, 10).unwrap();
        assert_eq!(c.c0, 1.0 / 256.0);
        assert_eq!(c.tau, (2.0 * 200f64.ln() * 256.0 * 256.0).floor() as u64);
        // h₀ = ⌊√ln 12 + 1⌋ = 2.
        assert_eq!(c.h0, 2);
        let big = TheoryConstants::derive(1e6, 1.0, 1.0, 1.0, 1.0, 1, 1.0, 10).unwrap();
        assert_eq!(big.c0, 0.5);
        assert!(TheoryConstants::derive(-1.0, 1.0, 1.0, 1.0, 1.0, 1, 1.0, 10).is_err());
    }
}
