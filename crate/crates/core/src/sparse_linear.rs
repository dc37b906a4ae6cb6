//! Core numerical solvers: LASSO by cyclic coordinate descent and
//! column-restricted least squares.
//!
//! The LASSO objective is `(1/t)‖R − Aθ‖₂² + λ‖θ‖₁` where `t` is the number
//! of rows of `A`. The solver works on the sufficient statistics `AᵀA`,
//! `AᵀR` and `RᵀR`, which [`RegressionData`] maintains incrementally as rows
//! arrive. A sweep then costs `O(d)` plus `O(d)` per coordinate that moves.

use std::collections::BTreeSet;
use std::ops::{Deref, DerefMut};
use std::sync::{Mutex, MutexGuard};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Index set of coordinates (0-based).
pub type Support = BTreeSet<usize>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design matrix has no rows")]
    EmptyDesign,
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("coordinate descent did not converge after {iterations} sweeps (KKT residual {kkt_residual:e})")]
    NonConvergence { iterations: usize, kkt_residual: f64 },
}

/// Dense parameter vector (θ and its estimates).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Coordinates with a nonzero entry.
    pub fn nonzero_support(&self) -> Support {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&self, other: &[f64]) -> f64 {
        debug_assert_eq!(self.0.len(), other.len());
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Observed rewards `R = (r₁, …, r_t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseVector(Vec<f64>);

impl ResponseVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SolverError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("response"));
        }
        Ok(Self(values))
    }

    pub fn push(&mut self, value: f64) {
        self.0.push(value);
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ResponseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major design matrix; row `s` is the context selected in round `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SolverError> {
        if cols == 0 {
            return Err(SolverError::DimensionMismatch("design needs at least one column".into()));
        }
        if data.len() != rows * cols {
            return Err(SolverError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("design matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, SolverError> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(SolverError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// A matrix with `cols` columns and no rows yet, used as a growing history.
    pub fn empty(cols: usize) -> Self {
        Self { rows: 0, cols, data: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row length must equal column count");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A θ`.
    pub fn mul_vec(&self, theta: &[f64]) -> Vec<f64> {
        self.iter_rows().map(|r| dot(r, theta)).collect()
    }

    /// Columns of `A` restricted to `support`, as an nalgebra matrix.
    pub(crate) fn restricted(&self, support: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, support.len(), |i, c| self.data[i * self.cols + support[c]])
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sign(z) · max(|z| − γ, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Coordinate-descent controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Record the objective after every sweep.
    pub trace: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 10_000, trace: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub theta: ParameterVector,
    /// `(1/t)‖R − Aθ‖₂² + λ‖θ‖₁`, recomputed from the rows.
    pub objective: f64,
    /// Sweeps performed.
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub objective_trace: Option<Vec<f64>>,
}

impl LassoSolution {
    /// `Err(NonConvergence)` when the solver hit its sweep budget.
    pub fn check(&self) -> Result<(), SolverError> {
        if self.converged {
            Ok(())
        } else {
            Err(SolverError::NonConvergence {
                iterations: self.iterations,
                kkt_residual: self.kkt_residual,
            })
        }
    }
}

/// Largest violation of the LASSO optimality conditions, given the gradient
/// of the smooth part `(2/t)·Aᵀ(Aθ − R)`.
pub fn kkt_residual(gradient: &[f64], theta: &[f64], lambda: f64) -> f64 {
    gradient
        .iter()
        .zip(theta)
        .map(|(&g, &th)| {
            if th == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * th.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Observations `(A, R)` together with the sufficient statistics the
/// coordinate-descent solver runs on.
#[derive(Debug, Clone)]
pub struct RegressionData {
    design: DesignMatrix,
    response: ResponseVector,
    /// `AᵀA`, full symmetric, row-major.
    gram: Vec<f64>,
    /// `AᵀR`.
    cross: Vec<f64>,
    /// `RᵀR`.
    rr: f64,
    factor: FactorSlot,
}

impl RegressionData {
    pub fn new(dim: usize) -> Self {
        Self {
            design: DesignMatrix::empty(dim),
            response: ResponseVector::default(),
            gram: vec![0.0; dim * dim],
            cross: vec![0.0; dim],
            rr: 0.0,
            factor: FactorSlot::default(),
        }
    }

    pub fn from_parts(a: &DesignMatrix, r: &ResponseVector) -> Result<Self, SolverError> {
        if a.rows() != r.len() {
            return Err(SolverError::DimensionMismatch(format!(
                "design has {} rows but response has {} entries",
                a.rows(),
                r.len()
            )));
        }
        let mut data = Self::new(a.cols());
        for (row, &y) in a.iter_rows().zip(r.iter()) {
            data.push(row, y);
        }
        Ok(data)
    }

    pub fn dim(&self) -> usize {
        self.design.cols()
    }

    pub fn len(&self) -> usize {
        self.design.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.design.rows() == 0
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn response(&self) -> &ResponseVector {
        &self.response
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    /// Appends one observation; `O(d²)` for the gram update.
    pub fn push(&mut self, row: &[f64], reward: f64) {
        let d = self.dim();
        assert_eq!(row.len(), d, "row length must equal dimension");
        self.design.push_row(row);
        self.response.push(reward);
        for (i, &ai) in row.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let g = &mut self.gram[i * d..(i + 1) * d];
            for (gij, &aj) in g.iter_mut().zip(row) {
                *gij += ai * aj;
            }
            self.cross[i] += ai * reward;
        }
        self.rr += reward * reward;
        self.factor.get_mut().rank_one_update(row);
    }

    /// `(1/t)‖R − Aθ‖₂² + λ‖θ‖₁` evaluated on the stored rows.
    pub fn objective(&self, theta: &[f64], lambda: f64) -> f64 {
        let t = self.len() as f64;
        let nz: Vec<usize> = (0..theta.len()).filter(|&j| theta[j] != 0.0).collect();
        let rss: f64 = self
            .design
            .iter_rows()
            .zip(self.response.iter())
            .map(|(row, &y)| {
                let e = y - nz.iter().map(|&j| row[j] * theta[j]).sum::<f64>();
                e * e
            })
            .sum();
        rss / t + lambda * theta.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `(2/t)·Aᵀ(Aθ − R)` computed from the rows.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let t = self.len() as f64;
        let mut grad = vec![0.0; self.dim()];
        for (row, &y) in self.design.iter_rows().zip(self.response.iter()) {
            let e = dot(row, theta) - y;
            if e == 0.0 {
                continue;
            }
            for (g, &a) in grad.iter_mut().zip(row) {
                *g += e * a;
            }
        }
        grad.iter_mut().for_each(|g| *g *= 2.0 / t);
        grad
    }

    /// `Gθ` using only the nonzero coordinates of θ.
    fn gram_times(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut q = vec![0.0; d];
        for (j, &th) in theta.iter().enumerate() {
            if th == 0.0 {
                continue;
            }
            for (qk, &g) in q.iter_mut().zip(&self.gram[j * d..(j + 1) * d]) {
                *qk += th * g;
            }
        }
        q
    }

    /// Minimizes the LASSO objective by cyclic coordinate descent.
    ///
    /// Each outer pass is one full sweep followed by sweeps over the active
    /// set until no coordinate moves by more than `tol`. The active phase
    /// occasionally tries an exact solve with the current signs fixed, which
    /// ends the phase early when it succeeds. The pass ends with an exact
    /// KKT check, and the solver returns once the residual is within `tol`.
    /// Hitting `max_iter` sweeps returns the last iterate with
    /// `converged = false` (every step is monotone, so it is also the best
    /// one).
    pub fn lasso(
        &self,
        lambda: f64,
        warm_start: Option<&[f64]>,
        opts: &LassoOptions,
    ) -> Result<LassoSolution, SolverError> {
        let d = self.dim();
        if self.is_empty() {
            return Err(SolverError::EmptyDesign);
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(SolverError::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(opts.tol > 0.0) {
            return Err(SolverError::InvalidArgument(format!("tol must be > 0, got {}", opts.tol)));
        }
        let mut theta = match warm_start {
            Some(w) if w.len() != d => {
                return Err(SolverError::DimensionMismatch(format!(
                    "warm start has length {}, expected {d}",
                    w.len()
                )))
            }
            Some(w) if w.iter().all(|v| v.is_finite()) => w.to_vec(),
            _ => vec![0.0; d],
        };

        let inv_t = 1.0 / self.len() as f64;
        // Coordinate curvature 2·G_jj/t.
        let curvature: Vec<f64> = (0..d).map(|j| 2.0 * inv_t * self.gram[j * d + j]).collect();
        let mut q = self.gram_times(&theta);
        let mut trace = opts.trace.then(Vec::new);

        let mut factor = self.factor.lock();
        let mut iterations = 0;
        let mut kkt;
        let mut converged = false;

        loop {
            let max_delta = self.sweep(0..d, &mut theta, &mut q, &curvature, lambda, inv_t);
            iterations += 1;
            if let Some(tr) = trace.as_mut() {
                tr.push(self.gram_objective(&theta, &q, lambda));
            }
            let active: Vec<usize> = (0..d).filter(|&j| theta[j] != 0.0).collect();
            if max_delta >= opts.tol && !active.is_empty() && iterations < opts.max_iter {
                let mut sub = ActiveProblem::new(self, &active, &theta, inv_t);
                while iterations < opts.max_iter {
                    let md = sub.sweep(lambda);
                    iterations += 1;
                    if let Some(tr) = trace.as_mut() {
                        tr.push(sub.objective(self.rr, lambda));
                    }
                    if md < opts.tol {
                        break;
                    }
                    if sub.stable_sweeps >= 1 && sub.newton_polish(lambda, self.rr, &active, &mut factor, self) {
                        if let Some(tr) = trace.as_mut() {
                            tr.push(sub.objective(self.rr, lambda));
                        }
                        break;
                    }
                }
                for (c, &j) in active.iter().enumerate() {
                    theta[j] = sub.theta[c];
                }
            }

            // Recompute Gθ in full before certifying.
            q = self.gram_times(&theta);
            let grad: Vec<f64> = q
                .iter()
                .zip(&self.cross)
                .map(|(qj, bj)| 2.0 * inv_t * (qj - bj))
                .collect();
            kkt = kkt_residual(&grad, &theta, lambda);
            if kkt <= opts.tol {
                converged = true;
                break;
            }
            if iterations >= opts.max_iter {
                break;
            }
        }

        let objective = self.objective(&theta, lambda);
        Ok(LassoSolution {
            theta: theta.into(),
            objective,
            iterations,
            kkt_residual: kkt,
            converged,
            objective_trace: trace,
        })
    }

    fn sweep(
        &self,
        coords: impl Iterator<Item = usize>,
        theta: &mut [f64],
        q: &mut [f64],
        curvature: &[f64],
        lambda: f64,
        inv_t: f64,
    ) -> f64 {
        let d = theta.len();
        let mut max_delta: f64 = 0.0;
        for j in coords {
            let a = curvature[j];
            let old = theta[j];
            let grad = 2.0 * inv_t * (q[j] - self.cross[j]);
            if a <= 0.0 {
                // Zero column: the coordinate does not enter the fit.
                if old != 0.0 {
                    theta[j] = 0.0;
                    max_delta = max_delta.max(old.abs());
                }
                continue;
            }
            if old == 0.0 && grad.abs() <= lambda {
                continue;
            }
            let new = soft_threshold(a * old - grad, lambda) / a;
            let delta = new - old;
            if delta != 0.0 {
                theta[j] = new;
                for (qk, &g) in q.iter_mut().zip(&self.gram[j * d..(j + 1) * d]) {
                    *qk += delta * g;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    fn gram_objective(&self, theta: &[f64], q: &[f64], lambda: f64) -> f64 {
        let inv_t = 1.0 / self.len() as f64;
        let quad = self.rr - 2.0 * dot(theta, &self.cross) + dot(theta, q);
        quad * inv_t + lambda * theta.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Minimum-norm least squares on the columns in `support`, zero elsewhere.
    ///
    /// Well-conditioned blocks are solved through the normal equations with
    /// the stored gram matrix; anything near rank deficiency goes through an
    /// SVD of the restricted design.
    pub fn least_squares_restricted(&self, support: &Support) -> ParameterVector {
        let d = self.dim();
        let cols: Vec<usize> = support.iter().copied().collect();
        if cols.is_empty() || cols.len() > self.len() {
            return least_squares_on(&self.design, &self.response, support);
        }
        let m = cols.len();
        let block = DMatrix::from_fn(m, m, |r, c| self.gram[cols[r] * d + cols[c]]);
        let max_diag = (0..m).map(|i| block[(i, i)]).fold(0.0, f64::max);
        if let Some(chol) = block.cholesky() {
            let l = chol.l_dirty();
            let min_pivot = (0..m).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
            if min_pivot > NORMAL_EQUATIONS_RCOND * max_diag {
                let rhs = DVector::from_iterator(m, cols.iter().map(|&j| self.cross[j]));
                let sol = chol.solve(&rhs);
                let mut theta = ParameterVector::zeros(d);
                for (c, &j) in cols.iter().enumerate() {
                    theta[j] = sol[c];
                }
                return theta;
            }
        }
        least_squares_on(&self.design, &self.response, support)
    }
}

/// The LASSO restricted to a fixed set of coordinates, with its own dense
/// copy of the gram block so that a sweep costs `O(|A|²)` instead of
/// `O(|A|·d)`.
struct ActiveProblem {
    n: usize,
    gram: Vec<f64>,
    cross: Vec<f64>,
    theta: Vec<f64>,
    q: Vec<f64>,
    inv_t: f64,
    /// Consecutive sweeps in which no coordinate crossed or hit zero.
    stable_sweeps: usize,
}

impl ActiveProblem {
    fn new(data: &RegressionData, active: &[usize], theta: &[f64], inv_t: f64) -> Self {
        let d = data.dim();
        let n = active.len();
        let mut gram = Vec::with_capacity(n * n);
        for &i in active {
            let row = &data.gram[i * d..(i + 1) * d];
            gram.extend(active.iter().map(|&j| row[j]));
        }
        let cross = active.iter().map(|&j| data.cross[j]).collect();
        let theta: Vec<f64> = active.iter().map(|&j| theta[j]).collect();
        let q = (0..n).map(|i| dot(&gram[i * n..(i + 1) * n], &theta)).collect();
        Self { n, gram, cross, theta, q, inv_t, stable_sweeps: 0 }
    }

    fn sweep(&mut self, lambda: f64) -> f64 {
        let n = self.n;
        let mut max_delta: f64 = 0.0;
        let mut changed = false;
        for j in 0..n {
            let a = 2.0 * self.inv_t * self.gram[j * n + j];
            let old = self.theta[j];
            if a <= 0.0 {
                continue;
            }
            let grad = 2.0 * self.inv_t * (self.q[j] - self.cross[j]);
            if old == 0.0 && grad.abs() <= lambda {
                continue;
            }
            let new = soft_threshold(a * old - grad, lambda) / a;
            let delta = new - old;
            if delta != 0.0 {
                if new.signum() != old.signum() || new == 0.0 || old == 0.0 {
                    changed = true;
                }
                self.theta[j] = new;
                for (qk, &g) in self.q.iter_mut().zip(&self.gram[j * n..(j + 1) * n]) {
                    *qk += delta * g;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        self.stable_sweeps = if changed { 0 } else { self.stable_sweeps + 1 };
        max_delta
    }

    fn objective(&self, rr: f64, lambda: f64) -> f64 {
        let quad = rr - 2.0 * dot(&self.theta, &self.cross) + dot(&self.theta, &self.q);
        quad * self.inv_t + lambda * self.theta.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Moves toward the solution of the stationarity equations
    /// `Gθ = b − (tλ/2)·sign(θ)` on the current nonzero coordinates, solved
    /// with a cached Cholesky factor of their gram block.
    ///
    /// On a fixed orthant face the LASSO objective is exactly this quadratic,
    /// so stepping toward its minimizer decreases the objective as long as no
    /// sign flips. When a coordinate would cross zero the step stops there,
    /// the coordinate leaves the face and the solve is repeated. Returns true
    /// if the face minimizer was reached with every sign intact.
    fn newton_polish(
        &mut self,
        lambda: f64,
        rr: f64,
        active: &[usize],
        factor: &mut FactorCache,
        data: &RegressionData,
    ) -> bool {
        const MAX_FACES: usize = 8;
        let half_t_lambda = 0.5 * lambda / self.inv_t;
        let before = self.objective(rr, lambda);
        let saved = (self.theta.clone(), self.q.clone());
        let mut reached = false;
        let mut moved = false;
        for _ in 0..MAX_FACES {
            let nz: Vec<usize> = (0..self.n).filter(|&j| self.theta[j] != 0.0).collect();
            if nz.is_empty() {
                break;
            }
            let cols: Vec<usize> = nz.iter().map(|&c| active[c]).collect();
            let f = match factor.sync(&cols, data) {
                Ok(f) => f,
                Err(dep) => {
                    // More nonzeros than the data can resolve: slide along
                    // the kernel of the block until one of them drops out.
                    let mut v: Vec<(usize, f64)> = dep.weights;
                    v.push((dep.col, 1.0));
                    let v = v
                        .into_iter()
                        .map(|(g, w)| (nz[cols.binary_search(&g).expect("factor synced to cols")], w))
                        .collect::<Vec<_>>();
                    if self.null_step(&v) {
                        moved = true;
                        continue;
                    }
                    break;
                }
            };
            // Factor order -> compact index.
            let local: Vec<usize> = f
                .cols
                .iter()
                .map(|g| nz[cols.binary_search(g).expect("factor synced to cols")])
                .collect();
            let mut x: Vec<f64> = local
                .iter()
                .map(|&c| self.cross[c] - half_t_lambda * self.theta[c].signum())
                .collect();
            f.solve(&mut x);
            if x.iter().any(|v| !v.is_finite()) {
                factor.invalidate();
                break;
            }
            // Fraction of the step at which each coordinate would reach zero.
            let hits: Vec<f64> = local
                .iter()
                .zip(&x)
                .map(|(&c, &v)| {
                    let old = self.theta[c];
                    if v == 0.0 || v.signum() != old.signum() {
                        old / (old - v)
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            let step = hits.iter().copied().fold(1.0, f64::min);
            for ((&c, &v), &hit) in local.iter().zip(&x).zip(&hits) {
                let old = self.theta[c];
                self.theta[c] = if hit <= step { 0.0 } else { old + step * (v - old) };
            }
            moved = true;
            if step >= 1.0 {
                reached = true;
                break;
            }
        }
        if !moved {
            return false;
        }
        let n = self.n;
        for i in 0..n {
            self.q[i] = dot(&self.gram[i * n..(i + 1) * n], &self.theta);
        }
        if self.objective(rr, lambda) > before {
            // The cached factor drifted; rebuild it next time.
            (self.theta, self.q) = saved;
            factor.invalidate();
            return false;
        }
        self.stable_sweeps = 0;
        reached
    }
}

impl ActiveProblem {
    /// On a singular block the smooth part is constant along a kernel
    /// direction `v` (given as `(compact index, weight)` pairs), and the
    /// penalty is linear in `v` until a sign changes. Moving along `±v`
    /// (whichever does not increase the penalty) to the first zero crossing
    /// removes one coordinate.
    fn null_step(&mut self, v: &[(usize, f64)]) -> bool {
        let slope: f64 = v.iter().map(|&(c, w)| self.theta[c].signum() * w).sum();
        let dir = if slope > 0.0 { -1.0 } else { 1.0 };
        let mut step = f64::INFINITY;
        let mut hit = None;
        for (i, &(c, w)) in v.iter().enumerate() {
            let u = dir * w;
            if u * self.theta[c] < 0.0 {
                let s = -self.theta[c] / u;
                if s < step {
                    step = s;
                    hit = Some(i);
                }
            }
        }
        let Some(h) = hit else {
            return false;
        };
        for (i, &(c, w)) in v.iter().enumerate() {
            self.theta[c] = if i == h { 0.0 } else { self.theta[c] + step * dir * w };
        }
        true
    }
}

/// A column whose gram entries are (numerically) a combination of the
/// factored ones: `G_F,col = G_FF·y`, so `v = e_col − Σ y_k e_k` spans a
/// kernel direction. `weights` holds `(coordinate, −y_k)`.
struct Dependent {
    col: usize,
    weights: Vec<(usize, f64)>,
}

/// Cholesky factor of `G_SS` for a set `S` of coordinates, carried across
/// rounds: new rows enter as rank-one updates and set changes as column
/// insertions and removals, each `O(|S|²)`.
#[derive(Debug, Clone, Default)]
struct FactorCache {
    inner: Option<ActiveFactor>,
}

/// Lower-triangular `L` with `LLᵀ = G_SS`, stored by rows (row `i` holds
/// `L[i][0..=i]`).
#[derive(Debug, Clone)]
struct ActiveFactor {
    /// Coordinates in factor order.
    cols: Vec<usize>,
    rows: Vec<Vec<f64>>,
    updates: usize,
}

impl ActiveFactor {
    fn is_sound(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| r[i] > 0.0 && r[i].is_finite())
    }

    /// `LLᵀ ← LLᵀ + xxᵀ` restricted to the trailing rows `from..`.
    fn rank_one_update(&mut self, from: usize, x: &mut [f64]) {
        let m = self.rows.len();
        for k in from..m {
            let xk = x[k - from];
            if xk == 0.0 {
                continue;
            }
            let lkk = self.rows[k][k];
            let r = lkk.hypot(xk);
            let c = r / lkk;
            let s = xk / lkk;
            self.rows[k][k] = r;
            for i in k + 1..m {
                let lik = (self.rows[i][k] + s * x[i - from]) / c;
                x[i - from] = c * x[i - from] - s * lik;
                self.rows[i][k] = lik;
            }
        }
    }

    fn remove(&mut self, pos: usize) {
        self.rows.remove(pos);
        self.cols.remove(pos);
        let mut x: Vec<f64> = self.rows[pos..].iter_mut().map(|r| r.remove(pos)).collect();
        self.rank_one_update(pos, &mut x);
        self.updates += 1;
    }

    /// Appends coordinate `j`; false if the extended block is not
    /// numerically positive definite.
    fn push(&mut self, j: usize, gram: &[f64], d: usize) -> bool {
        let mut y: Vec<f64> = self.cols.iter().map(|&i| gram[i * d + j]).collect();
        for i in 0..y.len() {
            let row = &self.rows[i];
            y[i] = (y[i] - dot(&row[..i], &y[..i])) / row[i];
        }
        let pivot = gram[j * d + j] - dot(&y, &y);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return false;
        }
        y.push(pivot.sqrt());
        self.rows.push(y);
        self.cols.push(j);
        self.updates += 1;
        true
    }

    /// `(coordinate, −y_k)` with `G_FF·y = G_F,j` for the factored set `F`.
    fn dependence(&self, j: usize, gram: &[f64], d: usize) -> Vec<(usize, f64)> {
        let mut y: Vec<f64> = self.cols.iter().map(|&i| gram[i * d + j]).collect();
        self.solve(&mut y);
        self.cols.iter().zip(y).map(|(&c, w)| (c, -w)).collect()
    }

    /// Solves `LLᵀx = b` in place.
    fn solve(&self, b: &mut [f64]) {
        let m = self.rows.len();
        for i in 0..m {
            let row = &self.rows[i];
            b[i] = (b[i] - dot(&row[..i], &b[..i])) / row[i];
        }
        for i in (0..m).rev() {
            let row = &self.rows[i];
            b[i] /= row[i];
            let xi = b[i];
            for (bk, &lik) in b[..i].iter_mut().zip(&row[..i]) {
                *bk -= lik * xi;
            }
        }
    }
}

/// Shared slot for the factor so that `lasso` can stay `&self`. Clones start
/// with an empty cache.
#[derive(Debug, Default)]
struct FactorSlot(Mutex<FactorCache>);

impl FactorSlot {
    fn lock(&self) -> MutexGuard<'_, FactorCache> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn get_mut(&mut self) -> &mut FactorCache {
        self.0.get_mut().unwrap_or_else(|e| e.into_inner())
    }
}

impl Clone for FactorSlot {
    fn clone(&self) -> Self {
        Self::default()
    }
}

/// Smallest Cholesky pivot, relative to the largest diagonal entry, for
/// which the normal equations are trusted.
const NORMAL_EQUATIONS_RCOND: f64 = 1e-10;

/// Incremental updates before the factor is rebuilt from scratch.
const FACTOR_REFRESH: usize = 4000;

impl FactorCache {
    fn invalidate(&mut self) {
        self.inner = None;
    }

    fn rank_one_update(&mut self, row: &[f64]) {
        if let Some(f) = self.inner.as_mut() {
            let mut x: Vec<f64> = f.cols.iter().map(|&j| row[j]).collect();
            f.rank_one_update(0, &mut x);
            f.updates += 1;
            if f.updates > FACTOR_REFRESH || !f.is_sound() {
                self.inner = None;
            }
        }
    }

    /// Brings the factor to the coordinate set `target` (sorted). If the gram
    /// block of `target` is numerically singular, returns the first column
    /// found to depend on the factored ones; the factor then stays valid for
    /// the coordinates it already covers.
    fn sync(&mut self, target: &[usize], data: &RegressionData) -> Result<&ActiveFactor, Dependent> {
        let d = data.dim();
        let fresh = match &self.inner {
            None => true,
            Some(f) => f.updates > FACTOR_REFRESH || !f.is_sound(),
        };
        if fresh {
            self.inner = Some(ActiveFactor { cols: Vec::new(), rows: Vec::new(), updates: 0 });
        }
        let f = self.inner.as_mut().expect("set above");
        for pos in (0..f.cols.len()).rev() {
            if target.binary_search(&f.cols[pos]).is_err() {
                f.remove(pos);
            }
        }
        let mut present = f.cols.clone();
        present.sort_unstable();
        for &j in target {
            if present.binary_search(&j).is_err() && !f.push(j, &data.gram, d) {
                return Err(Dependent { col: j, weights: f.dependence(j, &data.gram, d) });
            }
        }
        if fresh {
            f.updates = 0;
        }
        Ok(f)
    }
}

/// LASSO fit of `R` on `A` at penalty `lambda`.
pub fn lasso_fit(
    a: &DesignMatrix,
    r: &ResponseVector,
    lambda: f64,
    warm_start: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<LassoSolution, SolverError> {
    RegressionData::from_parts(a, r)?.lasso(lambda, warm_start, opts)
}

/// Least squares on the columns of `A` indexed by `support`, zero-padded to
/// length `d`. Rank-deficient restricted systems get the minimum-norm
/// solution (singular values below a relative cutoff are dropped).
pub fn least_squares_restricted(
    a: &DesignMatrix,
    r: &ResponseVector,
    support: &Support,
) -> Result<ParameterVector, SolverError> {
    if a.rows() != r.len() {
        return Err(SolverError::DimensionMismatch(format!(
            "design has {} rows but response has {} entries",
            a.rows(),
            r.len()
        )));
    }
    if let Some(&j) = support.iter().next_back() {
        if j >= a.cols() {
            return Err(SolverError::DimensionMismatch(format!(
                "support index {j} out of range for dimension {}",
                a.cols()
            )));
        }
    }
    Ok(least_squares_on(a, r, support))
}

fn least_squares_on(a: &DesignMatrix, r: &ResponseVector, support: &Support) -> ParameterVector {
    let mut theta = ParameterVector::zeros(a.cols());
    if support.is_empty() || a.rows() == 0 {
        return theta;
    }
    let cols: Vec<usize> = support.iter().copied().collect();
    let sub = a.restricted(&cols);
    let rhs = DVector::from_column_slice(r);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * f64::EPSILON * a.rows().max(cols.len()) as f64;
    if smax > 0.0 {
        // `solve` only fails when U/Vᵀ were not requested.
        let sol = svd.solve(&rhs, cutoff).expect("SVD computed with U and V");
        for (c, &j) in cols.iter().enumerate() {
            theta[j] = sol[c];
        }
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert!((soft_threshold(1.0, 0.2) - 0.8).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.1, 0.2), 0.0);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
        assert_eq!(soft_threshold(-1.5, 0.5), -1.0);
    }

    #[test]
    fn zero_response_gives_zero_solution() {
        let a = DesignMatrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![0.3, -1.0, 2.0]]).unwrap();
        let r = ResponseVector::new(vec![0.0, 0.0]).unwrap();
        let sol = lasso_fit(&a, &r, 0.1, None, &LassoOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.theta.iter().all(|&v| v == 0.0));
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn unpenalized_square_system_is_ols() {
        let a = DesignMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let r = ResponseVector::new(vec![3.0, 5.0]).unwrap();
        // Exact solve: 2x + y = 3, x + 3y = 5 => x = 0.8, y = 1.4.
        let opts = LassoOptions { tol: 1e-12, ..Default::default() };
        let sol = lasso_fit(&a, &r, 0.0, None, &opts).unwrap();
        assert!(sol.converged);
        assert!((sol.theta[0] - 0.8).abs() < 1e-9);
        assert!((sol.theta[1] - 1.4).abs() < 1e-9);
    }

    #[test]
    fn orthonormal_two_coordinate_example() {
        // t = 2, A = √2·I so (1/t)AᵀA = I; z = (1/t)AᵀR = (1.0, 0.05).
        let s = 2f64.sqrt();
        let a = DesignMatrix::from_rows(&[vec![s, 0.0], vec![0.0, s]]).unwrap();
        let r = ResponseVector::new(vec![2.0 / s, 0.1 / s]).unwrap();
        let sol = lasso_fit(&a, &r, 0.4, None, &LassoOptions::default()).unwrap();
        assert!((sol.theta[0] - 0.8).abs() < 1e-12);
        assert_eq!(sol.theta[1], 0.0);
    }

    #[test]
    fn dimension_errors() {
        let a = DesignMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let r = ResponseVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            lasso_fit(&a, &r, 0.1, None, &LassoOptions::default()),
            Err(SolverError::DimensionMismatch(_))
        ));
        let r1 = ResponseVector::new(vec![1.0]).unwrap();
        assert!(matches!(
            lasso_fit(&a, &r1, 0.1, Some(&[0.0]), &LassoOptions::default()),
            Err(SolverError::DimensionMismatch(_))
        ));
        let support: Support = [5].into_iter().collect();
        assert!(least_squares_restricted(&a, &r1, &support).is_err());
        assert!(DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0]]).is_err());
        assert!(DesignMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn nonconvergence_is_flagged() {
        // Highly correlated columns converge slowly; one sweep is not enough.
        let a = DesignMatrix::from_rows(&[vec![1.0, 0.999], vec![0.999, 1.0], vec![0.5, 0.501]]).unwrap();
        let r = ResponseVector::new(vec![1.0, -1.0, 0.3]).unwrap();
        let opts = LassoOptions { tol: 1e-12, max_iter: 1, trace: false };
        let sol = lasso_fit(&a, &r, 1e-4, None, &opts).unwrap();
        assert!(!sol.converged);
        assert!(sol.kkt_residual > 1e-12);
        assert!(matches!(sol.check(), Err(SolverError::NonConvergence { iterations: 1, .. })));
    }

    #[test]
    fn restricted_ls_examples() {
        let a = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = ResponseVector::new(vec![3.0, 5.0]).unwrap();
        let s: Support = [0].into_iter().collect();
        assert_eq!(&*least_squares_restricted(&a, &r, &s).unwrap(), &[3.0, 0.0]);
        let empty = Support::new();
        assert_eq!(&*least_squares_restricted(&a, &r, &empty).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn incremental_statistics_match_batch() {
        let rows = vec![vec![1.0, -2.0, 0.5], vec![0.0, 1.5, 3.0], vec![-1.0, 0.25, 0.0]];
        let a = DesignMatrix::from_rows(&rows).unwrap();
        let r = ResponseVector::new(vec![0.3, -0.7, 2.0]).unwrap();
        let data = RegressionData::from_parts(&a, &r).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let g: f64 = rows.iter().map(|row| row[i] * row[j]).sum();
                assert_eq!(data.gram()[i * 3 + j], g);
            }
        }
        let theta = [0.1, -0.2, 0.3];
        let via_rows = data.gradient(&theta);
        let q = data.gram_times(&theta);
        for j in 0..3 {
            let via_gram = 2.0 / 3.0 * (q[j] - data.cross[j]);
            assert!((via_rows[j] - via_gram).abs() < 1e-14);
        }
    }
}
