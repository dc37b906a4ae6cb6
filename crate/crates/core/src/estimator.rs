//! Thresholded LASSO estimation: regularizer schedule, initial LASSO fit,
//! two thresholding passes and a least-squares refit on the surviving
//! support.

use thiserror::Error;

use crate::sparse_linear::{
    DesignMatrix, LassoOptions, ParameterVector, RegressionData, ResponseVector, SolverError, Support,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("dimension d = {0} is too small for the log(d) schedule (need d >= 2)")]
    InvalidDimension(usize),
    #[error("lambda0 must be finite and > 0, got {0}")]
    InvalidLambda0(f64),
    #[error("round index must be >= 1")]
    InvalidRound,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Scale `λ₀` and dimension `d` of the regularizer schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub lambda0: f64,
    pub d: usize,
}

impl ScheduleParams {
    pub fn new(lambda0: f64, d: usize) -> Result<Self, EstimatorError> {
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(EstimatorError::InvalidLambda0(lambda0));
        }
        if d < 2 {
            return Err(EstimatorError::InvalidDimension(d));
        }
        Ok(Self { lambda0, d })
    }
}

/// `λ_t = λ₀·√(2·ln(max(t,2))·ln d / t)`.
///
/// The `max(t, 2)` clamp keeps `λ₁` positive; otherwise round one would be an
/// unpenalized fit on a single sample.
pub fn lambda_schedule(params: &ScheduleParams, t: usize) -> Result<f64, EstimatorError> {
    if params.d < 2 {
        return Err(EstimatorError::InvalidDimension(params.d));
    }
    if t == 0 {
        return Err(EstimatorError::InvalidRound);
    }
    Ok(schedule_with_log_dim(params.lambda0, t, (params.d as f64).ln()))
}

pub(crate) fn schedule_with_log_dim(lambda0: f64, t: usize, ln_d: f64) -> f64 {
    let ln_t = (t.max(2) as f64).ln();
    lambda0 * (2.0 * ln_t * ln_d / t as f64).sqrt()
}

/// `{ j : |θ₀_j| > 4λ_t }`.
pub fn threshold_stage0(theta0: &[f64], lambda_t: f64) -> Support {
    let cut = 4.0 * lambda_t;
    theta0
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > cut)
        .map(|(j, _)| j)
        .collect()
}

/// `{ j ∈ Ŝ₀ : |θ₀_j| ≥ 4λ_t·√|Ŝ₀| }`.
pub fn threshold_stage1(theta0: &[f64], s0_hat: &Support, lambda_t: f64) -> Support {
    if s0_hat.is_empty() {
        return Support::new();
    }
    let cut = 4.0 * lambda_t * (s0_hat.len() as f64).sqrt();
    s0_hat.iter().copied().filter(|&j| theta0[j].abs() >= cut).collect()
}

/// One round of the estimation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Initial LASSO estimate.
    pub theta0: ParameterVector,
    pub s0_hat: Support,
    pub s1_hat: Support,
    /// Refit on `s1_hat`, zero elsewhere. This is the estimate used for the
    /// next selection.
    pub theta_next: ParameterVector,
    pub lambda_t: f64,
    pub converged: bool,
    pub kkt_residual: f64,
    pub sweeps: usize,
}

/// Full pipeline on stored observations; `t` is the number of rows.
pub fn estimate_from(
    data: &RegressionData,
    params: &ScheduleParams,
    warm_start: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<EstimationResult, EstimatorError> {
    let t = data.len();
    let lambda_t = lambda_schedule(params, t)?;
    let fit = data.lasso(lambda_t, warm_start, opts)?;
    let s0_hat = threshold_stage0(&fit.theta, lambda_t);
    let s1_hat = threshold_stage1(&fit.theta, &s0_hat, lambda_t);
    let theta_next = data.least_squares_restricted(&s1_hat);
    Ok(EstimationResult {
        theta0: fit.theta,
        s0_hat,
        s1_hat,
        theta_next,
        lambda_t,
        converged: fit.converged,
        kkt_residual: fit.kkt_residual,
        sweeps: fit.iterations,
    })
}

/// Pipeline on an explicit `(A, R)` pair. `A` must have `t` rows.
pub fn estimate(
    a: &DesignMatrix,
    r: &ResponseVector,
    params: &ScheduleParams,
    t: usize,
    warm_start: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<EstimationResult, EstimatorError> {
    if a.rows() != t {
        return Err(SolverError::DimensionMismatch(format!("design has {} rows, round index is {t}", a.rows())).into());
    }
    let data = RegressionData::from_parts(a, r)?;
    estimate_from(&data, params, warm_start, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ix: &[usize]) -> Support {
        ix.iter().copied().collect()
    }

    #[test]
    fn schedule_values() {
        // Frozen from a 30-digit evaluation of the closed form.
        let p = ScheduleParams::new(0.03, 1000).unwrap();
        let v = lambda_schedule(&p, 1000).unwrap();
        assert!((v - 0.009_267_726_225_442_249).abs() < 1e-15);
        assert!((schedule_with_log_dim(1.0, 2, 2.0) - 1.177_410_022_515_474_7).abs() < 1e-14);
        // t = 1 uses ln 2 in place of ln 1.
        let v1 = lambda_schedule(&p, 1).unwrap();
        assert!((v1 - 0.092_836_221_229_238_88).abs() < 1e-15);
        assert!((v1 - lambda_schedule(&p, 2).unwrap() * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn schedule_rejects_small_dimension() {
        assert_eq!(ScheduleParams::new(0.03, 1), Err(EstimatorError::InvalidDimension(1)));
        let p = ScheduleParams { lambda0: 0.03, d: 1 };
        assert_eq!(lambda_schedule(&p, 5), Err(EstimatorError::InvalidDimension(1)));
        assert!(ScheduleParams::new(0.0, 10).is_err());
    }

    #[test]
    fn stage0_examples() {
        assert_eq!(threshold_stage0(&[0.5, 0.05, 0.0], 0.01), set(&[0, 1]));
        assert_eq!(threshold_stage0(&[0.0; 4], 0.01), set(&[]));
        assert_eq!(threshold_stage0(&[0.04], 0.01), set(&[]));
        assert_eq!(threshold_stage0(&[-0.5], 0.01), set(&[0]));
    }

    #[test]
    fn stage1_examples() {
        let th = [0.5, 0.05, 0.0];
        assert_eq!(threshold_stage1(&th, &set(&[0, 1]), 0.01), set(&[0]));
        assert_eq!(threshold_stage1(&th, &set(&[]), 0.01), set(&[]));
        assert_eq!(threshold_stage1(&[0.08], &set(&[0]), 0.02), set(&[0]));
    }

    #[test]
    fn zero_data_gives_empty_support() {
        let a = DesignMatrix::from_rows(&[vec![1.0, 0.5, -0.2], vec![0.1, 0.3, 0.9]]).unwrap();
        let r = ResponseVector::new(vec![0.0, 0.0]).unwrap();
        let p = ScheduleParams::new(0.03, 3).unwrap();
        let est = estimate(&a, &r, &p, 2, None, &LassoOptions::default()).unwrap();
        assert!(est.theta0.iter().all(|&v| v == 0.0));
        assert!(est.s1_hat.is_empty());
        assert!(est.theta_next.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_round_is_defined() {
        let a = DesignMatrix::from_rows(&[vec![0.3, -0.2, 0.9, 0.1]]).unwrap();
        let r = ResponseVector::new(vec![1.7]).unwrap();
        let p = ScheduleParams::new(0.03, 4).unwrap();
        let est = estimate(&a, &r, &p, 1, None, &LassoOptions::default()).unwrap();
        assert!(est.lambda_t > 0.0);
        assert!(est.s1_hat.is_subset(&est.s0_hat));
        assert!(est.theta_next.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn row_count_must_match_round() {
        let a = DesignMatrix::from_rows(&[vec![0.3, -0.2]]).unwrap();
        let r = ResponseVector::new(vec![1.7]).unwrap();
        let p = ScheduleParams::new(0.03, 2).unwrap();
        assert!(estimate(&a, &r, &p, 3, None, &LassoOptions::default()).is_err());
    }
}
