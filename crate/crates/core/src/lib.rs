//! Thresholded LASSO bandit for sparse high-dimensional contextual linear
//! bandits, with baseline policies, a synthetic environment, diagnostics
//! for the standard sparse-regression conditions and an experiment harness.

pub mod diagnostics;
pub mod environment;
pub mod estimator;
pub mod harness;
pub mod policies;
pub mod sparse_linear;
pub mod streams;
