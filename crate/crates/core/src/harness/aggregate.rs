//! Mean and standard error across replications.

use super::runner::{RoundRecord, METRICS};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Per-round statistics; `rounds[i]` is the round of entry `i` of every
/// metric series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateSeries {
    pub replications: usize,
    pub rounds: Vec<usize>,
    pub metrics: Vec<MetricSeries>,
}

impl AggregateSeries {
    pub fn metric(&self, name: &str) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Sample mean and `sd/√n` (0 when `n = 1`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregates every round.
pub fn aggregate(records: &[Vec<RoundRecord>]) -> Result<AggregateSeries, HarnessError> {
    aggregate_every(records, 1)
}

/// Aggregates rounds `t` with `t % log_every == 0`, plus the last round.
pub fn aggregate_every(records: &[Vec<RoundRecord>], log_every: usize) -> Result<AggregateSeries, HarnessError> {
    let Some(first) = records.first() else {
        return Ok(AggregateSeries::default());
    };
    let horizon = first.len();
    if let Some(bad) = records.iter().find(|r| r.len() != horizon) {
        return Err(HarnessError::LengthMismatch { expected: horizon, got: bad.len() });
    }
    let every = log_every.max(1);
    let keep: Vec<usize> = (0..horizon)
        .filter(|&i| first[i].t % every == 0 || i + 1 == horizon)
        .collect();
    let rounds = keep.iter().map(|&i| first[i].t).collect();
    let metrics = METRICS
        .iter()
        .map(|&name| {
            let (mean, stderr) = keep
                .iter()
                .map(|&i| {
                    let vals: Vec<f64> = records
                        .iter()
                        .map(|rep| rep[i].metric(name).expect("known metric"))
                        .collect();
                    mean_stderr(&vals)
                })
                .unzip();
            MetricSeries { name: name.to_string(), mean, stderr }
        })
        .collect();
    Ok(AggregateSeries { replications: records.len(), rounds, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, cum: f64) -> RoundRecord {
        RoundRecord {
            t,
            chosen_arm: 0,
            reward: 0.0,
            inst_regret: 0.0,
            cum_regret: cum,
            fp: 0,
            fn_: 0,
            l2_err: 0.0,
            lambda_t: 0.0,
            support_size: 0,
            kkt_residual: 0.0,
            solver_flags: 0,
        }
    }

    #[test]
    fn single_replication() {
        let s = aggregate(&[vec![rec(1, 3.0), rec(2, 4.5)]]).unwrap();
        let m = s.metric("cum_regret").unwrap();
        assert_eq!(m.mean, vec![3.0, 4.5]);
        assert_eq!(m.stderr, vec![0.0, 0.0]);
    }

    #[test]
    fn identical_replications() {
        let r = vec![rec(1, 2.5)];
        let s = aggregate(&[r.clone(), r]).unwrap();
        assert_eq!(s.metric("cum_regret").unwrap().stderr, vec![0.0]);
    }

    #[test]
    fn zero_and_two() {
        let s = aggregate(&[vec![rec(1, 0.0)], vec![rec(1, 2.0)]]).unwrap();
        let m = s.metric("cum_regret").unwrap();
        assert_eq!(m.mean, vec![1.0]);
        assert!((m.stderr[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        let err = aggregate(&[vec![rec(1, 0.0)], vec![rec(1, 0.0), rec(2, 0.0)]]).unwrap_err();
        assert!(matches!(err, HarnessError::LengthMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn thinning_keeps_last_round() {
        let r: Vec<RoundRecord> = (1..=7).map(|t| rec(t, t as f64)).collect();
        let s = aggregate_every(&[r], 3).unwrap();
        assert_eq!(s.rounds, vec![3, 6, 7]);
    }
}
