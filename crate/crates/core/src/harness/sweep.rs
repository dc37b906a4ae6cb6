//! Cartesian parameter grids over a base config.
//!
//! A grid axis is `key=v1,v2,...` where `key` is a dotted path into the
//! config (`environment.s_a`, `policy.lambda0`, `experiment.horizon`, ...).
//! The pseudo-key `policy.lambda0_ratio` sets `lambda0` to the ratio times
//! the policy's tuned default.

use std::fmt::Write as _;

use super::aggregate::AggregateSeries;
use super::config::ExperimentConfig;
use super::output::format_float;
use super::HarnessError;

pub const LAMBDA0_RATIO_KEY: &str = "policy.lambda0_ratio";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for SweepAxis {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| HarnessError::InvalidConfig(format!("expected key=v1,v2,... in '{s}'")))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if key.trim().is_empty() || values.is_empty() {
            return Err(HarnessError::InvalidConfig(format!("empty key or value list in '{s}'")));
        }
        Ok(Self { key: key.trim().to_string(), values })
    }
}

/// One grid point: the chosen value per axis, in axis order.
pub type GridPoint = Vec<(String, String)>;

/// All combinations, the last axis varying fastest.
pub fn grid(axes: &[SweepAxis]) -> Vec<GridPoint> {
    let mut points: Vec<GridPoint> = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    toml::Value::String(raw.to_string())
}

/// `base` with the point's values applied, resolved and validated.
pub fn apply_point(base: &ExperimentConfig, point: &GridPoint) -> Result<ExperimentConfig, HarnessError> {
    let mut doc = toml::Value::try_from(base).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let mut ratio = None;
    for (key, raw) in point {
        if key == LAMBDA0_RATIO_KEY {
            let r: f64 = raw
                .parse()
                .map_err(|_| HarnessError::InvalidConfig(format!("{key} needs a number, got '{raw}'")))?;
            ratio = Some(r);
            continue;
        }
        let mut parts = key.split('.').peekable();
        let mut node = &mut doc;
        while let Some(part) = parts.next() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| HarnessError::InvalidConfig(format!("'{key}' does not name a config field")))?;
            if parts.peek().is_none() {
                table.insert(part.to_string(), parse_scalar(raw));
                break;
            }
            node = table
                .get_mut(part)
                .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown section in '{key}'")))?;
        }
    }
    let mut config: ExperimentConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::InvalidConfig(e.to_string()))?;
    if let Some(r) = ratio {
        let star = config.policy.name.default_lambda0().ok_or_else(|| {
            HarnessError::InvalidConfig(format!("{LAMBDA0_RATIO_KEY} needs a LASSO policy, got {}", config.policy.name))
        })?;
        config.policy.lambda0 = Some(r * star);
    }
    config.resolved()
}

/// Directory name of a grid point.
pub fn point_label(index: usize, point: &GridPoint) -> String {
    let mut label = format!("point{index:03}");
    for (k, v) in point {
        let key = k.rsplit('.').next().unwrap_or(k);
        let _ = write!(label, "_{key}-{v}");
    }
    label.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Header of `sweep.csv` for the given axes.
pub fn sweep_header(axes: &[SweepAxis]) -> String {
    let mut h = String::from("point");
    for a in axes {
        h.push(',');
        h.push_str(&a.key);
    }
    h.push_str(",replications,t,cum_regret_mean,cum_regret_stderr,fp_mean,fn_mean,l2_err_mean,l2_err_stderr,solver_flags_mean");
    h
}

/// One `sweep.csv` row: final-round statistics of a grid point.
pub fn sweep_row(index: usize, point: &GridPoint, series: &AggregateSeries) -> String {
    let mut row = index.to_string();
    for (_, v) in point {
        row.push(',');
        row.push_str(v);
    }
    let last = |name: &str| -> (String, String) {
        match series.metric(name) {
            Some(m) if !m.mean.is_empty() => {
                (format_float(*m.mean.last().expect("nonempty")), format_float(*m.stderr.last().expect("nonempty")))
            }
            _ => ("NaN".into(), "NaN".into()),
        }
    };
    let t = series.rounds.last().copied().unwrap_or(0);
    let (cr, cr_se) = last("cum_regret");
    let (l2, l2_se) = last("l2_err");
    let _ = write!(
        row,
        ",{},{t},{cr},{cr_se},{},{},{l2},{l2_se},{}",
        series.replications,
        last("fp").0,
        last("fn").0,
        last("solver_flags").0
    );
    row
}
