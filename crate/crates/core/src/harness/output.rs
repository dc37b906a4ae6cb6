//! Result files: `rounds.csv`, `config.echo`, `replications.csv` and an
//! optional `regret.svg`.
//!
//! `rounds.csv` is long format with header `t,metric,mean,stderr`, one row
//! per (round, metric), rounds ascending and metrics in a fixed order.
//! Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::aggregate::{AggregateSeries, MetricSeries};
use super::config::ExperimentConfig;
use super::runner::RoundRecord;
use super::HarnessError;

pub const ROUNDS_HEADER: &str = "t,metric,mean,stderr";

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), source: e }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn rounds_csv(series: &AggregateSeries) -> String {
    let mut out = String::with_capacity(64 * series.rounds.len() * series.metrics.len().max(1));
    out.push_str(ROUNDS_HEADER);
    out.push('\n');
    for (i, t) in series.rounds.iter().enumerate() {
        for m in &series.metrics {
            let _ = writeln!(out, "{t},{},{},{}", m.name, format_float(m.mean[i]), format_float(m.stderr[i]));
        }
    }
    out
}

/// Inverse of [`rounds_csv`]. The replication count is not stored in the
/// file and is returned as 0.
pub fn parse_rounds_csv(text: &str) -> Result<AggregateSeries, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(ROUNDS_HEADER) => {}
        other => return Err(HarnessError::Parse(format!("bad header {other:?}"))),
    }
    let mut series = AggregateSeries::default();
    for (n, line) in lines.enumerate() {
        let bad = |what: &str| HarnessError::Parse(format!("line {}: {what}: {line:?}", n + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let t: usize = fields[0].parse().map_err(|_| bad("bad round"))?;
        let mean: f64 = fields[2].parse().map_err(|_| bad("bad mean"))?;
        let stderr: f64 = fields[3].parse().map_err(|_| bad("bad stderr"))?;
        if series.rounds.last() != Some(&t) {
            if series.rounds.last().is_some_and(|&last| last > t) {
                return Err(bad("rounds out of order"));
            }
            series.rounds.push(t);
        }
        let idx = match series.metrics.iter().position(|m| m.name == fields[1]) {
            Some(i) => i,
            None => {
                if series.rounds.len() > 1 {
                    return Err(bad("metric missing from earlier rounds"));
                }
                series.metrics.push(MetricSeries { name: fields[1].to_string(), mean: Vec::new(), stderr: Vec::new() });
                series.metrics.len() - 1
            }
        };
        let m = &mut series.metrics[idx];
        if m.mean.len() + 1 != series.rounds.len() {
            return Err(bad("duplicate or missing metric row"));
        }
        m.mean.push(mean);
        m.stderr.push(stderr);
    }
    if series.metrics.iter().any(|m| m.mean.len() != series.rounds.len()) {
        return Err(HarnessError::Parse("incomplete final round".into()));
    }
    Ok(series)
}

/// Final-round metrics of every replication.
pub fn replications_csv(finals: &[RoundRecord]) -> String {
    let mut out = String::from("replication,t,cum_regret,fp,fn,l2_err,support_size,solver_flags\n");
    for (i, r) in finals.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            r.t,
            format_float(r.cum_regret),
            r.fp,
            r.fn_,
            format_float(r.l2_err),
            r.support_size,
            r.solver_flags
        );
    }
    out
}

/// Line chart of mean cumulative regret with a ±1 stderr band.
pub fn regret_svg(series: &AggregateSeries, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    let Some(m) = series.metric("cum_regret") else {
        svg.push_str("</svg>\n");
        return svg;
    };
    if series.rounds.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let t_max = *series.rounds.last().expect("nonempty") as f64;
    let y_max = m
        .mean
        .iter()
        .zip(&m.stderr)
        .map(|(a, b)| a + b)
        .fold(0.0, f64::max)
        .max(1e-12);
    let x = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / t_max.max(1.0);
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * v / y_max;
    let upper: Vec<String> = series
        .rounds
        .iter()
        .zip(m.mean.iter().zip(&m.stderr))
        .map(|(&t, (mu, se))| format!("{:.2},{:.2}", x(t), y(mu + se)))
        .collect();
    let lower: Vec<String> = series
        .rounds
        .iter()
        .zip(m.mean.iter().zip(&m.stderr))
        .rev()
        .map(|(&t, (mu, se))| format!("{:.2},{:.2}", x(t), y((mu - se).max(0.0))))
        .collect();
    let line: Vec<String> = series
        .rounds
        .iter()
        .zip(&m.mean)
        .map(|(&t, mu)| format!("{:.2},{:.2}", x(t), y(*mu)))
        .collect();
    let _ = writeln!(
        svg,
        "<polygon points=\"{} {}\" fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\"/>",
        upper.join(" "),
        lower.join(" ")
    );
    let _ = writeln!(svg, "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>", line.join(" "));
    let _ = writeln!(
        svg,
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{0}\" stroke=\"black\"/>",
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t (max {})</text>",
        W / 2.0,
        H - 15.0,
        t_max
    );
    let _ = writeln!(
        svg,
        "<text x=\"15\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 15 {})\">cumulative regret (max {:.3})</text>",
        H / 2.0,
        H / 2.0,
        y_max
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Paths written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub rounds: PathBuf,
    pub config_echo: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Writes `rounds.csv`, `config.echo` and, with `plot`, `regret.svg` into
/// the configured output directory.
pub fn emit_outputs(series: &AggregateSeries, config: &ExperimentConfig, plot: bool) -> Result<OutputFiles, HarnessError> {
    let dir = &config.experiment.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let rounds = dir.join("rounds.csv");
    write_file(&rounds, &rounds_csv(series))?;
    let config_echo = dir.join("config.echo");
    write_file(&config_echo, &config.to_toml_string())?;
    let plot = if plot {
        let path = dir.join("regret.svg");
        let title = format!("{} (K = {}, d = {})", config.policy.name, config.environment.arms, config.environment.dim);
        write_file(&path, &regret_svg(series, &title))?;
        Some(path)
    } else {
        None
    };
    Ok(OutputFiles { rounds, config_echo, plot })
}

pub fn write_replications(dir: &Path, finals: &[RoundRecord]) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("replications.csv");
    write_file(&path, &replications_csv(finals))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(t: usize) -> AggregateSeries {
        AggregateSeries {
            replications: 2,
            rounds: (1..=t).collect(),
            metrics: vec![MetricSeries {
                name: "cum_regret".into(),
                mean: (0..t).map(|i| i as f64 * 0.1).collect(),
                stderr: (0..t).map(|i| 1.0 / (i as f64 + 3.0)).collect(),
            }],
        }
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(rounds_csv(&AggregateSeries::default()), "t,metric,mean,stderr\n");
    }

    #[test]
    fn row_count() {
        let csv = rounds_csv(&series(3));
        assert_eq!(csv.lines().count(), 4);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn round_trip() {
        let s = series(5);
        let mut back = parse_rounds_csv(&rounds_csv(&s)).unwrap();
        back.replications = s.replications;
        assert_eq!(back, s);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_rounds_csv("a,b\n").is_err());
        assert!(parse_rounds_csv("t,metric,mean,stderr\n1,x,0.5\n").is_err());
        assert!(parse_rounds_csv("t,metric,mean,stderr\n2,x,0.5,0\n1,x,0.5,0\n").is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = regret_svg(&series(4), "a < b");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
    }
}
