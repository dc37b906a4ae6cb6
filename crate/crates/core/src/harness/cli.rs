//! Command line: `run`, `sweep`, `diagnose` and `bound`.
//!
//! Exit codes: 0 on success, 1 for configuration and runtime errors, 2 for
//! usage errors.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::aggregate::aggregate_every;
use super::config::ExperimentConfig;
use super::output::{emit_outputs, format_float, write_replications};
use super::runner::{run_experiment, run_replication_with};
use super::sweep::{apply_point, grid, point_label, sweep_header, sweep_row, SweepAxis};
use super::HarnessError;
use crate::diagnostics::{
    compatibility_constant, margin_probe, restricted_min_eigenvalue, theorem_bound, CompatibilityQuery, TheoryConstants,
};
use crate::environment::{generate_contexts, generate_theta, EnvironmentSpec};
use crate::sparse_linear::Support;
use crate::streams::{stream_seed, Stream, StreamSeeds};

#[derive(Debug, Parser)]
#[command(name = "sparsebandit", version, about = "Sparse high-dimensional contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its result files.
    Run(RunArgs),
    /// Run a cartesian grid of experiments.
    Sweep(SweepArgs),
    /// Report model-condition diagnostics for a configured environment.
    Diagnose(DiagnoseArgs),
    /// Evaluate the regret upper bound.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write regret.svg.
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Grid axis `key=v1,v2,...`; repeat for a cartesian product.
    #[arg(long = "vary", required = true)]
    vary: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Replication whose θ and history are inspected.
    #[arg(long, default_value_t = 0)]
    replication: u64,
    /// Context draws for the margin probe and the covariance estimate.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.05, 0.1, 0.5, 1.0])]
    kappa: Vec<f64>,
    /// Coordinates (support first) kept for the compatibility estimate.
    #[arg(long, default_value_t = 8)]
    compat_coords: usize,
    #[arg(long, default_value_t = 2)]
    compat_resolution: usize,
    /// Skip the policy run (and the restricted eigenvalues that need it).
    #[arg(long)]
    no_run: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Takes K, s0, s_A, d and σ from this config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "T")]
    horizon: u64,
    /// Bound under the margin condition (default).
    #[arg(long, overrides_with = "no_margin")]
    margin: bool,
    /// Bound without the margin condition.
    #[arg(long)]
    no_margin: bool,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    s0: Option<usize>,
    #[arg(long)]
    s_a: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Bound on ‖θ‖₂; defaults to 2√s0, the largest norm the generator can
    /// produce.
    #[arg(long)]
    s2: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    phi0_sq: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    cm: f64,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long)]
    h0: Option<u64>,
}

/// Entry point; returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli`] with explicit output streams.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(p) => p,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match parsed.command {
        Command::Run(a) => cmd_run(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Diagnose(a) => cmd_diagnose(&a, out),
        Command::Bound(a) => cmd_bound(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn load_with_overrides(a: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut c = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        c.experiment.base_seed = s;
    }
    if let Some(r) = a.replications {
        c.experiment.replications = r;
    }
    if let Some(w) = a.workers {
        c.experiment.workers = w;
    }
    if let Some(o) = &a.out {
        c.experiment.output_dir = o.clone();
    }
    c.validate()
        .map_err(|e| HarnessError::Config { path: a.config.clone(), message: e.to_string() })?;
    Ok(c)
}

fn io(path: &std::path::Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io { path: path.to_path_buf(), source: e }
}

/// Runs one config and writes its files; returns the aggregate.
fn run_and_emit(config: &ExperimentConfig, plot: bool) -> Result<super::AggregateSeries, HarnessError> {
    let records = run_experiment(config)?;
    let series = aggregate_every(&records, config.experiment.log_every)?;
    emit_outputs(&series, config, plot)?;
    let finals: Vec<_> = records.iter().filter_map(|r| r.last().cloned()).collect();
    write_replications(&config.experiment.output_dir, &finals)?;
    Ok(series)
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let config = load_with_overrides(a)?;
    let series = run_and_emit(&config, a.plot)?;
    let dir = &config.experiment.output_dir;
    if let Some(m) = series.metric("cum_regret") {
        if let (Some(mu), Some(se)) = (m.mean.last(), m.stderr.last()) {
            let t = series.rounds.last().copied().unwrap_or(0);
            writeln!(out, "{} t={t} cum_regret={mu:.4} (stderr {se:.4}) over {} replications", config.policy.name, series.replications)
                .map_err(io(dir))?;
        }
    }
    writeln!(out, "wrote {}", dir.display()).map_err(io(dir))?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let base = load_with_overrides(&a.run)?;
    let axes = a
        .vary
        .iter()
        .map(|s| s.parse::<SweepAxis>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Config { path: a.run.config.clone(), message: e.to_string() })?;
    let points = grid(&axes);
    // Validate the whole grid before running anything.
    let configs = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut c = apply_point(&base, p)?;
            c.experiment.output_dir = base.experiment.output_dir.join(point_label(i, p));
            Ok(c)
        })
        .collect::<Result<Vec<_>, HarnessError>>()
        .map_err(|e| HarnessError::Config { path: a.run.config.clone(), message: e.to_string() })?;
    let root = &base.experiment.output_dir;
    std::fs::create_dir_all(root).map_err(io(root))?;
    let mut csv = sweep_header(&axes);
    csv.push('\n');
    for (i, (point, config)) in points.iter().zip(&configs).enumerate() {
        let series = run_and_emit(config, a.run.plot)?;
        let row = sweep_row(i, point, &series);
        writeln!(out, "{row}").map_err(io(root))?;
        csv.push_str(&row);
        csv.push('\n');
    }
    let path = root.join("sweep.csv");
    std::fs::write(&path, csv).map_err(io(&path))?;
    writeln!(out, "wrote {}", path.display()).map_err(io(&path))?;
    Ok(())
}

fn cmd_diagnose(a: &DiagnoseArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        config.experiment.base_seed = s;
    }
    if let Some(w) = a.workers {
        config.experiment.workers = w.max(1);
    }
    let report = diagnose(&config, a)?;
    match a.format {
        Format::Text => {
            for (k, v) in &report {
                writeln!(out, "{k}: {v}").map_err(io(&a.config))?;
            }
        }
        Format::Csv => {
            writeln!(out, "key,value").map_err(io(&a.config))?;
            for (k, v) in &report {
                writeln!(out, "{k},{v}").map_err(io(&a.config))?;
            }
        }
    }
    Ok(())
}

fn support_string(s: &Support) -> String {
    s.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" ")
}

fn diagnose(config: &ExperimentConfig, a: &DiagnoseArgs) -> Result<Vec<(String, String)>, HarnessError> {
    let env = &config.environment;
    let base_seed = config.experiment.base_seed;
    let seeds = StreamSeeds::for_replication(base_seed, a.replication);
    let truth = generate_theta(env, seeds.theta)?;
    let diag_seed = stream_seed(base_seed, a.replication, Stream::Diagnostics);
    let mut report: Vec<(String, String)> = vec![
        ("policy".into(), config.policy.name.to_string()),
        ("replication".into(), a.replication.to_string()),
        ("support".into(), support_string(&truth.support)),
        ("s0".into(), truth.support.len().to_string()),
        ("theta_l2".into(), format_float(truth.theta.l2_norm())),
        ("theta_min".into(), format_float(truth.theta_min)),
    ];

    // Compatibility constant of the context covariance on a block made of
    // the support plus a few off-support coordinates.
    let mut coords: Vec<usize> = truth.support.iter().copied().collect();
    coords.extend((0..env.dim).filter(|j| !truth.support.contains(j)).take(a.compat_coords.saturating_sub(coords.len())));
    coords.sort_unstable();
    let m = coords.len();
    let mut cov = vec![0.0; m * m];
    let mut rows = 0usize;
    for s in 0..a.samples {
        let ctx = generate_contexts(env, diag_seed, s as u64)?;
        for row in ctx.iter_rows() {
            rows += 1;
            for (i, &ci) in coords.iter().enumerate() {
                for (j, &cj) in coords.iter().enumerate() {
                    cov[i * m + j] += row[ci] * row[cj];
                }
            }
        }
    }
    if rows > 0 {
        cov.iter_mut().for_each(|v| *v /= rows as f64);
        // Exact symmetry despite summation order.
        for i in 0..m {
            for j in 0..i {
                cov[i * m + j] = cov[j * m + i];
            }
        }
        let s0_local: Support = coords
            .iter()
            .enumerate()
            .filter(|(_, c)| truth.support.contains(c))
            .map(|(i, _)| i)
            .collect();
        let query = CompatibilityQuery::new(m, cov, s0_local)?;
        let est = compatibility_constant(&query, a.compat_resolution)?;
        report.push(("compat_coords".into(), m.to_string()));
        report.push(("compat_phi2_upper".into(), format_float(est.value)));
        report.push(("compat_method".into(), format!("{:?}", est.method).replace(',', ";")));
    }

    let probe = margin_probe(env, &truth, &a.kappa, a.samples, diag_seed ^ 1, config.experiment.workers)?;
    for (k, p) in probe {
        report.push((format!("margin_prob_kappa_{}", format_float(k)), format_float(p)));
    }

    if !a.no_run {
        let horizon = config.experiment.horizon;
        let mut last = None;
        run_replication_with(config, a.replication, |policy, rec| {
            if rec.t == horizon {
                let history = policy.history().map(|h| h.design().clone());
                last = Some((rec, history, policy.support()));
            }
        })?;
        if let Some((rec, history, est_support)) = last {
            report.push(("final_cum_regret".into(), format_float(rec.cum_regret)));
            report.push(("final_fp".into(), rec.fp.to_string()));
            report.push(("final_fn".into(), rec.fn_.to_string()));
            report.push(("final_l2_err".into(), format_float(rec.l2_err)));
            report.push(("estimated_support".into(), support_string(&est_support)));
            if let Some(h) = history {
                let on_true = restricted_min_eigenvalue(&h, &truth.support)?;
                report.push(("lambda_min_true_support".into(), format_float(on_true)));
                if !est_support.is_empty() {
                    let on_est = restricted_min_eigenvalue(&h, &est_support)?;
                    report.push(("lambda_min_estimated_support".into(), format_float(on_est)));
                }
            }
        }
    }
    Ok(report)
}

fn cmd_bound(a: &BoundArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let mut spec = match &a.config {
        Some(p) => ExperimentConfig::load(p)?.environment,
        None => EnvironmentSpec::default(),
    };
    if let Some(k) = a.arms {
        spec.arms = k;
    }
    if let Some(s) = a.s0 {
        spec.sparsity = s;
    }
    if let Some(s) = a.s_a {
        spec.s_a = s;
    }
    if let Some(d) = a.dim {
        spec.dim = d;
    }
    if let Some(s) = a.sigma {
        spec.sigma = s;
    }
    let s2 = a.s2.unwrap_or(2.0 * (spec.sparsity as f64).sqrt());
    let mut constants =
        TheoryConstants::derive(a.phi0_sq, a.alpha, a.cm, spec.sigma, s2, spec.sparsity, spec.s_a, spec.dim)?;
    if let Some(c0) = a.c0 {
        constants.c0 = c0;
    }
    if let Some(t) = a.tau {
        constants.tau = t;
    }
    if let Some(h) = a.h0 {
        constants.h0 = h;
    }
    let with_margin = !a.no_margin;
    let value = theorem_bound(&constants, &spec, a.horizon, with_margin)?;
    let path = PathBuf::from("<stdout>");
    writeln!(
        out,
        "bound({}) T={} K={} s0={} s_A={} d={}: {}",
        if with_margin { "margin" } else { "no-margin" },
        a.horizon,
        spec.arms,
        spec.sparsity,
        format_float(spec.s_a),
        spec.dim,
        format_float(value)
    )
    .map_err(io(&path))?;
    writeln!(
        out,
        "constants: C0={} tau={} h0={} phi0_sq={} alpha={} Cm={} sigma={} s2={}",
        format_float(constants.c0),
        constants.tau,
        constants.h0,
        format_float(constants.phi0_sq),
        format_float(constants.alpha),
        format_float(constants.cm),
        format_float(constants.sigma),
        format_float(constants.s2)
    )
    .map_err(io(&path))?;
    Ok(())
}
