use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use chrono::Utc;
use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use wise_core::baselines::sdr_round_problem;
use wise_core::metrics::MetricBundle;
use wise_core::refwave::ReferenceSpec;
use wise_core::scenario::{angle_grid, load_scenario};
use wise_core::spatial::beampattern_table;
use wise_core::spectral::{spectrum_table, stopband_bins};
use wise_core::wise::{run_problem, write_history_csv, Problem, RunResult, TerminationReason};
use wise_core::{metrics, Scenario, WiseError};

const TOL_ENV: &str = "WISE_SOLVER_TOL";
const BEAMPATTERN_STEP_DEG: f64 = 0.5;

#[derive(Parser)]
#[command(name = "wise", version, about = "Constant-modulus MIMO radar waveform design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Wise,
    Sdr,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "wise")]
    method: Method,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed for random reference waveforms.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the conic solver tolerance.
    #[arg(long, env = TOL_ENV)]
    solver_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one design and write all tables.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run one design per similarity bound and write a trend table.
    SweepDelta {
        #[command(flatten)]
        common: Common,
        /// Comma-separated similarity bounds.
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Serialize)]
struct Manifest {
    tool_version: &'static str,
    method: Method,
    config_path: String,
    output_dir: String,
    seed: u64,
    solver_tol: f64,
    started_at: String,
    finished_at: String,
    termination: TerminationReason,
    scenario: String,
    checksums: Vec<(String, String)>,
}

#[derive(Serialize)]
struct MetricsReport<'a> {
    method: Method,
    termination: TerminationReason,
    converged: bool,
    iterations: usize,
    final_xi: f64,
    final_gap: f64,
    pre_round_xi: f64,
    pre_round_gap: f64,
    relaxed_objective: f64,
    relaxed_lifted_islr: f64,
    islr_lower_bound: f64,
    lifted_islr: f64,
    projection_delta: f64,
    pre_projection_cm_deviation: f64,
    failure: Option<&'a str>,
    #[serde(flatten)]
    metrics: &'a MetricBundle,
}

#[derive(Serialize)]
struct TrendRow {
    delta: f64,
    islr_db: f64,
    peak_cross_db: f64,
    similarity_distance: f64,
    mask_excess: f64,
}

const ARTIFACTS: [&str; 5] = ["history.csv", "beampattern.csv", "spectrum.csv", "correlation.csv", "metrics.json"];

fn exit_code(reason: TerminationReason) -> u8 {
    match reason {
        TerminationReason::Xi | TerminationReason::Gap | TerminationReason::Both | TerminationReason::Rounded => 0,
        TerminationReason::MaxIters => 2,
        TerminationReason::Infeasible => 3,
    }
}

fn prepare_scenario(common: &Common) -> anyhow::Result<Scenario> {
    if !common.config.is_file() {
        bail!("scenario file not found: {}", common.config.display());
    }
    let mut scenario = load_scenario(&common.config).map_err(anyhow::Error::from)?;
    if let ReferenceSpec::RandomUnimodular { seed } = &mut scenario.similarity.reference {
        *seed = common.seed;
    }
    if let Some(tol) = common.solver_tol {
        scenario.solver.solver_feas_tol = tol;
    }
    scenario.validate().map_err(WiseError::Invalid)?;
    Ok(scenario)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn write_outputs(problem: &Problem, result: &RunResult, method: Method, out: &Path) -> anyhow::Result<()> {
    let scenario = &problem.scenario;
    let s = &result.s_star;

    write_history_csv(fs::File::create(out.join("history.csv"))?, &result.history)?;

    let bp = beampattern_table(s, &angle_grid(BEAMPATTERN_STEP_DEG), scenario.array.spacing_ratio)?;
    write_csv(&out.join("beampattern.csv"), &bp)?;

    let bins = stopband_bins(scenario.code_length(), &scenario.mask.stopbands);
    write_csv(&out.join("spectrum.csv"), &spectrum_table(s, &bins, scenario.mask.gamma))?;

    write_csv(&out.join("correlation.csv"), &metrics::correlation_level_db(s).rows)?;

    let last = result.history.last().expect("history holds the relaxed solve");
    let report = MetricsReport {
        method,
        termination: result.reason,
        converged: result.converged,
        iterations: last.index,
        final_xi: last.xi,
        final_gap: last.gap,
        pre_round_xi: result.initial_diagnostics.xi,
        pre_round_gap: result.initial_diagnostics.gap,
        relaxed_objective: result.relaxed_objective,
        relaxed_lifted_islr: result.relaxed_lifted_islr,
        islr_lower_bound: result.islr_lower_bound(&problem.ams),
        lifted_islr: result.lifted_islr,
        projection_delta: result.projection_delta,
        pre_projection_cm_deviation: metrics::constant_modulus_deviation(&result.s_raw),
        failure: result.failure.as_deref(),
        metrics: &result.metrics,
    };
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(())
}

/// Run one scenario into `out`; returns the termination reason and metrics.
fn execute(
    scenario: &Scenario,
    common: &Common,
    out: &Path,
) -> anyhow::Result<(TerminationReason, MetricBundle)> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let started_at = Utc::now().to_rfc3339();
    let problem = Problem::new(scenario)?;
    let result = match common.method {
        Method::Wise => run_problem(&problem)?,
        Method::Sdr => sdr_round_problem(&problem)?,
    };
    write_outputs(&problem, &result, common.method, out)?;
    let checksums = ARTIFACTS
        .iter()
        .map(|name| Ok((name.to_string(), sha256_file(&out.join(name))?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        method: common.method,
        config_path: common.config.display().to_string(),
        output_dir: out.display().to_string(),
        seed: common.seed,
        solver_tol: scenario.solver.solver_feas_tol,
        started_at,
        finished_at: Utc::now().to_rfc3339(),
        termination: result.reason,
        scenario: scenario.to_toml(),
        checksums,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    info!("{}: {:?}, islr {:.3} dB", out.display(), result.reason, result.metrics.islr_db);
    Ok((result.reason, result.metrics))
}

fn cmd_run(common: &Common) -> anyhow::Result<u8> {
    let scenario = prepare_scenario(common)?;
    let (reason, _) = execute(&scenario, common, &common.out)?;
    Ok(exit_code(reason))
}

fn cmd_sweep_delta(common: &Common, deltas: &[f64], jobs: usize) -> anyhow::Result<u8> {
    let base = prepare_scenario(common)?;
    let runs: Vec<(f64, Scenario)> = deltas.iter().map(|&d| (d, base.with_delta(d))).collect();
    for (_, s) in &runs {
        s.validate().map_err(WiseError::Invalid)?;
    }
    fs::create_dir_all(&common.out)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let outcomes: Vec<anyhow::Result<(TerminationReason, MetricBundle)>> = pool.install(|| {
        runs.par_iter()
            .enumerate()
            .map(|(i, (d, s))| execute(s, common, &common.out.join(format!("delta_{i:02}_{d:.4}"))))
            .collect()
    });

    let mut rows = Vec::with_capacity(runs.len());
    let mut code = 0;
    for ((delta, _), outcome) in runs.iter().zip(outcomes) {
        let (reason, m) = outcome?;
        code = code.max(exit_code(reason));
        rows.push(TrendRow {
            delta: *delta,
            islr_db: m.islr_db,
            peak_cross_db: m.peak_cross_db,
            similarity_distance: m.similarity_distance,
            mask_excess: m.mask_excess,
        });
    }
    write_csv(&common.out.join("trend.csv"), &rows)?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { common } => cmd_run(common),
        Command::SweepDelta { common, deltas, jobs } => cmd_sweep_delta(common, deltas, *jobs),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => match e.downcast_ref::<WiseError>() {
            Some(WiseError::Infeasible { .. }) => {
                error!("{e:#}");
                ExitCode::from(3)
            }
            _ => {
                error!("{e:#}");
                ExitCode::from(1)
            }
        },
    }
}
