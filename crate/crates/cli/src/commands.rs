use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use ues_core::delay_es::{run_delay_scenario, validate_params_delay};
use ues_core::diffusion_es::{run_diffusion_scenario, validate_params_diffusion};
use ues_core::engine::{crank_nicolson_heat_step, format_sig17, rk4_step, Field, RightBoundary, Trajectory};
use ues_core::oracle::{
    averaged_diffusion_rhs, averaged_theta_delay, eta_av_limit, fit_decay_rate, integrate_averaged_delay,
    reweighted_residual, AveragedDiffusionState, ReactionDiffusionExact,
};
use ues_core::validation::ValidationReport;

use crate::config::{Mode, ScenarioConfig};
use crate::error::CliError;
use crate::output::{resolve, trajectory_csv, write_atomic, Table};

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Options {
    pub out_dir: PathBuf,
    pub canonical: bool,
}

#[derive(Debug, Serialize)]
pub struct ConditionSummary {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub rate: f64,
    pub r_squared: f64,
    pub peaks: usize,
    pub window: (f64, f64),
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub mode: String,
    pub samples: usize,
    pub final_time: f64,
    pub final_input: f64,
    pub final_estimate: f64,
    pub final_input_error: f64,
    pub final_output_error: f64,
    pub decay_fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_fit_error: Option<String>,
    /// `sup e^(λt)·|θ̂ − θ*|` over the fit window.
    pub reweighted_residual: f64,
    pub conditions: Vec<ConditionSummary>,
    pub conditions_passed: bool,
    pub csv_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub config: String,
}

fn conditions(report: &ValidationReport) -> Vec<ConditionSummary> {
    report
        .checks
        .iter()
        .map(|c| ConditionSummary { name: c.name.to_string(), lhs: c.lhs, rhs: c.rhs, margin: c.margin, passed: c.passed })
        .collect()
}

pub fn condition_report(config: &ScenarioConfig) -> ValidationReport {
    match config.mode {
        Mode::Delay | Mode::AveragedDelay => validate_params_delay(&config.delay_params(), config.hessian),
        Mode::Diffusion | Mode::AveragedDiffusion => {
            validate_params_diffusion(config.k, &config.dither(), config.omega_h, config.hessian)
        }
    }
}

/// Fit window: the final third of the horizon.
fn fit_window(horizon: f64) -> (f64, f64) {
    (2.0 * horizon / 3.0, horizon)
}

/// Runs a closed loop, returning the trajectory. Parameter errors are config errors.
fn simulate(config: &ScenarioConfig) -> Result<Trajectory, CliError> {
    match config.mode {
        Mode::Delay => {
            let params = config.delay_params();
            params.check().map_err(|e| CliError::Config(e.to_string()))?;
            Ok(run_delay_scenario(&params)?)
        }
        Mode::Diffusion => {
            let params = config.diffusion_params();
            params.check().map_err(|e| CliError::Config(e.to_string()))?;
            Ok(run_diffusion_scenario(&params)?)
        }
        other => Err(CliError::Usage(format!("mode `{other}` has no closed loop; use the `oracle` subcommand"))),
    }
}

fn summarize(config: &ScenarioConfig, traj: &Trajectory, csv_path: &Path, runtime: Option<f64>) -> RunSummary {
    let last = traj.last().expect("a run records at least its initial sample");
    let window = fit_window(config.horizon);
    let (decay_fit, decay_fit_error) = match fit_decay_rate(traj, Field::Estimate, config.theta_star, window) {
        Ok(fit) => (Some(FitSummary { rate: fit.rate, r_squared: fit.r_squared, peaks: fit.peaks, window }), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = condition_report(config);
    RunSummary {
        mode: config.mode.to_string(),
        samples: traj.len(),
        final_time: last.t,
        final_input: last.theta,
        final_estimate: last.estimate,
        final_input_error: (last.theta - config.theta_star).abs(),
        final_output_error: (last.y - config.y_star).abs(),
        decay_fit,
        decay_fit_error,
        reweighted_residual: reweighted_residual(traj, Field::Estimate, config.theta_star, config.lambda, window),
        conditions_passed: report.all_passed(),
        conditions: conditions(&report),
        csv_path: csv_path.display().to_string(),
        runtime_seconds: runtime,
        config: config.to_text(),
    }
}

fn json(value: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("summary serializes");
    bytes.push(b'\n');
    bytes
}

pub fn cmd_run(config: &ScenarioConfig, opts: &Options) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let report = condition_report(config);
    for failed in report.failures() {
        eprintln!("warning: condition {} violated (margin {:+.4e})", failed.name, failed.margin);
    }
    let traj = simulate(config)?;
    let runtime = (!opts.canonical).then(|| started.elapsed().as_secs_f64());
    let mode = config.mode.as_str();
    let csv_path = resolve(&opts.out_dir, config.csv_path.as_deref(), &format!("{mode}.csv"));
    let summary_path = resolve(&opts.out_dir, config.summary_path.as_deref(), &format!("{mode}.summary.json"));
    write_atomic(&csv_path, &trajectory_csv(&traj))?;
    let summary = summarize(config, &traj, &csv_path, runtime);
    write_atomic(&summary_path, &json(&summary))?;
    println!(
        "{mode}: |θ(T) − θ*| = {:.3e}, |y(T) − y*| = {:.3e}; wrote {} and {}",
        summary.final_input_error,
        summary.final_output_error,
        csv_path.display(),
        summary_path.display()
    );
    Ok(summary)
}

/// Prints the condition report; `true` when every condition holds.
pub fn cmd_validate(config: &ScenarioConfig) -> bool {
    let report = condition_report(config);
    print!("{report}");
    report.all_passed()
}

#[derive(Debug, Serialize)]
pub struct OracleSummary {
    pub mode: String,
    pub samples: usize,
    pub eta_limit: Option<f64>,
    pub final_eta: f64,
    /// Largest gap between the closed-form and integrated estimate error.
    pub max_estimate_gap: f64,
    /// Averaged-diffusion only: largest gap between series and grid traces for `t ≥ 0.5`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_trace_gap: Option<f64>,
    pub csv_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub config: String,
}

pub fn cmd_oracle(config: &ScenarioConfig, opts: &Options) -> Result<OracleSummary, CliError> {
    let started = Instant::now();
    let (table, mut summary) = match config.mode {
        Mode::AveragedDelay => averaged_delay_table(config)?,
        Mode::AveragedDiffusion => averaged_diffusion_table(config)?,
        other => {
            return Err(CliError::Usage(format!(
                "`oracle` needs mode averaged-delay or averaged-diffusion, got `{other}`"
            )))
        }
    };
    let mode = config.mode.as_str();
    let csv_path = resolve(&opts.out_dir, config.csv_path.as_deref(), &format!("{mode}.csv"));
    let summary_path = resolve(&opts.out_dir, config.summary_path.as_deref(), &format!("{mode}.summary.json"));
    write_atomic(&csv_path, &table.to_csv())?;
    summary.csv_path = csv_path.display().to_string();
    summary.runtime_seconds = (!opts.canonical).then(|| started.elapsed().as_secs_f64());
    write_atomic(&summary_path, &json(&summary))?;
    println!("{mode}: final η̃ = {:.6}; wrote {} and {}", summary.final_eta, csv_path.display(), summary_path.display());
    Ok(summary)
}

/// Step count and the step shrunk to land on the horizon.
fn oracle_steps(config: &ScenarioConfig) -> (usize, f64) {
    let dt = config.dt();
    let steps = (config.horizon / dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return (0, dt);
    }
    (steps, config.horizon / steps as f64)
}

fn averaged_delay_table(config: &ScenarioConfig) -> Result<(Table, OracleSummary), CliError> {
    let p = config.averaged_params();
    let theta0 = config.oracle_theta0;
    let (steps, dt) = oracle_steps(config);
    let states = integrate_averaged_delay(&p, theta0, config.init_eta, dt, steps as f64 * dt)?;
    let limit = eta_av_limit(p.omega_h, p.hessian, p.a, p.lambda).ok();
    let mut table = Table::new(&["t", "theta_closed", "theta_integrated", "eta_integrated", "eta_limit"]);
    let mut gap: f64 = 0.0;
    for (n, s) in states.iter().enumerate() {
        let closed = averaged_theta_delay(s.t, theta0, p.k, p.hessian, p.lambda);
        gap = gap.max((closed - s.theta_f_av).abs());
        if n % config.sample_stride == 0 || n == states.len() - 1 {
            table.push(vec![s.t, closed, s.theta_f_av, s.eta_f_av, limit.unwrap_or(f64::NAN)]);
        }
    }
    let summary = OracleSummary {
        mode: config.mode.to_string(),
        samples: table.len(),
        eta_limit: limit,
        final_eta: states.last().map(|s| s.eta_f_av).unwrap_or(config.init_eta),
        max_estimate_gap: gap,
        max_trace_gap: None,
        csv_path: String::new(),
        runtime_seconds: None,
        config: config.to_text(),
    };
    Ok((table, summary))
}

/// Averaged diffusion system: the estimate error and filter state by RK4,
/// the reaction–diffusion profile on the grid by Crank–Nicolson, compared
/// against the closed forms.
fn averaged_diffusion_table(config: &ScenarioConfig) -> Result<(Table, OracleSummary), CliError> {
    let p = config.averaged_params();
    let theta0 = config.oracle_theta0;
    let exact = ReactionDiffusionExact::new(theta0, p.k, p.hessian, p.lambda, p.d, |_| 0.0, config.truncation()?)?;
    if exact.non_decaying_modes() > 0 {
        eprintln!("warning: {} series mode(s) do not decay (λ ≥ π²/(4D²))", exact.non_decaying_modes());
    }
    let n = config.n_cells;
    if n < 8 {
        return Err(CliError::Config("numerics.N must be at least 8".into()));
    }
    let h = p.d / n as f64;
    let (steps, dt) = oracle_steps(config);
    let rate = p.contraction_rate();
    let limit = eta_av_limit(p.omega_h, p.hessian, p.a, p.lambda).ok();
    let trace = |u: &[f64]| (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);

    let mut u = vec![0.0; n + 1];
    let mut estimate = theta0;
    let mut eta = config.init_eta;
    let mut grid_trace = trace(&u);
    let mut table =
        Table::new(&["t", "estimate_closed", "estimate_integrated", "trace_series", "trace_grid", "eta_integrated"]);
    let mut estimate_gap: f64 = 0.0;
    let mut trace_gap: f64 = 0.0;
    let mut record = |t: f64, estimate: f64, grid_trace: f64, eta: f64, keep: bool| {
        let closed = theta0 * (-rate * t).exp();
        let series = exact.boundary_flux(t);
        estimate_gap = estimate_gap.max((closed - estimate).abs());
        if t >= 0.5 {
            trace_gap = trace_gap.max((series - grid_trace).abs());
        }
        if keep {
            table.push(vec![t, closed, estimate, series, grid_trace, eta]);
        }
    };
    record(0.0, estimate, grid_trace, eta, true);
    for step in 0..steps {
        let t = step as f64 * dt;
        let [next_estimate] = rk4_step([estimate], t, dt, |_, x| Ok([-rate * x[0]]))?;
        let flux = 0.5 * (estimate + next_estimate);
        u = crank_nicolson_heat_step(&u, 0.0, RightBoundary::Neumann(flux), h, dt, p.lambda)?;
        let next_trace = trace(&u);
        let (trace_start, trace_end) = (grid_trace, next_trace);
        let [next_eta] = rk4_step([eta], t, dt, |tau, x| {
            let w = (tau - t) / dt;
            let trace_now = trace_start + w * (trace_end - trace_start);
            let state = AveragedDiffusionState { estimate_f_av: 0.0, eta_f_av: x[0], t: tau };
            Ok([averaged_diffusion_rhs(&state, trace_now, &p).1])
        })?;
        estimate = next_estimate;
        eta = next_eta;
        grid_trace = next_trace;
        let done = step + 1;
        record(done as f64 * dt, estimate, grid_trace, eta, done % config.sample_stride == 0 || done == steps);
    }
    let summary = OracleSummary {
        mode: config.mode.to_string(),
        samples: table.len(),
        eta_limit: limit,
        final_eta: eta,
        max_estimate_gap: estimate_gap,
        max_trace_gap: Some(trace_gap),
        csv_path: String::new(),
        runtime_seconds: None,
        config: config.to_text(),
    };
    Ok((table, summary))
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub status: String,
    pub final_input_error: Option<f64>,
    pub decay_rate: Option<f64>,
    pub r_squared: Option<f64>,
    pub reweighted_residual: Option<f64>,
    /// Averaged contraction rate `kH − λ` of the re-weighted estimate error.
    pub contraction_rate: f64,
    pub conditions_passed: bool,
    /// `kH − λ > 0`.
    pub averaged_contracting: bool,
    /// The fitted decay rate of `|θ̂ − θ*|` exceeds `λ`. Near `k = λ/H` the
    /// fit is dominated by the residual oscillation, which decays at `λ`.
    pub empirical_contracting: Option<bool>,
    pub csv_path: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub config: String,
}

pub fn cmd_sweep(config: &ScenarioConfig, parameter: &str, values: &[String], opts: &Options) -> Result<SweepSummary, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    if !matches!(config.mode, Mode::Delay | Mode::Diffusion) {
        return Err(CliError::Usage(format!("sweep runs closed loops; mode `{}` is not one", config.mode)));
    }
    let mut configs = Vec::with_capacity(values.len());
    for (i, value) in values.iter().enumerate() {
        let mut c = config.clone();
        c.set(parameter, value).map_err(|msg| CliError::Usage(format!("sweep value `{value}`: {msg}")))?;
        c.check().map_err(|msg| CliError::Usage(format!("sweep value `{value}`: {msg}")))?;
        let stem = parameter.replace('.', "_");
        c.csv_path = Some(format!("sweep_{stem}_{i}.csv"));
        configs.push(c);
    }
    let started = Instant::now();
    let rows: Vec<SweepRow> = configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, value)| sweep_row(c, value, opts))
        .collect();
    let summary = SweepSummary {
        parameter: parameter.to_string(),
        rows,
        runtime_seconds: (!opts.canonical).then(|| started.elapsed().as_secs_f64()),
        config: config.to_text(),
    };
    write_atomic(&opts.out_dir.join("sweep_summary.json"), &json(&summary))?;
    write_atomic(&opts.out_dir.join("sweep_summary.csv"), &sweep_csv(&summary))?;
    for row in &summary.rows {
        println!(
            "{parameter} = {}: {} residual={} averaged_contracting={}",
            row.value,
            row.status,
            row.reweighted_residual.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()),
            row.averaged_contracting
        );
    }
    Ok(summary)
}

fn sweep_row(config: &ScenarioConfig, value: &str, opts: &Options) -> SweepRow {
    let report = condition_report(config);
    let mut row = SweepRow {
        value: value.to_string(),
        status: "ok".into(),
        final_input_error: None,
        decay_rate: None,
        r_squared: None,
        reweighted_residual: None,
        contraction_rate: config.k * config.hessian - config.lambda,
        conditions_passed: report.all_passed(),
        averaged_contracting: config.k * config.hessian - config.lambda > 0.0,
        empirical_contracting: None,
        csv_path: None,
    };
    let outcome = simulate(config).and_then(|traj| {
        let csv_path = resolve(&opts.out_dir, config.csv_path.as_deref(), "sweep.csv");
        write_atomic(&csv_path, &trajectory_csv(&traj))?;
        Ok(summarize(config, &traj, &csv_path, None))
    });
    match outcome {
        Ok(summary) => {
            row.final_input_error = Some(summary.final_input_error);
            row.reweighted_residual = Some(summary.reweighted_residual);
            if let Some(fit) = &summary.decay_fit {
                row.decay_rate = Some(fit.rate);
                row.r_squared = Some(fit.r_squared);
                row.empirical_contracting = Some(fit.rate > config.lambda);
            }
            row.csv_path = Some(summary.csv_path);
        }
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

fn sweep_csv(summary: &SweepSummary) -> Vec<u8> {
    let opt = |v: Option<f64>| v.map(format_sig17).unwrap_or_default();
    let mut out = String::from(
        "value,status,final_input_error,decay_rate,r_squared,reweighted_residual,contraction_rate,conditions_passed,averaged_contracting,empirical_contracting\n",
    );
    for row in &summary.rows {
        let status = if row.status == "ok" { "ok" } else { "failed" };
        out.push_str(&format!(
            "{},{status},{},{},{},{},{},{},{},{}\n",
            row.value,
            opt(row.final_input_error),
            opt(row.decay_rate),
            opt(row.r_squared),
            opt(row.reweighted_residual),
            format_sig17(row.contraction_rate),
            row.conditions_passed,
            row.averaged_contracting,
            row.empirical_contracting.map(|c| c.to_string()).unwrap_or_default()
        ));
    }
    out.into_bytes()
}
