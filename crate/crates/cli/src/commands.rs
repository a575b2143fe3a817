//! Subcommand bodies. Each returns a table plus the grid points that failed.

use std::fmt;

use anyhow::Result;
use covsense::adversary::{self, CovertnessReport};
use covsense::montecarlo::{self, EstimationResult};
use covsense::{metrology, receivers, ProtocolVariant, SensingScenario};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::table::{Cell, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Fig3,
    Fig4,
    Fig5,
    Qcrb,
    Covertness,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Fig3 => "fig3",
            Command::Fig4 => "fig4",
            Command::Fig5 => "fig5",
            Command::Qcrb => "qcrb",
            Command::Covertness => "covertness",
            Command::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct Output {
    pub command: Command,
    pub table: Table,
    /// One message per failed grid point, in grid order.
    pub failures: Vec<String>,
}

pub const ESTIMATION_COLUMNS: &[&str] = &[
    "regime", "variant", "theta", "N_S", "N_B", "T", "M", "cos_mean", "theta_mean", "mse_cos", "mse_theta", "rms_cos", "rms_theta",
    "stderr", "theory_mse_cos", "theory_mse", "qcrb", "epsilon", "pe_lower", "pe_exact", "seed", "stream",
];

pub const QCRB_COLUMNS: &[&str] =
    &["variant", "theta", "N_S", "N_B", "M", "qfi", "qcrb", "receiver_fisher", "efficiency", "richardson_error"];

pub const COVERTNESS_COLUMNS: &[&str] =
    &["variant", "N_S", "N_B", "M", "window_count", "n0", "n1", "rel_entropy", "epsilon", "pe_lower", "pe_exact", "method"];

struct Job {
    regime: &'static str,
    variant: ProtocolVariant,
    /// Failed schedule or solver steps surface as point failures.
    scenario: std::result::Result<SensingScenario, String>,
    label: String,
}

fn estimation_row(regime: &str, est: &EstimationResult, cov: &CovertnessReport, stream: u64) -> Vec<Cell> {
    let sc = &est.scenario;
    let k = est.samples.len() as f64;
    let cos_mean = est.samples.iter().map(|s| s.cos_hat).sum::<f64>() / k;
    let theta_mean = est.samples.iter().map(|s| s.theta_hat).sum::<f64>() / k;
    vec![
        regime.into(),
        est.variant.name().into(),
        est.theta_true.into(),
        sc.n_s.into(),
        sc.n_b.into(),
        sc.T.into(),
        sc.modes().into(),
        cos_mean.into(),
        theta_mean.into(),
        est.mse_cos.into(),
        est.mse_theta.into(),
        est.rms_cos.into(),
        est.rms_theta.into(),
        est.stderr.into(),
        est.theory_mse_cos.into(),
        est.theory_mse.into(),
        est.qcrb.into(),
        cov.epsilon.into(),
        cov.pe_lower.into(),
        cov.pe_exact.into(),
        est.seed.into(),
        stream.into(),
    ]
}

fn estimate(cfg: &RunConfig, sc: &SensingScenario, variant: ProtocolVariant, stream: u64, noise_free: bool) -> covsense::Result<EstimationResult> {
    if !noise_free {
        return montecarlo::simulate_stream(sc, variant, cfg.shots, cfg.seed, stream);
    }
    let mut stats = receivers::receiver_stats(sc, variant)?;
    stats.var_diff = 0.0;
    let qcrb = metrology::qfi_phase(sc, variant)?.qcrb_var;
    montecarlo::simulate_stats(&stats, cfg.shots, cfg.seed, stream, qcrb)
}

/// Runs estimation jobs in parallel; stream `i` belongs to job `i`.
fn run_estimation(cfg: &RunConfig, jobs: Vec<Job>, noise_free: bool) -> (Table, Vec<String>) {
    let results: Vec<_> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, job)| {
            let sc = job.scenario.clone()?;
            let stream = i as u64;
            let est = estimate(cfg, &sc, job.variant, stream, noise_free).map_err(|e| e.to_string())?;
            let cov = adversary::covertness_report(&sc, job.variant, cfg.window_count).map_err(|e| e.to_string())?;
            Ok::<_, String>(estimation_row(job.regime, &est, &cov, stream))
        })
        .collect();
    let mut table = Table::new(ESTIMATION_COLUMNS);
    let mut failures = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(row) => table.push(row),
            Err(e) => failures.push(format!("{}: {e}", job.label)),
        }
    }
    (table, failures)
}

fn fig3_jobs(cfg: &RunConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &theta in &cfg.fig3.theta_grid {
        for &variant in &cfg.variants {
            jobs.push(Job { regime: "fig3", variant, scenario: Ok(cfg.scenario.with_theta(theta)), label: format!("{variant} theta={theta}") });
        }
    }
    jobs
}

fn fig4_jobs(cfg: &RunConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for regime in ["fixed_covertness", "fixed_power"] {
        for &n_b in &cfg.fig4.n_b_grid {
            for &variant in &cfg.variants {
                let base = SensingScenario { n_b, ..cfg.scenario.clone() };
                let scenario = if regime == "fixed_power" {
                    Ok(base.with_signal(cfg.fig4.fixed_n_s))
                } else {
                    adversary::solve_ns_for_epsilon(cfg.fig4.epsilon, &base, variant).map(|n| base.with_signal(n)).map_err(|e| e.to_string())
                };
                jobs.push(Job { regime, variant, scenario, label: format!("{regime} {variant} N_B={n_b}") });
            }
        }
    }
    jobs
}

fn fig5_jobs(cfg: &RunConfig) -> Vec<Job> {
    let base = cfg.fig5_base();
    let times = &cfg.fig5.t_grid;
    let schedules = [
        ("obey", adversary::sqrt_law_schedule(cfg.fig5.sqrt_law_constant, times, &base)),
        ("violate", adversary::fixed_ratio_schedule(cfg.fig5.violate_ratio, times, &base)),
    ];
    let mut jobs = Vec::new();
    for (regime, schedule) in schedules {
        for (i, &t) in times.iter().enumerate() {
            for &variant in &cfg.variants {
                let scenario = schedule.as_ref().map(|s| s[i].clone()).map_err(|e| e.to_string());
                jobs.push(Job { regime, variant, scenario, label: format!("{regime} {variant} T={t}") });
            }
        }
    }
    jobs
}

fn qcrb_row(sc: &SensingScenario, variant: ProtocolVariant) -> covsense::Result<Vec<Cell>> {
    let q = metrology::qfi_phase(sc, variant)?;
    // calibration fails without signal; the bound itself is still defined
    let fisher = receivers::receiver_stats(sc, variant).ok().map(|st| metrology::receiver_fisher(&st, sc.theta)).transpose()?;
    let efficiency = fisher.filter(|_| q.qfi > 0.0).map(|f| f / q.qfi);
    Ok(vec![
        variant.name().into(),
        sc.theta.into(),
        sc.n_s.into(),
        sc.n_b.into(),
        sc.modes().into(),
        q.qfi.into(),
        q.qcrb_var.into(),
        fisher.into(),
        efficiency.into(),
        q.richardson_error.into(),
    ])
}

fn covertness_row(sc: &SensingScenario, variant: ProtocolVariant, window_count: u32) -> covsense::Result<Vec<Cell>> {
    let r = adversary::covertness_report(sc, variant, window_count)?;
    Ok(vec![
        variant.name().into(),
        sc.n_s.into(),
        sc.n_b.into(),
        r.modes.into(),
        u64::from(window_count).into(),
        r.n0.into(),
        r.n1.into(),
        r.rel_entropy_per_mode.into(),
        r.epsilon.into(),
        r.pe_lower.into(),
        r.pe_exact.into(),
        r.method.map(|m| m.name()).into(),
    ])
}

/// Evaluates `row` over the sweep grid and every variant.
fn per_point<F>(cfg: &RunConfig, columns: &[&'static str], row: F) -> Result<(Table, Vec<String>)>
where
    F: Fn(&SensingScenario, ProtocolVariant) -> covsense::Result<Vec<Cell>> + Sync,
{
    let grid = cfg.sweep_grid()?;
    let points: Vec<(usize, ProtocolVariant)> = (0..grid.len()).flat_map(|i| cfg.variants.iter().map(move |&v| (i, v))).collect();
    let results: Vec<_> = points.par_iter().map(|&(i, v)| row(&grid[i], v)).collect();
    let mut table = Table::new(columns);
    let mut failures = Vec::new();
    for (&(i, v), r) in points.iter().zip(results) {
        match r {
            Ok(r) => table.push(r),
            Err(e) => failures.push(format!("point {i} {v}: {e}")),
        }
    }
    Ok((table, failures))
}

fn sweep(cfg: &RunConfig) -> Result<(Table, Vec<String>)> {
    let grid = cfg.sweep_grid()?;
    let mut table = Table::new(ESTIMATION_COLUMNS);
    let mut failures = Vec::new();
    for &variant in &cfg.variants {
        for (i, r) in montecarlo::sweep(&grid, variant, cfg.shots, cfg.seed)?.into_iter().enumerate() {
            let row = r.and_then(|est| {
                let cov = adversary::covertness_report(&grid[i], variant, cfg.window_count)?;
                Ok(estimation_row("sweep", &est, &cov, i as u64))
            });
            match row {
                Ok(row) => table.push(row),
                Err(e) => failures.push(format!("point {i} {variant}: {e}")),
            }
        }
    }
    Ok((table, failures))
}

/// Validates the configuration and runs one subcommand on the current rayon pool.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Output> {
    cfg.validate()?;
    let (table, failures) = match command {
        Command::Fig3 => run_estimation(cfg, fig3_jobs(cfg), cfg.fig3.noise_free),
        Command::Fig4 => run_estimation(cfg, fig4_jobs(cfg), false),
        Command::Fig5 => run_estimation(cfg, fig5_jobs(cfg), false),
        Command::Qcrb => per_point(cfg, QCRB_COLUMNS, qcrb_row)?,
        Command::Covertness => per_point(cfg, COVERTNESS_COLUMNS, |sc, v| covertness_row(sc, v, cfg.window_count))?,
        Command::Sweep => sweep(cfg)?,
    };
    Ok(Output { command, table, failures })
}

/// Serialized output: header block with command, version and resolved config.
pub fn render(output: &Output, cfg: &RunConfig) -> Result<Vec<u8>> {
    let version = env!("CARGO_PKG_VERSION");
    let mut buf = Vec::new();
    match cfg.format {
        Format::Csv => {
            let header = format!("covsense {version} {}\n{}", output.command, cfg.to_toml());
            output.table.write_csv(&mut buf, &header)?;
        }
        Format::Json => {
            let meta = json!({
                "command": output.command.to_string(),
                "version": version,
                "seed": cfg.seed,
                "config": serde_json::to_value(cfg)?,
            });
            serde_json::to_writer_pretty(&mut buf, &output.table.to_json(meta))?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}
