//! Run configuration: defaults, TOML file, `--set key=value` overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use covsense::montecarlo::DEFAULT_SHOTS;
use covsense::{ProtocolVariant, SensingScenario};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3Config {
    pub theta_grid: Vec<f64>,
    /// Zero the receiver noise, so every estimate is exact.
    pub noise_free: bool,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self { theta_grid: linspace(0.1 * PI, 0.9 * PI, 13), noise_free: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig4Config {
    pub n_b_grid: Vec<f64>,
    pub epsilon: f64,
    /// Probe brightness of the fixed-power curves.
    pub fixed_n_s: f64,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Self { n_b_grid: vec![40.0, 80.0, 160.0, 320.0, 640.0, 1280.0], epsilon: 2e-4, fixed_n_s: 8e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct Fig5Config {
    pub t_grid: Vec<f64>,
    /// `κ N_S √M` held fixed by the obey-law schedule.
    pub sqrt_law_constant: f64,
    /// `κ N_S / N_B` held fixed by the violate-law schedule.
    pub violate_ratio: f64,
    pub kappa_E: f64,
    pub N_B: f64,
}

impl Default for Fig5Config {
    fn default() -> Self {
        Self {
            // 5 ms to 320 ms keeps the obey-law probe well below one photon per mode
            t_grid: (0..6).map(|k| 5e-3 * 64f64.powf(k as f64 / 5.0)).collect(),
            sqrt_law_constant: 200.0,
            violate_ratio: 6.25e-5,
            kappa_E: 0.5,
            N_B: 1280.0,
        }
    }
}

/// Grid for `sweep`, `qcrb` and `covertness`: one scenario key stepped over
/// `values`. No parameter means the base scenario alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub shots: usize,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub variants: Vec<ProtocolVariant>,
    /// Consecutive windows Willie integrates over.
    pub window_count: u32,
    pub scenario: SensingScenario,
    pub fig3: Fig3Config,
    pub fig4: Fig4Config,
    pub fig5: Fig5Config,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            shots: DEFAULT_SHOTS,
            format: Format::Csv,
            out: None,
            variants: vec![ProtocolVariant::Entangled, ProtocolVariant::ClassicalThermal],
            window_count: 1,
            scenario: SensingScenario::default(),
            fig3: Fig3Config::default(),
            fig4: Fig4Config::default(),
            fig5: Fig5Config::default(),
            sweep: SweepConfig::default(),
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Parses the right-hand side of `--set` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    ensure!(parts.iter().all(|p| !p.is_empty()), "malformed key `{key}`");
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("`{p}` in `{key}` is not a table"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Applies `key=value` assignments to a TOML tree.
pub fn apply_overrides(table: &mut toml::Table, sets: &[String]) -> Result<()> {
    for s in sets {
        let (k, v) = s.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
        set_path(table, k.trim(), parse_value(v.trim()))?;
    }
    Ok(())
}

impl RunConfig {
    /// File (if any), then overrides, on top of defaults.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        apply_overrides(&mut table, sets)?;
        let cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().context("scenario")?;
        ensure!(self.shots >= 2, "shots must be at least 2");
        ensure!(!self.variants.is_empty(), "variants must not be empty");
        ensure!(self.window_count >= 1, "window_count must be at least 1");
        let g = &self.fig3.theta_grid;
        ensure!(!g.is_empty() && g.iter().all(|t| (0.0..=PI).contains(t)), "fig3.theta_grid must be a non-empty subset of [0, pi]");
        let g = &self.fig4.n_b_grid;
        ensure!(!g.is_empty() && g.iter().all(|&n| n > 0.0 && n.is_finite()), "fig4.n_b_grid must be non-empty and positive");
        ensure!(self.fig4.epsilon > 0.0, "fig4.epsilon must be positive");
        ensure!(self.fig4.fixed_n_s > 0.0, "fig4.fixed_n_s must be positive");
        let g = &self.fig5.t_grid;
        ensure!(!g.is_empty() && g.iter().all(|&t| t > 0.0 && t.is_finite()), "fig5.t_grid must be non-empty and positive");
        ensure!(self.fig5.sqrt_law_constant > 0.0 && self.fig5.violate_ratio > 0.0, "fig5 schedule constants must be positive");
        self.fig5_base().validate().context("fig5")?;
        self.sweep_grid()?;
        Ok(())
    }

    pub fn fig5_base(&self) -> SensingScenario {
        SensingScenario { kappa_E: self.fig5.kappa_E, n_b: self.fig5.N_B, ..self.scenario.clone() }
    }

    /// Scenarios of the sweep grid, each validated.
    pub fn sweep_grid(&self) -> Result<Vec<SensingScenario>> {
        let Some(key) = &self.sweep.parameter else {
            ensure!(self.sweep.values.is_empty(), "sweep.values given without sweep.parameter");
            return Ok(vec![self.scenario.clone()]);
        };
        ensure!(!self.sweep.values.is_empty(), "sweep.values must not be empty");
        let base = toml::Table::try_from(&self.scenario)?;
        self.sweep
            .values
            .iter()
            .map(|&v| {
                let mut t = base.clone();
                ensure!(t.contains_key(key), "unknown scenario key `{key}`");
                t.insert(key.clone(), toml::Value::Float(v));
                let sc: SensingScenario = toml::Value::Table(t).try_into()?;
                sc.validate().with_context(|| format!("sweep point {key} = {v}"))?;
                Ok(sc)
            })
            .collect()
    }

    /// Resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
