//! Repeated-shot simulation of the receivers.
//!
//! A shot is the total difference count over `M` modes, drawn from
//! `Normal(M·mean, M·var)`. Randomness is ChaCha8 keyed by the seed with one
//! stream per grid point; shot `k` reads the four 32-bit words starting at
//! `4k`, so a shot's value depends only on `(seed, point, k)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrology;
use crate::receivers::{self, EstimatorSample, ReceiverStats};
use crate::sources::{ProtocolVariant, SensingScenario};

/// Measurements per grid point unless configured.
pub const DEFAULT_SHOTS: usize = 2000;
/// Smallest `M · n̄` on a detector for which aggregate counts are treated as Gaussian.
pub const CLT_MIN_COUNTS: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimationResult {
    pub variant: ProtocolVariant,
    pub scenario: SensingScenario,
    pub theta_true: f64,
    #[serde(skip)]
    pub samples: Vec<EstimatorSample>,
    pub mse_cos: f64,
    pub mse_theta: f64,
    pub rms_cos: f64,
    pub rms_theta: f64,
    /// Jackknife standard error of `mse_theta`.
    pub stderr: f64,
    /// Delta-method phase variance; NaN where `sin θ = 0`.
    pub theory_mse: f64,
    pub theory_mse_cos: f64,
    pub qcrb: f64,
    pub seed: u64,
}

/// Standard normal from two uniform words (Box-Muller, cosine branch).
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let scale = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * scale;
    let u2 = (rng.next_u64() >> 11) as f64 * scale;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Aggregate totals for shots `0..shots` of `stream`.
pub fn draw_totals(stats: &ReceiverStats, modes: f64, shots: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(0);
    let (mu, sd) = (modes * stats.mean_diff, (modes * stats.var_diff).sqrt());
    (0..shots).map(|_| mu + sd * normal(&mut rng)).collect()
}

fn check_clt(stats: &ReceiverStats, modes: f64) -> Result<()> {
    if let Some([a, b]) = stats.detector_means {
        let counts = modes * a.min(b);
        if counts < CLT_MIN_COUNTS {
            return Err(Error::CltGuard(counts));
        }
    }
    Ok(())
}

/// Leave-one-out standard error of a sample mean.
fn jackknife_stderr(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let total: f64 = values.iter().sum();
    let loo: Vec<f64> = values.iter().map(|v| (total - v) / (k - 1.0)).collect();
    let centre = loo.iter().sum::<f64>() / k;
    ((k - 1.0) / k * loo.iter().map(|x| (x - centre).powi(2)).sum::<f64>()).sqrt()
}

/// Estimates from precomputed receiver statistics. `qcrb` is passed through.
pub fn simulate_stats(stats: &ReceiverStats, shots: usize, seed: u64, stream: u64, qcrb: f64) -> Result<EstimationResult> {
    if shots < 2 {
        return Err(Error::TooFewShots(shots));
    }
    let scenario = &stats.scenario;
    let modes = scenario.modes();
    check_clt(stats, modes)?;
    let theta = scenario.theta;
    let samples = draw_totals(stats, modes, shots, seed, stream)
        .into_iter()
        .map(|t| receivers::cosine_estimator(stats, modes, t))
        .collect::<Result<Vec<_>>>()?;
    let k = shots as f64;
    let cos_err: Vec<f64> = samples.iter().map(|s| (s.cos_hat - theta.cos()).powi(2)).collect();
    let theta_err: Vec<f64> = samples.iter().map(|s| (s.theta_hat - theta).powi(2)).collect();
    let mse_cos = cos_err.iter().sum::<f64>() / k;
    let mse_theta = theta_err.iter().sum::<f64>() / k;
    let (theory_mse, theory_mse_cos) = match receivers::theory_mse(stats, modes, theta) {
        Ok(t) => (t.var_theta, t.var_cos),
        Err(Error::DeltaMethodSingular(_)) => (f64::NAN, stats.var_diff / (modes * stats.calib_scale.powi(2))),
        Err(e) => return Err(e),
    };
    Ok(EstimationResult {
        variant: stats.variant,
        scenario: scenario.clone(),
        theta_true: theta,
        mse_cos,
        mse_theta,
        rms_cos: mse_cos.sqrt(),
        rms_theta: mse_theta.sqrt(),
        stderr: jackknife_stderr(&theta_err),
        theory_mse,
        theory_mse_cos,
        qcrb,
        seed,
        samples,
    })
}

/// [`simulate`] on an explicit random stream.
pub fn simulate_stream(scenario: &SensingScenario, variant: ProtocolVariant, shots: usize, seed: u64, stream: u64) -> Result<EstimationResult> {
    if shots < 2 {
        return Err(Error::TooFewShots(shots));
    }
    let stats = receivers::receiver_stats(scenario, variant)?;
    check_clt(&stats, scenario.modes())?;
    let qcrb = metrology::qfi_phase(scenario, variant)?.qcrb_var;
    simulate_stats(&stats, shots, seed, stream, qcrb)
}

/// `shots` repeated measurements at one scenario.
pub fn simulate(scenario: &SensingScenario, variant: ProtocolVariant, shots: usize, seed: u64) -> Result<EstimationResult> {
    simulate_stream(scenario, variant, shots, seed, 0)
}

/// One independent stream per grid point; output order follows the grid.
pub fn sweep(grid: &[SensingScenario], variant: ProtocolVariant, shots: usize, seed: u64) -> Result<Vec<Result<EstimationResult>>> {
    if grid.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(grid
        .par_iter()
        .enumerate()
        .map(|(i, sc)| simulate_stream(sc, variant, shots, seed, i as u64))
        .collect())
}
