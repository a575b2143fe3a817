//! Gaussian fidelity, phase Fisher information and the Cramér-Rao bound.
//!
//! Fidelities use closed determinant formulas (one and two modes) in the
//! vacuum-½ normalisation, rearranged so that no step subtracts nearly equal
//! quantities. Fisher information comes from the Bures expansion
//! `F(θ-h, θ+h) = 1 - J (2h)²/8 + …` evaluated in double-double.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{omega, Mat};
use crate::receivers::ReceiverStats;
use crate::scalar::Real;
use crate::sources::{receiver_input_at, ProtocolVariant, SensingScenario};
use crate::TwoFloat;

/// Finite-difference half-steps, coarse then fine.
pub const QFI_STEPS: [f64; 2] = [1e-3, 5e-4];
/// Largest accepted Richardson error relative to `J`.
pub const QFI_REL_TOL: f64 = 1e-3;
/// Finite-difference values below this are double-double noise and read as zero.
pub const QFI_NOISE_FLOOR: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QfiResult {
    /// Fisher information per mode pair, rad⁻².
    pub qfi: f64,
    /// `1/(M J)`, rad².
    pub qcrb_var: f64,
    pub step: f64,
    pub richardson_error: f64,
}

/// Determinant of the Hermitian matrix `a + i b` via its real embedding.
fn hermitian_det<T: Real>(a: &Mat<T>, b: &Mat<T>) -> T {
    let n = a.rows();
    let mut e = Mat::zeros(2 * n, 2 * n);
    e.set_block(0, 0, a);
    e.set_block(n, n, a);
    e.set_block(0, n, &b.scale(-T::one()));
    e.set_block(n, 0, b);
    // det(embedding) = |det(a + i b)|², and det(a + i b) ≥ 0 for physical inputs
    e.determinant().max(T::zero()).sqrt()
}

/// Uhlmann root fidelity `tr|√ρ √σ|` of one- or two-mode Gaussian states.
pub fn gaussian_fidelity<T: Real>(a: &GaussianState<T>, b: &GaussianState<T>) -> Result<T> {
    if a.n_modes() != b.n_modes() {
        return Err(Error::ModeCountMismatch(a.n_modes(), b.n_modes()));
    }
    let n = a.n_modes();
    if n > 2 {
        return Err(Error::FidelityModes(n));
    }
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let va = a.cov().scale(half);
    let vb = b.cov().scale(half);
    let sum = &va + &vb;
    let inv = sum.inverse().ok_or_else(|| Error::InvalidCovariance("singular covariance sum".into()))?;
    let delta: Vec<T> = a.mean().iter().zip(b.mean()).map(|(&x, &y)| (x - y) * half.sqrt()).collect();
    let gauss = (-half * inv.bilinear(&delta, &delta)).exp();
    let det_sum = sum.determinant();

    let squared = if n == 1 {
        let lam = T::lit(4.0) * (va.determinant() - quarter).max(T::zero()) * (vb.determinant() - quarter).max(T::zero());
        // 1/(√(Δ+Λ) - √Λ) = (√(Δ+Λ) + √Λ)/Δ
        ((det_sum + lam).sqrt() + lam.sqrt()).quot(det_sum)
    } else {
        let w = omega::<T>(2);
        let prod = &(&(&w * &va) * &w) * &vb;
        let gamma = T::lit(16.0) * (&prod - &Mat::identity(4).scale(quarter)).determinant();
        let hw = w.scale(half);
        let lam = T::lit(16.0) * hermitian_det(&va, &hw) * hermitian_det(&vb, &hw);
        let x = gamma.max(T::zero()).sqrt() + lam.sqrt();
        // 1/(x - √(x² - Δ)) = (x + √(x² - Δ))/Δ
        (x + (x * x - det_sum).max(T::zero()).sqrt()).quot(det_sum)
    } * gauss;
    Ok(squared.sqrt().min(T::one()))
}

/// Fisher information at half-step `h` from `8(1 - F)/(2h)²`.
fn qfi_at_step(scenario: &SensingScenario, variant: ProtocolVariant, h: f64) -> Result<f64> {
    let theta = TwoFloat::lit(scenario.theta);
    let step = TwoFloat::lit(h);
    let lo = receiver_input_at(scenario, variant, theta - step)?;
    let hi = receiver_input_at(scenario, variant, theta + step)?;
    let f = gaussian_fidelity(&lo, &hi)?;
    let width = TwoFloat::lit(2.0 * h);
    Ok((TwoFloat::lit(8.0) * (TwoFloat::lit(1.0) - f)).quot(width * width).as_f64())
}

/// Phase Fisher information of the full receiver-input state, Richardson
/// extrapolated from two step sizes.
pub fn qfi_phase(scenario: &SensingScenario, variant: ProtocolVariant) -> Result<QfiResult> {
    qfi_phase_with_steps(scenario, variant, QFI_STEPS)
}

pub fn qfi_phase_with_steps(scenario: &SensingScenario, variant: ProtocolVariant, steps: [f64; 2]) -> Result<QfiResult> {
    scenario.validate()?;
    let [h1, h2] = steps;
    if !(h1 > 0.0 && h2 > 0.0 && h2 < h1) {
        return Err(Error::InvalidParameter { name: "qfi steps", value: h2, reason: "need 0 < fine < coarse" });
    }
    let j1 = qfi_at_step(scenario, variant, h1)?;
    let j2 = qfi_at_step(scenario, variant, h2)?;
    // leading error is O(h²)
    let ratio = (h1 / h2).powi(2);
    let mut qfi = ((ratio * j2 - j1) / (ratio - 1.0)).max(0.0);
    let mut richardson_error = (qfi - j2).abs();
    if j1.abs().max(j2.abs()) < QFI_NOISE_FLOOR {
        qfi = 0.0;
        richardson_error = 0.0;
    }
    if richardson_error > QFI_REL_TOL * qfi {
        return Err(Error::NotConverged { qfi, error: richardson_error });
    }
    let qcrb_var = if qfi > 0.0 { 1.0 / (scenario.modes() * qfi) } else { f64::INFINITY };
    Ok(QfiResult { qfi, qcrb_var, step: h2, richardson_error })
}

/// Classical Fisher information per mode of the receiver output,
/// `A² sin²θ / Var`.
pub fn receiver_fisher(stats: &ReceiverStats, theta: f64) -> Result<f64> {
    if stats.calib_scale == 0.0 {
        return Err(Error::DegenerateCalibration);
    }
    let slope = stats.calib_scale * theta.sin();
    if slope == 0.0 {
        return Ok(0.0);
    }
    Ok(slope * slope / stats.var_diff)
}
