//! Receiver models: phase-conjugate (entangled probe), balanced homodyne
//! against a stored thermal reference (classical probe) and plain homodyne
//! for the coherent baseline.
//!
//! Each receiver reduces one mode pair to a scalar output per mode whose mean
//! follows `A cos θ`. Totals over `M` modes are calibrated by `M A`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::sources::{self, ProtocolVariant, SensingScenario, IDLER, REFERENCE, SIGNAL};

/// Label of the conjugate mode created inside the phase-conjugate receiver.
pub const CONJUGATE: &str = "C";

/// Below this `|sin θ|` the delta-method phase error is flagged unreliable.
pub const RELIABLE_SIN: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReceiverStats {
    pub variant: ProtocolVariant,
    pub scenario: SensingScenario,
    /// Mean output per mode at the scenario phase.
    pub mean_diff: f64,
    pub var_diff: f64,
    /// Mean output per mode at zero phase.
    pub calib_scale: f64,
    /// Photons per mode on the two detectors; absent for homodyne.
    pub detector_means: Option<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimatorSample {
    pub cos_hat: f64,
    pub theta_hat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoryMse {
    pub var_cos: f64,
    pub var_theta: f64,
    /// False close to `θ ∈ {0, π}` where the delta method breaks down.
    pub reliable: bool,
}

/// Phase-conjugate receiver state after the final beamsplitter, modes `(S, I, C)`.
pub fn pcr_output_state(scenario: &SensingScenario) -> Result<GaussianState<f64>> {
    sources::build_receiver_input::<f64>(scenario, ProtocolVariant::Entangled)?
        .append_vacuum(CONJUGATE)?
        .apply_two_mode_squeeze(CONJUGATE, SIGNAL, scenario.G_pc)?
        .apply_beamsplitter(CONJUGATE, IDLER, 0.5)
}

/// Balanced receiver state after the 50:50 beamsplitter, modes `(S, R)`.
pub fn hr_output_state(scenario: &SensingScenario) -> Result<GaussianState<f64>> {
    sources::build_receiver_input::<f64>(scenario, ProtocolVariant::ClassicalThermal)?
        .apply_beamsplitter(SIGNAL, REFERENCE, 0.5)
}

type Readout = fn(&SensingScenario) -> Result<(f64, f64, Option<[f64; 2]>)>;

fn pcr_readout(scenario: &SensingScenario) -> Result<(f64, f64, Option<[f64; 2]>)> {
    let s = pcr_output_state(scenario)?;
    let (m, v) = s.difference_stats(CONJUGATE, IDLER)?;
    Ok((m, v, Some([s.photon_mean(CONJUGATE)?, s.photon_mean(IDLER)?])))
}

fn hr_readout(scenario: &SensingScenario) -> Result<(f64, f64, Option<[f64; 2]>)> {
    let s = hr_output_state(scenario)?;
    let (m, v) = s.difference_stats(SIGNAL, REFERENCE)?;
    Ok((m, v, Some([s.photon_mean(SIGNAL)?, s.photon_mean(REFERENCE)?])))
}

fn homodyne_readout(scenario: &SensingScenario) -> Result<(f64, f64, Option<[f64; 2]>)> {
    let s = sources::build_receiver_input::<f64>(scenario, ProtocolVariant::CoherentBaseline)?;
    Ok((s.mean()[0], s.cov()[(0, 0)], None))
}

fn calibrated(scenario: &SensingScenario, variant: ProtocolVariant, readout: Readout) -> Result<ReceiverStats> {
    scenario.validate()?;
    if scenario.n_s == 0.0 {
        return Err(Error::DegenerateCalibration);
    }
    let (mean_diff, var_diff, detector_means) = readout(scenario)?;
    let (calib_scale, _, _) = readout(&scenario.with_theta(0.0))?;
    if calib_scale == 0.0 || !calib_scale.is_finite() {
        return Err(Error::DegenerateCalibration);
    }
    Ok(ReceiverStats { variant, scenario: scenario.clone(), mean_diff, var_diff, calib_scale, detector_means })
}

pub fn pcr_stats(scenario: &SensingScenario) -> Result<ReceiverStats> {
    calibrated(scenario, ProtocolVariant::Entangled, pcr_readout)
}

pub fn hr_stats(scenario: &SensingScenario) -> Result<ReceiverStats> {
    calibrated(scenario, ProtocolVariant::ClassicalThermal, hr_readout)
}

/// Homodyne on the returned x quadrature; output is the quadrature value.
pub fn homodyne_stats(scenario: &SensingScenario) -> Result<ReceiverStats> {
    calibrated(scenario, ProtocolVariant::CoherentBaseline, homodyne_readout)
}

/// The receiver each probe is paired with.
pub fn receiver_stats(scenario: &SensingScenario, variant: ProtocolVariant) -> Result<ReceiverStats> {
    match variant {
        ProtocolVariant::Entangled => pcr_stats(scenario),
        ProtocolVariant::ClassicalThermal => hr_stats(scenario),
        ProtocolVariant::CoherentBaseline => homodyne_stats(scenario),
    }
}

/// Cosine and phase estimates from a total output over `modes` modes.
pub fn cosine_estimator(stats: &ReceiverStats, modes: f64, total: f64) -> Result<EstimatorSample> {
    if stats.calib_scale == 0.0 {
        return Err(Error::DegenerateCalibration);
    }
    if modes < 1.0 {
        return Err(Error::InvalidParameter { name: "M", value: modes, reason: "must be at least 1" });
    }
    let cos_hat = total / (modes * stats.calib_scale);
    Ok(EstimatorSample { cos_hat, theta_hat: cos_hat.clamp(-1.0, 1.0).acos() })
}

/// Variances of the cosine and (delta-method) phase estimates.
pub fn theory_mse(stats: &ReceiverStats, modes: f64, theta: f64) -> Result<TheoryMse> {
    if stats.calib_scale == 0.0 {
        return Err(Error::DegenerateCalibration);
    }
    if modes < 1.0 {
        return Err(Error::InvalidParameter { name: "M", value: modes, reason: "must be at least 1" });
    }
    let sin = theta.sin();
    if sin.abs() < 1e-12 {
        return Err(Error::DeltaMethodSingular(theta));
    }
    let var_cos = stats.var_diff / (modes * stats.calib_scale * stats.calib_scale);
    Ok(TheoryMse { var_cos, var_theta: var_cos / (sin * sin), reliable: sin.abs() >= RELIABLE_SIN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use covsense_fock::{Channel, FockState};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn desk() -> SensingScenario {
        SensingScenario {
            n_s: 0.1,
            n_b: 1.0,
            kappa_T: 0.5,
            kappa_E: 1.0,
            kappa_I: 0.9,
            W: 1e6,
            T: 1e-3,
            theta: 0.8,
            G_pc: 1.1,
            willie_fraction: 1.0,
            n_r: 0.3,
        }
    }

    #[test]
    fn no_signal_no_response() {
        let sc = desk().with_signal(0.0);
        assert_eq!(pcr_stats(&sc), Err(Error::DegenerateCalibration));
        assert_eq!(hr_stats(&sc), Err(Error::DegenerateCalibration));
        for th in [0.0, 0.7, 2.0] {
            let (m, _) = pcr_output_state(&sc.with_theta(th)).unwrap().difference_stats(CONJUGATE, IDLER).unwrap();
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-14);
            let (m, _) = hr_output_state(&sc.with_theta(th)).unwrap().difference_stats(SIGNAL, REFERENCE).unwrap();
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn quadrature_point_has_zero_mean() {
        let st = pcr_stats(&desk().with_theta(FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(st.mean_diff, 0.0, epsilon = 1e-12 * st.calib_scale.abs());
        assert!(st.var_diff > 0.0);
    }

    #[test]
    fn pcr_matches_oracle_pipeline() {
        let sc = desk();
        let st = pcr_stats(&sc).unwrap();
        let o = FockState::vacuum(&[40, 40])
            .unwrap()
            .apply(&Channel::TwoModeSqueeze { a: 0, b: 1, gain: 1.0 + sc.n_s })
            .and_then(|s| s.apply(&Channel::Phase { mode: 0, theta: sc.theta }))
            .and_then(|s| s.apply(&Channel::ThermalLoss { mode: 0, kappa: sc.kappa(), noise: sc.n_b }))
            .and_then(|s| s.apply(&Channel::ThermalLoss { mode: 1, kappa: sc.kappa_I, noise: 0.0 }))
            .and_then(|s| s.apply(&Channel::Conjugate { mode: 0, gain: sc.G_pc }))
            .and_then(|s| s.apply(&Channel::BeamSplitter { a: 0, b: 1, eta: 0.5 }))
            .unwrap();
        let (m, v) = o.difference_stats(0, 1).unwrap();
        assert_abs_diff_eq!(st.mean_diff, m, epsilon = 1e-5);
        assert_abs_diff_eq!(st.var_diff, v, epsilon = 1e-5);
    }

    #[test]
    fn hr_matches_oracle_pipeline() {
        let sc = desk();
        let st = hr_stats(&sc).unwrap();
        let total = sc.n_s + sc.n_r;
        let o = FockState::thermal(40, total)
            .unwrap()
            .tensor(&FockState::vacuum(&[40]).unwrap())
            .and_then(|s| s.apply(&Channel::BeamSplitter { a: 1, b: 0, eta: sc.n_s / total }))
            .and_then(|s| s.apply(&Channel::Phase { mode: 0, theta: sc.theta }))
            .and_then(|s| s.apply(&Channel::ThermalLoss { mode: 0, kappa: sc.kappa(), noise: sc.n_b }))
            .and_then(|s| s.apply(&Channel::ThermalLoss { mode: 1, kappa: sc.kappa_I, noise: 0.0 }))
            .and_then(|s| s.apply(&Channel::BeamSplitter { a: 0, b: 1, eta: 0.5 }))
            .unwrap();
        let (m, v) = o.difference_stats(0, 1).unwrap();
        assert_abs_diff_eq!(st.mean_diff, m, epsilon = 1e-5);
        assert_abs_diff_eq!(st.var_diff, v, epsilon = 1e-5);
    }

    #[test]
    fn cosine_response_law() {
        for sc in [desk(), SensingScenario::default()] {
            for variant in ProtocolVariant::ALL {
                let a = receiver_stats(&sc, variant).unwrap().calib_scale;
                for k in 0..25 {
                    let th = PI * k as f64 / 24.0;
                    let st = receiver_stats(&sc.with_theta(th), variant).unwrap();
                    assert!((st.mean_diff - a * th.cos()).abs() <= 1e-6 * a.abs(), "{variant} {th}");
                }
            }
        }
        let sc = desk();
        let a = hr_stats(&sc.with_theta(0.4)).unwrap().mean_diff;
        let b = hr_stats(&sc.with_theta(PI - 0.4)).unwrap().mean_diff;
        assert_relative_eq!(a, -b, max_relative = 1e-9);
    }

    #[test]
    fn calibration_scales() {
        let sc = SensingScenario::default();
        let a_pcr = pcr_stats(&sc).unwrap().calib_scale.abs();
        let want = 2.0 * (sc.G_pc - 1.0).sqrt() * (sc.kappa() * sc.kappa_I * sc.n_s * (sc.n_s + 1.0)).sqrt();
        assert_relative_eq!(a_pcr, want, max_relative = 1e-6);
        let a_hr = hr_stats(&sc).unwrap().calib_scale.abs();
        assert_relative_eq!(a_hr, 2.0 * (sc.kappa() * sc.kappa_I * sc.n_s * sc.n_r).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn estimator_edges() {
        let st = pcr_stats(&desk()).unwrap();
        let m = 1e6;
        let e = cosine_estimator(&st, m, m * st.calib_scale).unwrap();
        assert_abs_diff_eq!(e.cos_hat, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.theta_hat, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(cosine_estimator(&st, m, 0.0).unwrap().theta_hat, FRAC_PI_2, epsilon = 1e-15);
        let wild = cosine_estimator(&st, m, -5.0 * m * st.calib_scale).unwrap();
        assert_eq!(wild.theta_hat, PI);
        assert!(cosine_estimator(&st, 0.0, 1.0).is_err());
    }

    #[test]
    fn theory_mse_properties() {
        let st = pcr_stats(&desk().with_theta(FRAC_PI_2)).unwrap();
        let t = theory_mse(&st, 1e6, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(t.var_theta, t.var_cos, epsilon = 1e-20);
        let t2 = theory_mse(&st, 2e6, FRAC_PI_2).unwrap();
        assert_eq!(t2.var_cos * 2.0, t.var_cos);
        assert!(matches!(theory_mse(&st, 1e6, 0.0), Err(Error::DeltaMethodSingular(_))));
        assert!(matches!(theory_mse(&st, 1e6, PI), Err(Error::DeltaMethodSingular(_))));
        assert!(!theory_mse(&st, 1e6, 0.05).unwrap().reliable);
    }

    fn mse(sc: &SensingScenario, v: ProtocolVariant) -> f64 {
        let st = receiver_stats(sc, v).unwrap();
        theory_mse(&st, sc.modes(), sc.theta).unwrap().var_theta
    }

    #[test]
    fn entangled_beats_classical_on_noise_grid() {
        let base = SensingScenario::default();
        for n_b in [10.0, 40.0, 160.0, 640.0, 1280.0] {
            for n_s in [1e-5, 8e-4, 1e-2] {
                for k_e in [0.05, 0.36, 1.0] {
                    let sc = SensingScenario { n_b, n_s, kappa_E: k_e, kappa_T: 0.5, ..base.clone() };
                    let (q, c) = (mse(&sc, ProtocolVariant::Entangled), mse(&sc, ProtocolVariant::ClassicalThermal));
                    assert!(q < c, "N_B={n_b} N_S={n_s} kappa_E={k_e}: {q} vs {c}");
                }
            }
        }
    }

    #[test]
    fn ideal_device_mse_ratio() {
        let sc = SensingScenario { kappa_I: 1.0, G_pc: 1.01, ..SensingScenario::default() };
        let r = mse(&sc, ProtocolVariant::Entangled) / mse(&sc, ProtocolVariant::ClassicalThermal);
        assert!(r <= 0.54, "{r}");
    }

    #[test]
    fn conjugator_gain_cancels() {
        let sc = SensingScenario::default();
        let vals: Vec<f64> = [1.01, 1.1, 1.5, 2.0]
            .iter()
            .map(|&g| mse(&SensingScenario { G_pc: g, ..sc.clone() }, ProtocolVariant::Entangled))
            .collect();
        let (lo, hi) = vals.iter().fold((f64::MAX, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi / lo - 1.0 < 0.1, "{vals:?}");
    }
}
