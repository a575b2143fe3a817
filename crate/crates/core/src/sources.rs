//! Probe states, the sensing scenario and the propagated receiver input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check, Result};
use crate::gaussian::GaussianState;
use crate::scalar::Real;

pub const SIGNAL: &str = "S";
pub const IDLER: &str = "I";
pub const REFERENCE: &str = "R";

/// Every parameter of one experiment point. Serialized field names are the
/// config keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[allow(non_snake_case)]
pub struct SensingScenario {
    /// Probe photons per mode leaving the source.
    #[serde(rename = "N_S")]
    pub n_s: f64,
    /// Background photons per mode at the receiver.
    #[serde(rename = "N_B")]
    pub n_b: f64,
    pub kappa_T: f64,
    pub kappa_E: f64,
    /// Idler (or reference) storage efficiency, detector efficiency folded in.
    pub kappa_I: f64,
    /// Source bandwidth in Hz.
    pub W: f64,
    /// Interrogation time in seconds.
    pub T: f64,
    pub theta: f64,
    /// Conjugator gain of the phase-conjugate receiver.
    pub G_pc: f64,
    pub willie_fraction: f64,
    /// Photons per mode in the classical reference arm.
    #[serde(rename = "N_R")]
    pub n_r: f64,
}

impl Default for SensingScenario {
    fn default() -> Self {
        Self {
            n_s: 8e-4,
            n_b: 160.0,
            kappa_T: 0.0165 / 0.36,
            kappa_E: 0.36,
            kappa_I: 0.9,
            W: 1.8e12,
            T: 125e-6,
            theta: std::f64::consts::FRAC_PI_2,
            G_pc: 1.1,
            willie_fraction: 1.0,
            n_r: 1000.0,
        }
    }
}

impl SensingScenario {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        check(self.n_s >= 0.0 && self.n_s.is_finite(), "N_S", self.n_s, "must be finite and non-negative")?;
        check(self.n_b >= 0.0 && self.n_b.is_finite(), "N_B", self.n_b, "must be finite and non-negative")?;
        check(unit(self.kappa_T), "kappa_T", self.kappa_T, "must lie in (0, 1]")?;
        check(unit(self.kappa_E), "kappa_E", self.kappa_E, "must lie in (0, 1]")?;
        check(unit(self.kappa_I), "kappa_I", self.kappa_I, "must lie in (0, 1]")?;
        check(self.W > 0.0 && self.W.is_finite(), "W", self.W, "must be positive")?;
        check(self.T > 0.0 && self.T.is_finite(), "T", self.T, "must be positive")?;
        check(self.theta.is_finite(), "theta", self.theta, "must be finite")?;
        check(self.G_pc >= 1.0 && self.G_pc.is_finite(), "G_pc", self.G_pc, "must be at least 1")?;
        check(unit(self.willie_fraction), "willie_fraction", self.willie_fraction, "must lie in (0, 1]")?;
        check(self.n_r >= 0.0 && self.n_r.is_finite(), "N_R", self.n_r, "must be finite and non-negative")?;
        check(self.modes() >= 1.0, "W*T", self.W * self.T, "must round to at least one mode")?;
        Ok(())
    }

    /// Overall signal transmissivity `κ_T κ_E`.
    pub fn kappa(&self) -> f64 {
        self.kappa_T * self.kappa_E
    }

    /// Number of mode pairs `round(W T)`.
    pub fn modes(&self) -> f64 {
        (self.W * self.T).round()
    }

    pub fn with_signal(&self, n_s: f64) -> Self {
        Self { n_s, ..self.clone() }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..self.clone() }
    }

    /// Willie's thermal means `(absent, present)`.
    pub fn willie_means(&self) -> (f64, f64) {
        (self.n_b, self.n_b + self.willie_excess())
    }

    /// Probe photons per mode Willie captures, without the cancellation of
    /// differencing the two means.
    pub fn willie_excess(&self) -> f64 {
        self.willie_fraction * (1.0 - self.kappa_E) * self.kappa_T * self.n_s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolVariant {
    Entangled,
    #[serde(rename = "classical")]
    ClassicalThermal,
    #[serde(rename = "coherent")]
    CoherentBaseline,
}

impl ProtocolVariant {
    pub const ALL: [ProtocolVariant; 3] =
        [ProtocolVariant::Entangled, ProtocolVariant::ClassicalThermal, ProtocolVariant::CoherentBaseline];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolVariant::Entangled => "entangled",
            ProtocolVariant::ClassicalThermal => "classical",
            ProtocolVariant::CoherentBaseline => "coherent",
        }
    }

    /// Label of the stored partner mode, if any.
    pub fn partner(self) -> Option<&'static str> {
        match self {
            ProtocolVariant::Entangled => Some(IDLER),
            ProtocolVariant::ClassicalThermal => Some(REFERENCE),
            ProtocolVariant::CoherentBaseline => None,
        }
    }
}

impl fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolVariant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected entangled, classical or coherent)"))
    }
}

fn non_negative<T: Real>(name: &'static str, x: T) -> Result<()> {
    check(x >= T::zero(), name, x.as_f64(), "must be non-negative")
}

/// Two-mode squeezed vacuum on `(S, I)` with `n_s` photons per arm.
pub fn tmsv<T: Real>(n_s: T) -> Result<GaussianState<T>> {
    non_negative("N_S", n_s)?;
    GaussianState::vacuum_labeled(&[SIGNAL, IDLER])?.apply_two_mode_squeeze(SIGNAL, IDLER, T::one() + n_s)
}

/// Thermal light split 50:50 into `(S, R)`, `n_s` photons per arm.
pub fn split_thermal<T: Real>(n_s: T) -> Result<GaussianState<T>> {
    split_thermal_with_reference(n_s, n_s)
}

/// Thermal light split unevenly into a signal arm of `n_s` and a reference
/// arm of `n_r` photons per mode.
pub fn split_thermal_with_reference<T: Real>(n_s: T, n_r: T) -> Result<GaussianState<T>> {
    non_negative("N_S", n_s)?;
    non_negative("N_R", n_r)?;
    let total = n_s + n_r;
    let src = GaussianState::thermal(SIGNAL, total)?.append_vacuum(REFERENCE)?;
    if total == T::zero() {
        return Ok(src);
    }
    src.apply_beamsplitter(REFERENCE, SIGNAL, n_s / total)
}

/// Coherent probe on `S` with `n_s` photons and a real amplitude.
pub fn coherent_probe<T: Real>(n_s: T) -> Result<GaussianState<T>> {
    non_negative("N_S", n_s)?;
    GaussianState::coherent(SIGNAL, T::two() * n_s.sqrt(), T::zero())
}

pub fn probe<T: Real>(scenario: &SensingScenario, variant: ProtocolVariant) -> Result<GaussianState<T>> {
    let n_s = T::lit(scenario.n_s);
    match variant {
        ProtocolVariant::Entangled => tmsv(n_s),
        ProtocolVariant::ClassicalThermal => split_thermal_with_reference(n_s, T::lit(scenario.n_r)),
        ProtocolVariant::CoherentBaseline => coherent_probe(n_s),
    }
}

/// State at the receiver: `(S, I)`, `(S, R)` or `(S)` after the phase object,
/// the lossy noisy round trip and partner storage.
pub fn build_receiver_input<T: Real>(scenario: &SensingScenario, variant: ProtocolVariant) -> Result<GaussianState<T>> {
    receiver_input_at(scenario, variant, T::lit(scenario.theta))
}

/// As [`build_receiver_input`] with the phase given separately, so it can be
/// perturbed in the working precision.
pub fn receiver_input_at<T: Real>(
    scenario: &SensingScenario,
    variant: ProtocolVariant,
    theta: T,
) -> Result<GaussianState<T>> {
    scenario.validate()?;
    let s = probe::<T>(scenario, variant)?
        .apply_phase(SIGNAL, theta)?
        .apply_thermal_loss(SIGNAL, T::lit(scenario.kappa()), T::lit(scenario.n_b))?;
    match variant.partner() {
        Some(p) => s.apply_thermal_loss(p, T::lit(scenario.kappa_I), T::zero()),
        None => Ok(s),
    }
}

/// Willie's single-mode state with or without the probe present.
pub fn willie_marginal(scenario: &SensingScenario, variant: ProtocolVariant, present: bool) -> Result<GaussianState<f64>> {
    scenario.validate()?;
    let (n0, n1) = scenario.willie_means();
    if !present {
        return GaussianState::thermal("W", n0);
    }
    match variant {
        ProtocolVariant::CoherentBaseline => {
            let amp = scenario.willie_excess().sqrt();
            let s = GaussianState::thermal("W", n0)?;
            let mut mean = s.mean().to_vec();
            mean[0] = 2.0 * amp;
            GaussianState::from_parts(&["W"], mean, s.cov().clone())
        }
        _ => GaussianState::thermal("W", n1),
    }
}

/// Photons per mode on the return arm at the receiver.
pub fn return_photons(scenario: &SensingScenario) -> f64 {
    scenario.kappa() * scenario.n_s + scenario.n_b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use covsense_fock::FockState;
    use std::f64::consts::PI;

    fn desk() -> SensingScenario {
        SensingScenario {
            n_s: 0.1,
            n_b: 1.0,
            kappa_T: 0.5,
            kappa_E: 1.0,
            kappa_I: 0.9,
            W: 1e6,
            T: 1e-3,
            theta: 0.7,
            G_pc: 1.1,
            willie_fraction: 1.0,
            n_r: 0.1,
        }
    }

    #[test]
    fn tmsv_shapes() {
        assert_eq!(tmsv(0.0f64).unwrap().cov(), &Mat::identity(4));
        let s = tmsv(8e-4f64).unwrap();
        assert_relative_eq!(s.photon_mean(SIGNAL).unwrap(), 8e-4, max_relative = 1e-12);
        assert!(tmsv(-1.0f64).is_err());

        let g = tmsv(0.25f64).unwrap();
        let a = FockState::from_gaussian(g.mean(), g.cov().as_slice(), &[40, 40]).unwrap();
        let b = FockState::vacuum(&[40, 40])
            .unwrap()
            .apply(&covsense_fock::Channel::TwoModeSqueeze { a: 0, b: 1, gain: 1.25 })
            .unwrap();
        assert_abs_diff_eq!(a.fidelity(&b).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn split_thermal_shapes() {
        assert_eq!(split_thermal(0.0f64).unwrap().cov(), &Mat::identity(4));
        let s = split_thermal(1.0f64).unwrap();
        let st = s.photon_stats(&[SIGNAL, REFERENCE]).unwrap();
        assert_abs_diff_eq!(st.mean[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(st.variance[0], 2.0, epsilon = 1e-12);
        let cross = s.block(0, 1);
        assert_abs_diff_eq!(cross[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cross[(1, 1)], 2.0, epsilon = 1e-12);
        let o = FockState::from_gaussian(s.mean(), s.cov().as_slice(), &[40, 40]).unwrap();
        let (_, c) = o.photon_stats(&[0, 1]).unwrap();
        assert_abs_diff_eq!(st.covariance(0, 1), c[(0, 1)], epsilon = 1e-5);
        for k in 0..=20 {
            let n = 0.5 * k as f64;
            assert!(split_thermal(n).unwrap().classicality_margin() >= -1e-10);
        }
    }

    #[test]
    fn uneven_split_reaches_requested_arms() {
        let s = split_thermal_with_reference(1e-3f64, 50.0).unwrap();
        assert_relative_eq!(s.photon_mean(SIGNAL).unwrap(), 1e-3, max_relative = 1e-9);
        assert_relative_eq!(s.photon_mean(REFERENCE).unwrap(), 50.0, max_relative = 1e-12);
        assert_relative_eq!(s.block(0, 1)[(0, 0)], 2.0 * (50.0f64 * 1e-3).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn identity_pipeline_returns_source() {
        let sc = SensingScenario { theta: 0.0, kappa_T: 1.0, kappa_E: 1.0, n_b: 0.0, kappa_I: 1.0, ..desk() };
        for v in ProtocolVariant::ALL {
            let got = build_receiver_input::<f64>(&sc, v).unwrap();
            let want = probe::<f64>(&sc, v).unwrap();
            assert!((got.cov() - want.cov()).max_abs() < 1e-15);
        }
    }

    #[test]
    fn default_return_brightness_and_residual_correlation() {
        let sc = SensingScenario::default();
        let s = build_receiver_input::<f64>(&sc.with_theta(0.0), ProtocolVariant::Entangled).unwrap();
        assert_relative_eq!(s.photon_mean(SIGNAL).unwrap(), 0.0165 * 8e-4 + 160.0, max_relative = 1e-12);
        let d = desk();
        let s = build_receiver_input::<f64>(&d.with_theta(0.0), ProtocolVariant::Entangled).unwrap();
        let want = 2.0 * (d.kappa() * d.kappa_I * d.n_s * (d.n_s + 1.0)).sqrt();
        assert_relative_eq!(s.block(0, 1)[(0, 0)], want, max_relative = 1e-12);
    }

    #[test]
    fn phase_is_periodic_and_commutes_with_transmitter_loss() {
        let d = desk();
        for v in ProtocolVariant::ALL {
            let a = build_receiver_input::<f64>(&d, v).unwrap();
            let b = build_receiver_input::<f64>(&d.with_theta(d.theta + 2.0 * PI), v).unwrap();
            assert!((a.cov() - b.cov()).max_abs() < 1e-12);
        }
        let p = tmsv(0.2f64).unwrap();
        let first = p.apply_thermal_loss(SIGNAL, d.kappa_T, 0.0).unwrap().apply_phase(SIGNAL, 0.9).unwrap();
        let second = p.apply_phase(SIGNAL, 0.9).unwrap().apply_thermal_loss(SIGNAL, d.kappa_T, 0.0).unwrap();
        assert!((first.cov() - second.cov()).max_abs() < 1e-14);
    }

    #[test]
    fn energy_parity_at_transmitter() {
        let d = desk();
        for v in ProtocolVariant::ALL {
            let s = probe::<f64>(&d, v).unwrap().apply_thermal_loss(SIGNAL, d.kappa_T, 0.0).unwrap();
            assert_relative_eq!(s.photon_mean(SIGNAL).unwrap(), d.kappa_T * d.n_s, max_relative = 1e-12);
        }
        for n in [1e-6, 1e-3, 0.1, 1.0, 10.0] {
            assert!((n * (n + 1.0f64)).sqrt() > n);
        }
    }

    #[test]
    fn willie_sees_thermal_marginals() {
        let d = SensingScenario { n_s: 0.4, n_b: 2.0, kappa_E: 0.5, kappa_T: 1.0, ..desk() };
        let m1 = willie_marginal(&d, ProtocolVariant::Entangled, true).unwrap();
        assert_abs_diff_eq!(m1.photon_mean("W").unwrap(), 2.2, epsilon = 1e-12);
        let c1 = willie_marginal(&d, ProtocolVariant::ClassicalThermal, true).unwrap();
        assert_eq!(m1, c1);
        let m0 = willie_marginal(&d.with_signal(0.0), ProtocolVariant::Entangled, true).unwrap();
        assert_abs_diff_eq!(m0.photon_mean("W").unwrap(), 2.0, epsilon = 1e-14);
        let coh = willie_marginal(&d, ProtocolVariant::CoherentBaseline, true).unwrap();
        assert_abs_diff_eq!(coh.photon_mean("W").unwrap(), 2.2, epsilon = 1e-12);

        // a 50% environment tap of the lossy TMSV arm, seen through the oracle
        let arm = tmsv(0.4f64).unwrap().apply_thermal_loss(SIGNAL, 0.5, 2.0).unwrap();
        let o = FockState::from_gaussian(arm.mean(), arm.cov().as_slice(), &[60, 20]).unwrap().partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(o.photon_mean(0).unwrap(), 2.2, epsilon = 1e-6);
    }

    #[test]
    fn scenario_validation_and_serde_names() {
        let mut s = SensingScenario::default();
        s.validate().unwrap();
        assert_abs_diff_eq!(s.kappa(), 0.0165, epsilon = 1e-15);
        s.kappa_E = 0.0;
        assert!(s.validate().is_err());
        let json = serde_json::to_string(&SensingScenario::default()).unwrap();
        for key in ["N_S", "N_B", "kappa_T", "kappa_E", "kappa_I", "W", "T", "theta", "G_pc", "willie_fraction", "N_R"] {
            assert!(json.contains(&format!("\"{key}\"")), "{key}");
        }
        assert_eq!("classical".parse::<ProtocolVariant>().unwrap(), ProtocolVariant::ClassicalThermal);
        assert!("quantum".parse::<ProtocolVariant>().is_err());
    }
}
