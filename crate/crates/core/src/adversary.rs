//! Willie's detection problem: telling `M` thermal modes of mean `n0` from
//! `M` modes of mean `n1 > n0` by photon counting.

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{check, Error, Result};
use crate::sources::{ProtocolVariant, SensingScenario};

/// Expected total count above which the counting test switches to a
/// Gaussian approximation.
pub const EXACT_COUNT_LIMIT: f64 = 1e6;
/// Largest probe brightness the solvers will return.
pub const NS_CAP: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ExactThreshold,
    GaussianApprox,
}

impl TestMethod {
    pub fn name(self) -> &'static str {
        match self {
            TestMethod::ExactThreshold => "exact_threshold",
            TestMethod::GaussianApprox => "gaussian_approx",
        }
    }
}

/// Optimal equal-prior counting test: decide "present" when the total count
/// reaches `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionTest {
    pub threshold: u64,
    pub pe: f64,
    pub method: TestMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovertnessReport {
    pub n0: f64,
    pub n1: f64,
    /// Modes Willie observes.
    pub modes: f64,
    pub epsilon: f64,
    pub pe_lower: f64,
    /// Absent when counts are not negative binomial (coherent probe).
    pub pe_exact: Option<f64>,
    pub method: Option<TestMethod>,
    pub rel_entropy_per_mode: f64,
}

/// `ln(1 + x) - x`, accurate for small `x`.
fn log1p_minus(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // alternating series, truncation below 1e-19 relative
        let mut term = -x * x / 2.0;
        let mut sum = term;
        for k in 3..=10 {
            term *= -x * (k as f64 - 1.0) / k as f64;
            sum += term;
        }
        sum
    } else {
        x.ln_1p() - x
    }
}

/// Relative entropy `D(thermal(n_a) ‖ thermal(n_b))` in nats per mode.
pub fn thermal_rel_entropy(n_a: f64, n_b: f64) -> Result<f64> {
    check(n_a >= 0.0, "n_a", n_a, "must be non-negative")?;
    check(n_b >= 0.0, "n_b", n_b, "must be non-negative")?;
    rel_entropy_with_excess(n_b, n_a - n_b)
}

/// `D(thermal(n_b + d) ‖ thermal(n_b))` with the excess `d` given exactly.
fn rel_entropy_with_excess(n_b: f64, d: f64) -> Result<f64> {
    let n_a = n_b + d;
    if d == 0.0 {
        return Ok(0.0);
    }
    if n_b == 0.0 {
        return Err(Error::InvalidParameter { name: "n_b", value: n_b, reason: "zero reference with n_a > 0 diverges" });
    }
    let u = d / (n_b * (n_a + 1.0));
    let v = d / (n_b + 1.0);
    let lead = d * d / (n_b * (n_a + 1.0) * (n_b + 1.0));
    let a_term = if n_a == 0.0 { 0.0 } else { n_a * log1p_minus(u) };
    Ok((lead + a_term - log1p_minus(v)).max(0.0))
}

/// Per-mode relative entropy of Willie's marginals, present against absent.
pub fn willie_rel_entropy(scenario: &SensingScenario, variant: ProtocolVariant) -> Result<f64> {
    let n0 = scenario.n_b;
    let excess = scenario.willie_excess();
    check(excess >= 0.0 && n0 >= 0.0, "willie excess", excess, "must be non-negative")?;
    match variant {
        ProtocolVariant::CoherentBaseline => {
            if excess == 0.0 {
                return Ok(0.0);
            }
            if n0 == 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(excess * (1.0 / n0).ln_1p())
        }
        _ => rel_entropy_with_excess(n0, excess),
    }
}

/// Covertness parameter `ε = √(M D / 8)`, so that `P_e ≥ ½ - ε`.
pub fn epsilon_of(scenario: &SensingScenario, variant: ProtocolVariant) -> Result<f64> {
    scenario.validate()?;
    Ok((scenario.modes() * willie_rel_entropy(scenario, variant)? / 8.0).sqrt())
}

/// `-ln F` for thermal states, root fidelity `F = 1/(√((n0+1)(n1+1)) - √(n0 n1))`.
pub fn thermal_neg_log_fidelity(n0: f64, n1: f64) -> f64 {
    let d = n1 - n0;
    let up = (n0 + 1.0).sqrt() + (n1 + 1.0).sqrt();
    let down = n0.sqrt() + n1.sqrt();
    let sum = ((n0 + 1.0) * (n1 + 1.0)).sqrt() + (n0 * n1).sqrt();
    let gap = if down == 0.0 { 0.5 * d * d / (up * up) } else { 0.5 * d * d * (1.0 / (up * up) + 1.0 / (down * down)) };
    (gap / sum).ln_1p()
}

pub fn thermal_fidelity(n0: f64, n1: f64) -> f64 {
    (-thermal_neg_log_fidelity(n0, n1)).exp()
}

/// `(1 - √(1 - F^{2M}))/2` from the per-mode `-ln F`.
fn pe_from_neg_log_fidelity(neg_log_f: f64, modes: f64) -> f64 {
    let f2m = (-2.0 * modes * neg_log_f).exp();
    let gap = -(-2.0 * modes * neg_log_f).exp_m1();
    0.5 * f2m / (1.0 + gap.sqrt())
}

/// Fidelity lower bound on Willie's error over `modes` copies.
pub fn pe_lower_bound(n0: f64, n1: f64, modes: f64) -> Result<f64> {
    check(n0 >= 0.0, "n0", n0, "must be non-negative")?;
    check(n1 >= 0.0, "n1", n1, "must be non-negative")?;
    check(modes >= 1.0, "M", modes, "must be at least 1")?;
    Ok(pe_from_neg_log_fidelity(thermal_neg_log_fidelity(n0, n1), modes))
}

/// Natural log of the negative-binomial pmf of a total count `k` over `r`
/// thermal modes of mean `n`.
fn nb_ln_pmf(k: f64, r: f64, n: f64) -> f64 {
    ln_gamma(k + r) - ln_gamma(r) - ln_gamma(k + 1.0) + k * (n / (n + 1.0)).ln() - r * n.ln_1p()
}

/// `Σ_{k ∈ [from, to)} P(k)` for the total count over `r` modes of mean `n > 0`;
/// `to = None` sums the whole upper tail.
fn nb_mass(r: f64, n: f64, from: u64, to: Option<u64>) -> f64 {
    let mean = r * n;
    let sd = (r * n * (n + 1.0)).sqrt();
    let lo = from.max((mean - 60.0 * sd - 50.0).max(0.0).floor() as u64);
    let hi = to.unwrap_or(u64::MAX).min((mean + 60.0 * sd + 200.0).ceil() as u64);
    if lo >= hi {
        return 0.0;
    }
    let ln_q = (n / (n + 1.0)).ln();
    let mut lp = nb_ln_pmf(lo as f64, r, n);
    let mut sum = 0.0;
    for k in lo..hi {
        sum += lp.exp();
        let kf = k as f64;
        lp += ((kf + r) / (kf + 1.0)).ln() + ln_q;
    }
    sum
}

/// Likelihood-ratio threshold: smallest total count favouring "present".
fn lr_threshold(n0: f64, n1: f64, r: f64) -> f64 {
    if n0 == 0.0 {
        return 1.0;
    }
    let per_count = (n1 / n0).ln() - ((n1 + 1.0) / (n0 + 1.0)).ln();
    (r * ((n1 - n0) / (n0 + 1.0)).ln_1p() / per_count).ceil()
}

fn exact_pe(n0: f64, n1: f64, r: f64, t: u64) -> f64 {
    let false_alarm = if n0 == 0.0 { if t == 0 { 1.0 } else { 0.0 } } else { nb_mass(r, n0, t, None) };
    let miss = nb_mass(r, n1, 0, Some(t));
    0.5 * (false_alarm + miss)
}

fn normal_upper(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn gaussian_test(n0: f64, n1: f64, r: f64) -> DetectionTest {
    let (mu0, mu1) = (r * n0, r * n1);
    let (var0, var1) = (r * n0 * (n0 + 1.0), r * n1 * (n1 + 1.0));
    let (s0, s1) = (var0.sqrt(), var1.sqrt());
    // densities cross where (r²-1) z² - 2 r d z + d² - 2 ln r = 0, in units of s0 from mu0
    let rel = r * (n0 - n1) * (n0 + n1 + 1.0) / var1;
    let ratio = s0 / s1;
    let d = (mu1 - mu0) / s1;
    let a = rel;
    let b = -2.0 * ratio * d;
    let c = d * d - rel.ln_1p();
    let q = 0.5 * (-b + (b * b - 4.0 * a * c).sqrt());
    let z = c / q;
    let pe = 0.5 * (normal_upper(z) + normal_upper(d - ratio * z));
    DetectionTest { threshold: (mu0 + s0 * z).max(0.0).ceil() as u64, pe: pe.min(0.5), method: TestMethod::GaussianApprox }
}

fn exact_test(n0: f64, n1: f64, r: f64) -> DetectionTest {
    let t0 = lr_threshold(n0, n1, r).max(0.0) as u64;
    let mut best = DetectionTest { threshold: 0, pe: 0.5, method: TestMethod::ExactThreshold };
    for t in t0.saturating_sub(1)..=t0 + 1 {
        let pe = exact_pe(n0, n1, r, t);
        if pe < best.pe {
            best = DetectionTest { threshold: t, pe, method: TestMethod::ExactThreshold };
        }
    }
    best
}

fn counting_inputs(n0: f64, n1: f64, modes: f64, window_count: u32) -> Result<f64> {
    check(n0 >= 0.0, "n0", n0, "must be non-negative")?;
    check(n1 >= n0, "n1", n1, "must be at least n0")?;
    check(modes >= 1.0, "M", modes, "must be at least 1")?;
    check(window_count >= 1, "window_count", window_count as f64, "must be at least 1")?;
    Ok(modes * window_count as f64)
}

/// Minimal error of Willie's counting test over `window_count` windows of
/// `modes` modes each. Exact summation up to [`EXACT_COUNT_LIMIT`] expected
/// counts, Gaussian approximation beyond.
pub fn pe_optimal_counting(n0: f64, n1: f64, modes: f64, window_count: u32) -> Result<DetectionTest> {
    let r = counting_inputs(n0, n1, modes, window_count)?;
    if n1 == n0 {
        return Ok(DetectionTest { threshold: 0, pe: 0.5, method: TestMethod::ExactThreshold });
    }
    if n0 == 0.0 {
        // only "no photons at all" is compatible with the null
        return Ok(DetectionTest { threshold: 1, pe: 0.5 * (-r * n1.ln_1p()).exp(), method: TestMethod::ExactThreshold });
    }
    if r * n1 <= EXACT_COUNT_LIMIT {
        Ok(exact_test(n0, n1, r))
    } else {
        Ok(gaussian_test(n0, n1, r))
    }
}

/// Exact test regardless of size; refuses beyond `limit` expected counts.
pub fn pe_exact_counting(n0: f64, n1: f64, modes: f64, window_count: u32, limit: f64) -> Result<DetectionTest> {
    let r = counting_inputs(n0, n1, modes, window_count)?;
    if r * n1 > limit {
        return Err(Error::CountOverflow(r * n1));
    }
    if n1 == n0 {
        return Ok(DetectionTest { threshold: 0, pe: 0.5, method: TestMethod::ExactThreshold });
    }
    Ok(exact_test(n0, n1, r))
}

/// Gaussian approximation regardless of size.
pub fn pe_gaussian_counting(n0: f64, n1: f64, modes: f64, window_count: u32) -> Result<DetectionTest> {
    let r = counting_inputs(n0, n1, modes, window_count)?;
    if n1 == n0 {
        return Ok(DetectionTest { threshold: 0, pe: 0.5, method: TestMethod::GaussianApprox });
    }
    Ok(gaussian_test(n0, n1, r))
}

/// Means, ε, fidelity bound and optimal counting error for one scenario.
pub fn covertness_report(scenario: &SensingScenario, variant: ProtocolVariant, window_count: u32) -> Result<CovertnessReport> {
    scenario.validate()?;
    let (n0, n1) = scenario.willie_means();
    let modes = scenario.modes() * window_count.max(1) as f64;
    let d = willie_rel_entropy(scenario, variant)?;
    let (pe_lower, test) = match variant {
        ProtocolVariant::CoherentBaseline => {
            // displaced thermal against thermal with equal noise: -ln F = |β|²/(2(2 n0 + 1))
            let nlf = scenario.willie_excess() / (2.0 * (2.0 * n0 + 1.0));
            (pe_from_neg_log_fidelity(nlf, modes), None)
        }
        _ => (pe_lower_bound(n0, n1, modes)?, Some(pe_optimal_counting(n0, n1, scenario.modes(), window_count)?)),
    };
    Ok(CovertnessReport {
        n0,
        n1,
        modes,
        epsilon: (modes * d / 8.0).sqrt(),
        pe_lower,
        pe_exact: test.map(|t| t.pe),
        method: test.map(|t| t.method),
        rel_entropy_per_mode: d,
    })
}

/// Probe brightness giving covertness `target`, by bisection on `ε(N_S)`.
pub fn solve_ns_for_epsilon(target: f64, scenario: &SensingScenario, variant: ProtocolVariant) -> Result<f64> {
    check(target >= 0.0, "epsilon target", target, "must be non-negative")?;
    if target == 0.0 {
        return Ok(0.0);
    }
    let eps = |n: f64| epsilon_of(&scenario.with_signal(n), variant);
    if eps(NS_CAP)? < target {
        return Err(Error::NoBracket { target, cap: NS_CAP });
    }
    let (mut lo, mut hi) = (0.0, NS_CAP);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if eps(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Square-root-law schedule: `κ N_S √M = constant` at every interrogation time.
pub fn sqrt_law_schedule(constant: f64, times: &[f64], scenario: &SensingScenario) -> Result<Vec<SensingScenario>> {
    check(constant > 0.0, "kappa N_S sqrt(M)", constant, "must be positive")?;
    times
        .iter()
        .map(|&t| {
            let mut s = SensingScenario { T: t, ..scenario.clone() };
            s.validate()?;
            s.n_s = constant / (s.kappa() * s.modes().sqrt());
            if s.n_s > NS_CAP {
                return Err(Error::CapExceeded { value: s.n_s, cap: NS_CAP });
            }
            Ok(s)
        })
        .collect()
}

/// Fixed-ratio schedule `κ N_S / N_B = ratio`, which breaks the square-root law.
pub fn fixed_ratio_schedule(ratio: f64, times: &[f64], scenario: &SensingScenario) -> Result<Vec<SensingScenario>> {
    check(ratio > 0.0, "kappa N_S / N_B", ratio, "must be positive")?;
    times
        .iter()
        .map(|&t| {
            let mut s = SensingScenario { T: t, ..scenario.clone() };
            s.validate()?;
            s.n_s = ratio * s.n_b / s.kappa();
            if s.n_s > NS_CAP {
                return Err(Error::CapExceeded { value: s.n_s, cap: NS_CAP });
            }
            Ok(s)
        })
        .collect()
}

/// Slope of a least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use covsense_fock::FockState;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geometric(n: f64, k: i32) -> f64 {
        n.powi(k) / (n + 1.0).powi(k + 1)
    }

    #[test]
    fn rel_entropy_values() {
        assert_eq!(thermal_rel_entropy(3.0, 3.0).unwrap(), 0.0);
        let want: f64 = (0..400).map(|k| geometric(2.0, k) * (geometric(2.0, k).ln() - geometric(1.0, k).ln())).sum();
        assert_abs_diff_eq!(thermal_rel_entropy(2.0, 1.0).unwrap(), want, epsilon = 1e-8);
        let a = FockState::thermal(120, 2.0).unwrap();
        let b = FockState::thermal(120, 1.0).unwrap();
        assert_abs_diff_eq!(thermal_rel_entropy(2.0, 1.0).unwrap(), a.rel_entropy(&b).unwrap(), epsilon = 1e-8);
        assert_abs_diff_eq!(thermal_rel_entropy(0.0, 1.0).unwrap(), 2.0f64.ln(), epsilon = 1e-15);
        assert!(thermal_rel_entropy(1.0, 0.0).is_err());
        assert_eq!(thermal_rel_entropy(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rel_entropy_small_difference_law() {
        let (nb, d) = (160.0, 1e-3);
        let series = d * d / (2.0 * nb * (nb + 1.0));
        assert_relative_eq!(thermal_rel_entropy(nb + d, nb).unwrap(), series, max_relative = 1e-2);
        let (nb, d) = (1280.0, 1e-6);
        let series = d * d / (2.0 * nb * (nb + 1.0));
        assert_relative_eq!(thermal_rel_entropy(nb + d, nb).unwrap(), series, max_relative = 1e-6);
    }

    fn sc() -> SensingScenario {
        SensingScenario { n_b: 160.0, n_s: 1e-4, W: 1e9, ..SensingScenario::default() }
    }

    #[test]
    fn epsilon_scaling() {
        let s = sc();
        let v = ProtocolVariant::Entangled;
        assert_eq!(epsilon_of(&s.with_signal(0.0), v).unwrap(), 0.0);
        let e1 = epsilon_of(&s, v).unwrap();
        assert_relative_eq!(epsilon_of(&s.with_signal(2e-4), v).unwrap() / e1, 2.0, max_relative = 1e-3);
        let s4 = SensingScenario { T: 4.0 * s.T, ..s.clone() };
        assert_relative_eq!(epsilon_of(&s4, v).unwrap() / e1, 2.0, max_relative = 1e-3);
        assert_eq!(epsilon_of(&s, ProtocolVariant::ClassicalThermal).unwrap(), e1);
    }

    #[test]
    fn epsilon_constant_at_fixed_signal_to_noise() {
        let base = sc();
        let eps: Vec<f64> = [40.0, 80.0, 160.0, 320.0, 640.0, 1280.0]
            .iter()
            .map(|&nb| epsilon_of(&SensingScenario { n_b: nb, n_s: 1e-6 * nb, ..base.clone() }, ProtocolVariant::Entangled).unwrap())
            .collect();
        let (lo, hi) = eps.iter().fold((f64::MAX, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
        assert!(hi / lo - 1.0 < 0.02, "{eps:?}");
    }

    #[test]
    fn fidelity_bound_values() {
        assert_eq!(pe_lower_bound(2.0, 2.0, 1e6).unwrap(), 0.5);
        // F = 1/√2, F² = ½
        let want = (1.0 - (0.5f64).sqrt()) / 2.0;
        let bound = pe_lower_bound(0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(bound, want, epsilon = 1e-15);
        assert_abs_diff_eq!(thermal_fidelity(0.0, 1.0), 0.5f64.sqrt(), epsilon = 1e-15);
        let v = FockState::vacuum(&[60]).unwrap();
        let t = FockState::thermal(60, 1.0).unwrap();
        let helstrom = 0.5 * (1.0 - v.trace_distance(&t).unwrap());
        assert!(bound <= helstrom);
        assert_abs_diff_eq!(thermal_fidelity(0.0, 1.0), v.fidelity(&t).unwrap(), epsilon = 1e-10);
        let t2 = FockState::thermal(60, 0.5).unwrap();
        assert_abs_diff_eq!(thermal_fidelity(0.5, 1.0), t2.fidelity(&t).unwrap(), epsilon = 1e-10);
        // closed form evaluated directly where it is well conditioned
        let direct = 1.0 / ((3.0f64 * 4.0).sqrt() - (2.0f64 * 3.0).sqrt());
        assert_relative_eq!(thermal_fidelity(2.0, 3.0), direct, max_relative = 1e-14);
    }

    #[test]
    fn fidelity_bound_monotone() {
        let mut last = 0.5;
        for m in [1.0, 10.0, 100.0, 1e4, 1e6] {
            let p = pe_lower_bound(160.0, 160.01, m).unwrap();
            assert!(p <= last);
            last = p;
        }
        let mut last = 0.5;
        for d in [0.0, 0.01, 0.1, 1.0, 10.0] {
            let p = pe_lower_bound(5.0, 5.0 + d, 100.0).unwrap();
            assert!(p <= last);
            last = p;
        }
    }

    #[test]
    fn counting_small_cases() {
        let t = pe_optimal_counting(1.0, 1.0, 3.0, 1).unwrap();
        assert_eq!(t.pe, 0.5);
        let t = pe_optimal_counting(0.0, 1.0, 1.0, 1).unwrap();
        assert_abs_diff_eq!(t.pe, 0.25, epsilon = 1e-15);
        assert_eq!(t.threshold, 1);
        let t = pe_optimal_counting(1.0, 2.0, 1.0, 1).unwrap();
        assert_eq!(t.threshold, 2);
        // ½ [P0(k ≥ 2) + P1(k < 2)] by brute summation
        let want = 0.5 * ((2..500).map(|k| geometric(1.0, k)).sum::<f64>() + geometric(2.0, 0) + geometric(2.0, 1));
        assert_abs_diff_eq!(t.pe, want, epsilon = 1e-12);
        assert_abs_diff_eq!(t.pe, 0.402_777_777_777_777_8, epsilon = 1e-12);
        assert!(pe_optimal_counting(2.0, 1.0, 1.0, 1).is_err());
    }

    fn nb_pmf(k: u64, r: f64, n: f64) -> f64 {
        nb_ln_pmf(k as f64, r, n).exp()
    }

    #[test]
    fn threshold_beats_random_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = rng.random_range(1..=5) as f64;
            let n0 = rng.random_range(0.2..2.0);
            let n1 = n0 + rng.random_range(0.1..3.0);
            let best = pe_optimal_counting(n0, n1, m, 1).unwrap().pe;
            for _ in 0..50 {
                let rule: Vec<bool> = (0..=50).map(|_| rng.random_bool(0.5)).collect();
                let mut pe = 0.0;
                for k in 0..400u64 {
                    let says_present = if k <= 50 { rule[k as usize] } else { true };
                    pe += 0.5 * if says_present { nb_pmf(k, m, n0) } else { nb_pmf(k, m, n1) };
                }
                assert!(best <= pe + 1e-12);
            }
        }
    }

    #[test]
    fn approximation_is_continuous_at_switch() {
        for (n0, d) in [(160.0, 0.3), (1280.0, 5.0), (1.0, 0.01)] {
            let m = EXACT_COUNT_LIMIT / (n0 + d);
            let exact = pe_exact_counting(n0, n0 + d, m, 1, 2.0 * EXACT_COUNT_LIMIT).unwrap();
            let approx = pe_gaussian_counting(n0, n0 + d, m, 1).unwrap();
            assert_relative_eq!(exact.pe, approx.pe, max_relative = 1e-2);
            let above = pe_optimal_counting(n0, n0 + d, m * 1.0001, 1).unwrap();
            assert_eq!(above.method, TestMethod::GaussianApprox);
            assert_relative_eq!(above.pe, exact.pe, max_relative = 1e-2);
        }
        assert!(matches!(pe_exact_counting(1.0, 2.0, 1e7, 1, 1e6), Err(Error::CountOverflow(_))));
    }

    #[test]
    fn windows_add_modes() {
        let a = pe_optimal_counting(2.0, 2.5, 20.0, 3).unwrap();
        let b = pe_optimal_counting(2.0, 2.5, 60.0, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn solver_round_trips() {
        let s = SensingScenario { n_b: 640.0, ..sc() };
        let v = ProtocolVariant::Entangled;
        assert_eq!(solve_ns_for_epsilon(0.0, &s, v).unwrap(), 0.0);
        for target in [1e-5, 2e-4, 1e-2] {
            let n = solve_ns_for_epsilon(target, &s, v).unwrap();
            assert_relative_eq!(epsilon_of(&s.with_signal(n), v).unwrap(), target, max_relative = 1e-6);
            // small-signal inversion: ε ≈ f κ_T (1-κ_E) N_S √M / √(16 N_B (N_B+1))
            let lin = target * (16.0 * s.n_b * (s.n_b + 1.0)).sqrt() / ((1.0 - s.kappa_E) * s.kappa_T * s.modes().sqrt());
            assert_relative_eq!(n, lin, max_relative = 1e-2);
        }
        assert!(matches!(solve_ns_for_epsilon(1e9, &s, v), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn schedules() {
        let s = SensingScenario { n_b: 1280.0, kappa_E: 0.5, kappa_T: 0.0165 / 0.5, W: 1.8e12, ..SensingScenario::default() };
        let times = [1e-3, 4e-3];
        let obey = sqrt_law_schedule(200.0, &times, &s).unwrap();
        assert_relative_eq!(obey[0].n_s / obey[1].n_s, 2.0, max_relative = 1e-6);
        let e0 = epsilon_of(&obey[0], ProtocolVariant::Entangled).unwrap();
        let e1 = epsilon_of(&obey[1], ProtocolVariant::Entangled).unwrap();
        assert_relative_eq!(e0, e1, max_relative = 2e-2);
        assert!(matches!(sqrt_law_schedule(200.0, &[1e-12], &s), Err(Error::CapExceeded { .. })));
        let violate = fixed_ratio_schedule(6.25e-5, &times, &s).unwrap();
        assert_eq!(violate[0].n_s, violate[1].n_s);
    }

    #[test]
    fn report_orders_bounds() {
        let r = covertness_report(&sc(), ProtocolVariant::Entangled, 1).unwrap();
        assert!(r.pe_lower <= r.pe_exact.unwrap() && r.pe_exact.unwrap() <= 0.5);
        assert!(0.5 - r.epsilon <= r.pe_exact.unwrap());
        let c = covertness_report(&sc(), ProtocolVariant::CoherentBaseline, 1).unwrap();
        assert!(c.pe_exact.is_none());
        assert!(c.epsilon > r.epsilon);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn bound_ladder(n0 in 0.0..20.0f64, d in 0.0..5.0f64, lm in 0.0..6.0f64) {
            let m = 10f64.powf(lm).round().max(1.0);
            let lower = pe_lower_bound(n0, n0 + d, m).unwrap();
            let exact = pe_optimal_counting(n0, n0 + d, m, 1).unwrap();
            prop_assert!(lower <= exact.pe * (1.0 + 1e-9) + 1e-300, "{} > {}", lower, exact.pe);
            prop_assert!(exact.pe <= 0.5);
            if n0 > 0.0 {
                let eps = (m * thermal_rel_entropy(n0 + d, n0).unwrap() / 8.0).sqrt();
                if eps <= 0.5 {
                    prop_assert!(0.5 - eps <= exact.pe + 1e-9);
                }
            }
        }
    }
}
