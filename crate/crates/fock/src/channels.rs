//! Gaussian unitaries and channels in the truncated number basis.
//!
//! Two-mode unitaries conserve either the total photon number (beamsplitter)
//! or the photon-number difference (two-mode squeezer), so their generators
//! split into small tridiagonal sector blocks that are exponentiated one at a
//! time. Single-mode channels are built by letting the mode interact with a
//! vacuum ancilla through one of those unitaries and tracing the ancilla (or,
//! for the conjugator, the original mode).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{FockError, FockState, Result};

/// Extra sector headroom used when an ancilla is traced out.
const ANCILLA_HEADROOM: usize = 80;

/// Channels the oracle knows how to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Channel {
    /// `exp(iθ n̂)` on one mode.
    Phase { mode: usize, theta: f64 },
    /// `a → √η a + √(1-η) b`, `b → √η b - √(1-η) a`.
    BeamSplitter { a: usize, b: usize, eta: f64 },
    /// `a → √G a + √(G-1) b†` (and symmetrically for `b`).
    TwoModeSqueeze { a: usize, b: usize, gain: f64 },
    /// Output photon number `κ n + noise`.
    ThermalLoss { mode: usize, kappa: f64, noise: f64 },
    /// Pure loss with vacuum environment.
    PureLoss { mode: usize, eta: f64 },
    /// Phase-insensitive quantum-limited amplifier.
    Amplifier { mode: usize, gain: f64 },
    /// Two-mode squeeze against a vacuum ancilla; the ancilla (now carrying the
    /// phase conjugate) replaces the mode and the original mode is traced out.
    Conjugate { mode: usize, gain: f64 },
}

/// One sparse operator column: basis `in` maps to `out` with `amp`.
type SparseColumn = Vec<(usize, f64)>;

/// Single-mode Kraus operator that sends each number state to at most one
/// number state: `K|n⟩ = amp(n) |target(n)⟩`.
struct ShiftKraus {
    map: Vec<Option<(usize, f64)>>,
}

fn expm(generator: &DMatrix<f64>) -> DMatrix<f64> {
    generator.clone().exp()
}

/// Beamsplitter sector: basis `|j, N-j⟩` for the allowed `j`, generator
/// `φ (a†b - a b†)`.
fn beamsplitter_sector(total: usize, js: &[usize], phi: f64) -> DMatrix<f64> {
    let size = js.len();
    let mut g = DMatrix::zeros(size, size);
    for (col, &j) in js.iter().enumerate() {
        // a†b |j, N-j⟩ = √(j+1) √(N-j) |j+1, N-j-1⟩
        if let Some(row) = js.iter().position(|&x| x == j + 1) {
            let v = (((j + 1) * (total - j)) as f64).sqrt();
            g[(row, col)] += phi * v;
        }
        // -a b† |j, N-j⟩ = -√j √(N-j+1) |j-1, N-j+1⟩
        if j > 0 {
            if let Some(row) = js.iter().position(|&x| x == j - 1) {
                let v = ((j * (total - j + 1)) as f64).sqrt();
                g[(row, col)] -= phi * v;
            }
        }
    }
    expm(&g)
}

/// Squeezer sector with `n_b - n_a = shift`: basis `|k, k+shift⟩` for the
/// given `k`, generator `r (a†b† - a b)`.
fn squeezer_sector(shift: isize, ks: &[usize], r: f64) -> DMatrix<f64> {
    let size = ks.len();
    let mut g = DMatrix::zeros(size, size);
    let nb = |k: usize| (k as isize + shift) as usize;
    for (col, &k) in ks.iter().enumerate() {
        if let Some(row) = ks.iter().position(|&x| x == k + 1) {
            let v = (((k + 1) * (nb(k) + 1)) as f64).sqrt();
            g[(row, col)] += r * v;
        }
        if k > 0 && nb(k) > 0 {
            if let Some(row) = ks.iter().position(|&x| x == k - 1) {
                let v = ((k * nb(k)) as f64).sqrt();
                g[(row, col)] -= r * v;
            }
        }
    }
    expm(&g)
}

/// `amps[n][f] = ⟨n-f, f| U_BS |n, 0⟩` (system, environment).
fn loss_amplitudes(cutoff: usize, eta: f64) -> Vec<Vec<f64>> {
    let phi = eta.sqrt().acos();
    (0..cutoff)
        .map(|n| {
            // env count f = n - j for system count j
            let js: Vec<usize> = (0..=n).collect();
            let u = beamsplitter_sector(n, &js, phi);
            let col = n; // |n, 0⟩ has j = n
            (0..=n).map(|f| u[(n - f, col)]).collect()
        })
        .collect()
}

/// `amps[n][k] = ⟨k, n+k| U_TMS |0, n⟩` (ancilla, system).
fn squeeze_amplitudes(cutoff: usize, gain: f64) -> Vec<Vec<f64>> {
    let r = gain.sqrt().acosh();
    let depth = cutoff + ANCILLA_HEADROOM;
    (0..cutoff)
        .map(|n| {
            let ks: Vec<usize> = (0..depth).collect();
            let u = squeezer_sector(n as isize, &ks, r);
            (0..cutoff).map(|k| u[(k, 0)]).collect()
        })
        .collect()
}

impl FockState {
    /// Applies a channel and returns the new state.
    pub fn apply(&self, channel: &Channel) -> Result<FockState> {
        match *channel {
            Channel::Phase { mode, theta } => self.phase(mode, theta),
            Channel::BeamSplitter { a, b, eta } => {
                if !(0.0..=1.0).contains(&eta) {
                    return Err(FockError::InvalidParameter(format!("transmissivity {eta}")));
                }
                self.beamsplitter(a, b, eta)
            }
            Channel::TwoModeSqueeze { a, b, gain } => {
                if gain < 1.0 {
                    return Err(FockError::InvalidParameter(format!("gain {gain}")));
                }
                self.two_mode_squeeze(a, b, gain)
            }
            Channel::PureLoss { mode, eta } => {
                if !(0.0..=1.0).contains(&eta) {
                    return Err(FockError::InvalidParameter(format!("transmissivity {eta}")));
                }
                self.pure_loss(mode, eta)
            }
            Channel::Amplifier { mode, gain } => {
                if gain < 1.0 {
                    return Err(FockError::InvalidParameter(format!("gain {gain}")));
                }
                self.amplifier(mode, gain)
            }
            Channel::ThermalLoss { mode, kappa, noise } => {
                if !(kappa > 0.0 && kappa <= 1.0) || noise < 0.0 {
                    return Err(FockError::InvalidParameter(format!("kappa {kappa}, noise {noise}")));
                }
                // pure loss κ/(1+N) then amplifier 1+N gives κ V + (1-κ+2N) I
                let g = 1.0 + noise;
                let lossy = self.pure_loss(mode, kappa / g)?;
                if noise > 0.0 {
                    lossy.amplifier(mode, g)
                } else {
                    Ok(lossy)
                }
            }
            Channel::Conjugate { mode, gain } => {
                if gain < 1.0 {
                    return Err(FockError::InvalidParameter(format!("gain {gain}")));
                }
                self.conjugate(mode, gain)
            }
        }
    }

    fn phase(&self, mode: usize, theta: f64) -> Result<FockState> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        let d = self.dim();
        let ph: Vec<Complex64> = (0..d)
            .map(|i| Complex64::from_polar(1.0, theta * self.occupation(i, mode) as f64))
            .collect();
        for c in 0..d {
            for r in 0..d {
                out.rho[(r, c)] *= ph[r] * ph[c].conj();
            }
        }
        Ok(out)
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_mode(a)?;
        self.check_mode(b)?;
        if a == b {
            return Err(FockError::SameMode);
        }
        Ok(())
    }

    /// Builds the full-space sparse unitary for a two-mode interaction whose
    /// local action is given per local input basis `(n_a, n_b)`.
    fn embed_two_mode(&self, a: usize, b: usize, local: &[Vec<Vec<(usize, usize, f64)>>]) -> Vec<SparseColumn> {
        let d = self.dim();
        (0..d)
            .map(|idx| {
                let na = self.occupation(idx, a);
                let nb = self.occupation(idx, b);
                let base = idx - na * self.strides[a] - nb * self.strides[b];
                local[na][nb]
                    .iter()
                    .map(|&(oa, ob, amp)| (base + oa * self.strides[a] + ob * self.strides[b], amp))
                    .collect()
            })
            .collect()
    }

    fn conjugate_by(&self, columns: &[SparseColumn]) -> FockState {
        // ρ' = U ρ U†, U given column-wise.
        let d = self.dim();
        let zero = Complex64::new(0.0, 0.0);
        let mut left = DMatrix::<Complex64>::zeros(d, d);
        for c in 0..d {
            for (j, col) in columns.iter().enumerate() {
                let v = self.rho[(j, c)];
                if v == zero {
                    continue;
                }
                for &(i, u) in col {
                    left[(i, c)] += v * u;
                }
            }
        }
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        for (j, col) in columns.iter().enumerate() {
            let src = left.column(j);
            let rows: Vec<usize> = (0..d).filter(|&r| src[r] != zero).collect();
            for &(i, u) in col {
                for &r in &rows {
                    out[(r, i)] += src[r] * u;
                }
            }
        }
        FockState { cutoffs: self.cutoffs.clone(), strides: self.strides.clone(), rho: out }
    }

    fn beamsplitter(&self, a: usize, b: usize, eta: f64) -> Result<FockState> {
        self.check_pair(a, b)?;
        let (ca, cb) = (self.cutoffs[a], self.cutoffs[b]);
        let phi = eta.sqrt().acos();
        let mut local = vec![vec![Vec::new(); cb]; ca];
        for total in 0..(ca + cb - 1) {
            let js: Vec<usize> = (0..=total).filter(|&j| j < ca && total - j < cb).collect();
            if js.is_empty() {
                continue;
            }
            let u = beamsplitter_sector(total, &js, phi);
            for (col, &j) in js.iter().enumerate() {
                for (row, &jo) in js.iter().enumerate() {
                    let amp = u[(row, col)];
                    if amp != 0.0 {
                        local[j][total - j].push((jo, total - jo, amp));
                    }
                }
            }
        }
        let cols = self.embed_two_mode(a, b, &local);
        Ok(self.conjugate_by(&cols))
    }

    fn two_mode_squeeze(&self, a: usize, b: usize, gain: f64) -> Result<FockState> {
        self.check_pair(a, b)?;
        let (ca, cb) = (self.cutoffs[a], self.cutoffs[b]);
        let r = gain.sqrt().acosh();
        let mut local = vec![vec![Vec::new(); cb]; ca];
        for shift in -(ca as isize - 1)..(cb as isize) {
            let ks: Vec<usize> = (0..ca).filter(|&k| k as isize + shift >= 0 && ((k as isize + shift) as usize) < cb).collect();
            if ks.is_empty() {
                continue;
            }
            let u = squeezer_sector(shift, &ks, r);
            for (col, &k) in ks.iter().enumerate() {
                for (row, &ko) in ks.iter().enumerate() {
                    let amp = u[(row, col)];
                    if amp != 0.0 {
                        let nb_in = (k as isize + shift) as usize;
                        let nb_out = (ko as isize + shift) as usize;
                        local[k][nb_in].push((ko, nb_out, amp));
                    }
                }
            }
        }
        let cols = self.embed_two_mode(a, b, &local);
        Ok(self.conjugate_by(&cols))
    }

    /// `ρ → Σ_K (K⊗1) ρ (K⊗1)†` for shift-structured single-mode Kraus sets.
    fn apply_kraus(&self, mode: usize, ops: &[ShiftKraus]) -> FockState {
        let d = self.dim();
        let stride = self.strides[mode];
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        // states built from charge-conserving unitaries are mostly exact zeros
        let support: Vec<Vec<u32>> =
            (0..d).map(|c| (0..d).filter(|&r| self.rho[(r, c)] != Complex64::new(0.0, 0.0)).map(|r| r as u32).collect()).collect();
        let mut target = vec![None; d];
        for op in ops {
            for (idx, slot) in target.iter_mut().enumerate() {
                let n = self.occupation(idx, mode);
                *slot = op.map[n].map(|(m, amp)| (idx - n * stride + m * stride, amp));
            }
            for (c, rows) in support.iter().enumerate() {
                let Some((oc, ac)) = target[c] else { continue };
                for &r in rows {
                    let r = r as usize;
                    let Some((or, ar)) = target[r] else { continue };
                    out[(or, oc)] += self.rho[(r, c)] * (ar * ac);
                }
            }
        }
        FockState { cutoffs: self.cutoffs.clone(), strides: self.strides.clone(), rho: out }
    }

    fn pure_loss(&self, mode: usize, eta: f64) -> Result<FockState> {
        self.check_mode(mode)?;
        let cut = self.cutoffs[mode];
        let amps = loss_amplitudes(cut, eta);
        let ops: Vec<ShiftKraus> = (0..cut)
            .map(|f| ShiftKraus { map: (0..cut).map(|n| (f <= n).then(|| (n - f, amps[n][f]))).collect() })
            .collect();
        Ok(self.apply_kraus(mode, &ops))
    }

    fn amplifier(&self, mode: usize, gain: f64) -> Result<FockState> {
        self.check_mode(mode)?;
        let cut = self.cutoffs[mode];
        let amps = squeeze_amplitudes(cut, gain);
        // traced ancilla count k: |n⟩ → c(n,k) |n+k⟩
        let ops: Vec<ShiftKraus> = (0..cut)
            .map(|k| ShiftKraus { map: (0..cut).map(|n| (n + k < cut).then(|| (n + k, amps[n][k]))).collect() })
            .collect();
        Ok(self.apply_kraus(mode, &ops))
    }

    fn conjugate(&self, mode: usize, gain: f64) -> Result<FockState> {
        self.check_mode(mode)?;
        let cut = self.cutoffs[mode];
        let amps = squeeze_amplitudes(cut, gain);
        // traced system count s = n + k: |n⟩ → c(n, s-n) |s-n⟩ (ancilla count)
        let ops: Vec<ShiftKraus> = (0..2 * cut - 1)
            .map(|s| ShiftKraus {
                map: (0..cut).map(|n| (s >= n && s - n < cut).then(|| (s - n, amps[n][s - n]))).collect(),
            })
            .collect();
        Ok(self.apply_kraus(mode, &ops))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn phase_leaves_thermal_invariant() {
        let t = FockState::thermal(20, 0.7).unwrap();
        let out = t.apply(&Channel::Phase { mode: 0, theta: 0.9 }).unwrap();
        assert!((out.density() - t.density()).norm() < 1e-15);
    }

    #[test]
    fn single_photon_loss_half() {
        let s = FockState::number_state(&[6], &[1]).unwrap();
        let out = s.apply(&Channel::PureLoss { mode: 0, eta: 0.5 }).unwrap();
        assert_abs_diff_eq!(out.density()[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.density()[(1, 1)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_photon_splits_on_balanced_beamsplitter() {
        let s = FockState::number_state(&[5, 5], &[1, 0]).unwrap();
        let out = s.apply(&Channel::BeamSplitter { a: 0, b: 1, eta: 0.5 }).unwrap();
        assert_abs_diff_eq!(out.photon_mean(0).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.photon_mean(1).unwrap(), 0.5, epsilon = 1e-12);
        // no amplitude left outside the one-photon sector
        assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn beamsplitter_heisenberg_convention() {
        // coherent α in a, vacuum in b: outputs √η α and -√(1-η) α
        let alpha = 0.8;
        let s = FockState::from_gaussian(&[2.0 * alpha, 0.0, 0.0, 0.0], &identity(4), &[25, 25]).unwrap();
        let out = s.apply(&Channel::BeamSplitter { a: 0, b: 1, eta: 0.3 }).unwrap();
        let m = out.mean_vector();
        assert_abs_diff_eq!(m[0], 2.0 * alpha * 0.3f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(m[2], -2.0 * alpha * 0.7f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn squeezer_on_vacuum_is_tmsv() {
        let s = FockState::vacuum(&[40, 40]).unwrap();
        let out = s.apply(&Channel::TwoModeSqueeze { a: 0, b: 1, gain: 1.25 }).unwrap();
        let (mean, cov) = out.photon_stats(&[0, 1]).unwrap();
        assert_abs_diff_eq!(mean[0], 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(mean[1], 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(cov[(0, 1)], 0.25 * 1.25, epsilon = 1e-10);
        let v = out.covariance_matrix();
        let c = 2.0 * (0.25f64 * 1.25).sqrt();
        assert_abs_diff_eq!(v[2], c, epsilon = 1e-9);
        assert_abs_diff_eq!(v[4 + 3], -c, epsilon = 1e-9);
    }

    #[test]
    fn thermal_loss_energy() {
        let t = FockState::thermal(40, 1.0).unwrap();
        let out = t.apply(&Channel::ThermalLoss { mode: 0, kappa: 0.4, noise: 0.5 }).unwrap();
        let (m, c) = out.photon_stats(&[0]).unwrap();
        assert_abs_diff_eq!(m[0], 0.9, epsilon = 1e-9);
        // output is thermal
        assert_abs_diff_eq!(c[(0, 0)], 0.9 * 1.9, epsilon = 1e-8);
    }

    #[test]
    fn amplifier_on_vacuum_is_thermal() {
        let v = FockState::vacuum(&[40]).unwrap();
        let out = v.apply(&Channel::Amplifier { mode: 0, gain: 1.5 }).unwrap();
        for k in 0..10 {
            let p = 0.5f64.powi(k) / 1.5f64.powi(k + 1);
            assert_abs_diff_eq!(out.density()[(k as usize, k as usize)].re, p, epsilon = 1e-12);
        }
    }

    #[test]
    fn conjugator_flips_phase() {
        // coherent α → conjugate mode carries √(G-1) α*
        let alpha = (0.5, 0.4);
        let s = FockState::from_gaussian(&[2.0 * alpha.0, 2.0 * alpha.1], &identity(2), &[30]).unwrap();
        let out = s.apply(&Channel::Conjugate { mode: 0, gain: 1.2 }).unwrap();
        let m = out.mean_vector();
        let g = 0.2f64.sqrt();
        assert_abs_diff_eq!(m[0], 2.0 * alpha.0 * g, epsilon = 1e-9);
        assert_abs_diff_eq!(m[1], -2.0 * alpha.1 * g, epsilon = 1e-9);
        // photon number (G-1)(n+1)
        assert_abs_diff_eq!(out.photon_mean(0).unwrap(), 0.2 * (0.41 + 1.0), epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        let v = FockState::vacuum(&[4, 4]).unwrap();
        assert!(v.apply(&Channel::BeamSplitter { a: 0, b: 0, eta: 0.5 }).is_err());
        assert!(v.apply(&Channel::BeamSplitter { a: 0, b: 1, eta: 1.5 }).is_err());
        assert!(v.apply(&Channel::TwoModeSqueeze { a: 0, b: 1, gain: 0.5 }).is_err());
        assert!(v.apply(&Channel::ThermalLoss { mode: 0, kappa: 0.0, noise: 1.0 }).is_err());
    }

    fn identity(n: usize) -> Vec<f64> {
        (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect()
    }
}
