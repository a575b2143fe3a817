//! Distinguishability measures computed from exact eigendecompositions.
//!
//! States produced by phase-covariant pipelines are block diagonal in some
//! photon-number charge. The blocks are found from the sparsity pattern
//! (connected components of the non-zero entries), so each measure only
//! diagonalises small blocks.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{FockError, FockState, Result};

/// Deficit above which oracle comparisons are refused.
pub const MAX_COMPARISON_DEFICIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Root fidelity `tr|√ρ √σ|`.
    pub fidelity: f64,
    /// `½ ‖ρ - σ‖₁`.
    pub trace_distance: f64,
    /// `tr ρ (ln ρ - ln σ)` in nats.
    pub rel_entropy: f64,
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Index blocks of the joint sparsity pattern of `mats`.
fn blocks(mats: &[&DMatrix<Complex64>]) -> Vec<Vec<usize>> {
    let d = mats[0].nrows();
    let mut dsu = Dsu((0..d).collect());
    for m in mats {
        for c in 0..d {
            for r in 0..c {
                if m[(r, c)] != Complex64::new(0.0, 0.0) || m[(c, r)] != Complex64::new(0.0, 0.0) {
                    dsu.union(r, c);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..d {
        let root = dsu.find(i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

fn sub(m: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn eigh(m: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let e = hermitize(m).symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

fn psd_sqrt(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let d = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(vals[r].max(0.0).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    &vecs * d * vecs.adjoint()
}

impl FockState {
    fn check_comparable(&self, other: &FockState) -> Result<()> {
        if self.cutoffs != other.cutoffs {
            return Err(FockError::ShapeMismatch);
        }
        for s in [self, other] {
            let def = s.trace_deficit();
            if def > MAX_COMPARISON_DEFICIT {
                return Err(FockError::ExcessiveDeficit(def));
            }
        }
        Ok(())
    }

    /// Root fidelity `tr √(√ρ σ √ρ)`.
    pub fn fidelity(&self, other: &FockState) -> Result<f64> {
        self.check_comparable(other)?;
        let mut total = 0.0;
        for idx in blocks(&[&self.rho, &other.rho]) {
            let a = sub(&self.rho, &idx);
            let b = sub(&other.rho, &idx);
            let sa = psd_sqrt(a);
            let inner = &sa * b * &sa;
            let (vals, _) = eigh(inner);
            total += vals.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>();
        }
        Ok(total)
    }

    pub fn trace_distance(&self, other: &FockState) -> Result<f64> {
        self.check_comparable(other)?;
        let diff = &self.rho - &other.rho;
        let mut total = 0.0;
        for idx in blocks(&[&diff]) {
            let (vals, _) = eigh(sub(&diff, &idx));
            total += vals.iter().map(|v| v.abs()).sum::<f64>();
        }
        Ok(0.5 * total)
    }

    /// `D(self ‖ other)` in nats; infinite when the support condition fails.
    pub fn rel_entropy(&self, other: &FockState) -> Result<f64> {
        self.check_comparable(other)?;
        let mut total = 0.0;
        for idx in blocks(&[&self.rho, &other.rho]) {
            let a = sub(&self.rho, &idx);
            let (va, _) = eigh(a.clone());
            total += va.iter().filter(|&&v| v > 1e-300).map(|v| v * v.ln()).sum::<f64>();
            let (vb, wb) = eigh(sub(&other.rho, &idx));
            for (k, &s) in vb.iter().enumerate() {
                let col = wb.column(k);
                let w = (col.adjoint() * &a * col)[(0, 0)].re;
                if w <= 1e-300 {
                    continue;
                }
                if s <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                total -= w * s.ln();
            }
        }
        Ok(total)
    }

    pub fn metrics(&self, other: &FockState) -> Result<Metrics> {
        Ok(Metrics {
            fidelity: self.fidelity(other)?,
            trace_distance: self.trace_distance(other)?,
            rel_entropy: self.rel_entropy(other)?,
        })
    }

    /// Quantum Fisher information for a phase `exp(iθ n̂_mode)` imprinted on
    /// this state, via the spectral form of the symmetric logarithmic derivative.
    pub fn qfi_phase(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        let def = self.trace_deficit();
        if def > MAX_COMPARISON_DEFICIT {
            return Err(FockError::ExcessiveDeficit(def));
        }
        let mut total = 0.0;
        for idx in blocks(&[&self.rho]) {
            let (vals, vecs) = eigh(sub(&self.rho, &idx));
            let occ: Vec<f64> = idx.iter().map(|&i| self.occupation(i, mode) as f64).collect();
            let n = idx.len();
            // N_jk = v_j† diag(occ) v_k
            let scaled = DMatrix::from_fn(n, n, |r, c| vecs[(r, c)] * occ[r]);
            let gen = vecs.adjoint() * scaled;
            for j in 0..n {
                for k in 0..n {
                    let s = vals[j] + vals[k];
                    if s > 1e-14 {
                        total += 2.0 * (vals[j] - vals[k]).powi(2) / s * gen[(j, k)].norm_sqr();
                    }
                }
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Channel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_states() {
        let t = FockState::thermal(40, 0.5).unwrap();
        let m = t.metrics(&t).unwrap();
        assert_abs_diff_eq!(m.fidelity, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.trace_distance, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.rel_entropy, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn vacuum_against_thermal_one() {
        let v = FockState::vacuum(&[60]).unwrap();
        let t = FockState::thermal(60, 1.0).unwrap();
        assert_abs_diff_eq!(v.fidelity(&t).unwrap(), 0.5f64.sqrt(), epsilon = 1e-10);
        // ½ Σ |p0(k) - p1(k)| = ½ (½ + ½) = ½
        assert_abs_diff_eq!(v.trace_distance(&t).unwrap(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn rel_entropy_against_diagonal_sum() {
        let (na, nb) = (2.0f64, 1.0f64);
        let p = |n: f64, k: i32| n.powi(k) / (n + 1.0).powi(k + 1);
        let want: f64 = (0..200).map(|k| p(na, k) * (p(na, k).ln() - p(nb, k).ln())).sum();
        let a = FockState::thermal(120, na).unwrap();
        let b = FockState::thermal(120, nb).unwrap();
        assert_abs_diff_eq!(a.rel_entropy(&b).unwrap(), want, epsilon = 1e-8);
    }

    #[test]
    fn coherent_phase_qfi() {
        // |α|² = 0.6 → J = 4 |α|²
        let s = FockState::from_gaussian(&[2.0 * 0.6f64.sqrt(), 0.0], &[1.0, 0.0, 0.0, 1.0], &[40]).unwrap();
        assert_abs_diff_eq!(s.qfi_phase(0).unwrap(), 2.4, epsilon = 1e-8);
    }

    #[test]
    fn tmsv_phase_qfi_pure() {
        // pure state: J = 4 Var(n_S) = 4 N(N+1)
        let v = FockState::vacuum(&[40, 40]).unwrap();
        let s = v.apply(&Channel::TwoModeSqueeze { a: 0, b: 1, gain: 1.3 }).unwrap();
        assert_abs_diff_eq!(s.qfi_phase(0).unwrap(), 4.0 * 0.3 * 1.3, epsilon = 1e-8);
    }

    #[test]
    fn refuses_truncated_comparisons() {
        let a = FockState::thermal(10, 3.0).unwrap();
        let b = FockState::thermal(10, 3.0).unwrap();
        assert!(matches!(a.fidelity(&b), Err(FockError::ExcessiveDeficit(_))));
    }
}
