//! Brute-force truncated Fock-space reference for small bosonic states.
//!
//! Everything here works on dense density matrices over at most three modes,
//! with one photon-number cutoff per mode. It is slow on purpose: its only job
//! is to give independent numbers that the phase-space engine can be checked
//! against.
//!
//! Quadratures follow `x = a + a†`, `p = -i(a - a†)`, so the vacuum has unit
//! quadrature variance.

mod channels;
mod gaussian;
mod metrics;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use channels::Channel;
pub use metrics::Metrics;

/// Largest Hilbert-space dimension the oracle accepts.
pub const MAX_DIM: usize = 4096;
/// Largest number of modes.
pub const MAX_MODES: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum FockError {
    #[error("cutoff {0} too small (need at least 2)")]
    CutoffTooSmall(usize),
    #[error("{modes} modes with total dimension {dim} exceed the oracle limits")]
    TooLarge { modes: usize, dim: usize },
    #[error("mode {0} out of range")]
    UnknownMode(usize),
    #[error("modes must be distinct")]
    SameMode,
    #[error("mean photon number {mean:.3} in mode {mode} violates the truncation guard for cutoff {cutoff}")]
    TruncationGuard { mode: usize, mean: f64, cutoff: usize },
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
    #[error("states have different shapes")]
    ShapeMismatch,
    #[error("trace deficit {0:.3e} too large for a meaningful comparison")]
    ExcessiveDeficit(f64),
    #[error("malformed Gaussian data: {0}")]
    BadGaussian(String),
}

pub type Result<T> = std::result::Result<T, FockError>;

/// Ladder operator used when evaluating moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Lower,
    Raise,
}

/// Density matrix over a truncated product of Fock spaces.
///
/// Basis index is mixed-radix with mode 0 most significant.
#[derive(Debug, Clone)]
pub struct FockState {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    rho: DMatrix<Complex64>,
}

fn strides_for(cutoffs: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; cutoffs.len()];
    for m in (0..cutoffs.len().saturating_sub(1)).rev() {
        strides[m] = strides[m + 1] * cutoffs[m + 1];
    }
    strides
}

fn check_shape(cutoffs: &[usize]) -> Result<usize> {
    if let Some(&c) = cutoffs.iter().find(|&&c| c < 2) {
        return Err(FockError::CutoffTooSmall(c));
    }
    let dim: usize = cutoffs.iter().product();
    if cutoffs.is_empty() || cutoffs.len() > MAX_MODES || dim > MAX_DIM {
        return Err(FockError::TooLarge { modes: cutoffs.len(), dim });
    }
    Ok(dim)
}

impl FockState {
    pub fn from_density(cutoffs: &[usize], rho: DMatrix<Complex64>) -> Result<Self> {
        let dim = check_shape(cutoffs)?;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(FockError::ShapeMismatch);
        }
        Ok(Self { cutoffs: cutoffs.to_vec(), strides: strides_for(cutoffs), rho })
    }

    pub fn vacuum(cutoffs: &[usize]) -> Result<Self> {
        Self::number_state(cutoffs, &vec![0; cutoffs.len()])
    }

    /// Product of number states `|n_0, n_1, ...⟩`.
    pub fn number_state(cutoffs: &[usize], photons: &[usize]) -> Result<Self> {
        let dim = check_shape(cutoffs)?;
        if photons.len() != cutoffs.len() {
            return Err(FockError::ShapeMismatch);
        }
        let strides = strides_for(cutoffs);
        let mut idx = 0;
        for (m, &n) in photons.iter().enumerate() {
            if n >= cutoffs[m] {
                return Err(FockError::InvalidParameter(format!("photon number {n} >= cutoff")));
            }
            idx += n * strides[m];
        }
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(idx, idx)] = Complex64::new(1.0, 0.0);
        Ok(Self { cutoffs: cutoffs.to_vec(), strides, rho })
    }

    /// Single-mode thermal state from the geometric distribution.
    pub fn thermal(cutoff: usize, mean: f64) -> Result<Self> {
        let dim = check_shape(&[cutoff])?;
        let mut rho = DMatrix::zeros(dim, dim);
        let q = mean / (mean + 1.0);
        let mut p = 1.0 / (mean + 1.0);
        for k in 0..dim {
            rho[(k, k)] = Complex64::new(p, 0.0);
            p *= q;
        }
        Ok(Self { cutoffs: vec![cutoff], strides: vec![1], rho })
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &FockState) -> Result<Self> {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        check_shape(&cutoffs)?;
        let rho = self.rho.kronecker(&other.rho);
        Self::from_density(&cutoffs, rho)
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn density(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).sum()
    }

    /// Probability mass pushed past the cutoffs.
    pub fn trace_deficit(&self) -> f64 {
        (1.0 - self.trace()).max(0.0)
    }

    /// Photon number of `mode` in basis state `idx`.
    #[inline]
    pub fn occupation(&self, idx: usize, mode: usize) -> usize {
        (idx / self.strides[mode]) % self.cutoffs[mode]
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            Err(FockError::UnknownMode(mode))
        } else {
            Ok(())
        }
    }

    /// Marginal over the listed modes, in the listed order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(FockError::InvalidParameter("empty keep set".into()));
        }
        for &m in keep {
            self.check_mode(m)?;
        }
        let traced: Vec<usize> = (0..self.n_modes()).filter(|m| !keep.contains(m)).collect();
        let cut_keep: Vec<usize> = keep.iter().map(|&m| self.cutoffs[m]).collect();
        let dim_keep = check_shape(&cut_keep)?;
        let strides_keep = strides_for(&cut_keep);
        let cut_tr: Vec<usize> = traced.iter().map(|&m| self.cutoffs[m]).collect();
        let dim_tr: usize = cut_tr.iter().product();

        let full_index = |k: usize, t: usize| -> usize {
            let mut idx = 0;
            for (pos, &m) in keep.iter().enumerate() {
                idx += ((k / strides_keep[pos]) % cut_keep[pos]) * self.strides[m];
            }
            let mut rem = t;
            for (pos, &m) in traced.iter().enumerate().rev() {
                idx += (rem % cut_tr[pos]) * self.strides[m];
                rem /= cut_tr[pos];
            }
            idx
        };

        let mut out = DMatrix::zeros(dim_keep, dim_keep);
        for t in 0..dim_tr {
            let rows: Vec<usize> = (0..dim_keep).map(|k| full_index(k, t)).collect();
            for (c, &fc) in rows.iter().enumerate() {
                for (r, &fr) in rows.iter().enumerate() {
                    out[(r, c)] += self.rho[(fr, fc)];
                }
            }
        }
        Self::from_density(&cut_keep, out)
    }

    /// Expectation of an operator product, applied right to left:
    /// `ops = [(m1, L1), (m2, L2)]` evaluates `⟨L1_m1 L2_m2⟩`.
    pub fn expect(&self, ops: &[(usize, Ladder)]) -> Result<Complex64> {
        for &(m, _) in ops {
            self.check_mode(m)?;
        }
        let mut total = Complex64::new(0.0, 0.0);
        // tr(ρ O) = Σ_i ρ[i, j(i)] amp(i) where O|i⟩ = amp |j(i)⟩ ... evaluated on kets.
        for i in 0..self.dim() {
            let mut idx = i;
            let mut amp = 1.0;
            let mut alive = true;
            for &(m, op) in ops.iter().rev() {
                let n = self.occupation(idx, m);
                match op {
                    Ladder::Lower => {
                        if n == 0 {
                            alive = false;
                            break;
                        }
                        amp *= (n as f64).sqrt();
                        idx -= self.strides[m];
                    }
                    Ladder::Raise => {
                        if n + 1 >= self.cutoffs[m] {
                            alive = false;
                            break;
                        }
                        amp *= ((n + 1) as f64).sqrt();
                        idx += self.strides[m];
                    }
                }
            }
            if alive {
                // O|i⟩ = amp|idx⟩ so O_{idx,i} = amp and tr(ρO) picks ρ[i, idx].
                total += self.rho[(i, idx)] * amp;
            }
        }
        Ok(total)
    }

    /// Quadrature means `(⟨x_0⟩, ⟨p_0⟩, ...)`.
    pub fn mean_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n_modes());
        for m in 0..self.n_modes() {
            let a = self.expect(&[(m, Ladder::Lower)]).expect("valid mode");
            out.push(2.0 * a.re);
            out.push(2.0 * a.im);
        }
        out
    }

    /// Symmetrised quadrature covariance, row-major `2n x 2n`.
    pub fn covariance_matrix(&self) -> Vec<f64> {
        let n = self.n_modes();
        let d = self.mean_vector();
        // r = c_lower * a + c_raise * a† for x and p.
        let coeffs = |q: usize| -> [(Ladder, Complex64); 2] {
            if q == 0 {
                [(Ladder::Lower, Complex64::new(1.0, 0.0)), (Ladder::Raise, Complex64::new(1.0, 0.0))]
            } else {
                [(Ladder::Lower, Complex64::new(0.0, -1.0)), (Ladder::Raise, Complex64::new(0.0, 1.0))]
            }
        };
        let mut cov = vec![0.0; 4 * n * n];
        for i in 0..2 * n {
            for j in 0..2 * n {
                let (mi, qi) = (i / 2, i % 2);
                let (mj, qj) = (j / 2, j % 2);
                let mut second = Complex64::new(0.0, 0.0);
                for (li, ci) in coeffs(qi) {
                    for (lj, cj) in coeffs(qj) {
                        let ab = self.expect(&[(mi, li), (mj, lj)]).expect("valid mode");
                        let ba = self.expect(&[(mj, lj), (mi, li)]).expect("valid mode");
                        second += ci * cj * (ab + ba) * 0.5;
                    }
                }
                cov[i * 2 * n + j] = second.re - d[i] * d[j];
            }
        }
        cov
    }

    /// Joint photon-number distribution marginalised onto the diagonal.
    fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn photon_mean(&self, mode: usize) -> Result<f64> {
        self.check_mode(mode)?;
        Ok(self
            .diagonal()
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.occupation(i, mode) as f64)
            .sum())
    }

    /// Means, variances and covariance matrix of the photon numbers of `modes`.
    pub fn photon_stats(&self, modes: &[usize]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let diag = self.diagonal();
        let k = modes.len();
        let mut mean = vec![0.0; k];
        let mut second = DMatrix::zeros(k, k);
        for (i, &p) in diag.iter().enumerate() {
            let occ: Vec<f64> = modes.iter().map(|&m| self.occupation(i, m) as f64).collect();
            for a in 0..k {
                mean[a] += p * occ[a];
                for b in 0..k {
                    second[(a, b)] += p * occ[a] * occ[b];
                }
            }
        }
        let mut cov = second;
        for a in 0..k {
            for b in 0..k {
                cov[(a, b)] -= mean[a] * mean[b];
            }
        }
        Ok((mean, cov))
    }

    /// Mean and variance of `n_a - n_b`.
    pub fn difference_stats(&self, a: usize, b: usize) -> Result<(f64, f64)> {
        if a == b {
            return Err(FockError::SameMode);
        }
        let (mean, cov) = self.photon_stats(&[a, b])?;
        Ok((mean[0] - mean[1], cov[(0, 0)] + cov[(1, 1)] - 2.0 * cov[(0, 1)]))
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }
}
