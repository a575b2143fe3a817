//! Matrix elements of a Gaussian state.
//!
//! The normally ordered Bargmann function of a Gaussian density matrix is
//! `T exp(½ zᵀ A z + γᵀ z)` with `z = (α*, α)`. Differentiating it gives a
//! linear recursion on the renormalised coefficients
//!
//! `f(k + e_i) = (γ_i f(k) + Σ_j A_ij √k_j f(k - e_j)) / √(k_i + 1)`
//!
//! and `f(m, n) = ⟨m|ρ|n⟩`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{check_shape, strides_for, FockError, FockState, Result};

impl FockState {
    /// Density matrix of the Gaussian state with quadrature means `mean`
    /// (ordered `x_0, p_0, x_1, ...`) and row-major covariance `cov`.
    ///
    /// Refuses states whose per-mode mean photon number exceeds `cutoff / 8`.
    pub fn from_gaussian(mean: &[f64], cov: &[f64], cutoffs: &[usize]) -> Result<Self> {
        let n = cutoffs.len();
        let dim = check_shape(cutoffs)?;
        if mean.len() != 2 * n || cov.len() != 4 * n * n {
            return Err(FockError::BadGaussian(format!(
                "expected {} means and {} covariance entries",
                2 * n,
                4 * n * n
            )));
        }
        for m in 0..n {
            let tr = cov[(2 * m) * 2 * n + 2 * m] + cov[(2 * m + 1) * 2 * n + 2 * m + 1];
            let nbar = (tr - 2.0) / 4.0 + (mean[2 * m].powi(2) + mean[2 * m + 1].powi(2)) / 4.0;
            if nbar > cutoffs[m] as f64 / 8.0 {
                return Err(FockError::TruncationGuard { mode: m, mean: nbar, cutoff: cutoffs[m] });
            }
        }

        let c = |re: f64, im: f64| Complex64::new(re, im);
        // ξ = (a_0..a_{n-1}, a_0†..a_{n-1}†) = L r.
        let mut l = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        for j in 0..n {
            l[(j, 2 * j)] = c(0.5, 0.0);
            l[(j, 2 * j + 1)] = c(0.0, 0.5);
            l[(n + j, 2 * j)] = c(0.5, 0.0);
            l[(n + j, 2 * j + 1)] = c(0.0, -0.5);
        }
        let v = DMatrix::<Complex64>::from_fn(2 * n, 2 * n, |i, j| c(cov[i * 2 * n + j], 0.0));
        let d = DVector::<Complex64>::from_fn(2 * n, |i, _| c(mean[i], 0.0));

        let q = &l * v * l.adjoint() + DMatrix::<Complex64>::identity(2 * n, 2 * n) * c(0.5, 0.0);
        let det_q = q.determinant();
        let q_inv = q
            .try_inverse()
            .ok_or_else(|| FockError::BadGaussian("singular Q matrix".into()))?;
        let mu = &l * d;

        let mut x = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        for j in 0..n {
            x[(j, n + j)] = c(1.0, 0.0);
            x[(n + j, j)] = c(1.0, 0.0);
        }
        let a = (DMatrix::<Complex64>::identity(2 * n, 2 * n) - &q_inv) * x;
        let gamma = &q_inv * &mu;
        let quad = (mu.adjoint() * &q_inv * &mu)[(0, 0)];
        let t = (-0.5 * quad).exp() / det_q.sqrt();

        // Multi-index digits: rows (m_0..m_{n-1}) then columns (n_0..n_{n-1}).
        let radix: Vec<usize> = cutoffs.iter().chain(cutoffs.iter()).copied().collect();
        let mut digit_stride = vec![0usize; 2 * n];
        let row_strides = strides_for(cutoffs);
        for m in 0..n {
            digit_stride[m] = row_strides[m] * dim;
            digit_stride[n + m] = row_strides[m];
        }

        let total = dim * dim;
        let mut f = vec![Complex64::new(0.0, 0.0); total];
        f[0] = t;
        let mut digits = vec![0usize; 2 * n];
        for flat in 1..total {
            // increment digit counter (least significant = last column digit)
            for pos in (0..2 * n).rev() {
                digits[pos] += 1;
                if digits[pos] < radix[pos] {
                    break;
                }
                digits[pos] = 0;
            }
            let i = digits.iter().position(|&k| k > 0).expect("non-zero index");
            let prev = flat - digit_stride[i];
            let mut acc = gamma[i] * f[prev];
            for j in 0..2 * n {
                let kj = digits[j] - usize::from(j == i);
                if kj > 0 && a[(i, j)] != Complex64::new(0.0, 0.0) {
                    acc += a[(i, j)] * (kj as f64).sqrt() * f[prev - digit_stride[j]];
                }
            }
            f[flat] = acc / (digits[i] as f64).sqrt();
        }

        let rho = DMatrix::from_fn(dim, dim, |r, col| f[r * dim + col]);
        FockState::from_density(cutoffs, rho)
    }
}
