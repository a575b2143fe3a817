//! Gaussian states in phase space.
//!
//! Quadratures obey `[x, p] = 2i`, so the vacuum covariance is the identity
//! and a mode with covariance block `V` and mean `d` holds
//! `(tr V - 2)/4 + |d|²/4` photons. Vectors are ordered `(x₁, p₁, …, xₙ, pₙ)`.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix};

use crate::error::{check, Error, Result};
use crate::linalg::{omega, Mat};
use crate::scalar::Real;

/// Relative symmetry tolerance accepted by [`GaussianState::from_parts`].
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Slack on the uncertainty relation `V + iΩ ⪰ 0`.
pub const UNCERTAINTY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState<T> {
    labels: Vec<String>,
    mean: Vec<T>,
    cov: Mat<T>,
}

/// Affine symplectic map `r → S r + d` on a group of modes.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticOp<T> {
    pub matrix: Mat<T>,
    pub displacement: Vec<T>,
}

/// Photon-number moments of selected modes; indices follow the selection order.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonStats<T> {
    pub modes: Vec<String>,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
    /// Keyed by `(i, j)` with `i < j`.
    pub covariances: BTreeMap<(usize, usize), T>,
}

impl<T: Real> PhotonStats<T> {
    pub fn covariance(&self, i: usize, j: usize) -> T {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.variance[i],
            std::cmp::Ordering::Less => self.covariances[&(i, j)],
            std::cmp::Ordering::Greater => self.covariances[&(j, i)],
        }
    }
}

impl<T: Real> SymplecticOp<T> {
    pub fn identity(n_modes: usize) -> Self {
        Self { matrix: Mat::identity(2 * n_modes), displacement: vec![T::zero(); 2 * n_modes] }
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.rows() / 2
    }

    /// Rotation `e^{iθ n̂}`: `x → x cos θ - p sin θ`, `p → x sin θ + p cos θ`.
    pub fn phase(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        // keep the rotation orthogonal to working precision
        let r = (s * s + c * c).sqrt();
        let (s, c) = (s.quot(r), c.quot(r));
        Self::linear(Mat::from_row_slice(2, 2, &[c, -s, s, c]))
    }

    /// `a → √η a + √(1-η) b`, `b → √η b - √(1-η) a`.
    pub fn beamsplitter(eta: T) -> Result<Self> {
        check(eta >= T::zero() && eta <= T::one(), "transmissivity", eta.as_f64(), "must lie in [0, 1]")?;
        let t = eta.sqrt();
        let r = (T::one() - eta).sqrt();
        let z = T::zero();
        Ok(Self::linear(Mat::from_row_slice(
            4,
            4,
            &[t, z, r, z, z, t, z, r, -r, z, t, z, z, -r, z, t],
        )))
    }

    /// `a → √G a + √(G-1) b†` and symmetrically for `b`.
    pub fn two_mode_squeeze(gain: T) -> Result<Self> {
        check(gain >= T::one(), "gain", gain.as_f64(), "must be at least 1")?;
        let c = gain.sqrt();
        let s = (gain - T::one()).sqrt();
        let z = T::zero();
        Ok(Self::linear(Mat::from_row_slice(
            4,
            4,
            &[c, z, s, z, z, c, z, -s, s, z, c, z, z, -s, z, c],
        )))
    }

    pub fn displacement(x: T, p: T) -> Self {
        Self { matrix: Mat::identity(2), displacement: vec![x, p] }
    }

    fn linear(matrix: Mat<T>) -> Self {
        let n = matrix.rows();
        Self { matrix, displacement: vec![T::zero(); n] }
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &SymplecticOp<T>) -> Self {
        let matrix = &next.matrix * &self.matrix;
        let moved = next.matrix.mul_vec(&self.displacement);
        let displacement = moved.iter().zip(&next.displacement).map(|(&a, &b)| a + b).collect();
        Self { matrix, displacement }
    }

    /// Frobenius norm of `S Ω Sᵀ - Ω`.
    pub fn symplectic_error(&self) -> T {
        let w = omega::<T>(self.n_modes());
        let d = &(&(&self.matrix * &w) * &self.matrix.transpose()) - &w;
        d.as_slice().iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("m{i}")).collect()
}

fn to_nalgebra<T: Real>(m: &Mat<T>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)].as_f64())
}

/// Ascending eigenvalues of a symmetric matrix, evaluated in `f64`.
fn symmetric_eigenvalues<T: Real>(m: &Mat<T>) -> Vec<f64> {
    let mut v: Vec<f64> = to_nalgebra(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

impl<T: Real> GaussianState<T> {
    pub fn vacuum(n_modes: usize) -> Self {
        Self::vacuum_labeled(&default_labels(n_modes)).expect("generated labels are distinct")
    }

    pub fn vacuum_labeled<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptySelection);
        }
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_owned()).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateMode(l.clone()));
            }
        }
        let n = labels.len();
        Ok(Self { labels, mean: vec![T::zero(); 2 * n], cov: Mat::identity(2 * n) })
    }

    /// Single-mode thermal state with `n` mean photons.
    pub fn thermal(label: &str, n: T) -> Result<Self> {
        check(n >= T::zero(), "thermal mean", n.as_f64(), "must be non-negative")?;
        let mut s = Self::vacuum_labeled(&[label])?;
        s.cov = Mat::identity(2).scale(T::two() * n + T::one());
        Ok(s)
    }

    /// Coherent state with quadrature means `(x, p)`; photon number `(x² + p²)/4`.
    pub fn coherent(label: &str, x: T, p: T) -> Result<Self> {
        let mut s = Self::vacuum_labeled(&[label])?;
        s.mean = vec![x, p];
        Ok(s)
    }

    /// Validated constructor; `cov` is row-major `2n × 2n`.
    pub fn from_parts<S: AsRef<str>>(labels: &[S], mean: Vec<T>, cov: Mat<T>) -> Result<Self> {
        let mut s = Self::vacuum_labeled(labels)?;
        let n2 = 2 * s.n_modes();
        if mean.len() != n2 || cov.rows() != n2 || cov.cols() != n2 {
            return Err(Error::InvalidCovariance(format!("expected {n2} entries per side")));
        }
        s.mean = mean;
        s.cov = cov;
        s.validate()?;
        Ok(s)
    }

    /// Checks symmetry and the uncertainty relation.
    pub fn validate(&self) -> Result<()> {
        if self.cov.as_slice().iter().chain(&self.mean).any(|x| !x.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let asym = self.cov.asymmetry().as_f64();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidCovariance(format!("asymmetry {asym:e}")));
        }
        let low = self.uncertainty_margin();
        if low < -UNCERTAINTY_TOL {
            return Err(Error::InvalidCovariance(format!("V + iΩ has eigenvalue {low:e}")));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the Hermitian matrix `V + iΩ`.
    pub fn uncertainty_margin(&self) -> f64 {
        let n2 = self.cov.rows();
        let w = omega::<f64>(self.n_modes());
        let h = DMatrix::from_fn(n2, n2, |r, c| Complex::new(self.cov[(r, c)].as_f64(), w[(r, c)]));
        let h = (&h + h.adjoint()) * Complex::new(0.5, 0.0);
        h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Symplectic eigenvalues, ascending, one per mode.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let v = to_nalgebra(&self.cov);
        let e = v.clone().symmetric_eigen();
        let root = &e.eigenvectors
            * DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.max(0.0).sqrt()))
            * e.eigenvectors.transpose();
        let w = to_nalgebra(&omega::<f64>(self.n_modes()));
        let b = &root * w * &root;
        let k = &b * b.transpose();
        let mut sq: Vec<f64> = k.symmetric_eigen().eigenvalues.iter().copied().collect();
        sq.sort_by(|a, b| a.total_cmp(b));
        sq.chunks(2).map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt()).collect()
    }

    /// Smallest eigenvalue of `V - I`; non-negative for classical (P-representable) states.
    pub fn classicality_margin(&self) -> f64 {
        let d = &self.cov - &Mat::identity(self.cov.rows());
        symmetric_eigenvalues(&d)[0]
    }

    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Mat<T> {
        &self.cov
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| Error::UnknownMode(label.to_owned()))
    }

    fn pair(&self, a: &str, b: &str) -> Result<(usize, usize)> {
        let (i, j) = (self.index_of(a)?, self.index_of(b)?);
        if i == j {
            return Err(Error::DuplicateMode(a.to_owned()));
        }
        Ok((i, j))
    }

    /// 2×2 block between modes `i` and `j`.
    pub fn block(&self, i: usize, j: usize) -> Mat<T> {
        self.cov.block(2 * i, 2 * j, 2, 2)
    }

    fn mode_mean(&self, i: usize) -> [T; 2] {
        [self.mean[2 * i], self.mean[2 * i + 1]]
    }

    pub fn cast<U: Real>(&self) -> GaussianState<U> {
        GaussianState {
            labels: self.labels.clone(),
            mean: self.mean.iter().map(|&x| U::lit(x.as_f64())).collect(),
            cov: self.cov.cast(),
        }
    }

    /// Product state `self ⊗ other`.
    pub fn tensor(&self, other: &GaussianState<T>) -> Result<Self> {
        for l in &other.labels {
            if self.labels.contains(l) {
                return Err(Error::DuplicateMode(l.clone()));
            }
        }
        let (n1, n2) = (self.cov.rows(), other.cov.rows());
        let mut cov = Mat::zeros(n1 + n2, n1 + n2);
        cov.set_block(0, 0, &self.cov);
        cov.set_block(n1, n1, &other.cov);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut mean = self.mean.clone();
        mean.extend_from_slice(&other.mean);
        Ok(Self { labels, mean, cov })
    }

    pub fn append_vacuum(&self, label: &str) -> Result<Self> {
        self.tensor(&Self::vacuum_labeled(&[label])?)
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let i = self.index_of(from)?;
        if from != to && self.labels.iter().any(|l| l == to) {
            return Err(Error::DuplicateMode(to.to_owned()));
        }
        let mut s = self.clone();
        s.labels[i] = to.to_owned();
        Ok(s)
    }

    /// Applies `op` to the listed modes (in op order).
    pub fn apply_symplectic(&self, op: &SymplecticOp<T>, modes: &[&str]) -> Result<Self> {
        if op.n_modes() != modes.len() {
            return Err(Error::InvalidParameter {
                name: "mode count",
                value: modes.len() as f64,
                reason: "does not match the operation",
            });
        }
        let idx: Vec<usize> = modes.iter().map(|m| self.index_of(m)).collect::<Result<_>>()?;
        for (k, &i) in idx.iter().enumerate() {
            if idx[..k].contains(&i) {
                return Err(Error::DuplicateMode(self.labels[i].clone()));
            }
        }
        let n2 = self.cov.rows();
        let mut s = Mat::identity(n2);
        let mut disp = vec![T::zero(); n2];
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                for r in 0..2 {
                    for c in 0..2 {
                        s[(2 * ia + r, 2 * ib + c)] = op.matrix[(2 * a + r, 2 * b + c)];
                    }
                }
            }
            disp[2 * ia] = op.displacement[2 * a];
            disp[2 * ia + 1] = op.displacement[2 * a + 1];
        }
        let cov = &(&s * &self.cov) * &s.transpose();
        let mean = s.mul_vec(&self.mean).into_iter().zip(disp).map(|(a, b)| a + b).collect();
        Ok(Self { labels: self.labels.clone(), mean, cov })
    }

    pub fn apply_phase(&self, mode: &str, theta: T) -> Result<Self> {
        self.apply_symplectic(&SymplecticOp::phase(theta), &[mode])
    }

    pub fn apply_beamsplitter(&self, a: &str, b: &str, eta: T) -> Result<Self> {
        self.pair(a, b)?;
        self.apply_symplectic(&SymplecticOp::beamsplitter(eta)?, &[a, b])
    }

    pub fn apply_two_mode_squeeze(&self, a: &str, b: &str, gain: T) -> Result<Self> {
        self.pair(a, b)?;
        self.apply_symplectic(&SymplecticOp::two_mode_squeeze(gain)?, &[a, b])
    }

    /// Thermal-loss channel referred to the output: `n → κ n + noise`.
    pub fn apply_thermal_loss(&self, mode: &str, kappa: T, noise: T) -> Result<Self> {
        check(kappa > T::zero() && kappa <= T::one(), "kappa", kappa.as_f64(), "must lie in (0, 1]")?;
        check(noise >= T::zero(), "added noise", noise.as_f64(), "must be non-negative")?;
        let i = self.index_of(mode)?;
        let root = kappa.sqrt();
        let added = T::one() - kappa + T::two() * noise;
        let mut out = self.clone();
        for r in 0..self.cov.rows() {
            for c in 0..self.cov.cols() {
                let hits = usize::from(r / 2 == i) + usize::from(c / 2 == i);
                let f = match hits {
                    0 => T::one(),
                    1 => root,
                    _ => kappa,
                };
                out.cov[(r, c)] = self.cov[(r, c)] * f;
            }
        }
        for k in 0..2 {
            out.cov[(2 * i + k, 2 * i + k)] = out.cov[(2 * i + k, 2 * i + k)] + added;
            out.mean[2 * i + k] = self.mean[2 * i + k] * root;
        }
        Ok(out)
    }

    /// Discards the mode's correlations and replaces it by a thermal state.
    pub fn replace_with_thermal(&self, mode: &str, n: T) -> Result<Self> {
        check(n >= T::zero(), "thermal mean", n.as_f64(), "must be non-negative")?;
        let i = self.index_of(mode)?;
        let mut out = self.clone();
        for r in 0..self.cov.rows() {
            for k in 0..2 {
                out.cov[(r, 2 * i + k)] = T::zero();
                out.cov[(2 * i + k, r)] = T::zero();
            }
        }
        for k in 0..2 {
            out.cov[(2 * i + k, 2 * i + k)] = T::two() * n + T::one();
            out.mean[2 * i + k] = T::zero();
        }
        Ok(out)
    }

    /// Marginal on `keep`, in the given order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let idx: Vec<usize> = keep.iter().map(|m| self.index_of(m)).collect::<Result<_>>()?;
        let mut labels = Vec::with_capacity(idx.len());
        for &i in &idx {
            if labels.contains(&self.labels[i]) {
                return Err(Error::DuplicateMode(self.labels[i].clone()));
            }
            labels.push(self.labels[i].clone());
        }
        let n2 = 2 * idx.len();
        let cov = Mat::from_fn(n2, n2, |r, c| self.cov[(2 * idx[r / 2] + r % 2, 2 * idx[c / 2] + c % 2)]);
        let mean = (0..n2).map(|r| self.mean[2 * idx[r / 2] + r % 2]).collect();
        Ok(Self { labels, mean, cov })
    }

    fn photon_mean_at(&self, i: usize) -> T {
        let d = self.mode_mean(i);
        let four = T::lit(4.0);
        (self.block(i, i).trace() - T::two()) / four + (d[0] * d[0] + d[1] * d[1]) / four
    }

    /// Photon-number covariance via Isserlis' theorem; `i == j` gives the variance.
    fn photon_cov_at(&self, i: usize, j: usize) -> T {
        let b = self.block(i, j);
        let (di, dj) = (self.mode_mean(i), self.mode_mean(j));
        let frob = b.as_slice().iter().fold(T::zero(), |acc, &x| acc + x * x);
        let lin = b.bilinear(&di, &dj);
        if i == j {
            (frob - T::two()) / T::lit(8.0) + lin / T::lit(4.0)
        } else {
            frob / T::lit(8.0) + lin / T::lit(4.0)
        }
    }

    pub fn photon_mean(&self, mode: &str) -> Result<T> {
        Ok(self.photon_mean_at(self.index_of(mode)?))
    }

    pub fn photon_stats(&self, modes: &[&str]) -> Result<PhotonStats<T>> {
        let idx: Vec<usize> = modes.iter().map(|m| self.index_of(m)).collect::<Result<_>>()?;
        let mut covariances = BTreeMap::new();
        for a in 0..idx.len() {
            for b in (a + 1)..idx.len() {
                covariances.insert((a, b), self.photon_cov_at(idx[a], idx[b]));
            }
        }
        Ok(PhotonStats {
            modes: modes.iter().map(|m| (*m).to_owned()).collect(),
            mean: idx.iter().map(|&i| self.photon_mean_at(i)).collect(),
            variance: idx.iter().map(|&i| self.photon_cov_at(i, i).max(T::zero())).collect(),
            covariances,
        })
    }

    /// Mean and variance of `n̂_a - n̂_b`.
    pub fn difference_stats(&self, a: &str, b: &str) -> Result<(T, T)> {
        let (i, j) = self.pair(a, b)?;
        let mean = self.photon_mean_at(i) - self.photon_mean_at(j);
        let var = self.photon_cov_at(i, i) + self.photon_cov_at(j, j) - T::two() * self.photon_cov_at(i, j);
        Ok((mean, var.max(T::zero())))
    }
}
