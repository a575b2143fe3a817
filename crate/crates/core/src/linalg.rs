//! Dense row-major matrices for the handful of modes the protocol needs.
//!
//! Sizes never exceed 16x16, so everything is plain loops. Generic over
//! [`Real`] so the same code runs in `f64` and in double-double.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major slice constructor; panics on a length mismatch.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data: data.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Square sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self[(r0 + r, c0 + c)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat<T>) {
        for r in 0..b.rows {
            for c in 0..b.cols {
                self[(r0 + r, c0 + c)] = b[(r, c)];
            }
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| (0..self.cols).fold(T::zero(), |acc, c| acc + self[(r, c)] * v[c]))
            .collect()
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        u.iter().zip(self.mul_vec(v)).fold(T::zero(), |acc, (&a, b)| acc + a * b)
    }

    /// Relative asymmetry `max|M - Mᵀ| / max(1, max|M|)`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.rows {
            for c in 0..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        worst / self.max_abs().max(T::one())
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect() }
    }

    /// LU factorisation with partial pivoting; returns `None` for a singular
    /// matrix. Output is `(packed LU, permutation, sign)`.
    fn lu(&self) -> Option<(Mat<T>, Vec<usize>, T)> {
        assert_eq!(self.rows, self.cols, "LU of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).expect("finite"))?;
            if a[(p, k)] == T::zero() {
                return None;
            }
            if p != k {
                for c in 0..n {
                    a.data.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            for i in (k + 1)..n {
                let f = a[(i, k)].quot(a[(k, k)]);
                a[(i, k)] = f;
                for c in (k + 1)..n {
                    let v = a[(k, c)];
                    a[(i, c)] = a[(i, c)] - f * v;
                }
            }
        }
        Some((a, perm, sign))
    }

    pub fn determinant(&self) -> T {
        match self.lu() {
            None => T::zero(),
            Some((lu, _, sign)) => (0..self.rows).fold(sign, |acc, i| acc * lu[(i, i)]),
        }
    }

    pub fn inverse(&self) -> Option<Mat<T>> {
        let n = self.rows;
        let (lu, perm, _) = self.lu()?;
        let mut inv = Mat::zeros(n, n);
        for col in 0..n {
            // solve L U x = P e_col
            let mut x: Vec<T> = (0..n).map(|i| if perm[i] == col { T::one() } else { T::zero() }).collect();
            for i in 0..n {
                for j in 0..i {
                    x[i] = x[i] - lu[(i, j)] * x[j];
                }
            }
            for i in (0..n).rev() {
                for j in (i + 1)..n {
                    x[i] = x[i] - lu[(i, j)] * x[j];
                }
                x[i] = x[i].quot(lu[(i, i)]);
            }
            for (i, v) in x.into_iter().enumerate() {
                inv[(i, col)] = v;
            }
        }
        Some(inv)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Real> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, rhs.rows, "matrix product shape");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == T::zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] = out[(r, c)] + a * rhs[(k, c)];
                }
            }
        }
        out
    }
}

impl<T: Real> Add for &Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect() }
    }
}

/// Standard symplectic form for `n` modes in `(x, p)` pair ordering.
pub fn omega<T: Real>(n: usize) -> Mat<T> {
    let mut w = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        w[(2 * k, 2 * k + 1)] = T::one();
        w[(2 * k + 1, 2 * k)] = -T::one();
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn determinant_and_inverse() {
        let m = Mat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        assert_relative_eq!(m.determinant(), 18.0, epsilon = 1e-12);
        let inv = m.inverse().unwrap();
        let id = &m * &inv;
        assert!((&id - &Mat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_relative_eq!(m.determinant(), -1.0);
        assert!(Mat::<f64>::zeros(2, 2).inverse().is_none());
    }

    #[test]
    fn omega_squares_to_minus_identity() {
        let w = omega::<f64>(3);
        let sq = &w * &w;
        assert!((&sq + &Mat::identity(6)).max_abs() < 1e-15);
    }
}
