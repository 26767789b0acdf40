//! Finite-difference operators and their banded normal-equation solve.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// First difference with rows `(+1, −1)`: `(Ωx)_i = x_i − x_{i+1}`,
/// mapping length `n` to `n − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirstDifference {
    pub cols: usize,
}

impl FirstDifference {
    pub fn rows(&self) -> usize {
        self.cols - 1
    }

    pub fn apply<T: Real>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        x.windows(2).map(|w| w[0] - w[1]).collect()
    }

    pub fn apply_adjoint<T: Real>(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows());
        let mut out = vec![T::zero(); self.cols];
        for (i, &v) in y.iter().enumerate() {
            out[i] += v;
            out[i + 1] -= v;
        }
        out
    }

    /// Row-major dense matrix.
    pub fn to_dense<T: Real>(&self) -> Vec<Vec<T>> {
        (0..self.rows())
            .map(|r| {
                let mut row = vec![T::zero(); self.cols];
                row[r] = T::one();
                row[r + 1] = -T::one();
                row
            })
            .collect()
    }
}

/// `(Ω₁, Ω₂)` for a profile of length `n`: Ω₁ is `(n−1)×n`, Ω₂ is `(n−2)×(n−1)`.
pub fn difference_operators(n: usize) -> Result<(FirstDifference, FirstDifference)> {
    if n < 3 {
        return Err(Error::TooShort { len: n, min: 3 });
    }
    Ok((FirstDifference { cols: n }, FirstDifference { cols: n - 1 }))
}

/// `Ω₂·Ω₁·x`, i.e. `x_i − 2x_{i+1} + x_{i+2}`.
pub fn curvature<T: Real>(x: &[T]) -> Vec<T> {
    x.windows(3).map(|w| w[0] - (w[1] + w[1]) + w[2]).collect()
}

/// Adjoint of [`curvature`]: maps length `m` to `m + 2`.
pub(crate) fn curvature_adjoint_into<T: Real>(y: &[T], out: &mut [T]) {
    debug_assert_eq!(out.len(), y.len() + 2);
    out.iter_mut().for_each(|o| *o = T::zero());
    for (i, &v) in y.iter().enumerate() {
        out[i] += v;
        out[i + 1] -= v + v;
        out[i + 2] += v;
    }
}

pub(crate) fn curvature_into<T: Real>(x: &[T], out: &mut [T]) {
    debug_assert_eq!(out.len() + 2, x.len());
    for (o, w) in out.iter_mut().zip(x.windows(3)) {
        *o = w[0] - (w[1] + w[1]) + w[2];
    }
}

/// Profile with zero initial value and slope whose curvature is `z`.
pub(crate) fn integrate_curvature<T: Real>(z: &[T]) -> Vec<T> {
    let mut x = vec![T::zero(); z.len() + 2];
    for i in 0..z.len() {
        x[i + 2] = x[i + 1] + x[i + 1] - x[i] + z[i];
    }
    x
}

/// LDLᵀ factor of a symmetric positive definite pentadiagonal matrix;
/// factor and solve are O(n).
#[derive(Debug, Clone)]
pub(crate) struct Pentadiagonal<T> {
    d: Vec<T>,
    l1: Vec<T>,
    l2: Vec<T>,
}

/// Pentadiagonal factor of `I + ρ·DᵀD` where `D` is the `(n−2)×n` curvature
/// operator.
pub(crate) type BandedNormal<T> = Pentadiagonal<T>;

impl<T: Real> Pentadiagonal<T> {
    pub fn new(n: usize, rho: T) -> Self {
        let mut a0 = vec![T::one(); n];
        let mut a1 = vec![T::zero(); n];
        let mut a2 = vec![T::zero(); n];
        let c = [T::one(), -T::of(2.0), T::one()];
        for r in 0..n.saturating_sub(2) {
            for a in 0..3 {
                a0[r + a] += rho * c[a] * c[a];
                for b in 0..a {
                    let v = rho * c[a] * c[b];
                    if a - b == 1 {
                        a1[r + a] += v;
                    } else {
                        a2[r + a] += v;
                    }
                }
            }
        }
        Self::factor(&a0, &a1, &a2)
    }

    /// `a0` is the diagonal, `a1[i] = A[i][i−1]` and `a2[i] = A[i][i−2]`
    /// (leading entries ignored).
    pub fn factor(a0: &[T], a1: &[T], a2: &[T]) -> Self {
        let n = a0.len();
        let mut d = vec![T::zero(); n];
        let mut l1 = vec![T::zero(); n];
        let mut l2 = vec![T::zero(); n];
        for i in 0..n {
            if i >= 2 {
                l2[i] = a2[i] / d[i - 2];
            }
            if i >= 1 {
                let carry = if i >= 2 { l2[i] * l1[i - 1] * d[i - 2] } else { T::zero() };
                l1[i] = (a1[i] - carry) / d[i - 1];
            }
            let mut di = a0[i];
            if i >= 1 {
                di -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i] * l2[i] * d[i - 2];
            }
            d[i] = di;
        }
        Self { d, l1, l2 }
    }

    /// `D·Dᵀ` for the `m×(m+2)` curvature operator: the constant stencil
    /// (1, −4, 6, −4, 1) plus `diag`.
    pub fn gram_plus_diagonal(diag: &[T]) -> Self {
        let m = diag.len();
        let a0: Vec<T> = diag.iter().map(|&v| v + T::of(6.0)).collect();
        let a1 = vec![-T::of(4.0); m];
        let a2 = vec![T::one(); m];
        Self::factor(&a0, &a1, &a2)
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = b.len();
        for i in 1..n {
            let mut v = b[i] - self.l1[i] * b[i - 1];
            if i >= 2 {
                v -= self.l2[i] * b[i - 2];
            }
            b[i] = v;
        }
        for (bi, &di) in b.iter_mut().zip(&self.d) {
            *bi /= di;
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= self.l1[i + 1] * b[i + 1];
            }
            if i + 2 < n {
                v -= self.l2[i + 2] * b[i + 2];
            }
            b[i] = v;
        }
    }
}
