//! Small dense linear algebra over any [`Scalar`].
//!
//! The integrators solve systems of a handful of unknowns per Newton iteration, and the
//! surrogate Lagrangians need those solves to carry dual-number derivatives. A plain
//! row-major matrix plus LU with partial pivoting covers both.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative pivot threshold below which a factorization is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    /// All-zero `rows × cols` matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    /// `n × n` identity.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { S::one() } else { S::zero() })
    }

    /// Builds a matrix entry by entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    /// Diagonal matrix with the given entries.
    pub fn diagonal(d: &[S]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { S::zero() })
    }

    /// Embeds an `f64` matrix into another scalar type.
    pub fn lift(m: &Mat<f64>) -> Self {
        Self { rows: m.rows, cols: m.cols, data: m.data.iter().map(|&x| S::from_f64(x)).collect() }
    }

    /// Primal values of every entry.
    pub fn primal(&self) -> Mat<f64> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(Scalar::re).collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ · x`.
    pub fn tr_mul_vec(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![S::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&self, s: S) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Quadratic form `xᵀ · self · y`.
    pub fn bilinear(&self, x: &[S], y: &[S]) -> S {
        dot(x, &self.mul_vec(y))
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// The `rows × cols` sub-matrix starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(Scalar::is_finite)
    }

    /// Largest absolute primal entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.re().abs()))
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Euclidean inner product.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// ∞-norm of the primal parts.
pub fn norm_inf<S: Scalar>(x: &[S]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.re().abs()))
}

/// Euclidean norm of an `f64` vector.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `a + s·b`.
pub fn axpy<S: Scalar>(a: &[S], s: S, b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

/// `a − b`.
pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `a + b`.
pub fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// `s·a`.
pub fn scale<S: Scalar>(a: &[S], s: S) -> Vec<S> {
    a.iter().map(|&x| x * s).collect()
}

/// LU factorization with partial pivoting, `P·A = L·U`, pivoting on primal magnitudes.
///
/// Works over dual numbers: the pivot sequence is chosen from primal values and the
/// derivative parts ride along, so solves differentiate exactly.
#[derive(Clone, Debug)]
pub struct Lu<S> {
    lu: Mat<S>,
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl<S: Scalar> Lu<S> {
    /// Factors a square matrix.
    ///
    /// Fails with [`Error::SingularJacobian`] when a pivot is smaller than
    /// [`PIVOT_TOLERANCE`] times the largest entry of its original row.
    pub fn factor(a: &Mat<S>) -> Result<Self> {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows;
        let row_scale: Vec<f64> = (0..n).map(|i| norm_inf(a.row(i))).collect();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let (mut min_pivot, mut max_pivot) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].re().abs().total_cmp(&lu[(j, k)].re().abs()))
                .expect("non-empty pivot range");
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            let mag = pivot.re().abs();
            let scale = row_scale[perm[k]];
            if !mag.is_finite() || mag <= PIVOT_TOLERANCE * scale || scale == 0.0 {
                return Err(Error::SingularJacobian);
            }
            min_pivot = min_pivot.min(mag);
            max_pivot = max_pivot.max(mag);
            let inv = pivot.recip();
            for i in k + 1..n {
                let f = lu[(i, k)] * inv;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        if n == 0 {
            min_pivot = 1.0;
            max_pivot = 1.0;
        }
        Ok(Self { lu, perm, min_pivot, max_pivot })
    }

    /// Ratio of largest to smallest pivot magnitude; a cheap conditioning proxy.
    pub fn pivot_ratio(&self) -> f64 {
        self.max_pivot / self.min_pivot
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                let xj = x[j];
                x[i] -= l * xj;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[(i, j)];
                let xj = x[j];
                x[i] -= u * xj;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    /// Solves `A·X = B` column by column.
    pub fn solve_mat(&self, b: &Mat<S>) -> Mat<S> {
        let cols: Vec<Vec<S>> = (0..b.cols).map(|j| self.solve(&(0..b.rows).map(|i| b[(i, j)]).collect::<Vec<_>>())).collect();
        Mat::from_fn(b.rows, b.cols, |i, j| cols[j][i])
    }
}

/// One-shot `A·x = b`.
pub fn solve<S: Scalar>(a: &Mat<S>, b: &[S]) -> Result<Vec<S>> {
    Ok(Lu::factor(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Dual;
    use approx::assert_relative_eq;

    #[test]
    fn solves_permuted_system() {
        let a = Mat::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x_true);
        let x = solve(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(x_true) {
            assert_relative_eq!(*xi, ti, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(Lu::factor(&a).unwrap_err(), Error::SingularJacobian);
    }

    #[test]
    fn solve_differentiates_through_the_matrix() {
        // x(t) = A(t)⁻¹ b with A(t) = [[2 + t, 1], [1, 3]]: dx/dt = −A⁻¹ (dA/dt) x.
        let t = Dual::<f64>::variable(0.0);
        let one = Dual::from_f64(1.0);
        let a = Mat::from_rows(&[vec![t + 2.0, one], vec![one, Dual::from_f64(3.0)]]);
        let b = [Dual::from_f64(1.0), Dual::from_f64(2.0)];
        let x = solve(&a, &b).unwrap();
        let a0 = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x0 = solve(&a0, &[1.0, 2.0]).unwrap();
        let dx = solve(&a0, &[-x0[0], 0.0]).unwrap();
        assert_relative_eq!(x[0].du, dx[0], epsilon = 1e-14);
        assert_relative_eq!(x[1].du, dx[1], epsilon = 1e-14);
    }

    #[test]
    fn pivot_ratio_tracks_conditioning() {
        let a = Mat::diagonal(&[1.0, 1e-13]);
        assert!(Lu::factor(&a).unwrap().pivot_ratio() > 1e12);
    }

    #[test]
    fn transpose_products_agree() {
        let a = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let x = [0.5, -1.0];
        assert_eq!(a.tr_mul_vec(&x), a.transpose().mul_vec(&x));
    }
}
