//! Small dense kernels used on individual blocks.
//!
//! Blocks are tiny (a few dozen rows at most), so everything here is written
//! as straightforward loops over row-major storage.

use std::ops::{Index, IndexMut};

use crate::error::{CeError, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseBlock<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseBlock<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CeError::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Copy of rows `r0..r1` and columns `c0..c1`.
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn zero_rows(&mut self, r0: usize, r1: usize) {
        for i in r0..r1 {
            self.row_mut(i).iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn zero_cols(&mut self, c0: usize, c1: usize) {
        for i in 0..self.rows {
            self.row_mut(i)[c0..c1].iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn frobenius_norm(&self) -> T {
        crate::scalar::norm2(&self.data)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * other`
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * other`
    pub fn matmul_tn(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "matmul_tn shape mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let brow = other.row(k);
            for i in 0..self.cols {
                let a = self[(k, i)];
                if a == T::zero() {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self -= aᵀ * b`
    pub fn sub_matmul_tn(&mut self, a: &Self, b: &Self) {
        assert_eq!(a.rows, b.rows);
        assert_eq!((self.rows, self.cols), (a.cols, b.cols), "sub_matmul_tn shape mismatch");
        let cols = self.cols;
        for k in 0..a.rows {
            let brow = b.row(k);
            for i in 0..a.cols {
                let s = a[(k, i)];
                if s == T::zero() {
                    continue;
                }
                let orow = &mut self.data[i * cols..(i + 1) * cols];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o -= s * bv;
                }
            }
        }
    }

    /// `y = self * x`
    pub fn gemv(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = crate::scalar::dot(self.row(i), x);
        }
    }

    /// `y -= self * x`
    pub fn gemv_sub(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi -= crate::scalar::dot(self.row(i), x);
        }
    }

    /// `y += self * x`
    pub fn gemv_add(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += crate::scalar::dot(self.row(i), x);
        }
    }

    /// `y -= selfᵀ * x`
    pub fn gemv_t_sub(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (yj, &a) in y.iter_mut().zip(self.row(i)) {
                *yj -= a * xi;
            }
        }
    }

    /// `y += selfᵀ * x`
    pub fn gemv_t_add(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (yj, &a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
    }

    /// In-place lower Cholesky factor; the strict upper triangle is zeroed.
    /// On a non-positive pivot returns the failing column.
    pub fn cholesky_in_place(&mut self) -> std::result::Result<(), usize> {
        assert_eq!(self.rows, self.cols, "cholesky needs a square block");
        let n = self.rows;
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= self[(j, k)] * self[(j, k)];
            }
            if d <= T::zero() || !d.is_finite() {
                return Err(j);
            }
            let d = d.sqrt();
            self[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= self[(i, k)] * self[(j, k)];
                }
                self[(i, j)] = s / d;
            }
            for k in (j + 1)..n {
                self[(j, k)] = T::zero();
            }
        }
        Ok(())
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `self ← L⁻¹ self` for lower-triangular `l`.
    pub fn solve_lower_in_place(&mut self, l: &Self) {
        assert_eq!(l.rows, self.rows);
        let cols = self.cols;
        for i in 0..self.rows {
            for k in 0..i {
                let lik = l[(i, k)];
                if lik == T::zero() {
                    continue;
                }
                let (head, tail) = self.data.split_at_mut(i * cols);
                let src = &head[k * cols..(k + 1) * cols];
                for (d, &s) in tail[..cols].iter_mut().zip(src) {
                    *d -= lik * s;
                }
            }
            let inv = T::one() / l[(i, i)];
            self.row_mut(i).iter_mut().for_each(|v| *v *= inv);
        }
    }

    /// Largest deviation of `selfᵀ self` from the identity (entrywise).
    pub fn orthogonality_defect(&self) -> T {
        let g = self.matmul_tn(self);
        let mut worst = T::zero();
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

impl<T> Index<(usize, usize)> for DenseBlock<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseBlock<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Forward substitution `x ← L⁻¹ x` for a lower-triangular `l`.
pub fn forward_solve<T: Scalar>(l: &DenseBlock<T>, x: &mut [T]) {
    for i in 0..x.len() {
        let row = l.row(i);
        let mut s = x[i];
        for k in 0..i {
            s -= row[k] * x[k];
        }
        x[i] = s / row[i];
    }
}

/// Back substitution `x ← L⁻ᵀ x` for a lower-triangular `l`.
pub fn backward_solve_transposed<T: Scalar>(l: &DenseBlock<T>, x: &mut [T]) {
    let n = x.len();
    for i in (0..n).rev() {
        let xi = x[i] / l[(i, i)];
        x[i] = xi;
        for k in 0..i {
            x[k] -= l[(i, k)] * xi;
        }
    }
}

/// Left singular vectors of a (typically wide) block.
///
/// Returns an orthogonal `rows × rows` matrix whose columns are the left
/// singular vectors of `f`, ordered by decreasing singular value, together with
/// the singular values (`rows` of them, zero-padded when `f` has fewer columns).
///
/// Householder QR of `fᵀ` reduces the work to a square triangular factor; a
/// one-sided Jacobi iteration on that factor then yields the right singular
/// vectors of `fᵀ`, which are the left singular vectors of `f`.
pub fn left_singular_basis<T: Scalar>(f: &DenseBlock<T>) -> Result<(DenseBlock<T>, Vec<T>)> {
    let n = f.rows;
    let m = f.cols;
    if n == 0 {
        return Ok((DenseBlock::zeros(0, 0), Vec::new()));
    }
    // work holds an (k × n) matrix whose Gram matrix equals f fᵀ
    let mut work = if m > n { triangular_factor_of_transpose(f) } else { f.transpose() };
    let k = work.rows;

    let mut v = DenseBlock::<T>::identity(n);
    let eps = T::epsilon();
    let total: T = work.as_slice().iter().map(|&x| x * x).sum();
    // columns below this squared norm are numerically zero
    let negligible = (eps * eps * total).max(T::min_positive_value());
    let mut converged = false;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for r in 0..k {
                    let a = work[(r, p)];
                    let b = work[(r, q)];
                    alpha += a * a;
                    beta += b * b;
                    gamma += a * b;
                }
                if alpha <= negligible || beta <= negligible || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..k {
                    let a = work[(r, p)];
                    let b = work[(r, q)];
                    work[(r, p)] = c * a - s * b;
                    work[(r, q)] = s * a + c * b;
                }
                for r in 0..n {
                    let a = v[(r, p)];
                    let b = v[(r, q)];
                    v[(r, p)] = c * a - s * b;
                    v[(r, q)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CeError::SvdFailure { rows: n, cols: m });
    }

    let mut sigma: Vec<(T, usize)> = (0..n)
        .map(|j| {
            let col: Vec<T> = (0..k).map(|r| work[(r, j)]).collect();
            (crate::scalar::norm2(&col), j)
        })
        .collect();
    sigma.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let u = DenseBlock::from_fn(n, n, |i, j| v[(i, sigma[j].1)]);
    if !u.is_finite() {
        return Err(CeError::SvdFailure { rows: n, cols: m });
    }
    Ok((u, sigma.into_iter().map(|(s, _)| s).collect()))
}

/// R factor (n × n, upper triangular) of the Householder QR of `fᵀ` (m × n, m > n).
fn triangular_factor_of_transpose<T: Scalar>(f: &DenseBlock<T>) -> DenseBlock<T> {
    let n = f.rows;
    // column-major copy of fᵀ: column j of fᵀ is row j of f
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| f.row(j).to_vec()).collect();
    for j in 0..n {
        let norm = crate::scalar::norm2(&cols[j][j..]);
        if norm == T::zero() {
            continue;
        }
        let alpha = if cols[j][j] > T::zero() { -norm } else { norm };
        let mut h: Vec<T> = cols[j][j..].to_vec();
        h[0] -= alpha;
        let hnorm2: T = h.iter().map(|&x| x * x).sum();
        if hnorm2 == T::zero() {
            continue;
        }
        cols[j][j] = alpha;
        for x in cols[j][j + 1..].iter_mut() {
            *x = T::zero();
        }
        for col in cols.iter_mut().skip(j + 1) {
            let proj: T = h.iter().zip(&col[j..]).map(|(&a, &b)| a * b).sum();
            let scale = T::lit(2.0) * proj / hnorm2;
            for (c, &hv) in col[j..].iter_mut().zip(&h) {
                *c -= scale * hv;
            }
        }
    }
    DenseBlock::from_fn(n, n, |i, j| if i <= j { cols[j][i] } else { T::zero() })
}

/// Lower Cholesky factor of a dense SPD matrix, or the failing pivot.
pub fn dense_cholesky<T: Scalar>(a: &DenseBlock<T>) -> std::result::Result<DenseBlock<T>, usize> {
    let mut l = a.clone();
    l.cholesky_in_place()?;
    Ok(l)
}
