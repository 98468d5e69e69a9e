//! Dense symmetric linear algebra.
//!
//! Matrices are stored as the packed lower triangle (row-major, diagonal
//! included), so symmetry holds by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Above this size extreme eigenvalues come from a Householder reduction and
/// Sturm bisection instead of a full Jacobi sweep.
pub const JACOBI_MAX_DIM: usize = 64;

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

/// Dense symmetric `p x p` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMat<T> {
    p: usize,
    entries: Vec<T>,
}

impl<T: Scalar> SymMat<T> {
    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "symmetric matrix needs at least one row");
        SymMat {
            p,
            entries: vec![T::zero(); p * (p + 1) / 2],
        }
    }

    pub fn identity(p: usize) -> Self {
        Self::from_diag(&vec![T::one(); p])
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds the matrix from `f(i, j)` evaluated on the lower triangle (`i >= j`).
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut entries = Vec::with_capacity(p * (p + 1) / 2);
        for i in 0..p {
            for j in 0..=i {
                entries.push(f(i, j));
            }
        }
        SymMat { p, entries }
    }

    /// Packed lower triangle, row-major, length `p(p+1)/2`.
    pub fn from_packed(p: usize, entries: Vec<T>) -> Result<Self> {
        if p == 0 || entries.len() != p * (p + 1) / 2 {
            return Err(Error::InvalidArgument(format!(
                "packed symmetric storage for p = {p} needs {} entries, got {}",
                p * (p + 1) / 2,
                entries.len()
            )));
        }
        Ok(SymMat { p, entries })
    }

    /// Builds from a full row-major square matrix. Fails if the input is not
    /// symmetric to within `1e-12 * (1 + max|m|)`.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument(
                "matrix must be square and non-empty".into(),
            ));
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(T::zero(), |acc, v| acc.max(v.abs()));
        let tol = T::c(1e-12) * (T::one() + scale);
        for i in 0..p {
            for j in 0..i {
                if (rows[i][j] - rows[j][i]).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self::from_fn(p, |i, j| rows[i][j]))
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.entries[packed_index(i, j)] = v;
    }

    pub fn packed(&self) -> &[T] {
        &self.entries
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.p).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        (0..self.p).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entry, diagonal included.
    pub fn max_abs(&self) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute off-diagonal entry; zero when `p == 1`.
    pub fn max_offdiag_abs(&self) -> T {
        self.offdiag()
            .fold(T::zero(), |acc, (_, _, v)| acc.max(v.abs()))
    }

    /// Iterates `(a, b, value)` over the strict upper triangle, `a < b`, in
    /// lexicographic order.
    pub fn offdiag(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.p).flat_map(move |a| ((a + 1)..self.p).map(move |b| (a, b, self.get(a, b))))
    }

    pub fn has_unit_diagonal(&self) -> bool {
        (0..self.p).all(|i| self.get(i, i) == T::one())
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    /// Full row-major copy.
    pub fn to_dense(&self) -> Vec<T> {
        let p = self.p;
        let mut out = vec![T::zero(); p * p];
        for i in 0..p {
            for j in 0..=i {
                let v = self.get(i, j);
                out[i * p + j] = v;
                out[j * p + i] = v;
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.p)
            .map(|i| (0..self.p).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Row-major product `self * other`.
    pub fn matmul(&self, other: &SymMat<T>) -> Vec<T> {
        assert_eq!(self.p, other.p, "dimension mismatch");
        let p = self.p;
        let a = self.to_dense();
        let b = other.to_dense();
        let mut out = vec![T::zero(); p * p];
        for i in 0..p {
            for k in 0..p {
                let aik = a[i * p + k];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..p {
                    out[i * p + j] = out[i * p + j] + aik * b[k * p + j];
                }
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        SymMat {
            p: self.p,
            entries: self.entries.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift_diagonal(&self, shift: T) -> Self {
        let mut out = self.clone();
        for i in 0..self.p {
            out.set(i, i, self.get(i, i) + shift);
        }
        out
    }

    /// Symmetric permutation: entry `(perm[i], perm[j])` of the result equals
    /// entry `(i, j)` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.p);
        let mut inv = vec![0; self.p];
        for (i, &pi) in perm.iter().enumerate() {
            inv[pi] = i;
        }
        Self::from_fn(self.p, |i, j| self.get(inv[i], inv[j]))
    }
}

/// Lower-triangular factor `L` with `L * L^T` equal to the source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    p: usize,
    // packed lower triangle, same layout as SymMat
    lower: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Entry `(i, j)` of `L`; zero above the diagonal.
    #[inline]
    pub fn l(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.lower[packed_index(i, j)]
        }
    }

    /// Row `i` of `L` up to and including the diagonal.
    pub fn row(&self, i: usize) -> &[T] {
        let start = i * (i + 1) / 2;
        &self.lower[start..start + i + 1]
    }

    pub fn log_det(&self) -> T {
        (0..self.p).map(|i| self.l(i, i).ln()).sum::<T>() * T::c(2.0)
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let p = self.p;
        assert_eq!(b.len(), p);
        for i in 0..p {
            let row = self.row(i);
            let mut s = b[i];
            for k in 0..i {
                s = s - row[k] * b[k];
            }
            b[i] = s / row[i];
        }
        for i in (0..p).rev() {
            let mut s = b[i];
            for k in (i + 1)..p {
                s = s - self.l(k, i) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }

    /// `L * L^T`.
    pub fn reconstruct(&self) -> SymMat<T> {
        SymMat::from_fn(self.p, |i, j| {
            let (ri, rj) = (self.row(i), self.row(j));
            (0..=j).map(|k| ri[k] * rj[k]).sum()
        })
    }
}

/// Cholesky factorisation of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(m: &SymMat<T>) -> Result<Cholesky<T>> {
    let p = m.p();
    let mut lower = vec![T::zero(); p * (p + 1) / 2];
    for i in 0..p {
        let ri = i * (i + 1) / 2;
        for j in 0..=i {
            let rj = j * (j + 1) / 2;
            let mut s = m.get(i, j);
            for k in 0..j {
                s = s - lower[ri + k] * lower[rj + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return Err(Error::DecompositionFailure { pivot: i + 1 });
                }
                lower[ri + i] = s.sqrt();
            } else {
                lower[ri + j] = s / lower[rj + j];
            }
        }
    }
    Ok(Cholesky { p, lower })
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn invert_spd<T: Scalar>(m: &SymMat<T>) -> Result<SymMat<T>> {
    let chol = cholesky(m)?;
    Ok(invert_from_cholesky(&chol))
}

pub fn invert_from_cholesky<T: Scalar>(chol: &Cholesky<T>) -> SymMat<T> {
    let p = chol.p();
    let mut out = SymMat::zeros(p);
    let mut col = vec![T::zero(); p];
    for j in 0..p {
        col.iter_mut().for_each(|v| *v = T::zero());
        col[j] = T::one();
        chol.solve_in_place(&mut col);
        for i in j..p {
            out.set(i, j, col[i]);
        }
    }
    out
}

/// Rescales a covariance matrix to unit diagonal.
pub fn cov_to_corr<T: Scalar>(m: &SymMat<T>) -> Result<SymMat<T>> {
    let d = m.diag();
    if let Some(i) = d.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "diagonal entry {} is not strictly positive",
            i + 1
        )));
    }
    let s: Vec<T> = d.iter().map(|v| v.sqrt()).collect();
    Ok(SymMat::from_fn(m.p(), |i, j| {
        if i == j {
            T::one()
        } else {
            m.get(i, j) / (s[i] * s[j])
        }
    }))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extremes<T: Scalar>(m: &SymMat<T>) -> Result<(T, T)> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    if m.p() <= JACOBI_MAX_DIM {
        let ev = jacobi_eigenvalues(m);
        let lo = ev.iter().copied().fold(T::infinity(), T::min);
        let hi = ev.iter().copied().fold(T::neg_infinity(), T::max);
        Ok((lo, hi))
    } else {
        Ok(tridiagonal_extremes(m))
    }
}

/// All eigenvalues by cyclic Jacobi rotations, in no particular order.
pub fn jacobi_eigenvalues<T: Scalar>(m: &SymMat<T>) -> Vec<T> {
    let p = m.p();
    let mut a = m.to_dense();
    let frob: T = a.iter().map(|&v| v * v).sum::<T>();
    let target = T::epsilon() * T::epsilon() * frob;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..p {
            for j in (i + 1)..p {
                off = off + a[i * p + j] * a[i * p + j];
            }
        }
        if off <= target || off == T::zero() {
            break;
        }
        for r in 0..p {
            for q in (r + 1)..p {
                let arq = a[r * p + q];
                if arq == T::zero() {
                    continue;
                }
                let theta = (a[q * p + q] - a[r * p + r]) / (T::c(2.0) * arq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..p {
                    let akr = a[k * p + r];
                    let akq = a[k * p + q];
                    a[k * p + r] = c * akr - s * akq;
                    a[k * p + q] = s * akr + c * akq;
                }
                for k in 0..p {
                    let ark = a[r * p + k];
                    let aqk = a[q * p + k];
                    a[r * p + k] = c * ark - s * aqk;
                    a[q * p + k] = s * ark + c * aqk;
                }
                a[r * p + q] = T::zero();
                a[q * p + r] = T::zero();
            }
        }
    }
    (0..p).map(|i| a[i * p + i]).collect()
}

/// Householder reduction to tridiagonal form; returns `(diagonal, subdiagonal)`.
pub fn tridiagonalize<T: Scalar>(m: &SymMat<T>) -> (Vec<T>, Vec<T>) {
    let p = m.p();
    let mut a = m.to_dense();
    let mut sub = vec![T::zero(); p.saturating_sub(1)];
    let mut v = vec![T::zero(); p];
    let mut w = vec![T::zero(); p];
    for k in 0..p.saturating_sub(2) {
        let norm = ((k + 1)..p)
            .map(|i| a[i * p + k] * a[i * p + k])
            .sum::<T>()
            .sqrt();
        if norm == T::zero() {
            sub[k] = T::zero();
            continue;
        }
        let x0 = a[(k + 1) * p + k];
        let alpha = if x0 > T::zero() { -norm } else { norm };
        for i in (k + 1)..p {
            v[i] = a[i * p + k];
        }
        v[k + 1] = v[k + 1] - alpha;
        let vnorm = ((k + 1)..p).map(|i| v[i] * v[i]).sum::<T>().sqrt();
        if vnorm == T::zero() {
            sub[k] = x0;
            continue;
        }
        for i in (k + 1)..p {
            v[i] = v[i] / vnorm;
        }
        // w = A22 v, c = v^T w, q = w - c v, A22 -= 2 (v q^T + q v^T)
        for i in (k + 1)..p {
            w[i] = ((k + 1)..p).map(|j| a[i * p + j] * v[j]).sum();
        }
        let c: T = ((k + 1)..p).map(|i| v[i] * w[i]).sum();
        for i in (k + 1)..p {
            w[i] = w[i] - c * v[i];
        }
        for i in (k + 1)..p {
            for j in (k + 1)..p {
                a[i * p + j] = a[i * p + j] - T::c(2.0) * (v[i] * w[j] + w[i] * v[j]);
            }
        }
        sub[k] = alpha;
        for i in (k + 1)..p {
            a[i * p + k] = T::zero();
            a[k * p + i] = T::zero();
        }
    }
    if p >= 2 {
        sub[p - 2] = a[(p - 1) * p + (p - 2)];
    }
    let diag = (0..p).map(|i| a[i * p + i]).collect();
    (diag, sub)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count<T: Scalar>(diag: &[T], sub: &[T], x: T, pivmin: T) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < T::zero() {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - sub[i - 1] * sub[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) of a tridiagonal matrix by bisection.
pub fn tridiagonal_eigenvalue<T: Scalar>(diag: &[T], sub: &[T], k: usize) -> T {
    let p = diag.len();
    assert!(k < p);
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    let mut scale = T::zero();
    for i in 0..p {
        let left = if i > 0 { sub[i - 1].abs() } else { T::zero() };
        let right = if i + 1 < p { sub[i].abs() } else { T::zero() };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
        scale = scale.max(diag[i].abs()).max(left);
    }
    let pivmin = T::min_positive_value() * T::c(1e4) * (T::one() + scale * scale);
    let pad = T::epsilon() * T::c(4.0) * (T::one() + scale);
    lo = lo - pad;
    hi = hi + pad;
    for _ in 0..256 {
        let mid = lo + (hi - lo) / T::c(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, sub, mid, pivmin) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo + (hi - lo) / T::c(2.0)
}

fn tridiagonal_extremes<T: Scalar>(m: &SymMat<T>) -> (T, T) {
    let (d, e) = tridiagonalize(m);
    let p = d.len();
    (
        tridiagonal_eigenvalue(&d, &e, 0),
        tridiagonal_eigenvalue(&d, &e, p - 1),
    )
}
