//! Observation matrices, seeded random streams, Gaussian sampling and
//! correlation estimation.
//!
//! Standard normal variates come from `rand_distr::StandardNormal` (a
//! ziggurat sampler) driven by ChaCha20. Both crates are pinned in the
//! manifest so replicate tables stay stable across builds.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, SymMat};
use crate::scalar::Scalar;

/// `n x p` observation matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMat<T> {
    n: usize,
    p: usize,
    values: Vec<T>,
}

impl<T: Scalar> DataMat<T> {
    fn validate(n: usize, p: usize, values: &[T]) -> Result<()> {
        if n < 2 || p < 2 {
            return Err(Error::InvalidArgument(format!(
                "data matrix needs n >= 2 and p >= 2, got n = {n}, p = {p}"
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at row {}, column {}",
                k % n + 1,
                k / n + 1
            )));
        }
        Ok(())
    }

    /// Column-major values, `values[j * n + i]` is observation `i` of feature `j`.
    pub fn from_col_major(n: usize, p: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for a {n} x {p} matrix, got {}",
                n * p,
                values.len()
            )));
        }
        Self::validate(n, p, &values)?;
        Ok(DataMat { n, p, values })
    }

    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidArgument(
                "columns have unequal lengths".into(),
            ));
        }
        Self::from_col_major(n, p, columns.concat())
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidArgument(format!(
                "row {} has {} values, expected {p}",
                i + 1,
                rows[i].len()
            )));
        }
        let mut values = Vec::with_capacity(n * p);
        for j in 0..p {
            values.extend(rows.iter().map(|r| r[j]));
        }
        Self::from_col_major(n, p, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * self.n + i]
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.n)
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    pub fn col_major(&self) -> &[T] {
        &self.values
    }

    /// Keeps the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.p);
        for col in self.columns() {
            values.extend(rows.iter().map(|&i| col[i]));
        }
        Self::from_col_major(rows.len(), self.p, values)
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(self.n * cols.len());
        for &j in cols {
            values.extend_from_slice(self.column(j));
        }
        Self::from_col_major(self.n, cols.len(), values)
    }

    /// Applies `x -> alpha * x + beta` to column `j`.
    pub fn affine_column(&self, j: usize, alpha: T, beta: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values[j * self.n..(j + 1) * self.n] {
            *v = alpha * *v + beta;
        }
        out
    }
}

/// Reproducible random stream identified by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::with_lane(seed, stream, 0)
    }

    fn with_lane(seed: u64, stream: u64, lane: u64) -> Self {
        let key = splitmix64(seed ^ splitmix64(lane.wrapping_add(0xA5A5_A5A5)));
        let mut inner = ChaCha20Rng::seed_from_u64(key);
        inner.set_stream(stream);
        SeededRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent generator for a named purpose within the same `(seed, stream)`.
    pub fn lane(&self, lane: u64) -> SeededRng {
        Self::with_lane(self.seed, self.stream, lane.wrapping_add(1))
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        // 53 random mantissa bits
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * u
    }

    /// Uniform index in `0..n` without modulo bias.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Draws `n` rows `x = L z` with `L` the Cholesky factor of `sigma` and `z`
/// standard normal. Each row consumes `p` normals in order.
pub fn mvn_sample<T: Scalar>(
    n: usize,
    sigma: &SymMat<T>,
    rng: &mut SeededRng,
) -> Result<DataMat<T>> {
    let chol = cholesky(sigma)?;
    let p = sigma.p();
    let mut values = vec![T::zero(); n * p];
    let mut z = vec![T::zero(); p];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = T::c(rng.standard_normal());
        }
        for j in 0..p {
            let row = chol.row(j);
            let x: T = row.iter().zip(&z).map(|(&l, &zk)| l * zk).sum();
            values[j * n + i] = x;
        }
    }
    DataMat::from_col_major(n, p, values)
}

/// Divisor used for the standard deviation when standardizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleDenominator {
    /// Population scaling, divide by `n`.
    #[default]
    N,
    /// Sample scaling, divide by `n - 1`.
    NMinusOne,
}

fn standardize_in_place<T: Scalar>(col: &mut [T], denom: T, column: usize) -> Result<()> {
    let n = T::from_count(col.len());
    let scale = col.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for _ in 0..2 {
        let mean = col.iter().copied().sum::<T>() / n;
        col.iter_mut().for_each(|v| *v = *v - mean);
    }
    let ss: T = col.iter().map(|&v| v * v).sum();
    let sd = (ss / denom).sqrt();
    if !(sd > T::epsilon() * T::c(16.0) * (T::one() + scale)) {
        return Err(Error::DegenerateColumn { column });
    }
    col.iter_mut().for_each(|v| *v = *v / sd);
    Ok(())
}

/// Centers each column and scales it to unit standard deviation.
pub fn standardize_columns<T: Scalar>(
    x: &DataMat<T>,
    denominator: ScaleDenominator,
) -> Result<DataMat<T>> {
    let n = x.n();
    let denom = match denominator {
        ScaleDenominator::N => T::from_count(n),
        ScaleDenominator::NMinusOne => T::from_count(n - 1),
    };
    let mut values = x.values.clone();
    for (j, col) in values.chunks_exact_mut(n).enumerate() {
        standardize_in_place(col, denom, j)?;
    }
    Ok(DataMat { n, p: x.p, values })
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in (4 * chunks)..a.len() {
        tail = tail + a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `X^T X / n` over the columns of an already standardized matrix. The
/// diagonal is stored as exactly one.
pub fn gram_over_n<T: Scalar>(z: &DataMat<T>) -> SymMat<T> {
    let n = T::from_count(z.n());
    let p = z.p();
    let rows: Vec<Vec<T>> = (0..p)
        .into_par_iter()
        .map(|a| {
            let ca = z.column(a);
            (0..=a)
                .map(|b| {
                    if a == b {
                        T::one()
                    } else {
                        dot(ca, z.column(b)) / n
                    }
                })
                .collect()
        })
        .collect();
    SymMat::from_packed(p, rows.concat()).expect("packed length matches")
}

/// `X^T X / n` including the diagonal, without any centering or scaling.
pub fn crossprod_over_n<T: Scalar>(x: &DataMat<T>) -> SymMat<T> {
    let n = T::from_count(x.n());
    let p = x.p();
    let rows: Vec<Vec<T>> = (0..p)
        .into_par_iter()
        .map(|a| (0..=a).map(|b| dot(x.column(a), x.column(b)) / n).collect())
        .collect();
    SymMat::from_packed(p, rows.concat()).expect("packed length matches")
}

/// Sample correlation matrix `S(a, b) = X_a^T X_b / n` after standardizing
/// every column with denominator `n`.
pub fn sample_correlation<T: Scalar>(x: &DataMat<T>) -> Result<SymMat<T>> {
    let z = standardize_columns(x, ScaleDenominator::N)?;
    Ok(gram_over_n(&z))
}
