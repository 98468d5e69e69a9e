//! Edge-set estimation by hard-thresholding sample correlations.
//!
//! A pair `(a, b)` is selected when `|S(a, b)| > gamma`, strictly. Inputs
//! whose diagonal is not exactly one are rescaled to correlations first.

use std::borrow::Cow;
use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cov_to_corr, SymMat};
use crate::normal::normal_quantile;
use crate::scalar::Scalar;

/// Undirected simple graph on nodes `0..p`, stored as sorted pairs `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeSet {
    p: usize,
    pairs: Vec<(usize, usize)>,
}

/// Number of unordered pairs on `p` nodes.
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

impl EdgeSet {
    pub fn empty(p: usize) -> Self {
        EdgeSet {
            p,
            pairs: Vec::new(),
        }
    }

    pub fn complete(p: usize) -> Self {
        let pairs = (0..p)
            .flat_map(|a| ((a + 1)..p).map(move |b| (a, b)))
            .collect();
        EdgeSet { p, pairs }
    }

    /// Builds from arbitrary pairs. Pairs are normalised to `a < b` and
    /// deduplicated; self-loops and out-of-range nodes are rejected.
    pub fn from_pairs(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::InvalidArgument(format!(
                    "self-loop at node {}",
                    a + 1
                )));
            }
            if a >= p || b >= p {
                return Err(Error::InvalidArgument(format!(
                    "edge ({}, {}) out of range for p = {p}",
                    a + 1,
                    b + 1
                )));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        out.dedup();
        Ok(EdgeSet { p, pairs: out })
    }

    // Caller guarantees sorted, unique, in-range pairs with a < b.
    fn from_sorted_unchecked(p: usize, pairs: Vec<(usize, usize)>) -> Self {
        debug_assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        EdgeSet { p, pairs }
    }

    /// Edges `(a, b)` with `a < b` for which `keep(a, b)` holds.
    pub fn from_predicate(p: usize, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut pairs = Vec::new();
        for a in 0..p {
            for b in (a + 1)..p {
                if keep(a, b) {
                    pairs.push((a, b));
                }
            }
        }
        Self::from_sorted_unchecked(p, pairs)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.pairs.binary_search(&key).is_ok()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.p == other.p && self.pairs.iter().all(|&(a, b)| other.contains(a, b))
    }

    pub fn intersection(&self, other: &EdgeSet) -> EdgeSet {
        let pairs = self
            .pairs
            .iter()
            .copied()
            .filter(|&(a, b)| other.contains(a, b))
            .collect();
        Self::from_sorted_unchecked(self.p, pairs)
    }

    pub fn difference(&self, other: &EdgeSet) -> EdgeSet {
        let pairs = self
            .pairs
            .iter()
            .copied()
            .filter(|&(a, b)| !other.contains(a, b))
            .collect();
        Self::from_sorted_unchecked(self.p, pairs)
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        let mut pairs: Vec<_> = self
            .pairs
            .iter()
            .chain(other.pairs.iter())
            .copied()
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        Self::from_sorted_unchecked(self.p.max(other.p), pairs)
    }

    /// Sorted neighbours of `a`.
    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .pairs
            .iter()
            .filter_map(|&(x, y)| {
                if x == a {
                    Some(y)
                } else if y == a {
                    Some(x)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Dense boolean adjacency, row-major `p x p`.
    pub fn adjacency(&self) -> Vec<bool> {
        let mut adj = vec![false; self.p * self.p];
        for &(a, b) in &self.pairs {
            adj[a * self.p + b] = true;
            adj[b * self.p + a] = true;
        }
        adj
    }

    /// Image under the node relabeling `a -> perm[a]`.
    pub fn relabeled(&self, perm: &[usize]) -> EdgeSet {
        assert_eq!(perm.len(), self.p);
        EdgeSet::from_pairs(self.p, self.pairs.iter().map(|&(a, b)| (perm[a], perm[b])))
            .expect("permutation keeps edges valid")
    }
}

/// How the threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Use `gamma` as given.
    Fixed { gamma: f64 },
    /// `gamma = (2/3) c1 n^(-kappa)`, the sure-screening rate.
    SureScreening { c1: f64, kappa: f64 },
    /// `gamma = Phi^{-1}(1 - q/2) / sqrt(n)`, targeting expected false
    /// positive rate `q`. To start from a tolerated false positive count `f`
    /// use [`fpr_level_from_tolerated`].
    FprControl { q: f64 },
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdRule::Fixed { gamma } if !(gamma >= 0.0 && gamma.is_finite()) => {
                Err(Error::Domain(format!("fixed threshold must be finite and >= 0, got {gamma}")))
            }
            ThresholdRule::SureScreening { c1, kappa }
                if !(c1 > 0.0 && c1.is_finite() && kappa > 0.0 && kappa < 0.5) =>
            {
                Err(Error::Domain(format!(
                    "sure-screening rule needs c1 > 0 and 0 < kappa < 1/2, got c1 = {c1}, kappa = {kappa}"
                )))
            }
            ThresholdRule::FprControl { q } if !(q > 0.0 && q <= 1.0) => {
                Err(Error::Domain(format!("false positive level must lie in (0, 1], got {q}")))
            }
            _ => Ok(()),
        }
    }
}

/// Converts a tolerated number of false positives `f` into the level `q`,
/// given the number of non-edges `|E^c|`.
pub fn fpr_level_from_tolerated(f: f64, non_edges: usize) -> Result<f64> {
    if non_edges == 0 || !(f > 0.0) {
        return Err(Error::Domain("need f > 0 and at least one non-edge".into()));
    }
    Ok(f / non_edges as f64)
}

/// Numeric threshold for `n` observations on `p` features.
pub fn resolve_threshold<T: Scalar>(rule: &ThresholdRule, n: usize, p: usize) -> Result<T> {
    if n < 2 || p < 2 {
        return Err(Error::Domain(format!(
            "need n >= 2 and p >= 2, got n = {n}, p = {p}"
        )));
    }
    rule.validate()?;
    let nf = T::from_count(n);
    Ok(match *rule {
        ThresholdRule::Fixed { gamma } => T::c(gamma),
        ThresholdRule::SureScreening { c1, kappa } => T::c(2.0 / 3.0 * c1) * nf.powf(-T::c(kappa)),
        ThresholdRule::FprControl { q } => {
            normal_quantile(T::one() - T::c(q) / T::c(2.0))? / nf.sqrt()
        }
    })
}

fn correlation_scale<T: Scalar>(s: &SymMat<T>) -> Result<Cow<'_, SymMat<T>>> {
    if !s.is_finite() {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    if s.has_unit_diagonal() {
        Ok(Cow::Borrowed(s))
    } else {
        Ok(Cow::Owned(cov_to_corr(s)?))
    }
}

fn check_gamma<T: Scalar>(gamma: T) -> Result<()> {
    if !(gamma >= T::zero()) {
        return Err(Error::Domain(format!(
            "threshold must be >= 0, got {gamma}"
        )));
    }
    Ok(())
}

/// Pairs `a < b` with `|S(a, b)| > gamma`.
pub fn grass_edge_set<T: Scalar>(s: &SymMat<T>, gamma: T) -> Result<EdgeSet> {
    check_gamma(gamma)?;
    let s = correlation_scale(s)?;
    Ok(EdgeSet::from_predicate(s.p(), |a, b| {
        s.get(a, b).abs() > gamma
    }))
}

/// Nodes `b != a` with `|S(a, b)| > gamma`, in increasing order.
pub fn grass_neighborhood<T: Scalar>(s: &SymMat<T>, a: usize, gamma: T) -> Result<Vec<usize>> {
    check_gamma(gamma)?;
    if a >= s.p() {
        return Err(Error::Domain(format!(
            "node {} out of range for p = {}",
            a + 1,
            s.p()
        )));
    }
    let s = correlation_scale(s)?;
    Ok((0..s.p())
        .filter(|&b| b != a && s.get(a, b).abs() > gamma)
        .collect())
}

/// Selected pairs with their magnitudes, largest first; ties in `(a, b)` order.
pub fn ranked_edges<T: Scalar>(s: &SymMat<T>, gamma: T) -> Result<Vec<(usize, usize, T)>> {
    check_gamma(gamma)?;
    let s = correlation_scale(s)?;
    let mut out: Vec<(usize, usize, T)> = s
        .offdiag()
        .map(|(a, b, v)| (a, b, v.abs()))
        .filter(|&(_, _, m)| m > gamma)
        .collect();
    out.sort_by(|x, y| {
        y.2.partial_cmp(&x.2)
            .unwrap_or(Ordering::Equal)
            .then((x.0, x.1).cmp(&(y.0, y.1)))
    });
    Ok(out)
}

fn sorted_magnitudes_desc<T: Scalar>(s: &SymMat<T>) -> Vec<T> {
    let mut mags: Vec<T> = s.offdiag().map(|(_, _, v)| v.abs()).collect();
    mags.sort_by(|x, y| y.partial_cmp(x).unwrap_or(Ordering::Equal));
    mags
}

/// Threshold chosen to hit a requested edge count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeCountThreshold<T> {
    pub gamma: T,
    pub requested: usize,
    /// Edge count actually produced by `gamma`; below `requested` only when
    /// tied magnitudes straddle the requested rank.
    pub achieved: usize,
}

/// Threshold whose edge set has exactly `m` edges when that is attainable.
///
/// Returns the midpoint between the `m`-th and `(m+1)`-th largest magnitude.
/// When those two are tied the tie value itself is returned and `achieved`
/// reports the smaller count it produces.
pub fn threshold_for_edge_count<T: Scalar>(
    s: &SymMat<T>,
    m: usize,
) -> Result<EdgeCountThreshold<T>> {
    let s = correlation_scale(s)?;
    let mags = sorted_magnitudes_desc(&s);
    let total = mags.len();
    if m > total {
        return Err(Error::Domain(format!(
            "requested {m} edges but only {total} pairs exist"
        )));
    }
    let count_above = |g: T| mags.iter().take_while(|&&v| v > g).count();
    let gamma = if total == 0 {
        T::zero()
    } else if m == 0 {
        mags[0]
    } else if m == total {
        mags[total - 1] / T::c(2.0)
    } else {
        let (hi, lo) = (mags[m - 1], mags[m]);
        if hi > lo {
            lo + (hi - lo) / T::c(2.0)
        } else {
            hi
        }
    };
    Ok(EdgeCountThreshold {
        gamma,
        requested: m,
        achieved: count_above(gamma),
    })
}

/// Distinct positive off-diagonal magnitudes in strictly decreasing order.
/// Thresholding just below each entry gives every non-empty edge set the
/// estimator can produce.
pub fn threshold_path<T: Scalar>(s: &SymMat<T>) -> Result<Vec<T>> {
    let s = correlation_scale(s)?;
    let mut mags = sorted_magnitudes_desc(&s);
    mags.dedup();
    mags.retain(|&v| v > T::zero());
    Ok(mags)
}
