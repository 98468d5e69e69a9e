//! Property checks shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use grass::experiments::{run_table1, Table1Config};
use grass::graph::UnionFind;
use grass::penalized::{graphical_lasso, neighborhood_selection, pattern_of};
use grass::{
    confusion, connected_components, cov_to_corr, eigen_extremes, grass_edge_set,
    grass_neighborhood, invert_spd, lasso_cd, normal_cdf, normal_quantile, partitions_equal,
    sample_correlation, standardize_columns, CombineRule, DataMatrix, EdgeSet, GlassoOptions,
    LassoOptions, ScaleDenominator, SymMatrix,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = Result<(), TestCaseError>;

/// Observations with entries drawn uniformly from [-10, 10].
pub fn data_matrix(
    n: std::ops::RangeInclusive<usize>,
    p: std::ops::RangeInclusive<usize>,
) -> BoxedStrategy<DataMatrix> {
    (n, p)
        .prop_flat_map(|(n, p)| {
            proptest::collection::vec(-10.0f64..10.0, n * p).prop_map(move |v| (n, p, v))
        })
        .prop_map(|(n, p, v)| DataMatrix::from_col_major(n, p, v).expect("sizes match"))
        .boxed()
}

/// `G G^T / p + 0.1 I` for a random square `G`.
pub fn spd_matrix(p: std::ops::RangeInclusive<usize>) -> BoxedStrategy<SymMatrix> {
    p.prop_flat_map(|p| {
        proptest::collection::vec(-1.0f64..1.0, p * p).prop_map(move |g| gram_plus_ridge(p, &g))
    })
    .boxed()
}

pub fn gram_plus_ridge(p: usize, g: &[f64]) -> SymMatrix {
    SymMatrix::from_fn(p, |i, j| {
        let dot: f64 = (0..p).map(|k| g[i * p + k] * g[j * p + k]).sum();
        dot / p as f64 + if i == j { 0.1 } else { 0.0 }
    })
}

pub fn edge_set(p: std::ops::RangeInclusive<usize>) -> BoxedStrategy<EdgeSet> {
    p.prop_flat_map(|p| {
        proptest::collection::vec(any::<bool>(), p * (p - 1) / 2).prop_map(move |bits| {
            let mut k = 0;
            EdgeSet::from_predicate(p, |_, _| {
                k += 1;
                bits[k - 1]
            })
        })
    })
    .boxed()
}

pub fn permutation(p: usize) -> BoxedStrategy<Vec<usize>> {
    Just((0..p).collect::<Vec<usize>>()).prop_shuffle().boxed()
}

fn corr(x: &DataMatrix) -> Option<SymMatrix> {
    sample_correlation(x).ok()
}

/// Raising the threshold removes edges and refines the components.
pub fn nested_along_path(x: &DataMatrix, g1: f64, g2: f64) -> Check {
    let Some(s) = corr(x) else { return Ok(()) };
    let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
    let (e_lo, e_hi) = (
        grass_edge_set(&s, lo).unwrap(),
        grass_edge_set(&s, hi).unwrap(),
    );
    prop_assert!(e_hi.is_subset(&e_lo));
    prop_assert!(connected_components(&e_hi).refines(&connected_components(&e_lo)));
    Ok(())
}

/// Per-node neighborhoods agree with the edge set.
pub fn neighborhoods_match_edges(x: &DataMatrix, gamma: f64) -> Check {
    let Some(s) = corr(x) else { return Ok(()) };
    let e = grass_edge_set(&s, gamma).unwrap();
    for a in 0..s.p() {
        prop_assert_eq!(grass_neighborhood(&s, a, gamma).unwrap(), e.neighbors(a));
    }
    Ok(())
}

/// Reordering columns and flipping their signs relabels the edge set.
pub fn permutation_and_sign_invariance(
    x: &DataMatrix,
    cols: &[usize],
    flips: &[bool],
    gamma: f64,
) -> Check {
    let Some(s) = corr(x) else { return Ok(()) };
    let mut y = x.select_columns(cols).unwrap();
    for (k, &f) in flips.iter().enumerate().take(y.p()) {
        if f {
            y = y.affine_column(k, -1.0, 0.0);
        }
    }
    let s2 = sample_correlation(&y).unwrap();
    let mut inv = vec![0; cols.len()];
    for (k, &c) in cols.iter().enumerate() {
        inv[c] = k;
    }
    prop_assert_eq!(
        grass_edge_set(&s2, gamma).unwrap(),
        grass_edge_set(&s, gamma).unwrap().relabeled(&inv)
    );
    Ok(())
}

/// Column-wise affine maps with nonzero slope leave the edge set unchanged,
/// up to pairs whose magnitude sits within rounding of the threshold.
pub fn affine_invariance(x: &DataMatrix, j: usize, alpha: f64, beta: f64, gamma: f64) -> Check {
    let Some(s) = corr(x) else { return Ok(()) };
    let j = j % x.p();
    let s2 = sample_correlation(&x.affine_column(j, alpha, beta)).unwrap();
    let (e1, e2) = (
        grass_edge_set(&s, gamma).unwrap(),
        grass_edge_set(&s2, gamma).unwrap(),
    );
    for (a, b) in e1.difference(&e2).iter().chain(e2.difference(&e1).iter()) {
        prop_assert!(
            (s.get(a, b).abs() - gamma).abs() < 1e-9,
            "pair ({a}, {b}) changed"
        );
    }
    Ok(())
}

fn bfs_labels(e: &EdgeSet) -> Vec<usize> {
    let p = e.p();
    let mut label = vec![usize::MAX; p];
    let mut next = 0;
    for start in 0..p {
        if label[start] != usize::MAX {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        label[start] = next;
        while let Some(a) = queue.pop_front() {
            for b in e.neighbors(a) {
                if label[b] == usize::MAX {
                    label[b] = next;
                    queue.push_back(b);
                }
            }
        }
        next += 1;
    }
    label
}

/// Union-find components agree with breadth-first search.
pub fn components_match_bfs(e: &EdgeSet) -> Check {
    let bfs = grass::ComponentLabeling::from_labels(&bfs_labels(e));
    let uf = connected_components(e);
    prop_assert!(partitions_equal(&uf, &bfs).unwrap());
    prop_assert_eq!(uf.count(), bfs.count());
    let mut direct = UnionFind::new(e.p());
    for (a, b) in e.iter() {
        direct.union(a, b);
    }
    for (a, b) in e.iter() {
        prop_assert_eq!(direct.find(a), direct.find(b));
    }
    Ok(())
}

/// Swapping estimate and truth swaps false positives with false negatives.
pub fn confusion_swap(a: &EdgeSet, b: &EdgeSet) -> Check {
    if a.p() != b.p() {
        return Ok(());
    }
    let (ab, ba) = (confusion(a, b).unwrap(), confusion(b, a).unwrap());
    prop_assert_eq!(ab.tp, ba.tp);
    prop_assert_eq!(ab.tn, ba.tn);
    prop_assert_eq!(ab.fp, ba.r#fn);
    prop_assert_eq!(ab.r#fn, ba.fp);
    prop_assert_eq!(ab.total(), a.p() * (a.p() - 1) / 2);
    Ok(())
}

pub fn cov_to_corr_idempotent(sigma: &SymMatrix) -> Check {
    let c = cov_to_corr(sigma).unwrap();
    let cc = cov_to_corr(&c).unwrap();
    for i in 0..c.p() {
        prop_assert!((c.get(i, i) - 1.0).abs() < 1e-14);
        for j in 0..c.p() {
            prop_assert!((c.get(i, j) - cc.get(i, j)).abs() < 1e-14);
        }
    }
    Ok(())
}

pub fn double_inverse(sigma: &SymMatrix) -> Check {
    let back = invert_spd(&invert_spd(sigma).unwrap()).unwrap();
    let scale = sigma.max_abs();
    for (a, b) in sigma.packed().iter().zip(back.packed()) {
        prop_assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
    }
    Ok(())
}

/// Number of eigenvalues below `x`, from the inertia of `M - x I`.
pub fn eigen_count_below(m: &SymMatrix, x: f64) -> usize {
    let p = m.p();
    let mut a: Vec<f64> = m.to_dense();
    for i in 0..p {
        a[i * p + i] -= x;
    }
    let mut negatives = 0;
    for k in 0..p {
        let mut d = a[k * p + k];
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            negatives += 1;
        }
        for i in k + 1..p {
            let f = a[i * p + k] / d;
            for j in k + 1..p {
                a[i * p + j] -= f * a[k * p + j];
            }
        }
    }
    negatives
}

/// Smallest and largest eigenvalue by bisection on the inertia count.
pub fn eigen_extremes_oracle(m: &SymMatrix) -> (f64, f64) {
    let p = m.p();
    let r = (0..p)
        .map(|i| (0..p).map(|j| m.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let bisect = |target: usize| {
        let (mut lo, mut hi) = (-r - 1.0, r + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eigen_count_below(m, mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (bisect(1), bisect(p))
}

pub fn eigen_matches_inertia(m: &SymMatrix) -> Check {
    let (lo, hi) = eigen_extremes(m).unwrap();
    let (olo, ohi) = eigen_extremes_oracle(m);
    let scale = m.max_abs().max(1.0);
    prop_assert!((lo - olo).abs() <= 1e-8 * scale, "min {lo} vs {olo}");
    prop_assert!((hi - ohi).abs() <= 1e-8 * scale, "max {hi} vs {ohi}");
    Ok(())
}

pub fn quantile_round_trip(u: f64) -> Check {
    let z: f64 = normal_quantile(u).unwrap();
    let back: f64 = normal_cdf(z).unwrap();
    let tail = u.min(1.0 - u);
    prop_assert!(
        (back - u).abs() <= 1e-12 * tail.max(1e-300) + 1e-15,
        "u {u} gave {back}"
    );
    Ok(())
}

pub fn and_within_or(x: &DataMatrix, lambda: f64) -> Check {
    let Ok(z) = standardize_columns(x, ScaleDenominator::N) else {
        return Ok(());
    };
    let opts = LassoOptions::default();
    let and = neighborhood_selection(&z, lambda, CombineRule::And, &opts).unwrap();
    let or = neighborhood_selection(&z, lambda, CombineRule::Or, &opts).unwrap();
    prop_assert!(and.is_subset(&or));
    Ok(())
}

pub fn glasso_unpenalized_is_inverse(sigma: &SymMatrix) -> Check {
    let opts = GlassoOptions {
        tol: 1e-12,
        max_iter: 5000,
        ..GlassoOptions::default()
    };
    let sol = graphical_lasso(sigma, 0.0, &opts).unwrap();
    let inv = invert_spd(sigma).unwrap();
    let scale = inv.max_abs();
    for (a, b) in sol.theta.packed().iter().zip(inv.packed()) {
        prop_assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
    }
    Ok(())
}

/// `log det W` never decreases over the sweeps, up to rounding.
pub fn glasso_trace_monotone(sigma: &SymMatrix, frac: f64) -> Check {
    let s = cov_to_corr(sigma).unwrap();
    let lambda = frac * s.max_offdiag_abs();
    let sol = graphical_lasso(&s, lambda, &GlassoOptions::default()).unwrap();
    for w in sol.objective_trace.windows(2) {
        prop_assert!(
            w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0),
            "{} then {}",
            w[0],
            w[1]
        );
    }
    Ok(())
}

/// The components of the glasso graph refine those of the thresholded
/// correlation graph at the same level, and a penalty above every
/// off-diagonal entry leaves no edges.
pub fn glasso_components_refine_threshold(sigma: &SymMatrix, frac: f64) -> Check {
    let s = cov_to_corr(sigma).unwrap();
    let lambda = frac * s.max_offdiag_abs();
    let sol = graphical_lasso(&s, lambda, &GlassoOptions::default()).unwrap();
    let gl = pattern_of(&sol.theta, 1e-6).unwrap();
    let thr = grass_edge_set(&s, lambda).unwrap();
    prop_assert!(connected_components(&gl).refines(&connected_components(&thr)));
    let top = graphical_lasso(&s, s.max_offdiag_abs() * 1.0001, &GlassoOptions::default()).unwrap();
    prop_assert!(pattern_of(&top.theta, 1e-6).unwrap().is_empty());
    Ok(())
}

/// Coordinate-wise optimality of a lasso fit.
pub fn lasso_kkt(x: &DataMatrix, y: &[f64], lambda: f64) -> Check {
    let opts = LassoOptions {
        tol: 1e-10,
        max_sweeps: 100_000,
    };
    let sol = lasso_cd(x, y, lambda, &opts).unwrap();
    let n = x.n() as f64;
    let fitted: Vec<f64> = (0..x.n())
        .map(|i| (0..x.p()).map(|j| x.get(i, j) * sol.beta[j]).sum::<f64>())
        .collect();
    for j in 0..x.p() {
        let g: f64 = x
            .column(j)
            .iter()
            .zip(y)
            .zip(&fitted)
            .map(|((a, yi), fi)| a * (yi - fi))
            .sum::<f64>()
            / n;
        let slack = 1e-7 * (1.0 + lambda);
        if sol.beta[j] == 0.0 {
            prop_assert!(
                g.abs() <= lambda + slack,
                "zero coefficient {j} has gradient {g}"
            );
        } else {
            prop_assert!(
                (g - lambda * sol.beta[j].signum()).abs() <= slack,
                "coefficient {j} gradient {g}"
            );
        }
    }
    Ok(())
}

/// Identical configurations give byte-identical reports.
pub fn table1_deterministic(seed: u64) -> Check {
    let cfg = Table1Config {
        n: 30,
        p: 20,
        replicates: 2,
        seed,
        q_list: vec![0.1, 0.5],
        ..Table1Config::default()
    };
    let a = serde_json::to_string(&run_table1(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_table1(&cfg).unwrap()).unwrap();
    prop_assert_eq!(a, b);
    Ok(())
}
