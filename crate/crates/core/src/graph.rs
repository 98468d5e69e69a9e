//! Connected components and edge-set scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screening::{pair_count, EdgeSet};

/// Disjoint sets with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns true if `x` and `y` were in different sets.
    pub fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
        true
    }
}

/// Partition of nodes into connected components. Labels are canonical:
/// components are numbered in order of their smallest node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentLabeling {
    labels: Vec<usize>,
    count: usize,
}

impl ComponentLabeling {
    /// Canonicalises arbitrary labels.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        for &r in raw {
            let next = map.len();
            labels.push(*map.entry(r).or_insert(next));
        }
        ComponentLabeling {
            count: map.len(),
            labels,
        }
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Members of each component, each sorted, components in label order.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (node, &l) in self.labels.iter().enumerate() {
            out[l].push(node);
        }
        out
    }

    /// True if every component of `self` lies inside a component of `other`.
    pub fn refines(&self, other: &ComponentLabeling) -> bool {
        if self.p() != other.p() {
            return false;
        }
        let mut image = vec![usize::MAX; self.count];
        for (node, &l) in self.labels.iter().enumerate() {
            let o = other.labels[node];
            if image[l] == usize::MAX {
                image[l] = o;
            } else if image[l] != o {
                return false;
            }
        }
        true
    }
}

pub fn connected_components(edges: &EdgeSet) -> ComponentLabeling {
    let mut uf = UnionFind::new(edges.p());
    for (a, b) in edges.iter() {
        uf.union(a, b);
    }
    let roots: Vec<usize> = (0..edges.p()).map(|i| uf.find(i)).collect();
    ComponentLabeling::from_labels(&roots)
}

/// True iff both labelings describe the same family of node sets.
pub fn partitions_equal(a: &ComponentLabeling, b: &ComponentLabeling) -> Result<bool> {
    if a.p() != b.p() {
        return Err(Error::Domain(format!(
            "labelings cover {} and {} nodes",
            a.p(),
            b.p()
        )));
    }
    // canonical labels make the comparison label-free
    Ok(a.labels == ComponentLabeling::from_labels(&b.labels).labels)
}

/// Confusion counts over all unordered node pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }

    /// FP / (FP + TN); `None` when the truth is complete.
    pub fn fpr(&self) -> Option<f64> {
        let neg = self.fp + self.tn;
        (neg > 0).then(|| self.fp as f64 / neg as f64)
    }

    /// Selected non-edges as a fraction of all non-edges, `|E_hat ∩ E^c| / |E^c|`.
    /// Identical to [`fpr`](Self::fpr).
    pub fn selected_non_edge_fraction(&self) -> Option<f64> {
        self.fpr()
    }

    /// FN / (TP + FN); `None` when the truth is empty.
    pub fn fnr(&self) -> Option<f64> {
        let pos = self.tp + self.r#fn;
        (pos > 0).then(|| self.r#fn as f64 / pos as f64)
    }

    pub fn estimated(&self) -> usize {
        self.tp + self.fp
    }
}

pub fn confusion(est: &EdgeSet, truth: &EdgeSet) -> Result<ConfusionCounts> {
    if est.p() != truth.p() {
        return Err(Error::Domain(format!(
            "edge sets on {} and {} nodes",
            est.p(),
            truth.p()
        )));
    }
    let tp = est.intersection(truth).len();
    let fp = est.len() - tp;
    let r#fn = truth.len() - tp;
    let tn = pair_count(est.p()) - tp - fp - r#fn;
    Ok(ConfusionCounts { tp, fp, tn, r#fn })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singletons_and_paths() {
        let c = connected_components(&EdgeSet::empty(5));
        assert_eq!(c.count(), 5);
        assert_eq!(c.labels(), &[0, 1, 2, 3, 4]);
        let c = connected_components(&EdgeSet::from_pairs(3, [(0, 1), (1, 2)]).unwrap());
        assert_eq!(c.count(), 1);
    }

    #[test]
    fn labels_follow_smallest_member() {
        let c = connected_components(&EdgeSet::from_pairs(5, [(3, 4), (1, 4)]).unwrap());
        assert_eq!(c.labels(), &[0, 1, 2, 1, 1]);
        assert_eq!(c.components(), vec![vec![0], vec![1, 3, 4], vec![2]]);
    }

    #[test]
    fn confusion_examples() {
        let t = EdgeSet::from_pairs(4, [(0, 1), (2, 3)]).unwrap();
        let cc = confusion(&t, &t).unwrap();
        assert_eq!((cc.fpr(), cc.fnr()), (Some(0.0), Some(0.0)));

        let cc = confusion(&EdgeSet::complete(4), &EdgeSet::empty(4)).unwrap();
        assert_eq!(cc.fpr(), Some(1.0));
        assert_eq!(cc.fnr(), None);

        let est = EdgeSet::from_pairs(4, [(0, 1), (0, 2)]).unwrap();
        let cc = confusion(&est, &t).unwrap();
        assert_eq!(
            cc,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                tn: 3,
                r#fn: 1
            }
        );
        assert_eq!(cc.fpr(), Some(0.25));
        assert_eq!(cc.selected_non_edge_fraction(), Some(0.25));
        assert_eq!(cc.fnr(), Some(0.5));
        assert_eq!(cc.total(), 6);

        assert!(confusion(&est, &EdgeSet::empty(5)).is_err());
    }

    #[test]
    fn partition_comparison() {
        let a = ComponentLabeling::from_labels(&[0, 0, 1]);
        assert!(partitions_equal(&a, &a).unwrap());
        let swapped = ComponentLabeling {
            labels: vec![1, 1, 0],
            count: 2,
        };
        assert!(partitions_equal(&a, &swapped).unwrap());
        let b = ComponentLabeling::from_labels(&[0, 1, 1]);
        assert!(!partitions_equal(&a, &b).unwrap());
        assert!(partitions_equal(&a, &ComponentLabeling::from_labels(&[0, 0])).is_err());
    }

    #[test]
    fn refinement() {
        let fine = ComponentLabeling::from_labels(&[0, 1, 2, 2]);
        let coarse = ComponentLabeling::from_labels(&[0, 0, 1, 1]);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
    }
}
