//! Synthetic ground truth: random graphs, matching precision matrices, unit
//! diagonal covariances and Gaussian samples.
//!
//! Three graph families are supported. `A` includes each pair independently,
//! `B` is a union of equal-size cliques, `C` is a band. Given the graph, the
//! precision matrix is `M + (0.1 - lambda_min(M)) I` where `M` has unit
//! diagonal and an independent `Unif[-0.3, 0.7]` weight on every edge. The
//! covariance is its inverse rescaled to unit diagonal.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cov_to_corr, eigen_extremes, invert_spd};
use crate::sampling::{mvn_sample, SeededRng};
use crate::screening::EdgeSet;
use crate::{DataMatrix, SymMatrix};

pub const DEFAULT_EDGE_PROB: f64 = 0.01;
pub const DEFAULT_BLOCKS: usize = 10;
pub const DEFAULT_BANDWIDTH: usize = 2;

const WEIGHT_LO: f64 = -0.3;
const WEIGHT_HI: f64 = 0.7;
const MIN_EIGENVALUE: f64 = 0.1;

const LANE_EDGES: u64 = 0;
const LANE_WEIGHTS: u64 = 1;
const LANE_DATA: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::A, Family::B, Family::C];

    pub fn index(self) -> u64 {
        match self {
            Family::A => 0,
            Family::B => 1,
            Family::C => 2,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Family::A),
            "B" => Ok(Family::B),
            "C" => Ok(Family::C),
            other => Err(Error::Configuration(format!(
                "unknown simulation family '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub family: Family,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    /// Replicate stream; distinct streams give independent instances.
    pub stream: u64,
    pub edge_prob: f64,
    pub blocks: usize,
    pub bandwidth: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig::new(Family::B, 50, 100, 1)
    }
}

impl SimulationConfig {
    pub fn new(family: Family, p: usize, n: usize, seed: u64) -> Self {
        SimulationConfig {
            family,
            p,
            n,
            seed,
            stream: 0,
            edge_prob: DEFAULT_EDGE_PROB,
            blocks: DEFAULT_BLOCKS,
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.n < 2 {
            return Err(Error::Configuration(format!(
                "simulation needs p >= 2 and n >= 2, got p = {}, n = {}",
                self.p, self.n
            )));
        }
        match self.family {
            Family::A if !(0.0..=1.0).contains(&self.edge_prob) => {
                Err(Error::Configuration(format!(
                    "edge probability must lie in [0, 1], got {}",
                    self.edge_prob
                )))
            }
            Family::B if self.blocks == 0 || !self.p.is_multiple_of(self.blocks) => {
                Err(Error::Configuration(format!(
                    "p = {} is not divisible into {} equal blocks",
                    self.p, self.blocks
                )))
            }
            Family::C if self.bandwidth == 0 => {
                Err(Error::Configuration("bandwidth must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn rng(&self) -> SeededRng {
        SeededRng::new(self.seed, self.stream)
    }
}

/// Each pair `a < b` included independently with probability `prob`.
pub fn gen_edges_a(p: usize, prob: f64, rng: &mut SeededRng) -> Result<EdgeSet> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::Domain(format!(
            "edge probability must lie in [0, 1], got {prob}"
        )));
    }
    Ok(EdgeSet::from_predicate(p, |_, _| {
        rng.uniform(0.0, 1.0) < prob
    }))
}

/// Complete graphs on `blocks` contiguous node groups of equal size.
pub fn gen_edges_b(p: usize, blocks: usize) -> Result<EdgeSet> {
    if blocks == 0 || !p.is_multiple_of(blocks) {
        return Err(Error::Configuration(format!(
            "p = {p} is not divisible into {blocks} equal blocks"
        )));
    }
    let size = p / blocks;
    Ok(EdgeSet::from_predicate(p, |a, b| a / size == b / size))
}

/// Band graph: `(a, b)` is an edge iff `|a - b| <= bandwidth`.
pub fn gen_edges_c(p: usize, bandwidth: usize) -> Result<EdgeSet> {
    if bandwidth == 0 {
        return Err(Error::Configuration("bandwidth must be >= 1".into()));
    }
    Ok(EdgeSet::from_predicate(p, |a, b| b - a <= bandwidth))
}

/// Edge set prescribed by the configuration. Family A consumes the edge lane
/// of the configuration's stream; B and C are deterministic.
pub fn gen_edges(cfg: &SimulationConfig) -> Result<EdgeSet> {
    cfg.validate()?;
    match cfg.family {
        Family::A => gen_edges_a(cfg.p, cfg.edge_prob, &mut cfg.rng().lane(LANE_EDGES)),
        Family::B => gen_edges_b(cfg.p, cfg.blocks),
        Family::C => gen_edges_c(cfg.p, cfg.bandwidth),
    }
}

/// A synthetic model together with a sample drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthInstance {
    pub edges: EdgeSet,
    /// Precision before the covariance is rescaled; shares its zero pattern
    /// with the rescaled precision.
    pub precision: SymMatrix,
    /// Unit-diagonal population covariance.
    pub covariance: SymMatrix,
    pub data: DataMatrix,
}

impl GroundTruthInstance {
    pub fn p(&self) -> usize {
        self.edges.p()
    }

    /// Inverse of the unit-diagonal covariance, `D^{1/2} Theta D^{1/2}` with
    /// `D = diag(Theta^{-1})`.
    pub fn rescaled_precision(&self) -> Result<SymMatrix> {
        let raw_cov = invert_spd(&self.precision)?;
        let d: Vec<f64> = raw_cov.diag().iter().map(|v| v.sqrt()).collect();
        Ok(SymMatrix::from_fn(self.p(), |i, j| {
            self.precision.get(i, j) * d[i] * d[j]
        }))
    }
}

/// Precision matrix for a given edge set, using the weight lane of `rng`.
pub fn precision_for_edges(edges: &EdgeSet, rng: &mut SeededRng) -> Result<SymMatrix> {
    let p = edges.p();
    let mut a = SymMatrix::identity(p);
    for (i, j) in edges.iter() {
        a.set(i, j, rng.uniform(WEIGHT_LO, WEIGHT_HI));
    }
    let (lambda_min, _) = eigen_extremes(&a)?;
    Ok(a.shift_diagonal(MIN_EIGENVALUE - lambda_min))
}

/// Builds the instance around a known precision matrix.
pub fn instance_from_precision(
    edges: EdgeSet,
    precision: SymMatrix,
    n: usize,
    rng: &mut SeededRng,
) -> Result<GroundTruthInstance> {
    if edges.p() != precision.p() {
        return Err(Error::InvalidArgument(
            "edge set and precision differ in size".into(),
        ));
    }
    let covariance = cov_to_corr(&invert_spd(&precision)?)?;
    let data = mvn_sample(n, &covariance, rng)?;
    Ok(GroundTruthInstance {
        edges,
        precision,
        covariance,
        data,
    })
}

/// Builds an instance on the given edge set, drawing weights and data from
/// the configuration's stream.
pub fn build_instance_with_edges(
    cfg: &SimulationConfig,
    edges: EdgeSet,
) -> Result<GroundTruthInstance> {
    cfg.validate()?;
    if edges.p() != cfg.p {
        return Err(Error::Configuration(format!(
            "edge set has {} nodes but config has p = {}",
            edges.p(),
            cfg.p
        )));
    }
    let base = cfg.rng();
    let precision = precision_for_edges(&edges, &mut base.lane(LANE_WEIGHTS))?;
    instance_from_precision(edges, precision, cfg.n, &mut base.lane(LANE_DATA))
}

pub fn build_instance(cfg: &SimulationConfig) -> Result<GroundTruthInstance> {
    let edges = gen_edges(cfg)?;
    build_instance_with_edges(cfg, edges)
}

/// Population quantities behind the theoretical assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionDiagnostics {
    /// Smallest `|sigma_ab|` over true edges; absent with no edges.
    pub min_edge_abs_sigma: Option<f64>,
    pub lambda_max_sigma: f64,
    /// Largest `|sigma_ab|` over non-edges; absent when the graph is complete.
    pub max_nonedge_abs_sigma: Option<f64>,
}

pub fn assumption_diagnostics(truth: &GroundTruthInstance) -> Result<AssumptionDiagnostics> {
    let mut min_edge: Option<f64> = None;
    let mut max_nonedge: Option<f64> = None;
    for (a, b, v) in truth.covariance.offdiag() {
        let m = v.abs();
        if truth.edges.contains(a, b) {
            min_edge = Some(min_edge.map_or(m, |x| x.min(m)));
        } else {
            max_nonedge = Some(max_nonedge.map_or(m, |x| x.max(m)));
        }
    }
    let (_, lambda_max) = eigen_extremes(&truth.covariance)?;
    Ok(AssumptionDiagnostics {
        min_edge_abs_sigma: min_edge,
        lambda_max_sigma: lambda_max,
        max_nonedge_abs_sigma: max_nonedge,
    })
}

/// One off-diagonal pair for the precision-versus-covariance scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterRecord {
    pub a: usize,
    pub b: usize,
    /// Entry of the rescaled precision matrix.
    pub precision: f64,
    pub covariance: f64,
    /// Among the top fraction of `|covariance|`.
    pub flagged: bool,
    pub is_edge: bool,
}

/// One record per pair `a < b`. Exactly `ceil(top_fraction * pairs)` records
/// are flagged: largest `|sigma_ab|` first, ties in `(a, b)` order.
pub fn offdiag_scatter(
    truth: &GroundTruthInstance,
    top_fraction: f64,
) -> Result<Vec<ScatterRecord>> {
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "top fraction must lie in (0, 1), got {top_fraction}"
        )));
    }
    let prec = truth.rescaled_precision()?;
    let mut records: Vec<ScatterRecord> = truth
        .covariance
        .offdiag()
        .map(|(a, b, c)| ScatterRecord {
            a,
            b,
            precision: prec.get(a, b),
            covariance: c,
            flagged: false,
            is_edge: truth.edges.contains(a, b),
        })
        .collect();
    let k = (top_fraction * records.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&i, &j| {
        let (x, y) = (&records[i], &records[j]);
        y.covariance
            .abs()
            .partial_cmp(&x.covariance.abs())
            .unwrap_or(Ordering::Equal)
            .then((x.a, x.b).cmp(&(y.a, y.b)))
    });
    for &i in order.iter().take(k) {
        records[i].flagged = true;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screening::pair_count;

    #[test]
    fn family_a_extremes() {
        let mut rng = SeededRng::new(1, 0);
        assert!(gen_edges_a(20, 0.0, &mut rng).unwrap().is_empty());
        assert_eq!(
            gen_edges_a(20, 1.0, &mut rng).unwrap().len(),
            pair_count(20)
        );
        assert!(gen_edges_a(20, 1.5, &mut rng).is_err());
    }

    #[test]
    fn family_b_counts() {
        assert!(gen_edges_b(10, 10).unwrap().is_empty());
        assert_eq!(gen_edges_b(50, 10).unwrap().len(), 100);
        assert_eq!(gen_edges_b(100, 10).unwrap().len(), 450);
        assert!(matches!(gen_edges_b(55, 10), Err(Error::Configuration(_))));
        let e = gen_edges_b(50, 10).unwrap();
        assert!(e.contains(0, 4) && !e.contains(4, 5));
    }

    #[test]
    fn family_c_counts() {
        assert_eq!(gen_edges_c(3, 2).unwrap().len(), 3);
        assert_eq!(gen_edges_c(50, 2).unwrap().len(), 97);
        assert_eq!(gen_edges_c(17, 1).unwrap().len(), 16);
        assert!(gen_edges_c(5, 0).is_err());
    }

    #[test]
    fn instance_spectrum_and_pattern() {
        for family in Family::ALL {
            let cfg = SimulationConfig::new(family, 50, 20, 11);
            let inst = build_instance(&cfg).unwrap();
            let (lo, _) = eigen_extremes(&inst.precision).unwrap();
            assert!((lo - 0.1).abs() < 1e-6, "{family}: {lo}");
            for (a, b, v) in inst.precision.offdiag() {
                assert_eq!(v != 0.0, inst.edges.contains(a, b));
            }
            assert!(inst.covariance.has_unit_diagonal());
        }
    }

    #[test]
    fn family_b_covariance_is_block_diagonal() {
        let inst = build_instance(&SimulationConfig::new(Family::B, 50, 10, 3)).unwrap();
        for (a, b, v) in inst.covariance.offdiag() {
            if a / 5 != b / 5 {
                assert!(v.abs() < 1e-10);
            }
        }
        let d = assumption_diagnostics(&inst).unwrap();
        assert!(d.max_nonedge_abs_sigma.unwrap() < 1e-10);
    }

    #[test]
    fn diagnostics_on_identity() {
        let edges = EdgeSet::empty(4);
        let inst =
            instance_from_precision(edges, SymMatrix::identity(4), 5, &mut SeededRng::new(0, 0))
                .unwrap();
        let d = assumption_diagnostics(&inst).unwrap();
        assert_eq!(d.min_edge_abs_sigma, None);
        assert_eq!(d.max_nonedge_abs_sigma, Some(0.0));
        assert!((d.lambda_max_sigma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_two_node_closed_form() {
        // inverse of [[1, r], [r, 1]] rescaled to unit diagonal is [[1, -r], [-r, 1]]
        let r = 0.4;
        let prec = SymMatrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap();
        let edges = EdgeSet::from_pairs(2, [(0, 1)]).unwrap();
        let inst = instance_from_precision(edges, prec, 5, &mut SeededRng::new(0, 0)).unwrap();
        let d = assumption_diagnostics(&inst).unwrap();
        assert!((d.min_edge_abs_sigma.unwrap() - r).abs() < 1e-14);
        assert!((inst.covariance.get(0, 1) + r).abs() < 1e-14);
        assert_eq!(d.max_nonedge_abs_sigma, None);
        assert!((d.lambda_max_sigma - (1.0 + r)).abs() < 1e-12);
    }

    #[test]
    fn scatter_flags_ceiling_count() {
        let inst = build_instance(&SimulationConfig::new(Family::C, 50, 10, 5)).unwrap();
        let recs = offdiag_scatter(&inst, 0.005).unwrap();
        assert_eq!(recs.len(), 1225);
        assert_eq!(recs.iter().filter(|r| r.flagged).count(), 7);
        assert!(recs.iter().all(|r| r.a < r.b));
        assert!(offdiag_scatter(&inst, 0.0).is_err());
        assert!(offdiag_scatter(&inst, 1.0).is_err());
    }

    #[test]
    fn deterministic_instances() {
        let cfg = SimulationConfig::new(Family::A, 60, 30, 42).with_stream(7);
        assert_eq!(build_instance(&cfg).unwrap(), build_instance(&cfg).unwrap());
        let other = build_instance(&cfg.clone().with_stream(8)).unwrap();
        assert_ne!(build_instance(&cfg).unwrap().data, other.data);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("b".parse::<Family>().unwrap(), Family::B);
        assert!("D".parse::<Family>().is_err());
    }
}
