//! Runners for the simulation studies and the split-half stability protocol.
//!
//! Every replicate owns the random stream `(seed, family << 32 | replicate)`
//! and runs as an independent parallel task. Results are reduced in
//! replicate order, so reports do not depend on the thread count.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{confusion, ConfusionCounts};
use crate::penalized::{
    graphical_lasso_best_effort, neighborhood_fit, CombineRule, GlassoOptions, LassoOptions,
    DEFAULT_EPS_ZERO, GLASSO_SIZE_LIMIT,
};
use crate::sampling::{
    crossprod_over_n, mvn_sample, sample_correlation, standardize_columns, ScaleDenominator,
    SeededRng,
};
use crate::screening::{
    grass_edge_set, pair_count, ranked_edges, resolve_threshold, threshold_for_edge_count,
    threshold_path, EdgeSet, ThresholdRule,
};
use crate::simgen::{
    assumption_diagnostics, build_instance, build_instance_with_edges, gen_edges, offdiag_scatter,
    Family, GroundTruthInstance, ScatterRecord, SimulationConfig, DEFAULT_BANDWIDTH,
    DEFAULT_BLOCKS, DEFAULT_EDGE_PROB,
};
use crate::{DataMatrix, SymMatrix};

pub const DEFAULT_REPLICATES: usize = 50;

/// Parameters of the three graph families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyParams {
    pub edge_prob: f64,
    pub blocks: usize,
    pub bandwidth: usize,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            edge_prob: DEFAULT_EDGE_PROB,
            blocks: DEFAULT_BLOCKS,
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }
}

pub fn replicate_stream(family: Family, replicate: usize) -> u64 {
    (family.index() << 32) | replicate as u64
}

fn sim_config(
    family: Family,
    n: usize,
    p: usize,
    seed: u64,
    stream: u64,
    params: &FamilyParams,
) -> SimulationConfig {
    SimulationConfig {
        family,
        p,
        n,
        seed,
        stream,
        edge_prob: params.edge_prob,
        blocks: params.blocks,
        bandwidth: params.bandwidth,
    }
}

/// Builds replicate instances for one family. Family A draws a fresh edge
/// set per replicate unless `freeze_edges` is set, in which case replicate
/// 0's edge set is reused.
struct ReplicateSource {
    family: Family,
    n: usize,
    p: usize,
    seed: u64,
    params: FamilyParams,
    frozen: Option<EdgeSet>,
}

impl ReplicateSource {
    fn new(
        family: Family,
        n: usize,
        p: usize,
        seed: u64,
        params: FamilyParams,
        freeze_edges: bool,
    ) -> Result<Self> {
        let base = sim_config(family, n, p, seed, replicate_stream(family, 0), &params);
        base.validate()?;
        let frozen = if freeze_edges && family == Family::A {
            Some(gen_edges(&base)?)
        } else {
            None
        };
        Ok(ReplicateSource {
            family,
            n,
            p,
            seed,
            params,
            frozen,
        })
    }

    fn instance(&self, replicate: usize) -> Result<GroundTruthInstance> {
        let cfg = sim_config(
            self.family,
            self.n,
            self.p,
            self.seed,
            replicate_stream(self.family, replicate),
            &self.params,
        );
        match &self.frozen {
            Some(edges) => build_instance_with_edges(&cfg, edges.clone()),
            None => build_instance(&cfg),
        }
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

// ---------------------------------------------------------------------------
// Error rates at controlled false positive levels

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table1Config {
    pub families: Vec<Family>,
    pub n: usize,
    pub p: usize,
    pub q_list: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Reuse one family A edge set for all replicates.
    pub freeze_family_a_edges: bool,
    pub params: FamilyParams,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            families: Family::ALL.to_vec(),
            n: 100,
            p: 50,
            q_list: vec![0.01, 0.1, 0.2, 0.5],
            replicates: DEFAULT_REPLICATES,
            seed: 1,
            freeze_family_a_edges: false,
            params: FamilyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub q: f64,
    pub gamma: f64,
    /// Mean number of selected unordered pairs.
    pub mean_edge_count: f64,
    /// Same count over ordered pairs, i.e. off-diagonal nonzeros of the
    /// estimated adjacency matrix.
    pub mean_edge_count_ordered: f64,
    pub mean_fpr: f64,
    /// Mean over replicates with at least one true edge; absent if none.
    pub mean_fnr: Option<f64>,
    pub fnr_replicates: usize,
    pub replicates: usize,
}

pub fn run_table1(cfg: &Table1Config) -> Result<Vec<Table1Row>> {
    if cfg.replicates == 0 {
        return Err(Error::Configuration("replicates must be >= 1".into()));
    }
    if let Some(q) = cfg.q_list.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
        return Err(Error::Configuration(format!(
            "q must lie in (0, 1), got {q}"
        )));
    }
    let gammas: Vec<f64> = cfg
        .q_list
        .iter()
        .map(|&q| resolve_threshold(&ThresholdRule::FprControl { q }, cfg.n, cfg.p))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &family in &cfg.families {
        let source = ReplicateSource::new(
            family,
            cfg.n,
            cfg.p,
            cfg.seed,
            cfg.params,
            cfg.freeze_family_a_edges,
        )?;
        let per_rep: Vec<Vec<ConfusionCounts>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let inst = source.instance(r)?;
                let s = sample_correlation(&inst.data)?;
                gammas
                    .iter()
                    .map(|&g| confusion(&grass_edge_set(&s, g)?, &inst.edges))
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (k, (&q, &gamma)) in cfg.q_list.iter().zip(&gammas).enumerate() {
            let cells: Vec<ConfusionCounts> = per_rep.iter().map(|r| r[k]).collect();
            let edges = mean(cells.iter().map(|c| c.estimated() as f64)).unwrap_or(0.0);
            let fnrs: Vec<f64> = cells.iter().filter_map(|c| c.fnr()).collect();
            rows.push(Table1Row {
                family,
                n: cfg.n,
                p: cfg.p,
                q,
                gamma,
                mean_edge_count: edges,
                mean_edge_count_ordered: 2.0 * edges,
                mean_fpr: mean(cells.iter().filter_map(|c| c.fpr())).unwrap_or(0.0),
                mean_fnr: mean(fnrs.iter().copied()),
                fnr_replicates: fnrs.len(),
                replicates: cfg.replicates,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// ROC curves

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Grass,
    Glasso,
    Nbsel,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Grass => "grass",
            Estimator::Glasso => "glasso",
            Estimator::Nbsel => "nbsel",
        })
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grass" => Ok(Estimator::Grass),
            "glasso" => Ok(Estimator::Glasso),
            "nbsel" => Ok(Estimator::Nbsel),
            other => Err(Error::Configuration(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Settings shared by the penalized estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenalizedSettings {
    /// Ignored by the ROC runner, which traces both rules.
    pub nbsel_rule: CombineRule,
    pub glasso_tol: f64,
    pub glasso_max_iter: usize,
    pub lasso_tol: f64,
    pub eps_zero: f64,
    pub allow_large: bool,
}

impl Default for PenalizedSettings {
    fn default() -> Self {
        PenalizedSettings {
            nbsel_rule: CombineRule::Or,
            glasso_tol: 1e-6,
            glasso_max_iter: 500,
            lasso_tol: 1e-7,
            eps_zero: DEFAULT_EPS_ZERO,
            allow_large: false,
        }
    }
}

impl PenalizedSettings {
    fn glasso_options(&self) -> GlassoOptions {
        GlassoOptions {
            tol: self.glasso_tol,
            max_iter: self.glasso_max_iter,
            allow_large: self.allow_large,
            ..GlassoOptions::default()
        }
    }

    fn lasso_options(&self) -> LassoOptions {
        LassoOptions {
            tol: self.lasso_tol,
            ..LassoOptions::default()
        }
    }

    fn check_size(&self, p: usize) -> Result<()> {
        if p > GLASSO_SIZE_LIMIT && !self.allow_large {
            return Err(Error::SizeGuard {
                p,
                limit: GLASSO_SIZE_LIMIT,
            });
        }
        Ok(())
    }

    /// Glasso edge set; the flag is false when the solver ran out of sweeps.
    fn glasso_edges(&self, s: &SymMatrix, lambda: f64) -> Result<(EdgeSet, bool)> {
        let sol = graphical_lasso_best_effort(s, lambda, &self.glasso_options())?;
        Ok((sol.pattern(self.eps_zero)?, sol.converged))
    }

    fn nbsel_edges(&self, s: &SymMatrix, lambda: f64) -> Result<(EdgeSet, bool)> {
        let fit = neighborhood_fit(s, lambda, self.nbsel_rule, &self.lasso_options())?;
        Ok((fit.edges, fit.failures.is_empty()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RocConfig {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Number of penalty values for the penalized estimators.
    pub grid_size: usize,
    /// Smallest penalty as a fraction of the largest off-diagonal `|S|`.
    pub lambda_min_ratio: f64,
    pub penalized: PenalizedSettings,
    pub params: FamilyParams,
}

impl Default for RocConfig {
    fn default() -> Self {
        RocConfig {
            family: Family::B,
            n: 50,
            p: 200,
            seed: 1,
            estimators: vec![Estimator::Grass, Estimator::Glasso, Estimator::Nbsel],
            grid_size: 25,
            lambda_min_ratio: 0.05,
            penalized: PenalizedSettings::default(),
            params: FamilyParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Threshold or penalty that produced the point.
    pub tuning: f64,
    pub fp: usize,
    pub tp: usize,
    /// False when the solver did not reach its tolerance at this point.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub estimator: Estimator,
    /// Combination rule, for neighborhood selection only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<CombineRule>,
    /// Sorted by false positives, then true positives.
    pub points: Vec<RocPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub true_edges: usize,
    pub non_edges: usize,
    pub curves: Vec<RocCurve>,
}

/// GRASS operating points for every threshold on the path of `s`, plus
/// `gamma = 0`. The first point, at the largest magnitude, selects nothing.
pub fn grass_roc(s: &SymMatrix, truth: &EdgeSet) -> Result<Vec<RocPoint>> {
    let ranked = ranked_edges(s, 0.0)?;
    let path = threshold_path(s)?;
    let mut points = Vec::with_capacity(path.len() + 1);
    let (mut ptr, mut tp, mut fp) = (0usize, 0usize, 0usize);
    let mut advance = |gamma: f64, points: &mut Vec<RocPoint>| {
        while ptr < ranked.len() && ranked[ptr].2 > gamma {
            if truth.contains(ranked[ptr].0, ranked[ptr].1) {
                tp += 1;
            } else {
                fp += 1;
            }
            ptr += 1;
        }
        points.push(RocPoint {
            tuning: gamma,
            fp,
            tp,
            converged: true,
        });
    };
    for &g in &path {
        advance(g, &mut points);
    }
    advance(0.0, &mut points);
    Ok(points)
}

/// `size` penalties spaced geometrically from `max` down to `max * ratio`.
pub fn penalty_grid(max: f64, ratio: f64, size: usize) -> Result<Vec<f64>> {
    if !(ratio > 0.0 && ratio < 1.0) || size < 2 || !(max > 0.0) {
        return Err(Error::Configuration(format!(
            "penalty grid needs max > 0, ratio in (0, 1) and at least two points; got {max}, {ratio}, {size}"
        )));
    }
    Ok((0..size)
        .map(|k| max * ratio.powf(k as f64 / (size - 1) as f64))
        .collect())
}

fn sort_points(points: &mut [RocPoint]) {
    points.sort_by(|a, b| {
        (a.fp, a.tp)
            .cmp(&(b.fp, b.tp))
            .then(b.tuning.partial_cmp(&a.tuning).unwrap_or(Ordering::Equal))
    });
}

pub fn run_roc(cfg: &RocConfig) -> Result<RocReport> {
    if cfg.estimators.contains(&Estimator::Glasso) {
        cfg.penalized.check_size(cfg.p)?;
    }
    let source = ReplicateSource::new(cfg.family, cfg.n, cfg.p, cfg.seed, cfg.params, false)?;
    let inst = source.instance(0)?;
    let s = sample_correlation(&inst.data)?;
    let truth = &inst.edges;
    let needs_grid = cfg.estimators.iter().any(|e| *e != Estimator::Grass);
    let grid = if needs_grid {
        penalty_grid(s.max_offdiag_abs(), cfg.lambda_min_ratio, cfg.grid_size)?
    } else {
        Vec::new()
    };

    let penalized_curve = |est: Estimator, rule: CombineRule| -> Result<Vec<RocPoint>> {
        let settings = PenalizedSettings {
            nbsel_rule: rule,
            ..cfg.penalized
        };
        grid.par_iter()
            .map(|&lambda| {
                let (edges, converged) = if est == Estimator::Glasso {
                    settings.glasso_edges(&s, lambda)?
                } else {
                    settings.nbsel_edges(&s, lambda)?
                };
                let c = confusion(&edges, truth)?;
                Ok(RocPoint {
                    tuning: lambda,
                    fp: c.fp,
                    tp: c.tp,
                    converged,
                })
            })
            .collect()
    };

    let mut curves = Vec::new();
    for &est in &cfg.estimators {
        let runs: Vec<(Option<CombineRule>, Vec<RocPoint>)> = match est {
            Estimator::Grass => vec![(None, grass_roc(&s, truth)?)],
            Estimator::Glasso => vec![(None, penalized_curve(est, cfg.penalized.nbsel_rule)?)],
            Estimator::Nbsel => [CombineRule::Or, CombineRule::And]
                .into_iter()
                .map(|rule| Ok((Some(rule), penalized_curve(est, rule)?)))
                .collect::<Result<_>>()?,
        };
        for (rule, mut points) in runs {
            sort_points(&mut points);
            curves.push(RocCurve {
                estimator: est,
                rule,
                points,
            });
        }
    }
    Ok(RocReport {
        family: cfg.family,
        n: cfg.n,
        p: cfg.p,
        seed: cfg.seed,
        true_edges: truth.len(),
        non_edges: pair_count(cfg.p) - truth.len(),
        curves,
    })
}

// ---------------------------------------------------------------------------
// Precision versus covariance scatter

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig1Config {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub top_fraction: f64,
    pub params: FamilyParams,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config {
            family: Family::A,
            n: 100,
            p: 50,
            seed: 1,
            top_fraction: 0.005,
            params: FamilyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Report {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub top_fraction: f64,
    pub records: Vec<ScatterRecord>,
}

pub fn run_fig1(cfg: &Fig1Config) -> Result<Fig1Report> {
    let source = ReplicateSource::new(cfg.family, cfg.n, cfg.p, cfg.seed, cfg.params, false)?;
    let inst = source.instance(0)?;
    Ok(Fig1Report {
        family: cfg.family,
        n: cfg.n,
        p: cfg.p,
        seed: cfg.seed,
        top_fraction: cfg.top_fraction,
        records: offdiag_scatter(&inst, cfg.top_fraction)?,
    })
}

// ---------------------------------------------------------------------------
// Averaged adjacency heatmaps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapConfig {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub replicates: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Threshold for GRASS; the resolved value is also the penalty for the
    /// penalized estimators.
    pub rule: ThresholdRule,
    pub penalized: PenalizedSettings,
    pub params: FamilyParams,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        HeatmapConfig {
            family: Family::B,
            n: 50,
            p: 100,
            replicates: 10,
            seed: 1,
            estimators: vec![Estimator::Grass, Estimator::Glasso],
            rule: ThresholdRule::FprControl { q: 0.05 },
            penalized: PenalizedSettings::default(),
            params: FamilyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub estimator: Estimator,
    /// Fraction of replicates selecting each pair; symmetric, zero diagonal.
    pub average: Vec<Vec<f64>>,
    /// Replicates in which the solver did not reach its tolerance.
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapReport {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub replicates: usize,
    pub tuning: f64,
    pub truth: Vec<Vec<u8>>,
    pub maps: Vec<Heatmap>,
}

pub fn run_heatmaps(cfg: &HeatmapConfig) -> Result<HeatmapReport> {
    if cfg.family == Family::A {
        return Err(Error::Configuration(
            "heatmaps need a fixed true edge set; use family B or C".into(),
        ));
    }
    if cfg.replicates == 0 {
        return Err(Error::Configuration("replicates must be >= 1".into()));
    }
    if cfg.estimators.contains(&Estimator::Glasso) {
        cfg.penalized.check_size(cfg.p)?;
    }
    let tuning: f64 = resolve_threshold(&cfg.rule, cfg.n, cfg.p)?;
    let source = ReplicateSource::new(cfg.family, cfg.n, cfg.p, cfg.seed, cfg.params, false)?;
    let p = cfg.p;

    let per_rep: Vec<(EdgeSet, Vec<(EdgeSet, bool)>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let inst = source.instance(r)?;
            let s = sample_correlation(&inst.data)?;
            let fits = cfg
                .estimators
                .iter()
                .map(|est| match est {
                    Estimator::Grass => Ok((grass_edge_set(&s, tuning)?, true)),
                    Estimator::Glasso => cfg.penalized.glasso_edges(&s, tuning),
                    Estimator::Nbsel => cfg.penalized.nbsel_edges(&s, tuning),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((inst.edges, fits))
        })
        .collect::<Result<_>>()?;

    let to_rows = |edges: &EdgeSet| -> Vec<Vec<u8>> {
        let mut m = vec![vec![0u8; p]; p];
        for (a, b) in edges.iter() {
            m[a][b] = 1;
            m[b][a] = 1;
        }
        m
    };
    let truth = to_rows(&per_rep[0].0);
    let maps = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(k, &estimator)| {
            let mut counts = vec![vec![0usize; p]; p];
            let mut nonconverged = 0;
            for (_, fits) in &per_rep {
                let (edges, converged) = &fits[k];
                nonconverged += usize::from(!converged);
                for (a, b) in edges.iter() {
                    counts[a][b] += 1;
                    counts[b][a] += 1;
                }
            }
            let reps = cfg.replicates as f64;
            let average = counts
                .iter()
                .map(|row| row.iter().map(|&c| c as f64 / reps).collect())
                .collect();
            Heatmap {
                estimator,
                average,
                nonconverged,
            }
        })
        .collect();
    Ok(HeatmapReport {
        family: cfg.family,
        n: cfg.n,
        p,
        replicates: cfg.replicates,
        tuning,
        truth,
        maps,
    })
}

// ---------------------------------------------------------------------------
// Split-half stability

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityConfig {
    /// Target edge-set sizes, one report each.
    pub sizes: Vec<usize>,
    pub splits: usize,
    pub seed: u64,
    /// Standardize each half again after splitting.
    pub restandardize_after_split: bool,
    /// Analyze only the rows carrying this class label.
    pub class: Option<String>,
    /// Bisection steps used to match the glasso edge count.
    pub bisection_steps: usize,
    pub penalized: PenalizedSettings,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            sizes: vec![10, 20, 40],
            splits: 20,
            seed: 1,
            restandardize_after_split: false,
            class: None,
            bisection_steps: 50,
            penalized: PenalizedSettings::default(),
        }
    }
}

/// The four agreement counts of one split, restricted to pairs on which the
/// two Set 2 estimates disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StabilityCounts {
    /// `|GL1 ∩ GRASS2 ∩ GL2^c|`
    pub gl_gold_grass: usize,
    /// `|GL1 ∩ GL2 ∩ GRASS2^c|`
    pub gl_gold_gl: usize,
    /// `|GRASS1 ∩ GRASS2 ∩ GL2^c|`
    pub grass_gold_grass: usize,
    /// `|GRASS1 ∩ GL2 ∩ GRASS2^c|`
    pub grass_gold_gl: usize,
}

pub fn stability_counts(
    gl1: &EdgeSet,
    grass1: &EdgeSet,
    gl2: &EdgeSet,
    grass2: &EdgeSet,
) -> Result<StabilityCounts> {
    let p = gl1.p();
    if [grass1, gl2, grass2].iter().any(|e| e.p() != p) {
        return Err(Error::Domain(
            "edge sets cover different node counts".into(),
        ));
    }
    let only_grass2 = grass2.difference(gl2);
    let only_gl2 = gl2.difference(grass2);
    Ok(StabilityCounts {
        gl_gold_grass: gl1.intersection(&only_grass2).len(),
        gl_gold_gl: gl1.intersection(&only_gl2).len(),
        grass_gold_grass: grass1.intersection(&only_grass2).len(),
        grass_gold_gl: grass1.intersection(&only_gl2).len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; zero for one value.
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> MeanSe {
        let k = values.len();
        if k == 0 {
            return MeanSe {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let m = values.iter().sum::<f64>() / k as f64;
        if k == 1 {
            return MeanSe { mean: m, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k - 1) as f64;
        MeanSe {
            mean: m,
            se: (var / k as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub split: usize,
    /// Achieved sizes of GL1, GRASS1, GL2, GRASS2.
    pub sizes: [usize; 4],
    pub counts: StabilityCounts,
    pub glasso_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub target_size: usize,
    pub splits: usize,
    /// Mean achieved size over the four estimates of each split.
    pub edge_count: MeanSe,
    pub gl_gold_grass: MeanSe,
    pub gl_gold_gl: MeanSe,
    pub grass_gold_grass: MeanSe,
    pub grass_gold_gl: MeanSe,
    pub per_split: Vec<SplitOutcome>,
}

/// Standardizes the columns separately within each class.
fn standardize_by_class(x: &DataMatrix, labels: &[String]) -> Result<DataMatrix> {
    let mut classes: Vec<&String> = labels.iter().collect();
    classes.sort();
    classes.dedup();
    let (n, p) = (x.n(), x.p());
    let mut values = vec![0.0; n * p];
    for class in classes {
        let rows: Vec<usize> = (0..n).filter(|&i| &labels[i] == class).collect();
        if rows.len() < 2 {
            return Err(Error::Domain(format!(
                "class '{class}' has fewer than two observations"
            )));
        }
        let z = standardize_columns(&x.select_rows(&rows)?, ScaleDenominator::N)?;
        for j in 0..p {
            for (k, &i) in rows.iter().enumerate() {
                values[j * n + i] = z.get(k, j);
            }
        }
    }
    DataMatrix::from_col_major(n, p, values)
}

/// Glasso edge set whose size is as close as bisection on the penalty can
/// bring it to `m`.
fn glasso_for_edge_count(
    s: &SymMatrix,
    m: usize,
    settings: &PenalizedSettings,
    steps: usize,
) -> Result<(EdgeSet, bool)> {
    let (mut lo, mut hi) = (0.0, s.max_offdiag_abs());
    let (edges, converged) = settings.glasso_edges(s, hi)?;
    let mut best = (edges.len().abs_diff(m), edges, converged);
    for _ in 0..steps {
        if best.0 == 0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (edges, converged) = settings.glasso_edges(s, mid)?;
        let c = edges.len();
        if c > m {
            lo = mid;
        } else {
            hi = mid;
        }
        if c.abs_diff(m) < best.0 {
            best = (c.abs_diff(m), edges, converged);
        }
    }
    Ok((best.1, best.2))
}

pub fn run_stability(
    x: &DataMatrix,
    labels: Option<&[String]>,
    cfg: &StabilityConfig,
) -> Result<Vec<StabilityReport>> {
    if cfg.splits == 0 {
        return Err(Error::Configuration("splits must be >= 1".into()));
    }
    cfg.penalized.check_size(x.p())?;
    let standardized = match labels {
        Some(l) => {
            if l.len() != x.n() {
                return Err(Error::InvalidArgument(format!(
                    "{} class labels for {} observations",
                    l.len(),
                    x.n()
                )));
            }
            standardize_by_class(x, l)?
        }
        None => standardize_columns(x, ScaleDenominator::N)?,
    };
    let data = match (&cfg.class, labels) {
        (Some(class), Some(l)) => {
            let rows: Vec<usize> = (0..x.n()).filter(|&i| &l[i] == class).collect();
            if rows.len() < 2 {
                return Err(Error::Domain(format!(
                    "class '{class}' has fewer than two observations"
                )));
            }
            standardized.select_rows(&rows)?
        }
        (Some(_), None) => {
            return Err(Error::Configuration(
                "a class was requested without class labels".into(),
            ))
        }
        _ => standardized,
    };
    let n = data.n();
    if n < 4 {
        return Err(Error::Domain(format!(
            "need at least 4 observations, got {n}"
        )));
    }
    let pairs = pair_count(data.p());
    if let Some(&m) = cfg.sizes.iter().find(|&&m| m > pairs) {
        return Err(Error::Domain(format!(
            "requested {m} edges but only {pairs} pairs exist"
        )));
    }

    let half = n / 2;
    let per_split: Vec<Vec<SplitOutcome>> = (0..cfg.splits)
        .into_par_iter()
        .map(|split| {
            let mut rng = SeededRng::new(cfg.seed, split as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let mut set1 = perm[..half].to_vec();
            let mut set2 = perm[half..2 * half].to_vec();
            set1.sort_unstable();
            set2.sort_unstable();
            let cov = |rows: &[usize]| -> Result<SymMatrix> {
                let sub = data.select_rows(rows)?;
                if cfg.restandardize_after_split {
                    sample_correlation(&sub)
                } else {
                    Ok(crossprod_over_n(&sub))
                }
            };
            let (s1, s2) = (cov(&set1)?, cov(&set2)?);
            cfg.sizes
                .iter()
                .map(|&m| {
                    let (gl1, c1) =
                        glasso_for_edge_count(&s1, m, &cfg.penalized, cfg.bisection_steps)?;
                    let (gl2, c2) =
                        glasso_for_edge_count(&s2, m, &cfg.penalized, cfg.bisection_steps)?;
                    let gr1 = grass_edge_set(&s1, threshold_for_edge_count(&s1, m)?.gamma)?;
                    let gr2 = grass_edge_set(&s2, threshold_for_edge_count(&s2, m)?.gamma)?;
                    Ok(SplitOutcome {
                        split,
                        sizes: [gl1.len(), gr1.len(), gl2.len(), gr2.len()],
                        counts: stability_counts(&gl1, &gr1, &gl2, &gr2)?,
                        glasso_converged: c1 && c2,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(cfg
        .sizes
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let outs: Vec<SplitOutcome> = per_split.iter().map(|s| s[k]).collect();
            let stat = |f: &dyn Fn(&SplitOutcome) -> f64| {
                MeanSe::of(&outs.iter().map(f).collect::<Vec<_>>())
            };
            StabilityReport {
                target_size: m,
                splits: cfg.splits,
                edge_count: stat(&|o| o.sizes.iter().sum::<usize>() as f64 / 4.0),
                gl_gold_grass: stat(&|o| o.counts.gl_gold_grass as f64),
                gl_gold_gl: stat(&|o| o.counts.gl_gold_gl as f64),
                grass_gold_grass: stat(&|o| o.counts.grass_gold_grass as f64),
                grass_gold_gl: stat(&|o| o.counts.grass_gold_gl as f64),
                per_split: outs,
            }
        })
        .collect())
}

/// Keeps the `k` columns with the largest sample variance, in their original
/// order. Ties go to the lower column index.
pub fn select_top_variance(x: &DataMatrix, k: usize) -> Result<DataMatrix> {
    if k < 2 || k > x.p() {
        return Err(Error::Domain(format!(
            "k must lie in [2, {}], got {k}",
            x.p()
        )));
    }
    let var: Vec<f64> = x
        .columns()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / c.len() as f64
        })
        .collect();
    let mut order: Vec<usize> = (0..x.p()).collect();
    order.sort_by(|&i, &j| {
        var[j]
            .partial_cmp(&var[i])
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    x.select_columns(&keep)
}

// ---------------------------------------------------------------------------
// Sure screening and the cross-product variance

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SureScreeningConfig {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub kappa: f64,
    /// `C1 = c1_scale * min_edge |sigma| * n^kappa` for each instance.
    pub c1_scale: f64,
    pub replicates: usize,
    pub seed: u64,
    pub params: FamilyParams,
}

impl Default for SureScreeningConfig {
    fn default() -> Self {
        SureScreeningConfig {
            family: Family::B,
            n: 400,
            p: 50,
            kappa: 0.25,
            c1_scale: 1.0,
            replicates: 200,
            seed: 1,
            params: FamilyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SureScreeningReport {
    pub replicates: usize,
    /// Replicates whose estimate contains every true edge.
    pub successes: usize,
    pub fraction: f64,
    pub mean_gamma: f64,
    pub mean_min_edge_abs_sigma: f64,
    /// Mean number of true edges missed.
    pub mean_missed: f64,
}

pub fn run_sure_screening(cfg: &SureScreeningConfig) -> Result<SureScreeningReport> {
    if cfg.replicates == 0 {
        return Err(Error::Configuration("replicates must be >= 1".into()));
    }
    let source = ReplicateSource::new(cfg.family, cfg.n, cfg.p, cfg.seed, cfg.params, false)?;
    let per_rep: Vec<(bool, f64, f64, usize)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let inst = source.instance(r)?;
            let diag = assumption_diagnostics(&inst)?;
            let Some(min_edge) = diag.min_edge_abs_sigma else {
                return Ok((true, f64::NAN, f64::NAN, 0));
            };
            let c1 = cfg.c1_scale * min_edge * (cfg.n as f64).powf(cfg.kappa);
            let gamma: f64 = resolve_threshold(
                &ThresholdRule::SureScreening {
                    c1,
                    kappa: cfg.kappa,
                },
                cfg.n,
                cfg.p,
            )?;
            let est = grass_edge_set(&sample_correlation(&inst.data)?, gamma)?;
            let missed = inst.edges.difference(&est).len();
            Ok((missed == 0, gamma, min_edge, missed))
        })
        .collect::<Result<_>>()?;
    let successes = per_rep.iter().filter(|r| r.0).count();
    Ok(SureScreeningReport {
        replicates: cfg.replicates,
        successes,
        fraction: successes as f64 / cfg.replicates as f64,
        mean_gamma: mean(per_rep.iter().map(|r| r.1).filter(|v| v.is_finite())).unwrap_or(f64::NAN),
        mean_min_edge_abs_sigma: mean(per_rep.iter().map(|r| r.2).filter(|v| v.is_finite()))
            .unwrap_or(f64::NAN),
        mean_missed: mean(per_rep.iter().map(|r| r.3 as f64)).unwrap_or(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub sigma: f64,
    pub n: usize,
    pub replicates: usize,
    /// Monte Carlo variance of `X_a^T X_b / n`.
    pub empirical: f64,
    /// `(1 + sigma^2) / n`.
    pub theoretical: f64,
    pub relative_error: f64,
}

/// Monte Carlo variance of the cross product of two unit-variance normal
/// columns with correlation `sigma`.
pub fn cross_product_variance(
    sigma: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<VarianceCheck> {
    if !(sigma.abs() < 1.0) || n < 2 || replicates < 2 {
        return Err(Error::Domain(format!(
            "need |sigma| < 1, n >= 2 and at least two replicates; got {sigma}, {n}, {replicates}"
        )));
    }
    let cov = SymMatrix::from_rows(&[vec![1.0, sigma], vec![sigma, 1.0]])?;
    let stats: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let x = mvn_sample(n, &cov, &mut SeededRng::new(seed, r as u64))?;
            Ok(crossprod_over_n(&x).get(0, 1))
        })
        .collect::<Result<_>>()?;
    let m = stats.iter().sum::<f64>() / replicates as f64;
    let empirical = stats.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (replicates - 1) as f64;
    let theoretical = (1.0 + sigma * sigma) / n as f64;
    Ok(VarianceCheck {
        sigma,
        n,
        replicates,
        empirical,
        theoretical,
        relative_error: (empirical - theoretical).abs() / theoretical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_vanish_when_set_two_agrees() {
        let a = EdgeSet::from_pairs(5, [(0, 1), (2, 3)]).unwrap();
        let b = EdgeSet::from_pairs(5, [(0, 1), (1, 4)]).unwrap();
        let same = EdgeSet::from_pairs(5, [(0, 2), (1, 4)]).unwrap();
        assert_eq!(
            stability_counts(&a, &b, &same, &same).unwrap(),
            StabilityCounts::default()
        );
    }

    #[test]
    fn counts_small_example() {
        let gl1 = EdgeSet::from_pairs(4, [(0, 1), (0, 2)]).unwrap();
        let gr1 = EdgeSet::from_pairs(4, [(0, 1), (2, 3)]).unwrap();
        let gl2 = EdgeSet::from_pairs(4, [(0, 2), (1, 3)]).unwrap();
        let gr2 = EdgeSet::from_pairs(4, [(0, 1), (1, 3)]).unwrap();
        let c = stability_counts(&gl1, &gr1, &gl2, &gr2).unwrap();
        assert_eq!(
            c,
            StabilityCounts {
                gl_gold_grass: 1,
                gl_gold_gl: 1,
                grass_gold_grass: 1,
                grass_gold_gl: 0
            }
        );
    }

    #[test]
    fn mean_se() {
        let m = MeanSe::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.se - 1.0).abs() < 1e-15);
        assert_eq!(MeanSe::of(&[4.0]).se, 0.0);
    }

    #[test]
    fn top_variance_example() {
        let x = DataMatrix::from_columns(&[
            vec![1.0, -1.0, 1.0, -1.0],
            vec![3f64.sqrt(), -(3f64.sqrt()), 3f64.sqrt(), -(3f64.sqrt())],
            vec![2f64.sqrt(), -(2f64.sqrt()), 2f64.sqrt(), -(2f64.sqrt())],
        ])
        .unwrap();
        let top = select_top_variance(&x, 2).unwrap();
        assert_eq!(top.column(0), x.column(1));
        assert_eq!(top.column(1), x.column(2));
        assert_eq!(select_top_variance(&x, 3).unwrap(), x);
        assert!(select_top_variance(&x, 0).is_err());
        assert!(select_top_variance(&x, 4).is_err());
    }

    #[test]
    fn penalty_grid_endpoints() {
        let g = penalty_grid(0.8, 0.1, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.8);
        assert!((g[4] - 0.08).abs() < 1e-15);
        assert!(penalty_grid(0.8, 1.0, 5).is_err());
    }

    #[test]
    fn heatmaps_refuse_family_a() {
        let cfg = HeatmapConfig {
            family: Family::A,
            ..Default::default()
        };
        assert!(matches!(run_heatmaps(&cfg), Err(Error::Configuration(_))));
    }
}
