//! Command-line flags. Each flag mirrors a key of the JSON config file and,
//! when given, overrides it.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use grass::experiments::{
    Estimator, FamilyParams, Fig1Config, HeatmapConfig, PenalizedSettings, RocConfig,
    StabilityConfig, Table1Config,
};
use grass::{CombineRule, Family, SimulationConfig, ThresholdRule};

use crate::{CliError, CliResult};

pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
}

fn set<T>(slot: &mut T, value: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = value {
        *slot = v.clone();
    }
}

#[derive(Debug, Clone, Args)]
pub struct FamilyFlags {
    /// Edge probability for family A.
    #[arg(long)]
    pub edge_prob: Option<f64>,
    /// Number of blocks for family B.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Bandwidth for family C.
    #[arg(long)]
    pub bandwidth: Option<usize>,
}

impl FamilyFlags {
    fn apply(&self, params: &mut FamilyParams) {
        set(&mut params.edge_prob, &self.edge_prob);
        set(&mut params.blocks, &self.blocks);
        set(&mut params.bandwidth, &self.bandwidth);
    }
}

/// Threshold rule flags; at most one form may be given.
#[derive(Debug, Clone, Args)]
pub struct RuleFlags {
    /// Fixed threshold.
    #[arg(long, conflicts_with_all = ["q", "c1", "kappa"])]
    pub gamma: Option<f64>,
    /// Target false positive rate.
    #[arg(long, conflicts_with_all = ["c1", "kappa"])]
    pub q: Option<f64>,
    /// Constant of the sure-screening rate (with --kappa).
    #[arg(long, requires = "kappa")]
    pub c1: Option<f64>,
    /// Exponent of the sure-screening rate (with --c1).
    #[arg(long, requires = "c1")]
    pub kappa: Option<f64>,
}

impl RuleFlags {
    pub fn rule(&self) -> Option<ThresholdRule> {
        if let Some(gamma) = self.gamma {
            Some(ThresholdRule::Fixed { gamma })
        } else if let Some(q) = self.q {
            Some(ThresholdRule::FprControl { q })
        } else {
            match (self.c1, self.kappa) {
                (Some(c1), Some(kappa)) => Some(ThresholdRule::SureScreening { c1, kappa }),
                _ => None,
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PenalizedFlags {
    /// Combination rule for neighborhood selection: or | and.
    #[arg(long)]
    pub nbsel_rule: Option<CombineRule>,
    /// Duality gap at which the graphical lasso stops.
    #[arg(long)]
    pub glasso_tol: Option<f64>,
    #[arg(long)]
    pub glasso_max_iter: Option<usize>,
    /// KKT tolerance of the lasso regressions.
    #[arg(long)]
    pub lasso_tol: Option<f64>,
    /// Entries of the precision estimate at or below this are zero.
    #[arg(long)]
    pub eps_zero: Option<f64>,
    /// Run the graphical lasso above the size guard.
    #[arg(long)]
    pub allow_large: bool,
}

impl PenalizedFlags {
    fn apply(&self, s: &mut PenalizedSettings) {
        set(&mut s.nbsel_rule, &self.nbsel_rule);
        set(&mut s.glasso_tol, &self.glasso_tol);
        set(&mut s.glasso_max_iter, &self.glasso_max_iter);
        set(&mut s.lasso_tol, &self.lasso_tol);
        set(&mut s.eps_zero, &self.eps_zero);
        if self.allow_large {
            s.allow_large = true;
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    pub input: Option<PathBuf>,
    pub rule: Option<ThresholdRule>,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Data CSV, rows are observations; a header row is optional.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub rule: RuleFlags,
}

impl ScreenArgs {
    pub fn resolve(&self) -> CliResult<ScreenConfig> {
        let mut cfg: ScreenConfig = load_config(self.config.as_deref())?;
        set(&mut cfg.input, &self.input.clone().map(Some));
        if let Some(rule) = self.rule.rule() {
            cfg.rule = Some(rule);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Graph family: A, B or C.
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stream: Option<u64>,
    #[command(flatten)]
    pub family_params: FamilyFlags,
}

impl SimulateArgs {
    pub fn resolve(&self) -> CliResult<SimulationConfig> {
        let mut cfg: SimulationConfig = load_config(self.config.as_deref())?;
        set(&mut cfg.family, &self.family);
        set(&mut cfg.p, &self.p);
        set(&mut cfg.n, &self.n);
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.stream, &self.stream);
        set(&mut cfg.edge_prob, &self.family_params.edge_prob);
        set(&mut cfg.blocks, &self.family_params.blocks);
        set(&mut cfg.bandwidth, &self.family_params.bandwidth);
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated families.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<Family>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Comma-separated false positive levels.
    #[arg(long, value_delimiter = ',')]
    pub q_list: Option<Vec<f64>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reuse one family A edge set across replicates.
    #[arg(long)]
    pub freeze_family_a_edges: bool,
    #[command(flatten)]
    pub family_params: FamilyFlags,
}

impl Table1Args {
    pub fn resolve(&self) -> CliResult<Table1Config> {
        let mut cfg: Table1Config = load_config(self.config.as_deref())?;
        set(&mut cfg.families, &self.families);
        set(&mut cfg.n, &self.n);
        set(&mut cfg.p, &self.p);
        set(&mut cfg.q_list, &self.q_list);
        set(&mut cfg.replicates, &self.replicates);
        set(&mut cfg.seed, &self.seed);
        if self.freeze_family_a_edges {
            cfg.freeze_family_a_edges = true;
        }
        self.family_params.apply(&mut cfg.params);
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated estimators: grass, glasso, nbsel.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<Estimator>>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    #[command(flatten)]
    pub penalized: PenalizedFlags,
    #[command(flatten)]
    pub family_params: FamilyFlags,
}

impl RocArgs {
    pub fn resolve(&self) -> CliResult<RocConfig> {
        let mut cfg: RocConfig = load_config(self.config.as_deref())?;
        set(&mut cfg.family, &self.family);
        set(&mut cfg.n, &self.n);
        set(&mut cfg.p, &self.p);
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.estimators, &self.estimators);
        set(&mut cfg.grid_size, &self.grid_size);
        set(&mut cfg.lambda_min_ratio, &self.lambda_min_ratio);
        self.penalized.apply(&mut cfg.penalized);
        self.family_params.apply(&mut cfg.params);
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of the largest covariance entries to flag.
    #[arg(long)]
    pub top_fraction: Option<f64>,
    #[command(flatten)]
    pub family_params: FamilyFlags,
}

impl Fig1Args {
    pub fn resolve(&self) -> CliResult<Fig1Config> {
        let mut cfg: Fig1Config = load_config(self.config.as_deref())?;
        set(&mut cfg.family, &self.family);
        set(&mut cfg.n, &self.n);
        set(&mut cfg.p, &self.p);
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.top_fraction, &self.top_fraction);
        self.family_params.apply(&mut cfg.params);
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<Estimator>>,
    #[command(flatten)]
    pub rule: RuleFlags,
    #[command(flatten)]
    pub penalized: PenalizedFlags,
    #[command(flatten)]
    pub family_params: FamilyFlags,
}

impl HeatmapArgs {
    pub fn resolve(&self) -> CliResult<HeatmapConfig> {
        let mut cfg: HeatmapConfig = load_config(self.config.as_deref())?;
        set(&mut cfg.family, &self.family);
        set(&mut cfg.n, &self.n);
        set(&mut cfg.p, &self.p);
        set(&mut cfg.replicates, &self.replicates);
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.estimators, &self.estimators);
        if let Some(rule) = self.rule.rule() {
            cfg.rule = rule;
        }
        self.penalized.apply(&mut cfg.penalized);
        self.family_params.apply(&mut cfg.params);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityRunConfig {
    pub input: Option<PathBuf>,
    /// One class label per observation.
    pub labels: Option<PathBuf>,
    pub labels_header: bool,
    /// Keep only this many highest-variance columns first. Unset means 200
    /// when there are more columns, unless `allow_large` is set.
    pub top_variance: Option<usize>,
    #[serde(flatten)]
    pub protocol: StabilityConfig,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// The labels file starts with a header line.
    #[arg(long)]
    pub labels_header: bool,
    /// Analyze only observations with this label.
    #[arg(long)]
    pub class: Option<String>,
    /// Keep this many highest-variance columns (default 200 when wider,
    /// unless --allow-large).
    #[arg(long)]
    pub top_variance: Option<usize>,
    /// Comma-separated target edge-set sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restandardize_after_split: bool,
    #[arg(long)]
    pub bisection_steps: Option<usize>,
    #[command(flatten)]
    pub penalized: PenalizedFlags,
}

impl StabilityArgs {
    pub fn resolve(&self) -> CliResult<StabilityRunConfig> {
        let mut cfg: StabilityRunConfig = load_config(self.config.as_deref())?;
        set(&mut cfg.input, &self.input.clone().map(Some));
        set(&mut cfg.labels, &self.labels.clone().map(Some));
        if self.labels_header {
            cfg.labels_header = true;
        }
        set(&mut cfg.top_variance, &self.top_variance.map(Some));
        let p = &mut cfg.protocol;
        set(&mut p.class, &self.class.clone().map(Some));
        set(&mut p.sizes, &self.sizes);
        set(&mut p.splits, &self.splits);
        set(&mut p.seed, &self.seed);
        if self.restandardize_after_split {
            p.restandardize_after_split = true;
        }
        set(&mut p.bisection_steps, &self.bisection_steps);
        self.penalized.apply(&mut p.penalized);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GlassoRunConfig {
    pub input: Option<PathBuf>,
    /// The input is a symmetric matrix rather than observations.
    pub matrix_input: bool,
    pub lambda: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub penalize_diagonal: bool,
    pub allow_large: bool,
    pub eps_zero: f64,
}

impl Default for GlassoRunConfig {
    fn default() -> Self {
        let o = grass::GlassoOptions::default();
        GlassoRunConfig {
            input: None,
            matrix_input: false,
            lambda: None,
            tol: o.tol,
            max_iter: o.max_iter,
            penalize_diagonal: o.penalize_diagonal,
            allow_large: o.allow_large,
            eps_zero: grass::penalized::DEFAULT_EPS_ZERO,
        }
    }
}

#[derive(Debug, Args)]
pub struct GlassoArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Treat the input as a symmetric matrix.
    #[arg(long)]
    pub matrix_input: bool,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub penalize_diagonal: bool,
    #[arg(long)]
    pub allow_large: bool,
    #[arg(long)]
    pub eps_zero: Option<f64>,
}

impl GlassoArgs {
    pub fn resolve(&self) -> CliResult<GlassoRunConfig> {
        let mut cfg: GlassoRunConfig = load_config(self.config.as_deref())?;
        set(&mut cfg.input, &self.input.clone().map(Some));
        set(&mut cfg.lambda, &self.lambda.map(Some));
        set(&mut cfg.tol, &self.tol);
        set(&mut cfg.max_iter, &self.max_iter);
        set(&mut cfg.eps_zero, &self.eps_zero);
        cfg.matrix_input |= self.matrix_input;
        cfg.penalize_diagonal |= self.penalize_diagonal;
        cfg.allow_large |= self.allow_large;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NbselRunConfig {
    pub input: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub rule: CombineRule,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for NbselRunConfig {
    fn default() -> Self {
        let o = grass::LassoOptions::default();
        NbselRunConfig {
            input: None,
            lambda: None,
            rule: CombineRule::Or,
            tol: o.tol,
            max_sweeps: o.max_sweeps,
        }
    }
}

#[derive(Debug, Args)]
pub struct NbselArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// or | and
    #[arg(long)]
    pub rule: Option<CombineRule>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
}

impl NbselArgs {
    pub fn resolve(&self) -> CliResult<NbselRunConfig> {
        let mut cfg: NbselRunConfig = load_config(self.config.as_deref())?;
        set(&mut cfg.input, &self.input.clone().map(Some));
        set(&mut cfg.lambda, &self.lambda.map(Some));
        set(&mut cfg.rule, &self.rule);
        set(&mut cfg.tol, &self.tol);
        set(&mut cfg.max_sweeps, &self.max_sweeps);
        Ok(cfg)
    }
}
