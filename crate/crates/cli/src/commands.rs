use std::path::{Path, PathBuf};

use serde::Serialize;

use grass::experiments::{self, Estimator};
use grass::io::{self, fmt6};
use grass::screening::ranked_edges;
use grass::{
    graphical_lasso, neighborhood_selection, resolve_threshold, sample_correlation,
    standardize_columns, DataMatrix, Error, GlassoOptions, LassoOptions, ScaleDenominator,
    SymMatrix,
};

use crate::flags::{
    Fig1Args, GlassoArgs, HeatmapArgs, NbselArgs, RocArgs, ScreenArgs, SimulateArgs, StabilityArgs,
    Table1Args,
};
use crate::{CliError, CliResult};

#[derive(Serialize)]
struct Manifest<'a, C: Serialize, R: Serialize> {
    command: &'static str,
    tool: &'static str,
    version: &'static str,
    seed: Option<u64>,
    node_indexing: &'static str,
    config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolved: Option<R>,
    outputs: Vec<&'static str>,
}

fn write_manifest<C: Serialize, R: Serialize>(
    out: &Path,
    command: &'static str,
    seed: Option<u64>,
    config: &C,
    resolved: Option<R>,
    outputs: Vec<&'static str>,
) -> CliResult<()> {
    let m = Manifest {
        command,
        tool: "grass",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        node_indexing: "1-based",
        config,
        resolved,
        outputs,
    };
    io::write_json(&out.join("manifest.json"), &m)?;
    Ok(())
}

fn strings<const N: usize>(names: [&str; N]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn require_input(input: &Option<PathBuf>) -> CliResult<&Path> {
    input.as_deref().ok_or_else(|| {
        CliError::config("no input file given (use --input or the config key 'input')")
    })
}

/// Reads observations and names a degenerate column by its header when there is one.
fn read_data(path: &Path) -> CliResult<(Option<Vec<String>>, DataMatrix)> {
    Ok(io::read_data_csv(path)?)
}

fn describe_column_error(e: Error, header: &Option<Vec<String>>) -> CliError {
    let mut err = CliError::from(e.clone());
    if let (Error::DegenerateColumn { column }, Some(h)) = (&e, header) {
        if let Some(name) = h.get(*column) {
            err.message = format!(
                "degenerate column '{name}' (column {}): zero variance",
                column + 1
            );
        }
    } else if let Error::DegenerateColumn { column } = e {
        err.message = format!("degenerate column {}: zero variance", column + 1);
    }
    err
}

fn correlation(path: &Path) -> CliResult<(Option<Vec<String>>, DataMatrix, SymMatrix)> {
    let (header, x) = read_data(path)?;
    let s = sample_correlation(&x).map_err(|e| describe_column_error(e, &header))?;
    Ok((header, x, s))
}

fn matrix_rows(m: &[Vec<f64>], fmt: fn(f64) -> String) -> Vec<Vec<String>> {
    m.iter()
        .map(|r| r.iter().map(|&v| fmt(v)).collect())
        .collect()
}

pub fn screen(args: ScreenArgs, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let input = require_input(&cfg.input)?;
    let rule = cfg.rule.ok_or_else(|| {
        CliError::config("no threshold given (use --gamma, --q, or --c1 with --kappa)")
    })?;
    let (_, x, s) = correlation(input)?;
    let gamma: f64 = resolve_threshold(&rule, x.n(), x.p())?;
    let ranked = ranked_edges(&s, gamma)?;
    let rows: Vec<Vec<String>> = ranked
        .iter()
        .map(|&(a, b, m)| vec![(a + 1).to_string(), (b + 1).to_string(), fmt6(m)])
        .collect();
    io::write_csv(&out.join("edges.csv"), &strings(["a", "b", "abs_s"]), &rows)?;

    #[derive(Serialize)]
    struct Resolved {
        n: usize,
        p: usize,
        gamma: f64,
        edges: usize,
    }
    let resolved = Resolved {
        n: x.n(),
        p: x.p(),
        gamma,
        edges: ranked.len(),
    };
    write_manifest(out, "screen", None, &cfg, Some(resolved), vec!["edges.csv"])
}

pub fn simulate(args: SimulateArgs, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let inst = grass::build_instance(&cfg)?;
    io::write_instance(out, &inst, &cfg)?;
    Ok(())
}

pub fn table1(args: Table1Args, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let rows = experiments::run_table1(&cfg)?;
    io::write_json(&out.join("table1.json"), &rows)?;
    let header = strings([
        "family",
        "n",
        "p",
        "q",
        "gamma",
        "mean_edge_count",
        "mean_edge_count_ordered",
        "mean_fpr",
        "mean_fnr",
        "fnr_replicates",
        "replicates",
    ]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.family.to_string(),
                r.n.to_string(),
                r.p.to_string(),
                fmt6(r.q),
                fmt6(r.gamma),
                fmt6(r.mean_edge_count),
                fmt6(r.mean_edge_count_ordered),
                fmt6(r.mean_fpr),
                r.mean_fnr.map(fmt6).unwrap_or_else(|| "NA".into()),
                r.fnr_replicates.to_string(),
                r.replicates.to_string(),
            ]
        })
        .collect();
    io::write_csv(&out.join("table1.csv"), &header, &body)?;
    write_manifest(
        out,
        "table1",
        Some(cfg.seed),
        &cfg,
        None::<()>,
        vec!["table1.json", "table1.csv"],
    )
}

pub fn roc(args: RocArgs, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let report = experiments::run_roc(&cfg)?;
    io::write_json(&out.join("roc.json"), &report)?;
    let body: Vec<Vec<String>> = report
        .curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |pt| {
                vec![
                    c.estimator.to_string(),
                    c.rule.map(|r| r.to_string()).unwrap_or_default(),
                    fmt6(pt.tuning),
                    pt.fp.to_string(),
                    pt.tp.to_string(),
                    pt.converged.to_string(),
                ]
            })
        })
        .collect();
    io::write_csv(
        &out.join("roc.csv"),
        &strings(["estimator", "rule", "tuning", "fp", "tp", "converged"]),
        &body,
    )?;
    write_manifest(
        out,
        "roc",
        Some(cfg.seed),
        &cfg,
        None::<()>,
        vec!["roc.json", "roc.csv"],
    )
}

pub fn fig1(args: Fig1Args, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let report = experiments::run_fig1(&cfg)?;
    io::write_json(&out.join("fig1.json"), &report)?;
    let body: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| {
            vec![
                (r.a + 1).to_string(),
                (r.b + 1).to_string(),
                fmt6(r.precision),
                fmt6(r.covariance),
                u8::from(r.flagged).to_string(),
                u8::from(r.is_edge).to_string(),
            ]
        })
        .collect();
    io::write_csv(
        &out.join("fig1.csv"),
        &strings(["a", "b", "precision", "covariance", "flagged", "is_edge"]),
        &body,
    )?;
    write_manifest(
        out,
        "fig1",
        Some(cfg.seed),
        &cfg,
        None::<()>,
        vec!["fig1.json", "fig1.csv"],
    )
}

pub fn heatmaps(args: HeatmapArgs, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let report = experiments::run_heatmaps(&cfg)?;
    io::write_json(&out.join("heatmaps.json"), &report)?;
    let names = io::column_names(report.p);
    let truth: Vec<Vec<String>> = report
        .truth
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect())
        .collect();
    io::write_csv(&out.join("truth.csv"), &names, &truth)?;
    let mut outputs = vec!["heatmaps.json", "truth.csv"];
    for map in &report.maps {
        let name: &'static str = match map.estimator {
            Estimator::Grass => "heatmap_grass.csv",
            Estimator::Glasso => "heatmap_glasso.csv",
            Estimator::Nbsel => "heatmap_nbsel.csv",
        };
        io::write_csv(&out.join(name), &names, &matrix_rows(&map.average, fmt6))?;
        outputs.push(name);
    }

    #[derive(Serialize)]
    struct Resolved {
        tuning: f64,
    }
    write_manifest(
        out,
        "heatmaps",
        Some(cfg.seed),
        &cfg,
        Some(Resolved {
            tuning: report.tuning,
        }),
        outputs,
    )
}

/// Columns kept by the stability protocol when neither `top_variance` nor
/// `allow_large` is given.
pub const DESK_SCALE_COLUMNS: usize = 200;

pub fn stability(args: StabilityArgs, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let input = require_input(&cfg.input)?;
    let (header, mut x) = read_data(input)?;
    let labels = match &cfg.labels {
        Some(path) => Some(io::read_labels(path, cfg.labels_header)?),
        None => None,
    };
    let keep = match cfg.top_variance {
        Some(k) => Some(k),
        None if x.p() > DESK_SCALE_COLUMNS && !cfg.protocol.penalized.allow_large => {
            Some(DESK_SCALE_COLUMNS)
        }
        None => None,
    };
    if let Some(k) = keep {
        x = experiments::select_top_variance(&x, k)?;
    }
    let reports = experiments::run_stability(&x, labels.as_deref(), &cfg.protocol)
        .map_err(|e| describe_column_error(e, &if keep.is_some() { None } else { header }))?;
    io::write_json(&out.join("stability.json"), &reports)?;
    let header = strings([
        "target_size",
        "splits",
        "edge_count_mean",
        "edge_count_se",
        "gl_gold_grass_mean",
        "gl_gold_grass_se",
        "gl_gold_gl_mean",
        "gl_gold_gl_se",
        "grass_gold_grass_mean",
        "grass_gold_grass_se",
        "grass_gold_gl_mean",
        "grass_gold_gl_se",
    ]);
    let body: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.target_size.to_string(), r.splits.to_string()];
            for m in [
                r.edge_count,
                r.gl_gold_grass,
                r.gl_gold_gl,
                r.grass_gold_grass,
                r.grass_gold_gl,
            ] {
                row.push(fmt6(m.mean));
                row.push(fmt6(m.se));
            }
            row
        })
        .collect();
    io::write_csv(&out.join("stability.csv"), &header, &body)?;

    #[derive(Serialize)]
    struct Resolved {
        n: usize,
        p: usize,
        top_variance: Option<usize>,
    }
    write_manifest(
        out,
        "stability",
        Some(cfg.protocol.seed),
        &cfg,
        Some(Resolved {
            n: x.n(),
            p: x.p(),
            top_variance: keep,
        }),
        vec!["stability.json", "stability.csv"],
    )
}

pub fn glasso(args: GlassoArgs, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let input = require_input(&cfg.input)?;
    let lambda = cfg
        .lambda
        .ok_or_else(|| CliError::config("no penalty given (use --lambda)"))?;
    let s = if cfg.matrix_input {
        let m = io::read_matrix_csv(input)?;
        SymMatrix::from_rows(&m.rows)?
    } else {
        correlation(input)?.2
    };
    let opts = GlassoOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        penalize_diagonal: cfg.penalize_diagonal,
        allow_large: cfg.allow_large,
        ..GlassoOptions::default()
    };
    let sol = graphical_lasso(&s, lambda, &opts)?;
    let edges = sol.pattern(cfg.eps_zero)?;
    let names = io::column_names(s.p());
    io::write_csv(&out.join("theta.csv"), &names, &io::sym_rows(&sol.theta))?;
    io::write_csv(
        &out.join("edges.csv"),
        &strings(["a", "b"]),
        &io::edge_rows(&edges),
    )?;

    #[derive(Serialize)]
    struct Summary {
        p: usize,
        lambda: f64,
        gap: f64,
        iterations: usize,
        converged: bool,
        edges: usize,
        objective_trace: Vec<f64>,
    }
    let summary = Summary {
        p: s.p(),
        lambda,
        gap: sol.gap,
        iterations: sol.iterations,
        converged: sol.converged,
        edges: edges.len(),
        objective_trace: sol.objective_trace.clone(),
    };
    io::write_json(&out.join("glasso.json"), &summary)?;
    write_manifest(
        out,
        "glasso",
        None,
        &cfg,
        None::<()>,
        vec!["theta.csv", "edges.csv", "glasso.json"],
    )
}

pub fn nbsel(args: NbselArgs, out: &Path) -> CliResult<()> {
    let cfg = args.resolve()?;
    let input = require_input(&cfg.input)?;
    let lambda = cfg
        .lambda
        .ok_or_else(|| CliError::config("no penalty given (use --lambda)"))?;
    let (header, x) = read_data(input)?;
    let z = standardize_columns(&x, ScaleDenominator::N)
        .map_err(|e| describe_column_error(e, &header))?;
    let opts = LassoOptions {
        tol: cfg.tol,
        max_sweeps: cfg.max_sweeps,
    };
    let edges = neighborhood_selection(&z, lambda, cfg.rule, &opts)?;
    io::write_csv(
        &out.join("edges.csv"),
        &strings(["a", "b"]),
        &io::edge_rows(&edges),
    )?;

    #[derive(Serialize)]
    struct Resolved {
        n: usize,
        p: usize,
        edges: usize,
    }
    write_manifest(
        out,
        "nbsel",
        None,
        &cfg,
        Some(Resolved {
            n: x.n(),
            p: x.p(),
            edges: edges.len(),
        }),
        vec!["edges.csv"],
    )
}
