//! Reference penalized estimators: the lasso by coordinate descent,
//! neighborhood selection, and the graphical lasso by block coordinate
//! descent over columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, SymMat};
use crate::sampling::{gram_over_n, DataMat};
use crate::scalar::Scalar;
use crate::screening::EdgeSet;

pub const DEFAULT_EPS_ZERO: f64 = 1e-6;
pub const GLASSO_SIZE_LIMIT: usize = 500;

pub fn soft_threshold<T: Scalar>(z: T, t: T) -> T {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        T::zero()
    }
}

fn kkt_violation<T: Scalar>(beta: &[T], grad: &[T], lambda: T) -> T {
    beta.iter().zip(grad).fold(T::zero(), |m, (&b, &g)| {
        let v = if b > T::zero() {
            (g + lambda).abs()
        } else if b < T::zero() {
            (g - lambda).abs()
        } else {
            (g.abs() - lambda).max(T::zero())
        };
        m.max(v)
    })
}

struct CdOutcome<T> {
    sweeps: usize,
    kkt: T,
    converged: bool,
    best: Vec<T>,
}

/// Coordinate descent for `min 1/2 b'Qb - c'b + lambda |b|_1`, where `Q` is
/// the principal submatrix of the dense row-major `q` (row length `stride`)
/// on the indices `idx`. `beta` is the warm start and receives the result.
fn cd_quadratic<T: Scalar>(
    q: &[T],
    stride: usize,
    idx: &[usize],
    c: &[T],
    lambda: T,
    beta: &mut [T],
    tol: T,
    max_sweeps: usize,
) -> CdOutcome<T> {
    let m = idx.len();
    let exact_gradient = |beta: &[T], g: &mut [T]| {
        for k in 0..m {
            let row = idx[k] * stride;
            let mut acc = -c[k];
            for l in 0..m {
                if beta[l] != T::zero() {
                    acc = acc + q[row + idx[l]] * beta[l];
                }
            }
            g[k] = acc;
        }
    };
    let mut g = vec![T::zero(); m];
    exact_gradient(beta, &mut g);
    let mut kkt = kkt_violation(beta, &g, lambda);
    let mut best = beta.to_vec();
    let mut best_kkt = kkt;
    if kkt <= tol {
        return CdOutcome {
            sweeps: 0,
            kkt,
            converged: true,
            best,
        };
    }
    for sweep in 1..=max_sweeps {
        for k in 0..m {
            let row = idx[k] * stride;
            let qkk = q[row + idx[k]];
            if !(qkk > T::zero()) {
                continue;
            }
            let old = beta[k];
            let new = soft_threshold(qkk * old - g[k], lambda) / qkk;
            if new != old {
                let d = new - old;
                beta[k] = new;
                for l in 0..m {
                    g[l] = g[l] + q[row + idx[l]] * d;
                }
            }
        }
        kkt = kkt_violation(beta, &g, lambda);
        if kkt <= tol {
            // the running gradient drifts; confirm against a fresh one
            exact_gradient(beta, &mut g);
            kkt = kkt_violation(beta, &g, lambda);
        }
        if kkt < best_kkt {
            best_kkt = kkt;
            best.copy_from_slice(beta);
        }
        if kkt <= tol {
            return CdOutcome {
                sweeps: sweep,
                kkt,
                converged: true,
                best,
            };
        }
    }
    CdOutcome {
        sweeps: max_sweeps,
        kkt: best_kkt,
        converged: false,
        best,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Largest tolerated KKT violation.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-9,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution<T> {
    pub beta: Vec<T>,
    pub lambda: T,
    pub converged: bool,
    pub kkt_violation: T,
    pub sweeps: usize,
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "penalty must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    Ok(())
}

fn check_iterations(max_iter: usize) -> Result<()> {
    if max_iter == 0 {
        return Err(Error::Domain("iteration budget must be >= 1".into()));
    }
    Ok(())
}

/// Minimizes `(1/2n) |y - X b|^2 + lambda |b|_1` by cyclic coordinate
/// descent, stopping once the KKT violation is at most `opts.tol`.
pub fn lasso_cd<T: Scalar>(
    x: &DataMat<T>,
    y: &[T],
    lambda: T,
    opts: &LassoOptions,
) -> Result<LassoSolution<T>> {
    check_lambda(lambda)?;
    check_tol(opts.tol)?;
    let (n, p) = (x.n(), x.p());
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "response has length {}, expected {n}",
            y.len()
        )));
    }
    let nf = T::from_count(n);
    let mut q = vec![T::zero(); p * p];
    for a in 0..p {
        for b in 0..=a {
            let v = x
                .column(a)
                .iter()
                .zip(x.column(b))
                .map(|(&u, &w)| u * w)
                .sum::<T>()
                / nf;
            q[a * p + b] = v;
            q[b * p + a] = v;
        }
    }
    let c: Vec<T> = (0..p)
        .map(|a| x.column(a).iter().zip(y).map(|(&u, &w)| u * w).sum::<T>() / nf)
        .collect();
    let idx: Vec<usize> = (0..p).collect();
    let mut beta = vec![T::zero(); p];
    let out = cd_quadratic(
        &q,
        p,
        &idx,
        &c,
        lambda,
        &mut beta,
        T::c(opts.tol),
        opts.max_sweeps,
    );
    if !out.converged {
        return Err(Error::LassoNonConvergence {
            sweeps: out.sweeps,
            kkt_violation: out.kkt.to_f64_lossy(),
            best: out.best.iter().map(|v| v.to_f64_lossy()).collect(),
        });
    }
    Ok(LassoSolution {
        beta,
        lambda,
        converged: true,
        kkt_violation: out.kkt,
        sweeps: out.sweeps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// Edge if either regression selects the other node.
    #[default]
    Or,
    /// Edge if both regressions select each other.
    And,
}

impl std::fmt::Display for CombineRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CombineRule::Or => "or",
            CombineRule::And => "and",
        })
    }
}

impl std::str::FromStr for CombineRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "or" => Ok(CombineRule::Or),
            "and" => Ok(CombineRule::And),
            other => Err(Error::Configuration(format!(
                "unknown combination rule '{other}'"
            ))),
        }
    }
}

/// Regresses every column on the rest and combines the supports.
/// `x` should already be standardized.
pub fn neighborhood_selection<T: Scalar>(
    x: &DataMat<T>,
    lambda: T,
    rule: CombineRule,
    opts: &LassoOptions,
) -> Result<EdgeSet> {
    neighborhood_selection_gram(&gram_over_n(x), lambda, rule, opts)
}

/// Neighborhood selection from a precomputed `X^T X / n`.
pub fn neighborhood_selection_gram<T: Scalar>(
    s: &SymMat<T>,
    lambda: T,
    rule: CombineRule,
    opts: &LassoOptions,
) -> Result<EdgeSet> {
    let fit = neighborhood_fit(s, lambda, rule, opts)?;
    if let Some((node, err)) = fit.failures.into_iter().next() {
        return Err(Error::NodeRegression {
            node,
            source: Box::new(err),
        });
    }
    Ok(fit.edges)
}

/// Result of [`neighborhood_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodFit {
    pub edges: EdgeSet,
    /// Nodes whose regression hit the sweep limit, in increasing order, with
    /// the non-convergence error. Their best iterates are used in `edges`.
    pub failures: Vec<(usize, Error)>,
}

/// Neighborhood selection that keeps going past regressions that fail to
/// converge.
pub fn neighborhood_fit<T: Scalar>(
    s: &SymMat<T>,
    lambda: T,
    rule: CombineRule,
    opts: &LassoOptions,
) -> Result<NeighborhoodFit> {
    check_lambda(lambda)?;
    check_tol(opts.tol)?;
    let p = s.p();
    let dense = s.to_dense();
    let fits: Vec<(Vec<usize>, Option<Error>)> = (0..p)
        .into_par_iter()
        .map(|a| {
            let idx: Vec<usize> = (0..p).filter(|&b| b != a).collect();
            let c: Vec<T> = idx.iter().map(|&b| dense[b * p + a]).collect();
            let mut beta = vec![T::zero(); idx.len()];
            let out = cd_quadratic(
                &dense,
                p,
                &idx,
                &c,
                lambda,
                &mut beta,
                T::c(opts.tol),
                opts.max_sweeps,
            );
            let (coef, err) = if out.converged {
                (beta, None)
            } else {
                let err = Error::LassoNonConvergence {
                    sweeps: out.sweeps,
                    kkt_violation: out.kkt.to_f64_lossy(),
                    best: out.best.iter().map(|v| v.to_f64_lossy()).collect(),
                };
                (out.best, Some(err))
            };
            let support = idx
                .iter()
                .zip(&coef)
                .filter(|(_, b)| **b != T::zero())
                .map(|(&j, _)| j)
                .collect();
            (support, err)
        })
        .collect();
    let mut selected = vec![false; p * p];
    let mut failures = Vec::new();
    for (a, (support, err)) in fits.into_iter().enumerate() {
        for b in support {
            selected[a * p + b] = true;
        }
        if let Some(e) = err {
            failures.push((a, e));
        }
    }
    let edges = EdgeSet::from_predicate(p, |a, b| {
        let (ab, ba) = (selected[a * p + b], selected[b * p + a]);
        match rule {
            CombineRule::Or => ab || ba,
            CombineRule::And => ab && ba,
        }
    });
    Ok(NeighborhoodFit { edges, failures })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassoOptions {
    /// Target duality gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Also penalize the diagonal of the precision matrix by `lambda`.
    pub penalize_diagonal: bool,
    /// Lift the refusal for `p > GLASSO_SIZE_LIMIT`.
    pub allow_large: bool,
    pub inner_max_sweeps: usize,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        GlassoOptions {
            tol: 1e-8,
            max_iter: 1000,
            penalize_diagonal: false,
            allow_large: false,
            inner_max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlassoSolution<T> {
    pub theta: SymMat<T>,
    /// Covariance estimate carried by the solver.
    pub w: SymMat<T>,
    pub lambda: T,
    pub gap: T,
    pub iterations: usize,
    /// `log det W` after each sweep over the columns; nondecreasing.
    pub objective_trace: Vec<T>,
    /// False only for results of [`graphical_lasso_best_effort`] that ran out
    /// of iterations.
    pub converged: bool,
}

impl<T: Scalar> GlassoSolution<T> {
    pub fn pattern(&self, eps_zero: T) -> Result<EdgeSet> {
        pattern_of(&self.theta, eps_zero)
    }
}

/// Penalized Gaussian log-likelihood
/// `log det Theta - tr(S Theta) - lambda sum_{i != j} |Theta_ij|`
/// (plus `lambda sum_i Theta_ii` when the diagonal is penalized).
pub fn glasso_objective<T: Scalar>(
    s: &SymMat<T>,
    theta: &SymMat<T>,
    lambda: T,
    penalize_diagonal: bool,
) -> Result<T> {
    let logdet = cholesky(theta)?.log_det();
    let p = s.p();
    let (mut tr, mut off) = (T::zero(), T::zero());
    for i in 0..p {
        tr = tr + s.get(i, i) * theta.get(i, i);
        for j in 0..i {
            tr = tr + T::c(2.0) * s.get(i, j) * theta.get(i, j);
            off = off + T::c(2.0) * theta.get(i, j).abs();
        }
    }
    let mut pen = lambda * off;
    if penalize_diagonal {
        pen = pen + lambda * theta.diag().into_iter().map(|v| v.abs()).sum::<T>();
    }
    Ok(logdet - tr - pen)
}

fn dense_log_det<T: Scalar>(dense: &[T], p: usize) -> Option<T> {
    let m = SymMat::from_fn(p, |i, j| dense[i * p + j]);
    cholesky(&m).ok().map(|c| c.log_det())
}

/// Maximizes the penalized Gaussian log-likelihood over precision matrices
/// on the full `p x p` problem, stopping once the duality gap is at most
/// `opts.tol`.
pub fn graphical_lasso<T: Scalar>(
    s: &SymMat<T>,
    lambda: T,
    opts: &GlassoOptions,
) -> Result<GlassoSolution<T>> {
    let sol = graphical_lasso_best_effort(s, lambda, opts)?;
    if !sol.converged {
        return Err(Error::GlassoNonConvergence {
            iterations: sol.iterations,
            gap: sol.gap.to_f64_lossy(),
        });
    }
    Ok(sol)
}

/// Like [`graphical_lasso`] but returns the last iterate, marked as not
/// converged, when the iteration budget runs out.
pub fn graphical_lasso_best_effort<T: Scalar>(
    s: &SymMat<T>,
    lambda: T,
    opts: &GlassoOptions,
) -> Result<GlassoSolution<T>> {
    check_lambda(lambda)?;
    check_tol(opts.tol)?;
    check_iterations(opts.max_iter)?;
    let p = s.p();
    if p > GLASSO_SIZE_LIMIT && !opts.allow_large {
        return Err(Error::SizeGuard {
            p,
            limit: GLASSO_SIZE_LIMIT,
        });
    }
    if !s.is_finite() {
        return Err(Error::InvalidArgument(
            "input matrix has non-finite entries".into(),
        ));
    }
    if let Some(i) = s.diag().iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Domain(format!(
            "diagonal entry {} is not strictly positive",
            i + 1
        )));
    }
    if lambda == T::zero() && cholesky(s).is_err() {
        return Err(Error::Domain(
            "input matrix is singular and lambda = 0".into(),
        ));
    }

    let rho_d = if opts.penalize_diagonal {
        lambda
    } else {
        T::zero()
    };
    let sd = s.to_dense();
    let max_off = s.max_offdiag_abs();
    let shrink = if max_off > T::zero() {
        (lambda / max_off).min(T::one())
    } else {
        T::one()
    };
    let mut w = sd.clone();
    for i in 0..p {
        for j in 0..p {
            w[i * p + j] = if i == j {
                sd[i * p + i] + rho_d
            } else {
                (T::one() - shrink) * sd[i * p + j]
            };
        }
    }

    let tol = T::c(opts.tol);
    let inner_tol = T::c(1e-14).max(T::epsilon() * T::c(1e2));
    let mut betas: Vec<Vec<T>> = vec![vec![T::zero(); p.saturating_sub(1)]; p];
    let idxs: Vec<Vec<usize>> = (0..p)
        .map(|j| (0..p).filter(|&k| k != j).collect())
        .collect();
    let mut trace = Vec::new();
    let mut theta = SymMat::zeros(p);
    let mut gap = T::infinity();

    for iter in 1..=opts.max_iter {
        for j in 0..p {
            let idx = &idxs[j];
            let c: Vec<T> = idx.iter().map(|&k| sd[k * p + j]).collect();
            cd_quadratic(
                &w,
                p,
                idx,
                &c,
                lambda,
                &mut betas[j],
                inner_tol,
                opts.inner_max_sweeps,
            );
            for &k in idx {
                let row = k * p;
                let v: T = idx
                    .iter()
                    .zip(&betas[j])
                    .map(|(&l, &b)| w[row + l] * b)
                    .sum();
                w[k * p + j] = v;
                w[j * p + k] = v;
            }
        }
        trace.push(dense_log_det(&w, p).unwrap_or(T::neg_infinity()));

        theta = theta_from_betas(&w, &betas, &idxs, p);
        gap = duality_gap(s, &w, &theta, lambda, rho_d);
        if gap <= tol || iter == opts.max_iter {
            break;
        }
    }
    Ok(GlassoSolution {
        theta,
        w: SymMat::from_fn(p, |i, j| w[i * p + j]),
        lambda,
        gap,
        iterations: trace.len(),
        objective_trace: trace,
        converged: gap <= tol,
    })
}

fn theta_from_betas<T: Scalar>(
    w: &[T],
    betas: &[Vec<T>],
    idxs: &[Vec<usize>],
    p: usize,
) -> SymMat<T> {
    let mut cols = vec![T::zero(); p * p];
    for j in 0..p {
        let schur = w[j * p + j]
            - idxs[j]
                .iter()
                .zip(&betas[j])
                .map(|(&k, &b)| w[k * p + j] * b)
                .sum::<T>();
        let tjj = T::one() / schur;
        cols[j * p + j] = tjj;
        for (&k, &b) in idxs[j].iter().zip(&betas[j]) {
            cols[k * p + j] = -b * tjj;
        }
    }
    SymMat::from_fn(p, |i, j| {
        if i == j {
            cols[i * p + i]
        } else {
            (cols[i * p + j] + cols[j * p + i]) / T::c(2.0)
        }
    })
}

/// Dual objective at the box projection of `w` minus the primal at `theta`.
/// Infinite when either matrix fails to be positive definite.
fn duality_gap<T: Scalar>(s: &SymMat<T>, w: &[T], theta: &SymMat<T>, lambda: T, rho_d: T) -> T {
    let p = s.p();
    let feasible = SymMat::from_fn(p, |i, j| {
        let sij = s.get(i, j);
        if i == j {
            sij + rho_d
        } else {
            w[i * p + j].max(sij - lambda).min(sij + lambda)
        }
    });
    let Ok(chol) = cholesky(&feasible) else {
        return T::infinity();
    };
    let Ok(primal) = glasso_objective(s, theta, lambda, rho_d > T::zero()) else {
        return T::infinity();
    };
    -chol.log_det() - T::from_count(p) - primal
}

/// Support of the off-diagonal entries with `|theta_ab| > eps_zero`.
pub fn pattern_of<T: Scalar>(theta: &SymMat<T>, eps_zero: T) -> Result<EdgeSet> {
    if !(eps_zero > T::zero()) {
        return Err(Error::Domain(format!(
            "eps_zero must be > 0, got {eps_zero}"
        )));
    }
    Ok(EdgeSet::from_predicate(theta.p(), |a, b| {
        theta.get(a, b).abs() > eps_zero
    }))
}
