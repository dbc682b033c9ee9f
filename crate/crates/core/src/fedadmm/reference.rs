//! Deterministic full-batch ADMM with exact node minimization, used as the
//! ground truth for the stochastic engine.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{DeviceGraph, Side};
use crate::linalg::{cholesky_with_jitter, dvector, symmetrize, ParamMatrix};
use crate::models::{Dataset, DeviceData, Family, ModelSpec};
use crate::penalty::{edge_prox, EdgeNorm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Bound on the sup-norm primal and dual residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial ADMM penalty.
    pub rho: f64,
    /// Rebalance `ρ` when one residual dominates the other.
    pub adaptive_rho: bool,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200_000,
            rho: 1.0,
            adaptive_rho: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceFit {
    pub theta: ParamMatrix,
    pub beta_plus: ParamMatrix,
    pub beta_minus: ParamMatrix,
    pub alpha_plus: ParamMatrix,
    pub alpha_minus: ParamMatrix,
    pub rho: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Sup-norm of the smallest subgradient of `F` certified by the multipliers.
    pub kkt_residual: f64,
}

impl ReferenceFit {
    /// Edge `k` is fused when its two copies coincide.
    pub fn is_fused(&self, k: usize) -> bool {
        self.beta_plus.row(k) == self.beta_minus.row(k)
    }
}

/// Exact minimizer of `M̂_u(θ) + (c/2)||θ||² - θᵀr` for one device.
enum NodeSolver<'a> {
    /// `M̂` is quadratic with constant Hessian `Q Λ Qᵀ` and `-∇M̂(0) = b`.
    Quadratic {
        q: DMatrix<f64>,
        lambda: DVector<f64>,
        b: DVector<f64>,
    },
    Logistic {
        spec: ModelSpec,
        data: &'a DeviceData,
    },
}

impl<'a> NodeSolver<'a> {
    fn new(spec: &ModelSpec, data: &'a DeviceData) -> Result<Self> {
        let zero = vec![0.0; spec.dim];
        match spec.family {
            Family::Mean | Family::Linear => {
                let h = spec.empirical_hessian(data, &zero)?;
                let b = -dvector(&spec.batch_gradient(data, &zero, None)?);
                let eig = SymmetricEigen::new(symmetrize(&h));
                Ok(NodeSolver::Quadratic {
                    q: eig.eigenvectors,
                    lambda: eig.eigenvalues,
                    b,
                })
            }
            Family::Logistic => Ok(NodeSolver::Logistic { spec: *spec, data }),
        }
    }

    fn solve(&self, c: f64, r: &[f64], start: &[f64]) -> Result<Vec<f64>> {
        match self {
            NodeSolver::Quadratic { q, lambda, b } => {
                let rhs = b + dvector(r);
                let mut proj = q.transpose() * rhs;
                let top = lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (i, l) in lambda.iter().enumerate() {
                    let d = l + c;
                    if d <= 1e-12 * top.max(1.0) {
                        return Err(Error::Singular {
                            condition: f64::INFINITY,
                        });
                    }
                    proj[i] /= d;
                }
                Ok((q * proj).iter().copied().collect())
            }
            NodeSolver::Logistic { spec, data } => newton_penalized(spec, data, c, r, start),
        }
    }
}

fn penalized_value(spec: &ModelSpec, data: &DeviceData, c: f64, r: &[f64], th: &[f64]) -> Result<f64> {
    let quad: f64 = th.iter().zip(r).map(|(t, ri)| 0.5 * c * t * t - t * ri).sum();
    Ok(spec.empirical_risk(data, th)? + quad)
}

fn newton_penalized(spec: &ModelSpec, data: &DeviceData, c: f64, r: &[f64], start: &[f64]) -> Result<Vec<f64>> {
    let p = spec.dim;
    let mut theta = start.to_vec();
    let mut value = penalized_value(spec, data, c, r, &theta)?;
    for _ in 0..100 {
        let mut g = spec.batch_gradient(data, &theta, None)?;
        for i in 0..p {
            g[i] += c * theta[i] - r[i];
        }
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= 1e-13 {
            break;
        }
        let mut h = spec.empirical_hessian(data, &theta)?;
        for i in 0..p {
            h[(i, i)] += c;
        }
        let step = cholesky_with_jitter(&h)?.solve(&dvector(&g));
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let v = penalized_value(spec, data, c, r, &trial)?;
            if v <= value {
                moved = trial != theta;
                theta = trial;
                value = v;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(theta)
}

/// Minimizer of `F(Θ) = |V|⁻¹ Σ_u M̂_u(θ_u) + λ Σ_e φ(θ_{e+} - θ_{e-})`.
pub fn reference_minimizer(
    g: &DeviceGraph,
    data: &Dataset,
    lambda: f64,
    norm: EdgeNorm,
    opts: &ReferenceOptions,
) -> Result<ReferenceFit> {
    reference_minimizer_warm(g, data, lambda, norm, opts, None)
}

/// As [`reference_minimizer`], starting from a previous fit on the same graph.
pub fn reference_minimizer_warm(
    g: &DeviceGraph,
    data: &Dataset,
    lambda: f64,
    norm: EdgeNorm,
    opts: &ReferenceOptions,
    warm: Option<&ReferenceFit>,
) -> Result<ReferenceFit> {
    if g.num_nodes() != data.num_devices() {
        return Err(Error::NodeCountMismatch(g.num_nodes(), data.num_devices()));
    }
    if !(lambda >= 0.0) || !(opts.rho > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need lambda >= 0, rho > 0, tol > 0 (got {lambda}, {}, {})",
            opts.rho, opts.tol
        )));
    }
    let nv = g.num_nodes();
    let ne = g.num_edges();
    let p = data.dim();
    let lambda_eff = lambda * nv as f64;
    let solvers = data
        .devices
        .iter()
        .map(|d| NodeSolver::new(&data.spec, d))
        .collect::<Result<Vec<_>>>()?;

    let (mut theta, mut bp, mut bm, mut ap, mut am, mut rho) = match warm {
        Some(w) if w.theta.nrows() == nv && w.beta_plus.nrows() == ne && w.theta.ncols() == p => (
            w.theta.clone(),
            w.beta_plus.clone(),
            w.beta_minus.clone(),
            w.alpha_plus.clone(),
            w.alpha_minus.clone(),
            w.rho,
        ),
        _ => (
            ParamMatrix::zeros(nv, p),
            ParamMatrix::zeros(ne, p),
            ParamMatrix::zeros(ne, p),
            ParamMatrix::zeros(ne, p),
            ParamMatrix::zeros(ne, p),
            opts.rho,
        ),
    };

    let mut r = vec![0.0; p];
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        for u in 0..nv {
            r.iter_mut().for_each(|x| *x = 0.0);
            for &(k, side) in g.incident(u) {
                let (b, a) = match side {
                    Side::Plus => (bp.row(k), ap.row(k)),
                    Side::Minus => (bm.row(k), am.row(k)),
                };
                for c in 0..p {
                    r[c] += rho * b[c] + a[c];
                }
            }
            let c = rho * g.degree(u) as f64;
            let next = solvers[u].solve(c, &r, theta.row(u))?;
            theta.set_row(u, &next);
        }
        primal = 0.0;
        dual = 0.0;
        for (k, e) in g.edges().iter().enumerate() {
            let tp = theta.row(e.plus);
            let tm = theta.row(e.minus);
            let a: Vec<f64> = tp.iter().zip(ap.row(k)).map(|(t, x)| t - x / rho).collect();
            let b: Vec<f64> = tm.iter().zip(am.row(k)).map(|(t, x)| t - x / rho).collect();
            let (np, nm) = edge_prox(&a, &b, lambda_eff, rho, norm)?;
            for c in 0..p {
                dual = dual.max((np[c] - bp.get(k, c)).abs()).max((nm[c] - bm.get(k, c)).abs());
                let rp = tp[c] - np[c];
                let rm = tm[c] - nm[c];
                primal = primal.max(rp.abs()).max(rm.abs());
                ap.row_mut(k)[c] -= rho * rp;
                am.row_mut(k)[c] -= rho * rm;
            }
            bp.set_row(k, &np);
            bm.set_row(k, &nm);
        }
        dual *= rho;
        if ne == 0 || (primal <= opts.tol && dual <= opts.tol) {
            if ne == 0 {
                primal = 0.0;
                dual = 0.0;
            }
            break;
        }
        if opts.adaptive_rho && iterations % 20 == 0 {
            if primal > 10.0 * dual && rho < 1e6 {
                rho *= 2.0;
            } else if dual > 10.0 * primal && rho > 1e-6 {
                rho /= 2.0;
            }
        }
    }
    if primal > opts.tol || dual > opts.tol {
        return Err(Error::NoConvergence {
            iterations,
            residual: primal.max(dual),
        });
    }
    let mut fit = ReferenceFit {
        theta,
        beta_plus: bp,
        beta_minus: bm,
        alpha_plus: ap,
        alpha_minus: am,
        rho,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        kkt_residual: f64::NAN,
    };
    fit.kkt_residual = kkt_residual(g, data, lambda, norm, &fit)?;
    let scale = 1.0 + rho * g.max_degree() as f64;
    if fit.kkt_residual > 10.0 * opts.tol * scale {
        return Err(Error::NoConvergence {
            iterations,
            residual: fit.kkt_residual,
        });
    }
    Ok(fit)
}

/// `max_u ||∇M̂_u(θ_u) + λ|V| Σ_e D_eu z_e||∞ / |V|` with `z_e` read off the
/// multipliers and clipped into `∂φ(β_{e+} - β_{e-})`.
pub fn kkt_residual(
    g: &DeviceGraph,
    data: &Dataset,
    lambda: f64,
    norm: EdgeNorm,
    fit: &ReferenceFit,
) -> Result<f64> {
    let nv = g.num_nodes();
    let p = data.dim();
    let lambda_eff = lambda * nv as f64;
    let mut resid = ParamMatrix::zeros(nv, p);
    for u in 0..nv {
        let grad = data.spec.batch_gradient(&data.devices[u], fit.theta.row(u), None)?;
        resid.set_row(u, &grad);
    }
    if lambda_eff > 0.0 {
        for (k, e) in g.edges().iter().enumerate() {
            let raw: Vec<f64> = fit
                .alpha_minus
                .row(k)
                .iter()
                .zip(fit.alpha_plus.row(k))
                .map(|(m, pl)| (m - pl) / (2.0 * lambda_eff))
                .collect();
            let d: Vec<f64> = fit
                .beta_plus
                .row(k)
                .iter()
                .zip(fit.beta_minus.row(k))
                .map(|(a, b)| a - b)
                .collect();
            let z = project_subdifferential(&raw, &d, norm);
            for c in 0..p {
                resid.row_mut(e.plus)[c] += lambda_eff * z[c];
                resid.row_mut(e.minus)[c] -= lambda_eff * z[c];
            }
        }
    }
    let worst = resid.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(worst / nv as f64)
}

/// Nearest point of `∂φ(d)` to `z`.
fn project_subdifferential(z: &[f64], d: &[f64], norm: EdgeNorm) -> Vec<f64> {
    match norm {
        EdgeNorm::L1 => z
            .iter()
            .zip(d)
            .map(|(&zi, &di)| {
                if di > 0.0 {
                    1.0
                } else if di < 0.0 {
                    -1.0
                } else {
                    zi.clamp(-1.0, 1.0)
                }
            })
            .collect(),
        EdgeNorm::L2 => {
            let nd = crate::linalg::norm2(d);
            if nd > 0.0 {
                d.iter().map(|x| x / nd).collect()
            } else {
                let nz = crate::linalg::norm2(z);
                if nz <= 1.0 {
                    z.to_vec()
                } else {
                    z.iter().map(|x| x / nz).collect()
                }
            }
        }
    }
}
