//! Comparison estimators and the evaluation metric.

use serde::{Deserialize, Serialize};

use crate::edge_select::{local_es_candidate_graph, select_edges, EdgeTestReport};
use crate::error::{Error, Result};
use crate::fedadmm::{run, SolverConfig};
use crate::graph::DeviceGraph;
use crate::linalg::ParamMatrix;
use crate::models::{Dataset, DeviceData, LocalFit, NewtonOptions};
use crate::penalty::EdgeNorm;
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Local,
    Global,
    Oracle,
    FedAdmm,
    FedAdmmEs,
    FedAdmmLocalEs,
    Gd,
    Sgd,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Local,
        Method::Global,
        Method::Oracle,
        Method::FedAdmm,
        Method::FedAdmmEs,
        Method::FedAdmmLocalEs,
        Method::Gd,
        Method::Sgd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Local => "local",
            Method::Global => "global",
            Method::Oracle => "oracle",
            Method::FedAdmm => "fed_admm",
            Method::FedAdmmEs => "fed_admm_es",
            Method::FedAdmmLocalEs => "fed_admm_local_es",
            Method::Gd => "gd",
            Method::Sgd => "sgd",
        }
    }

    /// Whether the method minimizes the penalized objective and so needs `λ`.
    pub fn is_penalized(&self) -> bool {
        !matches!(self, Method::Local | Method::Global)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

fn stack(rows: Vec<Vec<f64>>) -> Result<ParamMatrix> {
    ParamMatrix::from_rows(&rows)
}

/// Per-device unpenalized estimates.
pub fn local_all(data: &Dataset) -> Result<ParamMatrix> {
    let fits = data.local_fits(&NewtonOptions::default())?;
    stack(fits.into_iter().map(|f| f.theta_hat).collect())
}

pub fn local_from_fits(fits: &[LocalFit]) -> Result<ParamMatrix> {
    stack(fits.iter().map(|f| f.theta_hat.clone()).collect())
}

/// One estimate from the pooled samples of all devices, replicated to every row.
pub fn global_estimate(data: &Dataset) -> Result<ParamMatrix> {
    let pooled = DeviceData::concat(&data.devices)?;
    let fit = data.spec.local_estimate(&pooled, &NewtonOptions::default())?;
    Ok(ParamMatrix::replicate(data.num_devices(), &fit.theta_hat))
}

/// The engine run on the characteristic graph.
pub fn oracle_estimate(data: &Dataset, g0: &DeviceGraph, config: &SolverConfig) -> Result<ParamMatrix> {
    fed_admm(g0, data, config)
}

pub fn fed_admm(g: &DeviceGraph, data: &Dataset, config: &SolverConfig) -> Result<ParamMatrix> {
    Ok(run(g, data, config)?.theta_bar)
}

/// Tests the edges of `g`, then runs the engine on the kept edges.
pub fn fed_admm_es(
    g: &DeviceGraph,
    data: &Dataset,
    fits: &[LocalFit],
    alpha: f64,
    config: &SolverConfig,
) -> Result<(ParamMatrix, EdgeTestReport)> {
    let report = select_edges(g, fits, alpha)?;
    Ok((fed_admm(&report.selected, data, config)?, report))
}

/// Tests all device pairs, then runs the engine on the kept pairs.
pub fn fed_admm_local_es(
    data: &Dataset,
    fits: &[LocalFit],
    alpha: f64,
    config: &SolverConfig,
) -> Result<(ParamMatrix, EdgeTestReport)> {
    let report = local_es_candidate_graph(fits, alpha)?;
    Ok((fed_admm(&report.selected, data, config)?, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubgradientConfig {
    /// Step `c/√t`.
    pub c: f64,
    pub iterations: usize,
    /// Mini-batch size; `None` uses every sample (GD).
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        Self {
            c: 0.5,
            iterations: 1000,
            batch_size: None,
            seed: 0,
        }
    }
}

/// Subgradient descent on `|V|·F` from zero, with step `c/√t`.
/// Returns the last iterate.
pub fn subgradient_solver(
    g: &DeviceGraph,
    data: &Dataset,
    lambda: f64,
    norm: EdgeNorm,
    config: &SubgradientConfig,
) -> Result<ParamMatrix> {
    subgradient_observed(g, data, lambda, norm, config, |_, _| {})
}

/// As [`subgradient_solver`], calling `observe(t, Θ(t))` after each step.
pub fn subgradient_observed(
    g: &DeviceGraph,
    data: &Dataset,
    lambda: f64,
    norm: EdgeNorm,
    config: &SubgradientConfig,
    mut observe: impl FnMut(usize, &ParamMatrix),
) -> Result<ParamMatrix> {
    if g.num_nodes() != data.num_devices() {
        return Err(Error::NodeCountMismatch(g.num_nodes(), data.num_devices()));
    }
    if !(config.c > 0.0) || !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("need c > 0 and lambda >= 0".into()));
    }
    if let Some(b) = config.batch_size {
        if b == 0 || b > data.min_samples() {
            return Err(Error::InvalidArgument(format!(
                "batch size {b} must lie in 1..={}",
                data.min_samples()
            )));
        }
    }
    let nv = g.num_nodes();
    let p = data.dim();
    let lambda_eff = lambda * nv as f64;
    let mut theta = ParamMatrix::zeros(nv, p);
    for t in 1..=config.iterations {
        let mut step = ParamMatrix::zeros(nv, p);
        for u in 0..nv {
            let d = &data.devices[u];
            let batch = config.batch_size.filter(|&b| b < d.len()).map(|b| {
                let mut rng = stream(config.seed, Domain::MiniBatch, u as u64, t as u64);
                rand::seq::index::sample(&mut rng, d.len(), b).into_vec()
            });
            let grad = data.spec.batch_gradient(d, theta.row(u), batch.as_deref())?;
            step.set_row(u, &grad);
        }
        if lambda_eff > 0.0 {
            let mut diff = vec![0.0; p];
            for e in g.edges() {
                for ((d, a), b) in diff.iter_mut().zip(theta.row(e.plus)).zip(theta.row(e.minus)) {
                    *d = a - b;
                }
                let z = norm.subgradient(&diff);
                for c in 0..p {
                    step.row_mut(e.plus)[c] += lambda_eff * z[c];
                    step.row_mut(e.minus)[c] -= lambda_eff * z[c];
                }
            }
        }
        let eta = config.c / (t as f64).sqrt();
        for (x, s) in theta.as_mut_slice().iter_mut().zip(step.as_slice()) {
            *x -= eta * s;
        }
        observe(t, &theta);
    }
    Ok(theta)
}

/// `||Θ̂ - Θ*||²_F / |V|`
pub fn avg_sq_error(estimate: &ParamMatrix, truth: &ParamMatrix) -> Result<f64> {
    if estimate.nrows() != truth.nrows() || estimate.ncols() != truth.ncols() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            estimate.nrows(),
            estimate.ncols(),
            truth.nrows(),
            truth.ncols()
        )));
    }
    if truth.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(estimate.dist_sq(truth) / truth.nrows() as f64)
}
