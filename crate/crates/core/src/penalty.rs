//! Edge norms, the fused penalty and the proximal maps used by the edge step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DeviceGraph;
use crate::linalg::{norm2, ParamMatrix};
use crate::models::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeNorm {
    #[default]
    L1,
    L2,
}

impl EdgeNorm {
    pub fn phi(&self, v: &[f64]) -> f64 {
        match self {
            EdgeNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            EdgeNorm::L2 => norm2(v),
        }
    }

    /// Dual norm of `phi` (ℓ∞ for ℓ1, ℓ2 for ℓ2).
    pub fn dual(&self, v: &[f64]) -> f64 {
        match self {
            EdgeNorm::L1 => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            EdgeNorm::L2 => norm2(v),
        }
    }

    /// `argmin_s τ φ(s) + ½||s - v||²`
    pub fn prox(&self, v: &[f64], tau: f64) -> Result<Vec<f64>> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prox threshold must be nonnegative, got {tau}"
            )));
        }
        Ok(match self {
            EdgeNorm::L1 => v.iter().map(|&x| soft_threshold(x, tau)).collect(),
            EdgeNorm::L2 => {
                let n = norm2(v);
                if n <= tau || n == 0.0 {
                    vec![0.0; v.len()]
                } else {
                    let s = 1.0 - tau / n;
                    v.iter().map(|x| s * x).collect()
                }
            }
        })
    }

    /// A subgradient of `phi` at `v`, taking 0 where `phi` is not differentiable.
    pub fn subgradient(&self, v: &[f64]) -> Vec<f64> {
        match self {
            EdgeNorm::L1 => v
                .iter()
                .map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
                .collect(),
            EdgeNorm::L2 => {
                let n = norm2(v);
                if n == 0.0 {
                    vec![0.0; v.len()]
                } else {
                    v.iter().map(|x| x / n).collect()
                }
            }
        }
    }
}

impl std::fmt::Display for EdgeNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EdgeNorm::L1 => "l1",
            EdgeNorm::L2 => "l2",
        })
    }
}

pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Joint minimizer of
/// `λ φ(β₁ - β₂) + (ρ/2)(||β₁ - a||² + ||β₂ - b||²)`.
///
/// The midpoint of `(a, b)` is kept and the difference is shrunk with the prox
/// of `φ` at threshold `2λ/ρ`.
pub fn edge_prox(
    a: &[f64],
    b: &[f64],
    lambda: f64,
    rho: f64,
    norm: EdgeNorm,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {}", a.len(), b.len())));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = norm.prox(&diff, 2.0 * lambda / rho)?;
    let mut first = Vec::with_capacity(a.len());
    let mut second = Vec::with_capacity(a.len());
    for ((x, y), si) in a.iter().zip(b).zip(&s) {
        let m = 0.5 * (x + y);
        first.push(m + 0.5 * si);
        second.push(m - 0.5 * si);
    }
    Ok((first, second))
}

/// `R(DΘ) = Σ_e φ(θ_{e+} - θ_{e-})`
pub fn fused_penalty(g: &DeviceGraph, theta: &ParamMatrix, norm: EdgeNorm) -> Result<f64> {
    if theta.nrows() != g.num_nodes() {
        return Err(Error::Shape(format!(
            "parameter matrix has {} rows for {} devices",
            theta.nrows(),
            g.num_nodes()
        )));
    }
    let mut diff = vec![0.0; theta.ncols()];
    let mut total = 0.0;
    for e in g.edges() {
        for ((d, x), y) in diff.iter_mut().zip(theta.row(e.plus)).zip(theta.row(e.minus)) {
            *d = x - y;
        }
        total += norm.phi(&diff);
    }
    Ok(total)
}

/// `F(Θ) = |V|⁻¹ Σ_u M̂_u(θ_u) + λ R(DΘ)`
pub fn objective(
    g: &DeviceGraph,
    data: &Dataset,
    theta: &ParamMatrix,
    lambda: f64,
    norm: EdgeNorm,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    if data.num_devices() != g.num_nodes() || theta.ncols() != data.dim() {
        return Err(Error::Shape(format!(
            "{} devices / dim {} against graph of {} nodes and Θ with {} columns",
            data.num_devices(),
            data.dim(),
            g.num_nodes(),
            theta.ncols()
        )));
    }
    let penalty = fused_penalty(g, theta, norm)?;
    let mut risk = 0.0;
    for (u, d) in data.devices.iter().enumerate() {
        risk += data.spec.empirical_risk(d, theta.row(u))?;
    }
    Ok(risk / g.num_nodes() as f64 + lambda * penalty)
}
