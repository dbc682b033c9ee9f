//! Decentralized stochastic ADMM.
//!
//! Each device keeps `θ_u`; each undirected edge `e = (e+, e-)` carries two
//! auxiliary copies `β_{e+e-}`, `β_{e-e+}` and two multipliers. One iteration is
//! a superstep: every device takes a mini-batch gradient step on the augmented
//! Lagrangian (node phase), then every edge recomputes its copies by the joint
//! prox of the edge norm and ascends its multipliers (edge phase). The edge
//! phase for `e` runs on `e+`.
//!
//! Node steps use the gradient of the unscaled local risk `M̂_u`, so the
//! iteration targets `|V| · F`; the edge phase therefore shrinks with
//! `λ|V|` in place of `λ` and the fixed point is the minimizer of `F`.

mod audit;
mod reference;

pub use audit::{message_audit, Violation};
pub use reference::{kkt_residual, reference_minimizer, reference_minimizer_warm, ReferenceFit, ReferenceOptions};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DeviceGraph, Side};
use crate::linalg::ParamMatrix;
use crate::models::{project_ball, Dataset, DeviceData, ModelSpec};
use crate::penalty::{edge_prox, EdgeNorm};
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepVariant {
    /// Explicit stochastic gradient step on the augmented Lagrangian.
    #[default]
    SgdStep,
    /// Linearized proximal step with step size `κ/t`.
    ProximalStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho: f64,
    /// Penalty level on the scale of `F`.
    pub lambda: f64,
    /// Learning-rate constant: `η(t) = κ/t`.
    pub kappa: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub norm: EdgeNorm,
    pub seed: u64,
    /// Radius of the parameter ball; infinite disables projection.
    pub projection_radius: f64,
    pub variant: StepVariant,
    pub log_messages: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            lambda: 0.0,
            kappa: 1.0,
            batch_size: 10,
            iterations: 1000,
            norm: EdgeNorm::L1,
            seed: 0,
            projection_radius: f64::INFINITY,
            variant: StepVariant::SgdStep,
            log_messages: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if self.batch_size == 0 || self.batch_size > data.min_samples() {
            return Err(Error::InvalidArgument(format!(
                "batch size {} must lie in 1..={}",
                self.batch_size,
                data.min_samples()
            )));
        }
        if !(self.projection_radius > 0.0) {
            return Err(Error::InvalidArgument("projection radius must be positive".into()));
        }
        Ok(())
    }

    /// `η` used while computing iterate `t + 1` from iterate `t` (`t` from 0).
    pub fn step_size(&self, t: usize) -> f64 {
        self.kappa / (t + 1) as f64
    }

    /// Copy with `batch_size` clamped to the smallest device.
    pub fn clamped_to(&self, data: &Dataset) -> Self {
        let mut c = *self;
        c.batch_size = c.batch_size.min(data.min_samples()).max(1);
        c
    }
}

/// A participant in the message log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Device(usize),
    /// Central machine used when devices may be unavailable.
    Coordinator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// `θ_u(t+1)`
    Theta,
    /// `(β, α)` slots of an edge.
    EdgeSlots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub sender: Endpoint,
    pub receiver: Endpoint,
    pub payload: Payload,
    pub t: usize,
}

/// Iterates of the solver. Edge-indexed matrices follow the graph's edge order;
/// the `plus` slot belongs to `e+` and the `minus` slot to `e-`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub theta: ParamMatrix,
    pub beta_plus: ParamMatrix,
    pub beta_minus: ParamMatrix,
    pub alpha_plus: ParamMatrix,
    pub alpha_minus: ParamMatrix,
    pub t: usize,
    /// `Σ_{s<t} Θ(s)`
    pub theta_sum: ParamMatrix,
    pub message_log: Option<Vec<Message>>,
}

impl SolverState {
    /// `Θ(0) = B(0) = α(0) = 0`.
    pub fn zeros(num_nodes: usize, num_edges: usize, dim: usize, log_messages: bool) -> Self {
        Self {
            theta: ParamMatrix::zeros(num_nodes, dim),
            beta_plus: ParamMatrix::zeros(num_edges, dim),
            beta_minus: ParamMatrix::zeros(num_edges, dim),
            alpha_plus: ParamMatrix::zeros(num_edges, dim),
            alpha_minus: ParamMatrix::zeros(num_edges, dim),
            t: 0,
            theta_sum: ParamMatrix::zeros(num_nodes, dim),
            message_log: log_messages.then(Vec::new),
        }
    }

    /// `(β_uj, α_uj)` for edge `k` as seen from `side`.
    pub fn slot(&self, k: usize, side: Side) -> (&[f64], &[f64]) {
        match side {
            Side::Plus => (self.beta_plus.row(k), self.alpha_plus.row(k)),
            Side::Minus => (self.beta_minus.row(k), self.alpha_minus.row(k)),
        }
    }

    /// `T⁻¹ Σ_{s<T} Θ(s)`; the zero matrix before the first iteration.
    pub fn theta_bar(&self) -> ParamMatrix {
        if self.t == 0 {
            return self.theta_sum.clone();
        }
        self.theta_sum.scaled(1.0 / self.t as f64)
    }

    fn log(&mut self, sender: Endpoint, receiver: Endpoint, payload: Payload) {
        let t = self.t;
        if let Some(log) = &mut self.message_log {
            log.push(Message {
                sender,
                receiver,
                payload,
                t,
            });
        }
    }
}

/// How a device takes part in one node phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeMode {
    /// Uses a mini-batch gradient scaled by `grad_scale`.
    Online { grad_scale: f64 },
    /// Consensus-only update computed without data access.
    Offline,
}

/// Draws the mini-batch of device `u` for iteration `t`: all samples when the
/// batch covers the device, otherwise a uniform subset without replacement.
pub fn sample_batch(n: usize, batch_size: usize, seed: u64, u: usize, t: usize) -> Option<Vec<usize>> {
    if batch_size >= n {
        return None;
    }
    let mut rng = stream(seed, Domain::MiniBatch, u as u64, t as u64);
    Some(index::sample(&mut rng, n, batch_size).into_vec())
}

/// `θ - η {s·g + ρ Σ_j (θ - β_j - α_j/ρ)}`; the gradient term is dropped when `grad` is `None`.
pub fn consensus_sgd_update(
    theta: &[f64],
    grad: Option<(&[f64], f64)>,
    slots: &[(&[f64], &[f64])],
    rho: f64,
    eta: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(theta.len());
    for c in 0..theta.len() {
        let mut acc = 0.0;
        for (beta, alpha) in slots {
            acc += theta[c] - beta[c] - alpha[c] / rho;
        }
        let g = match grad {
            Some((g, scale)) => g[c] * scale,
            None => 0.0,
        };
        out.push(theta[c] - eta * (g + rho * acc));
    }
    out
}

/// Minimizer of `θᵀg + (ρ/2) Σ_j ||θ - β_j - α_j/ρ||² + ||θ - θ(t)||² / (2η̃)`.
pub fn consensus_prox_update(
    theta: &[f64],
    grad: Option<(&[f64], f64)>,
    slots: &[(&[f64], &[f64])],
    rho: f64,
    eta_tilde: f64,
) -> Result<Vec<f64>> {
    if !(eta_tilde > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "proximal step size must be positive, got {eta_tilde}"
        )));
    }
    let denom = 1.0 / eta_tilde + rho * slots.len() as f64;
    let mut out = Vec::with_capacity(theta.len());
    for c in 0..theta.len() {
        let mut acc = 0.0;
        for (beta, alpha) in slots {
            acc += beta[c] + alpha[c] / rho;
        }
        let g = match grad {
            Some((g, scale)) => g[c] * scale,
            None => 0.0,
        };
        out.push((theta[c] / eta_tilde + rho * acc - g) / denom);
    }
    Ok(out)
}

fn incident_slots<'a>(state: &'a SolverState, g: &DeviceGraph, u: usize) -> Vec<(&'a [f64], &'a [f64])> {
    g.incident(u)
        .iter()
        .map(|&(k, side)| state.slot(k, side))
        .collect()
}

/// New `θ_u(t+1)` by the explicit stochastic step. Reads only device `u`'s data
/// and the slots of edges incident to `u`.
pub fn node_step(
    u: usize,
    state: &SolverState,
    g: &DeviceGraph,
    spec: &ModelSpec,
    data_u: &DeviceData,
    config: &SolverConfig,
    mode: NodeMode,
) -> Result<Vec<f64>> {
    node_update(u, state, g, spec, data_u, config, mode, StepVariant::SgdStep)
}

/// New `θ_u(t+1)` by the linearized proximal step with `η̃ = κ/(t+1)`.
pub fn proximal_node_step(
    u: usize,
    state: &SolverState,
    g: &DeviceGraph,
    spec: &ModelSpec,
    data_u: &DeviceData,
    config: &SolverConfig,
    mode: NodeMode,
) -> Result<Vec<f64>> {
    node_update(u, state, g, spec, data_u, config, mode, StepVariant::ProximalStep)
}

#[allow(clippy::too_many_arguments)]
fn node_update(
    u: usize,
    state: &SolverState,
    g: &DeviceGraph,
    spec: &ModelSpec,
    data_u: &DeviceData,
    config: &SolverConfig,
    mode: NodeMode,
    variant: StepVariant,
) -> Result<Vec<f64>> {
    if config.batch_size == 0 || config.batch_size > data_u.len() {
        return Err(Error::InvalidArgument(format!(
            "batch size {} exceeds the {} samples of device {}",
            config.batch_size,
            data_u.len(),
            u + 1
        )));
    }
    let theta = state.theta.row(u);
    let grad = match mode {
        NodeMode::Online { grad_scale } => {
            let batch = sample_batch(data_u.len(), config.batch_size, config.seed, u, state.t);
            Some((spec.batch_gradient(data_u, theta, batch.as_deref())?, grad_scale))
        }
        NodeMode::Offline => None,
    };
    let grad_ref = grad.as_ref().map(|(g, s)| (g.as_slice(), *s));
    let slots = incident_slots(state, g, u);
    let eta = config.step_size(state.t);
    let mut next = match variant {
        StepVariant::SgdStep => consensus_sgd_update(theta, grad_ref, &slots, config.rho, eta),
        StepVariant::ProximalStep => consensus_prox_update(theta, grad_ref, &slots, config.rho, eta)?,
    };
    project_ball(&mut next, config.projection_radius);
    Ok(next)
}

/// Updated `(β_+, β_-, α_+, α_-)` for edge `k`, given `Θ(t+1)` already in `state.theta`.
pub fn edge_step(
    k: usize,
    state: &SolverState,
    g: &DeviceGraph,
    config: &SolverConfig,
) -> Result<[Vec<f64>; 4]> {
    let e = g.edges()[k];
    let rho = config.rho;
    let th_plus = state.theta.row(e.plus);
    let th_minus = state.theta.row(e.minus);
    let a: Vec<f64> = th_plus
        .iter()
        .zip(state.alpha_plus.row(k))
        .map(|(t, al)| t - al / rho)
        .collect();
    let b: Vec<f64> = th_minus
        .iter()
        .zip(state.alpha_minus.row(k))
        .map(|(t, al)| t - al / rho)
        .collect();
    let lambda_eff = config.lambda * g.num_nodes() as f64;
    let (mut beta_p, mut beta_m) = edge_prox(&a, &b, lambda_eff, rho, config.norm)?;
    project_ball(&mut beta_p, config.projection_radius);
    project_ball(&mut beta_m, config.projection_radius);
    let alpha_p = dual_ascent(state.alpha_plus.row(k), th_plus, &beta_p, rho);
    let alpha_m = dual_ascent(state.alpha_minus.row(k), th_minus, &beta_m, rho);
    Ok([beta_p, beta_m, alpha_p, alpha_m])
}

/// `α - ρ(θ - β)`
fn dual_ascent(alpha: &[f64], theta: &[f64], beta: &[f64], rho: f64) -> Vec<f64> {
    alpha
        .iter()
        .zip(theta)
        .zip(beta)
        .map(|((a, t), b)| a - rho * (t - b))
        .collect()
}

/// One node phase followed by one edge phase. `modes[u]` selects how device `u`
/// updates; `coordinated` routes all traffic through the central machine.
pub fn superstep(
    state: &mut SolverState,
    g: &DeviceGraph,
    data: &Dataset,
    config: &SolverConfig,
    modes: &[NodeMode],
    coordinated: bool,
) -> Result<()> {
    let n = g.num_nodes();
    state.theta_sum.add_assign(&state.theta);

    let new_rows = {
        let st: &SolverState = state;
        crate::par::map_indexed(n, |u| {
            node_update(u, st, g, &data.spec, &data.devices[u], config, modes[u], config.variant)
        })
    };
    for u in 0..n {
        if coordinated {
            if matches!(modes[u], NodeMode::Online { .. }) {
                state.log(Endpoint::Coordinator, Endpoint::Device(u), Payload::EdgeSlots);
            }
        } else {
            for &(k, side) in g.incident(u) {
                if side == Side::Minus {
                    let owner = g.edges()[k].plus;
                    state.log(Endpoint::Device(owner), Endpoint::Device(u), Payload::EdgeSlots);
                }
            }
        }
    }
    for (u, row) in new_rows.into_iter().enumerate() {
        state.theta.set_row(u, &row?);
        if coordinated && matches!(modes[u], NodeMode::Online { .. }) {
            state.log(Endpoint::Device(u), Endpoint::Coordinator, Payload::Theta);
        }
    }

    let edge_updates = {
        let st: &SolverState = state;
        crate::par::map_indexed(g.num_edges(), |k| edge_step(k, st, g, config))
    };
    for (k, upd) in edge_updates.into_iter().enumerate() {
        let [bp, bm, ap, am] = upd?;
        state.beta_plus.set_row(k, &bp);
        state.beta_minus.set_row(k, &bm);
        state.alpha_plus.set_row(k, &ap);
        state.alpha_minus.set_row(k, &am);
        if !coordinated {
            let e = g.edges()[k];
            state.log(Endpoint::Device(e.minus), Endpoint::Device(e.plus), Payload::Theta);
            state.log(Endpoint::Device(e.plus), Endpoint::Device(e.minus), Payload::EdgeSlots);
        }
    }
    state.t += 1;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub theta_bar: ParamMatrix,
    pub state: SolverState,
}

fn check_problem(g: &DeviceGraph, data: &Dataset) -> Result<()> {
    if g.num_nodes() != data.num_devices() {
        return Err(Error::NodeCountMismatch(g.num_nodes(), data.num_devices()));
    }
    Ok(())
}

/// Runs `config.iterations` supersteps from the zero initialization and returns
/// the running average of `Θ(0), …, Θ(T-1)`.
pub fn run(g: &DeviceGraph, data: &Dataset, config: &SolverConfig) -> Result<SolverOutput> {
    run_observed(g, data, config, |_| {})
}

/// As [`run`], calling `observe` with the state after every superstep.
pub fn run_observed(
    g: &DeviceGraph,
    data: &Dataset,
    config: &SolverConfig,
    mut observe: impl FnMut(&SolverState),
) -> Result<SolverOutput> {
    check_problem(g, data)?;
    config.validate(data)?;
    let mut state = SolverState::zeros(g.num_nodes(), g.num_edges(), data.dim(), config.log_messages);
    let modes = vec![NodeMode::Online { grad_scale: 1.0 }; g.num_nodes()];
    for _ in 0..config.iterations {
        superstep(&mut state, g, data, config, &modes, false)?;
        observe(&state);
    }
    Ok(SolverOutput {
        theta_bar: state.theta_bar(),
        state,
    })
}
