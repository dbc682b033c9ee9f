//! Random device availability with inverse-probability-weighted node steps.
//!
//! In every superstep a subset of devices is online. Online devices take the
//! usual node step with the gradient divided by their availability
//! probability; offline devices take the consensus-only step, computed by the
//! coordinator without touching their data. Edge steps then run as usual.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedadmm::{superstep, NodeMode, SolverConfig, SolverOutput, SolverState};
use crate::graph::DeviceGraph;
use crate::models::{Dataset, DeviceData, ModelSpec};
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvailabilityMode {
    /// `R_i(t) ~ Bernoulli(p_i)` independently across devices.
    #[default]
    Independent,
    /// One `U ~ Uniform(0, 1)` per iteration, `R_i = 1{U <= p_i}`.
    SharedCoin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityModel {
    p: Vec<f64>,
    pub known: bool,
    pub mode: AvailabilityMode,
    online_counts: Vec<u64>,
    observed: u64,
}

impl AvailabilityModel {
    pub fn new(p: Vec<f64>, known: bool, mode: AvailabilityMode) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidArgument("availability needs at least one device".into()));
        }
        if let Some(bad) = p.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "availability probability {bad} outside (0, 1]"
            )));
        }
        let n = p.len();
        Ok(Self {
            p,
            known,
            mode,
            online_counts: vec![0; n],
            observed: 0,
        })
    }

    pub fn uniform(num_devices: usize, p: f64, known: bool, mode: AvailabilityMode) -> Result<Self> {
        Self::new(vec![p; num_devices], known, mode)
    }

    pub fn num_devices(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// `p₀ = min_i p_i`
    pub fn p_min(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn observed(&self) -> u64 {
        self.observed
    }

    /// Adds one iteration's indicators to the history.
    pub fn record(&mut self, online: &[bool]) {
        for (c, &r) in self.online_counts.iter_mut().zip(online) {
            *c += u64::from(r);
        }
        self.observed += 1;
    }

    /// Running frequencies `t⁻¹ Σ_{s<=t} R_i(s)`; all ones before any observation.
    pub fn estimate_p(&self) -> Vec<f64> {
        estimate_p(&self.online_counts, self.observed)
    }

    /// Weights used for the gradient of device `i`: the true `p_i` when known,
    /// otherwise the running frequency floored at `1/(t+1)`.
    pub fn weights(&self) -> Vec<f64> {
        if self.known {
            return self.p.clone();
        }
        let floor = 1.0 / (self.observed + 1) as f64;
        self.estimate_p().into_iter().map(|x| x.max(floor)).collect()
    }
}

/// `p̂_i = counts_i / t`, or 1 when `t = 0`.
pub fn estimate_p(online_counts: &[u64], t: u64) -> Vec<f64> {
    if t == 0 {
        return vec![1.0; online_counts.len()];
    }
    online_counts.iter().map(|&c| c as f64 / t as f64).collect()
}

/// Online indicators `R_i(t)` for iteration `t`, drawn from a stream keyed by `(seed, t)`.
pub fn sample_availability(model: &AvailabilityModel, t: usize, seed: u64) -> Vec<bool> {
    let mut rng = stream(seed, Domain::Availability, t as u64, 0);
    sample_with(model, &mut rng)
}

pub fn sample_with<R: Rng + ?Sized>(model: &AvailabilityModel, rng: &mut R) -> Vec<bool> {
    match model.mode {
        AvailabilityMode::Independent => model.p.iter().map(|&p| rng.random::<f64>() < p).collect(),
        AvailabilityMode::SharedCoin => {
            let u: f64 = rng.random();
            model.p.iter().map(|&p| u <= p).collect()
        }
    }
}

/// Node step of device `u` under availability: IPW gradient step when online,
/// consensus-only step otherwise.
#[allow(clippy::too_many_arguments)]
pub fn ipw_node_step(
    u: usize,
    online: bool,
    state: &SolverState,
    g: &DeviceGraph,
    spec: &ModelSpec,
    data_u: &DeviceData,
    config: &SolverConfig,
    p_u: f64,
) -> Result<Vec<f64>> {
    if !(p_u > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "availability probability of device {} must be positive",
            u + 1
        )));
    }
    let mode = node_mode(online, p_u);
    match config.variant {
        crate::fedadmm::StepVariant::SgdStep => {
            crate::fedadmm::node_step(u, state, g, spec, data_u, config, mode)
        }
        crate::fedadmm::StepVariant::ProximalStep => {
            crate::fedadmm::proximal_node_step(u, state, g, spec, data_u, config, mode)
        }
    }
}

fn node_mode(online: bool, p_u: f64) -> NodeMode {
    if online {
        NodeMode::Online {
            grad_scale: 1.0 / p_u,
        }
    } else {
        NodeMode::Offline
    }
}

/// Runs the availability-aware schedule and returns the averaged iterate and
/// the model with its observation history.
pub fn run_with_availability(
    g: &DeviceGraph,
    data: &Dataset,
    config: &SolverConfig,
    mut model: AvailabilityModel,
) -> Result<(SolverOutput, AvailabilityModel)> {
    if g.num_nodes() != data.num_devices() {
        return Err(Error::NodeCountMismatch(g.num_nodes(), data.num_devices()));
    }
    if model.num_devices() != g.num_nodes() {
        return Err(Error::NodeCountMismatch(model.num_devices(), g.num_nodes()));
    }
    config.validate(data)?;
    let mut state = SolverState::zeros(g.num_nodes(), g.num_edges(), data.dim(), config.log_messages);
    for t in 0..config.iterations {
        let online = sample_availability(&model, t, config.seed);
        let weights = model.weights();
        let modes: Vec<NodeMode> = online
            .iter()
            .zip(&weights)
            .map(|(&r, &w)| node_mode(r, w))
            .collect();
        superstep(&mut state, g, data, config, &modes, true)?;
        model.record(&online);
    }
    Ok((
        SolverOutput {
            theta_bar: state.theta_bar(),
            state,
        },
        model,
    ))
}
