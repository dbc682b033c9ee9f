//! Three entry points for the static page in `www/`.

use wasm_bindgen::prelude::*;

use fedgraph::baselines::{avg_sq_error, local_all};
use fedgraph::edge_select::chi2_quantile;
use fedgraph::fedadmm::{run_observed, SolverConfig};
use fedgraph::graph::graph_fidelity;
use fedgraph::penalty::edge_prox;
use fedgraph::synth::{generate, SynthConfig};
use fedgraph::{EdgeNorm, Family};

fn js_err(e: fedgraph::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn parse_norm(norm: &str) -> Result<EdgeNorm, JsError> {
    match norm {
        "l1" => Ok(EdgeNorm::L1),
        "l2" => Ok(EdgeNorm::L2),
        other => Err(JsError::new(&format!("unknown norm {other:?}"))),
    }
}

/// Edge proximal step on a pair of points. Returns `[first..., second...]`.
#[wasm_bindgen(js_name = edgeProx)]
pub fn edge_prox_pair(a: Vec<f64>, b: Vec<f64>, lambda: f64, rho: f64, norm: &str) -> Result<Vec<f64>, JsError> {
    let (x, y) = edge_prox(&a, &b, lambda, rho, parse_norm(norm)?).map_err(js_err)?;
    Ok(x.into_iter().chain(y).collect())
}

/// Rejection threshold of the per-edge test for a `dim`-parameter model.
#[wasm_bindgen(js_name = edgeThreshold)]
pub fn edge_threshold(dim: u32, alpha: f64) -> Result<f64, JsError> {
    chi2_quantile(dim as usize, alpha).map_err(js_err)
}

/// Draws a clustered linear-regression instance, runs the engine and returns
/// JSON: `{fidelity, edges, local_error, final_error, curve: [[t, err], ...]}`.
#[wasm_bindgen(js_name = simulate)]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    devices: u32,
    clusters: u32,
    samples: u32,
    corruption: f64,
    lambda: f64,
    iterations: u32,
    seed: u64,
) -> Result<String, JsError> {
    let inst = generate(&SynthConfig {
        num_devices: devices as usize,
        clusters: clusters as usize,
        dim: 2,
        samples_per_device: samples as usize,
        family: Family::Linear,
        corruption,
        sigma: 1.0,
        seed,
    })
    .map_err(js_err)?;
    let config = SolverConfig {
        lambda,
        iterations: iterations as usize,
        seed,
        ..SolverConfig::default()
    }
    .clamped_to(&inst.dataset);
    let every = (iterations as usize / 100).max(1);
    let mut curve = Vec::new();
    let out = run_observed(&inst.graph, &inst.dataset, &config, |st| {
        if st.t % every == 0 {
            if let Ok(e) = avg_sq_error(&st.theta_bar(), &inst.theta_star) {
                curve.push([st.t as f64, e]);
            }
        }
    })
    .map_err(js_err)?;
    let local = local_all(&inst.dataset).map_err(js_err)?;
    let report = serde_json::json!({
        "fidelity": graph_fidelity(&inst.graph, &inst.graph0).map_err(js_err)?,
        "edges": inst.graph.num_edges(),
        "local_error": avg_sq_error(&local, &inst.theta_star).map_err(js_err)?,
        "final_error": avg_sq_error(&out.theta_bar, &inst.theta_star).map_err(js_err)?,
        "curve": curve,
    });
    Ok(report.to_string())
}
