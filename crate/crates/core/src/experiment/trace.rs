//! Learning-curve traces of the averaged iterate.

use std::io::Write;

use crate::error::Result;
use crate::fedadmm::{run_observed, SolverConfig};
use crate::graph::DeviceGraph;
use crate::linalg::ParamMatrix;
use crate::models::Dataset;
use crate::penalty::objective;

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub t: usize,
    pub objective: f64,
    /// `||θ̄_u(t) - target_u||²` per device; empty without a target.
    pub err_sq: Vec<f64>,
}

/// Runs the engine, recording `Θ̄(t)` every `every` iterations and at the end.
pub fn trace_run(
    g: &DeviceGraph,
    data: &Dataset,
    config: &SolverConfig,
    every: usize,
    target: Option<&ParamMatrix>,
) -> Result<Vec<TracePoint>> {
    let every = every.max(1);
    let mut points = Vec::new();
    let mut failure = None;
    run_observed(g, data, config, |state| {
        if failure.is_some() || (state.t % every != 0 && state.t != config.iterations) {
            return;
        }
        let bar = state.theta_bar();
        match objective(g, data, &bar, config.lambda, config.norm) {
            Ok(f) => {
                let err_sq = target
                    .map(|t| {
                        (0..bar.nrows())
                            .map(|u| {
                                bar.row(u)
                                    .iter()
                                    .zip(t.row(u))
                                    .map(|(a, b)| (a - b) * (a - b))
                                    .sum()
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                points.push(TracePoint {
                    t: state.t,
                    objective: f,
                    err_sq,
                });
            }
            Err(e) => failure = Some(e),
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(points),
    }
}

/// Rows `t,device,err_sq` (devices 1-based).
pub fn write_error_trace<W: Write>(points: &[TracePoint], mut w: W) -> Result<()> {
    writeln!(w, "t,device,err_sq")?;
    for p in points {
        for (u, e) in p.err_sq.iter().enumerate() {
            writeln!(w, "{},{},{}", p.t, u + 1, e)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `t,objective`.
pub fn write_objective_trace<W: Write>(points: &[TracePoint], mut w: W) -> Result<()> {
    writeln!(w, "t,objective")?;
    for p in points {
        writeln!(w, "{},{}", p.t, p.objective)?;
    }
    w.flush()?;
    Ok(())
}
