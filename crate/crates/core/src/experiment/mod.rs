//! Experiment orchestration: sweeps over synthetic or ingested data, λ
//! selection, result tables and learning-curve traces.

pub mod config;
pub mod cv;
mod ingest;
mod trace;

pub use config::{parse_config, parse_config_str, LambdaChoice, RunConfig};
pub use cv::{cross_validate, cross_validate_lambda, lambda_grid, lambda_max, CvConfig, CvResult};
pub use ingest::{accuracy_split, ingest_dataset, AccuracySummary, Ingested};
pub use trace::{trace_run, write_error_trace, write_objective_trace, TracePoint};

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::availability::run_with_availability;
use crate::baselines::{avg_sq_error, global_estimate, local_from_fits, subgradient_solver, Method, SubgradientConfig};
use crate::edge_select::{local_es_candidate_graph, select_edges};
use crate::error::{Error, Result};
use crate::fedadmm::{run, SolverConfig};
use crate::graph::DeviceGraph;
use crate::linalg::ParamMatrix;
use crate::models::{Dataset, LocalFit, NewtonOptions};
use crate::rng::{derive_seed, Domain};
use crate::synth::{generate, SynthConfig};

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    #[serde(rename = "V")]
    pub num_devices: usize,
    pub n: usize,
    #[serde(rename = "K")]
    pub clusters: usize,
    pub p: usize,
    pub rho_corrupt: f64,
    pub rep: usize,
    pub error: f64,
    pub lambda: f64,
    pub seed: u64,
    pub cell: usize,
    pub config_hash: String,
}

/// A point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub num_devices: usize,
    pub samples_per_device: usize,
    pub corruption: f64,
    pub lambda: LambdaChoice,
}

pub fn cells(cfg: &RunConfig) -> Vec<Cell> {
    let sw = &cfg.sweep;
    let mut out = Vec::new();
    for &v in &sw.num_devices {
        for &n in &sw.samples_per_device {
            for &c in &sw.corruption {
                for &l in &sw.lambda {
                    out.push(Cell {
                        index: out.len(),
                        num_devices: v,
                        samples_per_device: n,
                        corruption: c,
                        lambda: l,
                    });
                }
            }
        }
    }
    out
}

/// The inputs every method of one replication sees.
pub struct Problem {
    pub data: Dataset,
    pub graph: DeviceGraph,
    pub graph0: Option<DeviceGraph>,
    pub theta_star: Option<ParamMatrix>,
    pub clusters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum GraphKind {
    Given,
    Truth,
    Selected,
    AllPairs,
}

fn graph_kind(m: Method) -> Option<GraphKind> {
    match m {
        Method::Local | Method::Global => None,
        Method::Oracle => Some(GraphKind::Truth),
        Method::FedAdmm | Method::Gd | Method::Sgd => Some(GraphKind::Given),
        Method::FedAdmmEs => Some(GraphKind::Selected),
        Method::FedAdmmLocalEs => Some(GraphKind::AllPairs),
    }
}

/// Estimates from every requested method on one problem, with the `λ` used
/// (NaN for unpenalized methods).
pub fn run_methods(
    cfg: &RunConfig,
    problem: &Problem,
    lambda: LambdaChoice,
    seed: u64,
) -> Result<Vec<(Method, ParamMatrix, f64)>> {
    let data = &problem.data;
    let fits: Vec<LocalFit> = data.local_fits(&NewtonOptions::default())?;
    let solver = SolverConfig {
        seed: derive_seed(seed, Domain::MiniBatch, 0, 0),
        ..cfg.solver.clamped_to(data)
    };
    let mut graphs: HashMap<GraphKind, DeviceGraph> = HashMap::new();
    let mut lambdas: HashMap<GraphKind, f64> = HashMap::new();
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let Some(kind) = graph_kind(m) else {
            let est = match m {
                Method::Local => local_from_fits(&fits)?,
                _ => global_estimate(data)?,
            };
            out.push((m, est, f64::NAN));
            continue;
        };
        if !graphs.contains_key(&kind) {
            let g = match kind {
                GraphKind::Given => problem.graph.clone(),
                GraphKind::Truth => problem
                    .graph0
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("oracle needs the characteristic graph".into()))?,
                GraphKind::Selected => select_edges(&problem.graph, &fits, cfg.selection.alpha)?.selected,
                GraphKind::AllPairs => local_es_candidate_graph(&fits, cfg.selection.alpha)?.selected,
            };
            graphs.insert(kind, g);
        }
        let g = &graphs[&kind];
        let lam = match lambda {
            LambdaChoice::Value(v) => v,
            LambdaChoice::Keyword(_) => match lambdas.get(&kind) {
                Some(&l) => l,
                None => {
                    let cv_seed = derive_seed(seed, Domain::CrossValidation, kind as u64, 0);
                    let l = cross_validate(g, data, solver.norm, &cfg.cv, &solver, cv_seed)?.lambda;
                    lambdas.insert(kind, l);
                    l
                }
            },
        };
        let sc = SolverConfig { lambda: lam, ..solver };
        let est = match m {
            Method::Gd | Method::Sgd => {
                let sub = SubgradientConfig {
                    batch_size: (m == Method::Sgd).then(|| cfg.solver.batch_size.min(data.min_samples())),
                    seed: solver.seed,
                    iterations: cfg.solver.iterations,
                    ..cfg.subgradient
                };
                subgradient_solver(g, data, lam, solver.norm, &sub)?
            }
            _ => match &cfg.availability {
                Some(a) => run_with_availability(g, data, &sc, a.model(data.num_devices())?)?.0.theta_bar,
                None => run(g, data, &sc)?.theta_bar,
            },
        };
        out.push((m, est, lam));
    }
    Ok(out)
}

/// Builds the problem of one synthetic replication.
pub fn synth_problem(cfg: &RunConfig, cell: &Cell, seed: u64) -> Result<Problem> {
    let clusters = cfg.synth.as_ref().map_or(1, |s| s.clusters);
    let sc = SynthConfig {
        num_devices: cell.num_devices,
        clusters,
        dim: cfg.model.dim,
        samples_per_device: cell.samples_per_device,
        family: cfg.model.family,
        corruption: cell.corruption,
        sigma: cfg.model.sigma,
        seed,
    };
    let inst = generate(&sc)?;
    Ok(Problem {
        data: inst.dataset,
        graph: inst.graph,
        graph0: Some(inst.graph0),
        theta_star: Some(inst.theta_star),
        clusters,
    })
}

/// The problem of `(cell, rep)`: the ingested data when `data_dir` is set,
/// otherwise a synthetic draw with the sweep's seed for that pair.
pub fn load_problem(cfg: &RunConfig, cell_index: usize, rep: usize) -> Result<Problem> {
    if let Some(dir) = &cfg.data_dir {
        return ingested_problem(cfg, dir);
    }
    let all = cells(cfg);
    let cell = all.get(cell_index).ok_or_else(|| {
        Error::config("sweep", format!("cell {cell_index} out of range (have {})", all.len()))
    })?;
    synth_problem(cfg, cell, derive_seed(cfg.seed, Domain::Experiment, cell_index as u64, rep as u64))
}

fn ingested_problem(cfg: &RunConfig, dir: &Path) -> Result<Problem> {
    let ing = ingest_dataset(dir, &cfg.model_spec()?, cfg.min_samples)?;
    let graph = ing
        .graph
        .clone()
        .unwrap_or_else(|| DeviceGraph::empty(ing.dataset.num_devices()));
    let clusters = ing.graph0.as_ref().map_or(0, |g| g.num_components());
    Ok(Problem {
        data: ing.dataset,
        graph,
        graph0: ing.graph0,
        theta_star: ing.theta_star,
        clusters,
    })
}

fn cell_rows(cfg: &RunConfig, cell: &Cell, hash: &str, ingested: Option<&Problem>) -> Result<Vec<ResultRow>> {
    let reps = crate::par::map_indexed(cfg.replications, |rep| -> Result<Vec<ResultRow>> {
        let seed = derive_seed(cfg.seed, Domain::Experiment, cell.index as u64, rep as u64);
        let owned;
        let problem = match ingested {
            Some(p) => p,
            None => {
                owned = synth_problem(cfg, cell, seed)?;
                &owned
            }
        };
        let estimates = run_methods(cfg, problem, cell.lambda, seed)?;
        let d = &problem.data;
        estimates
            .into_iter()
            .map(|(m, est, lam)| {
                let error = match &problem.theta_star {
                    Some(t) => avg_sq_error(&est, t)?,
                    None => f64::NAN,
                };
                if !error.is_finite() && problem.theta_star.is_some() {
                    return Err(Error::NoConvergence {
                        iterations: cfg.solver.iterations,
                        residual: error,
                    });
                }
                Ok(ResultRow {
                    method: m.name().to_string(),
                    num_devices: d.num_devices(),
                    n: if ingested.is_some() { d.min_samples() } else { cell.samples_per_device },
                    clusters: problem.clusters,
                    p: d.dim(),
                    rho_corrupt: if ingested.is_some() { f64::NAN } else { cell.corruption },
                    rep,
                    error,
                    lambda: lam,
                    seed,
                    cell: cell.index,
                    config_hash: hash.to_string(),
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in reps {
        rows.extend(r?);
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub rows: Vec<ResultRow>,
    pub cells_run: usize,
    pub cells_skipped: usize,
    pub results_path: PathBuf,
}

fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every cell of the sweep, writing `cells/cell_<i>.csv` as each finishes
/// and `results.csv` at the end. Cells whose file already exists are reused.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let cell_dir = out.join("cells");
    fs::create_dir_all(&cell_dir)?;
    let hash = cfg.hash();
    fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let ingested = match &cfg.data_dir {
        Some(dir) => Some(ingested_problem(cfg, dir)?),
        None => None,
    };
    let all_cells: Vec<Cell> = match &ingested {
        Some(_) => cfg
            .sweep
            .lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| Cell {
                index: i,
                num_devices: 0,
                samples_per_device: 0,
                corruption: f64::NAN,
                lambda: l,
            })
            .collect(),
        None => cells(cfg),
    };
    let mut rows = Vec::new();
    let (mut run_count, mut skipped) = (0, 0);
    for cell in &all_cells {
        let path = cell_dir.join(format!("cell_{:04}.csv", cell.index));
        let cell_rows = if path.exists() {
            skipped += 1;
            read_rows(&path)?
        } else {
            run_count += 1;
            let r = cell_rows(cfg, cell, &hash, ingested.as_ref()).map_err(|e| Error::InCell {
                cell: cell.index,
                source: Box::new(e),
            })?;
            write_rows(&path, &r)?;
            r
        };
        rows.extend(cell_rows);
    }
    let results_path = out.join("results.csv");
    write_rows(&results_path, &rows)?;
    Ok(ExperimentSummary {
        rows,
        cells_run: run_count,
        cells_skipped: skipped,
        results_path,
    })
}

/// Mean and standard deviation of `error` per (cell, method), in first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<(usize, String, f64, f64, usize)> {
    let mut order: Vec<(usize, String)> = Vec::new();
    let mut acc: HashMap<(usize, String), Vec<f64>> = HashMap::new();
    for r in rows {
        let key = (r.cell, r.method.clone());
        if !acc.contains_key(&key) {
            order.push(key.clone());
        }
        acc.entry(key).or_default().push(r.error);
    }
    order
        .into_iter()
        .map(|key| {
            let v = &acc[&key];
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (key.0, key.1, mean, sd, v.len())
        })
        .collect()
}

pub fn write_summary<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "cell,method,mean_error,sd_error,reps")?;
    for (cell, m, mean, sd, n) in summarize(rows) {
        writeln!(w, "{cell},{m},{mean},{sd},{n}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_file(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_summary(rows, File::create(path)?)
}
