//! Loading a directory of per-device CSV files, and the repeated train/test
//! evaluation used for real data.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::baselines::Method;
use crate::error::{Error, Result};
use crate::graph::DeviceGraph;
use crate::linalg::{dot, ParamMatrix};
use crate::models::{Dataset, DeviceData, Family, ModelSpec};
use crate::rng::{stream, Domain};
use crate::synth::read_param_csv;

use super::{run_methods, LambdaChoice, Problem, RunConfig};

/// Devices read from a directory, in natural file-name order.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    /// File stem of each retained device.
    pub names: Vec<String>,
    /// `(file stem, sample count)` of devices below the minimum.
    pub excluded: Vec<(String, usize)>,
    /// `graph.txt`, restricted to retained devices.
    pub graph: Option<DeviceGraph>,
    /// `graph0.txt`, restricted to retained devices.
    pub graph0: Option<DeviceGraph>,
    /// `theta_star.csv`, restricted to retained devices.
    pub theta_star: Option<ParamMatrix>,
}

/// Splits a name into text and number runs so `device_10` sorts after `device_9`.
fn natural_key(name: &str) -> Vec<(String, u128)> {
    let mut out = Vec::new();
    let mut text = String::new();
    let mut digits = String::new();
    for ch in name.chars() {
        if ch.is_ascii_digit() {
            digits.push(ch);
        } else {
            if !digits.is_empty() {
                out.push((std::mem::take(&mut text), digits.parse().unwrap_or(u128::MAX)));
                digits.clear();
            }
            text.push(ch);
        }
    }
    out.push((text, digits.parse().unwrap_or(0)));
    out
}

const RESERVED: [&str; 1] = ["theta_star.csv"];

/// Reads every `*.csv` in `dir` (except `theta_star.csv`) as one device.
/// Devices with fewer than `min_samples` rows are dropped and listed in
/// `excluded`. Optional `graph.txt`, `graph0.txt` and `theta_star.csv` refer to
/// devices by their 1-based position among all device files.
pub fn ingest_dataset(dir: &Path, spec: &ModelSpec, min_samples: usize) -> Result<Ingested> {
    let mut files: Vec<(String, std::path::PathBuf)> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            !RESERVED.contains(&name)
        })
        .map(|p| (p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string(), p))
        .collect();
    files.sort_by_key(|(name, _)| natural_key(name));
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no device files in {}", dir.display())));
    }
    let mut devices = Vec::new();
    let mut names = Vec::new();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (i, (name, path)) in files.iter().enumerate() {
        let d = DeviceData::read_csv(BufReader::new(File::open(path)?), spec, &path.display().to_string())?;
        if d.len() < min_samples {
            excluded.push((name.clone(), d.len()));
            continue;
        }
        devices.push(d);
        names.push(name.clone());
        kept.push(i);
    }
    if devices.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "every device in {} has fewer than {min_samples} samples",
            dir.display()
        )));
    }
    let read_graph = |file: &str| -> Result<Option<DeviceGraph>> {
        let path = dir.join(file);
        if !path.exists() {
            return Ok(None);
        }
        let g = DeviceGraph::read_text(BufReader::new(File::open(&path)?), &path.display().to_string())?;
        if g.num_nodes() != files.len() {
            return Err(Error::NodeCountMismatch(g.num_nodes(), files.len()));
        }
        Ok(Some(g.induced(&kept)?))
    };
    let graph = read_graph("graph.txt")?;
    let graph0 = read_graph("graph0.txt")?;
    let theta_path = dir.join("theta_star.csv");
    let theta_star = if theta_path.exists() {
        let all = read_param_csv(&theta_path)?;
        if all.nrows() != files.len() || all.ncols() != spec.dim {
            return Err(Error::Shape(format!(
                "theta_star.csv is {}x{}, expected {}x{}",
                all.nrows(),
                all.ncols(),
                files.len(),
                spec.dim
            )));
        }
        let rows: Vec<Vec<f64>> = kept.iter().map(|&i| all.row(i).to_vec()).collect();
        Some(ParamMatrix::from_rows(&rows)?)
    } else {
        None
    };
    Ok(Ingested {
        dataset: Dataset::new(*spec, devices)?,
        names,
        excluded,
        graph,
        graph0,
        theta_star,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracySummary {
    pub method: Method,
    /// `accuracy` for logistic data, `test_loss` otherwise.
    pub metric: &'static str,
    pub mean: f64,
    pub sd: f64,
}

fn test_score(spec: &ModelSpec, test: &[DeviceData], theta: &ParamMatrix) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (u, d) in test.iter().enumerate() {
        for k in 0..d.len() {
            total += match spec.family {
                Family::Logistic => {
                    let y = d.responses().expect("labeled")[k];
                    let pred = f64::from(u8::from(dot(d.row(k), theta.row(u)) > 0.0));
                    f64::from(u8::from(pred == y))
                }
                _ => spec.loss(d.sample(k), theta.row(u))?,
            };
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

/// Repeated random 2/3 train, 1/3 test splits within every device. Methods
/// are fitted on the training parts and scored on the held-out parts.
pub fn accuracy_split(
    cfg: &RunConfig,
    data: &Dataset,
    graph: &DeviceGraph,
    repeats: usize,
    seed: u64,
) -> Result<Vec<AccuracySummary>> {
    if data.min_samples() < 3 {
        return Err(Error::InvalidArgument("every device needs at least 3 samples to split".into()));
    }
    let mut run_cfg = cfg.clone();
    run_cfg.methods.retain(|m| *m != Method::Oracle);
    let lambda = cfg.sweep.lambda.first().copied().unwrap_or(LambdaChoice::Value(cfg.solver.lambda));
    let per_rep = crate::par::map_indexed(repeats, |rep| -> Result<Vec<f64>> {
        let mut train = Vec::with_capacity(data.num_devices());
        let mut test = Vec::with_capacity(data.num_devices());
        for (u, d) in data.devices.iter().enumerate() {
            let mut idx: Vec<usize> = (0..d.len()).collect();
            idx.shuffle(&mut stream(seed, Domain::Split, u as u64, rep as u64));
            let cut = (2 * d.len()).div_ceil(3);
            train.push(d.subset(&idx[..cut])?);
            test.push(d.subset(&idx[cut..])?);
        }
        let problem = Problem {
            data: Dataset::new(data.spec, train)?,
            graph: graph.clone(),
            graph0: None,
            theta_star: None,
            clusters: 0,
        };
        let rep_seed = crate::rng::derive_seed(seed, Domain::Experiment, 0, rep as u64);
        run_methods(&run_cfg, &problem, lambda, rep_seed)?
            .into_iter()
            .map(|(_, est, _)| test_score(&data.spec, &test, &est))
            .collect()
    });
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); run_cfg.methods.len()];
    for rep in per_rep {
        for (s, v) in scores.iter_mut().zip(rep?) {
            s.push(v);
        }
    }
    let metric = if data.spec.family == Family::Logistic { "accuracy" } else { "test_loss" };
    Ok(run_cfg
        .methods
        .iter()
        .zip(scores)
        .map(|(&method, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            AccuracySummary { method, metric, mean, sd }
        })
        .collect())
}
