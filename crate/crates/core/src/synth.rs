//! Synthetic heterogeneous federations: evenly sized clusters sharing a
//! Gaussian parameter vector, Gaussian designs, and a corrupted copy of the
//! characteristic graph handed to the estimators.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Clustering, DeviceGraph};
use crate::linalg::{dot, ParamMatrix};
use crate::models::{sigmoid, Dataset, DeviceData, Family, ModelSpec};
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_devices: usize,
    pub clusters: usize,
    pub dim: usize,
    pub samples_per_device: usize,
    pub family: Family,
    pub corruption: f64,
    /// Noise scale of the mean family.
    pub sigma: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 || self.clusters == 0 || self.clusters > self.num_devices {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= clusters ({}) <= devices ({})",
                self.clusters, self.num_devices
            )));
        }
        if self.samples_per_device == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument(
                "samples per device and dimension must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.corruption) {
            return Err(Error::InvalidArgument(format!(
                "corruption {} outside [0, 1]",
                self.corruption
            )));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::with_sigma(self.family, self.dim, self.sigma)
    }
}

/// Contiguous blocks of size `⌊|V|/K⌋` or `⌈|V|/K⌉`; the larger blocks take
/// the lowest labels.
pub fn gen_clusters(num_devices: usize, clusters: usize) -> Result<Clustering> {
    if clusters == 0 || clusters > num_devices {
        return Err(Error::InvalidArgument(format!(
            "cannot split {num_devices} devices into {clusters} clusters"
        )));
    }
    let base = num_devices / clusters;
    let extra = num_devices % clusters;
    let mut labels = Vec::with_capacity(num_devices);
    for c in 0..clusters {
        let size = base + usize::from(c < extra);
        labels.extend(std::iter::repeat_n(c, size));
    }
    Clustering::new(labels)
}

/// `K` vectors drawn i.i.d. from `N(0, p^{-1/2} I_p)`.
pub fn gen_parameters<R: Rng + ?Sized>(clusters: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let sd = (dim as f64).powf(-0.25);
    (0..clusters)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(rng);
                    sd * e
                })
                .collect::<Vec<f64>>()
        })
        .collect()
}

/// `n` samples from the model with parameter `theta`. `x ~ N(0, I)`; linear
/// noise is `N(0, 1)`; mean-family noise is `N(0, noise_sd² I)`.
pub fn gen_device_data<R: Rng + ?Sized>(
    family: Family,
    theta: &[f64],
    n: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<DeviceData> {
    let p = theta.len();
    let mut features = Vec::with_capacity(n * p);
    match family {
        Family::Mean => {
            for _ in 0..n {
                for t in theta {
                    let e: f64 = StandardNormal.sample(rng);
                    features.push(t + noise_sd * e);
                }
            }
            DeviceData::points(p, features)
        }
        Family::Linear | Family::Logistic => {
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let start = features.len();
                for _ in 0..p {
                    features.push(StandardNormal.sample(rng));
                }
                let eta = dot(&features[start..], theta);
                y.push(match family {
                    Family::Linear => {
                        let e: f64 = StandardNormal.sample(rng);
                        eta + e
                    }
                    _ => f64::from(u8::from(rng.random::<f64>() < sigmoid(eta))),
                });
            }
            DeviceData::labeled(p, features, y)
        }
    }
}

/// Everything one synthetic replication produces.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub clustering: Clustering,
    /// Characteristic graph.
    pub graph0: DeviceGraph,
    /// Corrupted surrogate graph.
    pub graph: DeviceGraph,
    pub theta_star: ParamMatrix,
    pub dataset: Dataset,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthInstance> {
    cfg.validate()?;
    let spec = cfg.model_spec()?;
    let clustering = gen_clusters(cfg.num_devices, cfg.clusters)?;
    let params = gen_parameters(
        cfg.clusters,
        cfg.dim,
        &mut stream(cfg.seed, Domain::ClusterParams, 0, 0),
    );
    let rows: Vec<Vec<f64>> = clustering
        .labels()
        .iter()
        .map(|&c| params[c].clone())
        .collect();
    let theta_star = ParamMatrix::from_rows(&rows)?;
    let devices = crate::par::map_indexed(cfg.num_devices, |u| {
        let mut rng = stream(cfg.seed, Domain::DeviceSamples, u as u64, 0);
        gen_device_data(
            cfg.family,
            theta_star.row(u),
            cfg.samples_per_device,
            cfg.sigma,
            &mut rng,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let graph0 = clustering.characteristic_graph();
    let graph = graph0.corrupt(cfg.corruption, &mut stream(cfg.seed, Domain::Corruption, 0, 0))?;
    Ok(SynthInstance {
        clustering,
        graph0,
        graph,
        theta_star,
        dataset: Dataset::new(spec, devices)?,
    })
}

impl SynthInstance {
    /// Writes `graph.txt`, `graph0.txt`, `theta_star.csv` and `device_<u>.csv`
    /// (1-based `u`) into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.graph
            .write_text(BufWriter::new(File::create(dir.join("graph.txt"))?))?;
        self.graph0
            .write_text(BufWriter::new(File::create(dir.join("graph0.txt"))?))?;
        write_param_csv(&self.theta_star, &dir.join("theta_star.csv"))?;
        for (u, d) in self.dataset.devices.iter().enumerate() {
            d.write_csv(BufWriter::new(File::create(
                dir.join(format!("device_{}.csv", u + 1)),
            )?))?;
        }
        Ok(())
    }
}

/// CSV with header `device,theta1..thetap`, devices 1-based.
pub fn write_param_csv(theta: &ParamMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once("device".to_string())
        .chain((1..=theta.ncols()).map(|j| format!("theta{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (u, row) in theta.rows_iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{}", u + 1, vals.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_param_csv(path: &Path) -> Result<ParamMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    source_name: path.display().to_string(),
                    line: i + 2,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    ParamMatrix::from_rows(&rows)
}
