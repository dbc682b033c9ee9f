//! Run configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::availability::{AvailabilityMode, AvailabilityModel};
use crate::baselines::{Method, SubgradientConfig};
use crate::error::{Error, Result};
use crate::fedadmm::SolverConfig;
use crate::models::{Family, ModelSpec};

use super::cv::CvConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub family: Family,
    pub dim: usize,
    #[serde(default = "one")]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

/// Synthetic data; device count, sample size and corruption come from the sweep axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthBlock {
    pub clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probabilities {
    Scalar(f64),
    PerDevice(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvailabilityBlock {
    #[serde(default)]
    pub mode: AvailabilityMode,
    pub p: Probabilities,
    #[serde(default = "yes")]
    pub known: bool,
}

fn yes() -> bool {
    true
}

impl AvailabilityBlock {
    pub fn model(&self, num_devices: usize) -> Result<AvailabilityModel> {
        let p = match &self.p {
            Probabilities::Scalar(x) => vec![*x; num_devices],
            Probabilities::PerDevice(v) => {
                if v.len() != num_devices {
                    return Err(Error::config(
                        "availability.p",
                        format!("{} probabilities for {num_devices} devices", v.len()),
                    ));
                }
                v.clone()
            }
        };
        AvailabilityModel::new(p, self.known, self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionBlock {
    pub alpha: f64,
}

impl Default for SelectionBlock {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Value(f64),
    Keyword(LambdaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaKeyword {
    Cv,
}

impl LambdaChoice {
    pub fn label(&self) -> String {
        match self {
            LambdaChoice::Value(v) => format!("{v}"),
            LambdaChoice::Keyword(LambdaKeyword::Cv) => "cv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub num_devices: Vec<usize>,
    pub samples_per_device: Vec<usize>,
    pub corruption: Vec<f64>,
    pub lambda: Vec<LambdaChoice>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            num_devices: vec![20],
            samples_per_device: vec![100],
            corruption: vec![0.0],
            lambda: vec![LambdaChoice::Keyword(LambdaKeyword::Cv)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub synth: Option<SynthBlock>,
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Devices with fewer samples are dropped when loading `data_dir`.
    #[serde(default)]
    pub min_samples: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub availability: Option<AvailabilityBlock>,
    #[serde(default)]
    pub selection: SelectionBlock,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub subgradient: SubgradientConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default = "one_usize")]
    pub replications: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_methods() -> Vec<Method> {
    vec![
        Method::Local,
        Method::Global,
        Method::Oracle,
        Method::FedAdmm,
        Method::FedAdmmEs,
    ]
}

fn one_usize() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::with_sigma(self.model.family, self.model.dim, self.model.sigma)
            .map_err(|e| Error::config("model", e.to_string()))
    }

    /// Semantic checks; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        match (&self.synth, &self.data_dir) {
            (Some(_), Some(_)) => {
                return Err(Error::config("synth", "`synth` and `data_dir` are mutually exclusive"))
            }
            (None, None) => return Err(Error::config("synth", "one of `synth` or `data_dir` is required")),
            _ => {}
        }
        self.model_spec()?;
        if let Some(s) = &self.synth {
            if s.clusters == 0 {
                return Err(Error::config("synth.clusters", "must be positive"));
            }
        }
        let sw = &self.sweep;
        for (name, empty) in [
            ("sweep.num_devices", sw.num_devices.is_empty()),
            ("sweep.samples_per_device", sw.samples_per_device.is_empty()),
            ("sweep.corruption", sw.corruption.is_empty()),
            ("sweep.lambda", sw.lambda.is_empty()),
        ] {
            if empty {
                return Err(Error::config(name, "axis must be nonempty"));
            }
        }
        for (i, &r) in sw.corruption.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(format!("sweep.corruption[{i}]"), format!("{r} outside [0, 1]")));
            }
        }
        for (i, &v) in sw.num_devices.iter().enumerate() {
            let k = self.synth.as_ref().map_or(1, |s| s.clusters);
            if v == 0 || v < k {
                return Err(Error::config(
                    format!("sweep.num_devices[{i}]"),
                    format!("{v} devices cannot hold {k} clusters"),
                ));
            }
        }
        for (i, &n) in sw.samples_per_device.iter().enumerate() {
            if n == 0 {
                return Err(Error::config(format!("sweep.samples_per_device[{i}]"), "must be positive"));
            }
        }
        for (i, l) in sw.lambda.iter().enumerate() {
            if let LambdaChoice::Value(v) = l {
                if !(*v >= 0.0) {
                    return Err(Error::config(format!("sweep.lambda[{i}]"), format!("{v} is negative")));
                }
            }
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "list must be nonempty"));
        }
        let s = &self.solver;
        if !(s.rho > 0.0) {
            return Err(Error::config("solver.rho", "must be positive"));
        }
        if !(s.kappa > 0.0) {
            return Err(Error::config("solver.kappa", "must be positive"));
        }
        if s.batch_size == 0 {
            return Err(Error::config("solver.batch_size", "must be positive"));
        }
        if s.iterations == 0 {
            return Err(Error::config("solver.iterations", "must be positive"));
        }
        if !(s.lambda >= 0.0) {
            return Err(Error::config("solver.lambda", "must be nonnegative"));
        }
        if !(s.projection_radius > 0.0) {
            return Err(Error::config("solver.projection_radius", "must be positive"));
        }
        if !(self.selection.alpha > 0.0 && self.selection.alpha < 1.0) {
            return Err(Error::config("selection.alpha", "must lie in (0, 1)"));
        }
        if self.cv.folds < 2 {
            return Err(Error::config("cv.folds", "need at least 2 folds"));
        }
        if self.cv.grid_size == 0 {
            return Err(Error::config("cv.grid_size", "must be positive"));
        }
        if !(self.cv.min_ratio > 0.0 && self.cv.min_ratio <= 1.0) {
            return Err(Error::config("cv.min_ratio", "must lie in (0, 1]"));
        }
        if !(self.cv.tol > 0.0) {
            return Err(Error::config("cv.tol", "must be positive"));
        }
        if !(self.subgradient.c > 0.0) {
            return Err(Error::config("subgradient.c", "must be positive"));
        }
        if let Some(a) = &self.availability {
            let bad = match &a.p {
                Probabilities::Scalar(x) => !(*x > 0.0 && *x <= 1.0),
                Probabilities::PerDevice(v) => v.is_empty() || v.iter().any(|x| !(*x > 0.0 && *x <= 1.0)),
            };
            if bad {
                return Err(Error::config("availability.p", "probabilities must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 prefix of the canonical JSON serialization. The output
    /// directory is left out so a moved run keeps its identity.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&canon).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect::<String>()[..16].to_string()
    }
}

/// Parses and validates a JSON config. `data_dir` is resolved against the
/// directory containing the file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let mut cfg = parse_config_str(&text)?;
    if let (Some(dir), Some(parent)) = (&cfg.data_dir, path.parent()) {
        if dir.is_relative() {
            cfg.data_dir = Some(parent.join(dir));
        }
    }
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::from("<root>") } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}
