//! Loss families, their gradients and Hessians, and per-device local fits.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, dot, dvector, norm2, spd_inverse, sym_eigenvalues};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `||z - θ||² / (2σ²)`
    Mean,
    /// `(y - θᵀx)² / 2`
    Linear,
    /// `ζ(θᵀx) - y θᵀx`, `ζ(t) = log(1 + eᵗ)`
    Logistic,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Mean => "mean",
            Family::Linear => "linear",
            Family::Logistic => "logistic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub dim: usize,
    /// Noise scale of the mean family; ignored otherwise.
    pub sigma: f64,
}

impl ModelSpec {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        Self::with_sigma(family, dim, 1.0)
    }

    pub fn with_sigma(family: Family, dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { family, dim, sigma })
    }

    fn inv_var(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }

    pub fn loss(&self, sample: Sample<'_>, theta: &[f64]) -> Result<f64> {
        self.check_sample(sample, theta)?;
        Ok(match sample {
            Sample::Point(z) => {
                let sq: f64 = z.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
                0.5 * sq * self.inv_var()
            }
            Sample::Labeled { x, y } => {
                let eta = dot(theta, x);
                match self.family {
                    Family::Logistic => softplus(eta) - y * eta,
                    _ => 0.5 * (y - eta) * (y - eta),
                }
            }
        })
    }

    /// `ψ(z; θ)`, the gradient of the loss in `θ`.
    pub fn grad_psi(&self, sample: Sample<'_>, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_sample(sample, theta)?;
        let mut g = vec![0.0; self.dim];
        self.accumulate_grad(sample, theta, 1.0, &mut g);
        Ok(g)
    }

    /// `out += weight * ψ(z; θ)`; shapes are assumed consistent.
    fn accumulate_grad(&self, sample: Sample<'_>, theta: &[f64], weight: f64, out: &mut [f64]) {
        match sample {
            Sample::Point(z) => {
                let w = weight * self.inv_var();
                for ((o, t), zi) in out.iter_mut().zip(theta).zip(z) {
                    *o += w * (t - zi);
                }
            }
            Sample::Labeled { x, y } => {
                let eta = dot(theta, x);
                let r = match self.family {
                    Family::Logistic => sigmoid(eta) - y,
                    _ => eta - y,
                };
                let w = weight * r;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += w * xi;
                }
            }
        }
    }

    fn check_sample(&self, sample: Sample<'_>, theta: &[f64]) -> Result<()> {
        let (len, kind_ok) = match sample {
            Sample::Point(z) => (z.len(), self.family == Family::Mean),
            Sample::Labeled { x, .. } => (x.len(), self.family != Family::Mean),
        };
        if !kind_ok {
            return Err(Error::Shape(format!(
                "sample kind does not match the {} family",
                self.family
            )));
        }
        if len != self.dim || theta.len() != self.dim {
            return Err(Error::Shape(format!(
                "expected dimension {}, got sample {len} and theta {}",
                self.dim,
                theta.len()
            )));
        }
        Ok(())
    }

    fn check_data(&self, data: &DeviceData, theta: &[f64]) -> Result<()> {
        if data.dim != self.dim || theta.len() != self.dim {
            return Err(Error::Shape(format!(
                "expected dimension {}, got data {} and theta {}",
                self.dim,
                data.dim,
                theta.len()
            )));
        }
        if data.responses.is_some() == (self.family == Family::Mean) {
            return Err(Error::Shape(format!(
                "device data layout does not match the {} family",
                self.family
            )));
        }
        Ok(())
    }

    /// `M̂(θ) = n⁻¹ Σ_k m(z_k; θ)`
    pub fn empirical_risk(&self, data: &DeviceData, theta: &[f64]) -> Result<f64> {
        self.check_data(data, theta)?;
        let total: f64 = (0..data.len())
            .map(|k| self.loss(data.sample(k), theta).expect("checked"))
            .sum();
        Ok(total / data.len() as f64)
    }

    /// Mean of `ψ` over `indices` (all samples when `None`).
    pub fn batch_gradient(
        &self,
        data: &DeviceData,
        theta: &[f64],
        indices: Option<&[usize]>,
    ) -> Result<Vec<f64>> {
        self.check_data(data, theta)?;
        let mut g = vec![0.0; self.dim];
        match indices {
            Some(idx) => {
                if idx.is_empty() {
                    return Err(Error::InvalidArgument("empty mini-batch".into()));
                }
                let w = 1.0 / idx.len() as f64;
                for &k in idx {
                    self.accumulate_grad(data.sample(k), theta, w, &mut g);
                }
            }
            None => {
                let w = 1.0 / data.len() as f64;
                for k in 0..data.len() {
                    self.accumulate_grad(data.sample(k), theta, w, &mut g);
                }
            }
        }
        Ok(g)
    }

    /// `Ĥ(θ) = n⁻¹ Σ_k ∂ψ(z_k; θ)/∂θ`
    pub fn empirical_hessian(&self, data: &DeviceData, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_data(data, theta)?;
        let p = self.dim;
        if self.family == Family::Mean {
            return Ok(DMatrix::identity(p, p) * self.inv_var());
        }
        let mut h = DMatrix::zeros(p, p);
        for k in 0..data.len() {
            let x = data.row(k);
            let w = match self.family {
                Family::Logistic => {
                    let s = sigmoid(dot(theta, x));
                    s * (1.0 - s)
                }
                _ => 1.0,
            };
            for i in 0..p {
                let wi = w * x[i];
                for j in 0..=i {
                    h[(i, j)] += wi * x[j];
                }
            }
        }
        let n = data.len() as f64;
        for i in 0..p {
            for j in 0..=i {
                let v = h[(i, j)] / n;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }

    /// Extreme eigenvalues `(λ_min, λ_max)` of `Ĥ(θ)`.
    pub fn hessian_eigen_diagnostics(&self, data: &DeviceData, theta: &[f64]) -> Result<(f64, f64)> {
        let vals = sym_eigenvalues(&self.empirical_hessian(data, theta)?);
        Ok((vals[0], vals[vals.len() - 1]))
    }

    /// Unpenalized per-device M-estimator with its estimated asymptotic variance.
    pub fn local_estimate(&self, data: &DeviceData, opts: &NewtonOptions) -> Result<LocalFit> {
        let zero = vec![0.0; self.dim];
        self.check_data(data, &zero)?;
        let (theta_hat, converged, iterations) = match self.family {
            Family::Mean => (data.column_means(), true, 0),
            Family::Linear => (self.least_squares(data)?, true, 0),
            Family::Logistic => self.newton(data, zero, opts)?,
        };
        let h = self.empirical_hessian(data, &theta_hat)?;
        let omega_hat = spd_inverse(&(h * data.len() as f64))?;
        Ok(LocalFit {
            theta_hat,
            omega_hat,
            converged,
            iterations,
        })
    }

    fn least_squares(&self, data: &DeviceData) -> Result<Vec<f64>> {
        let p = self.dim;
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = vec![0.0; p];
        let y = data.responses.as_ref().expect("checked");
        for k in 0..data.len() {
            let x = data.row(k);
            for i in 0..p {
                xty[i] += x[i] * y[k];
                for j in 0..=i {
                    xtx[(i, j)] += x[i] * x[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                xtx[(j, i)] = xtx[(i, j)];
            }
        }
        match xtx.clone().cholesky() {
            Some(c) => Ok(c.solve(&dvector(&xty)).iter().copied().collect()),
            None => {
                let vals = sym_eigenvalues(&xtx);
                let condition = vals[vals.len() - 1] / vals[0].abs().max(f64::MIN_POSITIVE);
                Err(Error::Singular { condition })
            }
        }
    }

    /// Damped Newton iteration on `M̂` starting from `start`.
    ///
    /// Returns `(θ, converged, iterations)`; on non-convergence the best iterate
    /// is returned with `converged = false`.
    pub fn newton(
        &self,
        data: &DeviceData,
        start: Vec<f64>,
        opts: &NewtonOptions,
    ) -> Result<(Vec<f64>, bool, usize)> {
        let mut theta = start;
        let mut risk = self.empirical_risk(data, &theta)?;
        for it in 0..opts.max_iter {
            let g = self.batch_gradient(data, &theta, None)?;
            if norm2(&g) <= opts.tol {
                return Ok((theta, true, it));
            }
            let h = self.empirical_hessian(data, &theta)?;
            let chol = match cholesky_with_jitter(&h) {
                Ok(c) => c,
                Err(_) => return Ok((theta, false, it)),
            };
            let step = chol.solve(&dvector(&g));
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
                let trial_risk = self.empirical_risk(data, &trial)?;
                if trial_risk <= risk {
                    theta = trial;
                    risk = trial_risk;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                let g = self.batch_gradient(data, &theta, None)?;
                return Ok((theta, norm2(&g) <= opts.tol, it + 1));
            }
        }
        let g = self.batch_gradient(data, &theta, None)?;
        Ok((theta, norm2(&g) <= opts.tol, opts.max_iter))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            max_halvings: 30,
        }
    }
}

/// One observation.
#[derive(Debug, Clone, Copy)]
pub enum Sample<'a> {
    /// A `p`-vector `z` (mean family).
    Point(&'a [f64]),
    /// Covariates and response (linear and logistic families).
    Labeled { x: &'a [f64], y: f64 },
}

#[derive(Debug, Clone)]
pub struct LocalFit {
    pub theta_hat: Vec<f64>,
    /// `(n Ĥ(θ̂))⁻¹`
    pub omega_hat: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Samples held by one device. Rows of `features` are the covariates `x_k`,
/// or the observations `z_k` for the mean family (which has no responses).
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceData {
    dim: usize,
    features: Vec<f64>,
    responses: Option<Vec<f64>>,
}

impl DeviceData {
    pub fn points(dim: usize, features: Vec<f64>) -> Result<Self> {
        Self::build(dim, features, None)
    }

    pub fn labeled(dim: usize, features: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        Self::build(dim, features, Some(responses))
    }

    fn build(dim: usize, features: Vec<f64>, responses: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || features.is_empty() || features.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} feature values do not form rows of width {dim}",
                features.len()
            )));
        }
        if let Some(y) = &responses {
            if y.len() * dim != features.len() {
                return Err(Error::Shape(format!(
                    "{} responses for {} rows",
                    y.len(),
                    features.len() / dim
                )));
            }
        }
        Ok(Self {
            dim,
            features,
            responses,
        })
    }

    /// Checks the layout against `spec` and, for logistic data, that `y ∈ {0, 1}`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        spec.check_data(self, &vec![0.0; spec.dim])?;
        if spec.family == Family::Logistic {
            let y = self.responses.as_ref().expect("checked");
            if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "logistic response {bad} is not 0 or 1"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.features[k * self.dim..(k + 1) * self.dim]
    }

    pub fn responses(&self) -> Option<&[f64]> {
        self.responses.as_deref()
    }

    pub fn sample(&self, k: usize) -> Sample<'_> {
        match &self.responses {
            Some(y) => Sample::Labeled {
                x: self.row(k),
                y: y[k],
            },
            None => Sample::Point(self.row(k)),
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for k in 0..self.len() {
            for (mi, v) in m.iter_mut().zip(self.row(k)) {
                *mi += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &k in indices {
            features.extend_from_slice(self.row(k));
        }
        let responses = self
            .responses
            .as_ref()
            .map(|y| indices.iter().map(|&k| y[k]).collect());
        Self::build(self.dim, features, responses)
    }

    /// Stacks several devices' samples into one.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a DeviceData>) -> Result<Self> {
        let mut iter = parts.into_iter().peekable();
        let first = iter
            .peek()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let dim = first.dim;
        let labeled = first.responses.is_some();
        let mut features = Vec::new();
        let mut responses = labeled.then(Vec::new);
        for d in iter {
            if d.dim != dim || d.responses.is_some() != labeled {
                return Err(Error::Shape("inconsistent device layouts".into()));
            }
            features.extend_from_slice(&d.features);
            if let (Some(r), Some(y)) = (&mut responses, &d.responses) {
                r.extend_from_slice(y);
            }
        }
        Self::build(dim, features, responses)
    }

    /// Reads a per-device CSV with header `y,x1..xp` (labeled) or `z1..zp` (points).
    pub fn read_csv<R: Read>(reader: R, spec: &ModelSpec, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let expected = csv_header(spec);
        if header != expected {
            return Err(Error::Parse {
                source_name: source_name.to_string(),
                line: 1,
                message: format!(
                    "header `{}` does not match `{}`",
                    header.join(","),
                    expected.join(",")
                ),
            });
        }
        let labeled = spec.family != Family::Mean;
        let mut features = Vec::new();
        let mut responses = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut vals = Vec::with_capacity(rec.len());
            for f in rec.iter() {
                vals.push(f.parse::<f64>().map_err(|e| Error::Parse {
                    source_name: source_name.to_string(),
                    line: i + 2,
                    message: format!("`{f}`: {e}"),
                })?);
            }
            if labeled {
                responses.push(vals[0]);
                features.extend_from_slice(&vals[1..]);
            } else {
                features.extend_from_slice(&vals);
            }
        }
        if features.is_empty() {
            return Err(Error::Parse {
                source_name: source_name.to_string(),
                line: 2,
                message: "device has no samples".into(),
            });
        }
        let data = Self::build(spec.dim, features, labeled.then_some(responses))?;
        data.validate(spec).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(data)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let spec_header = match self.responses {
            Some(_) => csv_header_for(true, self.dim),
            None => csv_header_for(false, self.dim),
        };
        writeln!(w, "{}", spec_header.join(","))?;
        for k in 0..self.len() {
            let mut fields: Vec<String> = Vec::with_capacity(self.dim + 1);
            if let Some(y) = &self.responses {
                fields.push(format!("{}", y[k]));
            }
            fields.extend(self.row(k).iter().map(|v| format!("{v}")));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn csv_header(spec: &ModelSpec) -> Vec<String> {
    csv_header_for(spec.family != Family::Mean, spec.dim)
}

fn csv_header_for(labeled: bool, dim: usize) -> Vec<String> {
    if labeled {
        std::iter::once("y".to_string())
            .chain((1..=dim).map(|i| format!("x{i}")))
            .collect()
    } else {
        (1..=dim).map(|i| format!("z{i}")).collect()
    }
}

/// A shared model family together with every device's samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: ModelSpec,
    pub devices: Vec<DeviceData>,
}

impl Dataset {
    pub fn new(spec: ModelSpec, devices: Vec<DeviceData>) -> Result<Self> {
        for (u, d) in devices.iter().enumerate() {
            d.validate(&spec)
                .map_err(|e| Error::InvalidArgument(format!("device {}: {e}", u + 1)))?;
        }
        Ok(Self { spec, devices })
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn min_samples(&self) -> usize {
        self.devices.iter().map(DeviceData::len).min().unwrap_or(0)
    }

    /// Local fits for every device.
    pub fn local_fits(&self, opts: &NewtonOptions) -> Result<Vec<LocalFit>> {
        crate::par::map_indexed(self.devices.len(), |u| {
            self.spec.local_estimate(&self.devices[u], opts)
        })
        .into_iter()
        .collect()
    }
}

/// `ζ(t) = log(1 + eᵗ)`, stable for large `|t|`.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `ζ'(t)`
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Projects `theta` onto the Euclidean ball of radius `radius` (no-op for infinity).
pub fn project_ball(theta: &mut [f64], radius: f64) {
    if radius.is_finite() {
        let n = norm2(theta);
        if n > radius {
            let s = radius / n;
            theta.iter_mut().for_each(|v| *v *= s);
        }
    }
}
