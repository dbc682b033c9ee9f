//! K-fold cross-validation of the penalty level.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedadmm::{reference_minimizer_warm, run, ReferenceFit, ReferenceOptions, SolverConfig};
use crate::graph::DeviceGraph;
use crate::linalg::{psd_pinv_solve, ParamMatrix};
use crate::models::{Dataset, DeviceData, NewtonOptions};
use crate::penalty::EdgeNorm;
use crate::rng::{stream, Domain};

/// Largest instance fitted with the reference solver; larger ones use the engine.
pub const REFERENCE_MAX_DEVICES: usize = 50;
pub const REFERENCE_MAX_DIM: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub grid_size: usize,
    /// Smallest grid value as a fraction of `λ_max`.
    pub min_ratio: f64,
    /// Residual tolerance of the reference fits.
    pub tol: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            grid_size: 10,
            min_ratio: 1e-4,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda: f64,
    pub grid: Vec<f64>,
    /// Mean held-out loss per grid value.
    pub scores: Vec<f64>,
}

/// `λ` above which the minimizer is constant on every connected component of `g`.
///
/// At the per-component pooled fit the device gradients `G` sum to zero on each
/// component; `Z = D L⁺ G` then certifies consensus for any `λ|V| >= max_e φ*(Z_e)`.
pub fn lambda_max(g: &DeviceGraph, data: &Dataset, norm: EdgeNorm) -> Result<f64> {
    if g.num_edges() == 0 {
        return Ok(0.0);
    }
    let nv = g.num_nodes();
    let p = data.dim();
    let comps = g.connected_components();
    let mut grads = ParamMatrix::zeros(nv, p);
    for c in 0..comps.num_clusters() {
        let members = comps.members(c);
        let pooled = DeviceData::concat(members.iter().map(|&u| &data.devices[u]))?;
        let fit = data.spec.local_estimate(&pooled, &NewtonOptions::default())?;
        for &u in &members {
            let gu = data.spec.batch_gradient(&data.devices[u], &fit.theta_hat, None)?;
            grads.set_row(u, &gu);
        }
    }
    let w = psd_pinv_solve(&g.laplacian(), &grads.to_dmatrix(), 1e-10);
    let z = g.incidence_matrix() * w;
    let worst = (0..z.nrows())
        .map(|k| {
            let row: Vec<f64> = z.row(k).iter().copied().collect();
            norm.dual(&row)
        })
        .fold(0.0f64, f64::max);
    Ok(worst / nv as f64)
}

/// `size` log-spaced values from `min_ratio·λ_max` to `λ_max`, ascending.
pub fn lambda_grid(lambda_max: f64, size: usize, min_ratio: f64) -> Vec<f64> {
    if size == 0 || !(lambda_max > 0.0) {
        return vec![0.0];
    }
    if size == 1 {
        return vec![lambda_max];
    }
    let lo = (lambda_max * min_ratio).ln();
    let hi = lambda_max.ln();
    (0..size)
        .map(|i| (lo + (hi - lo) * i as f64 / (size - 1) as f64).exp())
        .collect()
}

/// Per-device random split of sample indices into `folds` groups.
pub fn fold_assignment(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if data.min_samples() < folds {
        return Err(Error::InvalidArgument(format!(
            "a device has {} samples, fewer than {folds} folds",
            data.min_samples()
        )));
    }
    Ok(data
        .devices
        .iter()
        .enumerate()
        .map(|(u, d)| {
            let mut idx: Vec<usize> = (0..d.len()).collect();
            idx.shuffle(&mut stream(seed, Domain::CrossValidation, u as u64, 0));
            let mut label = vec![0; d.len()];
            for (pos, &k) in idx.iter().enumerate() {
                label[k] = pos % folds;
            }
            label
        })
        .collect())
}

fn split(data: &Dataset, labels: &[Vec<usize>], fold: usize) -> Result<(Dataset, Vec<DeviceData>)> {
    let mut train = Vec::with_capacity(data.num_devices());
    let mut test = Vec::with_capacity(data.num_devices());
    for (d, lab) in data.devices.iter().zip(labels) {
        let (tr, te): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&k| lab[k] != fold);
        train.push(d.subset(&tr)?);
        test.push(d.subset(&te)?);
    }
    Ok((Dataset::new(data.spec, train)?, test))
}

fn held_out_loss(data: &Dataset, test: &[DeviceData], theta: &ParamMatrix) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (u, d) in test.iter().enumerate() {
        total += data.spec.empirical_risk(d, theta.row(u))? * d.len() as f64;
        count += d.len();
    }
    Ok(total / count as f64)
}

/// Picks `λ` from `grid` by mean held-out loss over `cfg.folds` per-device
/// folds. Small instances are fitted by the reference solver along a
/// warm-started path; larger ones by the engine with `engine`. Ties go to the
/// smaller `λ`.
pub fn cross_validate_lambda(
    g: &DeviceGraph,
    data: &Dataset,
    grid: &[f64],
    norm: EdgeNorm,
    cfg: &CvConfig,
    engine: &SolverConfig,
    seed: u64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if grid.len() == 1 {
        return Ok(CvResult {
            lambda: grid[0],
            grid: grid.to_vec(),
            scores: vec![f64::NAN],
        });
    }
    let labels = fold_assignment(data, cfg.folds, seed)?;
    let use_reference = data.num_devices() <= REFERENCE_MAX_DEVICES && data.dim() <= REFERENCE_MAX_DIM;
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let per_fold = crate::par::map_indexed(cfg.folds, |fold| -> Result<Vec<f64>> {
        let (train, test) = split(data, &labels, fold)?;
        let mut scores = vec![0.0; grid.len()];
        let mut warm: Option<ReferenceFit> = None;
        for &i in &order {
            let theta = if use_reference {
                let opts = ReferenceOptions {
                    tol: cfg.tol,
                    ..Default::default()
                };
                let fit = reference_minimizer_warm(g, &train, grid[i], norm, &opts, warm.as_ref())?;
                let th = fit.theta.clone();
                warm = Some(fit);
                th
            } else {
                let c = SolverConfig {
                    lambda: grid[i],
                    norm,
                    ..engine.clamped_to(&train)
                };
                run(g, &train, &c)?.theta_bar
            };
            scores[i] = held_out_loss(&train, &test, &theta)?;
        }
        Ok(scores)
    });
    let mut scores = vec![0.0; grid.len()];
    for fold_scores in per_fold {
        for (s, f) in scores.iter_mut().zip(fold_scores?) {
            *s += f / cfg.folds as f64;
        }
    }
    let mut by_lambda: Vec<usize> = (0..grid.len()).collect();
    by_lambda.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut best = by_lambda[0];
    for &i in &by_lambda[1..] {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    Ok(CvResult {
        lambda: grid[best],
        grid: grid.to_vec(),
        scores,
    })
}

/// Grid from [`lambda_max`] on the full data, then [`cross_validate_lambda`].
pub fn cross_validate(
    g: &DeviceGraph,
    data: &Dataset,
    norm: EdgeNorm,
    cfg: &CvConfig,
    engine: &SolverConfig,
    seed: u64,
) -> Result<CvResult> {
    let lmax = lambda_max(g, data, norm)?;
    let grid = lambda_grid(lmax, cfg.grid_size, cfg.min_ratio);
    cross_validate_lambda(g, data, &grid, norm, cfg, engine, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedadmm::reference_minimizer;
    use crate::models::{Family, ModelSpec};

    fn small() -> (DeviceGraph, Dataset) {
        let spec = ModelSpec::new(Family::Mean, 2).unwrap();
        let devs = vec![
            DeviceData::points(2, vec![0.0, 1.0, 1.0, 2.0, 2.0, 0.0]).unwrap(),
            DeviceData::points(2, vec![3.0, 1.0, 4.0, 0.0, 2.0, 2.0]).unwrap(),
            DeviceData::points(2, vec![-1.0, 5.0, 0.0, 4.0, 1.0, 3.0]).unwrap(),
        ];
        (
            DeviceGraph::new(3, &[(0, 1), (1, 2)]).unwrap(),
            Dataset::new(spec, devs).unwrap(),
        )
    }

    #[test]
    fn lambda_max_is_the_fusion_point() {
        let (g, d) = small();
        let lmax = lambda_max(&g, &d, EdgeNorm::L1).unwrap();
        let opts = ReferenceOptions::default();
        let above = reference_minimizer(&g, &d, lmax * 1.01, EdgeNorm::L1, &opts).unwrap();
        assert!((0..g.num_edges()).all(|k| above.is_fused(k)));
        let below = reference_minimizer(&g, &d, lmax * 0.9, EdgeNorm::L1, &opts).unwrap();
        assert!(!(0..g.num_edges()).all(|k| below.is_fused(k)));
    }

    #[test]
    fn grid_shape() {
        let g = lambda_grid(2.0, 10, 1e-4);
        assert_eq!(g.len(), 10);
        assert!((g[0] - 2e-4).abs() < 1e-15 && (g[9] - 2.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(lambda_grid(2.0, 1, 1e-4), vec![2.0]);
    }

    #[test]
    fn single_point_grid() {
        let (g, d) = small();
        let r = cross_validate_lambda(&g, &d, &[0.3], EdgeNorm::L1, &CvConfig::default(), &SolverConfig::default(), 0);
        assert_eq!(r.unwrap().lambda, 0.3);
    }

    #[test]
    fn too_few_samples_for_folds() {
        let (g, d) = small();
        let r = cross_validate_lambda(&g, &d, &[0.1, 0.2], EdgeNorm::L1, &CvConfig::default(), &SolverConfig::default(), 0);
        assert!(r.is_err());
    }
}
