//! Edge selection by Bonferroni-corrected Wald tests on local estimates.
//!
//! For each candidate edge the statistic
//! `Ŵ² = (θ̂₊ - θ̂₋)ᵀ (Ω̂₊ + Ω̂₋)⁻¹ (θ̂₊ - θ̂₋)` is compared with the upper
//! `α/|E|` quantile of `χ²_p`; edges at or below the threshold are kept.

pub mod chi2;

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{DeviceGraph, Edge};
use crate::linalg::{cholesky_with_jitter, dot, dvector, sub};
use crate::models::LocalFit;

pub use chi2::chi2_quantile;

/// `dᵀ S⁻¹ d` for symmetric positive definite `S`.
fn quadratic_form(d: &[f64], s: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky_with_jitter(s)?;
    let x = chol.solve(&dvector(d));
    Ok(dot(d, x.as_slice()).max(0.0))
}

/// `Ŵ_e²` from the local fits at the two endpoints.
pub fn test_statistic(plus: &LocalFit, minus: &LocalFit) -> Result<f64> {
    if plus.theta_hat.len() != minus.theta_hat.len() {
        return Err(Error::Shape(format!(
            "{} vs {}",
            plus.theta_hat.len(),
            minus.theta_hat.len()
        )));
    }
    let d = sub(&plus.theta_hat, &minus.theta_hat);
    quadratic_form(&d, &(&plus.omega_hat + &minus.omega_hat))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeTest {
    pub edge: Edge,
    pub statistic: f64,
    pub keep: bool,
}

#[derive(Debug, Clone)]
pub struct EdgeTestReport {
    pub alpha: f64,
    /// `χ²_p(α/|E|)`
    pub threshold: f64,
    pub tests: Vec<EdgeTest>,
    pub selected: DeviceGraph,
}

impl EdgeTestReport {
    pub fn num_candidates(&self) -> usize {
        self.tests.len()
    }

    /// CSV with header `e_plus,e_minus,stat,threshold,keep`; nodes 1-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "e_plus,e_minus,stat,threshold,keep")?;
        for t in &self.tests {
            writeln!(
                w,
                "{},{},{},{},{}",
                t.edge.plus + 1,
                t.edge.minus + 1,
                t.statistic,
                self.threshold,
                u8::from(t.keep)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Applies the Bonferroni rule to precomputed statistics, one per edge of `g`.
pub fn select_from_statistics(g: &DeviceGraph, statistics: &[f64], dof: usize, alpha: f64) -> Result<EdgeTestReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    if statistics.len() != g.num_edges() {
        return Err(Error::Shape(format!(
            "{} statistics for {} edges",
            statistics.len(),
            g.num_edges()
        )));
    }
    let threshold = chi2_quantile(dof, alpha / g.num_edges().max(1) as f64)?;
    let tests: Vec<EdgeTest> = g
        .edges()
        .iter()
        .zip(statistics)
        .map(|(&edge, &statistic)| EdgeTest {
            edge,
            statistic,
            keep: statistic <= threshold,
        })
        .collect();
    let selected = g.filter_edges(|k, _| tests[k].keep);
    Ok(EdgeTestReport {
        alpha,
        threshold,
        tests,
        selected,
    })
}

/// Tests every edge of `g` at family-wise level `alpha`.
pub fn select_edges(g: &DeviceGraph, fits: &[LocalFit], alpha: f64) -> Result<EdgeTestReport> {
    if fits.len() != g.num_nodes() {
        return Err(Error::NodeCountMismatch(fits.len(), g.num_nodes()));
    }
    let dof = fits.first().map_or(1, |f| f.theta_hat.len());
    let stats = crate::par::map_indexed(g.num_edges(), |k| {
        let e = g.edges()[k];
        test_statistic(&fits[e.plus], &fits[e.minus])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    select_from_statistics(g, &stats, dof, alpha)
}

/// Selection over all device pairs, using local estimates only.
pub fn local_es_candidate_graph(fits: &[LocalFit], alpha: f64) -> Result<EdgeTestReport> {
    if fits.len() < 2 {
        return Err(Error::InvalidArgument("need at least two devices".into()));
    }
    select_edges(&DeviceGraph::complete(fits.len()), fits, alpha)
}

/// `{(θ₁ - θ₂)ᵀ (c₁Ω₁ + c₂Ω₂)⁻¹ (θ₁ - θ₂)}^{1/2}`
pub fn signal_distance(
    theta1: &[f64],
    theta2: &[f64],
    omega1: &DMatrix<f64>,
    omega2: &DMatrix<f64>,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    for c in [c1, c2] {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidArgument(format!("weight {c} outside (0, 1]")));
        }
    }
    if theta1.len() != theta2.len() {
        return Err(Error::Shape(format!("{} vs {}", theta1.len(), theta2.len())));
    }
    let metric = omega1 * c1 + omega2 * c2;
    Ok(quadratic_form(&sub(theta1, theta2), &metric)?.sqrt())
}

/// `n_e · dist² >= 4 χ²_p(α/|E|)`
pub fn min_signal_holds(n_e: usize, dist: f64, threshold: f64) -> bool {
    n_e as f64 * dist * dist >= 4.0 * threshold
}

/// Smallest ratio `n_e·dist²/(4 χ²_p(α/|E|))` over the false edges of `g`,
/// with the plug-ins `c_u = n_e/n_u` and `Ω*_u = n_u Ω̂_u`. Infinite when every
/// edge is true.
pub fn min_signal_margin(
    g: &DeviceGraph,
    g0: &DeviceGraph,
    theta_star: &crate::linalg::ParamMatrix,
    fits: &[LocalFit],
    sample_sizes: &[usize],
    alpha: f64,
) -> Result<f64> {
    if fits.len() != g.num_nodes() || sample_sizes.len() != g.num_nodes() || theta_star.nrows() != g.num_nodes() {
        return Err(Error::NodeCountMismatch(fits.len(), g.num_nodes()));
    }
    let threshold = chi2_quantile(theta_star.ncols(), alpha / g.num_edges().max(1) as f64)?;
    let mut worst = f64::INFINITY;
    for e in g.edges() {
        if g0.contains(e.plus, e.minus) {
            continue;
        }
        let (np, nm) = (sample_sizes[e.plus], sample_sizes[e.minus]);
        let n_e = np.min(nm);
        let dist = signal_distance(
            theta_star.row(e.plus),
            theta_star.row(e.minus),
            &(&fits[e.plus].omega_hat * np as f64),
            &(&fits[e.minus].omega_hat * nm as f64),
            n_e as f64 / np as f64,
            n_e as f64 / nm as f64,
        )?;
        worst = worst.min(n_e as f64 * dist * dist / (4.0 * threshold));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(theta: Vec<f64>, omega: DMatrix<f64>) -> LocalFit {
        LocalFit {
            theta_hat: theta,
            omega_hat: omega,
            converged: true,
            iterations: 0,
        }
    }

    #[test]
    fn statistic_examples() {
        let half = DMatrix::identity(2, 2) * 0.5;
        let a = fit(vec![1.0, 2.0], half.clone());
        assert_eq!(test_statistic(&a, &a).unwrap(), 0.0);
        let b = fit(vec![4.0, -2.0], half);
        assert!((test_statistic(&a, &b).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn select_extremes() {
        let g = DeviceGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let all = select_from_statistics(&g, &[0.0, 0.0], 2, 0.05).unwrap();
        assert_eq!(all.selected, g);
        let none = select_from_statistics(&g, &[1e6, 1e6], 2, 0.05).unwrap();
        assert_eq!(none.selected.num_edges(), 0);
        let at = select_from_statistics(&g, &[all.threshold, 0.0], 2, 0.05).unwrap();
        assert!(at.tests[0].keep);
    }

    #[test]
    fn signal_examples() {
        let i = DMatrix::identity(2, 2);
        assert_eq!(signal_distance(&[1.0, 1.0], &[1.0, 1.0], &i, &i, 1.0, 1.0).unwrap(), 0.0);
        let d = signal_distance(&[3.0, 0.0], &[0.0, 4.0], &(&i * 0.5), &(&i * 0.5), 1.0, 1.0).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
        assert!(signal_distance(&[0.0], &[1.0], &i, &i, 0.0, 1.0).is_err());
        assert!(min_signal_holds(4, 1.0, 1.0));
        assert!(!min_signal_holds(4, 1.0, 1.0 + 1e-12));
    }
}
