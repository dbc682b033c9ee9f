// Independent numeric oracles shared by the integration tests. None of them
// call into the library's own solvers.
#![allow(dead_code)]

use fedgraph::{DeviceGraph, ParamMatrix};
use nalgebra::{DMatrix, DVector};

/// Connected components by depth-first search over an edge list.
pub fn components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

pub fn edge_pairs(g: &DeviceGraph) -> Vec<(usize, usize)> {
    g.edges().iter().map(|e| (e.plus, e.minus)).collect()
}

/// `min over S ⊆ E of K(S) + |S \ E0|` by enumeration.
pub fn brute_min_partition(g: &DeviceGraph, g0: &DeviceGraph) -> usize {
    let edges = edge_pairs(g);
    let m = edges.len();
    let mut best = usize::MAX;
    for mask in 0u32..(1 << m) {
        let chosen: Vec<(usize, usize)> = (0..m).filter(|k| mask & (1 << k) != 0).map(|k| edges[k]).collect();
        let wrong = chosen.iter().filter(|&&(a, b)| !g0.contains(a, b)).count();
        best = best.min(components(g.num_nodes(), &chosen) + wrong);
    }
    best
}

/// Rank by Gaussian elimination with partial pivoting.
pub fn rank(mut m: Vec<Vec<f64>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..rows).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else {
            break;
        };
        if m[piv][c].abs() < 1e-9 {
            continue;
        }
        m.swap(r, piv);
        for i in 0..rows {
            if i != r {
                let f = m[i][c] / m[r][c];
                for j in c..cols {
                    m[i][j] -= f * m[r][j];
                }
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Inverse by Gauss-Jordan elimination.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| f64::from(u8::from(i == j))));
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for i in 0..n {
            if i != c {
                let f = m[i][c];
                for j in 0..2 * n {
                    m[i][j] -= f * m[c][j];
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Root of a nondecreasing function on `[lo, hi]` by bisection to machine precision.
pub fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    assert!(f(lo) <= 0.0 && f(hi) >= 0.0, "bracket does not straddle the root");
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Damped Newton with backtracking for a smooth strictly convex function.
pub fn newton_minimize(
    f: impl Fn(&DVector<f64>) -> f64,
    grad: impl Fn(&DVector<f64>) -> DVector<f64>,
    hess: impl Fn(&DVector<f64>) -> DMatrix<f64>,
    x0: DVector<f64>,
) -> DVector<f64> {
    let mut x = x0;
    for _ in 0..500 {
        let g = grad(&x);
        let h = hess(&x);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let fx = f(&x);
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut next = &x - &step * t;
        while f(&next) > fx - 1e-4 * t * slope && t > 1e-20 {
            t *= 0.5;
            next = &x - &step * t;
        }
        let moved = (&next - &x).norm();
        x = next;
        if moved < 1e-16 * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

/// Smoothed `Σ|x_i|` or `||x||` with value, gradient and Hessian.
pub struct SmoothNorm {
    pub l1: bool,
    pub eps: f64,
}

impl SmoothNorm {
    pub fn value(&self, v: &[f64]) -> f64 {
        let e2 = self.eps * self.eps;
        if self.l1 {
            v.iter().map(|x| (x * x + e2).sqrt()).sum()
        } else {
            (v.iter().map(|x| x * x).sum::<f64>() + e2).sqrt()
        }
    }

    pub fn grad(&self, v: &[f64]) -> Vec<f64> {
        let e2 = self.eps * self.eps;
        if self.l1 {
            v.iter().map(|x| x / (x * x + e2).sqrt()).collect()
        } else {
            let r = (v.iter().map(|x| x * x).sum::<f64>() + e2).sqrt();
            v.iter().map(|x| x / r).collect()
        }
    }

    pub fn hess(&self, v: &[f64]) -> DMatrix<f64> {
        let e2 = self.eps * self.eps;
        let n = v.len();
        if self.l1 {
            DMatrix::from_fn(n, n, |i, j| if i == j { e2 / (v[i] * v[i] + e2).powf(1.5) } else { 0.0 })
        } else {
            let r2 = v.iter().map(|x| x * x).sum::<f64>() + e2;
            let r = r2.sqrt();
            DMatrix::from_fn(n, n, |i, j| {
                let id = f64::from(u8::from(i == j));
                id / r - v[i] * v[j] / (r2 * r)
            })
        }
    }
}

/// Numeric `argmin_s τφ(s) + ½||s - v||²`. The ℓ1 case is separable and is
/// solved per coordinate by bisection on the subgradient; the ℓ2 case by
/// Newton on a smoothed norm.
pub fn numeric_prox(l1: bool, v: &[f64], tau: f64) -> Vec<f64> {
    if l1 {
        return v
            .iter()
            .map(|&vi| {
                let bound = vi.abs() + tau + 1.0;
                // right derivative of τ|s| + ½(s - v)²
                bisect(-bound, bound, |s| tau * if s >= 0.0 { 1.0 } else { -1.0 } + s - vi)
            })
            .collect();
    }
    let sn = SmoothNorm { l1: false, eps: 1e-13 };
    let vv = DVector::from_column_slice(v);
    let x = newton_minimize(
        |s| tau * sn.value(s.as_slice()) + 0.5 * (s - &vv).norm_squared(),
        |s| DVector::from_vec(sn.grad(s.as_slice())) * tau + (s - &vv),
        |s| sn.hess(s.as_slice()) * tau + DMatrix::identity(v.len(), v.len()),
        vv.clone(),
    );
    x.as_slice().to_vec()
}

/// `λφ(β₁ - β₂) + (ρ/2)(||β₁ - a||² + ||β₂ - b||²)`
pub fn edge_objective(l1: bool, b1: &[f64], b2: &[f64], a: &[f64], b: &[f64], lambda: f64, rho: f64) -> f64 {
    let d: Vec<f64> = b1.iter().zip(b2).map(|(x, y)| x - y).collect();
    let phi = if l1 {
        d.iter().map(|x| x.abs()).sum()
    } else {
        d.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let q1: f64 = b1.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
    let q2: f64 = b2.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    lambda * phi + 0.5 * rho * (q1 + q2)
}

/// Numeric joint minimizer of [`edge_objective`] over `(β₁, β₂)`. The ℓ1 case
/// is separable and solved per coordinate by nested bisection; the ℓ2 case by
/// Newton on the smoothed penalty.
pub fn numeric_edge_prox(l1: bool, a: &[f64], b: &[f64], lambda: f64, rho: f64) -> (Vec<f64>, Vec<f64>) {
    if l1 {
        return a.iter().zip(b).map(|(&ai, &bi)| l1_edge_coordinate(ai, bi, lambda, rho)).unzip();
    }
    let p = a.len();
    let sn = SmoothNorm { l1, eps: 1e-13 };
    let target = DVector::from_iterator(2 * p, a.iter().chain(b).copied());
    let diff = |x: &DVector<f64>| -> Vec<f64> { (0..p).map(|i| x[i] - x[p + i]).collect() };
    let x = newton_minimize(
        |x| lambda * sn.value(&diff(x)) + 0.5 * rho * (x - &target).norm_squared(),
        |x| {
            let gd = sn.grad(&diff(x));
            let mut g = (x - &target) * rho;
            for i in 0..p {
                g[i] += lambda * gd[i];
                g[p + i] -= lambda * gd[i];
            }
            g
        },
        |x| {
            let hd = sn.hess(&diff(x)) * lambda;
            let mut h = DMatrix::identity(2 * p, 2 * p) * rho;
            for i in 0..p {
                for j in 0..p {
                    h[(i, j)] += hd[(i, j)];
                    h[(p + i, p + j)] += hd[(i, j)];
                    h[(i, p + j)] -= hd[(i, j)];
                    h[(p + i, j)] -= hd[(i, j)];
                }
            }
            h
        },
        target.clone(),
    );
    (x.as_slice()[..p].to_vec(), x.as_slice()[p..].to_vec())
}

/// `argmin λ|x - y| + (ρ/2)((x - a)² + (y - b)²)`.
///
/// For fixed `x` the inner minimizer `y*(x)` is found by bisection on the right
/// derivative in `y`. The value `h(x)` of the inner problem is an infimal
/// convolution with a smooth quadratic, so `h'(x) = ρ(x - a) + ρ(y*(x) - b)`,
/// which is nondecreasing and is bisected in turn.
fn l1_edge_coordinate(a: f64, b: f64, lambda: f64, rho: f64) -> (f64, f64) {
    let bound = a.abs() + b.abs() + lambda / rho + 1.0;
    let inner = |x: f64| bisect(-bound, bound, |y| lambda * if y >= x { 1.0 } else { -1.0 } + rho * (y - b));
    let x = bisect(-bound, bound, |x| rho * (x - a) + rho * (inner(x) - b));
    (x, inner(x))
}

/// `||a - b||²_F / rows`
pub fn avg_sq(a: &ParamMatrix, b: &ParamMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.nrows() as f64
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}
