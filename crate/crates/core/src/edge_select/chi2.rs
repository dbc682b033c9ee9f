//! Chi-square tail probabilities and quantiles through the regularized
//! incomplete gamma function.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 10_000;

/// Lower regularized gamma `P(a, x)` by its power series; accurate for `x < a + 1`.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_TERMS {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Upper regularized gamma `Q(a, x)` by its continued fraction (modified Lentz); accurate for `x >= a + 1`.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// `P(a, x) = γ(a, x) / Γ(a)`
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// `Q(a, x) = 1 - P(a, x)`, computed without cancellation in the upper tail.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    regularized_gamma_p(dof as f64 / 2.0, x / 2.0)
}

/// `P(χ²_dof > x)`
pub fn chi2_sf(dof: usize, x: f64) -> f64 {
    regularized_gamma_q(dof as f64 / 2.0, x / 2.0)
}

pub fn chi2_pdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return if dof == 2 { 0.5 } else { 0.0 };
    }
    let k = dof as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// The `x` with `P(χ²_dof > x) = upper_tail`, to `1e-10` relative accuracy.
pub fn chi2_quantile(dof: usize, upper_tail: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidArgument("chi-square needs at least one degree of freedom".into()));
    }
    if !(upper_tail > 0.0 && upper_tail < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "upper-tail probability {upper_tail} outside (0, 1)"
        )));
    }
    // sf is decreasing; find [lo, hi] with sf(lo) >= q >= sf(hi)
    let mut lo = 0.0;
    let mut hi = (dof as f64).max(1.0);
    while chi2_sf(dof, hi) > upper_tail {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = chi2_sf(dof, x) - upper_tail;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = -chi2_pdf(dof, x);
        let mut next = if slope < 0.0 { x - f / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() <= 1e-12 * next.abs().max(1e-300) || hi - lo <= 1e-12 * hi;
        x = next;
        if done {
            break;
        }
    }
    Ok(x)
}
