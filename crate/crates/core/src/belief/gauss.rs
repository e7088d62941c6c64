//! Gaussian helpers: CDFs, circular wrapping, covariance ordering.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use super::{BeliefError, Result};

/// Eigenvalue slack used when testing positive semi-definiteness.
pub const PSD_EPS: f64 = 1e-9;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * statrs::function::erf::erfc(-z / SQRT_2)
}

/// P(lo <= X <= hi) for X ~ N(mu, sigma^2). Degenerate sigma is a point mass.
pub fn interval_prob(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    if sigma <= 0.0 {
        return if mu >= lo && mu <= hi { 1.0 } else { 0.0 };
    }
    // Use the upper tail when both bounds sit above the mean so tiny tail
    // masses keep their relative precision.
    let zl = (lo - mu) / sigma;
    let zh = (hi - mu) / sigma;
    if zl > 0.0 {
        (normal_cdf(-zl) - normal_cdf(-zh)).max(0.0)
    } else {
        (normal_cdf(zh) - normal_cdf(zl)).max(0.0)
    }
}

/// Mass of a wrapped normal on the unit circle `[0,1)` over the arc
/// `[lo, hi]`; `lo > hi` denotes an arc through 0.
pub fn circular_interval_prob(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let (lo, hi) = if lo > hi { (lo - 1.0, hi) } else { (lo, hi) };
    if sigma <= 0.0 {
        let m = wrap_unit(mu);
        return if (m >= lo && m <= hi) || (m - 1.0 >= lo && m - 1.0 <= hi) {
            1.0
        } else {
            0.0
        };
    }
    let k_max = (6.0 * sigma).ceil() as i64 + 2;
    let total: f64 = (-k_max..=k_max)
        .map(|k| interval_prob(mu, sigma, lo + k as f64, hi + k as f64))
        .sum();
    total.clamp(0.0, 1.0)
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Wraps into [0, 1).
pub fn wrap_unit(h: f64) -> f64 {
    let w = h.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Signed shortest difference `a - b` on the unit circle, in (-0.5, 0.5].
pub fn unit_circle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(1.0);
    if d > 0.5 {
        d -= 1.0;
    }
    d
}

/// `s1 ⪯ s2`: every equi-probability contour of `s1` lies inside the
/// matching contour of `s2`, i.e. `s2 - s1` is positive semi-definite.
pub fn cov_dominates(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<bool> {
    if s1.shape() != s2.shape() || s1.nrows() != s1.ncols() {
        return Err(BeliefError::Dimension(s1.nrows(), s2.nrows()));
    }
    let diff = s2 - s1;
    let sym = (&diff + diff.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok(eig.iter().all(|&l| l >= -PSD_EPS))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
