//! Unnormalised closed-form stationary densities.

use std::f64::consts::SQRT_2;

/// `atanh(s)` given `s` and `1 - s` separately, accurate as `s -> 1`.
fn atanh_near_one(s: f64, one_minus_s: f64) -> f64 {
    if one_minus_s <= 0.0 {
        return f64::INFINITY;
    }
    0.5 * ((1.0 + s) / one_minus_s).ln()
}

/// `|C| atanh(sqrt(1 - 4|C|))`, continuous (zero) at `C = 0`.
fn weighted_atanh_window(a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let s = (1.0 - 4.0 * a).max(0.0).sqrt();
    a * atanh_near_one(s, 4.0 * a / (1.0 + s))
}

pub(super) fn free_correlation(c: f64) -> f64 {
    let a = c.abs();
    if a > 0.25 {
        return 0.0;
    }
    let s = (1.0 - 4.0 * a).max(0.0).sqrt();
    6.0 * s - 24.0 * weighted_atanh_window(a)
}

pub(super) fn monitored_qubit_marginal(big_r: f64, lambda: f64) -> f64 {
    let u = big_r * (1.0 - big_r);
    let s = (2.0 * lambda).sqrt();
    let k = (2.0 * lambda / (2.0 * lambda + 1.0)).sqrt();
    8.0 * u / (1.0 + 8.0 * lambda * u)
        + 6.0 / (s * (2.0 * lambda + 1.0).powf(1.5))
            * (s.asinh() + (2.0 * big_r - 1.0) * (k * (1.0 - 2.0 * big_r)).atanh())
}

pub(super) fn monitored_correlation(c: f64, lambda: f64) -> f64 {
    let a = c.abs();
    if a > 0.25 {
        return 0.0;
    }
    let l = lambda;
    let w = 2.0 * l + 1.0;
    let first = 4.0 * (1.0 - 4.0 * a).max(0.0).sqrt() * (64.0 * l * l * a + l * (56.0 * a + 4.0) + 5.0)
        / (w * (8.0 * l * a + 1.0));
    let second = 2.0 * SQRT_2 * (8.0 * l * (32.0 * l * l + 40.0 * l + 15.0) * a + 3.0)
        * ((l * (2.0 - 8.0 * a) / w).max(0.0).sqrt()).atanh()
        / (l.sqrt() * w.powf(1.5));
    let third = w * 128.0 * weighted_atanh_window(a);
    first + second - third
}

pub(super) fn monitored_concurrence_sq(y: f64, lambda: f64) -> f64 {
    let l = lambda;
    let w = 2.0 * l + 1.0;
    let q = 2.0 * y * l + 1.0;
    let one_minus = (1.0 - y).max(0.0);
    (4.0 * ((6.0 * y + 4.0) * l + 5.0) * (one_minus * l * w).sqrt()
        + 6.0 * SQRT_2 * q * q * ((one_minus * 2.0 * l / w).sqrt()).atanh())
        / (q * q)
}

pub(super) fn monitored_basis_probability(x: f64, lambda: f64) -> f64 {
    let l = lambda;
    let q = 1.0 - 8.0 * l * (x - 1.0) * x;
    let poly = -5.0 + 8.0 * x + (32.0 * x * x * (1.0 - l) - 4.0 * (6.0 * x + 1.0)) * (1.0 - x) * l;
    (8.0 * (l * (2.0 * l + 1.0)).sqrt() * (x - 1.0) * poly
        + 6.0 * SQRT_2 * (2.0 * l).sqrt().asinh() * q * q
        + 6.0 * SQRT_2 * q * q * ((1.0 - 2.0 * x) / (1.0 / (2.0 * l) + 1.0).sqrt()).atanh())
        / (q * q)
}

/// `[r(1-r)]^{N/2-1} / (1 + 2NΛ r(1-r))^{N/2+1}`.
pub(super) fn monitored_one_of_many(r: f64, n: usize, lambda: f64) -> f64 {
    let u = r * (1.0 - r);
    let half = (n / 2) as i32;
    u.powi(half - 1) / (1.0 + 2.0 * n as f64 * lambda * u).powi(half + 1)
}
