//! Tabulated CDF with monotone cubic Hermite interpolation.

use crate::error::Result;
use crate::quadrature::integrate;

pub const KNOTS: usize = 2048;

#[derive(Debug, Clone)]
pub struct CdfTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl CdfTable {
    /// Integrates `density` between neighbouring knots and fixes the
    /// interpolation slopes with the Fritsch–Carlson limiter.
    pub fn build<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64) -> Result<Self> {
        let step = (hi - lo) / (KNOTS - 1) as f64;
        let xs: Vec<f64> = (0..KNOTS).map(|i| lo + step * i as f64).collect();
        let mut values = Vec::with_capacity(KNOTS);
        values.push(0.0);
        let mut acc = 0.0;
        for w in xs.windows(2) {
            acc += integrate(&density, w[0], w[1], &[], 1e-17, 1e-12)?;
            values.push(acc);
        }
        for v in &mut values {
            *v /= acc;
        }
        let mut slopes: Vec<f64> = xs.iter().map(|&x| density(x).max(0.0) / acc).collect();
        for k in 0..KNOTS - 1 {
            let secant = (values[k + 1] - values[k]) / step;
            if secant <= 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = slopes[k] / secant;
            let b = slopes[k + 1] / secant;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[k] = tau * a * secant;
                slopes[k + 1] = tau * b * secant;
            }
        }
        Ok(Self { lo, step, values, slopes })
    }

    fn hi(&self) -> f64 {
        self.lo + self.step * (KNOTS - 1) as f64
    }

    fn eval(&self, k: usize, t: f64) -> f64 {
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[k]
            + (t3 - 2.0 * t2 + t) * self.step * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.values[k + 1]
            + (t3 - t2) * self.step * self.slopes[k + 1]
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi() {
            return 1.0;
        }
        let pos = (x - self.lo) / self.step;
        let k = (pos.floor() as usize).min(KNOTS - 2);
        self.eval(k, pos - k as f64).clamp(0.0, 1.0)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.lo;
        }
        if u >= 1.0 {
            return self.hi();
        }
        let k = self.values.partition_point(|&v| v <= u).clamp(1, KNOTS - 1) - 1;
        if self.values[k + 1] <= self.values[k] {
            return self.lo + self.step * k as f64;
        }
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if self.eval(k, mid) < u {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-14 {
                break;
            }
        }
        self.lo + self.step * (k as f64 + 0.5 * (a + b))
    }
}
