//! Goodness-of-fit and time-series statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::distributions::{Distribution, DistributionSpec};
use crate::error::{invalid, Error, Result};

/// Smallest sample accepted by the KS helpers.
pub const MIN_SAMPLES: usize = 100;

/// One-sample two-sided Kolmogorov–Smirnov distance to a CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.len() < MIN_SAMPLES {
        return Err(invalid(format!(
            "KS needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// KS distance between samples and a catalog density.
pub fn ks_distance(samples: &[f64], spec: &DistributionSpec) -> Result<f64> {
    let dist = Distribution::get(spec)?;
    if !dist.is_scalar() {
        return Err(Error::Unsupported(format!("{} is a joint density", spec.id)));
    }
    ks_statistic(samples, |x| dist.cdf(x).unwrap_or(f64::NAN))
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < MIN_SAMPLES || b.len() < MIN_SAMPLES {
        return Err(invalid("two-sample KS needs at least 100 samples on each side"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Upper tail `P(χ²_dof ≥ statistic)`.
pub fn chi_square_p_value(statistic: f64, dof: usize) -> Result<f64> {
    let dist = ChiSquared::new(dof as f64).map_err(|e| invalid(e.to_string()))?;
    Ok(dist.sf(statistic))
}

/// Pearson statistic of observed counts against expected counts; cells with
/// zero expectation must be empty.
pub fn chi_square_statistic(observed: &[u64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() {
        return Err(invalid("observed and expected counts differ in length"));
    }
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
        } else if o > 0 {
            return Err(invalid("count in a cell with zero expectation"));
        }
    }
    Ok(stat)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample autocorrelation at `lag`.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    if x.len() <= lag + 1 {
        return f64::NAN;
    }
    let m = mean(x);
    let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let cov: f64 = x.iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    cov / var
}

/// Standard error of the mean from `batches` contiguous batch means.
pub fn batch_mean_error(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches.max(2);
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = x.chunks_exact(size).map(mean).collect();
    let m = mean(&means);
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (var / means.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionId;
    use crate::parallel::shard_rng;
    use rand::Rng;

    #[test]
    fn null_samples_pass() {
        let spec = DistributionSpec::new(DistributionId::FreeR2q);
        let dist = Distribution::get(&spec).unwrap();
        let mut rng = shard_rng(17, 0);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng).unwrap()).collect();
        assert!(ks_distance(&samples, &spec).unwrap() < 1.63 / (n as f64).sqrt());
    }

    #[test]
    fn uniform_against_parabolic_cdf() {
        // sup |x - (3x² - 2x³)| at x = 1/2 ± 1/(2√3)
        let spec = DistributionSpec::new(DistributionId::FreeR2q);
        let samples: Vec<f64> = (0..20_000).map(|i| (i as f64 + 0.5) / 20_000.0).collect();
        let expected = 1.0 / (6.0 * 3f64.sqrt());
        assert!((ks_distance(&samples, &spec).unwrap() - expected).abs() < 1e-4);
    }

    #[test]
    fn ks_errors() {
        let spec = DistributionSpec::new(DistributionId::FreeR2q);
        assert!(ks_distance(&[], &spec).is_err());
        let joint = DistributionSpec::new(DistributionId::FreeJointRRC);
        assert!(ks_distance(&[0.5; 200], &joint).is_err());
    }

    #[test]
    fn two_sample_ks() {
        let mut rng = shard_rng(3, 1);
        let a: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        assert!(ks_two_sample(&a, &b).unwrap() < 0.04);
        let c: Vec<f64> = b.iter().map(|x| x * 0.5).collect();
        assert!((ks_two_sample(&a, &c).unwrap() - 0.5).abs() < 0.03);
    }

    #[test]
    fn chi_square_and_time_series() {
        assert!((chi_square_p_value(2.0, 2).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(chi_square_statistic(&[5, 5], &[5.0, 5.0]).unwrap(), 0.0);
        assert!(chi_square_statistic(&[1], &[0.0]).is_err());
        let alternating: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((autocorrelation(&alternating, 1) + 1.0).abs() < 1e-2);
        assert!(batch_mean_error(&alternating, 10) < 1e-12);
    }
}
