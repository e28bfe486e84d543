//! Catalog of closed-form stationary densities.
//!
//! Normalisation constants are obtained by adaptive quadrature when a
//! distribution is first built; scalar distributions also tabulate their CDF
//! on a 2048-knot grid with monotone cubic interpolation. Built distributions
//! are memoised per `(id, parameters)` and are immutable afterwards.

mod kernels;
mod table;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate;
pub use table::CdfTable;

/// Identifiers of the catalogued densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistributionId {
    /// Uniform `r` of a single free qubit.
    FreeR1,
    /// `(N-1)(1-x)^{N-2}`, one basis probability of a free N-level state.
    FreeRn,
    /// `3(1-x)²`.
    FreeRn2q,
    /// `6x(1-x)`.
    FreeR2q,
    FreeC2q,
    /// `3𝒞√(1-𝒞²)`.
    FreeConcurrence,
    /// `(3/2)√(1-𝒞²)`.
    FreeConcurrenceSq,
    FreeJointRRC,
    FreeJointRR,
    MonitoredR1q,
    MonitoredJointRRC,
    MonitoredR1of2,
    MonitoredBigR1of2,
    MonitoredC1of2,
    MonitoredConcurrenceSq1of2,
    MonitoredRn1of2,
    MonitoredR1ofq,
    SurrogateR2of2,
    SurrogateC2of2,
    SurrogateConcurrenceSq2of2,
}

const NAMES: [(DistributionId, &str); 20] = [
    (DistributionId::FreeR1, "F-r1"),
    (DistributionId::FreeRn, "F-rn"),
    (DistributionId::FreeRn2q, "F-rn-2q"),
    (DistributionId::FreeR2q, "F-r-2q"),
    (DistributionId::FreeC2q, "F-C-2q"),
    (DistributionId::FreeConcurrence, "F-conc"),
    (DistributionId::FreeConcurrenceSq, "F-conc2"),
    (DistributionId::FreeJointRRC, "F-joint-rRC"),
    (DistributionId::FreeJointRR, "F-joint-rR"),
    (DistributionId::MonitoredR1q, "M-r-1q"),
    (DistributionId::MonitoredJointRRC, "M-joint-rRC"),
    (DistributionId::MonitoredR1of2, "M-r-1of2"),
    (DistributionId::MonitoredBigR1of2, "M-R-1of2"),
    (DistributionId::MonitoredC1of2, "M-C-1of2"),
    (DistributionId::MonitoredConcurrenceSq1of2, "M-conc2-1of2"),
    (DistributionId::MonitoredRn1of2, "M-rn-1of2"),
    (DistributionId::MonitoredR1ofq, "M-r-1ofq"),
    (DistributionId::SurrogateR2of2, "S-r-2of2"),
    (DistributionId::SurrogateC2of2, "S-C-2of2"),
    (DistributionId::SurrogateConcurrenceSq2of2, "S-conc2-2of2"),
];

impl DistributionId {
    pub fn all() -> impl Iterator<Item = DistributionId> {
        NAMES.iter().map(|(id, _)| *id)
    }

    pub fn name(self) -> &'static str {
        NAMES.iter().find(|(id, _)| *id == self).map(|(_, n)| *n).unwrap()
    }

    /// Number of variables of the density (1 for scalar distributions).
    pub fn arity(self) -> usize {
        match self {
            Self::FreeJointRRC | Self::MonitoredJointRRC => 3,
            Self::FreeJointRR => 2,
            _ => 1,
        }
    }

    pub fn is_phenomenological(self) -> bool {
        matches!(
            self,
            Self::SurrogateR2of2 | Self::SurrogateC2of2 | Self::SurrogateConcurrenceSq2of2
        )
    }
}

impl fmt::Display for DistributionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(id, _)| *id)
            .ok_or_else(|| invalid(format!("unknown distribution '{s}'")))
    }
}

/// A catalog identifier together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub id: DistributionId,
    /// Effective monitoring strength Λ.
    pub lambda: f64,
    /// Second monitoring strength Λ′ (two monitored qubits).
    pub lambda2: f64,
    /// Hilbert-space dimension N.
    pub n: usize,
}

impl DistributionSpec {
    pub fn new(id: DistributionId) -> Self {
        Self { id, lambda: 0.0, lambda2: 0.0, n: 4 }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_lambda2(mut self, lambda2: f64) -> Self {
        self.lambda2 = lambda2;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid(format!("Λ must be finite and nonnegative, got {}", self.lambda)));
        }
        if !(self.lambda2.is_finite() && self.lambda2 >= 0.0) {
            return Err(invalid(format!("Λ′ must be finite and nonnegative, got {}", self.lambda2)));
        }
        if matches!(self.id, DistributionId::FreeRn | DistributionId::MonitoredR1ofq)
            && (self.n < 2 || !self.n.is_power_of_two())
        {
            return Err(invalid(format!("N must be a power of two ≥ 2, got {}", self.n)));
        }
        Ok(())
    }

    /// The catalog entry this spec evaluates to; surrogates map onto the
    /// one-monitored-qubit forms at their effective strength.
    pub fn resolved(&self) -> DistributionSpec {
        use DistributionId::*;
        let base = *self;
        match self.id {
            SurrogateR2of2 => DistributionSpec::new(MonitoredR1of2).with_lambda(self.lambda),
            SurrogateC2of2 => {
                DistributionSpec::new(MonitoredC1of2).with_lambda(self.lambda + self.lambda2)
            }
            SurrogateConcurrenceSq2of2 => DistributionSpec::new(MonitoredConcurrenceSq1of2)
                .with_lambda(self.lambda + self.lambda2),
            // vanishing monitoring: continuous limit is the free form
            MonitoredBigR1of2 | MonitoredR1of2 if self.lambda == 0.0 => DistributionSpec::new(FreeR2q),
            MonitoredC1of2 if self.lambda == 0.0 => DistributionSpec::new(FreeC2q),
            MonitoredConcurrenceSq1of2 if self.lambda == 0.0 => DistributionSpec::new(FreeConcurrenceSq),
            MonitoredRn1of2 if self.lambda == 0.0 => DistributionSpec::new(FreeRn2q),
            _ => base,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self.resolved().id {
            DistributionId::FreeC2q | DistributionId::MonitoredC1of2 => (-0.25, 0.25),
            _ => (0.0, 1.0),
        }
    }

    fn key(&self) -> (DistributionId, u64, u64, usize) {
        (self.id, self.lambda.to_bits(), self.lambda2.to_bits(), self.n)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(Λ={}, Λ′={}, N={})", self.id, self.lambda, self.lambda2, self.n)
    }
}

/// Admissible interval of `C` at given `(r, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintWindow {
    pub lower: f64,
    pub upper: f64,
}

impl ConstraintWindow {
    pub fn width(&self) -> f64 {
        (self.upper - self.lower).max(0.0)
    }

    pub fn contains(&self, c: f64) -> bool {
        self.lower <= c && c <= self.upper
    }
}

pub fn constraint_window(r: f64, big_r: f64) -> ConstraintWindow {
    ConstraintWindow {
        lower: -((1.0 - r) * (1.0 - big_r)).min(r * big_r),
        upper: (r * (1.0 - big_r)).min(big_r * (1.0 - r)),
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Unnormalised density of a resolved scalar spec.
fn scalar_kernel(spec: &DistributionSpec, x: f64) -> f64 {
    use DistributionId::*;
    let (lo, hi) = spec.support();
    if !(lo..=hi).contains(&x) {
        return 0.0;
    }
    let l = spec.lambda;
    let u = x * (1.0 - x);
    let value = match spec.id {
        FreeR1 => 1.0,
        FreeRn => (spec.n as f64 - 1.0) * (1.0 - x).powi(spec.n as i32 - 2),
        FreeRn2q => 3.0 * (1.0 - x).powi(2),
        FreeR2q => 6.0 * u,
        FreeC2q => kernels::free_correlation(x),
        FreeConcurrence => 3.0 * x * (1.0 - x * x).max(0.0).sqrt(),
        FreeConcurrenceSq => 1.5 * (1.0 - x).max(0.0).sqrt(),
        MonitoredR1q => 1.0 / (1.0 + 4.0 * l * u).powi(2),
        MonitoredR1of2 => u / (1.0 + 8.0 * l * u).powi(3),
        MonitoredBigR1of2 => kernels::monitored_qubit_marginal(x, l),
        MonitoredC1of2 => kernels::monitored_correlation(x, l),
        MonitoredConcurrenceSq1of2 => kernels::monitored_concurrence_sq(x, l),
        MonitoredRn1of2 => kernels::monitored_basis_probability(x, l),
        MonitoredR1ofq => kernels::monitored_one_of_many(x, spec.n, l),
        FreeJointRRC | FreeJointRR | MonitoredJointRRC | SurrogateR2of2 | SurrogateC2of2
        | SurrogateConcurrenceSq2of2 => unreachable!("not a resolved scalar spec"),
    };
    value.max(0.0)
}

/// A built catalog density.
#[derive(Debug)]
pub struct Distribution {
    spec: DistributionSpec,
    resolved: DistributionSpec,
    constant: f64,
    table: Option<CdfTable>,
}

type Cache = Mutex<HashMap<(DistributionId, u64, u64, usize), Arc<Distribution>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Distribution {
    /// Builds (or fetches from the memo cache) the density for `spec`.
    pub fn get(spec: &DistributionSpec) -> Result<Arc<Distribution>> {
        spec.validate()?;
        if let Some(d) = cache().lock().unwrap().get(&spec.key()) {
            return Ok(Arc::clone(d));
        }
        let built = Arc::new(Self::build(spec)?);
        cache()
            .lock()
            .unwrap()
            .insert(spec.key(), Arc::clone(&built));
        Ok(built)
    }

    fn build(spec: &DistributionSpec) -> Result<Self> {
        let resolved = spec.resolved();
        match resolved.id {
            DistributionId::FreeJointRRC | DistributionId::FreeJointRR => Ok(Self {
                spec: *spec,
                resolved,
                constant: 1.0,
                table: None,
            }),
            DistributionId::MonitoredJointRRC => {
                let l = resolved.lambda;
                let mass = integrate(
                    |r| r * (1.0 - r) / (1.0 + 8.0 * l * r * (1.0 - r)).powi(3),
                    0.0,
                    1.0,
                    &[0.5],
                    1e-15,
                    1e-13,
                )?;
                Ok(Self { spec: *spec, resolved, constant: 1.0 / mass, table: None })
            }
            _ => {
                let (lo, hi) = resolved.support();
                let breaks: &[f64] = if lo < 0.0 { &[0.0] } else { &[0.5] };
                let kernel = |x: f64| scalar_kernel(&resolved, x);
                // purely relative tolerance: some kernels have tiny absolute mass
                let mass = integrate(kernel, lo, hi, breaks, 0.0, 1e-13)?;
                if !(mass.is_finite() && mass > 0.0) {
                    return Err(Error::Numerical(format!("{spec} has non-positive mass {mass}")));
                }
                let constant = 1.0 / mass;
                let density = |x: f64| constant * scalar_kernel(&resolved, x);
                let check = integrate(density, lo, hi, breaks, 1e-15, 1e-13)?;
                if (check - 1.0).abs() > 1e-8 {
                    return Err(Error::Numerical(format!("{spec} integrates to {check}")));
                }
                let table = CdfTable::build(density, lo, hi)?;
                Ok(Self { spec: *spec, resolved, constant, table: Some(table) })
            }
        }
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn is_scalar(&self) -> bool {
        self.table.is_some()
    }

    pub fn is_phenomenological(&self) -> bool {
        self.spec.id.is_phenomenological()
    }

    pub fn support(&self) -> (f64, f64) {
        self.spec.support()
    }

    /// Factor multiplying the catalogued (unnormalised) form.
    pub fn normalization_constant(&self) -> f64 {
        self.constant
    }

    /// Density at a scalar point; zero outside the support.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !self.is_scalar() {
            return Err(Error::Unsupported(format!(
                "{} is a joint density; use joint_pdf",
                self.spec.id
            )));
        }
        Ok(self.constant * scalar_kernel(&self.resolved, x))
    }

    /// Density of a joint distribution at `(r, R[, C])`; zero outside the support.
    pub fn joint_pdf(&self, point: &[f64]) -> Result<f64> {
        use DistributionId::*;
        let arity = self.resolved.id.arity();
        if arity == 1 {
            return Err(Error::Unsupported(format!("{} is a scalar density", self.spec.id)));
        }
        if point.len() != arity {
            return Err(invalid(format!(
                "{} expects {arity} coordinates, got {}",
                self.spec.id,
                point.len()
            )));
        }
        let (r, big_r) = (point[0], point[1]);
        if !(in_unit(r) && in_unit(big_r)) {
            return Ok(0.0);
        }
        Ok(match self.resolved.id {
            FreeJointRR => 6.0 * r.min(big_r).min(1.0 - r).min(1.0 - big_r),
            FreeJointRRC | MonitoredJointRRC => {
                if !constraint_window(r, big_r).contains(point[2]) {
                    0.0
                } else if self.resolved.id == FreeJointRRC {
                    6.0
                } else {
                    let u = r * (1.0 - r);
                    self.constant / (1.0 + 8.0 * self.resolved.lambda * u).powi(3)
                }
            }
            _ => unreachable!(),
        })
    }

    fn table(&self) -> Result<&CdfTable> {
        self.table.as_ref().ok_or_else(|| {
            Error::Unsupported(format!("{} has no scalar CDF", self.spec.id))
        })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.table()?.cdf(x))
    }

    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        Ok(self.table()?.inverse(u))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let table = self.table()?;
        Ok(table.inverse(rng.random::<f64>()))
    }

    /// `(x, pdf, cdf)` on `points` equally spaced support points.
    pub fn curve(&self, points: usize) -> Result<Vec<(f64, f64, f64)>> {
        let table = self.table()?;
        let (lo, hi) = self.support();
        let points = points.max(2);
        Ok((0..points)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                (x, self.constant * scalar_kernel(&self.resolved, x), table.cdf(x))
            })
            .collect())
    }
}

pub fn pdf(spec: &DistributionSpec, x: f64) -> Result<f64> {
    Distribution::get(spec)?.pdf(x)
}

pub fn cdf(spec: &DistributionSpec, x: f64) -> Result<f64> {
    Distribution::get(spec)?.cdf(x)
}

pub fn normalization_constant(spec: &DistributionSpec) -> Result<f64> {
    Ok(Distribution::get(spec)?.normalization_constant())
}

/// Samples `R = r r̃₀ + (1-r) r̃₁` for an unmonitored qubit when one of the
/// `log2 N` qubits is monitored at strength Λ: `r` follows the monitored
/// one-of-many density at `(N, Λ)`, the `r̃` the free one at `(N/2, 0)`.
#[allow(non_snake_case)]
pub fn sample_composed_R<R: Rng + ?Sized>(
    n: usize,
    lambda: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n < 4 || !n.is_power_of_two() {
        return Err(invalid(format!("composition needs N ≥ 4 (power of two), got {n}")));
    }
    let monitored = Distribution::get(
        &DistributionSpec::new(DistributionId::MonitoredR1ofq)
            .with_n(n)
            .with_lambda(lambda),
    )?;
    let conditional =
        Distribution::get(&DistributionSpec::new(DistributionId::MonitoredR1ofq).with_n(n / 2))?;
    (0..count)
        .map(|_| {
            let r = monitored.sample(rng)?;
            let a = conditional.sample(rng)?;
            let b = conditional.sample(rng)?;
            Ok((r * a + (1.0 - r) * b).clamp(0.0, 1.0))
        })
        .collect()
}
