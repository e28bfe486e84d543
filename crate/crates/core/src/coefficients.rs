//! Drift, diffusion and cross-correlation coefficients of the reduced
//! variables, their Monte-Carlo estimates from the microscopic process, and an
//! Euler–Maruyama integrator on the reduced variables.
//!
//! Coefficients are increment moments per `ε²`: `d_x = ⟨Δx⟩/ε²`,
//! `D_{x,y} = ⟨Δx Δy⟩/ε²`, so the Fokker–Planck operator carries `½ ∂²D`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::constraint_window;
use crate::error::{invalid, Result};
use crate::measurement::{measure_subspace_in_place, SubspaceMask};
use crate::observables::{marginal_of, two_qubit_of};
use crate::parallel::{map_shards, shard_rng, Execution};
use crate::state::{sample_haar_state, Evolver, Propagator, QuantumState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    FreeSingle,
    FreeMulti { n: usize },
    FreeTwoQubit,
    MonitoredOneOfTwo { lambda: f64 },
    MonitoredTwoOfTwo { lambda: f64, lambda2: f64 },
    /// First of `log2 n` qubits monitored; `n = 2` is the monitored single qubit.
    MonitoredOneOfQ { n: usize, lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variable {
    /// Probability of the first qubit in `|0⟩`.
    SmallR,
    BigR,
    C,
    Concurrence,
    /// Basis probability `r_{n+1}` (zero-based index).
    Coef(usize),
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::SmallR => write!(f, "r"),
            Variable::BigR => write!(f, "R"),
            Variable::C => write!(f, "C"),
            Variable::Concurrence => write!(f, "Conc"),
            Variable::Coef(n) => write!(f, "r_{}", n + 1),
        }
    }
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::FreeSingle => "free-single",
            Scenario::FreeMulti { .. } => "free-multi",
            Scenario::FreeTwoQubit => "free-two-qubit",
            Scenario::MonitoredOneOfTwo { .. } => "monitored-one-of-two",
            Scenario::MonitoredTwoOfTwo { .. } => "monitored-two-of-two",
            Scenario::MonitoredOneOfQ { .. } => "monitored-one-of-q",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Scenario::FreeSingle => 2,
            Scenario::FreeMulti { n } | Scenario::MonitoredOneOfQ { n, .. } => n,
            _ => 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |x: f64, name: &str| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be finite and nonnegative, got {x}")))
            }
        };
        match *self {
            Scenario::FreeSingle | Scenario::FreeTwoQubit => Ok(()),
            Scenario::FreeMulti { n } if n < 2 => Err(invalid(format!("N must be ≥ 2, got {n}"))),
            Scenario::FreeMulti { .. } => Ok(()),
            Scenario::MonitoredOneOfTwo { lambda } => nonneg(lambda, "Λ"),
            Scenario::MonitoredTwoOfTwo { lambda, lambda2 } => {
                nonneg(lambda, "Λ")?;
                nonneg(lambda2, "Λ′")
            }
            Scenario::MonitoredOneOfQ { n, lambda } => {
                if n < 2 || !n.is_power_of_two() {
                    return Err(invalid(format!("N must be a power of two ≥ 2, got {n}")));
                }
                nonneg(lambda, "Λ")
            }
        }
    }

    /// Variables tracked by the Monte-Carlo estimator, in order.
    pub fn variables(&self) -> Vec<Variable> {
        use Variable::*;
        match *self {
            Scenario::FreeSingle => vec![SmallR],
            Scenario::FreeMulti { n } => (0..n).map(Coef).collect(),
            Scenario::FreeTwoQubit => vec![SmallR, BigR, C, Concurrence],
            Scenario::MonitoredOneOfTwo { .. } | Scenario::MonitoredTwoOfTwo { .. } => {
                vec![SmallR, BigR, C]
            }
            Scenario::MonitoredOneOfQ { n, .. } => {
                let mut v: Vec<Variable> = (0..n).map(Coef).collect();
                v.push(SmallR);
                v
            }
        }
    }

    /// Variables advanced by [`sde_step`].
    pub fn sde_variables(&self) -> Vec<Variable> {
        use Variable::*;
        match *self {
            Scenario::FreeSingle => vec![SmallR],
            Scenario::FreeMulti { n } | Scenario::MonitoredOneOfQ { n, .. } => {
                (0..n).map(Coef).collect()
            }
            _ => vec![SmallR, BigR, C],
        }
    }

    /// `(qubit, Λ)` of every monitored qubit, in measurement order.
    pub fn monitored(&self) -> Vec<(usize, f64)> {
        match *self {
            Scenario::MonitoredOneOfTwo { lambda } | Scenario::MonitoredOneOfQ { lambda, .. } => {
                vec![(0, lambda)]
            }
            Scenario::MonitoredTwoOfTwo { lambda, lambda2 } => vec![(0, lambda), (1, lambda2)],
            _ => Vec::new(),
        }
    }

    fn is_two_qubit(&self) -> bool {
        matches!(
            self,
            Scenario::FreeTwoQubit
                | Scenario::MonitoredOneOfTwo { .. }
                | Scenario::MonitoredTwoOfTwo { .. }
        )
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Scenario::FreeMulti { n } => write!(f, "free-multi(N={n})"),
            Scenario::MonitoredOneOfTwo { lambda } => write!(f, "monitored-one-of-two(Λ={lambda})"),
            Scenario::MonitoredTwoOfTwo { lambda, lambda2 } => {
                write!(f, "monitored-two-of-two(Λ={lambda}, Λ′={lambda2})")
            }
            Scenario::MonitoredOneOfQ { n, lambda } => {
                write!(f, "monitored-one-of-q(N={n}, Λ={lambda})")
            }
            other => f.write_str(other.name()),
        }
    }
}

/// A variable assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Point(BTreeMap<Variable, f64>);

impl Point {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Variable, value: f64) -> Self {
        self.0.insert(var, value);
        self
    }

    pub fn set(&mut self, var: Variable, value: f64) {
        self.0.insert(var, value);
    }

    pub fn get(&self, var: Variable) -> Option<f64> {
        self.0.get(&var).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Variable, f64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    fn req(&self, var: Variable) -> Result<f64> {
        self.get(var).ok_or_else(|| invalid(format!("point is missing variable {var}")))
    }

    /// The scenario's variables read off a state.
    pub fn from_state(scenario: &Scenario, state: &QuantumState) -> Result<Self> {
        scenario.validate()?;
        if state.dim() != scenario.dim() {
            return Err(invalid(format!(
                "{scenario} needs dimension {}, got {}",
                scenario.dim(),
                state.dim()
            )));
        }
        let vars = scenario.variables();
        let values = observe(scenario, state.amplitudes());
        Ok(Self(vars.into_iter().zip(values).collect()))
    }
}

impl Point {
    /// A state with real nonnegative amplitudes realising the point.
    pub fn to_state(&self, scenario: &Scenario) -> Result<QuantumState> {
        use Variable::*;
        scenario.validate()?;
        let probs: Vec<f64> = match *scenario {
            Scenario::FreeSingle => {
                let r = self.req(SmallR)?;
                vec![r, 1.0 - r]
            }
            Scenario::FreeMulti { n } | Scenario::MonitoredOneOfQ { n, .. } => {
                (0..n).map(|i| self.req(Coef(i))).collect::<Result<_>>()?
            }
            _ => {
                let coeffs = crate::observables::ReducedCoefficients {
                    r: self.req(SmallR)?,
                    big_r: self.req(BigR)?,
                    c: self.req(C)?,
                    concurrence: 0.0,
                };
                coeffs.reconstruct().to_vec()
            }
        };
        if probs.iter().any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p)) {
            return Err(invalid("point does not correspond to a probability vector"));
        }
        QuantumState::from_amplitudes(
            probs.iter().map(|p| Complex64::new(p.max(0.0).sqrt(), 0.0)).collect(),
        )
    }
}

/// Values of `scenario.variables()` for normalised amplitudes.
fn observe(scenario: &Scenario, amps: &[Complex64]) -> Vec<f64> {
    match *scenario {
        Scenario::FreeSingle => vec![amps[0].norm_sqr()],
        Scenario::FreeMulti { .. } => amps.iter().map(|a| a.norm_sqr()).collect(),
        Scenario::FreeTwoQubit => {
            let c = two_qubit_of(amps);
            vec![c.r, c.big_r, c.c, c.concurrence]
        }
        Scenario::MonitoredOneOfTwo { .. } | Scenario::MonitoredTwoOfTwo { .. } => {
            let c = two_qubit_of(amps);
            vec![c.r, c.big_r, c.c]
        }
        Scenario::MonitoredOneOfQ { n, .. } => {
            let mut v: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
            v.push(marginal_of(amps, 0, n.trailing_zeros() as usize));
            v
        }
    }
}

/// Drifts and a symmetric table of diffusion/cross coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientSet {
    drifts: BTreeMap<Variable, f64>,
    diffusions: BTreeMap<(Variable, Variable), f64>,
}

fn ordered(a: Variable, b: Variable) -> (Variable, Variable) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl CoefficientSet {
    pub fn set_drift(&mut self, var: Variable, value: f64) {
        self.drifts.insert(var, value);
    }

    pub fn set_diffusion(&mut self, a: Variable, b: Variable, value: f64) {
        self.diffusions.insert(ordered(a, b), value);
    }

    pub fn drift(&self, var: Variable) -> Option<f64> {
        self.drifts.get(&var).copied()
    }

    /// `D_{a,b}`; `D_{a,a}` is the diffusion of `a`.
    pub fn diffusion(&self, a: Variable, b: Variable) -> Option<f64> {
        self.diffusions.get(&ordered(a, b)).copied()
    }

    pub fn diffusion_matrix(&self, vars: &[Variable]) -> Option<Vec<Vec<f64>>> {
        vars.iter()
            .map(|&a| vars.iter().map(|&b| self.diffusion(a, b)).collect())
            .collect()
    }

    /// `("d_x", value)` and `("D_x,y", value)` entries.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> =
            self.drifts.iter().map(|(v, x)| (format!("d_{v}"), *x)).collect();
        for ((a, b), x) in &self.diffusions {
            let name = if a == b { format!("D_{a}") } else { format!("D_{a},{b}") };
            out.push((name, *x));
        }
        out
    }

    fn keys(&self) -> Vec<Key> {
        let mut keys: Vec<Key> = self.drifts.keys().map(|&v| Key::Drift(v)).collect();
        keys.extend(self.diffusions.keys().map(|&(a, b)| Key::Diffusion(a, b)));
        keys
    }

    fn value(&self, key: Key) -> Option<f64> {
        match key {
            Key::Drift(v) => self.drift(v),
            Key::Diffusion(a, b) => self.diffusion(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Key {
    Drift(Variable),
    Diffusion(Variable, Variable),
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Key::Drift(v) => write!(f, "d_{v}"),
            Key::Diffusion(a, b) if a == b => write!(f, "D_{a}"),
            Key::Diffusion(a, b) => write!(f, "D_{a},{b}"),
        }
    }
}

fn check_unit(name: Variable, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {x} lies outside [0, 1]")))
    }
}

/// Closed-form coefficients of `scenario` at `point`.
pub fn coefficients(scenario: &Scenario, point: &Point) -> Result<CoefficientSet> {
    scenario.validate()?;
    use Variable::*;
    match *scenario {
        Scenario::FreeSingle => {
            let r = point.req(SmallR)?;
            check_unit(SmallR, r)?;
        }
        Scenario::FreeMulti { n } | Scenario::MonitoredOneOfQ { n, .. } => {
            let mut total = 0.0;
            for i in 0..n {
                let x = point.req(Coef(i))?;
                check_unit(Coef(i), x)?;
                total += x;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("basis probabilities sum to {total}, not 1")));
            }
        }
        _ => {
            let (r, rr, c) = (point.req(SmallR)?, point.req(BigR)?, point.req(C)?);
            check_unit(SmallR, r)?;
            check_unit(BigR, rr)?;
            let w = constraint_window(r, rr);
            if !(w.lower - 1e-12..=w.upper + 1e-12).contains(&c) {
                return Err(invalid(format!(
                    "C = {c} outside its window [{}, {}]",
                    w.lower, w.upper
                )));
            }
            if let Some(conc) = point.get(Concurrence) {
                if !(conc > 0.0 && conc <= 1.0) {
                    return Err(invalid(format!("concurrence {conc} outside (0, 1]")));
                }
            }
        }
    }
    Ok(unchecked(scenario, point))
}

/// Coefficient formulas without domain checks; missing variables read as zero.
fn unchecked(scenario: &Scenario, point: &Point) -> CoefficientSet {
    use Variable::*;
    let get = |v| point.get(v).unwrap_or(0.0);
    let mut set = CoefficientSet::default();
    match *scenario {
        Scenario::FreeSingle => {
            let r = get(SmallR);
            set.set_drift(SmallR, 0.5 - r);
            set.set_diffusion(SmallR, SmallR, r * (1.0 - r));
        }
        Scenario::FreeMulti { n } => {
            let nf = n as f64;
            for i in 0..n {
                let ri = get(Coef(i));
                set.set_drift(Coef(i), 1.0 / nf - ri);
                set.set_diffusion(Coef(i), Coef(i), 2.0 / nf * ri * (1.0 - ri));
                for j in i + 1..n {
                    set.set_diffusion(Coef(i), Coef(j), -2.0 / nf * ri * get(Coef(j)));
                }
            }
        }
        Scenario::MonitoredOneOfQ { n, lambda } => {
            let nf = n as f64;
            let l = lambda;
            let probs: Vec<f64> = (0..n).map(|i| get(Coef(i))).collect();
            let total: f64 = probs.iter().sum();
            let r: f64 = probs[..n / 2].iter().sum();
            // r + x_n - 1 for the monitored qubit in |0⟩ (first half) or |1⟩
            let shift = |i: usize| if i < n / 2 { r - 1.0 } else { r };
            for i in 0..n {
                let ri = probs[i];
                let others = total - ri;
                set.set_drift(Coef(i), (others - (nf - 1.0) * ri) / nf);
                set.set_diffusion(
                    Coef(i),
                    Coef(i),
                    2.0 / nf * ri * others + 4.0 * l * ri * ri * shift(i).powi(2),
                );
                for j in i + 1..n {
                    let rj = probs[j];
                    set.set_diffusion(
                        Coef(i),
                        Coef(j),
                        -2.0 / nf * ri * rj + 4.0 * l * ri * rj * shift(i) * shift(j),
                    );
                }
            }
            set.set_drift(SmallR, 0.5 - r);
            set.set_diffusion(
                SmallR,
                SmallR,
                2.0 / nf * r * (1.0 - r) + 4.0 * l * r * r * (1.0 - r).powi(2),
            );
        }
        Scenario::FreeTwoQubit
        | Scenario::MonitoredOneOfTwo { .. }
        | Scenario::MonitoredTwoOfTwo { .. } => {
            let (r, rr, c) = (get(SmallR), get(BigR), get(C));
            let mut d = [0.5 - r, 0.5 - rr, -1.5 * c + (0.5 - r) * (0.5 - rr)];
            let mut dd = [
                r * (1.0 - r) / 2.0,
                rr * (1.0 - rr) / 2.0,
                (c * (1.0 - 2.0 * r) * (1.0 - 2.0 * rr) - c * c + r * (1.0 - r) * rr * (1.0 - rr))
                    / 2.0,
            ];
            // D_{r,R}, D_{r,C}, D_{R,C}
            let mut cross = [c / 2.0, (0.5 - r) * c, (0.5 - rr) * c];
            let (l1, l2) = match *scenario {
                Scenario::MonitoredOneOfTwo { lambda } => (lambda, 0.0),
                Scenario::MonitoredTwoOfTwo { lambda, lambda2 } => (lambda, lambda2),
                _ => (0.0, 0.0),
            };
            if l1 > 0.0 {
                let u = r * (1.0 - r);
                d[2] -= 4.0 * l1 * c * u;
                dd[0] += 4.0 * l1 * u * u;
                dd[1] += 4.0 * l1 * c * c;
                dd[2] += 4.0 * l1 * c * c * (1.0 - 2.0 * r).powi(2);
                cross[0] += 4.0 * l1 * c * u;
                cross[1] += 4.0 * l1 * c * u * (1.0 - 2.0 * r);
                cross[2] += 4.0 * l1 * c * c * (1.0 - 2.0 * r);
            }
            if l2 > 0.0 {
                let u = rr * (1.0 - rr);
                d[2] -= 4.0 * l2 * c * u;
                dd[0] += 4.0 * l2 * c * c;
                dd[1] += 4.0 * l2 * u * u;
                dd[2] += 4.0 * l2 * c * c * (1.0 - 2.0 * rr).powi(2);
                cross[0] += 4.0 * l2 * c * u;
                cross[1] += 4.0 * l2 * c * c * (1.0 - 2.0 * rr);
                cross[2] += 4.0 * l2 * c * u * (1.0 - 2.0 * rr);
            }
            let vars = [SmallR, BigR, C];
            for k in 0..3 {
                set.set_drift(vars[k], d[k]);
                set.set_diffusion(vars[k], vars[k], dd[k]);
            }
            set.set_diffusion(SmallR, BigR, cross[0]);
            set.set_diffusion(SmallR, C, cross[1]);
            set.set_diffusion(BigR, C, cross[2]);
            if let (Scenario::FreeTwoQubit, Some(conc)) = (scenario, point.get(Concurrence)) {
                set.set_drift(Concurrence, 1.0 / (4.0 * conc) - conc);
                set.set_diffusion(Concurrence, Concurrence, 0.5 * (1.0 - conc * conc));
            }
        }
    }
    set
}

/// `(Σ_x ∂d_x/∂x, ½ Σ_{x,y} ∂²D_{x,y}/∂x∂y)` by central differences with one
/// Richardson extrapolation; equal when the uniform density is stationary.
pub fn uniform_stationarity_terms(
    scenario: &Scenario,
    point: &Point,
    vars: &[Variable],
    step: f64,
) -> (f64, f64) {
    let eval = |h: f64| {
        let at = |shifts: &[(Variable, f64)]| {
            let mut p = point.clone();
            for &(v, s) in shifts {
                p.set(v, p.get(v).unwrap_or(0.0) + s);
            }
            unchecked(scenario, &p)
        };
        let base = unchecked(scenario, point);
        let mut div = 0.0;
        let mut curv = 0.0;
        for &x in vars {
            let plus = at(&[(x, h)]);
            let minus = at(&[(x, -h)]);
            div += (plus.drift(x).unwrap_or(0.0) - minus.drift(x).unwrap_or(0.0)) / (2.0 * h);
            for &y in vars {
                let dxy = |s: &CoefficientSet| s.diffusion(x, y).unwrap_or(0.0);
                curv += if x == y {
                    (dxy(&plus) - 2.0 * dxy(&base) + dxy(&minus)) / (h * h)
                } else {
                    (dxy(&at(&[(x, h), (y, h)])) - dxy(&at(&[(x, h), (y, -h)]))
                        - dxy(&at(&[(x, -h), (y, h)]))
                        + dxy(&at(&[(x, -h), (y, -h)])))
                        / (4.0 * h * h)
                };
            }
        }
        (div, 0.5 * curv)
    };
    let (d1, c1) = eval(step);
    let (d2, c2) = eval(0.5 * step);
    ((4.0 * d2 - d1) / 3.0, (4.0 * c2 - c1) / 3.0)
}

/// Monte-Carlo estimate with one-standard-error uncertainties.
#[derive(Debug, Clone)]
pub struct CoefficientEstimate {
    pub values: CoefficientSet,
    pub errors: CoefficientSet,
    pub samples: usize,
}

/// Closed form against estimate for one coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientCheck {
    pub name: String,
    pub closed_form: f64,
    pub estimate: f64,
    pub standard_error: f64,
}

impl CoefficientCheck {
    /// Deviation in standard errors.
    pub fn z(&self) -> f64 {
        (self.estimate - self.closed_form).abs() / self.standard_error.max(1e-300)
    }
}

impl CoefficientEstimate {
    /// Pairs every closed-form coefficient with its estimate.
    pub fn compare(&self, closed: &CoefficientSet) -> Vec<CoefficientCheck> {
        closed
            .keys()
            .into_iter()
            .filter_map(|key| {
                Some(CoefficientCheck {
                    name: key.to_string(),
                    closed_form: closed.value(key)?,
                    estimate: self.values.value(key)?,
                    standard_error: self.errors.value(key)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub propagator: Propagator,
    pub execution: Execution,
    /// Jackknife blocks, each an independent random stream.
    pub blocks: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { propagator: Propagator::default(), execution: Execution::default(), blocks: 256 }
    }
}

pub fn estimate_coefficients_mc<R: Rng + ?Sized>(
    scenario: &Scenario,
    state: &QuantumState,
    epsilon: f64,
    samples: usize,
    rng: &mut R,
) -> Result<CoefficientEstimate> {
    estimate_coefficients_mc_with(scenario, state, epsilon, samples, rng.random(), McOptions::default())
}

/// Single composite steps (unitary, then one measurement per monitored qubit
/// at `λ = √Λ ε`) from a fixed state, in independent blocks.
pub fn estimate_coefficients_mc_with(
    scenario: &Scenario,
    state: &QuantumState,
    epsilon: f64,
    samples: usize,
    seed: u64,
    options: McOptions,
) -> Result<CoefficientEstimate> {
    let origin = Point::from_state(scenario, state)?;
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(invalid(format!("ε must lie in (0, 0.5], got {epsilon}")));
    }
    let blocks = options.blocks.max(2);
    if samples < blocks {
        return Err(invalid(format!("need at least {blocks} samples")));
    }
    let dim = state.dim();
    let mut measurements = Vec::new();
    for (qubit, lambda) in scenario.monitored() {
        let strength = lambda.sqrt() * epsilon;
        if strength >= 1.0 {
            return Err(invalid(format!("microscopic strength √Λ·ε = {strength} must be < 1")));
        }
        if strength > 0.0 {
            measurements.push((SubspaceMask::qubit(dim, qubit)?, strength));
        }
    }
    let vars = scenario.variables();
    let k = vars.len();
    let base: Vec<f64> = vars.iter().map(|&v| origin.get(v).unwrap_or(0.0)).collect();
    let eps2 = epsilon * epsilon;

    // per block: mean increment and mean increment products, per ε²
    let per_block = map_shards(options.execution, blocks, |b| {
        let count = samples / blocks + usize::from(b < samples % blocks);
        let mut rng = shard_rng(seed, b);
        let mut evolver = Evolver::new(dim, options.propagator);
        let start = state.amplitudes();
        let mut psi = start.to_vec();
        let mut first = vec![0.0; k];
        let mut second = vec![0.0; k * k];
        let mut delta = vec![0.0; k];
        for _ in 0..count {
            psi.copy_from_slice(start);
            evolver.step(&mut psi, epsilon, &mut rng);
            for (mask, lambda) in &measurements {
                measure_subspace_in_place(&mut psi, mask, *lambda, &mut rng);
            }
            for (d, (x, x0)) in delta.iter_mut().zip(observe(scenario, &psi).into_iter().zip(&base)) {
                *d = x - x0;
            }
            for i in 0..k {
                first[i] += delta[i];
                for j in i..k {
                    second[i * k + j] += delta[i] * delta[j];
                }
            }
        }
        let scale = 1.0 / (count as f64 * eps2);
        first.iter_mut().for_each(|x| *x *= scale);
        second.iter_mut().for_each(|x| *x *= scale);
        (count, first, second)
    });

    let total: usize = per_block.iter().map(|b| b.0).sum();
    let stat = |pick: &dyn Fn(&(usize, Vec<f64>, Vec<f64>)) -> f64| jackknife(&per_block, pick);
    let mut values = CoefficientSet::default();
    let mut errors = CoefficientSet::default();
    for i in 0..k {
        let (m, se) = stat(&|b| b.1[i]);
        values.set_drift(vars[i], m);
        errors.set_drift(vars[i], se);
        for j in i..k {
            let (m, se) = stat(&|b| b.2[i * k + j]);
            values.set_diffusion(vars[i], vars[j], m);
            errors.set_diffusion(vars[i], vars[j], se);
        }
    }
    Ok(CoefficientEstimate { values, errors, samples: total })
}

/// Count-weighted mean over blocks and its delete-one-block jackknife error.
fn jackknife(
    blocks: &[(usize, Vec<f64>, Vec<f64>)],
    pick: &dyn Fn(&(usize, Vec<f64>, Vec<f64>)) -> f64,
) -> (f64, f64) {
    let n: f64 = blocks.iter().map(|b| b.0 as f64).sum();
    let weighted: f64 = blocks.iter().map(|b| b.0 as f64 * pick(b)).sum();
    let mean = weighted / n;
    let g = blocks.len() as f64;
    let leave_out: Vec<f64> = blocks
        .iter()
        .map(|b| (weighted - b.0 as f64 * pick(b)) / (n - b.0 as f64))
        .collect();
    let avg = leave_out.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * leave_out.iter().map(|x| (x - avg).powi(2)).sum::<f64>();
    (mean, var.sqrt())
}

/// Symmetric PSD square root; negative eigenvalues are projected to zero.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn reflect_unit(x: f64) -> f64 {
    let y = if x < 0.0 {
        -x
    } else if x > 1.0 {
        2.0 - x
    } else {
        x
    };
    y.clamp(0.0, 1.0)
}

/// One Euler–Maruyama step of the reduced variables.
pub fn sde_step<R: Rng + ?Sized>(
    point: &Point,
    scenario: &Scenario,
    dt: f64,
    rng: &mut R,
) -> Result<Point> {
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(invalid(format!("dt must lie in (0, 1e-2], got {dt}")));
    }
    let vars = scenario.sde_variables();
    let mut full = point.clone();
    if let Scenario::MonitoredOneOfQ { .. } = scenario {
        // the closure variable is derived from the basis probabilities
        full.0.remove(&Variable::SmallR);
        let n = scenario.dim();
        let r = (0..n / 2).map(|i| full.get(Variable::Coef(i)).unwrap_or(0.0)).sum();
        full.set(Variable::SmallR, r);
    }
    let mut check = full.clone();
    check.0.remove(&Variable::Concurrence);
    let set = coefficients(scenario, &check)?;
    let k = vars.len();
    let diffusion = DMatrix::from_fn(k, k, |i, j| set.diffusion(vars[i], vars[j]).unwrap_or(0.0));
    let root = psd_sqrt(&diffusion);
    let noise: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let sdt = dt.sqrt();
    let mut next: Vec<f64> = (0..k)
        .map(|i| {
            let x = full.get(vars[i]).unwrap_or(0.0);
            let kick: f64 = (0..k).map(|j| root[(i, j)] * noise[j]).sum();
            x + set.drift(vars[i]).unwrap_or(0.0) * dt + kick * sdt
        })
        .collect();
    let mut out = Point::new();
    if scenario.is_two_qubit() {
        next[0] = reflect_unit(next[0]);
        next[1] = reflect_unit(next[1]);
        let w = constraint_window(next[0], next[1]);
        next[2] = next[2].clamp(w.lower, w.upper);
    } else {
        next.iter_mut().for_each(|x| *x = reflect_unit(*x));
        if k > 1 {
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= total);
        }
    }
    for (v, x) in vars.iter().zip(&next) {
        out.set(*v, *x);
    }
    if let Scenario::MonitoredOneOfQ { n, .. } = *scenario {
        out.set(Variable::SmallR, next[..n / 2].iter().sum());
    }
    Ok(out)
}

/// A Haar-random state whose reduced variables sit well inside the domain:
/// basis probabilities above `margin / N`, `r`, `R` in `[margin/2, 1 - margin/2]`
/// and, for two qubits, concurrence in `[margin/2, 1 - margin/2]`.
pub fn sample_interior_state<R: Rng + ?Sized>(
    scenario: &Scenario,
    margin: f64,
    rng: &mut R,
) -> Result<QuantumState> {
    scenario.validate()?;
    let dim = scenario.dim();
    let inner = 0.5 * margin..=1.0 - 0.5 * margin;
    for _ in 0..100_000 {
        let state = sample_haar_state(dim, rng)?;
        let amps = state.amplitudes();
        if amps.iter().any(|a| a.norm_sqr() < margin / dim as f64) {
            continue;
        }
        if dim.is_power_of_two() && dim >= 4 {
            let q = dim.trailing_zeros() as usize;
            let r = marginal_of(amps, 0, q);
            if !inner.contains(&r) {
                continue;
            }
        }
        if scenario.is_two_qubit() {
            let c = two_qubit_of(amps);
            if !(inner.contains(&c.big_r) && inner.contains(&c.concurrence)) {
                continue;
            }
        }
        return Ok(state);
    }
    Err(invalid("no interior state found; margin too large"))
}
