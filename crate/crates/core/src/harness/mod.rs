//! Trajectory runner, histograms and figure recipes.

mod config;
pub mod figures;
pub mod output;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionId, DistributionSpec};
use crate::error::{invalid, Error, Result};
use crate::measurement::{measure_subspace_in_place, SubspaceMask};
use crate::observables::{marginal_of, two_qubit_of};
use crate::parallel::{map_shards, shard_rng};
use crate::state::{renormalize, sample_haar_state, Evolver};

pub use config::{parse_key_values, TrajectoryConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Observable {
    /// All basis probabilities, pooled.
    #[serde(rename = "r_n")]
    Coefficients,
    /// Population of the first qubit in `|0⟩`.
    #[serde(rename = "r")]
    FirstQubit,
    /// Population of the second qubit in `|0⟩`.
    #[serde(rename = "R")]
    SecondQubit,
    #[serde(rename = "C")]
    Correlation,
    #[serde(rename = "concurrence_sq")]
    ConcurrenceSq,
}

impl Observable {
    pub const ALL: [Observable; 5] = [
        Observable::Coefficients,
        Observable::FirstQubit,
        Observable::SecondQubit,
        Observable::Correlation,
        Observable::ConcurrenceSq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Coefficients => "r_n",
            Observable::FirstQubit => "r",
            Observable::SecondQubit => "R",
            Observable::Correlation => "C",
            Observable::ConcurrenceSq => "concurrence_sq",
        }
    }

    pub fn support(self) -> (f64, f64) {
        match self {
            Observable::Correlation => (-0.25, 0.25),
            _ => (0.0, 1.0),
        }
    }

    /// Smallest qubit count the observable is defined for, and the largest.
    fn qubit_range(self) -> (usize, usize) {
        match self {
            Observable::Coefficients | Observable::FirstQubit => (1, usize::MAX),
            Observable::SecondQubit => (2, usize::MAX),
            Observable::Correlation | Observable::ConcurrenceSq => (2, 2),
        }
    }

    pub fn defaults(qubits: usize) -> Vec<Observable> {
        Observable::ALL
            .into_iter()
            .filter(|o| {
                let (lo, hi) = o.qubit_range();
                (lo..=hi).contains(&qubits)
            })
            .collect()
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "conc2" | "concurrence2" => Ok(Observable::ConcurrenceSq),
            t => Observable::ALL
                .into_iter()
                .find(|o| o.name() == t)
                .ok_or_else(|| invalid(format!("unknown observable '{s}'"))),
        }
    }
}

/// Fixed-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        Self {
            edges: (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect(),
            counts: vec![0; bins],
            total: 0,
        }
    }

    pub fn from_samples(lo: f64, hi: f64, bins: usize, samples: &[f64]) -> Self {
        let mut h = Self::uniform(lo, hi, bins);
        samples.iter().for_each(|&x| h.add(x));
        h
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin of `x`; values on or beyond the edges fall into the outer bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let lo = self.edges[0];
        let hi = self.edges[self.bins()];
        let pos = ((x - lo) / (hi - lo) * self.bins() as f64).floor();
        if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(self.bins() - 1)
        }
    }

    pub fn add(&mut self, x: f64) {
        let i = self.bin_of(x);
        self.counts[i] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(invalid("histograms have different bin edges"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    /// Normalised density of bin `i`.
    pub fn density(&self, i: usize) -> f64 {
        let width = self.edges[i + 1] - self.edges[i];
        if self.total == 0 {
            0.0
        } else {
            self.counts[i] as f64 / (self.total as f64 * width)
        }
    }

    pub fn density_at(&self, x: f64) -> f64 {
        self.density(self.bin_of(x))
    }
}

/// Histograms of every post-burn-in step, and thinned samples.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryResult {
    pub histograms: BTreeMap<Observable, Histogram>,
    pub samples: BTreeMap<Observable, Vec<f64>>,
    /// Thinned samples per trajectory (kept apart for autocorrelation).
    pub per_trajectory: Vec<BTreeMap<Observable, Vec<f64>>>,
    /// Largest `| ‖ψ‖² - 1 |` seen at a renormalisation checkpoint.
    pub max_norm_drift: f64,
}

impl TrajectoryResult {
    pub fn samples(&self, obs: Observable) -> &[f64] {
        self.samples.get(&obs).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Catalog density an observable of `config` is expected to follow, with the
/// KS tolerance used for it; `None` where no closed form applies.
pub fn reference_distribution(config: &TrajectoryConfig, obs: Observable) -> Option<(DistributionSpec, f64)> {
    use DistributionId::*;
    use Observable::*;
    let q = config.qubits;
    let n = 1usize << q;
    let mut strengths = config.effective_lambdas();
    strengths.resize(q, 0.0);
    let monitored: Vec<usize> = (0..q).filter(|&i| strengths[i] > 0.0).collect();
    let (l0, l1) = (strengths[0], strengths.get(1).copied().unwrap_or(0.0));
    let exact = |id: DistributionId, lambda: f64| Some((DistributionSpec::new(id).with_lambda(lambda).with_n(n), 0.02));
    match (q, monitored.as_slice(), obs) {
        (1, [], _) => exact(FreeR1, 0.0),
        (1, [0], _) => exact(MonitoredR1q, l0),
        (2, [], Coefficients) => exact(FreeRn2q, 0.0),
        (2, [], FirstQubit | SecondQubit) => exact(FreeR2q, 0.0),
        (2, [], Correlation) => exact(FreeC2q, 0.0),
        (2, [], ConcurrenceSq) => exact(FreeConcurrenceSq, 0.0),
        (2, [0], Coefficients) => exact(MonitoredRn1of2, l0),
        (2, [0], FirstQubit) => exact(MonitoredR1of2, l0),
        (2, [0], SecondQubit) => exact(MonitoredBigR1of2, l0),
        (2, [0], Correlation) => exact(MonitoredC1of2, l0),
        (2, [0], ConcurrenceSq) => exact(MonitoredConcurrenceSq1of2, l0),
        (2, [0, 1], _) => {
            let (id, a, b) = match obs {
                FirstQubit => (SurrogateR2of2, l0, l1),
                SecondQubit => (SurrogateR2of2, l1, l0),
                Correlation => (SurrogateC2of2, l0, l1),
                ConcurrenceSq => (SurrogateConcurrenceSq2of2, l0, l1),
                Coefficients => return None,
            };
            Some((DistributionSpec::new(id).with_lambda(a).with_lambda2(b), 0.05))
        }
        (_, [], Coefficients) => exact(FreeRn, 0.0),
        (_, [], FirstQubit | SecondQubit) => exact(MonitoredR1ofq, 0.0),
        (_, [0], FirstQubit) => exact(MonitoredR1ofq, l0),
        _ => None,
    }
}

const RENORMALIZE_EVERY: usize = 10_000;

fn push_values(obs: Observable, amps: &[Complex64], q: usize, out: &mut Vec<f64>) {
    match obs {
        Observable::Coefficients => out.extend(amps.iter().map(|a| a.norm_sqr())),
        Observable::FirstQubit => out.push(marginal_of(amps, 0, q)),
        Observable::SecondQubit => out.push(marginal_of(amps, 1, q)),
        Observable::Correlation => out.push(two_qubit_of(amps).c),
        Observable::ConcurrenceSq => out.push(two_qubit_of(amps).concurrence.powi(2)),
    }
}

/// Runs `config.trajectories` independent trajectories and pools them.
pub fn run_trajectory(config: &TrajectoryConfig) -> Result<TrajectoryResult> {
    config.validate()?;
    let runs = map_shards(config.execution, config.trajectories, |i| run_single(config, i));
    let mut merged = TrajectoryResult::default();
    for run in runs {
        let run = run?;
        for (obs, h) in run.histograms {
            match merged.histograms.get_mut(&obs) {
                Some(m) => m.merge(&h)?,
                None => {
                    merged.histograms.insert(obs, h);
                }
            }
        }
        for (obs, s) in &run.samples {
            merged.samples.entry(*obs).or_default().extend_from_slice(s);
        }
        merged.max_norm_drift = merged.max_norm_drift.max(run.max_norm_drift);
        merged.per_trajectory.push(run.samples);
    }
    Ok(merged)
}

fn run_single(config: &TrajectoryConfig, index: usize) -> Result<TrajectoryResult> {
    let q = config.qubits;
    let dim = 1usize << q;
    let mut rng = shard_rng(config.seed, index);
    let mut psi = sample_haar_state(dim, &mut rng)?.into_amplitudes();
    let mut evolver = Evolver::new(dim, config.propagator);
    let monitors: Vec<(SubspaceMask, f64)> = config
        .lambdas
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.0)
        .map(|(qubit, &l)| Ok((SubspaceMask::qubit(dim, qubit)?, l)))
        .collect::<Result<_>>()?;
    let observables = config.observables();
    let mut hists: Vec<Histogram> = observables
        .iter()
        .map(|o| {
            let (lo, hi) = o.support();
            Histogram::uniform(lo, hi, config.bins)
        })
        .collect();
    let burn_in = config.burn_in();
    let thinning = config.thinning();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); observables.len()];
    let mut values = Vec::with_capacity(dim);
    let mut max_norm_drift: f64 = 0.0;
    for step in 1..=config.steps {
        evolver.step(&mut psi, config.epsilon, &mut rng);
        for (mask, lambda) in &monitors {
            measure_subspace_in_place(&mut psi, mask, *lambda, &mut rng);
        }
        if step % RENORMALIZE_EVERY == 0 {
            let n: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
            max_norm_drift = max_norm_drift.max((n - 1.0).abs());
            renormalize(&mut psi);
        }
        if step <= burn_in {
            continue;
        }
        let keep = (step - burn_in) % thinning == 0;
        for (k, &obs) in observables.iter().enumerate() {
            values.clear();
            push_values(obs, &psi, q, &mut values);
            for &v in &values {
                hists[k].add(v);
            }
            if keep {
                samples[k].extend_from_slice(&values);
            }
        }
    }
    Ok(TrajectoryResult {
        histograms: observables.iter().copied().zip(hists).collect(),
        samples: observables.into_iter().zip(samples).collect(),
        per_trajectory: Vec::new(),
        max_norm_drift,
    })
}
