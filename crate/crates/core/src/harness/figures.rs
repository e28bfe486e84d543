//! Reproduction recipes: run the published configuration of a figure and
//! score every panel against its analytic or oracle curve.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::stats::{ks_distance, ks_two_sample, mean};
use super::{run_trajectory, Histogram, Observable, TrajectoryConfig, TrajectoryResult};
use crate::distributions::{sample_composed_R, Distribution, DistributionId, DistributionSpec};
use crate::error::{invalid, Error, Result};
use crate::kicked_top::{run_monitored_top_taps, PhaseTap, TapSamples, TopConfig};
use crate::parallel::{derive_seed, map_shards, shard_rng, Execution};
use crate::quadrature::integrate;
use crate::state::Propagator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    TwoOfTwo,
}

impl FigureId {
    pub const ALL: [FigureId; 6] = [
        FigureId::Fig1,
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::TwoOfTwo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig1 => "fig1",
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::TwoOfTwo => "two-of-two",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            FigureId::Fig1 => "two qubits without monitoring",
            FigureId::Fig2 => "two qubits, one monitored, Λ ∈ {1, 5}",
            FigureId::Fig3 => "four qubits, one monitored, Λ ∈ {1, 5}",
            FigureId::Fig4 => "monitored kicked top, weak regime n_T ∈ {10, 20}",
            FigureId::Fig5 => "monitored kicked top, n_T = 40, three phase taps",
            FigureId::TwoOfTwo => "two qubits, both monitored, Λ = Λ′ ∈ {1, 5}",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| invalid(format!("unknown figure '{s}' (fig1..fig5, two-of-two)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    pub seed: u64,
    /// Steps per qubit trajectory, burn-in included.
    pub steps: usize,
    /// Independent qubit trajectories pooled per panel.
    pub trajectories: usize,
    /// Recorded sliced steps per kicked-top trajectory.
    pub top_steps: usize,
    pub top_trajectories: usize,
    /// Draws from sampling oracles.
    pub oracle_samples: usize,
    pub propagator: Propagator,
    pub execution: Execution,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            steps: 500_000,
            trajectories: 8,
            top_steps: 500_000,
            top_trajectories: 4,
            oracle_samples: 200_000,
            propagator: Propagator::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// How `value` is compared with `threshold`.
    pub relation: &'static str,
    pub pass: bool,
    /// Whether the check decides the exit status.
    pub required: bool,
}

impl Check {
    pub fn below(name: String, value: f64, threshold: f64, required: bool) -> Self {
        Self { name, value, threshold, relation: "<", pass: value < threshold, required }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Panel {
    pub label: String,
    pub histogram: Histogram,
    /// `(x, pdf, cdf)` of the reference curve.
    pub curve: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureReport {
    pub id: FigureId,
    pub settings: serde_json::Value,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub panels: Vec<Panel>,
    pub seed: u64,
    pub runtime_seconds: f64,
}

impl FigureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.required)
    }
}

const CURVE_POINTS: usize = 201;

fn curve_of(spec: &DistributionSpec) -> Result<Vec<(f64, f64, f64)>> {
    Distribution::get(spec)?.curve(CURVE_POINTS)
}

/// Curve read off oracle samples: histogram density and empirical CDF.
fn sampled_curve(samples: &[f64], bins: usize) -> Vec<(f64, f64, f64)> {
    let h = Histogram::from_samples(0.0, 1.0, bins, samples);
    let mut acc = 0u64;
    (0..bins)
        .map(|i| {
            acc += h.counts[i];
            (0.5 * (h.edges[i] + h.edges[i + 1]), h.density(i), acc as f64 / h.total.max(1) as f64)
        })
        .collect()
}

struct Scorer<'a> {
    prefix: String,
    run: &'a TrajectoryResult,
    checks: Vec<Check>,
    panels: Vec<Panel>,
}

impl<'a> Scorer<'a> {
    fn new(prefix: String, run: &'a TrajectoryResult) -> Self {
        Self { prefix, run, checks: Vec::new(), panels: Vec::new() }
    }

    fn against(&mut self, obs: Observable, spec: DistributionSpec, threshold: f64, required: bool) -> Result<f64> {
        let ks = ks_distance(self.run.samples(obs), &spec)?;
        let label = format!("{}/{obs}", self.prefix);
        self.checks.push(Check::below(format!("{label} KS vs {}", spec.id), ks, threshold, required));
        self.panels.push(Panel {
            label,
            histogram: self.run.histograms[&obs].clone(),
            curve: curve_of(&spec)?,
        });
        Ok(ks)
    }
}

fn qubit_config(opts: &FigureOptions, qubits: usize, lambdas: Vec<f64>, stream: u64) -> TrajectoryConfig {
    TrajectoryConfig {
        qubits,
        epsilon: 0.1,
        lambdas,
        steps: opts.steps,
        seed: derive_seed(opts.seed, stream),
        trajectories: opts.trajectories,
        propagator: opts.propagator,
        execution: opts.execution,
        ..Default::default()
    }
}

/// `(Λ, λ)` pairs at `ε = 0.1`.
const STRENGTHS: [(f64, f64); 2] = [(1.0, 0.1), (5.0, 0.223_606_797_749_979)];

pub fn reproduce_figure(id: FigureId, opts: &FigureOptions) -> Result<FigureReport> {
    let start = Instant::now();
    let (settings, checks, panels) = match id {
        FigureId::Fig1 => fig1(opts)?,
        FigureId::Fig2 => fig2(opts)?,
        FigureId::Fig3 => fig3(opts)?,
        FigureId::TwoOfTwo => two_of_two(opts)?,
        FigureId::Fig4 => fig4(opts)?,
        FigureId::Fig5 => fig5(opts)?,
    };
    Ok(FigureReport {
        id,
        settings,
        checks,
        panels,
        seed: opts.seed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

type Parts = (serde_json::Value, Vec<Check>, Vec<Panel>);

fn spec(id: DistributionId) -> DistributionSpec {
    DistributionSpec::new(id)
}

fn fig1(opts: &FigureOptions) -> Result<Parts> {
    use DistributionId::*;
    let cfg = qubit_config(opts, 2, vec![], 0);
    let run = run_trajectory(&cfg)?;
    let mut s = Scorer::new("fig1".into(), &run);
    s.against(Observable::Coefficients, spec(FreeRn2q), 0.02, true)?;
    s.against(Observable::FirstQubit, spec(FreeR2q), 0.02, true)?;
    s.against(Observable::SecondQubit, spec(FreeR2q), 0.02, true)?;
    s.against(Observable::Correlation, spec(FreeC2q), 0.02, true)?;
    s.against(Observable::ConcurrenceSq, spec(FreeConcurrenceSq), 0.02, true)?;
    let expected = integrate(|y| 1.5 * y * (1.0 - y).sqrt(), 0.0, 1.0, &[], 1e-14, 1e-14)?;
    let m = mean(run.samples(Observable::ConcurrenceSq));
    s.checks.push(Check::below(
        format!("fig1/concurrence_sq |mean - {expected:.3}|"),
        (m - expected).abs(),
        0.01,
        true,
    ));
    Ok((json!({ "trajectory": cfg }), s.checks, s.panels))
}

fn fig2(opts: &FigureOptions) -> Result<Parts> {
    use DistributionId::*;
    let runs = map_shards(opts.execution, STRENGTHS.len(), |k| {
        let cfg = qubit_config(opts, 2, vec![STRENGTHS[k].1], k as u64);
        run_trajectory(&cfg).map(|r| (cfg, r))
    });
    let mut checks = Vec::new();
    let mut panels = Vec::new();
    let mut configs = Vec::new();
    let mut centre = Vec::new();
    for (run, (lambda, _)) in runs.into_iter().zip(STRENGTHS) {
        let (cfg, run) = run?;
        let mut s = Scorer::new(format!("fig2/Lambda={lambda}"), &run);
        let at = |id| spec(id).with_lambda(lambda);
        s.against(Observable::FirstQubit, at(MonitoredR1of2), 0.02, true)?;
        s.against(Observable::SecondQubit, at(MonitoredBigR1of2), 0.02, true)?;
        s.against(Observable::Correlation, at(MonitoredC1of2), 0.02, true)?;
        s.against(Observable::ConcurrenceSq, at(MonitoredConcurrenceSq1of2), 0.02, true)?;
        s.against(Observable::Coefficients, at(MonitoredRn1of2), 0.02, false)?;
        centre.push(run.histograms[&Observable::FirstQubit].density_at(0.5));
        checks.extend(s.checks);
        panels.extend(s.panels);
        configs.push(cfg);
    }
    checks.push(Check {
        name: "fig2/r density at 1/2: Lambda=5 below Lambda=1".into(),
        value: centre[1],
        threshold: centre[0],
        relation: "<",
        pass: centre[1] < centre[0],
        required: true,
    });
    Ok((json!({ "trajectories": configs }), checks, panels))
}

fn fig3(opts: &FigureOptions) -> Result<Parts> {
    use DistributionId::*;
    let n = 16;
    let runs = map_shards(opts.execution, STRENGTHS.len(), |k| {
        let mut cfg = qubit_config(opts, 4, vec![STRENGTHS[k].1], k as u64);
        cfg.observables = vec![Observable::FirstQubit, Observable::SecondQubit];
        run_trajectory(&cfg).map(|r| (cfg, r))
    });
    let mut checks = Vec::new();
    let mut panels = Vec::new();
    let mut configs = Vec::new();
    for (k, (run, (lambda, _))) in runs.into_iter().zip(STRENGTHS).enumerate() {
        let (cfg, run) = run?;
        let prefix = format!("fig3/Lambda={lambda}");
        let mut s = Scorer::new(prefix.clone(), &run);
        s.against(Observable::FirstQubit, spec(MonitoredR1ofq).with_n(n).with_lambda(lambda), 0.02, true)?;
        checks.extend(s.checks);
        panels.extend(s.panels);
        let mut rng = shard_rng(derive_seed(opts.seed, 100 + k as u64), 0);
        let oracle = sample_composed_R(n, lambda, opts.oracle_samples, &mut rng)?;
        let ks = ks_two_sample(run.samples(Observable::SecondQubit), &oracle)?;
        checks.push(Check::below(format!("{prefix}/R two-sample KS vs composed oracle"), ks, 0.03, true));
        panels.push(Panel {
            label: format!("{prefix}/R"),
            histogram: run.histograms[&Observable::SecondQubit].clone(),
            curve: sampled_curve(&oracle, 100),
        });
        configs.push(cfg);
    }
    Ok((json!({ "trajectories": configs }), checks, panels))
}

fn two_of_two(opts: &FigureOptions) -> Result<Parts> {
    use DistributionId::*;
    let runs = map_shards(opts.execution, STRENGTHS.len(), |k| {
        let l = STRENGTHS[k].1;
        let cfg = qubit_config(opts, 2, vec![l, l], k as u64);
        run_trajectory(&cfg).map(|r| (cfg, r))
    });
    let mut checks = Vec::new();
    let mut panels = Vec::new();
    let mut configs = Vec::new();
    for (run, (lambda, _)) in runs.into_iter().zip(STRENGTHS) {
        let (cfg, run) = run?;
        let mut s = Scorer::new(format!("two-of-two/Lambda={lambda}"), &run);
        let at = |id| spec(id).with_lambda(lambda).with_lambda2(lambda);
        s.against(Observable::FirstQubit, at(SurrogateR2of2), 0.05, true)?;
        s.against(Observable::SecondQubit, at(SurrogateR2of2), 0.05, false)?;
        s.against(Observable::Correlation, at(SurrogateC2of2), 0.05, true)?;
        s.against(Observable::ConcurrenceSq, at(SurrogateConcurrenceSq2of2), 0.05, true)?;
        checks.extend(s.checks);
        panels.extend(s.panels);
        configs.push(cfg);
    }
    Ok((json!({ "trajectories": configs }), checks, panels))
}

/// Pooled tap samples of independent kicked-top trajectories.
fn top_runs(opts: &FigureOptions, cfg: &TopConfig, stream: u64) -> Result<TapSamples> {
    let seed = derive_seed(opts.seed, stream);
    let runs = map_shards(opts.execution, opts.top_trajectories, |i| {
        run_monitored_top_taps(cfg, opts.top_steps, &mut shard_rng(seed, i))
    });
    let mut all = TapSamples::default();
    for run in runs {
        let run = run?;
        all.every_slice.extend(run.every_slice);
        all.rotation_end.extend(run.rotation_end);
        all.torsion_end.extend(run.torsion_end);
    }
    Ok(all)
}

fn one_of_sixteen(lambda: f64) -> DistributionSpec {
    spec(DistributionId::MonitoredR1ofq).with_n(16).with_lambda(lambda)
}

fn fig4(opts: &FigureOptions) -> Result<Parts> {
    let mut checks = Vec::new();
    let mut panels = Vec::new();
    let mut configs = Vec::new();
    for (k, n_t) in [10usize, 20].into_iter().enumerate() {
        let cfg = TopConfig { n_t, ..Default::default() };
        let taps = top_runs(opts, &cfg, k as u64)?;
        let lambda = cfg.effective_lambda();
        let reference = one_of_sixteen(lambda);
        let ks = ks_distance(&taps.for_ks(&cfg, PhaseTap::EverySlice), &reference)?;
        let label = format!("fig4/n_T={n_t}/r");
        checks.push(Check::below(format!("{label} KS vs {} (Lambda={lambda})", reference.id), ks, 0.05, true));
        panels.push(Panel {
            label,
            histogram: Histogram::from_samples(0.0, 1.0, 50, &taps.every_slice),
            curve: curve_of(&reference)?,
        });
        configs.push(cfg);
    }
    Ok((json!({ "top": configs, "recorded_sliced_steps": opts.top_steps, "trajectories": opts.top_trajectories }), checks, panels))
}

fn fig5(opts: &FigureOptions) -> Result<Parts> {
    let cfg = TopConfig { n_t: 40, ..Default::default() };
    let taps = top_runs(opts, &cfg, 0)?;
    // candidate strengths, each tap's expected match per the figure caption
    let candidates = [0.4, 0.8, 0.2];
    let expected = [(PhaseTap::EverySlice, 0.4), (PhaseTap::RotationEnd, 0.8), (PhaseTap::TorsionEnd, 0.2)];
    let mut checks = Vec::new();
    let mut panels = Vec::new();
    for (tap, target) in expected {
        let samples = taps.for_ks(&cfg, tap);
        let label = format!("fig5/{tap}/r");
        let mut distances = Vec::new();
        for lambda in candidates {
            let ks = ks_distance(&samples, &one_of_sixteen(lambda))?;
            checks.push(Check {
                name: format!("{label} KS vs Lambda={lambda}"),
                value: ks,
                threshold: f64::NAN,
                relation: "report",
                pass: true,
                required: false,
            });
            distances.push((lambda, ks));
        }
        let best = distances
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|d| d.0)
            .expect("three candidates");
        checks.push(Check {
            name: format!("{label} closest Lambda (expected {target})"),
            value: best,
            threshold: target,
            relation: "==",
            pass: best == target,
            required: true,
        });
        panels.push(Panel {
            label,
            histogram: Histogram::from_samples(0.0, 1.0, 50, taps.get(tap)),
            curve: curve_of(&one_of_sixteen(target))?,
        });
    }
    Ok((json!({ "top": cfg, "recorded_sliced_steps": opts.top_steps, "trajectories": opts.top_trajectories, "candidates": candidates }), checks, panels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_names() {
        for f in FigureId::ALL {
            assert_eq!(f.name().parse::<FigureId>().unwrap(), f);
        }
        assert!("fig6".parse::<FigureId>().is_err());
    }

    #[test]
    fn short_fig1_runs() {
        let opts = FigureOptions { steps: 20_000, trajectories: 2, ..Default::default() };
        let report = reproduce_figure(FigureId::Fig1, &opts).unwrap();
        assert_eq!(report.panels.len(), 5);
        assert_eq!(report.checks.len(), 6);
        assert!(report.checks.iter().all(|c| c.value.is_finite()));
    }
}
