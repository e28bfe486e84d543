use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qmonitor_core::coefficients::{
    coefficients, estimate_coefficients_mc_with, sample_interior_state, McOptions, Point, Scenario, Variable,
};
use qmonitor_core::distributions::{Distribution, DistributionId, DistributionSpec};
use qmonitor_core::harness::figures::{reproduce_figure, Check, FigureId, FigureOptions};
use qmonitor_core::harness::output::{curve_csv, histogram_csv, slug, summary_json};
use qmonitor_core::harness::stats::ks_distance;
use qmonitor_core::harness::{
    parse_key_values, reference_distribution, run_trajectory, Histogram, TrajectoryConfig,
};
use qmonitor_core::kicked_top::{run_monitored_top_taps, PhaseTap, TapSamples, TopConfig};
use qmonitor_core::parallel::{map_shards, shard_rng, Execution};
use qmonitor_core::state::Propagator;

type CliResult<T> = Result<T, String>;

/// Monitored random unitary dynamics: trajectories, stationary densities and checks.
///
/// Every flag can also be given in a `key = value` file passed with
/// `--config`; the key is the flag name without dashes. Flags win over the file.
#[derive(Parser)]
#[command(name = "qmonitor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run qubit trajectories, write histograms and KS checks.
    Simulate(SimulateArgs),
    /// Tabulate a catalogued density as `x,pdf,cdf`.
    Analytic(AnalyticArgs),
    /// Closed-form drift/diffusion coefficients, optionally against Monte Carlo.
    Coeffs(CoeffsArgs),
    /// KS distance of a sample file to a catalogued density.
    Compare(CompareArgs),
    /// Monitored kicked top.
    KickedTop(KickedTopArgs),
    /// Reproduce a figure (fig1..fig5, two-of-two, all).
    Figure(FigureArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// free-single, monitored-single, free-two-qubit, free-multi,
    /// monitored-one-of-two, monitored-two-of-two, monitored-one-of-q
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Microscopic strengths λ, comma separated, one per monitored qubit.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Total steps per trajectory, burn-in included.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    /// Comma separated: r_n, r, R, C, concurrence_sq.
    #[arg(long)]
    observables: Option<String>,
    /// series | spectral
    #[arg(long)]
    propagator: Option<String>,
    /// parallel | sequential
    #[arg(long)]
    execution: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog id, e.g. F-r-2q, M-r-1of2, M-r-1ofq.
    #[arg(long)]
    dist: Option<String>,
    /// Effective strength Λ.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Hilbert-space dimension N.
    #[arg(long)]
    n: Option<usize>,
    /// Number of grid points.
    #[arg(long)]
    grid: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Effective strength Λ of the first monitored qubit.
    #[arg(long)]
    lambda: Option<f64>,
    /// Λ′ of the second qubit (two-of-two); defaults to Λ.
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// e.g. "r=0.4,R=0.55,C=0.02" or "r_1=0.1,r_2=0.2,..."; a random
    /// interior state is used when absent.
    #[arg(long)]
    point: Option<String>,
    /// Monte-Carlo single steps; no estimate when absent.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest accepted |estimate - closed form| in standard errors.
    #[arg(long)]
    max_z: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// One sample per line (first comma-separated field); a header is skipped.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct KickedTopArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Half-integer spin, e.g. 15/2 or 7.5.
    #[arg(long)]
    j: Option<String>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    beta_x: Option<f64>,
    #[arg(long)]
    beta_y: Option<f64>,
    /// Slices n_T per half period.
    #[arg(long)]
    slices: Option<usize>,
    /// Microscopic strength per slice.
    #[arg(long)]
    lambda: Option<f64>,
    /// every-slice | rotation-end | torsion-end
    #[arg(long)]
    tap: Option<String>,
    /// Recorded sliced steps per trajectory.
    #[arg(long)]
    steps: Option<usize>,
    /// Burn-in in periods.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    execution: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Steps per qubit trajectory, burn-in included.
    #[arg(long)]
    steps: Option<usize>,
    /// Trajectories pooled per qubit panel.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Recorded sliced steps per kicked-top trajectory.
    #[arg(long)]
    top_steps: Option<usize>,
    #[arg(long)]
    top_trajectories: Option<usize>,
    #[arg(long)]
    propagator: Option<String>,
    #[arg(long)]
    execution: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Collects the flags that were given as `(key, value)` pairs.
macro_rules! flags {
    ($args:expr; $($field:ident => $key:literal),* $(,)?) => {{
        let mut v: Vec<(&'static str, String)> = Vec::new();
        $( if let Some(x) = &$args.$field { v.push(($key, x.to_string())); } )*
        v
    }};
}

/// Config-file values overlaid by flags.
struct Settings(BTreeMap<String, String>);

impl Settings {
    fn load(file: Option<&Path>, flags: Vec<(&str, String)>, known: &[&str]) -> CliResult<Self> {
        let mut map = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                parse_key_values(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        if let Some(k) = map.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(format!("unknown key '{k}' in config file"));
        }
        for (k, v) in flags {
            map.insert(k.to_string(), v);
        }
        Ok(Self(map))
    }

    fn opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.0
            .get(key)
            .map(|v| v.trim().parse().map_err(|_| format!("cannot parse '{v}' for {key}")))
            .transpose()
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn req<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.opt(key)?.ok_or_else(|| format!("missing --{key}"))
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn parse_execution(s: &str) -> CliResult<Execution> {
    match s.trim() {
        "parallel" => Ok(Execution::Parallel),
        "sequential" => Ok(Execution::Sequential),
        other => Err(format!("unknown execution '{other}'")),
    }
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    write(path, &(serde_json::to_string_pretty(value).map_err(|e| e.to_string())? + "\n"))
}

/// Short decimal form: `0.1` rather than `0.10000000000000002`.
fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn report(checks: &[Check]) -> bool {
    for c in checks {
        let verdict = match (c.pass, c.required) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        println!("{verdict:4}  {}  {:.5} {} {}", c.name, c.value, c.relation, c.threshold);
    }
    checks.iter().all(|c| c.pass || !c.required)
}

fn dist_spec(s: &Settings) -> CliResult<DistributionSpec> {
    let id: DistributionId = s.req("dist")?;
    let mut spec = DistributionSpec::new(id);
    if let Some(l) = s.opt("lambda")? {
        spec = spec.with_lambda(l);
    }
    if let Some(l) = s.opt("lambda2")? {
        spec = spec.with_lambda2(l);
    }
    if let Some(n) = s.opt("n")? {
        spec = spec.with_n(n);
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn simulate(args: SimulateArgs) -> CliResult<bool> {
    const KEYS: &[&str] = &[
        "scenario", "qubits", "epsilon", "lambda", "steps", "burn-in", "thin", "seed", "trajectories",
        "observables", "propagator", "execution", "bins", "out",
    ];
    let flags = flags!(args; scenario => "scenario", qubits => "qubits", epsilon => "epsilon",
        lambda => "lambda", steps => "steps", burn_in => "burn-in", thin => "thin", seed => "seed",
        trajectories => "trajectories", observables => "observables", propagator => "propagator",
        execution => "execution", bins => "bins");
    let mut s = Settings::load(args.config.as_deref(), flags, KEYS)?;
    let out = args.out.or_else(|| s.0.remove("out").map(PathBuf::from)).unwrap_or_else(|| ".".into());
    let mut config = TrajectoryConfig::default();
    config.apply_all(s.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))).map_err(|e| e.to_string())?;
    config.validate().map_err(|e| e.to_string())?;

    let start = Instant::now();
    let result = run_trajectory(&config).map_err(|e| e.to_string())?;
    let runtime = start.elapsed().as_secs_f64();

    let mut checks = Vec::new();
    for obs in config.observables() {
        let samples = result.samples(obs);
        let Some((spec, tol)) = reference_distribution(&config, obs) else { continue };
        if samples.len() < 100 {
            eprintln!("{obs}: only {} thinned samples, no KS check", samples.len());
            continue;
        }
        let ks = ks_distance(samples, &spec).map_err(|e| e.to_string())?;
        checks.push(Check::below(format!("{obs} KS vs {} (Lambda={})", spec.id, num(spec.lambda)), ks, tol, true));
    }
    checks.push(Check::below("max norm drift".into(), result.max_norm_drift, 1e-8, false));

    let hist = histogram_csv(result.histograms.iter().map(|(o, h)| (o.name(), h)));
    write(&out.join("histograms.csv"), &hist)?;
    let mut cfg_json = serde_json::to_value(&config).map_err(|e| e.to_string())?;
    cfg_json["burn_in"] = json!(config.burn_in());
    cfg_json["thinning"] = json!(config.thinning());
    cfg_json["effective_lambdas"] = json!(config.effective_lambdas());
    write_json(&out.join("summary.json"), &summary_json(&cfg_json, &checks, runtime, config.seed))?;
    Ok(report(&checks))
}

fn analytic(args: AnalyticArgs) -> CliResult<bool> {
    let flags = flags!(args; dist => "dist", lambda => "lambda", lambda2 => "lambda2", n => "n",
        grid => "grid");
    let s = Settings::load(args.config.as_deref(), flags, &["dist", "lambda", "lambda2", "n", "grid", "out"])?;
    let spec = dist_spec(&s)?;
    let points: usize = s.get("grid", 201)?;
    let dist = Distribution::get(&spec).map_err(|e| e.to_string())?;
    let csv = curve_csv(&dist.curve(points).map_err(|e| e.to_string())?);
    match args.out.or_else(|| s.str("out").map(PathBuf::from)) {
        Some(path) => write(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(true)
}

fn parse_variable(name: &str) -> CliResult<Variable> {
    Ok(match name.trim() {
        "r" => Variable::SmallR,
        "R" => Variable::BigR,
        "C" => Variable::C,
        "Conc" | "concurrence" => Variable::Concurrence,
        other => {
            let k: usize = other
                .strip_prefix("r_")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k >= 1)
                .ok_or_else(|| format!("unknown variable '{other}'"))?;
            Variable::Coef(k - 1)
        }
    })
}

fn parse_scenario(s: &Settings) -> CliResult<Scenario> {
    let lambda: f64 = s.get("lambda", 0.0)?;
    let n = || s.req::<usize>("n");
    let scenario = match s.str("scenario").ok_or("missing --scenario")?.trim() {
        "free-single" => Scenario::FreeSingle,
        "free-multi" => Scenario::FreeMulti { n: n()? },
        "free-two-qubit" => Scenario::FreeTwoQubit,
        "monitored-single" => Scenario::MonitoredOneOfQ { n: 2, lambda },
        "monitored-one-of-two" => Scenario::MonitoredOneOfTwo { lambda },
        "monitored-two-of-two" => Scenario::MonitoredTwoOfTwo { lambda, lambda2: s.get("lambda2", lambda)? },
        "monitored-one-of-q" => Scenario::MonitoredOneOfQ { n: n()?, lambda },
        other => return Err(format!("unknown scenario '{other}'")),
    };
    scenario.validate().map_err(|e| e.to_string())?;
    Ok(scenario)
}

fn coeffs(args: CoeffsArgs) -> CliResult<bool> {
    const KEYS: &[&str] =
        &["scenario", "lambda", "lambda2", "n", "point", "samples", "epsilon", "seed", "max-z", "out"];
    let flags = flags!(args; scenario => "scenario", lambda => "lambda", lambda2 => "lambda2", n => "n",
        point => "point", samples => "samples", epsilon => "epsilon", seed => "seed", max_z => "max-z");
    let s = Settings::load(args.config.as_deref(), flags, KEYS)?;
    let scenario = parse_scenario(&s)?;
    let seed: u64 = s.get("seed", 1)?;
    let state = match s.str("point") {
        Some(text) => {
            let mut point = Point::new();
            for item in text.split(',').filter(|t| !t.trim().is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| format!("expected name=value, got '{item}'"))?;
                let v: f64 = v.trim().parse().map_err(|_| format!("cannot parse '{v}'"))?;
                point.set(parse_variable(k)?, v);
            }
            point.to_state(&scenario).map_err(|e| e.to_string())?
        }
        None => sample_interior_state(&scenario, 0.5, &mut shard_rng(seed, usize::MAX))
            .map_err(|e| e.to_string())?,
    };
    let point = Point::from_state(&scenario, &state).map_err(|e| e.to_string())?;
    let closed = coefficients(&scenario, &point).map_err(|e| e.to_string())?;
    let mut summary = json!({
        "scenario": scenario,
        "point": point.iter().map(|(v, x)| (v.to_string(), x)).collect::<BTreeMap<_, _>>(),
        "coefficients": closed.entries().into_iter().collect::<BTreeMap<_, _>>(),
    });
    for (name, value) in closed.entries() {
        println!("{name:12} {value:.6}");
    }
    let mut ok = true;
    if let Some(samples) = s.opt::<usize>("samples")? {
        let epsilon: f64 = s.get("epsilon", 0.02)?;
        let max_z: f64 = s.get("max-z", 4.0)?;
        let estimate = estimate_coefficients_mc_with(&scenario, &state, epsilon, samples, seed, McOptions::default())
            .map_err(|e| e.to_string())?;
        let checks: Vec<Check> = estimate
            .compare(&closed)
            .iter()
            .map(|c| {
                let name = format!("{} (closed {:.5}, estimate {:.5} ± {:.5}) z", c.name, c.closed_form, c.estimate, c.standard_error);
                Check::below(name, c.z(), max_z, true)
            })
            .collect();
        ok = report(&checks);
        summary["epsilon"] = json!(epsilon);
        summary["samples"] = json!(samples);
        summary["checks"] = json!(checks);
    }
    if let Some(path) = args.out.or_else(|| s.str("out").map(PathBuf::from)) {
        write_json(&path, &summary)?;
    }
    Ok(ok)
}

fn read_samples(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if out.is_empty() && no == 0 => {}
            Err(_) => return Err(format!("{}:{}: not a number: '{field}'", path.display(), no + 1)),
        }
    }
    Ok(out)
}

fn compare(args: CompareArgs) -> CliResult<bool> {
    let flags = flags!(args; dist => "dist", lambda => "lambda", lambda2 => "lambda2", n => "n",
        threshold => "threshold");
    let mut flags = flags;
    if let Some(p) = &args.samples {
        flags.push(("samples", p.display().to_string()));
    }
    let s = Settings::load(
        args.config.as_deref(),
        flags,
        &["samples", "dist", "lambda", "lambda2", "n", "threshold"],
    )?;
    let spec = dist_spec(&s)?;
    let samples = read_samples(Path::new(s.str("samples").ok_or("missing --samples")?))?;
    let threshold: f64 = s.get("threshold", 0.02)?;
    let ks = ks_distance(&samples, &spec).map_err(|e| e.to_string())?;
    let check = Check::below(format!("KS of {} samples vs {}", samples.len(), spec.id), ks, threshold, true);
    Ok(report(&[check]))
}

fn parse_two_j(text: &str) -> CliResult<usize> {
    let bad = || format!("cannot parse spin '{text}'");
    let twice = match text.trim().split_once('/') {
        Some((num, "2")) => num.trim().parse::<usize>().map_err(|_| bad())?,
        Some(_) => return Err(bad()),
        None => {
            let j: f64 = text.trim().parse().map_err(|_| bad())?;
            let t = 2.0 * j;
            if t < 0.0 || t.fract() != 0.0 {
                return Err(bad());
            }
            t as usize
        }
    };
    Ok(twice)
}

fn kicked_top(args: KickedTopArgs) -> CliResult<bool> {
    const KEYS: &[&str] = &[
        "j", "k", "beta-x", "beta-y", "slices", "lambda", "tap", "steps", "burn-in", "seed",
        "trajectories", "bins", "execution", "out",
    ];
    let flags = flags!(args; j => "j", k => "k", beta_x => "beta-x", beta_y => "beta-y",
        slices => "slices", lambda => "lambda", tap => "tap", steps => "steps", burn_in => "burn-in",
        seed => "seed", trajectories => "trajectories", bins => "bins", execution => "execution");
    let s = Settings::load(args.config.as_deref(), flags, KEYS)?;
    let d = TopConfig::default();
    let cfg = TopConfig {
        two_j: s.str("j").map(parse_two_j).transpose()?.unwrap_or(d.two_j),
        k: s.get("k", d.k)?,
        beta_x: s.get("beta-x", d.beta_x)?,
        beta_y: s.get("beta-y", d.beta_y)?,
        n_t: s.get("slices", d.n_t)?,
        lambda: s.get("lambda", d.lambda)?,
        tap: s.get("tap", d.tap).map_err(|_| "unknown tap".to_string())?,
        burn_in_periods: s.get("burn-in", d.burn_in_periods)?,
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let steps: usize = s.get("steps", 500_000)?;
    let seed: u64 = s.get("seed", 1)?;
    let trajectories: usize = s.get("trajectories", 4)?;
    let bins: usize = s.get("bins", 50)?;
    let execution = s.str("execution").map(parse_execution).transpose()?.unwrap_or_default();
    let out = args.out.or_else(|| s.str("out").map(PathBuf::from)).unwrap_or_else(|| ".".into());

    let start = Instant::now();
    let mut taps = TapSamples::default();
    for run in map_shards(execution, trajectories, |i| run_monitored_top_taps(&cfg, steps, &mut shard_rng(seed, i))) {
        let run = run.map_err(|e| e.to_string())?;
        taps.every_slice.extend(run.every_slice);
        taps.rotation_end.extend(run.rotation_end);
        taps.torsion_end.extend(run.torsion_end);
    }
    let runtime = start.elapsed().as_secs_f64();

    let lambda = cfg.effective_lambda();
    let reference = DistributionSpec::new(DistributionId::MonitoredR1ofq).with_n(cfg.dim()).with_lambda(lambda);
    let mut checks = Vec::new();
    let mut histograms = Vec::new();
    for tap in PhaseTap::ALL {
        let samples = taps.for_ks(&cfg, tap);
        if samples.len() < 100 {
            continue;
        }
        let ks = ks_distance(&samples, &reference).map_err(|e| e.to_string())?;
        // only the every-slice stream follows Λ = λ² n_T exactly
        let required = tap == PhaseTap::EverySlice;
        checks.push(Check::below(format!("{tap} KS vs {} (N={}, Lambda={})", reference.id, cfg.dim(), num(lambda)), ks, 0.05, required));
        histograms.push((format!("r@{tap}"), Histogram::from_samples(0.0, 1.0, bins, taps.get(tap))));
    }
    // the selected tap comes first in the histogram file
    histograms.sort_by_key(|(name, _)| name != &format!("r@{}", cfg.tap));
    write(&out.join("histograms.csv"), &histogram_csv(histograms.iter().map(|(n, h)| (n.as_str(), h))))?;
    let config = json!({ "top": cfg, "steps": steps, "trajectories": trajectories, "effective_lambda": lambda });
    write_json(&out.join("summary.json"), &summary_json(&config, &checks, runtime, seed))?;
    Ok(report(&checks))
}

fn figure(args: FigureArgs) -> CliResult<bool> {
    const KEYS: &[&str] =
        &["id", "seed", "steps", "trajectories", "top-steps", "top-trajectories", "propagator", "execution", "out"];
    let flags = flags!(args; id => "id", seed => "seed", steps => "steps", trajectories => "trajectories",
        top_steps => "top-steps", top_trajectories => "top-trajectories", propagator => "propagator",
        execution => "execution");
    let s = Settings::load(args.config.as_deref(), flags, KEYS)?;
    let d = FigureOptions::default();
    let opts = FigureOptions {
        seed: s.get("seed", d.seed)?,
        steps: s.get("steps", d.steps)?,
        trajectories: s.get("trajectories", d.trajectories)?,
        top_steps: s.get("top-steps", d.top_steps)?,
        top_trajectories: s.get("top-trajectories", d.top_trajectories)?,
        propagator: s.str("propagator").map(Propagator::from_str).transpose().map_err(|e| e.to_string())?.unwrap_or(d.propagator),
        execution: s.str("execution").map(parse_execution).transpose()?.unwrap_or(d.execution),
        ..d
    };
    let out = args.out.or_else(|| s.str("out").map(PathBuf::from)).unwrap_or_else(|| ".".into());
    let id = s.str("id").ok_or("missing --id")?;
    let ids: Vec<FigureId> = if id == "all" {
        FigureId::ALL.to_vec()
    } else {
        vec![id.parse().map_err(|e: qmonitor_core::Error| e.to_string())?]
    };
    let mut ok = true;
    for id in &ids {
        let dir = if ids.len() > 1 { out.join(id.name()) } else { out.clone() };
        println!("== {id}: {}", id.description());
        let rep = reproduce_figure(*id, &opts).map_err(|e| e.to_string())?;
        write(&dir.join("histograms.csv"), &histogram_csv(rep.panels.iter().map(|p| (p.label.as_str(), &p.histogram))))?;
        for p in &rep.panels {
            write(&dir.join(format!("curve_{}.csv", slug(&p.label))), &curve_csv(&p.curve))?;
        }
        write_json(&dir.join("summary.json"), &summary_json(&rep.settings, &rep.checks, rep.runtime_seconds, rep.seed))?;
        ok &= report(&rep.checks);
        println!("   {:.1} s", rep.runtime_seconds);
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analytic(a) => analytic(a),
        Command::Coeffs(a) => coeffs(a),
        Command::Compare(a) => compare(a),
        Command::KickedTop(a) => kicked_top(a),
        Command::Figure(a) => figure(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
