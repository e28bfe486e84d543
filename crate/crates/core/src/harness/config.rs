use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Observable;
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::state::Propagator;

/// A trajectory run. `steps` counts every step, burn-in included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub qubits: usize,
    pub epsilon: f64,
    /// Microscopic strength `λ` per qubit; missing entries are unmonitored.
    pub lambdas: Vec<f64>,
    pub steps: usize,
    /// Defaults to `10 ⌈1/ε²⌉`.
    pub burn_in: Option<usize>,
    /// Defaults to `⌈1/ε²⌉`.
    pub thinning: Option<usize>,
    pub seed: u64,
    /// Independent trajectories pooled into one result.
    pub trajectories: usize,
    /// Empty means every observable defined for the qubit count.
    pub observables: Vec<Observable>,
    pub bins: usize,
    pub propagator: Propagator,
    pub execution: Execution,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            qubits: 2,
            epsilon: 0.1,
            lambdas: Vec::new(),
            steps: 500_000,
            burn_in: None,
            thinning: None,
            seed: 1,
            trajectories: 1,
            observables: Vec::new(),
            bins: 50,
            propagator: Propagator::default(),
            execution: Execution::default(),
        }
    }
}

fn relaxation_steps(epsilon: f64) -> usize {
    (1.0 / (epsilon * epsilon)).ceil() as usize
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse '{value}' for '{key}'")))
}

impl TrajectoryConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(10 * relaxation_steps(self.epsilon))
    }

    pub fn thinning(&self) -> usize {
        self.thinning.unwrap_or(relaxation_steps(self.epsilon))
    }

    pub fn observables(&self) -> Vec<Observable> {
        if self.observables.is_empty() {
            Observable::defaults(self.qubits)
        } else {
            self.observables.clone()
        }
    }

    /// `Λ_i = λ_i² / ε²` per qubit.
    pub fn effective_lambdas(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l * l / (self.epsilon * self.epsilon)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(1..=8).contains(&self.qubits) {
            return fail(format!("qubits must lie in 1..=8, got {}", self.qubits));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.5) {
            return fail(format!("epsilon must lie in (0, 0.5], got {}", self.epsilon));
        }
        if self.lambdas.len() > self.qubits {
            return fail(format!("{} strengths given for {} qubits", self.lambdas.len(), self.qubits));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return fail(format!("measurement strength {l} outside [0, 1)"));
        }
        if self.steps <= self.burn_in() {
            return fail(format!("steps ({}) must exceed burn-in ({})", self.steps, self.burn_in()));
        }
        if self.thinning() == 0 || self.trajectories == 0 || self.bins == 0 {
            return fail("thinning, trajectories and bins must be at least 1".into());
        }
        for o in self.observables() {
            let (lo, hi) = o.qubit_range();
            if !(lo..=hi).contains(&self.qubits) {
                return fail(format!("observable {o} is undefined for {} qubits", self.qubits));
            }
        }
        Ok(())
    }

    /// Sets one field from its key-value name (the CLI flag without dashes).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "qubits" => self.qubits = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "lambda" => {
                self.lambdas = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "steps" => self.steps = parse(key, value)?,
            "burn-in" => self.burn_in = Some(parse(key, value)?),
            "thin" => self.thinning = Some(parse(key, value)?),
            "seed" => self.seed = parse(key, value)?,
            "trajectories" => self.trajectories = parse(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "observables" => {
                self.observables =
                    value.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?
            }
            "propagator" => self.propagator = value.trim().parse()?,
            "execution" => {
                self.execution = match value.trim() {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    other => return Err(Error::Config(format!("unknown execution '{other}'"))),
                }
            }
            "scenario" => self.apply_scenario(value.trim())?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Presets: qubit count and which qubits are monitored. A single strength
    /// given for `two-of-two` applies to both qubits.
    fn apply_scenario(&mut self, name: &str) -> Result<()> {
        let first = self.lambdas.first().copied();
        match name {
            "free-single" => {
                self.qubits = 1;
                self.lambdas.clear();
            }
            "monitored-single" => self.qubits = 1,
            "free-two-qubit" => {
                self.qubits = 2;
                self.lambdas.clear();
            }
            "free-multi" => self.lambdas.clear(),
            "monitored-one-of-two" => {
                self.qubits = 2;
                self.lambdas.truncate(1);
            }
            "monitored-two-of-two" => {
                self.qubits = 2;
                if self.lambdas.len() == 1 {
                    self.lambdas.push(first.unwrap_or(0.0));
                }
            }
            "monitored-one-of-q" => self.lambdas.truncate(1),
            other => return Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        let mut scenario = None;
        for (k, v) in pairs {
            // presets act on the final strength list, whatever the key order
            if k.trim() == "scenario" {
                scenario = Some(v);
            } else {
                self.apply(k, v)?;
            }
        }
        if let Some(s) = scenario {
            self.apply("scenario", s)?;
        }
        Ok(())
    }
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
        out.insert(k.trim().trim_start_matches("--").to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_epsilon() {
        let c = TrajectoryConfig { epsilon: 0.1, ..Default::default() };
        assert_eq!(c.thinning(), 100);
        assert_eq!(c.burn_in(), 1000);
        let c = TrajectoryConfig { epsilon: 0.1, lambdas: vec![0.05f64.sqrt()], ..Default::default() };
        assert!((c.effective_lambdas()[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn key_value_files() {
        let text = "# run\nscenario = monitored-two-of-two\nlambda = 0.1  # Λ = 1\n--steps=20000\nobservables=r,C\n";
        let map = parse_key_values(text).unwrap();
        let mut c = TrajectoryConfig::default();
        c.apply_all(map.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(c.lambdas, vec![0.1, 0.1]);
        assert_eq!(c.steps, 20_000);
        assert_eq!(c.observables, vec![Observable::FirstQubit, Observable::Correlation]);
        c.validate().unwrap();
        assert!(parse_key_values("no equals sign").is_err());
        assert!(c.apply("colour", "blue").is_err());
        assert!(c.apply("steps", "many").is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            TrajectoryConfig { qubits: 0, ..Default::default() },
            TrajectoryConfig { epsilon: 0.0, ..Default::default() },
            TrajectoryConfig { lambdas: vec![0.1, 0.1, 0.1], ..Default::default() },
            TrajectoryConfig { lambdas: vec![1.5], ..Default::default() },
            TrajectoryConfig { steps: 100, ..Default::default() },
            TrajectoryConfig { qubits: 3, observables: vec![Observable::Correlation], ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
