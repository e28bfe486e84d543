//! The monitored quantum kicked top.
//!
//! Each Floquet period applies the torsion factor `F_x` and then the rotation
//! `F_y`, both cut into `n_T` slices with a hemisphere measurement after every
//! slice. The effective monitoring strength is `Λ = λ² n_T`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{exp_i_hermitian, CMatrix};
use crate::measurement::{measure_subspace_in_place, SubspaceMask};
use crate::state::{renormalize, sample_haar_state};

/// Angular momentum matrices in the `J_z` basis ordered `m = j, j-1, …, -j`.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
    /// `2j`.
    pub two_j: usize,
}

impl SpinOperators {
    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_j + 1
    }
}

/// Spin-`j` operators for `j = two_j / 2`.
pub fn build_spin_operators(two_j: usize) -> SpinOperators {
    let dim = two_j + 1;
    let j = two_j as f64 / 2.0;
    let m = |i: usize| j - i as f64;
    // ⟨m+1|J₊|m⟩ sits at (i-1, i)
    let plus = CMatrix::from_fn(dim, |a, b| {
        if b == a + 1 {
            let mb = m(b);
            Complex64::new((j * (j + 1.0) - mb * (mb + 1.0)).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let minus = plus.adjoint();
    let jx = plus.add(&minus).scale(Complex64::new(0.5, 0.0));
    let jy = plus.sub(&minus).scale(Complex64::new(0.0, -0.5));
    let jz = CMatrix::from_fn(dim, |a, b| {
        if a == b {
            Complex64::new(m(a), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    SpinOperators { jx, jy, jz, two_j }
}

/// Where in the Floquet period `r` is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseTap {
    #[default]
    EverySlice,
    /// After the last slice of the rotation `F_y`.
    RotationEnd,
    /// After the last slice of the torsion `F_x`.
    TorsionEnd,
}

impl PhaseTap {
    pub const ALL: [PhaseTap; 3] = [PhaseTap::EverySlice, PhaseTap::RotationEnd, PhaseTap::TorsionEnd];

    pub fn name(self) -> &'static str {
        match self {
            PhaseTap::EverySlice => "every-slice",
            PhaseTap::RotationEnd => "rotation-end",
            PhaseTap::TorsionEnd => "torsion-end",
        }
    }
}

impl fmt::Display for PhaseTap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhaseTap {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        PhaseTap::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| invalid(format!("unknown phase tap '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopConfig {
    /// `2j`; must be odd.
    pub two_j: usize,
    pub k: f64,
    pub beta_x: f64,
    pub beta_y: f64,
    pub n_t: usize,
    /// Microscopic measurement strength per slice.
    pub lambda: f64,
    pub tap: PhaseTap,
    pub burn_in_periods: usize,
}

impl Default for TopConfig {
    fn default() -> Self {
        Self {
            two_j: 15,
            k: 8.0,
            beta_x: 0.8,
            beta_y: 2.0,
            n_t: 10,
            lambda: 0.1,
            tap: PhaseTap::EverySlice,
            burn_in_periods: 1000,
        }
    }
}

impl TopConfig {
    pub fn dim(&self) -> usize {
        self.two_j + 1
    }

    /// `Λ = λ² n_T`.
    pub fn effective_lambda(&self) -> f64 {
        self.lambda * self.lambda * self.n_t as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.two_j % 2 == 0 {
            return Err(invalid(format!(
                "j = {} is an integer; the hemisphere split needs half-integer j",
                self.two_j / 2
            )));
        }
        if self.n_t == 0 {
            return Err(invalid("n_T must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(invalid(format!("λ must lie in [0, 1), got {}", self.lambda)));
        }
        if ![self.k, self.beta_x, self.beta_y].iter().all(|x| x.is_finite()) {
            return Err(invalid("k, β_x and β_y must be finite"));
        }
        Ok(())
    }
}

/// `(F_x^{1/n_T}, F_y^{1/n_T})`.
pub fn floquet_slices(config: &TopConfig) -> Result<(CMatrix, CMatrix)> {
    config.validate()?;
    let spin = build_spin_operators(config.two_j);
    let torsion = spin.jx.matmul(&spin.jx).scale(Complex64::new(config.k / config.dim() as f64, 0.0));
    let gx = torsion.add(&spin.jx.scale(Complex64::new(config.beta_x, 0.0)));
    let gy = spin.jy.scale(Complex64::new(config.beta_y, 0.0));
    let t = -1.0 / config.n_t as f64;
    Ok((exp_i_hermitian(&gx, t), exp_i_hermitian(&gy, t)))
}

/// Hemisphere populations `r` recorded at every tap.
#[derive(Debug, Clone, Default)]
pub struct TapSamples {
    pub every_slice: Vec<f64>,
    pub rotation_end: Vec<f64>,
    pub torsion_end: Vec<f64>,
}

impl TapSamples {
    /// Samples used for KS: the every-slice stream is thinned with a stride
    /// coprime to the period so that all slice phases are visited.
    pub fn for_ks(&self, config: &TopConfig, tap: PhaseTap) -> Vec<f64> {
        match tap {
            PhaseTap::EverySlice => self.every_slice.iter().step_by(2 * config.n_t + 1).copied().collect(),
            other => self.get(other).to_vec(),
        }
    }

    pub fn get(&self, tap: PhaseTap) -> &[f64] {
        match tap {
            PhaseTap::EverySlice => &self.every_slice,
            PhaseTap::RotationEnd => &self.rotation_end,
            PhaseTap::TorsionEnd => &self.torsion_end,
        }
    }
}

/// Runs `steps` sliced steps (two per slice pair, `2 n_T` per period) after
/// the burn-in and records `r` at all taps.
pub fn run_monitored_top_taps<R: Rng + ?Sized>(
    config: &TopConfig,
    steps: usize,
    rng: &mut R,
) -> Result<TapSamples> {
    let (fx, fy) = floquet_slices(config)?;
    let dim = config.dim();
    let mask = SubspaceMask::upper_half(dim)?;
    let mut psi = sample_haar_state(dim, rng)?.into_amplitudes();
    let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
    let per_period = 2 * config.n_t;
    let periods = steps.div_ceil(per_period);
    let mut out = TapSamples {
        every_slice: Vec::with_capacity(periods * per_period),
        rotation_end: Vec::with_capacity(periods),
        torsion_end: Vec::with_capacity(periods),
    };
    let mut slice = |psi: &mut Vec<Complex64>, f: &CMatrix, rng: &mut R| {
        f.apply_into(psi, &mut scratch);
        psi.copy_from_slice(&scratch);
        if config.lambda > 0.0 {
            measure_subspace_in_place(psi, &mask, config.lambda, rng);
        }
    };
    for period in 0..config.burn_in_periods + periods {
        let record = period >= config.burn_in_periods;
        for f in [&fx, &fy] {
            for _ in 0..config.n_t {
                slice(&mut psi, f, rng);
                if record {
                    out.every_slice.push(mask.weight(&psi));
                }
            }
            if record {
                let r = mask.weight(&psi);
                if std::ptr::eq(f, &fx) {
                    out.torsion_end.push(r);
                } else {
                    out.rotation_end.push(r);
                }
            }
        }
        renormalize(&mut psi);
    }
    out.every_slice.truncate(steps);
    Ok(out)
}

/// Samples of `r` at the configured tap.
pub fn run_monitored_top<R: Rng + ?Sized>(
    config: &TopConfig,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut taps = run_monitored_top_taps(config, steps, rng)?;
    Ok(match config.tap {
        PhaseTap::EverySlice => taps.every_slice,
        PhaseTap::RotationEnd => std::mem::take(&mut taps.rotation_end),
        PhaseTap::TorsionEnd => std::mem::take(&mut taps.torsion_end),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::shard_rng;

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.matmul(b).sub(&b.matmul(a))
    }

    #[test]
    fn spin_algebra() {
        for two_j in [1, 2, 3, 15] {
            let s = build_spin_operators(two_j);
            let i = Complex64::new(0.0, 1.0);
            assert!(commutator(&s.jx, &s.jy).max_abs_diff(&s.jz.scale(i)) < 1e-12);
            assert!(commutator(&s.jy, &s.jz).max_abs_diff(&s.jx.scale(i)) < 1e-12);
            assert!(commutator(&s.jz, &s.jx).max_abs_diff(&s.jy.scale(i)) < 1e-12);
            let casimir = s.jx.matmul(&s.jx).add(&s.jy.matmul(&s.jy)).add(&s.jz.matmul(&s.jz));
            let j = s.j();
            let expect = CMatrix::identity(s.dim()).scale(Complex64::new(j * (j + 1.0), 0.0));
            assert!(casimir.max_abs_diff(&expect) < 1e-10);
        }
        let half = build_spin_operators(1);
        assert_eq!(half.jz[(0, 0)].re, 0.5);
        assert_eq!(half.jx[(0, 1)].re, 0.5);
        assert_eq!(build_spin_operators(15).dim(), 16);
    }

    #[test]
    fn slices_compose_to_full_factors() {
        let cfg = TopConfig { two_j: 1, k: 0.0, beta_x: 2.0 * std::f64::consts::PI, n_t: 1, ..Default::default() };
        let (fx, _) = floquet_slices(&cfg).unwrap();
        assert!(fx.max_abs_diff(&CMatrix::identity(2).scale(Complex64::new(-1.0, 0.0))) < 1e-12);

        let full = floquet_slices(&TopConfig { n_t: 1, ..Default::default() }).unwrap();
        let sliced = floquet_slices(&TopConfig { n_t: 10, ..Default::default() }).unwrap();
        assert!(sliced.0.unitarity_residual() < 1e-12 && sliced.1.unitarity_residual() < 1e-12);
        let mut px = CMatrix::identity(16);
        let mut py = CMatrix::identity(16);
        for _ in 0..10 {
            px = px.matmul(&sliced.0);
            py = py.matmul(&sliced.1);
        }
        assert!(px.max_abs_diff(&full.0) < 1e-10);
        assert!(py.max_abs_diff(&full.1) < 1e-10);
    }

    #[test]
    fn config_validation() {
        assert!(TopConfig { two_j: 14, ..Default::default() }.validate().is_err());
        assert!(TopConfig { n_t: 0, ..Default::default() }.validate().is_err());
        assert!(TopConfig::default().validate().is_ok());
        assert!((TopConfig { n_t: 40, ..Default::default() }.effective_lambda() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn unmonitored_run_is_unitary() {
        let cfg = TopConfig { lambda: 0.0, burn_in_periods: 0, ..Default::default() };
        let a = run_monitored_top_taps(&cfg, 200, &mut shard_rng(4, 0)).unwrap();
        assert_eq!(a.every_slice.len(), 200);
        assert_eq!(a.rotation_end.len(), 10);
        // the same random initial state gives the same deterministic trajectory
        let b = run_monitored_top_taps(&cfg, 200, &mut shard_rng(4, 0)).unwrap();
        assert_eq!(a.every_slice, b.every_slice);
        assert_eq!(a.rotation_end.last(), a.every_slice.get(199));
        assert_eq!(a.torsion_end[0], a.every_slice[9]);
    }

    #[test]
    fn taps_differ_in_strong_regime() {
        let cfg = TopConfig { n_t: 40, burn_in_periods: 100, ..Default::default() };
        let t = run_monitored_top_taps(&cfg, 80 * 2000, &mut shard_rng(8, 0)).unwrap();
        let mean_sq = |v: &[f64]| v.iter().map(|r| (r - 0.5).powi(2)).sum::<f64>() / v.len() as f64;
        // the rotation end sees the more strongly polarised statistics
        assert!(mean_sq(&t.rotation_end) > mean_sq(&t.torsion_end));
    }
}
