//! Pure states, Haar and GUE sampling, and the noisy unitary step.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{exp_i_hermitian, series_exp_action, CMatrix};

/// Normalised pure state in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// Builds a state from raw amplitudes, normalising them.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(invalid(format!(
                "state dimension must be at least 2, got {}",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("amplitudes have zero or non-finite norm"));
        }
        let mut state = Self { amplitudes };
        state.renormalize();
        Ok(state)
    }

    pub(crate) fn from_normalized(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm, absorbing accumulated rounding drift.
    pub fn renormalize(&mut self) {
        renormalize(&mut self.amplitudes);
    }
}

pub(crate) fn renormalize(amplitudes: &mut [Complex64]) {
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let inv = norm.sqrt().recip();
    for a in amplitudes {
        *a *= inv;
    }
}

/// `|index⟩` in a `dim`-dimensional space.
pub fn new_basis_state(dim: usize, index: usize) -> Result<QuantumState> {
    if dim < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {dim}")));
    }
    if index >= dim {
        return Err(invalid(format!("basis index {index} out of range for dimension {dim}")));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
    amplitudes[index] = Complex64::new(1.0, 0.0);
    Ok(QuantumState { amplitudes })
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std, im * std)
}

/// Haar-random state: i.i.d. complex Gaussian amplitudes, normalised.
pub fn sample_haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<QuantumState> {
    if dim < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {dim}")));
    }
    let amplitudes = (0..dim).map(|_| complex_gaussian(rng, 1.0)).collect();
    QuantumState::from_amplitudes(amplitudes)
}

/// GUE matrix scaled so that the ensemble average of `H²` is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianGenerator {
    matrix: CMatrix,
}

impl HermitianGenerator {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `exp(i eps H)` from the spectral decomposition.
    pub fn propagator(&self, eps: f64) -> CMatrix {
        exp_i_hermitian(&self.matrix, eps)
    }
}

/// Fills `m` with a fresh GUE draw: diagonal variance `1/N`, off-diagonal
/// real and imaginary parts each with variance `1/(2N)`.
pub(crate) fn fill_gue<R: Rng + ?Sized>(m: &mut CMatrix, rng: &mut R) {
    let n = m.dim();
    let diag_std = (1.0 / n as f64).sqrt();
    let off_std = (0.5 / n as f64).sqrt();
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        m[(i, i)] = Complex64::new(d * diag_std, 0.0);
        for j in (i + 1)..n {
            let z = complex_gaussian(rng, off_std);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
}

pub fn sample_gue_generator<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<HermitianGenerator> {
    if dim < 2 {
        return Err(invalid(format!("dimension must be at least 2, got {dim}")));
    }
    let mut matrix = CMatrix::zeros(dim);
    fill_gue(&mut matrix, rng);
    Ok(HermitianGenerator { matrix })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(invalid(format!("epsilon must lie in [0, 0.5], got {epsilon}")));
    }
    Ok(())
}

/// One noisy unitary step `exp(i eps H)|ψ⟩` with a fresh GUE generator,
/// exponentiated through its eigendecomposition.
pub fn unitary_step<R: Rng + ?Sized>(
    state: &QuantumState,
    epsilon: f64,
    rng: &mut R,
) -> Result<QuantumState> {
    check_epsilon(epsilon)?;
    let h = sample_gue_generator(state.dim(), rng)?;
    if epsilon == 0.0 {
        return Ok(state.clone());
    }
    let amplitudes = h.propagator(epsilon).apply(state.amplitudes());
    Ok(QuantumState { amplitudes })
}

/// `1 + i eps H - eps² H²/2`, the second-order expansion of the step.
pub fn second_order_propagator(h: &HermitianGenerator, eps: f64) -> CMatrix {
    let m = h.matrix();
    CMatrix::identity(m.dim())
        .add(&m.scale(Complex64::new(0.0, eps)))
        .sub(&m.matmul(m).scale(Complex64::new(0.5 * eps * eps, 0.0)))
}

/// How `exp(i eps H)` is applied in the hot loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagator {
    /// Dense Hermitian eigendecomposition per step.
    Spectral,
    /// Taylor series acting on the state vector, truncated at machine precision.
    #[default]
    Series,
}

impl std::str::FromStr for Propagator {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "series" => Ok(Self::Series),
            other => Err(invalid(format!("unknown propagator '{other}'"))),
        }
    }
}

/// Reusable buffers for repeated in-place unitary steps.
#[derive(Debug, Clone)]
pub struct Evolver {
    propagator: Propagator,
    generator: CMatrix,
    scratch: Vec<Complex64>,
}

impl Evolver {
    pub fn new(dim: usize, propagator: Propagator) -> Self {
        Self {
            propagator,
            generator: CMatrix::zeros(dim),
            scratch: Vec::with_capacity(2 * dim),
        }
    }

    /// Draws a GUE generator and applies `exp(i eps H)` to `psi` in place.
    pub fn step<R: Rng + ?Sized>(&mut self, psi: &mut [Complex64], eps: f64, rng: &mut R) {
        fill_gue(&mut self.generator, rng);
        match self.propagator {
            Propagator::Series => series_exp_action(&self.generator, eps, psi, &mut self.scratch),
            Propagator::Spectral => {
                let u = exp_i_hermitian(&self.generator, eps);
                self.scratch.resize(psi.len(), Complex64::new(0.0, 0.0));
                u.apply_into(psi, &mut self.scratch);
                psi.copy_from_slice(&self.scratch[..psi.len()]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::shard_rng;

    #[test]
    fn basis_states() {
        let s = new_basis_state(4, 0).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        let s = new_basis_state(16, 15).unwrap();
        assert_eq!(s.amplitudes()[15].re, 1.0);
        assert!(new_basis_state(4, 4).is_err());
        assert!(new_basis_state(1, 0).is_err());
    }

    #[test]
    fn gue_is_exactly_hermitian() {
        let mut rng = shard_rng(1, 0);
        for dim in [2, 3, 8] {
            let h = sample_gue_generator(dim, &mut rng).unwrap();
            assert_eq!(h.matrix().max_abs_diff(&h.matrix().adjoint()), 0.0);
        }
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let mut rng = shard_rng(2, 0);
        let s = sample_haar_state(4, &mut rng).unwrap();
        assert_eq!(unitary_step(&s, 0.0, &mut rng).unwrap(), s);
        assert!(unitary_step(&s, 0.6, &mut rng).is_err());
    }

    #[test]
    fn step_preserves_norm() {
        let mut rng = shard_rng(3, 0);
        let mut s = sample_haar_state(8, &mut rng).unwrap();
        for _ in 0..100 {
            s = unitary_step(&s, 0.1, &mut rng).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn propagators_agree() {
        let psi0 = sample_haar_state(16, &mut shard_rng(4, 0)).unwrap();
        for eps in [0.02, 0.1, 0.5] {
            let mut a = psi0.amplitudes().to_vec();
            let mut b = a.clone();
            Evolver::new(16, Propagator::Series).step(&mut a, eps, &mut shard_rng(5, 0));
            Evolver::new(16, Propagator::Spectral).step(&mut b, eps, &mut shard_rng(5, 0));
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-13, "eps={eps} diff={diff}");
        }
    }

    #[test]
    fn exponential_matches_second_order_to_third_order() {
        let mut rng = shard_rng(6, 0);
        let h = sample_gue_generator(4, &mut rng).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.05, 0.025] {
            let err = h.propagator(eps).max_abs_diff(&second_order_propagator(&h, eps));
            // third-order remainder: halving eps cuts the error by ~8
            assert!(err < prev / 6.0);
            prev = err;
        }
    }
}
