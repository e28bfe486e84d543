//! Statistical quantities read off a pure state.
//!
//! Qubit 0 is the most significant bit of the basis label, so qubit 0 in `|0⟩`
//! selects the first half of the basis and qubit 1 in `|0⟩` selects every
//! other basis state starting with the first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::state::QuantumState;

/// `(r, R, C)` and the concurrence of a two-qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoefficients {
    /// Probability of the first qubit in `|0⟩`.
    pub r: f64,
    /// Probability of the second qubit in `|0⟩`.
    #[serde(rename = "R")]
    pub big_r: f64,
    /// `|α|²|δ|² - |β|²|γ|²`.
    #[serde(rename = "C")]
    pub c: f64,
    pub concurrence: f64,
}

impl ReducedCoefficients {
    /// The four basis probabilities `(|α|², |β|², |γ|², |δ|²)` rebuilt from `(r, R, C)`.
    pub fn reconstruct(&self) -> [f64; 4] {
        let (r, rr, c) = (self.r, self.big_r, self.c);
        [
            c + r * rr,
            r * (1.0 - rr) - c,
            rr * (1.0 - r) - c,
            (1.0 - r) * (1.0 - rr) + c,
        ]
    }
}

pub fn probability_coefficients(state: &QuantumState) -> Vec<f64> {
    state.amplitudes().iter().map(|a| a.norm_sqr()).collect()
}

/// Number of qubits for a power-of-two dimension.
pub fn qubit_count(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(invalid(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// True when qubit `qubit` of basis label `n` is in `|0⟩` (`q` qubits total).
#[inline]
pub fn qubit_is_zero(n: usize, qubit: usize, q: usize) -> bool {
    (n >> (q - 1 - qubit)) & 1 == 0
}

/// `R_m`: total probability that qubit `qubit` is found in `|0⟩`.
pub fn qubit_marginal(state: &QuantumState, qubit: usize) -> Result<f64> {
    let q = qubit_count(state.dim())?;
    if qubit >= q {
        return Err(invalid(format!("qubit {qubit} out of range for {q} qubits")));
    }
    Ok(marginal_of(state.amplitudes(), qubit, q))
}

pub(crate) fn marginal_of(amplitudes: &[Complex64], qubit: usize, q: usize) -> f64 {
    amplitudes
        .iter()
        .enumerate()
        .filter(|(n, _)| qubit_is_zero(*n, qubit, q))
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

pub(crate) fn two_qubit_of(a: &[Complex64]) -> ReducedCoefficients {
    let p: Vec<f64> = a.iter().map(|z| z.norm_sqr()).collect();
    ReducedCoefficients {
        r: p[0] + p[1],
        big_r: p[0] + p[2],
        c: p[0] * p[3] - p[1] * p[2],
        concurrence: 2.0 * (a[0] * a[3] - a[1] * a[2]).norm(),
    }
}

pub fn two_qubit_coefficients(state: &QuantumState) -> Result<ReducedCoefficients> {
    if state.dim() != 4 {
        return Err(invalid(format!(
            "two-qubit coefficients need dimension 4, got {}",
            state.dim()
        )));
    }
    Ok(two_qubit_of(state.amplitudes()))
}

/// Norm of the conditional state with the monitored qubit in `|0⟩`, and the
/// normalised overlap `x` of the two conditional states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalDecomposition {
    pub r: f64,
    /// `|⟨ψ̃₀|ψ̃₁⟩|² / (r(1-r))`; `None` when one conditional state vanishes.
    pub x: Option<f64>,
}

impl ConditionalDecomposition {
    /// `4 r (1-r) (1-x)`, the squared concurrence for two qubits.
    pub fn concurrence_sq(&self) -> Option<f64> {
        self.x.map(|x| 4.0 * self.r * (1.0 - self.r) * (1.0 - x))
    }
}

pub fn conditional_decomposition(
    state: &QuantumState,
    monitored_qubit: usize,
) -> Result<ConditionalDecomposition> {
    let q = qubit_count(state.dim())?;
    if q < 2 {
        return Err(invalid("conditional decomposition needs at least two qubits"));
    }
    if monitored_qubit >= q {
        return Err(invalid(format!("qubit {monitored_qubit} out of range for {q} qubits")));
    }
    let amps = state.amplitudes();
    let shift = q - 1 - monitored_qubit;
    let mut r = 0.0;
    let mut rest = 0.0;
    let mut overlap = Complex64::new(0.0, 0.0);
    // pair each label with the partner that differs only in the monitored bit
    for (n, a) in amps.iter().enumerate() {
        if (n >> shift) & 1 == 0 {
            let partner = amps[n | (1 << shift)];
            r += a.norm_sqr();
            rest += partner.norm_sqr();
            overlap += a.conj() * partner;
        }
    }
    let total = r + rest;
    let r = r / total;
    let denom = r * (1.0 - r);
    let x = if denom > 1e-300 && r > 0.0 && r < 1.0 {
        Some((overlap.norm_sqr() / (total * total) / denom).clamp(0.0, 1.0))
    } else {
        None
    };
    Ok(ConditionalDecomposition { r, x })
}
