//! Variable-strength measurements and their backaction on the state.
//!
//! The ancilla is never stored: each protocol is applied through its induced
//! Kraus map on the system amplitudes.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::observables::{qubit_count, qubit_is_zero, ReducedCoefficients};
use crate::state::{renormalize, QuantumState};

/// Basis states belonging to the `η = +1` outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceMask {
    bits: Vec<bool>,
}

impl SubspaceMask {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.iter().all(|&b| b) || bits.iter().all(|&b| !b) {
            return Err(invalid("subspace mask must be neither empty nor full"));
        }
        Ok(Self { bits })
    }

    /// Basis states with qubit `qubit` in `|0⟩`.
    pub fn qubit(dim: usize, qubit: usize) -> Result<Self> {
        let q = qubit_count(dim)?;
        if qubit >= q {
            return Err(invalid(format!("qubit {qubit} out of range for {q} qubits")));
        }
        Self::new((0..dim).map(|n| qubit_is_zero(n, qubit, q)).collect())
    }

    /// First half of the basis (upper hemisphere when labels run `m = j, …, -j`).
    pub fn upper_half(dim: usize) -> Result<Self> {
        if dim % 2 != 0 {
            return Err(invalid(format!(
                "hemisphere split needs an even dimension, got {dim}"
            )));
        }
        Self::new((0..dim).map(|n| n < dim / 2).collect())
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// `p = Σ_{n ∈ mask} |ψ_n|²`.
    pub fn weight(&self, amplitudes: &[Complex64]) -> f64 {
        self.bits
            .iter()
            .zip(amplitudes)
            .filter(|(b, _)| **b)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    /// `η = ±1` of the subspace protocol.
    Binary(i8),
    /// Ancilla level `M` (0-based) of the N-level protocol.
    Level(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Strength {
    Uniform(f64),
    PerLevel(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub outcome: Outcome,
    pub probability: f64,
    pub strength: Strength,
}

fn check_strength(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("measurement strength must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

/// `P_η = (1 + λη(2p - 1)) / 2` for subspace weight `p`.
#[inline]
pub fn binary_outcome_probability(p: f64, lambda: f64, eta: i8) -> f64 {
    0.5 * (1.0 + lambda * f64::from(eta) * (2.0 * p - 1.0))
}

pub fn outcome_probability(
    state: &QuantumState,
    mask: &SubspaceMask,
    lambda: f64,
    eta: i8,
) -> Result<f64> {
    check_strength(lambda)?;
    if eta != 1 && eta != -1 {
        return Err(invalid(format!("outcome must be +1 or -1, got {eta}")));
    }
    if mask.dim() != state.dim() {
        return Err(invalid("mask and state dimensions differ"));
    }
    Ok(binary_outcome_probability(mask.weight(state.amplitudes()), lambda, eta))
}

/// Subspace weight after outcome `eta`: `(1+ηλ)p / (1+ηλ(2p-1))`.
#[inline]
pub fn updated_weight(p: f64, lambda: f64, eta: i8) -> f64 {
    let e = f64::from(eta) * lambda;
    (1.0 + e) * p / (1.0 + e * (2.0 * p - 1.0))
}

/// Outcome-averaged `(Δp)²` of one subspace measurement at weight `p`.
pub fn exact_second_moment(p: f64, lambda: f64) -> f64 {
    let a = 2.0 * p - 1.0;
    4.0 * lambda * lambda * p * p * (1.0 - p) * (1.0 - p) / (1.0 - lambda * lambda * a * a)
}

/// In-place subspace measurement; returns the sampled outcome and its probability.
pub fn measure_subspace_in_place<R: Rng + ?Sized>(
    amplitudes: &mut [Complex64],
    mask: &SubspaceMask,
    lambda: f64,
    rng: &mut R,
) -> (i8, f64) {
    let p = mask.weight(amplitudes);
    let p_plus = binary_outcome_probability(p, lambda, 1);
    let eta: i8 = if rng.random::<f64>() < p_plus { 1 } else { -1 };
    let prob = if eta == 1 { p_plus } else { 1.0 - p_plus };
    let e = f64::from(eta) * lambda;
    let norm = (2.0 * prob).max(1e-300).sqrt().recip();
    let inside = (1.0 + e).sqrt() * norm;
    let outside = (1.0 - e).max(0.0).sqrt() * norm;
    for (a, &b) in amplitudes.iter_mut().zip(mask.bits()) {
        *a *= if b { inside } else { outside };
    }
    renormalize(amplitudes);
    (eta, prob)
}

pub fn measure_subspace<R: Rng + ?Sized>(
    state: &QuantumState,
    mask: &SubspaceMask,
    lambda: f64,
    rng: &mut R,
) -> Result<(QuantumState, MeasurementRecord)> {
    check_strength(lambda)?;
    if mask.dim() != state.dim() {
        return Err(invalid("mask and state dimensions differ"));
    }
    let mut amplitudes = state.amplitudes().to_vec();
    let (eta, probability) = measure_subspace_in_place(&mut amplitudes, mask, lambda, rng);
    Ok((
        QuantumState::from_normalized(amplitudes),
        MeasurementRecord {
            outcome: Outcome::Binary(eta),
            probability,
            strength: Strength::Uniform(lambda),
        },
    ))
}

/// Weight `(1-λ_n)/N + λ_n δ_{nM}` of basis state `n` under ancilla outcome `M`.
#[inline]
fn general_weight(lambdas: &[f64], n: usize, outcome: usize) -> f64 {
    let dim = lambdas.len() as f64;
    (1.0 - lambdas[n]) / dim + if n == outcome { lambdas[n] } else { 0.0 }
}

/// Outcome probabilities `P_M` of the N-level protocol.
pub fn general_outcome_probabilities(probabilities: &[f64], lambdas: &[f64]) -> Vec<f64> {
    let dim = lambdas.len() as f64;
    let base: f64 = probabilities
        .iter()
        .zip(lambdas)
        .map(|(r, l)| (1.0 - l) * r / dim)
        .sum();
    probabilities
        .iter()
        .zip(lambdas)
        .map(|(r, l)| base + l * r)
        .collect()
}

/// Probability coefficients after outcome `outcome` of the N-level protocol.
pub fn general_update(probabilities: &[f64], lambdas: &[f64], outcome: usize) -> Vec<f64> {
    let p_m = general_outcome_probabilities(probabilities, lambdas)[outcome];
    probabilities
        .iter()
        .enumerate()
        .map(|(n, r)| r * general_weight(lambdas, n, outcome) / p_m)
        .collect()
}

pub fn measure_general<R: Rng + ?Sized>(
    state: &QuantumState,
    lambdas: &[f64],
    rng: &mut R,
) -> Result<(QuantumState, MeasurementRecord)> {
    if lambdas.len() != state.dim() {
        return Err(invalid(format!(
            "need {} strengths, got {}",
            state.dim(),
            lambdas.len()
        )));
    }
    for &l in lambdas {
        check_strength(l)?;
    }
    let probs: Vec<f64> = state.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let p_out = general_outcome_probabilities(&probs, lambdas);
    let u: f64 = rng.random::<f64>() * p_out.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut outcome = p_out.len() - 1;
    for (m, &p) in p_out.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            outcome = m;
            break;
        }
    }
    // never land on a zero-probability tail outcome through rounding
    while p_out[outcome] <= 0.0 {
        outcome -= 1;
    }
    let mut amplitudes: Vec<Complex64> = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, a)| a * general_weight(lambdas, n, outcome).sqrt())
        .collect();
    renormalize(&mut amplitudes);
    Ok((
        QuantumState::from_normalized(amplitudes),
        MeasurementRecord {
            outcome: Outcome::Level(outcome),
            probability: p_out[outcome],
            strength: Strength::PerLevel(lambdas.to_vec()),
        },
    ))
}

/// Weak-limit outcome-averaged covariance `E[dr_n dr_m]` of the N-level protocol.
pub fn general_weak_covariance(probabilities: &[f64], lambdas: &[f64]) -> Vec<Vec<f64>> {
    let dim = probabilities.len();
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let linear: Vec<f64> = (0..dim)
        .map(|n| {
            (0..dim)
                .map(|l| (probabilities[l] - delta(n, l)) * lambdas[l])
                .sum()
        })
        .collect();
    (0..dim)
        .map(|n| {
            (0..dim)
                .map(|m| {
                    let quad: f64 = (0..dim)
                        .map(|l| {
                            (probabilities[l] - delta(n, l))
                                * (probabilities[l] - delta(m, l))
                                * lambdas[l]
                                * lambdas[l]
                        })
                        .sum();
                    probabilities[n] * probabilities[m] * (dim as f64 * quad - linear[n] * linear[m])
                })
                .collect()
        })
        .collect()
}

/// Ito increments `(dr, dR, dC)` of the combined weak monitoring of both qubits
/// with strengths `λ`, `λ'` and outcome signs `ξ`, `ξ'`.
pub fn weak_increments(
    coeffs: &ReducedCoefficients,
    lambda: f64,
    lambda2: f64,
    xi: i8,
    xi2: i8,
) -> (f64, f64, f64) {
    let (r, rr, c) = (coeffs.r, coeffs.big_r, coeffs.c);
    let (x1, x2) = (f64::from(xi), f64::from(xi2));
    let dr = 2.0 * x1 * lambda * r * (1.0 - r) + 2.0 * x2 * lambda2 * c;
    let d_big_r = 2.0 * x2 * lambda2 * rr * (1.0 - rr) + 2.0 * x1 * lambda * c;
    let dc = 2.0
        * c
        * (x1 * lambda * (1.0 - 2.0 * r) - 2.0 * lambda * lambda * r * (1.0 - r)
            + x2 * lambda2 * (1.0 - 2.0 * rr)
            - 2.0 * lambda2 * lambda2 * rr * (1.0 - rr));
    (dr, d_big_r, dc)
}
