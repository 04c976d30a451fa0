//! Diagonal cost operators and everything computable from one batch of
//! measurement counts: ⟨C⟩, ⟨C²⟩, the output variance, the standard
//! deviation of the mean and the gradient with respect to the trainable
//! operator coefficients.
//!
//! Only operators diagonal in the computational basis are representable, so
//! ⟨C²⟩ and all coefficient derivatives come from the same counts as ⟨C⟩,
//! with no extra circuit executions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::MeasurementCounts;

/// A cost operator diagonal in the computational basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DiagonalObservable {
    /// φ0·I + Σ_p φ_p·Z_p
    SumZ { offset: f64, phi: Vec<f64> },
    /// φ1·I + φ2·Σ_p Z_p + φ3·Σ_{p>q} Z_p Z_q
    IsingZZ {
        n_qubits: usize,
        phi1: f64,
        phi2: f64,
        phi3: f64,
    },
    /// |outcome⟩⟨outcome| on one qubit; idempotent, C² = C.
    ProjectorQubit { qubit: usize, outcome: u8 },
}

impl DiagonalObservable {
    /// Register size the operator is defined on, if it fixes one.
    pub fn n_qubits(&self) -> Option<usize> {
        match self {
            Self::SumZ { phi, .. } => Some(phi.len()),
            Self::IsingZZ { n_qubits, .. } => Some(*n_qubits),
            Self::ProjectorQubit { .. } => None,
        }
    }

    fn check_basis(&self, bitstring: usize) -> Result<()> {
        if let Some(n) = self.n_qubits() {
            if bitstring >> n != 0 {
                return Err(Error::BasisOutOfRange {
                    index: bitstring,
                    n_qubits: n,
                });
            }
        }
        Ok(())
    }

    /// Diagonal matrix element for one bitstring.
    pub fn diag_value(&self, bitstring: usize) -> Result<f64> {
        self.check_basis(bitstring)?;
        Ok(self.value_unchecked(bitstring))
    }

    pub(crate) fn value_unchecked(&self, b: usize) -> f64 {
        match self {
            Self::SumZ { offset, phi } => {
                let mut acc = *offset;
                for (p, &c) in phi.iter().enumerate() {
                    acc += c * z_of(b, p);
                }
                acc
            }
            Self::IsingZZ {
                n_qubits,
                phi1,
                phi2,
                phi3,
            } => {
                let s = z_sum(b, *n_qubits);
                // Σ_{p>q} z_p z_q = (s² - N_q) / 2 since every z² = 1
                let pairs = (s * s - *n_qubits as f64) / 2.0;
                phi1 + phi2 * s + phi3 * pairs
            }
            Self::ProjectorQubit { qubit, outcome } => {
                if ((b >> qubit) & 1) as u8 == *outcome {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Number of trainable coefficients.
    pub fn num_coefficients(&self) -> usize {
        match self {
            Self::SumZ { phi, .. } => 1 + phi.len(),
            Self::IsingZZ { .. } => 3,
            Self::ProjectorQubit { .. } => 0,
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            Self::SumZ { offset, phi } => {
                let mut v = Vec::with_capacity(1 + phi.len());
                v.push(*offset);
                v.extend_from_slice(phi);
                v
            }
            Self::IsingZZ {
                phi1, phi2, phi3, ..
            } => vec![*phi1, *phi2, *phi3],
            Self::ProjectorQubit { .. } => Vec::new(),
        }
    }

    /// Same operator shape with replaced coefficients.
    pub fn with_coefficients(&self, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != self.num_coefficients() {
            return Err(Error::LengthMismatch {
                left: coeffs.len(),
                right: self.num_coefficients(),
            });
        }
        Ok(match self {
            Self::SumZ { .. } => Self::SumZ {
                offset: coeffs[0],
                phi: coeffs[1..].to_vec(),
            },
            Self::IsingZZ { n_qubits, .. } => Self::IsingZZ {
                n_qubits: *n_qubits,
                phi1: coeffs[0],
                phi2: coeffs[1],
                phi3: coeffs[2],
            },
            Self::ProjectorQubit { .. } => self.clone(),
        })
    }

    /// Basis functions g_m(b) with C(b) = Σ_m φ_m g_m(b); the per-bitstring
    /// factors of ∂C/∂φ_m.
    pub(crate) fn coefficient_basis(&self, b: usize) -> Vec<f64> {
        match self {
            Self::SumZ { phi, .. } => {
                let mut v = Vec::with_capacity(1 + phi.len());
                v.push(1.0);
                v.extend((0..phi.len()).map(|p| z_of(b, p)));
                v
            }
            Self::IsingZZ { n_qubits, .. } => {
                let s = z_sum(b, *n_qubits);
                vec![1.0, s, (s * s - *n_qubits as f64) / 2.0]
            }
            Self::ProjectorQubit { .. } => Vec::new(),
        }
    }
}

fn z_of(b: usize, p: usize) -> f64 {
    1.0 - 2.0 * ((b >> p) & 1) as f64
}

fn z_sum(b: usize, n_qubits: usize) -> f64 {
    // Σ_p z_p = N_q - 2·popcount over the low N_q bits
    let ones = (b & ((1usize << n_qubits) - 1)).count_ones() as f64;
    n_qubits as f64 - 2.0 * ones
}

/// Pairwise summation; keeps accumulation error logarithmic in the number
/// of terms.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

fn mean_over_counts<F: FnMut(usize) -> f64>(counts: &MeasurementCounts, mut f: F) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::EmptyCounts);
    }
    let shots = counts.shots() as f64;
    let terms: Vec<f64> = counts
        .iter()
        .map(|(b, n)| (n as f64 / shots) * f(b))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// ⟨C⟩ from one batch of counts.
pub fn expectation_from_counts(obs: &DiagonalObservable, counts: &MeasurementCounts) -> Result<f64> {
    mean_over_counts(counts, |b| obs.value_unchecked(b))
}

/// ⟨C²⟩ from the same counts; diagonal operators square elementwise.
pub fn squared_expectation_from_counts(
    obs: &DiagonalObservable,
    counts: &MeasurementCounts,
) -> Result<f64> {
    mean_over_counts(counts, |b| {
        let d = obs.value_unchecked(b);
        d * d
    })
}

/// Population variance ⟨C²⟩ − ⟨C⟩² over the empirical outcome distribution.
pub fn variance_from_counts(obs: &DiagonalObservable, counts: &MeasurementCounts) -> Result<f64> {
    let e = expectation_from_counts(obs, counts)?;
    let e2 = squared_expectation_from_counts(obs, counts)?;
    Ok(e2 - e * e)
}

/// Finite-sampling standard deviation of an expectation estimated with
/// `shots` shots: sqrt(σ² / N).
pub fn std_of_mean(variance: f64, shots: u64) -> f64 {
    (variance / shots as f64).sqrt()
}

/// ∂⟨C⟩/∂φ_m for every trainable coefficient, from the same counts.
pub fn cost_gradient_from_counts(
    obs: &DiagonalObservable,
    counts: &MeasurementCounts,
) -> Result<Vec<f64>> {
    let m = obs.num_coefficients();
    if m == 0 {
        if counts.is_empty() {
            return Err(Error::EmptyCounts);
        }
        return Ok(Vec::new());
    }
    basis_mean(obs, counts, |_d, g| g)
}

/// ∂⟨C²⟩/∂φ_m = ⟨2 C · ∂C/∂φ_m⟩, again from the same counts.
pub fn squared_cost_gradient_from_counts(
    obs: &DiagonalObservable,
    counts: &MeasurementCounts,
) -> Result<Vec<f64>> {
    basis_mean(obs, counts, |d, g| 2.0 * d * g)
}

fn basis_mean<F: Fn(f64, f64) -> f64>(
    obs: &DiagonalObservable,
    counts: &MeasurementCounts,
    term: F,
) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::EmptyCounts);
    }
    let m = obs.num_coefficients();
    let shots = counts.shots() as f64;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); m];
    for (b, n) in counts.iter() {
        let w = n as f64 / shots;
        let d = obs.value_unchecked(b);
        for (col, g) in cols.iter_mut().zip(obs.coefficient_basis(b)) {
            col.push(w * term(d, g));
        }
    }
    Ok(cols.iter().map(|c| pairwise_sum(c)).collect())
}

/// Exact-mode counterparts working on a full probability vector.
pub mod exact {
    use super::*;

    fn mean<F: FnMut(usize) -> f64>(probs: &[f64], mut f: F) -> f64 {
        let terms: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(b, &p)| if p > 0.0 { p * f(b) } else { 0.0 })
            .collect();
        pairwise_sum(&terms)
    }

    pub fn expectation(obs: &DiagonalObservable, probs: &[f64]) -> f64 {
        mean(probs, |b| obs.value_unchecked(b))
    }

    pub fn squared_expectation(obs: &DiagonalObservable, probs: &[f64]) -> f64 {
        mean(probs, |b| {
            let d = obs.value_unchecked(b);
            d * d
        })
    }

    pub fn variance(obs: &DiagonalObservable, probs: &[f64]) -> f64 {
        let e = expectation(obs, probs);
        squared_expectation(obs, probs) - e * e
    }

    pub fn cost_gradient(obs: &DiagonalObservable, probs: &[f64]) -> Vec<f64> {
        column_mean(obs, probs, |_d, g| g)
    }

    pub fn squared_cost_gradient(obs: &DiagonalObservable, probs: &[f64]) -> Vec<f64> {
        column_mean(obs, probs, |d, g| 2.0 * d * g)
    }

    fn column_mean<F: Fn(f64, f64) -> f64>(
        obs: &DiagonalObservable,
        probs: &[f64],
        term: F,
    ) -> Vec<f64> {
        let m = obs.num_coefficients();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); m];
        for (b, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let d = obs.value_unchecked(b);
            for (col, g) in cols.iter_mut().zip(obs.coefficient_basis(b)) {
                col.push(p * term(d, g));
            }
        }
        cols.iter().map(|c| pairwise_sum(c)).collect()
    }
}
