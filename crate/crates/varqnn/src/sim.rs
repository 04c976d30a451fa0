//! Minimal statevector engine.
//!
//! Supports exactly the gates of the model circuit (Rx, Ry, Rzz), exact
//! probability readout and seeded finite-shot sampling. Bit convention is
//! little-endian throughout: qubit `q` is bit `q` of the basis-state index,
//! so qubit 0 is the least significant bit.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Hard cap on the register size; 2^24 amplitudes is already 256 MiB.
pub const MAX_QUBITS: usize = 24;

/// Full complex amplitude vector over the computational basis.
#[derive(Clone, Debug)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// |0...0⟩ on `n_qubits` qubits.
    pub fn new_zero_state(n_qubits: usize) -> Result<Self> {
        if n_qubits < 1 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                n_qubits,
                max: MAX_QUBITS,
            });
        }
        let mut amplitudes = vec![Complex64::ZERO; 1 << n_qubits];
        amplitudes[0] = Complex64::ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit: q,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Rotation exp(-i angle X/2) on qubit `q`.
    pub fn apply_rx(&mut self, q: usize, angle: f64) -> Result<()> {
        self.check_qubit(q)?;
        let c = (angle / 2.0).cos();
        let s = (angle / 2.0).sin();
        let m01 = Complex64::new(0.0, -s);
        self.single_qubit_kernel(q, Complex64::new(c, 0.0), m01, m01, Complex64::new(c, 0.0));
        Ok(())
    }

    /// Rotation exp(-i angle Y/2) on qubit `q`.
    pub fn apply_ry(&mut self, q: usize, angle: f64) -> Result<()> {
        self.check_qubit(q)?;
        let c = Complex64::new((angle / 2.0).cos(), 0.0);
        let s = (angle / 2.0).sin();
        self.single_qubit_kernel(q, c, Complex64::new(-s, 0.0), Complex64::new(s, 0.0), c);
        Ok(())
    }

    /// Rotation exp(-i angle Z⊗Z / 2) on qubits `q1`, `q2`. Basis state `b`
    /// acquires the phase exp(-i angle/2 · z_{q1} z_{q2}) with z = 1 - 2·bit.
    pub fn apply_rzz(&mut self, q1: usize, q2: usize, angle: f64) -> Result<()> {
        self.check_qubit(q1)?;
        self.check_qubit(q2)?;
        if q1 == q2 {
            return Err(Error::DuplicateQubit { qubit: q1 });
        }
        let phase_pos = Complex64::from_polar(1.0, -angle / 2.0);
        let phase_neg = Complex64::from_polar(1.0, angle / 2.0);
        let m1 = 1usize << q1;
        let m2 = 1usize << q2;
        for (b, amp) in self.amplitudes.iter_mut().enumerate() {
            let same_parity = ((b & m1) != 0) == ((b & m2) != 0);
            *amp *= if same_parity { phase_pos } else { phase_neg };
        }
        Ok(())
    }

    fn single_qubit_kernel(
        &mut self,
        q: usize,
        m00: Complex64,
        m01: Complex64,
        m10: Complex64,
        m11: Complex64,
    ) {
        let mask = 1usize << q;
        for b in 0..self.amplitudes.len() {
            if b & mask == 0 {
                let a0 = self.amplitudes[b];
                let a1 = self.amplitudes[b | mask];
                self.amplitudes[b] = m00 * a0 + m01 * a1;
                self.amplitudes[b | mask] = m10 * a0 + m11 * a1;
            }
        }
    }

    /// |amplitude_b|² for every basis state.
    pub fn exact_probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Multinomial draw of `shots` measurements over the exact outcome
    /// distribution. Deterministic given the stream.
    pub fn sample_counts(&self, shots: u64, stream: &RngStream) -> Result<MeasurementCounts> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let probs = self.exact_probabilities();
        let mut rng = stream.rng();
        let mut counts = BTreeMap::new();
        let mut remaining = shots;
        let mut mass_left = 1.0f64;
        // Conditional binomial decomposition of the multinomial: O(dim)
        // independent of the shot count.
        for (b, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let ratio = (p / mass_left).clamp(0.0, 1.0);
            let drawn = if ratio >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, ratio)
                    .expect("ratio clamped to [0,1]")
                    .sample(&mut rng)
            };
            if drawn > 0 {
                counts.insert(b, drawn);
            }
            remaining -= drawn;
            mass_left -= p;
        }
        if remaining > 0 {
            // Rounding residue of the probability mass; attach to the most
            // probable outcome.
            let best = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(b, _)| b)
                .unwrap_or(0);
            *counts.entry(best).or_insert(0) += remaining;
        }
        Ok(MeasurementCounts { shots, counts })
    }
}

/// Outcome histogram of one circuit execution batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementCounts {
    shots: u64,
    counts: BTreeMap<usize, u64>,
}

impl MeasurementCounts {
    pub fn from_counts(counts: BTreeMap<usize, u64>) -> Result<Self> {
        let shots: u64 = counts.values().sum();
        if shots == 0 {
            return Err(Error::EmptyCounts);
        }
        Ok(Self { shots, counts })
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// (basis index, count) pairs in ascending basis order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&b, &c)| (b, c))
    }

    pub fn count(&self, basis: usize) -> u64 {
        self.counts.get(&basis).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn amp(state: &Statevector, b: usize) -> Complex64 {
        state.amplitudes()[b]
    }

    #[test]
    fn zero_state_single_qubit() {
        let s = Statevector::new_zero_state(1).unwrap();
        assert_eq!(amp(&s, 0), Complex64::ONE);
        assert_eq!(amp(&s, 1), Complex64::ZERO);
    }

    #[test]
    fn zero_state_two_qubits() {
        let s = Statevector::new_zero_state(2).unwrap();
        assert_eq!(s.dim(), 4);
        assert_eq!(amp(&s, 0), Complex64::ONE);
        assert!(s.amplitudes()[1..].iter().all(|a| *a == Complex64::ZERO));
    }

    #[test]
    fn zero_state_capacity_guard() {
        assert!(matches!(
            Statevector::new_zero_state(25),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(
            Statevector::new_zero_state(0),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn rx_pi_gives_minus_i_x() {
        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_rx(0, PI).unwrap();
        assert_abs_diff_eq!(amp(&s, 0).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(amp(&s, 1).re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(amp(&s, 1).im, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn rx_zero_is_identity() {
        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_rx(0, 0.0).unwrap();
        assert_eq!(amp(&s, 0), Complex64::ONE);
    }

    #[test]
    fn rx_half_pi_superposition() {
        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_rx(0, PI / 2.0).unwrap();
        assert_abs_diff_eq!(amp(&s, 0).re, FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(amp(&s, 1).im, -FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn ry_half_pi_superposition() {
        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        assert_abs_diff_eq!(amp(&s, 0).re, FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(amp(&s, 1).re, FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn ry_pi_flips() {
        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_ry(0, PI).unwrap();
        assert_abs_diff_eq!(amp(&s, 1).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ry_minus_pi_flips_back_up_to_phase() {
        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_ry(0, PI).unwrap();
        s.apply_ry(0, -PI).unwrap();
        assert_abs_diff_eq!(amp(&s, 0).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rzz_phases_by_parity() {
        let theta = 0.7;
        let mut s = Statevector::new_zero_state(2).unwrap();
        s.apply_rzz(0, 1, theta).unwrap();
        let expect = Complex64::from_polar(1.0, -theta / 2.0);
        assert_abs_diff_eq!((amp(&s, 0) - expect).norm(), 0.0, epsilon = 1e-12);

        // |01⟩ has opposite parity, picks up e^{+iθ/2}
        let mut s = Statevector::new_zero_state(2).unwrap();
        s.apply_rx(0, PI).unwrap(); // -i|01⟩
        s.apply_rzz(0, 1, theta).unwrap();
        let expect = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, theta / 2.0);
        assert_abs_diff_eq!((amp(&s, 1) - expect).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rzz_rejects_equal_qubits() {
        let mut s = Statevector::new_zero_state(2).unwrap();
        assert!(matches!(
            s.apply_rzz(0, 0, 0.3),
            Err(Error::DuplicateQubit { qubit: 0 })
        ));
    }

    #[test]
    fn gate_index_guards() {
        let mut s = Statevector::new_zero_state(2).unwrap();
        assert!(s.apply_rx(2, 0.1).is_err());
        assert!(s.apply_ry(5, 0.1).is_err());
        assert!(s.apply_rzz(0, 2, 0.1).is_err());
    }

    #[test]
    fn exact_probabilities_closed_forms() {
        let s = Statevector::new_zero_state(1).unwrap();
        assert_eq!(s.exact_probabilities(), vec![1.0, 0.0]);

        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        let p = s.exact_probabilities();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);

        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_ry(0, PI / 3.0).unwrap();
        let p = s.exact_probabilities();
        assert_abs_diff_eq!(p[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn sampling_deterministic_state() {
        let s = Statevector::new_zero_state(3).unwrap();
        let c = s.sample_counts(1000, &RngStream::new(7, (0, 0))).unwrap();
        assert_eq!(c.shots(), 1000);
        assert_eq!(c.count(0), 1000);
    }

    #[test]
    fn sampling_balanced_state_five_sigma() {
        // 5σ binomial bound at p = 0.5, N = 10^6: 0.5/sqrt(N)·5 = 0.0025
        let mut s = Statevector::new_zero_state(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        let n = 1_000_000u64;
        let c = s.sample_counts(n, &RngStream::new(11, (0, 0))).unwrap();
        let freq = c.count(0) as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.0025, "freq = {freq}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let mut s = Statevector::new_zero_state(2).unwrap();
        s.apply_ry(0, 1.1).unwrap();
        s.apply_ry(1, 0.4).unwrap();
        let stream = RngStream::new(99, (4, 2));
        let a = s.sample_counts(5000, &stream).unwrap();
        let b = s.sample_counts(5000, &stream).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_rejects_zero_shots() {
        let s = Statevector::new_zero_state(1).unwrap();
        assert!(matches!(
            s.sample_counts(0, &RngStream::new(0, (0, 0))),
            Err(Error::ZeroShots)
        ));
    }

    #[test]
    fn counts_sum_to_shots() {
        let mut s = Statevector::new_zero_state(3).unwrap();
        for q in 0..3 {
            s.apply_ry(q, 0.3 + q as f64).unwrap();
        }
        let c = s.sample_counts(12345, &RngStream::new(5, (1, 2))).unwrap();
        let total: u64 = c.iter().map(|(_, n)| n).sum();
        assert_eq!(total, 12345);
        assert!(c.iter().all(|(b, _)| b < 8));
    }
}
