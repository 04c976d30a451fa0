//! The QNN model: circuit construction from inputs and parameters,
//! evaluation of the output f(x) and its variance σ²_f(x), and
//! parameter-shift differentiation of both.
//!
//! The circuit is a Chebyshev-encoding ansatz: an initial layer of Ry
//! rotations, `l` repetitions of [Rx(φ·arccos x) encoding + Rzz
//! entanglers], and a final Ry layer that sets the measurement basis.
//! Every rotation parameter appears in exactly one gate, so the two-term
//! parameter-shift rule applies to all of them.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observable::{self, exact, DiagonalObservable};
use crate::rng::RngStream;
use crate::sim::{MeasurementCounts, Statevector};

/// Arrangement of the two-qubit entangling gates within one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangling {
    /// Nearest-neighbor chain plus the wrap-around pair (N_q−1, 0).
    Circular,
    /// Nearest-neighbor chain only; the hardware-efficient variant.
    Linear,
}

/// Static shape of the model circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitLayout {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub entangling: Entangling,
    pub n_features: usize,
    feature_of_qubit: Vec<usize>,
}

impl CircuitLayout {
    /// Layout with the cyclic feature assignment: qubit q encodes feature
    /// q mod n_features.
    pub fn new(
        n_qubits: usize,
        n_layers: usize,
        entangling: Entangling,
        n_features: usize,
    ) -> Result<Self> {
        let map = (0..n_qubits).map(|q| q % n_features.max(1)).collect();
        Self::with_feature_map(n_qubits, n_layers, entangling, n_features, map)
    }

    /// Layout with an explicit qubit → feature assignment.
    pub fn with_feature_map(
        n_qubits: usize,
        n_layers: usize,
        entangling: Entangling,
        n_features: usize,
        feature_of_qubit: Vec<usize>,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidConfig("n_qubits must be at least 1".into()));
        }
        if n_features == 0 || n_features > n_qubits {
            return Err(Error::InvalidConfig(format!(
                "n_features must be in 1..={n_qubits}, got {n_features}"
            )));
        }
        if feature_of_qubit.len() != n_qubits {
            return Err(Error::InvalidConfig(format!(
                "feature map has {} entries for {n_qubits} qubits",
                feature_of_qubit.len()
            )));
        }
        if let Some(&bad) = feature_of_qubit.iter().find(|&&f| f >= n_features) {
            return Err(Error::InvalidConfig(format!(
                "feature map references feature {bad}, only {n_features} available"
            )));
        }
        Ok(Self {
            n_qubits,
            n_layers,
            entangling,
            n_features,
            feature_of_qubit,
        })
    }

    pub fn feature_of_qubit(&self, q: usize) -> usize {
        self.feature_of_qubit[q]
    }

    /// Entangler pairs of one layer, in gate order.
    pub fn entangler_pairs(&self) -> Vec<(usize, usize)> {
        if self.n_qubits < 2 {
            return Vec::new();
        }
        let mut pairs: Vec<(usize, usize)> =
            (0..self.n_qubits - 1).map(|q| (q, q + 1)).collect();
        if self.entangling == Entangling::Circular && self.n_qubits > 2 {
            pairs.push((self.n_qubits - 1, 0));
        }
        pairs
    }

    pub fn n_entanglers(&self) -> usize {
        self.entangler_pairs().len()
    }

    /// Number of trainable rotation parameters in the circuit (cost
    /// coefficients excluded).
    pub fn n_circuit_params(&self) -> usize {
        self.n_qubits
            + self.n_layers * (self.n_qubits + self.n_entanglers())
            + self.n_qubits
    }
}

/// Which cost operator the model measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    SumZ,
    IsingZz,
    Projector { qubit: usize, outcome: u8 },
}

/// Trainable parameters of one repeated layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Chebyshev degrees φ_{l,q}; the realized gate angle is φ·arccos(x).
    pub encode: Vec<f64>,
    pub entangle: Vec<f64>,
}

/// Full trainable parameter vector of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub ry_initial: Vec<f64>,
    pub layers: Vec<LayerParams>,
    pub ry_final: Vec<f64>,
    pub cost: DiagonalObservable,
}

impl ModelParams {
    /// Initial parameters: per-layer encoding degrees form the arithmetic
    /// progression 0.01..=beta_encoding over the qubits (Chebyshev tower),
    /// all Ry and entangling angles are drawn uniformly from [−π, π], and
    /// the cost coefficients start at a symmetric point with the output
    /// inside [−1, 1].
    pub fn init(
        layout: &CircuitLayout,
        cost: CostKind,
        beta_encoding: f64,
        seed: u64,
    ) -> ModelParams {
        let nq = layout.n_qubits;
        let mut rng = RngStream::new(seed, (0, 0)).rng();
        let mut angles = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-PI..PI)).collect()
        };
        let ry_initial = angles(nq);
        let layers = (0..layout.n_layers)
            .map(|_| LayerParams {
                encode: tower(0.01, beta_encoding, nq),
                entangle: angles(layout.n_entanglers()),
            })
            .collect();
        let ry_final = angles(nq);
        let cost = match cost {
            CostKind::SumZ => DiagonalObservable::SumZ {
                offset: 0.0,
                phi: vec![1.0 / nq as f64; nq],
            },
            CostKind::IsingZz => DiagonalObservable::IsingZZ {
                n_qubits: nq,
                phi1: 0.0,
                phi2: 1.0 / nq as f64,
                phi3: 1.0 / (nq * nq) as f64,
            },
            CostKind::Projector { qubit, outcome } => DiagonalObservable::ProjectorQubit {
                qubit,
                outcome,
            },
        };
        ModelParams {
            ry_initial,
            layers,
            ry_final,
            cost,
        }
    }

    pub fn n_circuit_params(&self) -> usize {
        self.ry_initial.len()
            + self
                .layers
                .iter()
                .map(|l| l.encode.len() + l.entangle.len())
                .sum::<usize>()
            + self.ry_final.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_circuit_params() + self.cost.num_coefficients()
    }

    /// Flatten to a single vector: ry_initial, per layer [encode,
    /// entangle], ry_final, cost coefficients. Gate order in the built
    /// circuit matches this order exactly.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        flat.extend_from_slice(&self.ry_initial);
        for layer in &self.layers {
            flat.extend_from_slice(&layer.encode);
            flat.extend_from_slice(&layer.entangle);
        }
        flat.extend_from_slice(&self.ry_final);
        flat.extend(self.cost.coefficients());
        flat
    }

    /// Rebuild from a flat vector, taking the structure from `self`.
    pub fn from_flat(&self, flat: &[f64]) -> Result<ModelParams> {
        if flat.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                left: flat.len(),
                right: self.n_params(),
            });
        }
        let mut pos = 0;
        let mut take = |n: usize| -> Vec<f64> {
            let v = flat[pos..pos + n].to_vec();
            pos += n;
            v
        };
        let ry_initial = take(self.ry_initial.len());
        let layers = self
            .layers
            .iter()
            .map(|l| LayerParams {
                encode: take(l.encode.len()),
                entangle: take(l.entangle.len()),
            })
            .collect();
        let ry_final = take(self.ry_final.len());
        let cost = self.cost.with_coefficients(&take(self.cost.num_coefficients()))?;
        Ok(ModelParams {
            ry_initial,
            layers,
            ry_final,
            cost,
        })
    }
}

fn tower(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// One gate of the built circuit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Rx { q: usize, angle: f64 },
    Ry { q: usize, angle: f64 },
    Rzz { q1: usize, q2: usize, angle: f64 },
}

impl Gate {
    fn shifted(self, delta: f64) -> Gate {
        match self {
            Gate::Rx { q, angle } => Gate::Rx {
                q,
                angle: angle + delta,
            },
            Gate::Ry { q, angle } => Gate::Ry {
                q,
                angle: angle + delta,
            },
            Gate::Rzz { q1, q2, angle } => Gate::Rzz {
                q1,
                q2,
                angle: angle + delta,
            },
        }
    }

    fn apply(&self, state: &mut Statevector) -> Result<()> {
        match *self {
            Gate::Rx { q, angle } => state.apply_rx(q, angle),
            Gate::Ry { q, angle } => state.apply_ry(q, angle),
            Gate::Rzz { q1, q2, angle } => state.apply_rzz(q1, q2, angle),
        }
    }
}

fn check_input(layout: &CircuitLayout, x: &[f64]) -> Result<()> {
    if x.len() != layout.n_features {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: layout.n_features,
        });
    }
    if let Some(&bad) = x.iter().find(|v| v.abs() > 1.0 || !v.is_finite()) {
        return Err(Error::InputDomain { value: bad });
    }
    Ok(())
}

/// Gate sequence for input `x`; one gate per circuit parameter, in flat
/// parameter order.
pub fn build_circuit(layout: &CircuitLayout, params: &ModelParams, x: &[f64]) -> Result<Vec<Gate>> {
    check_input(layout, x)?;
    let nq = layout.n_qubits;
    let arccos: Vec<f64> = x.iter().map(|v| v.acos()).collect();
    let mut gates = Vec::with_capacity(layout.n_circuit_params());
    for q in 0..nq {
        gates.push(Gate::Ry {
            q,
            angle: params.ry_initial[q],
        });
    }
    for layer in &params.layers {
        for q in 0..nq {
            gates.push(Gate::Rx {
                q,
                angle: layer.encode[q] * arccos[layout.feature_of_qubit(q)],
            });
        }
        for (g, &(q1, q2)) in layout.entangler_pairs().iter().enumerate() {
            gates.push(Gate::Rzz {
                q1,
                q2,
                angle: layer.entangle[g],
            });
        }
    }
    for q in 0..nq {
        gates.push(Gate::Ry {
            q,
            angle: params.ry_final[q],
        });
    }
    Ok(gates)
}

/// d(gate angle)/d(parameter) per circuit parameter. Encoding parameters
/// multiply arccos(x), everything else enters the gate directly.
fn chain_factors(layout: &CircuitLayout, x: &[f64]) -> Vec<f64> {
    let nq = layout.n_qubits;
    let mut chain = Vec::with_capacity(layout.n_circuit_params());
    chain.extend(std::iter::repeat(1.0).take(nq));
    for _ in 0..layout.n_layers {
        chain.extend((0..nq).map(|q| x[layout.feature_of_qubit(q)].acos()));
        chain.extend(std::iter::repeat(1.0).take(layout.n_entanglers()));
    }
    chain.extend(std::iter::repeat(1.0).take(nq));
    chain
}

fn run_circuit(n_qubits: usize, gates: &[Gate]) -> Result<Statevector> {
    let mut state = Statevector::new_zero_state(n_qubits)?;
    for gate in gates {
        gate.apply(&mut state)?;
    }
    Ok(state)
}

/// How expectation values are estimated.
#[derive(Clone, Copy, Debug)]
pub enum EvalMode {
    /// From the exact outcome distribution.
    Exact,
    /// From finite-shot sampling; every circuit in the evaluation draws its
    /// own counts from consecutive offsets of `stream`.
    Shots { shots: u64, stream: RngStream },
}

/// Counts circuit executions; lets callers assert that gradient reuse
/// contracts hold.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExecStats {
    pub circuits: u64,
}

/// Outcome distribution of one circuit execution.
enum Dist {
    Exact(Vec<f64>),
    Sampled(MeasurementCounts),
}

impl Dist {
    fn expectation(&self, obs: &DiagonalObservable) -> Result<f64> {
        match self {
            Dist::Exact(p) => Ok(exact::expectation(obs, p)),
            Dist::Sampled(c) => observable::expectation_from_counts(obs, c),
        }
    }

    fn squared_expectation(&self, obs: &DiagonalObservable) -> Result<f64> {
        match self {
            Dist::Exact(p) => Ok(exact::squared_expectation(obs, p)),
            Dist::Sampled(c) => observable::squared_expectation_from_counts(obs, c),
        }
    }

    fn cost_gradient(&self, obs: &DiagonalObservable) -> Result<Vec<f64>> {
        match self {
            Dist::Exact(p) => Ok(exact::cost_gradient(obs, p)),
            Dist::Sampled(c) => observable::cost_gradient_from_counts(obs, c),
        }
    }

    fn squared_cost_gradient(&self, obs: &DiagonalObservable) -> Result<Vec<f64>> {
        match self {
            Dist::Exact(p) => Ok(exact::squared_cost_gradient(obs, p)),
            Dist::Sampled(c) => observable::squared_cost_gradient_from_counts(obs, c),
        }
    }
}

fn run_and_measure(
    n_qubits: usize,
    gates: &[Gate],
    mode: EvalMode,
    rel_circuit: u64,
    stats: &mut ExecStats,
) -> Result<Dist> {
    let state = run_circuit(n_qubits, gates)?;
    stats.circuits += 1;
    match mode {
        EvalMode::Exact => Ok(Dist::Exact(state.exact_probabilities())),
        EvalMode::Shots { shots, stream } => {
            if shots == 0 {
                return Err(Error::ZeroShots);
            }
            Ok(Dist::Sampled(
                state.sample_counts(shots, &stream.offset(rel_circuit))?,
            ))
        }
    }
}

/// Model output and variance at one input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvaluationResult {
    pub value: f64,
    pub variance: f64,
    /// None in exact mode.
    pub shots_used: Option<u64>,
}

/// f(x) = ⟨C⟩ and σ²_f(x) = ⟨C²⟩ − ⟨C⟩², from one circuit execution.
pub fn evaluate(
    layout: &CircuitLayout,
    params: &ModelParams,
    x: &[f64],
    mode: EvalMode,
) -> Result<EvaluationResult> {
    let mut stats = ExecStats::default();
    evaluate_counted(layout, params, x, mode, &mut stats)
}

pub fn evaluate_counted(
    layout: &CircuitLayout,
    params: &ModelParams,
    x: &[f64],
    mode: EvalMode,
    stats: &mut ExecStats,
) -> Result<EvaluationResult> {
    let gates = build_circuit(layout, params, x)?;
    let dist = run_and_measure(layout.n_qubits, &gates, mode, 0, stats)?;
    let value = dist.expectation(&params.cost)?;
    let variance = (dist.squared_expectation(&params.cost)? - value * value).max(0.0);
    Ok(EvaluationResult {
        value,
        variance,
        shots_used: match mode {
            EvalMode::Exact => None,
            EvalMode::Shots { shots, .. } => Some(shots),
        },
    })
}

/// Value, variance and the gradients of both with respect to the full
/// parameter vector (circuit parameters then cost coefficients).
#[derive(Clone, Debug)]
pub struct FullGradient {
    pub value: f64,
    pub variance: f64,
    pub grad_value: Vec<f64>,
    pub grad_variance: Vec<f64>,
}

/// Joint evaluation of f, σ² and both gradients.
///
/// Uses 1 + 2P circuit executions for P circuit parameters: one base
/// circuit and the two π/2-shifted circuits per parameter. ⟨C²⟩ and its
/// shifts are read from the same measurements, so the variance gradient
/// adds no executions beyond those of ∇⟨C⟩.
pub fn value_and_gradients(
    layout: &CircuitLayout,
    params: &ModelParams,
    x: &[f64],
    mode: EvalMode,
    stats: &mut ExecStats,
) -> Result<FullGradient> {
    let gates = build_circuit(layout, params, x)?;
    let chain = chain_factors(layout, x);
    let obs = &params.cost;
    let n_circuit = gates.len();

    let base = run_and_measure(layout.n_qubits, &gates, mode, 0, stats)?;
    let value = base.expectation(obs)?;
    let variance = (base.squared_expectation(obs)? - value * value).max(0.0);

    let mut grad_value = Vec::with_capacity(params.n_params());
    let mut grad_variance = Vec::with_capacity(params.n_params());
    let mut shifted = gates.clone();
    for i in 0..n_circuit {
        let original = shifted[i];
        shifted[i] = original.shifted(FRAC_PI_2);
        let plus = run_and_measure(layout.n_qubits, &shifted, mode, 1 + 2 * i as u64, stats)?;
        shifted[i] = original.shifted(-FRAC_PI_2);
        let minus = run_and_measure(layout.n_qubits, &shifted, mode, 2 + 2 * i as u64, stats)?;
        shifted[i] = original;

        let de = chain[i] * (plus.expectation(obs)? - minus.expectation(obs)?) / 2.0;
        let de2 =
            chain[i] * (plus.squared_expectation(obs)? - minus.squared_expectation(obs)?) / 2.0;
        grad_value.push(de);
        grad_variance.push(de2 - 2.0 * value * de);
    }

    let cost_grad = base.cost_gradient(obs)?;
    let sq_cost_grad = base.squared_cost_gradient(obs)?;
    for (g, g2) in cost_grad.iter().zip(&sq_cost_grad) {
        grad_value.push(*g);
        grad_variance.push(g2 - 2.0 * value * g);
    }

    Ok(FullGradient {
        value,
        variance,
        grad_value,
        grad_variance,
    })
}

/// df/dθ for every circuit rotation parameter via the two-term
/// parameter-shift rule.
pub fn parameter_shift_gradient(
    layout: &CircuitLayout,
    params: &ModelParams,
    x: &[f64],
    mode: EvalMode,
) -> Result<Vec<f64>> {
    let mut stats = ExecStats::default();
    let mut full = value_and_gradients(layout, params, x, mode, &mut stats)?;
    full.grad_value.truncate(layout.n_circuit_params());
    Ok(full.grad_value)
}

/// dσ²/dθ over all parameters: ∇σ² = ∇⟨C²⟩ − 2⟨C⟩·∇⟨C⟩.
pub fn variance_gradient(
    layout: &CircuitLayout,
    params: &ModelParams,
    x: &[f64],
    mode: EvalMode,
) -> Result<Vec<f64>> {
    let mut stats = ExecStats::default();
    Ok(value_and_gradients(layout, params, x, mode, &mut stats)?.grad_variance)
}

/// ⟨Z⟩ = cos(φ·arccos x) of the single-qubit model Rx(φ·arccos x)|0⟩; the
/// first-kind Chebyshev polynomial T_φ(x), smoothly interpolated for
/// non-integer φ.
pub fn chebyshev_curve(phi: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let obs = DiagonalObservable::SumZ {
        offset: 0.0,
        phi: vec![1.0],
    };
    grid.iter()
        .map(|&x| {
            if x.abs() > 1.0 || !x.is_finite() {
                return Err(Error::InputDomain { value: x });
            }
            let mut state = Statevector::new_zero_state(1)?;
            state.apply_rx(0, phi * x.acos())?;
            Ok(exact::expectation(&obs, &state.exact_probabilities()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn z_obs() -> DiagonalObservable {
        DiagonalObservable::SumZ {
            offset: 0.0,
            phi: vec![1.0],
        }
    }

    fn single_ry_model(theta: f64) -> (CircuitLayout, ModelParams) {
        let layout = CircuitLayout::new(1, 0, Entangling::Linear, 1).unwrap();
        let params = ModelParams {
            ry_initial: vec![theta],
            layers: vec![],
            ry_final: vec![0.0],
            cost: z_obs(),
        };
        (layout, params)
    }

    fn encoding_model(phi: f64) -> (CircuitLayout, ModelParams) {
        let layout = CircuitLayout::new(1, 1, Entangling::Linear, 1).unwrap();
        let params = ModelParams {
            ry_initial: vec![0.0],
            layers: vec![LayerParams {
                encode: vec![phi],
                entangle: vec![],
            }],
            ry_final: vec![0.0],
            cost: z_obs(),
        };
        (layout, params)
    }

    fn random_model(seed: u64) -> (CircuitLayout, ModelParams) {
        let layout = CircuitLayout::new(4, 2, Entangling::Circular, 1).unwrap();
        let params = ModelParams::init(&layout, CostKind::SumZ, 2.0, seed);
        (layout, params)
    }

    #[test]
    fn build_circuit_single_qubit_encoding() {
        let (layout, params) = encoding_model(2.0);
        let gates = build_circuit(&layout, &params, &[0.5]).unwrap();
        assert_eq!(gates.len(), 3);
        match gates[1] {
            Gate::Rx { q: 0, angle } => {
                assert_abs_diff_eq!(angle, 2.0 * 0.5f64.acos(), epsilon = 1e-15)
            }
            ref g => panic!("expected encoding Rx, got {g:?}"),
        }
    }

    #[test]
    fn build_circuit_x_one_zeroes_encoding() {
        let (layout, params) = random_model(3);
        let gates = build_circuit(&layout, &params, &[1.0]).unwrap();
        for g in gates {
            if let Gate::Rx { angle, .. } = g {
                assert_eq!(angle, 0.0);
            }
        }
    }

    #[test]
    fn build_circuit_domain_guard() {
        let (layout, params) = random_model(3);
        assert!(matches!(
            build_circuit(&layout, &params, &[1.5]),
            Err(Error::InputDomain { value }) if value == 1.5
        ));
    }

    #[test]
    fn circuit_gate_count_matches_param_count() {
        for entangling in [Entangling::Circular, Entangling::Linear] {
            let layout = CircuitLayout::new(5, 3, entangling, 2).unwrap();
            let params = ModelParams::init(&layout, CostKind::SumZ, 2.0, 1);
            let gates = build_circuit(&layout, &params, &[0.2, -0.4]).unwrap();
            assert_eq!(gates.len(), layout.n_circuit_params());
            assert_eq!(params.n_circuit_params(), layout.n_circuit_params());
        }
    }

    #[test]
    fn entangler_counts() {
        let circ = CircuitLayout::new(4, 1, Entangling::Circular, 1).unwrap();
        assert_eq!(circ.n_entanglers(), 4);
        let lin = CircuitLayout::new(4, 1, Entangling::Linear, 1).unwrap();
        assert_eq!(lin.n_entanglers(), 3);
        // two qubits: wrap-around would duplicate the only pair
        let two = CircuitLayout::new(2, 1, Entangling::Circular, 1).unwrap();
        assert_eq!(two.n_entanglers(), 1);
    }

    #[test]
    fn cyclic_feature_assignment() {
        let layout = CircuitLayout::new(9, 1, Entangling::Circular, 3).unwrap();
        let feats: Vec<usize> = (0..9).map(|q| layout.feature_of_qubit(q)).collect();
        assert_eq!(feats, vec![0, 1, 2, 0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn evaluate_chebyshev_value() {
        let (layout, params) = encoding_model(2.0);
        let r = evaluate(&layout, &params, &[0.5], EvalMode::Exact).unwrap();
        assert_abs_diff_eq!(r.value, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_x_one_is_deterministic() {
        let (layout, params) = encoding_model(2.0);
        let r = evaluate(&layout, &params, &[1.0], EvalMode::Exact).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_variance_matches_brute_force_enumeration() {
        let (layout, params) = random_model(7);
        let gates = build_circuit(&layout, &params, &[0.3]).unwrap();
        let probs = run_circuit(4, &gates).unwrap().exact_probabilities();
        // independent enumeration over all 16 outcomes
        let mut e = 0.0;
        let mut e2 = 0.0;
        for (b, p) in probs.iter().enumerate() {
            let d = params.cost.diag_value(b).unwrap();
            e += p * d;
            e2 += p * d * d;
        }
        let r = evaluate(&layout, &params, &[0.3], EvalMode::Exact).unwrap();
        assert_abs_diff_eq!(r.value, e, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, e2 - e * e, epsilon = 1e-12);
    }

    #[test]
    fn gradient_single_ry_closed_form() {
        // f = cos θ, df/dθ = −sin θ
        let (layout, params) = single_ry_model(0.0);
        let g = parameter_shift_gradient(&layout, &params, &[0.0], EvalMode::Exact).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-12);

        let (layout, params) = single_ry_model(FRAC_PI_2);
        let g = parameter_shift_gradient(&layout, &params, &[0.0], EvalMode::Exact).unwrap();
        assert_abs_diff_eq!(g[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn variance_gradient_single_ry_closed_form() {
        // σ² = 1 − cos²θ, dσ²/dθ = sin 2θ
        let (layout, params) = single_ry_model(0.0);
        let g = variance_gradient(&layout, &params, &[0.0], EvalMode::Exact).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-12);

        let (layout, params) = single_ry_model(PI / 4.0);
        let g = variance_gradient(&layout, &params, &[0.0], EvalMode::Exact).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-11);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (layout, params) = random_model(11);
        let x = [0.37];
        let flat = params.to_flat();
        let full = value_and_gradients(
            &layout,
            &params,
            &x,
            EvalMode::Exact,
            &mut ExecStats::default(),
        )
        .unwrap();
        let h = 1e-5;
        for j in 0..flat.len() {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[j] += h;
            dn[j] -= h;
            let fu = evaluate(&layout, &params.from_flat(&up).unwrap(), &x, EvalMode::Exact)
                .unwrap();
            let fd = evaluate(&layout, &params.from_flat(&dn).unwrap(), &x, EvalMode::Exact)
                .unwrap();
            assert_abs_diff_eq!(
                full.grad_value[j],
                (fu.value - fd.value) / (2.0 * h),
                epsilon = 1e-6
            );
            assert_abs_diff_eq!(
                full.grad_variance[j],
                (fu.variance - fd.variance) / (2.0 * h),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn shot_mode_estimator_consistency() {
        let (layout, params) = random_model(5);
        let x = [0.2];
        let exact = evaluate(&layout, &params, &x, EvalMode::Exact).unwrap();
        let n = 1_000_000;
        let sampled = evaluate(
            &layout,
            &params,
            &x,
            EvalMode::Shots {
                shots: n,
                stream: RngStream::new(123, (0, 0)),
            },
        )
        .unwrap();
        let tol = 5.0 * observable::std_of_mean(exact.variance, n);
        assert!(
            (sampled.value - exact.value).abs() < tol,
            "deviation {} exceeds {tol}",
            (sampled.value - exact.value).abs()
        );
        assert_eq!(sampled.shots_used, Some(n));
    }

    #[test]
    fn joint_gradient_costs_no_extra_circuits() {
        let (layout, params) = random_model(2);
        let x = [0.1];
        let mode = EvalMode::Shots {
            shots: 200,
            stream: RngStream::new(9, (0, 0)),
        };
        let mut joint = ExecStats::default();
        value_and_gradients(&layout, &params, &x, mode, &mut joint).unwrap();
        // the value gradient alone runs the same circuits
        let expected = 1 + 2 * layout.n_circuit_params() as u64;
        assert_eq!(joint.circuits, expected);
    }

    #[test]
    fn chebyshev_curve_values() {
        let ys = chebyshev_curve(2.0, &[0.5]).unwrap();
        assert_abs_diff_eq!(ys[0], -0.5, epsilon = 1e-12);
        let ys = chebyshev_curve(3.0, &[0.5]).unwrap();
        assert_abs_diff_eq!(ys[0], -1.0, epsilon = 1e-12);
        let ys = chebyshev_curve(2.5, &[1.0]).unwrap();
        assert_abs_diff_eq!(ys[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn init_params_tower_and_determinism() {
        let layout = CircuitLayout::new(3, 2, Entangling::Circular, 1).unwrap();
        let a = ModelParams::init(&layout, CostKind::SumZ, 2.01, 42);
        let b = ModelParams::init(&layout, CostKind::SumZ, 2.01, 42);
        assert_eq!(a, b);
        for layer in &a.layers {
            assert_abs_diff_eq!(layer.encode[0], 0.01, epsilon = 1e-15);
            assert_abs_diff_eq!(layer.encode[1], 1.01, epsilon = 1e-15);
            assert_abs_diff_eq!(layer.encode[2], 2.01, epsilon = 1e-15);
            assert!(layer.encode.iter().all(|&e| e >= 0.01));
        }
        assert!(a.ry_initial.iter().all(|&v| (-PI..PI).contains(&v)));
    }

    #[test]
    fn flat_round_trip() {
        let (_, params) = random_model(17);
        let flat = params.to_flat();
        let back = params.from_flat(&flat).unwrap();
        assert_eq!(params, back);
    }
}
