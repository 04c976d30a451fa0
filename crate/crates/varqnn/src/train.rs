//! Variance-regularized training loop.
//!
//! Each iteration evaluates the model and its output variance at every
//! training point with the maximum shot budget, schedules the shot count
//! for the gradient circuits from the relative standard deviation of the
//! fitting loss, differentiates L_fit + α(i)·L_var with parameter-shift
//! circuits, and applies an ADAM update.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::Dataset;
use crate::qnn::{
    self, CircuitLayout, CostKind, EvalMode, ExecStats, FullGradient, ModelParams,
};
use crate::rng::RngStream;

/// Regularization strength α(i) as a modified sigmoid: high plateau of
/// width ~`b` at the start, decay with slope `a`, final plateau `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub a: f64,
    pub b: f64,
    pub v: f64,
}

impl AlphaSchedule {
    /// a=0.08, b=20, v=0.005; the schedule used for all reference runs.
    pub const DEFAULT: AlphaSchedule = AlphaSchedule {
        a: 0.08,
        b: 20.0,
        v: 0.005,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !(self.b > 0.0) || !(self.v > 0.0 && self.v < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha schedule requires a > 0, b > 0, 0 < v < 1; got a={}, b={}, v={}",
                self.a, self.b, self.v
            )));
        }
        Ok(())
    }

    /// α(i) = (1−v)·b·e^{a(b−i)} / (b·e^{a(b−i)} + 1) + v
    pub fn alpha_at(&self, i: u64) -> f64 {
        let e = self.b * (self.a * (self.b - i as f64)).exp();
        (1.0 - self.v) * e / (e + 1.0) + self.v
    }
}

/// How the regularization strength evolves over iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Regularization {
    None,
    Constant(f64),
    Scheduled(AlphaSchedule),
}

impl Regularization {
    pub fn alpha_at(&self, i: u64) -> f64 {
        match self {
            Regularization::None => 0.0,
            Regularization::Constant(alpha) => *alpha,
            Regularization::Scheduled(s) => s.alpha_at(i),
        }
    }
}

/// Shot budget policy for the gradient circuits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotPolicy {
    /// Upper bound on the relative standard deviation of L_fit.
    pub rsd_bound: f64,
    pub min_shots: u64,
    pub max_shots: u64,
}

impl ShotPolicy {
    /// β=0.1, 100..5000 shots.
    pub const DEFAULT: ShotPolicy = ShotPolicy {
        rsd_bound: 0.1,
        min_shots: 100,
        max_shots: 5000,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.rsd_bound > 0.0) || self.min_shots < 1 || self.min_shots > self.max_shots {
            return Err(Error::InvalidConfig(format!(
                "shot policy requires rsd_bound > 0 and 1 <= min_shots <= max_shots; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Whether expectations come from the exact distribution or finite shots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShotMode {
    Exact,
    Sampled(ShotPolicy),
}

fn weight(weights: Option<&[f64]>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w[i])
}

/// Weighted squared error Σ_i w_i·(f_i − y_i)².
pub fn fit_loss(predictions: &[f64], labels: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != predictions.len() {
            return Err(Error::LengthMismatch {
                left: w.len(),
                right: predictions.len(),
            });
        }
        if w.iter().any(|&wi| wi < 0.0) {
            return Err(Error::InvalidConfig("negative fit weight".into()));
        }
    }
    Ok(predictions
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (f, y))| weight(weights, i) * (f - y) * (f - y))
        .sum())
}

/// Variance loss Σ_k σ²(x_k).
pub fn var_loss(variances: &[f64]) -> f64 {
    variances.iter().sum()
}

/// L = L_fit + α·L_var.
pub fn total_loss(l_fit: f64, l_var: f64, alpha: f64) -> f64 {
    l_fit + alpha * l_var
}

/// First-order propagation of the per-point shot noise into the fitting
/// loss: var(L_fit) = 4·Σ_i w_i²·r_i²·σ²_i / N.
pub fn estimate_fit_loss_variance(
    residuals: &[f64],
    variances: &[f64],
    weights: Option<&[f64]>,
    shots: u64,
) -> f64 {
    fit_variance_numerator(residuals, variances, weights) / shots as f64
}

fn fit_variance_numerator(residuals: &[f64], variances: &[f64], weights: Option<&[f64]>) -> f64 {
    4.0 * residuals
        .iter()
        .zip(variances)
        .enumerate()
        .map(|(i, (r, s2))| {
            let w = weight(weights, i);
            w * w * r * r * s2
        })
        .sum::<f64>()
}

/// Smallest shot count keeping the relative standard deviation of L_fit at
/// or below the policy bound, clamped to [min_shots, max_shots].
pub fn shots_for_gradient(
    residuals: &[f64],
    variances: &[f64],
    weights: Option<&[f64]>,
    policy: &ShotPolicy,
) -> u64 {
    let l_fit: f64 = residuals
        .iter()
        .enumerate()
        .map(|(i, r)| weight(weights, i) * r * r)
        .sum();
    if l_fit <= 0.0 {
        return policy.max_shots;
    }
    let numerator = fit_variance_numerator(residuals, variances, weights);
    let needed = numerator / (policy.rsd_bound * policy.rsd_bound * l_fit * l_fit);
    let n = needed.ceil();
    if !n.is_finite() || n >= policy.max_shots as f64 {
        policy.max_shots
    } else {
        (n as u64).max(policy.min_shots)
    }
}

/// ADAM optimizer state with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(learning_rate: f64, dim: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of `params` along `gradient`.
    pub fn step(&mut self, params: &mut [f64], gradient: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || gradient.len() != params.len() {
            return Err(Error::LengthMismatch {
                left: gradient.len(),
                right: self.first_moment.len(),
            });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for j in 0..params.len() {
            let g = gradient[j];
            self.first_moment[j] = self.beta1 * self.first_moment[j] + (1.0 - self.beta1) * g;
            self.second_moment[j] =
                self.beta2 * self.second_moment[j] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[j] / bc1;
            let v_hat = self.second_moment[j] / bc2;
            params[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Everything the training loop needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub layout: CircuitLayout,
    pub cost: CostKind,
    pub beta_encoding: f64,
    pub regularization: Regularization,
    pub shots: ShotMode,
    pub learning_rate: f64,
    pub max_iters: u64,
    pub seed: u64,
    /// Evaluation points for L_var; defaults to the training inputs.
    pub var_points: Option<Vec<Vec<f64>>>,
}

/// One completed iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: u64,
    pub l_fit: f64,
    pub l_var: f64,
    pub alpha: f64,
    /// Shots per gradient circuit; 0 in exact mode.
    pub gradient_shots: u64,
    pub wall_time_s: f64,
}

/// Per-iteration history of one training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    /// Mean L_fit over the last `n` iterations.
    pub fn final_fit_loss(&self, n: usize) -> f64 {
        tail_mean(self.records.iter().map(|r| r.l_fit), self.records.len(), n)
    }

    /// Mean L_var over the last `n` iterations.
    pub fn final_var_loss(&self, n: usize) -> f64 {
        tail_mean(self.records.iter().map(|r| r.l_var), self.records.len(), n)
    }
}

fn tail_mean(values: impl Iterator<Item = f64>, len: usize, n: usize) -> f64 {
    let n = n.min(len);
    if n == 0 {
        return f64::NAN;
    }
    values.skip(len - n).sum::<f64>() / n as f64
}

/// Diagnostic attached when a run aborts on a non-finite quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub iteration: u64,
    pub what: String,
}

/// Final parameters and history; `aborted` is set when a NaN/Inf stopped
/// the run with the last valid state preserved.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: TrainLog,
    pub aborted: Option<AbortInfo>,
}

/// Per-point gradient contributions folded into the total loss gradient
/// ∇L = Σ_i 2·w_i·r_i·∇f_i + α·Σ_k ∇σ²_k.
fn assemble_gradient(
    point_grads: &[FullGradient],
    residuals: &[f64],
    weights: Option<&[f64]>,
    alpha: f64,
    var_grads: &[&FullGradient],
    dim: usize,
) -> Vec<f64> {
    let mut total = vec![0.0; dim];
    for (i, g) in point_grads.iter().enumerate() {
        let scale = 2.0 * weight(weights, i) * residuals[i];
        for (t, dg) in total.iter_mut().zip(&g.grad_value) {
            *t += scale * dg;
        }
    }
    if alpha != 0.0 {
        for g in var_grads {
            for (t, dv) in total.iter_mut().zip(&g.grad_variance) {
                *t += alpha * dv;
            }
        }
    }
    total
}

/// Run the variance-regularized training loop.
pub fn train(settings: &TrainSettings, data: &Dataset) -> Result<TrainOutcome> {
    data.validate()?;
    if let Some(x) = data.inputs.first() {
        if x.len() != settings.layout.n_features {
            return Err(Error::InvalidConfig(format!(
                "dataset has {} features, layout expects {}",
                x.len(),
                settings.layout.n_features
            )));
        }
    }
    if let Regularization::Scheduled(s) = &settings.regularization {
        s.validate()?;
    }
    if let ShotMode::Sampled(p) = &settings.shots {
        p.validate()?;
    }

    let layout = &settings.layout;
    let mut params = ModelParams::init(layout, settings.cost, settings.beta_encoding, settings.seed);
    let mut flat = params.to_flat();
    let mut adam = AdamState::new(settings.learning_rate, flat.len());
    let mut log = TrainLog::default();
    let weights = data.weights.as_deref();

    for i in 0..settings.max_iters {
        let started = Instant::now();
        params = params.from_flat(&flat)?;
        let mut circuit_idx: u64 = 0;
        let mut next_mode = |shots: Option<u64>, span: u64| -> EvalMode {
            let mode = match shots {
                None => EvalMode::Exact,
                Some(n) => EvalMode::Shots {
                    shots: n,
                    stream: RngStream::new(settings.seed, (i, circuit_idx)),
                },
            };
            circuit_idx += span;
            mode
        };
        let eval_shots = match settings.shots {
            ShotMode::Exact => None,
            ShotMode::Sampled(p) => Some(p.max_shots),
        };

        // (1) loss evaluation at the full shot budget
        let mut values = Vec::with_capacity(data.inputs.len());
        let mut variances = Vec::with_capacity(data.inputs.len());
        for x in &data.inputs {
            let mode = next_mode(eval_shots, 1);
            let r = qnn::evaluate(layout, &params, x, mode)?;
            values.push(r.value);
            variances.push(r.variance);
        }
        let residuals: Vec<f64> = values.iter().zip(&data.labels).map(|(f, y)| f - y).collect();
        let l_fit = fit_loss(&values, &data.labels, weights)?;
        let l_var = match &settings.var_points {
            None => var_loss(&variances),
            Some(points) => {
                let mut vs = Vec::with_capacity(points.len());
                for x in points {
                    let mode = next_mode(eval_shots, 1);
                    vs.push(qnn::evaluate(layout, &params, x, mode)?.variance);
                }
                var_loss(&vs)
            }
        };
        let alpha = settings.regularization.alpha_at(i);
        if !l_fit.is_finite() || !l_var.is_finite() {
            return Ok(TrainOutcome {
                params,
                log,
                aborted: Some(AbortInfo {
                    iteration: i,
                    what: "loss".into(),
                }),
            });
        }

        // (2) shot budget for the gradient circuits
        let grad_shots = match settings.shots {
            ShotMode::Exact => None,
            ShotMode::Sampled(p) => {
                Some(shots_for_gradient(&residuals, &variances, weights, &p))
            }
        };

        // (3) parameter-shift gradient of L_fit + α·L_var
        let span = 1 + 2 * layout.n_circuit_params() as u64;
        let mut stats = ExecStats::default();
        let mut point_grads = Vec::with_capacity(data.inputs.len());
        for x in &data.inputs {
            let mode = next_mode(grad_shots, span);
            point_grads.push(qnn::value_and_gradients(layout, &params, x, mode, &mut stats)?);
        }
        let extra_var_grads: Vec<FullGradient> = match &settings.var_points {
            None => Vec::new(),
            Some(points) => {
                let mut vs = Vec::with_capacity(points.len());
                for x in points {
                    let mode = next_mode(grad_shots, span);
                    vs.push(qnn::value_and_gradients(layout, &params, x, mode, &mut stats)?);
                }
                vs
            }
        };
        let var_grads: Vec<&FullGradient> = if settings.var_points.is_none() {
            point_grads.iter().collect()
        } else {
            extra_var_grads.iter().collect()
        };
        let gradient =
            assemble_gradient(&point_grads, &residuals, weights, alpha, &var_grads, flat.len());
        if gradient.iter().any(|g| !g.is_finite()) {
            return Ok(TrainOutcome {
                params,
                log,
                aborted: Some(AbortInfo {
                    iteration: i,
                    what: "gradient".into(),
                }),
            });
        }

        // (4) parameter update
        adam.step(&mut flat, &gradient)?;

        log.records.push(TrainRecord {
            iteration: i,
            l_fit,
            l_var,
            alpha,
            gradient_shots: grad_shots.unwrap_or(0),
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }

    params = params.from_flat(&flat)?;
    Ok(TrainOutcome {
        params,
        log,
        aborted: None,
    })
}
