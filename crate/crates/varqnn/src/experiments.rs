//! Benchmark datasets, the water-PES ingestion pipeline, evaluation
//! metrics and the α-schedule sweep.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qnn::{self, CircuitLayout, EvalMode, ModelParams};
use crate::rng::RngStream;
use crate::train::{self, AlphaSchedule, Regularization, ShotMode, TrainLog, TrainSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Inputs in [−1, 1]^d with rescaled labels and optional fit weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub split: Split,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                left: self.inputs.len(),
                right: self.labels.len(),
            });
        }
        if self.inputs.is_empty() {
            return Err(Error::InvalidConfig("dataset is empty".into()));
        }
        let d = self.inputs[0].len();
        for x in &self.inputs {
            if x.len() != d {
                return Err(Error::InvalidConfig("ragged dataset inputs".into()));
            }
            if let Some(&bad) = x.iter().find(|v| v.abs() > 1.0 || !v.is_finite()) {
                return Err(Error::InputDomain { value: bad });
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.inputs.len() {
                return Err(Error::LengthMismatch {
                    left: w.len(),
                    right: self.inputs.len(),
                });
            }
            if w.iter().any(|&wi| !(wi > 0.0)) {
                return Err(Error::InvalidConfig("weights must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// The three closed-form regression benchmarks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    /// ln(x) on [0.05, 1.0]
    Log,
    /// |x| on [−1, 1], weighted with w(x) = 2·exp(−x²)
    Abs,
    /// x·sin(5πx) on [−1, 1]
    Oscillation,
}

impl FunctionKind {
    pub fn default_domain(&self) -> (f64, f64) {
        match self {
            FunctionKind::Log => (0.05, 1.0),
            FunctionKind::Abs | FunctionKind::Oscillation => (-1.0, 1.0),
        }
    }

    pub fn target(&self, x: f64) -> f64 {
        match self {
            FunctionKind::Log => x.ln(),
            FunctionKind::Abs => x.abs(),
            FunctionKind::Oscillation => x * (5.0 * std::f64::consts::PI * x).sin(),
        }
    }
}

fn equidistant(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

fn affine_to_unit(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Equidistant training set for one benchmark function: inputs rescaled
/// affinely to [−1, 1], labels to [0, 1].
pub fn gen_function_dataset(
    kind: FunctionKind,
    n_points: usize,
    domain: Option<(f64, f64)>,
) -> Result<Dataset> {
    if n_points < 2 {
        return Err(Error::InvalidConfig("need at least 2 points".into()));
    }
    let (lo, hi) = domain.unwrap_or_else(|| kind.default_domain());
    if !(hi > lo) {
        return Err(Error::InvalidConfig("empty domain".into()));
    }
    let xs = equidistant(lo, hi, n_points);
    let ys: Vec<f64> = xs.iter().map(|&x| kind.target(x)).collect();
    let inputs: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| vec![2.0 * (x - lo) / (hi - lo) - 1.0])
        .collect();
    let labels = affine_to_unit(&ys);
    let weights = match kind {
        FunctionKind::Abs => Some(xs.iter().map(|&x| 2.0 * (-x * x).exp()).collect()),
        _ => None,
    };
    Ok(Dataset {
        inputs,
        labels,
        weights,
        split: Split::Train,
    })
}

/// Equidistant inference grid on the rescaled domain: spacing 0.002 for
/// the logarithm benchmark, 0.004 for the others.
pub fn gen_inference_grid(kind: FunctionKind) -> Vec<f64> {
    let spacing: f64 = match kind {
        FunctionKind::Log => 0.002,
        _ => 0.004,
    };
    let n = (2.0 / spacing).round() as usize + 1;
    equidistant(-1.0, 1.0, n)
}

/// One sample of the water potential energy surface: the two O–H bond
/// lengths, the H–O–H angle (radians) and the energy in Hartree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PesRecord {
    pub r1: f64,
    pub r2: f64,
    /// H–O–H angle in radians.
    pub angle: f64,
    pub energy: f64,
}

impl PesRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if !(self.r1 > 0.0) || !(self.r2 > 0.0) {
            return Err("bond lengths must be positive".into());
        }
        if !(self.angle > 0.0 && self.angle < std::f64::consts::PI) {
            return Err("angle must lie in (0, pi) radians".into());
        }
        if !self.energy.is_finite() {
            return Err("non-finite energy".into());
        }
        Ok(())
    }
}

/// Parse a PES CSV with header `r1,r2,angle_rad,energy_hartree` (or
/// `angle_deg` for degree inputs). Malformed rows are rejected with their
/// line number.
pub fn load_pes_csv(path: &Path) -> Result<Vec<PesRecord>> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(&display, 1, "empty file"))?;
    let degrees = match header.trim() {
        "r1,r2,angle_rad,energy_hartree" => false,
        "r1,r2,angle_deg,energy_hartree" => true,
        other => {
            return Err(Error::format(
                &display,
                1,
                format!("unrecognized header {other:?}; expected r1,r2,angle_rad|angle_deg,energy_hartree"),
            ))
        }
    };
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::format(
                &display,
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let mut nums = [0.0f64; 4];
        for (slot, field) in nums.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| {
                Error::format(&display, line_no, format!("invalid number {field:?}"))
            })?;
        }
        let mut rec = PesRecord {
            r1: nums[0],
            r2: nums[1],
            angle: nums[2],
            energy: nums[3],
        };
        if degrees {
            rec.angle = rec.angle.to_radians();
        }
        rec.validate()
            .map_err(|msg| Error::format(&display, line_no, msg))?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::format(&display, 1, "no data rows"));
    }
    Ok(records)
}

/// Affine maps applied when building the PES dataset; kept for reporting
/// predictions back in Hartree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PesRescale {
    pub feature_lo: [f64; 3],
    pub feature_hi: [f64; 3],
    pub energy_lo: f64,
    pub energy_hi: f64,
}

impl PesRescale {
    /// (r1, r2, angle) mapped into [−0.9, 0.9] per feature.
    pub fn features(&self, rec: &PesRecord) -> Vec<f64> {
        let raw = [rec.r1, rec.r2, rec.angle];
        (0..3)
            .map(|j| {
                let span = self.feature_hi[j] - self.feature_lo[j];
                if span <= 0.0 {
                    0.0
                } else {
                    1.8 * (raw[j] - self.feature_lo[j]) / span - 0.9
                }
            })
            .collect()
    }

    /// Energy mapped into [0, 1].
    pub fn energy(&self, e: f64) -> f64 {
        let span = self.energy_hi - self.energy_lo;
        if span <= 0.0 {
            0.0
        } else {
            (e - self.energy_lo) / span
        }
    }

    /// Inverse of [`energy`](Self::energy): model output back to Hartree.
    pub fn to_hartree(&self, y: f64) -> f64 {
        self.energy_lo + y * (self.energy_hi - self.energy_lo)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PesSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub rescale: PesRescale,
}

/// Rescale PES records (features to [−0.9, 0.9], energies to [0, 1]) and
/// split them at random into `n_train` training samples plus the rest as
/// test set.
pub fn prepare_pes_dataset(records: &[PesRecord], n_train: usize, seed: u64) -> Result<PesSplit> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no PES records".into()));
    }
    if n_train == 0 || n_train >= records.len() {
        return Err(Error::InvalidConfig(format!(
            "n_train must be in 1..{}, got {n_train}",
            records.len()
        )));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut e_lo = f64::INFINITY;
    let mut e_hi = f64::NEG_INFINITY;
    for rec in records {
        for (j, v) in [rec.r1, rec.r2, rec.angle].into_iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
        e_lo = e_lo.min(rec.energy);
        e_hi = e_hi.max(rec.energy);
    }
    let rescale = PesRescale {
        feature_lo: lo,
        feature_hi: hi,
        energy_lo: e_lo,
        energy_hi: e_hi,
    };

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut RngStream::new(seed, (0, 1)).rng());

    let build = |idx: &[usize], split: Split| Dataset {
        inputs: idx.iter().map(|&i| rescale.features(&records[i])).collect(),
        labels: idx
            .iter()
            .map(|&i| rescale.energy(records[i].energy))
            .collect(),
        weights: None,
        split,
    };
    Ok(PesSplit {
        train: build(&order[..n_train], Split::Train),
        test: build(&order[n_train..], Split::Test),
        rescale,
    })
}

/// Harmonic-plus-coupling stand-in for the water surface:
/// E = k_r((r1−r0)² + (r2−r0)²) + k_θ(θ−θ0)² + k_c(r1−r0)(r2−r0).
pub mod synthetic_pes {
    use super::*;
    use rand::Rng;

    /// Equilibrium O–H bond length (Å).
    pub const R0: f64 = 0.9584;
    /// Equilibrium H–O–H angle (rad), 104.5°.
    pub const THETA0: f64 = 1.8239;
    /// Bond stretch force constant (Hartree/Å²).
    pub const K_R: f64 = 0.35;
    /// Angle bend force constant (Hartree/rad²).
    pub const K_THETA: f64 = 0.12;
    /// Stretch-stretch coupling (Hartree/Å²).
    pub const K_C: f64 = 0.06;

    pub fn energy(r1: f64, r2: f64, theta: f64) -> f64 {
        let d1 = r1 - R0;
        let d2 = r2 - R0;
        K_R * (d1 * d1 + d2 * d2) + K_THETA * (theta - THETA0).powi(2) + K_C * d1 * d2
    }

    /// `n_samples` records drawn uniformly from a box around the minimum.
    pub fn generate(n_samples: usize, seed: u64) -> Vec<PesRecord> {
        let mut rng = RngStream::new(seed, (0, 2)).rng();
        (0..n_samples)
            .map(|_| {
                let r1 = rng.random_range(R0 - 0.12..R0 + 0.18);
                let r2 = rng.random_range(R0 - 0.12..R0 + 0.18);
                let angle = rng.random_range(THETA0 - 0.3..THETA0 + 0.3);
                PesRecord {
                    r1,
                    r2,
                    angle,
                    energy: energy(r1, r2, angle),
                }
            })
            .collect()
    }
}

/// Coefficient of determination 1 − Σ(y−f)² / Σ(y−ȳ)².
pub fn r2_score(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidConfig("empty label set".into()));
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let rss: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(f, y)| (y - f) * (y - f))
        .sum();
    let tss: f64 = labels.iter().map(|y| (y - mean) * (y - mean)).sum();
    if tss == 0.0 {
        return Ok(if rss == 0.0 { 1.0 } else { f64::NEG_INFINITY });
    }
    Ok(1.0 - rss / tss)
}

/// Repeat a shot-based model evaluation and report (sample mean,
/// half-width of the 95% band of a single evaluation = 1.96·sample std).
pub fn confidence_interval(
    layout: &CircuitLayout,
    params: &ModelParams,
    x: &[f64],
    repeats: usize,
    shots: u64,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if repeats < 2 {
        return Err(Error::InvalidConfig("need at least 2 repeats".into()));
    }
    let mut values = Vec::with_capacity(repeats);
    for rep in 0..repeats {
        let mode = EvalMode::Shots {
            shots,
            stream: stream.offset(rep as u64),
        };
        values.push(qnn::evaluate(layout, params, x, mode)?.value);
    }
    let mean = values.iter().sum::<f64>() / repeats as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (repeats - 1) as f64;
    Ok((mean, 1.96 * var.sqrt()))
}

/// Exact-mode training once per α schedule; the returned logs share the
/// iteration axis of the base settings.
pub fn alpha_sweep(
    base: &TrainSettings,
    data: &Dataset,
    schedules: &[AlphaSchedule],
) -> Result<Vec<TrainLog>> {
    schedules
        .iter()
        .map(|s| {
            let settings = TrainSettings {
                regularization: Regularization::Scheduled(*s),
                shots: ShotMode::Exact,
                ..base.clone()
            };
            Ok(train::train(&settings, data)?.log)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    #[test]
    fn abs_dataset_weights_and_rescale() {
        let ds = gen_function_dataset(FunctionKind::Abs, 21, None).unwrap();
        ds.validate().unwrap();
        let w = ds.weights.as_ref().unwrap();
        // x = 0 sits at the middle of the 21-point grid
        assert_abs_diff_eq!(w[10], 2.0, epsilon = 1e-12);
        let min = ds.labels.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ds.labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((min, max), (0.0, 1.0));
    }

    #[test]
    fn log_dataset_grid() {
        let ds = gen_function_dataset(FunctionKind::Log, 20, None).unwrap();
        assert_eq!(ds.len(), 20);
        assert_abs_diff_eq!(ds.inputs[0][0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ds.inputs[19][0], 1.0, epsilon = 1e-12);
        // equidistant after rescale
        let step = ds.inputs[1][0] - ds.inputs[0][0];
        for k in 1..20 {
            assert_abs_diff_eq!(ds.inputs[k][0] - ds.inputs[k - 1][0], step, epsilon = 1e-12);
        }
        assert!(ds.weights.is_none());
    }

    #[test]
    fn inference_grid_spacing() {
        let log = gen_inference_grid(FunctionKind::Log);
        assert_abs_diff_eq!(log[1] - log[0], 0.002, epsilon = 1e-12);
        let osc = gen_inference_grid(FunctionKind::Oscillation);
        assert_abs_diff_eq!(osc[1] - osc[0], 0.004, epsilon = 1e-12);
        for g in [log, osc] {
            assert!(g.iter().all(|x| x.abs() <= 1.0));
        }
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn pes_csv_round_trip() {
        let recs = synthetic_pes::generate(97, 3);
        let mut text = String::from("r1,r2,angle_rad,energy_hartree\n");
        for r in &recs {
            text.push_str(&format!("{},{},{},{}\n", r.r1, r.r2, r.angle, r.energy));
        }
        let f = write_csv(&text);
        let loaded = load_pes_csv(f.path()).unwrap();
        assert_eq!(loaded.len(), 97);
        assert_abs_diff_eq!(loaded[0].r1, recs[0].r1, epsilon = 1e-12);
    }

    #[test]
    fn pes_csv_degree_header() {
        let f = write_csv("r1,r2,angle_deg,energy_hartree\n0.95,0.97,104.5,-76.1\n");
        let recs = load_pes_csv(f.path()).unwrap();
        assert_abs_diff_eq!(recs[0].angle, 104.5f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn pes_csv_rejects_bad_rows() {
        let f = write_csv("r1,r2,angle_rad,energy_hartree\n-0.1,0.97,1.8,-76.1\n");
        match load_pes_csv(f.path()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected row error, got {other:?}"),
        }
        let f = write_csv("r1,r2,angle_rad,energy_hartree\n0.9,0.9,1.8,oops\n");
        assert!(load_pes_csv(f.path()).is_err());
        let f = write_csv("");
        assert!(load_pes_csv(f.path()).is_err());
        let f = write_csv("bond1,bond2,angle,E\n");
        assert!(load_pes_csv(f.path()).is_err());
    }

    #[test]
    fn pes_split_partition_and_ranges() {
        let recs = synthetic_pes::generate(97, 5);
        let split = prepare_pes_dataset(&recs, 50, 11).unwrap();
        assert_eq!(split.train.len(), 50);
        assert_eq!(split.test.len(), 47);
        split.train.validate().unwrap();
        split.test.validate().unwrap();
        let all: Vec<&Vec<f64>> = split.train.inputs.iter().chain(&split.test.inputs).collect();
        let mut per_feature_min = [f64::INFINITY; 3];
        let mut per_feature_max = [f64::NEG_INFINITY; 3];
        for x in &all {
            for j in 0..3 {
                per_feature_min[j] = per_feature_min[j].min(x[j]);
                per_feature_max[j] = per_feature_max[j].max(x[j]);
            }
        }
        for j in 0..3 {
            assert_abs_diff_eq!(per_feature_min[j], -0.9, epsilon = 1e-12);
            assert_abs_diff_eq!(per_feature_max[j], 0.9, epsilon = 1e-12);
        }
        let labels: Vec<f64> = split
            .train
            .labels
            .iter()
            .chain(&split.test.labels)
            .cloned()
            .collect();
        let lo = labels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pes_rescale_round_trip() {
        let recs = synthetic_pes::generate(40, 8);
        let split = prepare_pes_dataset(&recs, 20, 1).unwrap();
        for r in &recs {
            let y = split.rescale.energy(r.energy);
            assert_abs_diff_eq!(split.rescale.to_hartree(y), r.energy, epsilon = 1e-12);
        }
    }

    #[test]
    fn pes_split_deterministic() {
        let recs = synthetic_pes::generate(30, 8);
        let a = prepare_pes_dataset(&recs, 15, 4).unwrap();
        let b = prepare_pes_dataset(&recs, 15, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_pes_symmetry_and_minimum() {
        use synthetic_pes::*;
        assert_eq!(energy(R0, R0, THETA0), 0.0);
        assert_abs_diff_eq!(
            energy(1.0, 0.9, THETA0),
            energy(0.9, 1.0, THETA0),
            epsilon = 1e-15
        );
        assert!(energy(1.05, 0.92, THETA0 + 0.2) > 0.0);
        assert_eq!(generate(10, 7), generate(10, 7));
    }

    #[test]
    fn r2_score_examples() {
        assert_eq!(r2_score(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(r2_score(&[1.5, 1.5], &[1.0, 2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(r2_score(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), -3.0, epsilon = 1e-12);
        assert!(r2_score(&[0.0, 1.0], &[1.0, 0.5]).unwrap() <= 1.0);
    }
}
