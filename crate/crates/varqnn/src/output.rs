//! Run artifacts: training log CSVs, inference tables, saved models and
//! the per-run JSON summary.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! repeated runs with the same seed produce byte-identical files and
//! parsing a file back recovers the exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::observable::DiagonalObservable;
use crate::qnn::{CircuitLayout, Entangling, LayerParams, ModelParams};
use crate::train::{AbortInfo, TrainLog};

/// Column schema of the per-iteration training log.
pub const TRAIN_LOG_HEADER: &str = "iter,L_fit,L_var,alpha,shots";

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn train_log_csv(log: &TrainLog) -> String {
    let mut out = String::from(TRAIN_LOG_HEADER);
    out.push('\n');
    for r in &log.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration, r.l_fit, r.l_var, r.alpha, r.gradient_shots
        );
    }
    out
}

pub fn write_train_log(path: &Path, log: &TrainLog) -> Result<()> {
    write_text(path, &train_log_csv(log))
}

pub fn parse_train_log(path: &Path) -> Result<TrainLog> {
    let display = path.display().to_string();
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRAIN_LOG_HEADER => {}
        Some((_, h)) => {
            return Err(Error::format(
                &display,
                1,
                format!("expected header '{TRAIN_LOG_HEADER}', found '{h}'"),
            ))
        }
        None => return Err(Error::format(&display, 1, "empty file")),
    }
    let mut log = TrainLog::default();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::format(&display, idx + 1, "expected 5 fields"));
        }
        let parse = |i: usize| -> Result<f64> {
            fields[i]
                .trim()
                .parse()
                .map_err(|_| Error::format(&display, idx + 1, format!("bad number '{}'", fields[i])))
        };
        log.records.push(crate::train::TrainRecord {
            iteration: parse(0)? as u64,
            l_fit: parse(1)?,
            l_var: parse(2)?,
            alpha: parse(3)?,
            gradient_shots: parse(4)? as u64,
            wall_time_s: 0.0,
        });
    }
    Ok(log)
}

/// Mean trajectory across seeds, same schema as the per-seed log. Shots
/// are averaged and may be fractional. Logs shorter than the longest run
/// (aborted seeds) stop contributing past their end.
pub fn aggregate_csv(logs: &[TrainLog]) -> String {
    let mut out = String::from(TRAIN_LOG_HEADER);
    out.push('\n');
    let longest = logs.iter().map(|l| l.records.len()).max().unwrap_or(0);
    for i in 0..longest {
        let rows: Vec<_> = logs.iter().filter_map(|l| l.records.get(i)).collect();
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&crate::train::TrainRecord) -> f64| {
            rows.iter().map(|r| f(r)).sum::<f64>() / n
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            rows[0].iteration,
            mean(&|r| r.l_fit),
            mean(&|r| r.l_var),
            mean(&|r| r.alpha),
            mean(&|r| r.gradient_shots as f64)
        );
    }
    out
}

pub fn write_aggregate(path: &Path, logs: &[TrainLog]) -> Result<()> {
    write_text(path, &aggregate_csv(logs))
}

/// One inference point for a scalar-input model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferRow {
    pub x: f64,
    pub f: f64,
    pub sigma2: f64,
    pub std_mean: f64,
}

pub fn write_inference(path: &Path, rows: &[InferRow]) -> Result<()> {
    let mut out = String::from("x,f,sigma2,std_mean\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.x, r.f, r.sigma2, r.std_mean);
    }
    write_text(path, &out)
}

/// One inference point for the PES pipeline, with the prediction mapped
/// back to Hartree and a 95% confidence half-width from repeated sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PesInferRow {
    pub r1: f64,
    pub r2: f64,
    pub angle_rad: f64,
    pub f: f64,
    pub sigma2: f64,
    pub std_mean: f64,
    pub energy_hartree: f64,
    pub ci_half_width: f64,
}

pub fn write_pes_inference(path: &Path, rows: &[PesInferRow]) -> Result<()> {
    let mut out =
        String::from("r1,r2,angle_rad,f,sigma2,std_mean,energy_hartree,ci_half_width\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.r1, r.r2, r.angle_rad, r.f, r.sigma2, r.std_mean, r.energy_hartree, r.ci_half_width
        );
    }
    write_text(path, &out)
}

/// Stacked curve table: one block of rows per φ over the shared grid.
pub fn write_chebyshev(
    path: &Path,
    phis: &[f64],
    grid: &[f64],
    values: &[Vec<f64>],
) -> Result<()> {
    let mut out = String::from("x,phi,value\n");
    for (phi, vals) in phis.iter().zip(values) {
        for (x, v) in grid.iter().zip(vals) {
            let _ = writeln!(out, "{},{},{}", x, phi, v);
        }
    }
    write_text(path, &out)
}

/// A trained model together with the circuit layout it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub layout: CircuitLayout,
    pub beta_encoding: f64,
    pub params: ModelParams,
}

/// Serialize a model as plain text, one labeled value per line, so the
/// file stays portable across languages and diffs cleanly.
pub fn model_text(model: &SavedModel) -> String {
    let mut out = String::new();
    let layout = &model.layout;
    let _ = writeln!(out, "n_qubits {}", layout.n_qubits);
    let _ = writeln!(out, "n_layers {}", layout.n_layers);
    let _ = writeln!(
        out,
        "entangling {}",
        match layout.entangling {
            Entangling::Circular => "circular",
            Entangling::Linear => "linear",
        }
    );
    let _ = writeln!(out, "n_features {}", layout.n_features);
    for q in 0..layout.n_qubits {
        let _ = writeln!(out, "feature_map[{q}] {}", layout.feature_of_qubit(q));
    }
    let _ = writeln!(out, "beta_encoding {}", model.beta_encoding);
    let p = &model.params;
    match &p.cost {
        DiagonalObservable::SumZ { .. } => {
            let _ = writeln!(out, "cost sum-z");
        }
        DiagonalObservable::IsingZZ { .. } => {
            let _ = writeln!(out, "cost ising-zz");
        }
        DiagonalObservable::ProjectorQubit { qubit, outcome } => {
            let _ = writeln!(out, "cost projector");
            let _ = writeln!(out, "cost_qubit {qubit}");
            let _ = writeln!(out, "cost_outcome {outcome}");
        }
    }
    for (i, c) in p.cost.coefficients().iter().enumerate() {
        let _ = writeln!(out, "cost_coeff[{i}] {c}");
    }
    for (q, v) in p.ry_initial.iter().enumerate() {
        let _ = writeln!(out, "ry_initial[{q}] {v}");
    }
    for (l, layer) in p.layers.iter().enumerate() {
        for (q, v) in layer.encode.iter().enumerate() {
            let _ = writeln!(out, "layer[{l}].encode[{q}] {v}");
        }
        for (g, v) in layer.entangle.iter().enumerate() {
            let _ = writeln!(out, "layer[{l}].entangle[{g}] {v}");
        }
    }
    for (q, v) in p.ry_final.iter().enumerate() {
        let _ = writeln!(out, "ry_final[{q}] {v}");
    }
    out
}

pub fn write_model(path: &Path, model: &SavedModel) -> Result<()> {
    write_text(path, &model_text(model))
}

/// Sequential reader over `label value` lines with line-numbered errors.
struct LabeledLines<'a> {
    path: &'a str,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    peeked: Option<(usize, &'a str, &'a str)>,
}

impl<'a> LabeledLines<'a> {
    fn new(path: &'a str, text: &'a str) -> Self {
        Self {
            path,
            lines: text.lines().enumerate(),
            peeked: None,
        }
    }

    fn advance(&mut self) -> Result<Option<(usize, &'a str, &'a str)>> {
        if let Some(entry) = self.peeked.take() {
            return Ok(Some(entry));
        }
        for (idx, line) in self.lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (label, value) = line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::format(self.path, idx + 1, format!("expected 'label value', found '{line}'"))
            })?;
            return Ok(Some((idx + 1, label, value.trim())));
        }
        Ok(None)
    }

    fn peek_label(&mut self) -> Result<Option<&'a str>> {
        if self.peeked.is_none() {
            self.peeked = self.advance()?;
        }
        Ok(self.peeked.map(|(_, label, _)| label))
    }

    fn expect(&mut self, label: &str) -> Result<(usize, &'a str)> {
        match self.advance()? {
            Some((line, found, value)) if found == label => Ok((line, value)),
            Some((line, found, _)) => Err(Error::format(
                self.path,
                line,
                format!("expected '{label}', found '{found}'"),
            )),
            None => Err(Error::format(self.path, 0, format!("missing '{label}'"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, label: &str) -> Result<T> {
        let (line, value) = self.expect(label)?;
        value
            .parse()
            .map_err(|_| Error::format(self.path, line, format!("bad value '{value}' for {label}")))
    }
}

pub fn read_model(path: &Path) -> Result<SavedModel> {
    let display = path.display().to_string();
    let text = read_text(path)?;
    let mut r = LabeledLines::new(&display, &text);

    let n_qubits: usize = r.number("n_qubits")?;
    let n_layers: usize = r.number("n_layers")?;
    let (ent_line, ent) = r.expect("entangling")?;
    let entangling = match ent {
        "circular" => Entangling::Circular,
        "linear" => Entangling::Linear,
        other => {
            return Err(Error::format(
                &display,
                ent_line,
                format!("unknown entangling '{other}'"),
            ))
        }
    };
    let n_features: usize = r.number("n_features")?;
    let feature_map: Vec<usize> = (0..n_qubits)
        .map(|q| r.number(&format!("feature_map[{q}]")))
        .collect::<Result<_>>()?;
    let layout =
        CircuitLayout::with_feature_map(n_qubits, n_layers, entangling, n_features, feature_map)?;
    let beta_encoding: f64 = r.number("beta_encoding")?;

    let (cost_line, kind) = r.expect("cost")?;
    let template = match kind {
        "sum-z" => DiagonalObservable::SumZ {
            offset: 0.0,
            phi: vec![0.0; n_qubits],
        },
        "ising-zz" => DiagonalObservable::IsingZZ {
            n_qubits,
            phi1: 0.0,
            phi2: 0.0,
            phi3: 0.0,
        },
        "projector" => DiagonalObservable::ProjectorQubit {
            qubit: r.number("cost_qubit")?,
            outcome: r.number("cost_outcome")?,
        },
        other => {
            return Err(Error::format(
                &display,
                cost_line,
                format!("unknown cost '{other}'"),
            ))
        }
    };
    let coeffs: Vec<f64> = (0..template.num_coefficients())
        .map(|i| r.number(&format!("cost_coeff[{i}]")))
        .collect::<Result<_>>()?;
    let cost = template.with_coefficients(&coeffs)?;

    let ry_initial: Vec<f64> = (0..n_qubits)
        .map(|q| r.number(&format!("ry_initial[{q}]")))
        .collect::<Result<_>>()?;
    let n_entangle = layout.entangler_pairs().len();
    let layers: Vec<LayerParams> = (0..n_layers)
        .map(|l| {
            Ok(LayerParams {
                encode: (0..n_qubits)
                    .map(|q| r.number(&format!("layer[{l}].encode[{q}]")))
                    .collect::<Result<_>>()?,
                entangle: (0..n_entangle)
                    .map(|g| r.number(&format!("layer[{l}].entangle[{g}]")))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    let ry_final: Vec<f64> = (0..n_qubits)
        .map(|q| r.number(&format!("ry_final[{q}]")))
        .collect::<Result<_>>()?;
    if let Some(label) = r.peek_label()? {
        return Err(Error::format(
            &display,
            0,
            format!("unexpected trailing entry '{label}'"),
        ));
    }

    Ok(SavedModel {
        layout,
        beta_encoding,
        params: ModelParams {
            ry_initial,
            layers,
            ry_final,
            cost,
        },
    })
}

/// Per-seed tail statistics reported in the run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub iterations: u64,
    pub final_l_fit: f64,
    pub final_l_var: f64,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2_train: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2_test: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<AbortInfo>,
}

/// Top-level JSON summary of one `train` invocation: the resolved
/// configuration that was actually used plus per-seed results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: TrainConfig,
    pub learning_rate: f64,
    pub seeds: Vec<SeedSummary>,
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let text =
        serde_json::to_string_pretty(summary).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let display = path.display().to_string();
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(&display, e.line(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnn::{CircuitLayout, CostKind, Entangling, ModelParams};
    use crate::train::TrainRecord;

    fn sample_log() -> TrainLog {
        TrainLog {
            records: vec![
                TrainRecord {
                    iteration: 0,
                    l_fit: 0.523,
                    l_var: 0.119,
                    alpha: 0.9900560308669166,
                    gradient_shots: 5000,
                    wall_time_s: 0.7,
                },
                TrainRecord {
                    iteration: 1,
                    l_fit: 0.41,
                    l_var: 0.1,
                    alpha: 0.989,
                    gradient_shots: 4200,
                    wall_time_s: 0.7,
                },
            ],
        }
    }

    #[test]
    fn train_log_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = sample_log();
        write_train_log(&path, &log).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iter,L_fit,L_var,alpha,shots\n"));
        let back = parse_train_log(&path).unwrap();
        for (a, b) in log.records.iter().zip(&back.records) {
            assert_eq!(a.l_fit, b.l_fit);
            assert_eq!(a.alpha, b.alpha);
            assert_eq!(a.gradient_shots, b.gradient_shots);
        }
    }

    #[test]
    fn aggregate_means_two_logs() {
        let mut a = sample_log();
        let b = sample_log();
        a.records[0].l_fit = 0.6;
        let csv = aggregate_csv(&[a, b]);
        let row = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        let mean: f64 = fields[1].parse().unwrap();
        assert!((mean - (0.6 + 0.523) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn model_round_trips_to_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let layout = CircuitLayout::new(3, 2, Entangling::Circular, 1).unwrap();
        let model = SavedModel {
            beta_encoding: 2.0,
            params: ModelParams::init(&layout, CostKind::SumZ, 2.0, 7),
            layout,
        };
        write_model(&path, &model).unwrap();
        assert_eq!(read_model(&path).unwrap(), model);
    }

    #[test]
    fn missing_model_file_is_io_error() {
        let err = read_model(Path::new("/nonexistent/model.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
