//! Plain-text model serialization.
//!
//! Models are stored as `key=value` lines with flat coefficient arrays under
//! a versioned header line `gazekit-model v1 <type>`. Floats are written in
//! Rust's shortest round-trip form, so a save/load cycle reproduces the model
//! bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{MlpModel, OptimError, OutputActivation, PolynomialModel};

const HEADER: &str = "gazekit-model v1";

/// A model in serializable form.
#[derive(Debug, Clone)]
pub enum SavedModel {
    Poly(PolynomialModel),
    Mlp(MlpModel),
}

/// Serialize a model to its text form.
pub fn model_to_string(model: &SavedModel) -> String {
    let mut s = String::new();
    match model {
        SavedModel::Poly(p) => {
            let _ = writeln!(s, "{HEADER} poly");
            let _ = writeln!(s, "input_dim={}", p.input_dim);
            let _ = writeln!(s, "degree={}", p.degree);
            let _ = writeln!(s, "output_dim={}", p.output_dim);
            let _ = writeln!(s, "coefficients={}", join_floats(&p.coefficients));
        }
        SavedModel::Mlp(m) => {
            let _ = writeln!(s, "{HEADER} mlp");
            let sizes: Vec<String> = m.layer_sizes.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "layer_sizes={}", sizes.join(" "));
            let kind = match m.output {
                OutputActivation::Identity => "identity",
                OutputActivation::Softmax => "softmax",
            };
            let _ = writeln!(s, "output={kind}");
            for (l, (w, b)) in m.weights.iter().zip(&m.biases).enumerate() {
                let _ = writeln!(s, "weights{l}={}", join_floats(w.as_slice().unwrap()));
                let _ = writeln!(s, "biases{l}={}", join_floats(b.as_slice().unwrap()));
            }
        }
    }
    s
}

/// Parse a model from its text form.
pub fn model_from_str(text: &str) -> Result<SavedModel, OptimError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| OptimError::ModelFormat("empty model file".into()))?;
    let kind = header
        .strip_prefix(HEADER)
        .map(str::trim)
        .ok_or_else(|| OptimError::ModelFormat(format!("bad header: {header}")))?;

    let mut fields = std::collections::BTreeMap::new();
    for line in lines {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| OptimError::ModelFormat(format!("bad line: {line}")))?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
    }
    let get = |key: &str| -> Result<&String, OptimError> {
        fields
            .get(key)
            .ok_or_else(|| OptimError::ModelFormat(format!("missing key: {key}")))
    };

    match kind {
        "poly" => {
            let input_dim = parse_usize(get("input_dim")?)?;
            let degree: u32 = get("degree")?
                .parse()
                .map_err(|_| OptimError::ModelFormat("bad degree".into()))?;
            let output_dim = parse_usize(get("output_dim")?)?;
            let coefficients = parse_floats(get("coefficients")?)?;
            let expected = super::monomial_count(input_dim, degree) * output_dim;
            if coefficients.len() != expected {
                return Err(OptimError::ModelFormat(format!(
                    "expected {expected} coefficients, got {}",
                    coefficients.len()
                )));
            }
            Ok(SavedModel::Poly(PolynomialModel {
                input_dim,
                degree,
                output_dim,
                coefficients,
            }))
        }
        "mlp" => {
            let layer_sizes: Vec<usize> = get("layer_sizes")?
                .split_whitespace()
                .map(parse_usize)
                .collect::<Result<_, _>>()?;
            if layer_sizes.len() < 2 {
                return Err(OptimError::ModelFormat("need at least two layers".into()));
            }
            let output = match get("output")?.as_str() {
                "identity" => OutputActivation::Identity,
                "softmax" => OutputActivation::Softmax,
                other => {
                    return Err(OptimError::ModelFormat(format!(
                        "unknown output kind: {other}"
                    )))
                }
            };
            let mut weights = Vec::new();
            let mut biases = Vec::new();
            for (l, pair) in layer_sizes.windows(2).enumerate() {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let w = parse_floats(get(&format!("weights{l}"))?)?;
                if w.len() != fan_in * fan_out {
                    return Err(OptimError::ModelFormat(format!(
                        "weights{l}: expected {} values, got {}",
                        fan_in * fan_out,
                        w.len()
                    )));
                }
                weights.push(Array2::from_shape_vec((fan_out, fan_in), w).unwrap());
                let b = parse_floats(get(&format!("biases{l}"))?)?;
                if b.len() != fan_out {
                    return Err(OptimError::ModelFormat(format!(
                        "biases{l}: expected {fan_out} values, got {}",
                        b.len()
                    )));
                }
                biases.push(Array1::from_vec(b));
            }
            Ok(SavedModel::Mlp(MlpModel {
                layer_sizes,
                output,
                weights,
                biases,
            }))
        }
        other => Err(OptimError::ModelFormat(format!(
            "unknown model type: {other}"
        ))),
    }
}

/// Write a model file.
pub fn save_model(path: &Path, model: &SavedModel) -> Result<(), OptimError> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

/// Read a model file.
pub fn load_model(path: &Path) -> Result<SavedModel, OptimError> {
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text)
}

fn join_floats(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

fn parse_floats(s: &str) -> Result<Vec<f64>, OptimError> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| OptimError::ModelFormat(format!("bad float: {tok}")))
        })
        .collect()
}

fn parse_usize(s: &str) -> Result<usize, OptimError> {
    s.parse::<usize>()
        .map_err(|_| OptimError::ModelFormat(format!("bad integer: {s}")))
}
