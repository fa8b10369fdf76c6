//! JSON model files.
//!
//! Three document kinds, selected by `"type"`:
//!
//! * `general`: `{"n_levels", "eps", "v1", "v2"}` with row-major matrices
//! * `integrable`: `{"family", "g", "epsilon", "eta"}`
//! * `reduced_bcs`: `{"eps", "G"}`

use super::{build_integrable, build_reduced_bcs, FamilyKind, IntegrableSpec, ModelError, PairingModel};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{Map, Value};

/// A parsed model file. Integrable and reduced BCS documents stay in
/// parametrized form until [`ModelDocument::to_model`] expands them.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelDocument {
    General(PairingModel),
    Integrable(IntegrableSpec),
    ReducedBcs { eps: Vec<f64>, pairing: f64 },
}

impl ModelDocument {
    pub fn to_model(&self) -> Result<PairingModel, ModelError> {
        match self {
            ModelDocument::General(m) => Ok(m.clone()),
            ModelDocument::Integrable(spec) => build_integrable(spec),
            ModelDocument::ReducedBcs { eps, pairing } => build_reduced_bcs(eps.clone(), *pairing),
        }
    }

    pub fn n_levels(&self) -> usize {
        match self {
            ModelDocument::General(m) => m.n_levels(),
            ModelDocument::Integrable(spec) => spec.n_levels(),
            ModelDocument::ReducedBcs { eps, .. } => eps.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelDocument::General(_) => "general",
            ModelDocument::Integrable(_) => "integrable",
            ModelDocument::ReducedBcs { .. } => "reduced_bcs",
        }
    }
}

fn schema(path: &str, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value, ModelError> {
    obj.get(name).ok_or_else(|| schema(name, "missing field"))
}

fn number(v: &Value, path: &str) -> Result<f64, ModelError> {
    v.as_f64().ok_or_else(|| schema(path, format!("expected a number, found {v}")))
}

fn vector(v: &Value, path: &str) -> Result<Vec<f64>, ModelError> {
    let arr = v.as_array().ok_or_else(|| schema(path, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn matrix(v: &Value, path: &str, n: usize) -> Result<DMatrix<f64>, ModelError> {
    let rows = v.as_array().ok_or_else(|| schema(path, "expected an array of rows"))?;
    if rows.len() != n {
        return Err(schema(path, format!("expected {n} rows, found {}", rows.len())));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row = vector(row, &format!("{path}[{i}]"))?;
        if row.len() != n {
            return Err(schema(
                &format!("{path}[{i}]"),
                format!("expected {n} entries, found {}", row.len()),
            ));
        }
        for (j, x) in row.into_iter().enumerate() {
            m[(i, j)] = x;
        }
    }
    Ok(m)
}

/// Parses a model file.
pub fn load_model(document: &str) -> Result<ModelDocument, ModelError> {
    let root: Value =
        serde_json::from_str(document).map_err(|e| schema("$", format!("invalid JSON: {e}")))?;
    let obj = root.as_object().ok_or_else(|| schema("$", "expected a JSON object"))?;
    let kind = field(obj, "type")?
        .as_str()
        .ok_or_else(|| schema("type", "expected a string"))?;
    match kind {
        "general" => {
            let n_value = field(obj, "n_levels")?;
            let n = n_value
                .as_u64()
                .ok_or_else(|| schema("n_levels", "expected a non-negative integer"))?
                as usize;
            let eps = vector(field(obj, "eps")?, "eps")?;
            if eps.len() != n {
                return Err(schema("eps", format!("expected {n} entries, found {}", eps.len())));
            }
            let v1 = matrix(field(obj, "v1")?, "v1", n)?;
            let v2 = matrix(field(obj, "v2")?, "v2", n)?;
            Ok(ModelDocument::General(PairingModel::new(eps, v1, v2)?))
        }
        "integrable" => {
            let family = field(obj, "family")?
                .as_str()
                .ok_or_else(|| schema("family", "expected a string"))?
                .parse::<FamilyKind>()
                .map_err(|e| schema("family", e))?;
            let g = number(field(obj, "g")?, "g")?;
            let epsilon = vector(field(obj, "epsilon")?, "epsilon")?;
            let eta = vector(field(obj, "eta")?, "eta")?;
            match IntegrableSpec::new(family, g, epsilon, eta) {
                Ok(spec) => Ok(ModelDocument::Integrable(spec)),
                Err(ModelError::DegenerateEta { i, j }) => Err(ModelError::InvariantViolation(
                    format!("eta[{i}] and eta[{j}] coincide"),
                )),
                Err(ModelError::SingularKernel { i, j }) => Err(ModelError::InvariantViolation(
                    format!("sin(eta[{i}] - eta[{j}]) vanishes"),
                )),
                Err(e) => Err(e),
            }
        }
        "reduced_bcs" => {
            let eps = vector(field(obj, "eps")?, "eps")?;
            let pairing = number(field(obj, "G")?, "G")?;
            // validate eagerly so bad files fail at load time
            build_reduced_bcs(eps.clone(), pairing)?;
            Ok(ModelDocument::ReducedBcs { eps, pairing })
        }
        other => Err(schema(
            "type",
            format!("unknown model type `{other}` (expected general, integrable or reduced_bcs)"),
        )),
    }
}

#[derive(Serialize)]
struct GeneralOut<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    n_levels: usize,
    eps: &'a [f64],
    v1: Vec<Vec<f64>>,
    v2: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct IntegrableOut<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    family: FamilyKind,
    g: f64,
    epsilon: &'a [f64],
    eta: &'a [f64],
}

#[derive(Serialize)]
struct ReducedBcsOut<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    eps: &'a [f64],
    #[serde(rename = "G")]
    pairing: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serializes a model document as pretty-printed JSON. Floats are written
/// in shortest round-trip form, so [`load_model`] recovers them bit-exactly.
pub fn save_model(document: &ModelDocument) -> String {
    let out = match document {
        ModelDocument::General(m) => serde_json::to_string_pretty(&GeneralOut {
            kind: "general",
            n_levels: m.n_levels(),
            eps: m.eps(),
            v1: rows(m.v1()),
            v2: rows(m.v2()),
        }),
        ModelDocument::Integrable(spec) => serde_json::to_string_pretty(&IntegrableOut {
            kind: "integrable",
            family: spec.family(),
            g: spec.g(),
            epsilon: spec.epsilon(),
            eta: spec.eta(),
        }),
        ModelDocument::ReducedBcs { eps, pairing } => serde_json::to_string_pretty(&ReducedBcsOut {
            kind: "reduced_bcs",
            eps,
            pairing: *pairing,
        }),
    };
    let mut s = out.expect("model documents always serialize");
    s.push('\n');
    s
}
