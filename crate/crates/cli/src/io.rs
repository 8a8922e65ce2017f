//! Matrix and vector file handling for the command-line tool.
//!
//! Matrices travel as JSON objects `{"T", "d", "kind", "data"}` with
//! `data` holding the `(dT)^2` entries row-major. The `kind` field names
//! the structural contract of the file and is validated on load:
//! `lower_triangular` and `block_orthogonal` demand exact zeros on the
//! forbidden blocks, `covariance` demands symmetry and positive
//! semi-definiteness (the factor is produced by the semi-definite
//! Cholesky), `general` only requires finite entries. Mean vectors use
//! `{"T", "d", "data"}` with `dT` entries.

use std::fs;
use std::path::Path;

use abw_core::{
    block_cholesky, AbwError, BlockDiagOrthogonal, BlockLowerTriangular, BlockShape,
};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    LowerTriangular,
    BlockOrthogonal,
    General,
    Covariance,
}

impl Kind {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "lower_triangular" => Ok(Kind::LowerTriangular),
            "block_orthogonal" => Ok(Kind::BlockOrthogonal),
            "general" => Ok(Kind::General),
            "covariance" => Ok(Kind::Covariance),
            other => Err(CliError::input(format!(
                "unknown matrix kind {other:?} (expected lower_triangular, \
                 block_orthogonal, general, or covariance)"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::LowerTriangular => "lower_triangular",
            Kind::BlockOrthogonal => "block_orthogonal",
            Kind::General => "general",
            Kind::Covariance => "covariance",
        }
    }
}

/// A parsed and structurally validated matrix file.
pub struct MatrixFile {
    pub shape: BlockShape,
    pub kind: Kind,
    pub matrix: DMatrix<f64>,
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{} is not valid JSON: {e}", path.display())))
}

fn field_usize(obj: &Map<String, Value>, key: &str, path: &Path) -> Result<usize, CliError> {
    obj.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| {
            CliError::input(format!(
                "{}: missing or non-integer field {key:?}",
                path.display()
            ))
        })
}

fn field_data(obj: &Map<String, Value>, path: &Path, expected: usize) -> Result<Vec<f64>, CliError> {
    let arr = obj
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::input(format!("{}: missing array field \"data\"", path.display())))?;
    if arr.len() != expected {
        return Err(CliError::input(format!(
            "{}: data has {} entries, expected {expected}",
            path.display(),
            arr.len()
        )));
    }
    arr.iter()
        .map(|v| {
            v.as_f64().ok_or_else(|| {
                CliError::input(format!("{}: non-numeric entry in data", path.display()))
            })
        })
        .collect()
}

impl MatrixFile {
    pub fn load(path: &Path, tol: f64) -> Result<Self, CliError> {
        let value = read_json(path)?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::input(format!("{}: expected a JSON object", path.display())))?;
        let t_steps = field_usize(obj, "T", path)?;
        let d = field_usize(obj, "d", path)?;
        let shape = BlockShape::new(t_steps, d)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let kind_str = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::input(format!("{}: missing field \"kind\"", path.display())))?;
        let kind = Kind::parse(kind_str)?;
        let n = shape.dim();
        let data = field_data(obj, path, n * n)?;
        let matrix = DMatrix::from_row_slice(n, n, &data);
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(CliError::input(format!(
                "{}: matrix contains non-finite entries",
                path.display()
            )));
        }

        // kind-specific structural validation happens eagerly, before any
        // computation touches the data
        match kind {
            Kind::LowerTriangular => {
                BlockLowerTriangular::new(shape, matrix.clone())
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            }
            Kind::BlockOrthogonal => {
                BlockDiagOrthogonal::from_matrix(shape, &matrix, tol)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            }
            Kind::Covariance => {
                block_cholesky(&matrix, shape, tol)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            }
            Kind::General => {}
        }

        Ok(Self {
            shape,
            kind,
            matrix,
        })
    }

    /// Interprets the file as a factor in `L`: `lower_triangular` files
    /// are taken as-is, `covariance` files go through the semi-definite
    /// Cholesky.
    pub fn as_factor(&self, path: &Path, tol: f64) -> Result<BlockLowerTriangular, CliError> {
        match self.kind {
            Kind::LowerTriangular => BlockLowerTriangular::new(self.shape, self.matrix.clone())
                .map_err(|e| CliError::input(format!("{}: {e}", path.display()))),
            Kind::Covariance => block_cholesky(&self.matrix, self.shape, tol)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display()))),
            other => Err(CliError::input(format!(
                "{}: kind {:?} cannot be used as a factor (need lower_triangular or covariance)",
                path.display(),
                other.name()
            ))),
        }
    }

    /// Interprets the file as a member of the orthogonal group `O`.
    pub fn as_block_orthogonal(
        &self,
        path: &Path,
        tol: f64,
    ) -> Result<BlockDiagOrthogonal, CliError> {
        if self.kind != Kind::BlockOrthogonal {
            return Err(CliError::input(format!(
                "{}: expected kind \"block_orthogonal\", found {:?}",
                path.display(),
                self.kind.name()
            )));
        }
        BlockDiagOrthogonal::from_matrix(self.shape, &self.matrix, tol)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

/// Loads a mean vector `{"T", "d", "data"}` of length `dT`.
pub fn load_mean(path: &Path, expected: BlockShape) -> Result<DVector<f64>, CliError> {
    let value = read_json(path)?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::input(format!("{}: expected a JSON object", path.display())))?;
    let t_steps = field_usize(obj, "T", path)?;
    let d = field_usize(obj, "d", path)?;
    if t_steps != expected.time_steps() || d != expected.block_dim() {
        return Err(CliError::input(format!(
            "{}: mean shape (T={t_steps}, d={d}) does not match factors (T={}, d={})",
            path.display(),
            expected.time_steps(),
            expected.block_dim()
        )));
    }
    let data = field_data(obj, path, expected.dim())?;
    let v = DVector::from_row_slice(&data);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::input(format!(
            "{}: mean contains non-finite entries",
            path.display()
        )));
    }
    Ok(v)
}

/// Serializes a matrix as the JSON interchange object (row-major data,
/// sorted keys courtesy of the map representation).
pub fn matrix_value(shape: BlockShape, kind: Kind, m: &DMatrix<f64>) -> Value {
    let n = shape.dim();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(Value::from(m[(i, j)]));
        }
    }
    json!({
        "T": shape.time_steps(),
        "d": shape.block_dim(),
        "kind": kind.name(),
        "data": data,
    })
}

/// Finite floats serialize as numbers; infinities (a legitimate safe
/// radius) become the string "inf".
pub fn float_value(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from("inf")
    }
}

/// Prints a matrix as CSV rows with shortest-round-trip decimals.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn map_core_error(e: AbwError) -> CliError {
    match e {
        AbwError::NotTangent(msg) => CliError::precondition(format!("not a tangent vector: {msg}")),
        AbwError::NotRegular(msg) => CliError::precondition(format!("not regular: {msg}")),
        AbwError::Shape(msg) => CliError::input(format!("shape mismatch: {msg}")),
        AbwError::InvalidInput(msg) => CliError::input(format!("invalid input: {msg}")),
        AbwError::NotPsd(msg) => CliError::input(format!("not positive semi-definite: {msg}")),
    }
}
