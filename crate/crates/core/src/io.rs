//! Versioned JSON files for matrices, moments and hidden moments.
//!
//! Every document carries `"format_version": 1`. Readers accept a missing
//! version and reject any other value.

use std::path::Path;

use serde_json::{json, Value};

use crate::combin::checked_pow;
use crate::error::{invalid, Result};
use crate::moments::{HiddenMoment, MomentMatrix};
use crate::tensalg::DenseMatrix;

pub const FORMAT_VERSION: u64 = 1;

fn check_version(v: &Value) -> Result<()> {
    match v.get("format_version") {
        None => Ok(()),
        Some(x) if x.as_u64() == Some(FORMAT_VERSION) => Ok(()),
        Some(x) => invalid(format!("unsupported format_version {x}")),
    }
}

fn parse(text: &str) -> Result<Value> {
    let v: Value = serde_json::from_str(text)?;
    if !v.is_object() {
        return invalid("expected a JSON object");
    }
    check_version(&v)?;
    Ok(v)
}

fn field_usize(v: &Value, key: &str) -> Result<usize> {
    match v.get(key).and_then(Value::as_u64) {
        Some(x) => Ok(x as usize),
        None => invalid(format!("missing or non-integer field {key}")),
    }
}

fn sub_matrix(v: &Value) -> Result<DenseMatrix> {
    match v.get("matrix") {
        Some(m) => Ok(serde_json::from_value(m.clone())?),
        None => invalid("missing field matrix"),
    }
}

pub fn matrix_to_json(m: &DenseMatrix) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "rows": m.rows(),
        "cols": m.cols(),
        "data": m.data(),
    })
}

pub fn matrix_from_json(text: &str) -> Result<DenseMatrix> {
    Ok(serde_json::from_value(parse(text)?)?)
}

pub fn moment_to_json(m: &MomentMatrix) -> Value {
    json!({
        "format_version": FORMAT_VERSION,
        "n": m.n,
        "r": m.r,
        "offset": m.offset,
        "p": m.p,
        "matrix": { "rows": m.matrix.rows(), "cols": m.matrix.cols(), "data": m.matrix.data() },
    })
}

pub fn moment_from_json(text: &str) -> Result<MomentMatrix> {
    let v = parse(text)?;
    let n = field_usize(&v, "n")?;
    let r = field_usize(&v, "r")?;
    let offset = v.get("offset").and_then(Value::as_u64).unwrap_or(0) as usize;
    let p = field_usize(&v, "p")?;
    let matrix = sub_matrix(&v)?;
    let dim = checked_pow(p, r * n + offset);
    if dim != Some(matrix.rows()) || matrix.rows() != matrix.cols() {
        return invalid(format!(
            "moment matrix is {}x{}, expected p^(r n + offset) square for p = {p}, n = {n}, r = {r}, offset = {offset}",
            matrix.rows(),
            matrix.cols()
        ));
    }
    Ok(MomentMatrix { n, r, offset, p, matrix })
}

pub fn hidden_moment_to_json(h: &HiddenMoment) -> Value {
    let m = h.matrix();
    json!({
        "format_version": FORMAT_VERSION,
        "q": h.q(),
        "r": h.r(),
        "matrix": { "rows": m.rows(), "cols": m.cols(), "data": m.data() },
    })
}

pub fn hidden_moment_from_json(text: &str) -> Result<HiddenMoment> {
    let v = parse(text)?;
    HiddenMoment::new(field_usize(&v, "q")?, field_usize(&v, "r")?, sub_matrix(&v)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}
