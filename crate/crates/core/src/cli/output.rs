//! Run manifests and JSON result documents.

use super::{Status, SCHEMA};
use crate::error::Result;
use crate::integrate::Trajectory;
use crate::kernel::Point2;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_file(role: &str, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Everything needed to rerun a command: the parsed arguments, resolved
/// defaults, input digests and the tool version.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub resolved: Map<String, Value>,
    pub inputs: Vec<InputDigest>,
    pub version: String,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Self {
        Self {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("arguments serialize"),
            resolved: Map::new(),
            inputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn resolve(&mut self, key: &str, value: impl Serialize) {
        self.resolved.insert(key.to_string(), serde_json::to_value(value).expect("value serializes"));
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest::of_file(role, path)?);
        Ok(())
    }
}

/// Writes `{"schema", "manifest", "status", ...payload}` to `out` or stdout.
pub fn write_document(out: Option<&Path>, manifest: &RunManifest, status: Status, payload: Map<String, Value>) -> Result<()> {
    let mut doc = Map::new();
    doc.insert("schema".into(), json!(SCHEMA));
    doc.insert("manifest".into(), serde_json::to_value(manifest).expect("manifest serializes"));
    doc.insert(
        "status".into(),
        json!(match status {
            Status::Ok => "ok",
            Status::NoConvergence => "no_convergence",
        }),
    );
    for (k, v) in payload {
        doc.insert(k, v);
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("document serializes");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Per-landmark pairs of a flat coordinate vector.
pub fn points(v: &[f64]) -> Vec<Point2> {
    v.chunks(2).map(|c| [c[0], c[1]]).collect()
}

pub fn points_of(v: &DVector<f64>) -> Vec<Point2> {
    points(v.as_slice())
}

/// Times and landmark positions of the first `d` state components.
pub fn trajectory_json(traj: &Trajectory, d: usize) -> Value {
    json!({
        "times": traj.times,
        "shapes": traj.states.iter().map(|s| points(&s.as_slice()[..d])).collect::<Vec<_>>(),
    })
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
