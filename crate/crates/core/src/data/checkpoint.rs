use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{LossKind, PolyApprox};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Row-major matrix with explicit dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Array2<f64>> for MatrixData {
    fn from(m: &Array2<f64>) -> Self {
        MatrixData {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
    }
}

impl MatrixData {
    pub fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|e| Error::Shape(format!("checkpoint matrix: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// The run configuration, as given.
    pub config: serde_json::Value,
    pub w: MatrixData,
    pub v: MatrixData,
    pub loss: LossKind,
    pub sigmoid_poly: Option<PolyApprox>,
    pub seed: u64,
    pub iterations_completed: usize,
}

/// Writes JSON; `f64` values are printed in shortest round-trip form.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(ckpt)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "missing format_version".into(),
        })?;
    if found != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::VersionMismatch {
            found: found.min(u64::from(u32::MAX)) as u32,
            expected: CHECKPOINT_VERSION,
        });
    }
    serde_json::from_str(&text).map_err(parse_err)
}
