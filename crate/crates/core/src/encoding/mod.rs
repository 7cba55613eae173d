//! Matrices packed into slot vectors.

mod ops;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use ops::{
    complete_column_shift, complete_row_shift, extract_row, extract_scalar,
    incomplete_column_shift, keep_only, replicate_row, roll_fill, rotate_sum, sum_col_vec,
    sum_row_vec,
};

use crate::engine::{Engine, SlotVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    /// One vector, the whole matrix row-major.
    FullMatrix,
    /// One vector per row, each zero-padded.
    RowPerCiphertext,
    /// One vector holding a single row repeated `times` times back to back.
    RepeatedRow { times: usize },
}

impl Layout {
    pub fn name(&self) -> &'static str {
        match self {
            Layout::FullMatrix => "full-matrix",
            Layout::RowPerCiphertext => "row-per-ciphertext",
            Layout::RepeatedRow { .. } => "repeated-row",
        }
    }
}

/// A plaintext matrix as seen through one or more slot vectors.
///
/// For `RepeatedRow` the logical matrix is the single repeated row
/// (`rows == 1`); the block it fills is `times x cols`.
#[derive(Clone, Debug)]
pub struct EncodedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub layout: Layout,
    pub parts: Vec<SlotVector>,
    pub team_id: Option<usize>,
}

impl EncodedMatrix {
    /// Rows of the packed block: `rows`, or `times` for a repeated row.
    pub fn block_rows(&self) -> usize {
        match self.layout {
            Layout::RepeatedRow { times } => times,
            _ => self.rows,
        }
    }

    /// Number of occupied slots in a single-part layout.
    pub fn block_len(&self) -> usize {
        self.block_rows() * self.cols
    }

    pub fn with_team(mut self, team_id: usize) -> Self {
        self.team_id = Some(team_id);
        self
    }

    /// The single part of a `FullMatrix` / `RepeatedRow` encoding.
    pub fn vector(&self) -> &SlotVector {
        &self.parts[0]
    }

    /// Lowest level over all parts.
    pub fn level(&self) -> Option<u32> {
        self.parts.iter().filter_map(|p| p.level()).min()
    }

    pub(crate) fn require_packed(&self, op: &'static str) -> Result<()> {
        match self.layout {
            Layout::FullMatrix => Ok(()),
            other => Err(Error::WrongLayout {
                op,
                expected: Layout::FullMatrix.name(),
                found: other.name(),
            }),
        }
    }

    pub(crate) fn with_vector(&self, v: SlotVector) -> EncodedMatrix {
        EncodedMatrix {
            rows: self.rows,
            cols: self.cols,
            layout: self.layout,
            parts: vec![v],
            team_id: self.team_id,
        }
    }
}

/// Flattens `m` into slots according to `layout`.
///
/// `RepeatedRow` expects a one-row matrix. A matrix with no rows encodes to no parts.
pub fn encode_matrix(
    engine: &Engine,
    m: ArrayView2<'_, f64>,
    layout: Layout,
) -> Result<EncodedMatrix> {
    let (rows, cols) = m.dim();
    let s = engine.slots();
    let too_large = || Error::MatrixTooLarge {
        rows,
        cols,
        layout: layout.name(),
        slots: s,
    };
    let parts = if rows == 0 {
        Vec::new()
    } else {
        match layout {
            Layout::FullMatrix => {
                if rows * cols > s {
                    return Err(too_large());
                }
                let flat: Vec<f64> = m.iter().copied().collect();
                vec![engine.encrypt(&flat)?]
            }
            Layout::RowPerCiphertext => {
                if cols > s {
                    return Err(too_large());
                }
                m.rows()
                    .into_iter()
                    .map(|r| engine.encrypt(&r.to_vec()))
                    .collect::<Result<Vec<_>>>()?
            }
            Layout::RepeatedRow { times } => {
                if rows != 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "repeated-row layout encodes one row, got {rows}"
                    )));
                }
                if times * cols > s {
                    return Err(Error::MatrixTooLarge {
                        rows: times,
                        cols,
                        layout: layout.name(),
                        slots: s,
                    });
                }
                let row = m.row(0);
                let flat: Vec<f64> = (0..times).flat_map(|_| row.iter().copied()).collect();
                vec![engine.encrypt(&flat)?]
            }
        }
    };
    Ok(EncodedMatrix {
        rows,
        cols,
        layout,
        parts,
        team_id: None,
    })
}

/// Decrypts back to the logical matrix (`rows x cols`).
pub fn decode(engine: &Engine, a: &EncodedMatrix) -> Array2<f64> {
    let mut out = Array2::zeros((a.rows, a.cols));
    if a.parts.is_empty() {
        return out;
    }
    match a.layout {
        Layout::FullMatrix | Layout::RepeatedRow { .. } => {
            let flat = engine.decrypt(&a.parts[0]);
            for ((i, j), x) in out.indexed_iter_mut() {
                *x = flat[i * a.cols + j];
            }
        }
        Layout::RowPerCiphertext => {
            for (i, part) in a.parts.iter().enumerate() {
                let flat = engine.decrypt(part);
                for j in 0..a.cols {
                    out[(i, j)] = flat[j];
                }
            }
        }
    }
    out
}

/// Decodes a slot vector laid out as a `rows x cols` row-major block.
pub fn decode_block(engine: &Engine, v: &SlotVector, rows: usize, cols: usize) -> Array2<f64> {
    let flat = engine.decrypt(v);
    Array2::from_shape_fn((rows, cols), |(i, j)| flat[i * cols + j])
}
