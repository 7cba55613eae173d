//! The network evaluated and trained on packed vectors.
//!
//! Layout: `X` and `Y` as full matrices (plus one vector per row of `X`);
//! every row of `W` and `V` as a row repeated `n` times.

use ndarray::{Array2, Axis};

use super::plain::{Batch, ModelParams};
use crate::encoding::{
    decode, encode_matrix, extract_row, extract_scalar, keep_only, replicate_row, roll_fill,
    EncodedMatrix, Layout,
};
use crate::engine::{Engine, PlainMask, SlotVector};
use crate::error::{Error, Result};
use crate::linalg::vr_matmul_rows;
use crate::loss::{s_matrix_encrypted, LossSpec};
use crate::par;

pub struct EncryptedBatch {
    pub x: EncodedMatrix,
    pub x_rows: Vec<SlotVector>,
    pub y: EncodedMatrix,
}

impl EncryptedBatch {
    pub fn rows(&self) -> usize {
        self.x.rows
    }
}

pub fn encrypt_batch(engine: &Engine, batch: &Batch) -> Result<EncryptedBatch> {
    let x = encode_matrix(engine, batch.x.view(), Layout::FullMatrix)?;
    let x_rows = encode_matrix(engine, batch.x.view(), Layout::RowPerCiphertext)?.parts;
    let y = encode_matrix(engine, batch.y.view(), Layout::FullMatrix)?;
    if x.parts.is_empty() {
        return Err(Error::InvalidTraining("empty batch".into()));
    }
    Ok(EncryptedBatch { x, x_rows, y })
}

#[derive(Clone)]
pub struct EncryptedModel {
    /// One repeated row per hidden node.
    pub w_rows: Vec<EncodedMatrix>,
    /// One repeated row per output.
    pub v_rows: Vec<EncodedMatrix>,
    /// Repetitions of each row.
    pub times: usize,
}

fn repeated_rows(engine: &Engine, m: &Array2<f64>, times: usize) -> Result<Vec<EncodedMatrix>> {
    m.axis_iter(Axis(0))
        .map(|r| {
            let row = r.insert_axis(Axis(0));
            encode_matrix(engine, row, Layout::RepeatedRow { times })
        })
        .collect()
}

pub fn encrypt_model(engine: &Engine, params: &ModelParams, times: usize) -> Result<EncryptedModel> {
    let needed = times * (1 + params.hidden).max(params.w.ncols());
    if needed > engine.slots() || times * params.hidden > engine.slots() {
        return Err(Error::MatrixTooLarge {
            rows: times,
            cols: (1 + params.hidden).max(params.w.ncols()),
            layout: Layout::FullMatrix.name(),
            slots: engine.slots(),
        });
    }
    Ok(EncryptedModel {
        w_rows: repeated_rows(engine, &params.w, times)?,
        v_rows: repeated_rows(engine, &params.v, times)?,
        times,
    })
}

impl EncryptedModel {
    /// Decrypts into `params` shape, keeping its hyperparameters.
    pub fn decrypt(&self, engine: &Engine, like: &ModelParams) -> ModelParams {
        let gather = |rows: &[EncodedMatrix], cols: usize| {
            let mut out = Array2::zeros((rows.len(), cols));
            for (i, r) in rows.iter().enumerate() {
                out.row_mut(i).assign(&decode(engine, r).row(0));
            }
            out
        };
        ModelParams {
            w: gather(&self.w_rows, like.w.ncols()),
            v: gather(&self.v_rows, like.v.ncols()),
            ..like.clone()
        }
    }

    pub fn min_level(&self) -> Option<u32> {
        self.w_rows
            .iter()
            .chain(&self.v_rows)
            .filter_map(|r| r.level())
            .min()
    }
}

pub struct EncryptedForward {
    pub z0: EncodedMatrix,
    /// `2 z0`
    pub zprime: EncodedMatrix,
    /// `[1 | z0^2]`
    pub z: EncodedMatrix,
    pub yhat: EncodedMatrix,
}

/// Moves each row of the `n x m` block right by its index plus one and sets
/// the freed slot to 1, giving the `n x (1 + m)` block `[1 | a]`.
fn prepend_bias(engine: &Engine, a: &EncodedMatrix) -> Result<EncodedMatrix> {
    let (n, m) = (a.rows, a.cols);
    let s = engine.slots();
    let rows = par::try_map_range(n, |i| {
        let masked = engine.cmult(a.vector(), &PlainMask::range(i * m..(i + 1) * m, 1.0, s))?;
        engine.rotate(&masked, -(i as i64 + 1))
    })?;
    let moved = engine.add_many(&rows)?;
    let ones = PlainMask::from_fn(s, |p| {
        if p % (m + 1) == 0 && p / (m + 1) < n {
            1.0
        } else {
            0.0
        }
    });
    Ok(EncodedMatrix {
        rows: n,
        cols: m + 1,
        layout: Layout::FullMatrix,
        parts: vec![engine.add_plain(&moved, &ones)?],
        team_id: None,
    })
}

pub fn encrypted_forward(
    engine: &Engine,
    model: &EncryptedModel,
    batch: &EncryptedBatch,
) -> Result<EncryptedForward> {
    let z0 = vr_matmul_rows(engine, &batch.x, &model.w_rows)?;
    let zprime = z0.with_vector(engine.add(z0.vector(), z0.vector())?);
    let z1 = z0.with_vector(engine.square(z0.vector())?);
    let z = prepend_bias(engine, &z1)?;
    let yhat = vr_matmul_rows(engine, &z, &model.v_rows)?;
    Ok(EncryptedForward {
        z0,
        zprime,
        z,
        yhat,
    })
}

/// Per-sample factors shared by all gradient rows.
pub struct GradientInputs {
    /// `s_ij` in every slot, index `i * c + j`.
    pub s_hat: Vec<SlotVector>,
    /// Row `i` of `Z` in slots `0..1 + m`.
    pub z_rows: Vec<SlotVector>,
    pub n: usize,
    pub c: usize,
}

pub fn prepare_gradients(
    engine: &Engine,
    spec: &LossSpec,
    fwd: &EncryptedForward,
    batch: &EncryptedBatch,
) -> Result<GradientInputs> {
    let (n, c) = (fwd.yhat.rows, fwd.yhat.cols);
    let s = s_matrix_encrypted(engine, spec, fwd.yhat.vector(), batch.y.vector(), n * c)?;
    let s = fwd.yhat.with_vector(s);
    let s_hat = par::try_map_range(n * c, |idx| extract_scalar(engine, &s, idx / c, idx % c))?;
    let z_rows = par::try_map_range(n, |i| extract_row(engine, &fwd.z, i))?;
    Ok(GradientInputs { s_hat, z_rows, n, c })
}

fn accumulate(engine: &Engine, acc: &mut Option<SlotVector>, v: SlotVector) -> Result<()> {
    match acc.as_mut() {
        None => *acc = Some(v),
        Some(a) => engine.add_assign(a, &v)?,
    }
    Ok(())
}

/// `lambda` times the first block of a repeated row, if `lambda > 0`.
fn l2_seed(engine: &Engine, row: &EncodedMatrix, lambda: f64) -> Result<Option<SlotVector>> {
    if lambda > 0.0 {
        let mask = PlainMask::range(0..row.cols, lambda, engine.slots());
        Ok(Some(engine.cmult(row.vector(), &mask)?))
    } else {
        Ok(None)
    }
}

/// Gradient row `k` of `W`:
/// `lambda w_k + sum_i (sum_j s_ij v_(j, 1+k)) phi'(z_ik) x_i`, in slots `0..1 + d`.
pub fn encrypted_grad_w_row(
    engine: &Engine,
    k: usize,
    model: &EncryptedModel,
    fwd: &EncryptedForward,
    inputs: &GradientInputs,
    batch: &EncryptedBatch,
    lambda: f64,
) -> Result<SlotVector> {
    let m = model.w_rows.len();
    if k >= m {
        return Err(Error::IndexOutOfRange {
            row: k,
            col: 0,
            rows: m,
            cols: 1,
        });
    }
    let v_hat = model
        .v_rows
        .iter()
        .map(|vj| extract_scalar(engine, vj, 0, 1 + k))
        .collect::<Result<Vec<_>>>()?;
    let mut acc = l2_seed(engine, &model.w_rows[k], lambda)?;
    for i in 0..inputs.n {
        let mut weighted: Option<SlotVector> = None;
        for (j, vj) in v_hat.iter().enumerate() {
            let t = engine.mult(&inputs.s_hat[i * inputs.c + j], vj)?;
            accumulate(engine, &mut weighted, t)?;
        }
        let phi = roll_fill(engine, keep_only(engine, &fwd.zprime, i, k)?.vector())?;
        let scaled = engine.mult(&weighted.expect("c >= 1"), &phi)?;
        accumulate(engine, &mut acc, engine.mult(&scaled, &batch.x_rows[i])?)?;
    }
    Ok(acc.unwrap_or_else(|| engine.zeros()))
}

/// Gradient row `j` of `V`: `lambda v_j + sum_i s_ij z_i`, in slots `0..1 + m`.
pub fn encrypted_grad_v_row(
    engine: &Engine,
    j: usize,
    model: &EncryptedModel,
    inputs: &GradientInputs,
    lambda: f64,
) -> Result<SlotVector> {
    if j >= inputs.c {
        return Err(Error::IndexOutOfRange {
            row: j,
            col: 0,
            rows: inputs.c,
            cols: 1,
        });
    }
    let mut acc = l2_seed(engine, &model.v_rows[j], lambda)?;
    for i in 0..inputs.n {
        let t = engine.mult(&inputs.s_hat[i * inputs.c + j], &inputs.z_rows[i])?;
        accumulate(engine, &mut acc, t)?;
    }
    Ok(acc.unwrap_or_else(|| engine.zeros()))
}

/// `row - replicate(eta g)` for every row.
pub fn encrypted_update(
    engine: &Engine,
    model: &EncryptedModel,
    grad_w: &[SlotVector],
    grad_v: &[SlotVector],
    eta: f64,
) -> Result<EncryptedModel> {
    let step = |rows: &[EncodedMatrix], grads: &[SlotVector]| -> Result<Vec<EncodedMatrix>> {
        par::try_map_range(rows.len(), |r| {
            let row = &rows[r];
            let delta = engine.mult_const(&grads[r], eta)?;
            let rep = replicate_row(engine, &delta, row.cols, model.times)?;
            Ok(row.with_vector(engine.sub(row.vector(), rep.vector())?))
        })
    };
    Ok(EncryptedModel {
        w_rows: step(&model.w_rows, grad_w)?,
        v_rows: step(&model.v_rows, grad_v)?,
        times: model.times,
    })
}

/// One full-batch gradient-descent step under encryption.
pub fn encrypted_step(
    engine: &Engine,
    model: &EncryptedModel,
    batch: &EncryptedBatch,
    spec: &LossSpec,
    eta: f64,
    lambda: f64,
) -> Result<EncryptedModel> {
    let fwd = encrypted_forward(engine, model, batch)?;
    let inputs = prepare_gradients(engine, spec, &fwd, batch)?;
    let grad_w = par::try_map_range(model.w_rows.len(), |k| {
        encrypted_grad_w_row(engine, k, model, &fwd, &inputs, batch, lambda)
    })?;
    let grad_v = par::try_map_range(model.v_rows.len(), |j| {
        encrypted_grad_v_row(engine, j, model, &inputs, lambda)
    })?;
    drop(inputs);
    encrypted_update(engine, model, &grad_w, &grad_v, eta)
}
