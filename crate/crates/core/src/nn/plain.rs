use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{s_matrix, LossSpec};

/// Network weights. Column 0 of both matrices multiplies the bias input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `m x (1 + d)`
    pub w: Array2<f64>,
    /// `c x (1 + m)`
    pub v: Array2<f64>,
    pub hidden: usize,
    pub eta: f64,
    pub lambda: f64,
}

impl ModelParams {
    /// Draws `W` then `V`, row-major, from `N(0, std)`.
    pub fn init(d: usize, m: usize, c: usize, std: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, std)
            .map_err(|e| Error::InvalidTraining(format!("init std {std}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_simple_fn((m, 1 + d), || normal.sample(&mut rng));
        let v = Array2::from_shape_simple_fn((c, 1 + m), || normal.sample(&mut rng));
        Ok(ModelParams {
            w,
            v,
            hidden: m,
            eta: 0.01,
            lambda: 0.0,
        })
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols() - 1
    }

    pub fn outputs(&self) -> usize {
        self.v.nrows()
    }

    /// `V` without its bias column.
    pub fn v_bar(&self) -> ArrayView2<'_, f64> {
        self.v.slice(s![.., 1..])
    }
}

/// Inputs with a leading bias column of ones, and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// `n x (1 + d)`
    pub x: Array2<f64>,
    /// `n x c`: one-hot rows, or a single column of real targets.
    pub y: Array2<f64>,
}

impl Batch {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs but {} targets",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.ncols() == 0 || x.column(0).iter().any(|&b| b != 1.0) {
            return Err(Error::DimensionMismatch("column 0 of X must be ones".into()));
        }
        Ok(Batch { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Batch {
        Batch {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub z0: Array2<f64>,
    pub z1: Array2<f64>,
    /// `[1 | z1]`
    pub z: Array2<f64>,
    pub yhat: Array2<f64>,
    /// `2 z0`
    pub zprime: Array2<f64>,
}

fn check_shapes(params: &ModelParams, x: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != params.w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns, W expects {}",
            x.ncols(),
            params.w.ncols()
        )));
    }
    if params.v.ncols() != params.w.nrows() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "V has {} columns for {} hidden nodes",
            params.v.ncols(),
            params.w.nrows()
        )));
    }
    Ok(())
}

pub fn forward(params: &ModelParams, x: ArrayView2<'_, f64>) -> Result<ForwardTrace> {
    check_shapes(params, x)?;
    let z0 = x.dot(&params.w.t());
    let z1 = z0.mapv(|v| v * v);
    let ones = Array2::ones((x.nrows(), 1));
    let z = concatenate![Axis(1), ones, z1];
    let yhat = z.dot(&params.v.t());
    let zprime = &z0 + &z0;
    Ok(ForwardTrace {
        z0,
        z1,
        z,
        yhat,
        zprime,
    })
}

/// `(grad W, grad V)` with `grad W = ((S V_bar) . Z') ^T X + lambda W`
/// and `grad V = S^T Z + lambda V`.
pub fn backward(
    params: &ModelParams,
    batch: &Batch,
    trace: &ForwardTrace,
    spec: &LossSpec,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if batch.y.dim() != trace.yhat.dim() {
        return Err(Error::DimensionMismatch(format!(
            "targets {:?} vs outputs {:?}",
            batch.y.dim(),
            trace.yhat.dim()
        )));
    }
    let s = s_matrix(spec, trace.yhat.view(), batch.y.view());
    Ok(gradients_from_s(params, batch, trace, &s))
}

pub(crate) fn gradients_from_s(
    params: &ModelParams,
    batch: &Batch,
    trace: &ForwardTrace,
    s: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let delta = s.dot(&params.v_bar()) * &trace.zprime;
    let mut gw = delta.t().dot(&batch.x);
    let mut gv = s.t().dot(&trace.z);
    if params.lambda > 0.0 {
        gw.scaled_add(params.lambda, &params.w);
        gv.scaled_add(params.lambda, &params.v);
    }
    (gw, gv)
}

/// `W - eta grad W`, `V - eta grad V`.
pub fn sgd_step(params: &ModelParams, gw: &Array2<f64>, gv: &Array2<f64>) -> Result<ModelParams> {
    if gw.dim() != params.w.dim() || gv.dim() != params.v.dim() {
        return Err(Error::DimensionMismatch("gradient shape differs from weights".into()));
    }
    let mut next = params.clone();
    next.w.scaled_add(-params.eta, gw);
    next.v.scaled_add(-params.eta, gv);
    Ok(next)
}
