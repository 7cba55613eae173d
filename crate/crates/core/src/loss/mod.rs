//! SLE loss family, MSE, the softmax reference and the sigmoid approximant.

mod encrypted;
mod poly;

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

pub use encrypted::{eval_poly_encrypted, poly_depth, s_matrix_encrypted};
pub use poly::{default_sigmoid_poly, fit_sigmoid_poly, sigmoid, PolyApprox, DEFAULT_GRID_POINTS};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "sle")]
    Sle,
    #[serde(rename = "sle1")]
    Sle1Exact,
    #[serde(rename = "sle1s")]
    Sle1Simplified,
    #[serde(rename = "sle2")]
    Sle2,
    #[serde(rename = "mse")]
    Mse,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Sle,
        LossKind::Sle1Exact,
        LossKind::Sle1Simplified,
        LossKind::Sle2,
        LossKind::Mse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Sle => "sle",
            LossKind::Sle1Exact => "sle1",
            LossKind::Sle1Simplified => "sle1s",
            LossKind::Sle2 => "sle2",
            LossKind::Mse => "mse",
        }
    }

    /// Whether the loss passes the network output through the sigmoid.
    pub fn uses_sigmoid(self) -> bool {
        matches!(
            self,
            LossKind::Sle | LossKind::Sle1Exact | LossKind::Sle1Simplified
        )
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown loss {s:?}")))
    }
}

/// Loss selection plus the sigmoid to use. Without a polynomial the true
/// sigmoid is used (plaintext only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub sigmoid_poly: Option<PolyApprox>,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        LossSpec {
            kind,
            sigmoid_poly: None,
        }
    }

    pub fn with_poly(kind: LossKind, poly: PolyApprox) -> Self {
        LossSpec {
            kind,
            sigmoid_poly: Some(poly),
        }
    }

    /// The sigmoid in force: the polynomial if set, else the exact function.
    pub fn sigma(&self, x: f64) -> f64 {
        match &self.sigmoid_poly {
            Some(p) => p.eval(x),
            None => sigmoid(x),
        }
    }

    /// Counts outputs that fall outside the polynomial's fit interval.
    pub fn domain_violations(&self, ybar: ArrayView2<'_, f64>) -> usize {
        match (&self.sigmoid_poly, self.kind.uses_sigmoid()) {
            (Some(p), true) => ybar.iter().filter(|&&x| !p.contains(x)).count(),
            _ => 0,
        }
    }
}

fn check_dims(ybar: &ArrayView2<'_, f64>, y: &ArrayView2<'_, f64>) {
    assert_eq!(ybar.dim(), y.dim(), "output and target shapes differ");
}

/// Row-wise softmax and argmax (ties to the lowest index).
pub fn softmax_reference(ybar: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<usize>) {
    let mut probs = ybar.to_owned();
    let mut labels = Vec::with_capacity(ybar.nrows());
    for mut row in probs.rows_mut() {
        let (arg, max) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        labels.push(arg);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    (probs, labels)
}

/// Row-wise argmax, ties to the lowest index.
pub fn argmax_rows(m: ArrayView2<'_, f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}

/// `sum ln |sigmoid(ybar) - y|`.
pub fn sle_log_likelihood(ybar: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    check_dims(&ybar, &y);
    let mut total = 0.0;
    for (&a, &t) in ybar.iter().zip(y.iter()) {
        let gap = (sigmoid(a) - t).abs();
        if gap == 0.0 {
            return Err(Error::NonFinite(format!(
                "ln 0 at output {a} with target {t}"
            )));
        }
        total += gap.ln();
    }
    Ok(total)
}

fn s_with(
    ybar: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    f: impl Fn(f64, f64) -> f64,
) -> Array2<f64> {
    check_dims(&ybar, &y);
    Zip::from(&ybar).and(&y).map_collect(|&a, &t| f(a, t))
}

/// `1 - sigmoid(ybar) - y`.
pub fn s_matrix_sle(ybar: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Array2<f64> {
    s_with(ybar, y, |a, t| 1.0 - sigmoid(a) - t)
}

/// `2 (s - y) s (1 - s)` with `s = sigmoid(ybar)`, or `2 (s - y) 0.25` when simplified.
pub fn s_matrix_sle1(
    ybar: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    simplified: bool,
) -> Array2<f64> {
    if simplified {
        s_with(ybar, y, |a, t| 2.0 * (sigmoid(a) - t) * 0.25)
    } else {
        s_with(ybar, y, |a, t| {
            let s = sigmoid(a);
            2.0 * (s - t) * s * (1.0 - s)
        })
    }
}

/// `2 (ybar - y)`; also the MSE signal.
pub fn s_matrix_sle2(ybar: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Array2<f64> {
    s_with(ybar, y, |a, t| 2.0 * (a - t))
}

/// Output-layer error signal for `spec`, with the spec's sigmoid.
pub fn s_matrix(spec: &LossSpec, ybar: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Array2<f64> {
    match spec.kind {
        LossKind::Sle => s_with(ybar, y, |a, t| 1.0 - spec.sigma(a) - t),
        LossKind::Sle1Exact => s_with(ybar, y, |a, t| {
            let s = spec.sigma(a);
            2.0 * (s - t) * s * (1.0 - s)
        }),
        LossKind::Sle1Simplified => s_with(ybar, y, |a, t| 0.5 * (spec.sigma(a) - t)),
        LossKind::Sle2 | LossKind::Mse => s_matrix_sle2(ybar, y),
    }
}

/// Scalar loss: `sum ln|s - y|` (SLE), `sum (s - y)^2` (SLE1 kinds) or
/// `sum (ybar - y)^2` (SLE2, MSE), with `s` the spec's sigmoid.
pub fn loss_value(spec: &LossSpec, ybar: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    check_dims(&ybar, &y);
    let it = ybar.iter().zip(y.iter());
    match spec.kind {
        LossKind::Sle => it.map(|(&a, &t)| (spec.sigma(a) - t).abs().ln()).sum(),
        LossKind::Sle1Exact | LossKind::Sle1Simplified => {
            it.map(|(&a, &t)| (spec.sigma(a) - t).powi(2)).sum()
        }
        LossKind::Sle2 | LossKind::Mse => it.map(|(&a, &t)| (a - t).powi(2)).sum(),
    }
}

pub fn square_activation(z: f64) -> f64 {
    z * z
}

pub fn square_activation_derivative(z: f64) -> f64 {
    2.0 * z
}
