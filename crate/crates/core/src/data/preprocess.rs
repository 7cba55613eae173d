use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{Dataset, Targets};
use crate::error::{Error, Result};
use crate::nn::Batch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    None,
    /// Each feature to `[0, 1]`.
    MinMax,
    /// Each feature to zero mean, unit variance.
    ZScore,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scheme::None),
            "minmax" => Ok(Scheme::MinMax),
            "zscore" => Ok(Scheme::ZScore),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

/// `raw = scaled * scale + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub offset: f64,
    pub scale: f64,
}

impl TargetScaling {
    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.offset) / self.scale
    }

    pub fn invert(&self, scaled: f64) -> f64 {
        scaled * self.scale + self.offset
    }
}

/// Per-feature affine transform fitted on one dataset, reusable on another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub scheme: Scheme,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    /// Features that were constant; they map to 0.
    pub degenerate: Vec<usize>,
    pub target: Option<TargetScaling>,
    pub class_count: usize,
}

fn fit_column(values: impl Iterator<Item = f64> + Clone, scheme: Scheme) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    match scheme {
        Scheme::None => (0.0, 1.0),
        Scheme::MinMax => {
            let lo = values.clone().fold(f64::INFINITY, f64::min);
            let hi = values.fold(f64::NEG_INFINITY, f64::max);
            (lo, hi - lo)
        }
        Scheme::ZScore => {
            let mean = values.clone().sum::<f64>() / n;
            let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        }
    }
}

impl Preprocessor {
    pub fn fit(ds: &Dataset, scheme: Scheme) -> Preprocessor {
        let mut offset = Vec::with_capacity(ds.features());
        let mut scale = Vec::with_capacity(ds.features());
        let mut degenerate = Vec::new();
        for (j, col) in ds.x_raw.axis_iter(Axis(1)).enumerate() {
            let (o, s) = fit_column(col.iter().copied(), scheme);
            if s > 0.0 && s.is_finite() {
                offset.push(o);
                scale.push(s);
            } else {
                degenerate.push(j);
                offset.push(o);
                scale.push(0.0);
            }
        }
        if !degenerate.is_empty() && scheme != Scheme::None {
            log::info!("{} constant feature(s) set to 0", degenerate.len());
        }
        let target = match &ds.targets {
            Targets::Values(v) => {
                let (o, s) = fit_column(v.iter().copied(), scheme);
                Some(TargetScaling {
                    offset: o,
                    scale: if s > 0.0 { s } else { 1.0 },
                })
            }
            Targets::Labels(_) => None,
        };
        Preprocessor {
            scheme,
            offset,
            scale,
            degenerate,
            target,
            class_count: ds.class_count,
        }
    }

    /// Bias column plus scaled features; one-hot or scaled targets.
    pub fn apply(&self, ds: &Dataset) -> Result<Batch> {
        if ds.features() != self.offset.len() {
            return Err(Error::Shape(format!(
                "fitted on {} features, got {}",
                self.offset.len(),
                ds.features()
            )));
        }
        let mut x = ds.x_raw.clone();
        for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
            let (o, s) = (self.offset[j], self.scale[j]);
            if s == 0.0 {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - o) / s);
            }
        }
        let x = concatenate![Axis(1), Array2::ones((ds.len(), 1)), x];
        let y = match &ds.targets {
            Targets::Labels(l) => one_hot(l, self.class_count)?,
            Targets::Values(v) => {
                let t = self.target.expect("regression target scaling");
                Array2::from_shape_fn((v.len(), 1), |(i, _)| t.apply(v[i]))
            }
        };
        Batch::new(x, y)
    }
}

pub struct Preprocessed {
    pub batch: Batch,
    pub preprocessor: Preprocessor,
}

/// Fits a scheme on `ds` and applies it.
pub fn preprocess(ds: &Dataset, scheme: Scheme) -> Result<Preprocessed> {
    let preprocessor = Preprocessor::fit(ds, scheme);
    Ok(Preprocessed {
        batch: preprocessor.apply(ds)?,
        preprocessor,
    })
}

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Array2<f64>> {
    let mut y = Array2::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Shape(format!("label {l} with {classes} classes")));
        }
        y[(i, l)] = 1.0;
    }
    Ok(y)
}
