use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial stand-in for the sigmoid on a bounded interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyApprox {
    /// Ascending degree.
    pub coefficients: Vec<f64>,
    pub domain: [f64; 2],
    /// Largest deviation from the sigmoid on a grid ten times denser than the fit grid.
    pub max_abs_error: f64,
}

impl PolyApprox {
    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.domain[0] && x <= self.domain[1]
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = if points > 1 {
        (hi - lo) / (points - 1) as f64
    } else {
        0.0
    };
    (0..points).map(move |i| if i + 1 == points { hi } else { lo + step * i as f64 })
}

/// Least-squares fit of the sigmoid on `grid_points` uniform points of `[lo, hi]`.
///
/// The fit runs in the scaled variable `x / max(|lo|, |hi|)` through an SVD
/// solve; coefficients are returned in the original variable.
pub fn fit_sigmoid_poly(degree: usize, lo: f64, hi: f64, grid_points: usize) -> Result<PolyApprox> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidConfig(format!("bad fit interval [{lo}, {hi}]")));
    }
    if grid_points < degree + 1 {
        return Err(Error::InvalidConfig(format!(
            "{grid_points} grid points cannot determine a degree-{degree} polynomial"
        )));
    }
    let h = lo.abs().max(hi.abs());
    let xs: Vec<f64> = grid(lo, hi, grid_points).collect();
    let cols = degree + 1;
    let a = DMatrix::from_fn(xs.len(), cols, |r, c| (xs[r] / h).powi(c as i32));
    let b = DVector::from_iterator(xs.len(), xs.iter().map(|&x| sigmoid(x)));

    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smax.is_nan() || smax <= 0.0 || smin / smax < 1e-12 {
        return Err(Error::IllConditioned(format!(
            "singular value ratio {:e} at degree {degree}",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    let u = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;

    let coefficients: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(k, c)| c / h.powi(k as i32))
        .collect();
    let mut poly = PolyApprox {
        coefficients,
        domain: [lo, hi],
        max_abs_error: 0.0,
    };
    poly.max_abs_error = grid(lo, hi, grid_points * 10)
        .map(|x| (poly.eval(x) - sigmoid(x)).abs())
        .fold(0.0, f64::max);
    Ok(poly)
}

/// Degree 3 on `[-8, 8]`, the default stand-in under encryption.
pub fn default_sigmoid_poly() -> PolyApprox {
    fit_sigmoid_poly(3, -8.0, 8.0, DEFAULT_GRID_POINTS).expect("default fit is well conditioned")
}

pub const DEFAULT_GRID_POINTS: usize = 1001;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_linear_fits_center_at_half() {
        for degree in [0, 1] {
            let p = fit_sigmoid_poly(degree, -4.0, 4.0, 101).unwrap();
            assert!((p.coefficients[0] - 0.5).abs() < 1e-12, "{:?}", p.coefficients);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_sigmoid_poly(3, 1.0, 1.0, 10).is_err());
        assert!(fit_sigmoid_poly(5, -1.0, 1.0, 4).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
