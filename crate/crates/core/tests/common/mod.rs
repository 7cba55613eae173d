//! Brute-force references and fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod suites;

use std::path::PathBuf;

use henn::engine::{Engine, EngineConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

pub fn exact(slots: usize) -> Engine {
    Engine::new(EngineConfig::exact(slots)).unwrap()
}

pub fn leveled(slots: usize) -> Engine {
    Engine::new(EngineConfig::leveled(slots)).unwrap()
}

/// Row-major flattening, zero-padded to `slots`.
pub fn flat(m: &Array2<f64>, slots: usize) -> Vec<f64> {
    let mut v: Vec<f64> = m.iter().copied().collect();
    v.resize(slots, 0.0);
    v
}

/// Row `i` takes row `i + 1`, last takes first.
pub fn row_shift(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    Array2::from_shape_fn(m.dim(), |(i, j)| m[((i + 1) % n, j)])
}

/// Each entry takes its successor in row-major order; the last takes the first.
pub fn flat_shift(m: &Array2<f64>) -> Array2<f64> {
    let (n, c) = m.dim();
    let len = n * c;
    Array2::from_shape_fn(m.dim(), |(i, j)| {
        let q = (i * c + j + 1) % len;
        m[(q / c, q % c)]
    })
}

/// Left cyclic shift inside each row.
pub fn column_shift(m: &Array2<f64>) -> Array2<f64> {
    let c = m.ncols();
    Array2::from_shape_fn(m.dim(), |(i, j)| m[(i, (j + 1) % c)])
}

pub fn row_sums_replicated(m: &Array2<f64>) -> Array2<f64> {
    let sums: Vec<f64> = m.rows().into_iter().map(|r| r.iter().sum()).collect();
    Array2::from_shape_fn(m.dim(), |(i, _)| sums[i])
}

pub fn col_sums_replicated(m: &Array2<f64>) -> Array2<f64> {
    let (n, c) = m.dim();
    let sums: Vec<f64> = (0..c).map(|j| (0..n).map(|i| m[(i, j)]).sum()).collect();
    Array2::from_shape_fn(m.dim(), |(_, j)| sums[j])
}

/// Triple-loop product.
pub fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, k) = a.dim();
    let p = b.ncols();
    assert_eq!(b.nrows(), k);
    let mut out = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            let mut acc = 0.0;
            for t in 0..k {
                acc += a[(i, t)] * b[(t, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
