//! Datasets, preprocessing and checkpoints.

mod checkpoint;
mod loaders;
mod preprocess;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, MatrixData, CHECKPOINT_VERSION};
pub use loaders::{load_boston, load_csv, load_iris, load_mnist_idx, load_mnist_dir, TargetColumn};
pub use preprocess::{one_hot, preprocess, Preprocessed, Preprocessor, Scheme, TargetScaling};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    /// Class indices `0..c`.
    Labels(Vec<usize>),
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(v) => v.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Labels(v) => Targets::Labels(rows.iter().map(|&i| v[i]).collect()),
            Targets::Values(v) => Targets::Values(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// `n x d`, no bias column.
    pub x_raw: Array2<f64>,
    pub targets: Targets,
    pub feature_names: Vec<String>,
    /// Class names in label order (empty for regression).
    pub class_names: Vec<String>,
    /// `c`: number of classes, or 1 for regression.
    pub class_count: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x_raw.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x_raw.nrows() == 0
    }

    pub fn features(&self) -> usize {
        self.x_raw.ncols()
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.targets, Targets::Labels(_))
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x_raw: self.x_raw.select(Axis(0), rows),
            targets: self.targets.select(rows),
            ..self.clone()
        }
    }

    /// The first `n` rows (all of them if fewer).
    pub fn subset(&self, n: usize) -> Dataset {
        let rows: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&rows)
    }

    /// Seeded shuffle, then the first `1 - test_fraction` for training.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let test = ((self.len() as f64) * test_fraction).round() as usize;
        let cut = self.len() - test.min(self.len());
        (self.select(&order[..cut]), self.select(&order[cut..]))
    }

    /// SHA-256 over the parsed numbers, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for x in self.x_raw.iter() {
            h.update(x.to_le_bytes());
        }
        match &self.targets {
            Targets::Labels(v) => v.iter().for_each(|&l| h.update((l as u64).to_le_bytes())),
            Targets::Values(v) => v.iter().for_each(|y| h.update(y.to_le_bytes())),
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
