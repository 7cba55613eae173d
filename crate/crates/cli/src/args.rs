use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use henn::data::Scheme;
use henn::loss::LossKind;
use henn::nn::{GradScale, TrainBackend};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "henn", version, about = "Train small networks on an emulated CKKS slot engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one network; writes report.json, checkpoint.json and series.csv.
    Train(TrainArgs),
    /// Score a checkpoint on its dataset.
    Evaluate(EvaluateArgs),
    /// Train the same configuration on the plain and exact backends and compare weights.
    Compare(CompareArgs),
    /// Repeated plaintext MNIST runs comparing the SLE variants.
    SleExperiment(SleArgs),
    /// Least-squares polynomial fit of the sigmoid.
    FitSigmoid(FitArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Iris,
    Mnist,
    Boston,
}

impl DatasetName {
    pub fn is_classification(self) -> bool {
        self != DatasetName::Boston
    }
}

/// A settings error; the process exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Training settings. Each one can come from a flag, a `HENN_*` variable or
/// the `--config` file, in that order of precedence.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    #[arg(long, env = "HENN_DATASET", value_enum)]
    pub dataset: Option<DatasetName>,
    /// Directory holding iris.csv, boston.csv and mnist/.
    #[arg(long, env = "HENN_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// sle, sle1, sle1s, sle2 or mse.
    #[arg(long, env = "HENN_LOSS")]
    pub loss: Option<LossKind>,
    #[arg(long, env = "HENN_HIDDEN")]
    pub hidden: Option<usize>,
    #[arg(long, env = "HENN_LR")]
    pub lr: Option<f64>,
    /// L2 weight decay.
    #[arg(long, env = "HENN_LAMBDA")]
    pub lambda: Option<f64>,
    #[arg(long, env = "HENN_ITERS")]
    pub iters: Option<usize>,
    /// plain, exact or leveled.
    #[arg(long, env = "HENN_BACKEND")]
    pub backend: Option<TrainBackend>,
    #[arg(long, env = "HENN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "HENN_INIT_STD")]
    pub init_std: Option<f64>,
    /// none, minmax or zscore.
    #[arg(long, env = "HENN_NORMALIZE")]
    pub normalize: Option<Scheme>,
    /// sum or mean.
    #[arg(long, env = "HENN_GRAD_SCALE")]
    pub grad_scale: Option<GradScale>,
    /// Mini-batch rows, plain backend only.
    #[arg(long, env = "HENN_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    /// Keep only the first N training rows.
    #[arg(long, env = "HENN_SUBSET")]
    pub subset: Option<usize>,
    /// Held-out share for CSV datasets (Boston defaults to 0.2).
    #[arg(long, env = "HENN_TEST_FRACTION")]
    pub test_fraction: Option<f64>,
    #[arg(long, env = "HENN_SLOTS")]
    pub slots: Option<usize>,
    #[arg(long, env = "HENN_LOGP")]
    pub logp: Option<u32>,
    #[arg(long = "log-q", env = "HENN_LOGQ")]
    #[serde(rename = "logQ")]
    pub log_q: Option<u32>,
    #[arg(long = "log-n", env = "HENN_LOGN")]
    #[serde(rename = "logN")]
    pub log_n: Option<u32>,
    /// Allow leveled-backend MNIST runs.
    #[arg(long, env = "HENN_YES_HUGE", num_args = 0..=1, default_missing_value = "true")]
    pub yes_huge: Option<bool>,
    /// Output directory.
    #[arg(long, env = "HENN_OUT")]
    pub out: Option<PathBuf>,
    /// JSON file with the same keys as the flags (snake_case).
    #[arg(long, env = "HENN_CONFIG")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Overrides the data directory recorded in the checkpoint.
    #[arg(long, env = "HENN_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// train or test; defaults to test when the run had a held-out set.
    #[arg(long, value_enum)]
    pub split: Option<Split>,
    /// Write the metrics here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Seed for the exact run; defaults to the plain run's seed.
    #[arg(long)]
    pub exact_seed: Option<u64>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SleArgs {
    /// Directory holding mnist/.
    #[arg(long, env = "HENN_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, env = "HENN_OUT")]
    pub out: Option<PathBuf>,
    /// Leading MNIST training rows used.
    #[arg(long, env = "HENN_SUBSET")]
    pub subset: Option<usize>,
    #[arg(long, env = "HENN_HIDDEN")]
    pub hidden: Option<usize>,
    #[arg(long, env = "HENN_LRS", value_delimiter = ',')]
    pub lrs: Option<Vec<f64>>,
    #[arg(long, env = "HENN_REPEATS")]
    pub repeats: Option<usize>,
    #[arg(long, env = "HENN_LOSSES", value_delimiter = ',')]
    pub losses: Option<Vec<LossKind>>,
    #[arg(long, env = "HENN_EPOCHS")]
    pub epochs: Option<usize>,
    /// Mini-batch rows; 0 trains full batch.
    #[arg(long, env = "HENN_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    #[arg(long, env = "HENN_GRAD_SCALE")]
    pub grad_scale: Option<GradScale>,
    #[arg(long, env = "HENN_NORMALIZE")]
    pub normalize: Option<Scheme>,
    #[arg(long, env = "HENN_INIT_STD")]
    pub init_std: Option<f64>,
    /// Repeat r uses seed + r.
    #[arg(long, env = "HENN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "HENN_CONFIG")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(
        long,
        num_args = 2,
        value_names = ["LO", "HI"],
        allow_negative_numbers = true,
        default_values_t = [-8.0, 8.0]
    )]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = henn::loss::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Write the fit here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Overlays the non-null fields of `flags` on the contents of `file`.
pub fn with_config_file<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = file else {
        return serde_json::from_value(serde_json::to_value(flags)?).map_err(Into::into);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut merged: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(base) = &mut merged else {
        return Err(config_error(format!("{}: expected a JSON object", path.display())));
    };
    if let serde_json::Value::Object(over) = serde_json::to_value(flags)? {
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| config_error(format!("{}: {e}", path.display())))
}
