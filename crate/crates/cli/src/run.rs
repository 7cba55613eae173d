use std::path::PathBuf;

use anyhow::Context;
use henn::data::{load_boston, load_iris, load_mnist_dir, Dataset, Preprocessor, Scheme};
use henn::engine::{Backend, EngineConfig};
use henn::loss::LossKind;
use henn::nn::{Batch, GradScale, TrainBackend, TrainConfig, TrainData};
use serde::{Deserialize, Serialize};

use crate::args::{config_error, DatasetName, RunArgs};

/// Fully resolved training settings, echoed into reports and checkpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Settings {
    pub dataset: DatasetName,
    pub data_dir: PathBuf,
    pub normalize: Scheme,
    pub subset: Option<usize>,
    pub test_fraction: Option<f64>,
    pub train: TrainConfig,
}

pub fn resolve(args: &RunArgs) -> anyhow::Result<(Settings, PathBuf)> {
    let dataset = args.dataset.unwrap_or(DatasetName::Iris);
    let classification = dataset.is_classification();
    let backend = args.backend.unwrap_or(TrainBackend::Plain);
    let default_loss = if classification { LossKind::Sle2 } else { LossKind::Mse };
    let mut train = TrainConfig::new(backend, args.loss.unwrap_or(default_loss));
    train.hidden = args.hidden.unwrap_or(if classification { 120 } else { 12 });
    train.eta = args.lr.unwrap_or(train.eta);
    train.lambda = args.lambda.unwrap_or(train.lambda);
    train.iters = args.iters.unwrap_or(train.iters);
    train.seed = args.seed.unwrap_or(train.seed);
    train.init_std = args.init_std.unwrap_or(train.init_std);
    train.grad_scale = args.grad_scale.unwrap_or(GradScale::Sum);
    train.batch_size = args.batch_size;

    let mut engine = EngineConfig::default();
    engine.slots = args.slots.unwrap_or(engine.slots);
    engine.logp = args.logp.unwrap_or(engine.logp);
    engine.log_q = args.log_q.unwrap_or(engine.log_q);
    engine.log_n = args.log_n.unwrap_or(engine.log_n);
    train.engine = engine.with_backend(backend.engine_backend().unwrap_or(Backend::Leveled));
    train.validate().map_err(|e| config_error(e.to_string()))?;

    if !train.init_std.is_finite() || train.init_std <= 0.0 {
        return Err(config_error("init_std must be positive"));
    }
    if !classification && train.loss.kind != LossKind::Mse {
        return Err(config_error(format!("{} needs class labels; use mse for boston", train.loss.kind)));
    }
    if backend == TrainBackend::Leveled && dataset == DatasetName::Mnist && args.yes_huge != Some(true) {
        return Err(config_error("leveled MNIST training is very slow; pass --yes-huge to run it anyway"));
    }
    let test_fraction = match (dataset, args.test_fraction) {
        (DatasetName::Mnist, Some(_)) => return Err(config_error("MNIST has a fixed test set; drop --test-fraction")),
        (_, Some(f)) if !(0.0..1.0).contains(&f) => return Err(config_error("test fraction must be in [0, 1)")),
        (_, Some(f)) => Some(f).filter(|&f| f > 0.0),
        (DatasetName::Boston, None) => Some(0.2),
        _ => None,
    };
    let normalize = args.normalize.unwrap_or(match dataset {
        DatasetName::Iris => Scheme::MinMax,
        // pixels are already in [0, 1]
        DatasetName::Mnist => Scheme::None,
        DatasetName::Boston => Scheme::ZScore,
    });
    let settings = Settings {
        dataset,
        data_dir: args.data_dir.clone().unwrap_or_else(|| PathBuf::from("data")),
        normalize,
        subset: args.subset,
        test_fraction,
        train,
    };
    Ok((settings, args.out.clone().unwrap_or_else(|| PathBuf::from("out"))))
}

/// Training and held-out data after scaling.
pub struct Prepared {
    pub train_ds: Dataset,
    pub train: Batch,
    pub test: Option<Batch>,
    pub preprocessor: Preprocessor,
}

impl Prepared {
    pub fn data(&self) -> TrainData<'_> {
        TrainData {
            train: &self.train,
            test: self.test.as_ref(),
            target: self.preprocessor.target.as_ref(),
        }
    }
}

fn load(s: &Settings) -> anyhow::Result<(Dataset, Option<Dataset>)> {
    let dir = &s.data_dir;
    let (train, test) = match s.dataset {
        DatasetName::Iris => (load_iris(&dir.join("iris.csv"))?, None),
        DatasetName::Boston => (load_boston(&dir.join("boston.csv"))?, None),
        DatasetName::Mnist => {
            let (a, b) = load_mnist_dir(&dir.join("mnist"))
                .with_context(|| "MNIST not found; scripts/fetch-mnist.sh downloads it")?;
            (a, Some(b))
        }
    };
    Ok(match s.test_fraction {
        Some(f) => {
            let (a, b) = train.split(f, s.train.seed);
            (a, Some(b))
        }
        None => (train, test),
    })
}

/// Loads the dataset and scales it with a preprocessor fitted on the training rows.
pub fn prepare(s: &Settings, fitted: Option<&Preprocessor>) -> anyhow::Result<Prepared> {
    let (mut train_ds, test_ds) = load(s)?;
    if let Some(n) = s.subset {
        if n == 0 {
            return Err(config_error("subset must be positive"));
        }
        train_ds = train_ds.subset(n);
    }
    let preprocessor = fitted.cloned().unwrap_or_else(|| Preprocessor::fit(&train_ds, s.normalize));
    let train = preprocessor.apply(&train_ds)?;
    let test = test_ds.map(|t| preprocessor.apply(&t)).transpose()?;
    Ok(Prepared {
        train_ds,
        train,
        test,
        preprocessor,
    })
}

/// Rejects encrypted runs whose repeated-row ciphertexts would not fit the slots.
pub fn check_capacity(s: &Settings, p: &Prepared) -> anyhow::Result<()> {
    if s.train.backend == TrainBackend::Plain {
        return Ok(());
    }
    let n = p.train.len();
    let widest = p.train.x.ncols().max(s.train.hidden + 1);
    let slots = s.train.engine.slots;
    if n * widest > slots {
        return Err(config_error(format!(
            "{n} rows x {widest} columns do not fit {slots} slots; lower --subset to at most {}",
            slots / widest
        )));
    }
    Ok(())
}
