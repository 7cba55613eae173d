//! Repeated plaintext training runs comparing the SLE variants.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Preprocessor, Scheme};
use crate::error::{Error, Result};
use crate::loss::{LossKind, LossSpec};
use crate::nn::{train, GradScale, TrainBackend, TrainConfig, TrainData, TrainingReport};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SleExperimentConfig {
    /// Leading training rows used.
    pub subset: usize,
    pub hidden: usize,
    pub lrs: Vec<f64>,
    pub repeats: usize,
    pub losses: Vec<LossKind>,
    pub epochs: usize,
    pub batch_size: Option<usize>,
    pub grad_scale: GradScale,
    pub scheme: Scheme,
    pub init_std: f64,
    /// Repeat `r` uses seed `seed + r`.
    pub seed: u64,
}

impl Default for SleExperimentConfig {
    fn default() -> Self {
        SleExperimentConfig {
            subset: 5000,
            hidden: 120,
            lrs: vec![0.12, 0.01],
            repeats: 12,
            losses: vec![LossKind::Sle1Simplified, LossKind::Sle2],
            epochs: 30,
            batch_size: Some(32),
            grad_scale: GradScale::Mean,
            scheme: Scheme::None,
            init_std: 0.05,
            seed: 0,
        }
    }
}

/// Mean curves over repeats for one `(loss, lr)` cell; index 0 is before training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub loss: LossKind,
    pub lr: f64,
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    /// Final test accuracy of each repeat.
    pub final_test_accuracy: Vec<f64>,
    /// Repeats whose training loss never rose from one epoch to the next.
    pub monotone_repeats: usize,
}

impl Curve {
    pub fn mean_final_test_accuracy(&self) -> f64 {
        self.final_test_accuracy.iter().sum::<f64>() / self.final_test_accuracy.len().max(1) as f64
    }

    /// Series as CSV: `epoch,train_loss,test_loss,train_acc,test_acc`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,test_loss,train_acc,test_acc\n");
        for e in 0..self.train_loss.len() {
            out.push_str(&format!(
                "{e},{},{},{},{}\n",
                self.train_loss[e], self.test_loss[e], self.train_accuracy[e], self.test_accuracy[e]
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SleExperimentReport {
    pub config: SleExperimentConfig,
    pub curves: Vec<Curve>,
}

impl SleExperimentReport {
    pub fn curve(&self, loss: LossKind, lr: f64) -> Option<&Curve> {
        self.curves.iter().find(|c| c.loss == loss && c.lr == lr)
    }
}

fn non_increasing(series: &[f64]) -> bool {
    series.windows(2).all(|w| w[1] <= w[0])
}

fn mean_series(runs: &[&TrainingReport], f: impl Fn(&crate::nn::IterationRecord) -> Option<f64>) -> Vec<f64> {
    let len = runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
    (0..len)
        .map(|e| {
            runs.iter()
                .map(|r| f(&r.records[e]).unwrap_or(f64::NAN))
                .sum::<f64>()
                / runs.len() as f64
        })
        .collect()
}

/// Runs every `(loss, lr, repeat)` combination on the plaintext trainer.
///
/// Features are scaled with a preprocessor fitted on the training subset.
pub fn run_sle_experiment(
    cfg: &SleExperimentConfig,
    train_ds: &Dataset,
    test_ds: &Dataset,
) -> Result<SleExperimentReport> {
    if cfg.repeats == 0 || cfg.lrs.is_empty() || cfg.losses.is_empty() {
        return Err(Error::InvalidTraining("experiment grid is empty".into()));
    }
    if !train_ds.is_classification() {
        return Err(Error::InvalidTraining("the experiment needs class labels".into()));
    }
    let train_ds = train_ds.subset(cfg.subset);
    let pre = Preprocessor::fit(&train_ds, cfg.scheme);
    let train_batch = pre.apply(&train_ds)?;
    let test_batch = pre.apply(test_ds)?;
    let data = TrainData {
        train: &train_batch,
        test: Some(&test_batch),
        target: None,
    };

    let cells: Vec<(LossKind, f64)> = cfg
        .losses
        .iter()
        .flat_map(|&l| cfg.lrs.iter().map(move |&lr| (l, lr)))
        .collect();
    let jobs = cells.len() * cfg.repeats;
    let runs = par::try_map_range(jobs, |idx| {
        let (loss, lr) = cells[idx / cfg.repeats];
        let repeat = (idx % cfg.repeats) as u64;
        let mut tc = TrainConfig::new(TrainBackend::Plain, loss);
        tc.loss = LossSpec::new(loss);
        tc.hidden = cfg.hidden;
        tc.eta = lr;
        tc.iters = cfg.epochs;
        tc.seed = cfg.seed + repeat;
        tc.init_std = cfg.init_std;
        tc.batch_size = cfg.batch_size;
        tc.grad_scale = cfg.grad_scale;
        let report = train(&tc, &data)?;
        log::info!(
            "{loss} lr={lr} repeat={repeat}: final test accuracy {:.4}",
            report.records.last().and_then(|r| r.test_accuracy).unwrap_or(f64::NAN)
        );
        Ok::<_, Error>(report)
    })?;

    let curves = cells
        .iter()
        .enumerate()
        .map(|(ci, &(loss, lr))| {
            let group: Vec<&TrainingReport> =
                runs[ci * cfg.repeats..(ci + 1) * cfg.repeats].iter().collect();
            let losses: Vec<Vec<f64>> = group
                .iter()
                .map(|r| r.records.iter().map(|x| x.loss).collect())
                .collect();
            Curve {
                loss,
                lr,
                train_loss: mean_series(&group, |r| Some(r.loss)),
                test_loss: mean_series(&group, |r| r.test_loss),
                train_accuracy: mean_series(&group, |r| r.train_accuracy),
                test_accuracy: mean_series(&group, |r| r.test_accuracy),
                final_test_accuracy: group
                    .iter()
                    .map(|r| r.records.last().and_then(|x| x.test_accuracy).unwrap_or(0.0))
                    .collect(),
                monotone_repeats: losses.iter().filter(|l| non_increasing(l)).count(),
            }
        })
        .collect();

    Ok(SleExperimentReport {
        config: cfg.clone(),
        curves,
    })
}
