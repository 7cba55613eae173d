use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::encrypted::{encrypt_batch, encrypt_model, encrypted_step, EncryptedModel};
use super::plain::{backward, forward, sgd_step, Batch, ModelParams};
use crate::data::TargetScaling;
use crate::engine::{Backend, Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::loss::{argmax_rows, default_sigmoid_poly, loss_value, LossKind, LossSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainBackend {
    /// The ndarray oracle.
    Plain,
    Exact,
    Leveled,
}

impl std::str::FromStr for TrainBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(TrainBackend::Plain),
            "exact" => Ok(TrainBackend::Exact),
            "leveled" => Ok(TrainBackend::Leveled),
            other => Err(Error::InvalidConfig(format!("unknown backend {other:?}"))),
        }
    }
}

impl TrainBackend {
    pub fn engine_backend(self) -> Option<Backend> {
        match self {
            TrainBackend::Plain => None,
            TrainBackend::Exact => Some(Backend::Exact),
            TrainBackend::Leveled => Some(Backend::Leveled),
        }
    }
}

/// How summed gradients are scaled before the step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradScale {
    /// The plain sum over samples and outputs.
    #[default]
    Sum,
    /// Divided by `batch rows x outputs`.
    Mean,
}

impl std::str::FromStr for GradScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(GradScale::Sum),
            "mean" => Ok(GradScale::Mean),
            other => Err(Error::InvalidConfig(format!("unknown gradient scaling {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub backend: TrainBackend,
    pub engine: EngineConfig,
    pub loss: LossSpec,
    pub hidden: usize,
    pub eta: f64,
    pub lambda: f64,
    pub iters: usize,
    pub seed: u64,
    pub init_std: f64,
    /// Mini-batch rows (plain backend only); `None` is full batch.
    pub batch_size: Option<usize>,
    pub grad_scale: GradScale,
}

impl TrainConfig {
    pub fn new(backend: TrainBackend, kind: LossKind) -> Self {
        TrainConfig {
            backend,
            engine: EngineConfig::default(),
            loss: LossSpec::new(kind),
            hidden: 120,
            eta: 0.01,
            lambda: 0.0,
            iters: 2,
            seed: 0,
            init_std: 0.05,
            batch_size: None,
            grad_scale: GradScale::Sum,
        }
    }

    /// The loss spec with a sigmoid polynomial filled in for encrypted sigmoid losses.
    pub fn effective_loss(&self) -> LossSpec {
        let mut spec = self.loss.clone();
        if self.backend != TrainBackend::Plain && spec.kind.uses_sigmoid() && spec.sigmoid_poly.is_none()
        {
            spec.sigmoid_poly = Some(default_sigmoid_poly());
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidTraining("hidden layer needs at least one node".into()));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) || !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidTraining("learning rate and lambda must be finite and non-negative".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidTraining("batch size must be positive".into()));
        }
        if self.backend != TrainBackend::Plain {
            if self.batch_size.is_some() {
                return Err(Error::InvalidTraining("encrypted training is full batch only".into()));
            }
            self.engine.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub loss: f64,
    /// Classification only.
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_loss: Option<f64>,
    /// Regression only, in target units.
    pub rmse: Option<f64>,
    pub test_rmse: Option<f64>,
    pub min_level: Option<u32>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halt {
    /// The iteration that could not finish.
    pub iteration: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub config: TrainConfig,
    pub records: Vec<IterationRecord>,
    pub iterations_completed: usize,
    pub halt: Option<Halt>,
    /// Levels consumed by each completed iteration (traced encrypted runs).
    pub depth_per_iteration: Vec<u32>,
    /// Sigmoid-polynomial inputs outside the fit interval, summed over evaluations.
    pub domain_violations: usize,
    pub final_params: ModelParams,
}

impl TrainingReport {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    /// Report JSON with every `wall_ms` zeroed.
    pub fn payload_json(&self) -> Result<String> {
        let mut copy = self.clone();
        for r in &mut copy.records {
            r.wall_ms = 0;
        }
        Ok(serde_json::to_string(&copy)?)
    }

    /// SHA-256 of `payload_json`, hex encoded.
    pub fn payload_sha256(&self) -> Result<String> {
        let digest = Sha256::digest(self.payload_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// A training/evaluation split plus the regression target transform, if any.
pub struct TrainData<'a> {
    pub train: &'a Batch,
    pub test: Option<&'a Batch>,
    pub target: Option<&'a TargetScaling>,
}

fn accuracy(yhat: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    let pred = argmax_rows(yhat);
    let truth = argmax_rows(y);
    let hits = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
    hits as f64 / pred.len().max(1) as f64
}

fn rmse(yhat: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, target: Option<&TargetScaling>) -> f64 {
    let scale = target.map_or(1.0, |t| t.scale);
    let mse = yhat
        .iter()
        .zip(y.iter())
        .map(|(a, b)| ((a - b) * scale).powi(2))
        .sum::<f64>()
        / yhat.len().max(1) as f64;
    mse.sqrt()
}

/// Loss and quality of one weight set on one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rows: usize,
    pub loss: f64,
    /// Classification only.
    pub accuracy: Option<f64>,
    /// Regression only, in raw target units when a target scaling is given.
    pub rmse: Option<f64>,
    /// Outputs outside the sigmoid polynomial's domain.
    pub domain_violations: usize,
}

pub fn evaluate(
    params: &ModelParams,
    spec: &LossSpec,
    b: &Batch,
    target: Option<&TargetScaling>,
) -> Result<Evaluation> {
    let t = forward(params, b.x.view())?;
    if t.yhat.dim() != b.y.dim() {
        return Err(Error::DimensionMismatch(format!(
            "outputs {:?} vs targets {:?}",
            t.yhat.dim(),
            b.y.dim()
        )));
    }
    let classification = b.y.ncols() > 1;
    Ok(Evaluation {
        rows: b.len(),
        loss: loss_value(spec, t.yhat.view(), b.y.view()),
        accuracy: classification.then(|| accuracy(t.yhat.view(), b.y.view())),
        rmse: (!classification).then(|| rmse(t.yhat.view(), b.y.view(), target)),
        domain_violations: spec.domain_violations(t.yhat.view()),
    })
}

fn record(
    iter: usize,
    params: &ModelParams,
    spec: &LossSpec,
    data: &TrainData<'_>,
    min_level: Option<u32>,
    wall_ms: u64,
    violations: &mut usize,
) -> Result<IterationRecord> {
    let train = evaluate(params, spec, data.train, data.target)?;
    *violations += train.domain_violations;
    let test = data
        .test
        .map(|b| evaluate(params, spec, b, data.target))
        .transpose()?;
    Ok(IterationRecord {
        iter,
        loss: train.loss,
        train_accuracy: train.accuracy,
        test_accuracy: test.as_ref().and_then(|m| m.accuracy),
        test_loss: test.as_ref().map(|m| m.loss),
        rmse: train.rmse,
        test_rmse: test.as_ref().and_then(|m| m.rmse),
        min_level,
        wall_ms,
    })
}

fn effective_eta(cfg: &TrainConfig, rows: usize, outputs: usize) -> f64 {
    match cfg.grad_scale {
        GradScale::Sum => cfg.eta,
        GradScale::Mean => cfg.eta / (rows * outputs).max(1) as f64,
    }
}

/// Trains from a seeded initialization. Running out of levels is reported as
/// a halt, not an error.
pub fn train(cfg: &TrainConfig, data: &TrainData<'_>) -> Result<TrainingReport> {
    cfg.validate()?;
    let d = data.train.x.ncols() - 1;
    let c = data.train.y.ncols();
    let mut params = ModelParams::init(d, cfg.hidden, c, cfg.init_std, cfg.seed)?;
    params.eta = cfg.eta;
    params.lambda = cfg.lambda;
    train_from(cfg, data, params)
}

/// Trains from given weights; `params.eta` and `params.lambda` are taken from `cfg`.
pub fn train_from(cfg: &TrainConfig, data: &TrainData<'_>, mut params: ModelParams) -> Result<TrainingReport> {
    cfg.validate()?;
    params.eta = cfg.eta;
    params.lambda = cfg.lambda;
    let spec = cfg.effective_loss();
    if data.train.y.ncols() != params.outputs() || data.train.x.ncols() != params.w.ncols() {
        return Err(Error::DimensionMismatch("data does not match model shape".into()));
    }
    let mut violations = 0;
    let mut records = vec![record(0, &params, &spec, data, None, 0, &mut violations)?];
    let mut halt = None;
    let mut depth_per_iteration = Vec::new();

    match cfg.backend.engine_backend() {
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
            let n = data.train.len();
            let mut order: Vec<usize> = (0..n).collect();
            for it in 1..=cfg.iters {
                let start = Instant::now();
                match cfg.batch_size {
                    None => {
                        let mut p = params.clone();
                        p.eta = effective_eta(cfg, n, params.outputs());
                        let t = forward(&p, data.train.x.view())?;
                        let (gw, gv) = backward(&p, data.train, &t, &spec)?;
                        params = ModelParams { eta: cfg.eta, ..sgd_step(&p, &gw, &gv)? };
                    }
                    Some(bs) => {
                        order.shuffle(&mut rng);
                        for chunk in order.chunks(bs) {
                            let b = data.train.select(chunk);
                            let mut p = params.clone();
                            p.eta = effective_eta(cfg, chunk.len(), params.outputs());
                            let t = forward(&p, b.x.view())?;
                            let (gw, gv) = backward(&p, &b, &t, &spec)?;
                            params = ModelParams { eta: cfg.eta, ..sgd_step(&p, &gw, &gv)? };
                        }
                    }
                }
                let ms = start.elapsed().as_millis() as u64;
                records.push(record(it, &params, &spec, data, None, ms, &mut violations)?);
                if !records.last().expect("pushed").loss.is_finite() {
                    log::warn!("loss is no longer finite after iteration {it}");
                }
            }
        }
        Some(backend) => {
            let engine = Engine::traced(cfg.engine.clone().with_backend(backend))?;
            let batch = encrypt_batch(&engine, data.train)?;
            let n = batch.rows();
            let mut model: EncryptedModel = encrypt_model(&engine, &params, n)?;
            let eta = effective_eta(cfg, n, params.outputs());
            let mut last_depth = 0;
            for it in 1..=cfg.iters {
                let start = Instant::now();
                engine.set_phase(format!("iter{it}"));
                match encrypted_step(&engine, &model, &batch, &spec, eta, cfg.lambda) {
                    Ok(next) => model = next,
                    Err(Error::DepthExhausted { op, level }) => {
                        log::warn!("iteration {it} ran out of levels in {op}");
                        halt = Some(Halt {
                            iteration: it,
                            reason: format!("depth exhausted during {op} at level {level}"),
                        });
                        break;
                    }
                    Err(e) => return Err(e),
                }
                let ms = start.elapsed().as_millis() as u64;
                if let Some(report) = engine.depth_report() {
                    depth_per_iteration.push(report.total_depth - last_depth);
                    last_depth = report.total_depth;
                }
                // the trace is only needed for depth; drop records as we go
                engine.take_trace();
                engine.set_phase("carry");
                params = model.decrypt(&engine, &params);
                let level = model.min_level();
                records.push(record(it, &params, &spec, data, level, ms, &mut violations)?);
            }
        }
    }

    Ok(TrainingReport {
        config: cfg.clone(),
        iterations_completed: records.len() - 1,
        records,
        halt,
        depth_per_iteration,
        domain_violations: violations,
        final_params: params,
    })
}

/// Largest absolute difference between two weight sets.
pub fn max_weight_divergence(a: &ModelParams, b: &ModelParams) -> f64 {
    fn max_abs(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        if x.dim() != y.dim() {
            return f64::INFINITY;
        }
        x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }
    max_abs(&a.w, &b.w).max(max_abs(&a.v, &b.v))
}
