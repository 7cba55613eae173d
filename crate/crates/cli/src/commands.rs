use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use henn::data::{load_checkpoint, load_mnist_dir, save_checkpoint, Checkpoint, MatrixData, Preprocessor, CHECKPOINT_VERSION};
use henn::experiment::{run_sle_experiment, SleExperimentConfig};
use henn::loss::{fit_sigmoid_poly, LossSpec};
use henn::nn::{evaluate, max_weight_divergence, train, Halt, IterationRecord, ModelParams, TrainBackend, TrainingReport};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use crate::args::{config_error, with_config_file, CompareArgs, EvaluateArgs, FitArgs, SleArgs, Split, TrainArgs};
use crate::run::{check_capacity, prepare, resolve, Prepared, Settings};

pub const EXIT_DEPTH: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn series_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("iter,loss,acc,test_loss,test_acc,rmse,test_rmse,min_level\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iter,
            r.loss,
            opt(r.train_accuracy),
            opt(r.test_loss),
            opt(r.test_accuracy),
            opt(r.rmse),
            opt(r.test_rmse),
            r.min_level.map(|l| l.to_string()).unwrap_or_default()
        );
    }
    out
}

#[derive(Serialize)]
struct DataSummary {
    name: String,
    fingerprint: String,
    train_rows: usize,
    test_rows: Option<usize>,
    features: usize,
    classes: usize,
}

impl DataSummary {
    fn new(p: &Prepared) -> Self {
        DataSummary {
            name: p.train_ds.name.clone(),
            fingerprint: p.train_ds.fingerprint(),
            train_rows: p.train.len(),
            test_rows: p.test.as_ref().map(|t| t.len()),
            features: p.train_ds.features(),
            classes: p.train_ds.class_count,
        }
    }
}

/// Everything in report.json is a function of the flags; wall times go to timing.json.
#[derive(Serialize)]
struct TrainReportFile<'a> {
    command: &'static str,
    settings: &'a Settings,
    data: DataSummary,
    preprocessor: &'a Preprocessor,
    iterations_completed: usize,
    halt: &'a Option<Halt>,
    depth_per_iteration: &'a [u32],
    domain_violations: usize,
    records: Vec<IterationRecord>,
    payload_sha256: String,
}

fn write_training_outputs(out: &Path, s: &Settings, p: &Prepared, report: &TrainingReport) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let records: Vec<IterationRecord> = report
        .records
        .iter()
        .map(|r| IterationRecord { wall_ms: 0, ..r.clone() })
        .collect();
    write_json(
        &out.join("report.json"),
        &TrainReportFile {
            command: "train",
            settings: s,
            data: DataSummary::new(p),
            preprocessor: &p.preprocessor,
            iterations_completed: report.iterations_completed,
            halt: &report.halt,
            depth_per_iteration: &report.depth_per_iteration,
            domain_violations: report.domain_violations,
            records,
            payload_sha256: report.payload_sha256()?,
        },
    )?;
    let wall: Vec<u64> = report.records.iter().map(|r| r.wall_ms).collect();
    write_json(&out.join("timing.json"), &json!({ "wall_ms": wall }))?;
    fs::write(out.join("series.csv"), series_csv(&report.records))?;
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        config: json!({ "settings": s, "preprocessor": p.preprocessor }),
        w: MatrixData::from(&report.final_params.w),
        v: MatrixData::from(&report.final_params.v),
        loss: s.train.loss.kind,
        sigmoid_poly: s.train.effective_loss().sigmoid_poly,
        seed: s.train.seed,
        iterations_completed: report.iterations_completed,
    };
    save_checkpoint(&ckpt, &out.join("checkpoint.json"))?;
    Ok(())
}

fn summary(r: &IterationRecord) -> String {
    let mut s = format!("loss {:.6}", r.loss);
    if let Some(a) = r.train_accuracy {
        let _ = write!(s, ", accuracy {a:.4}");
    }
    if let Some(a) = r.test_accuracy {
        let _ = write!(s, ", test accuracy {a:.4}");
    }
    if let Some(e) = r.rmse {
        let _ = write!(s, ", rmse {e:.4}");
    }
    if let Some(e) = r.test_rmse {
        let _ = write!(s, ", test rmse {e:.4}");
    }
    s
}

pub fn cmd_train(args: &TrainArgs) -> anyhow::Result<u8> {
    let run = with_config_file(&args.run, args.run.config.as_deref())?;
    let (settings, out) = resolve(&run)?;
    let prepared = prepare(&settings, None)?;
    check_capacity(&settings, &prepared)?;
    let t = &settings.train;
    info!(
        "training {:?} rows={} hidden={} loss={} backend={:?} iters={}",
        settings.dataset,
        prepared.train.len(),
        t.hidden,
        t.loss.kind,
        t.backend,
        t.iters
    );
    let started = Instant::now();
    let report = train(t, &prepared.data())?;
    info!("finished in {:.1?}", started.elapsed());
    write_training_outputs(&out, &settings, &prepared, &report)?;

    let first = &report.records[0];
    let last = report.records.last().unwrap_or(first);
    println!("{} iterations completed", report.iterations_completed);
    println!("start: {}", summary(first));
    println!("end:   {}", summary(last));
    println!("wrote {}", out.display());
    if let Some(h) = &report.halt {
        warn!("iteration {} stopped: {}", h.iteration, h.reason);
        return Ok(EXIT_DEPTH);
    }
    Ok(0)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<u8> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let mut settings: Settings = serde_json::from_value(ck.config["settings"].clone())
        .context("checkpoint does not record its run settings")?;
    let pre: Preprocessor = serde_json::from_value(ck.config["preprocessor"].clone())
        .context("checkpoint does not record its preprocessor")?;
    if let Some(d) = &args.data_dir {
        settings.data_dir = d.clone();
    }
    let prepared = prepare(&settings, Some(&pre))?;
    let w = ck.w.to_array()?;
    let params = ModelParams {
        hidden: w.nrows(),
        w,
        v: ck.v.to_array()?,
        eta: settings.train.eta,
        lambda: settings.train.lambda,
    };
    let split = args
        .split
        .unwrap_or(if prepared.test.is_some() { Split::Test } else { Split::Train });
    let batch = match split {
        Split::Train => &prepared.train,
        Split::Test => prepared
            .test
            .as_ref()
            .ok_or_else(|| config_error("this run has no held-out rows; use --split train"))?,
    };
    let spec = LossSpec {
        kind: ck.loss,
        sigmoid_poly: ck.sigmoid_poly.clone(),
    };
    let result = evaluate(&params, &spec, batch, pre.target.as_ref())?;
    let doc = json!({
        "dataset": settings.dataset,
        "split": split,
        "loss_kind": ck.loss,
        "iterations_completed": ck.iterations_completed,
        "evaluation": result,
    });
    match &args.out {
        Some(p) => write_json(p, &doc)?,
        None => println!("{}", serde_json::to_string_pretty(&doc)?),
    }
    Ok(0)
}

#[derive(Serialize)]
struct IterationDelta {
    iter: usize,
    plain_loss: f64,
    exact_loss: f64,
    loss_delta: f64,
    accuracy_delta: Option<f64>,
    rmse_delta: Option<f64>,
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? - b?).abs())
}

pub fn cmd_compare(args: &CompareArgs) -> anyhow::Result<u8> {
    let run = with_config_file(&args.run, args.run.config.as_deref())?;
    if run.backend.is_some_and(|b| b == TrainBackend::Leveled) {
        warn!("compare always runs the plain and exact backends; ignoring --backend");
    }
    let (mut settings, out) = resolve(&run)?;
    let mut exact = settings.train.clone();
    exact.backend = TrainBackend::Exact;
    exact.engine = exact.engine.with_backend(henn::engine::Backend::Exact);
    // both sides use the polynomial sigmoid the encrypted path needs
    exact.loss = exact.effective_loss();
    exact.validate().map_err(|e| config_error(e.to_string()))?;
    let mut plain = exact.clone();
    plain.backend = TrainBackend::Plain;
    exact.seed = args.exact_seed.unwrap_or(plain.seed);
    settings.train = exact.clone();
    let prepared = prepare(&settings, None)?;
    check_capacity(&settings, &prepared)?;

    let data = prepared.data();
    let p = train(&plain, &data)?;
    let e = train(&exact, &data)?;
    let divergence = max_weight_divergence(&p.final_params, &e.final_params);
    let deltas: Vec<IterationDelta> = p
        .records
        .iter()
        .zip(&e.records)
        .map(|(a, b)| IterationDelta {
            iter: a.iter,
            plain_loss: a.loss,
            exact_loss: b.loss,
            loss_delta: (a.loss - b.loss).abs(),
            accuracy_delta: delta(a.train_accuracy, b.train_accuracy),
            rmse_delta: delta(a.rmse, b.rmse),
        })
        .collect();
    let pass = divergence <= args.tolerance && p.iterations_completed == e.iterations_completed;
    let verdict = if pass { "PASS" } else { "FAIL" };
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_json(
        &out.join("compare.json"),
        &json!({
            "command": "compare",
            "settings": settings,
            "plain_seed": plain.seed,
            "exact_seed": exact.seed,
            "tolerance": args.tolerance,
            "max_weight_divergence": divergence,
            "iterations": deltas,
            "verdict": verdict,
        }),
    )?;
    println!("{verdict}: max weight divergence {divergence:.3e} (tolerance {:e})", args.tolerance);
    Ok(if pass { 0 } else { EXIT_DIVERGED })
}

pub fn cmd_sle_experiment(args: &SleArgs) -> anyhow::Result<u8> {
    let a = with_config_file(args, args.config.as_deref())?;
    let d = SleExperimentConfig::default();
    let cfg = SleExperimentConfig {
        subset: a.subset.unwrap_or(d.subset),
        hidden: a.hidden.unwrap_or(d.hidden),
        lrs: a.lrs.unwrap_or(d.lrs),
        repeats: a.repeats.unwrap_or(d.repeats),
        losses: a.losses.unwrap_or(d.losses),
        epochs: a.epochs.unwrap_or(d.epochs),
        batch_size: a.batch_size.map_or(d.batch_size, |b| Some(b).filter(|&b| b > 0)),
        grad_scale: a.grad_scale.unwrap_or(d.grad_scale),
        scheme: a.normalize.unwrap_or(d.scheme),
        init_std: a.init_std.unwrap_or(d.init_std),
        seed: a.seed.unwrap_or(d.seed),
    };
    let data_dir = a.data_dir.unwrap_or_else(|| "data".into());
    let out = a.out.unwrap_or_else(|| "out".into());
    let (train_ds, test_ds) = load_mnist_dir(&data_dir.join("mnist"))
        .with_context(|| "MNIST not found; scripts/fetch-mnist.sh downloads it")?;
    info!(
        "{} losses x {} rates x {} repeats, {} epochs on {} rows",
        cfg.losses.len(),
        cfg.lrs.len(),
        cfg.repeats,
        cfg.epochs,
        cfg.subset.min(train_ds.len())
    );
    let started = Instant::now();
    let report = run_sle_experiment(&cfg, &train_ds, &test_ds)?;
    let elapsed = started.elapsed();
    info!("finished in {elapsed:.1?}");

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let summary: Vec<_> = report
        .curves
        .iter()
        .map(|c| {
            json!({
                "loss": c.loss,
                "lr": c.lr,
                "mean_final_test_accuracy": c.mean_final_test_accuracy(),
                "monotone_repeats": c.monotone_repeats,
            })
        })
        .collect();
    write_json(
        &out.join("report.json"),
        &json!({ "command": "sle-experiment", "config": report.config, "summary": summary, "curves": report.curves }),
    )?;
    write_json(&out.join("timing.json"), &json!({ "wall_ms": elapsed.as_millis() as u64 }))?;
    for c in &report.curves {
        let dir = out.join(format!("lr_{}", c.lr));
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(format!("{}.csv", c.loss)), c.to_csv())?;
        println!(
            "{} lr {}: mean final test accuracy {:.4}, loss non-increasing in {}/{} repeats",
            c.loss,
            c.lr,
            c.mean_final_test_accuracy(),
            c.monotone_repeats,
            cfg.repeats
        );
    }
    println!("wrote {}", out.display());
    Ok(0)
}

pub fn cmd_fit_sigmoid(args: &FitArgs) -> anyhow::Result<u8> {
    let &[lo, hi] = args.range.as_slice() else {
        return Err(config_error("--range takes LO HI"));
    };
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(config_error(format!("empty range [{lo}, {hi}]")));
    }
    let poly = fit_sigmoid_poly(args.degree, lo, hi, args.grid_points)?;
    match &args.out {
        Some(p) => write_json(p, &poly)?,
        None => println!("{}", serde_json::to_string_pretty(&poly)?),
    }
    Ok(0)
}
