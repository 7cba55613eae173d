//! Whole-suite checks, each returning a summary line or the first failure.

use henn::encoding::{
    complete_column_shift, complete_row_shift, decode_block, encode_matrix, incomplete_column_shift,
    keep_only, roll_fill, sum_col_vec, sum_row_vec, EncodedMatrix, Layout,
};
use henn::engine::Engine;
use henn::linalg::{assemble_tiles, dvr_matmul, split_rows, vr_matmul, vr_matmul_first_transposed};
use henn::loss::{
    default_sigmoid_poly, loss_value, s_matrix_sle1, LossKind, LossSpec,
};
use henn::nn::{
    backward, forward, max_weight_divergence, train_from, Batch, ModelParams, TrainBackend,
    TrainConfig, TrainData,
};
use ndarray::Array2;
use rand::Rng;

use super::*;

fn check_block(
    what: &str,
    e: &Engine,
    v: &henn::engine::SlotVector,
    want: &Array2<f64>,
    tol: f64,
) -> Result<(), String> {
    let (n, c) = want.dim();
    let got = decode_block(e, v, n, c);
    let scale = want.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let err = max_abs_diff2(&got, want);
    if err > tol * scale {
        return Err(format!("{what} {n}x{c}: error {err:e}"));
    }
    let tail = &e.decrypt(v)[n * c..];
    if tail.iter().any(|x| x.abs() > tol) {
        return Err(format!("{what} {n}x{c}: padding slots disturbed"));
    }
    Ok(())
}

fn check_all_ops(e: &Engine, m: &Array2<f64>, tol: f64) -> Result<usize, String> {
    let a: EncodedMatrix = encode_matrix(e, m.view(), Layout::FullMatrix).map_err(|x| x.to_string())?;
    let (n, c) = m.dim();
    let run = |r: henn::Result<EncodedMatrix>| r.map_err(|x| x.to_string());
    check_block("complete_row_shift", e, run(complete_row_shift(e, &a))?.vector(), &row_shift(m), tol)?;
    check_block("incomplete_column_shift", e, run(incomplete_column_shift(e, &a))?.vector(), &flat_shift(m), tol)?;
    check_block("complete_column_shift", e, run(complete_column_shift(e, &a))?.vector(), &column_shift(m), tol)?;
    let rs = sum_row_vec(e, &a).map_err(|x| x.to_string())?;
    check_block("sum_row_vec", e, &rs, &row_sums_replicated(m), tol)?;
    let cs = sum_col_vec(e, &a).map_err(|x| x.to_string())?;
    check_block("sum_col_vec", e, &cs, &col_sums_replicated(m), tol)?;
    let mut cases = 5;
    for i in 0..n {
        for j in 0..c {
            let kept = run(keep_only(e, &a, i, j))?;
            let mut want = Array2::zeros((n, c));
            want[(i, j)] = m[(i, j)];
            check_block("keep_only", e, kept.vector(), &want, tol)?;
            let filled = e.decrypt(&roll_fill(e, kept.vector()).map_err(|x| x.to_string())?);
            if filled.iter().any(|x| (x - m[(i, j)]).abs() > tol) {
                return Err(format!("roll_fill {n}x{c} at ({i},{j}) not constant"));
            }
            cases += 2;
        }
    }
    Ok(cases)
}

/// Every shape with `n * cols <= 64`, filling and padding the slots, on both backends.
pub fn encoding_suite(seed: u64) -> Result<String, String> {
    let mut r = rng(seed);
    let mut shapes = 0;
    let mut cases = 0;
    for slots in [64, 128] {
        let ex = exact(slots);
        let lv = leveled(slots);
        for n in 1..=64usize {
            for cols in 1..=64 / n {
                let m = uniform(&mut r, n, cols);
                cases += check_all_ops(&ex, &m, 1e-12)?;
                cases += check_all_ops(&lv, &m, 1e-6)?;
                shapes += 1;
            }
        }
    }
    Ok(format!("{shapes} shape/slot combinations, {cases} checks"))
}

/// Random products up to 8x8 with all three multiplication routines.
pub fn matmul_suite(instances: usize, seed: u64) -> Result<String, String> {
    let mut r = rng(seed);
    let (ex, lv) = (exact(64), leveled(64));
    let mut worst = [0.0f64; 2];
    for case in 0..instances {
        let (n, k, p) = (r.random_range(1..=8), r.random_range(1..=8), r.random_range(1..=8));
        let a = uniform(&mut r, n, k);
        let b = uniform(&mut r, k, p);
        let want = matmul(&a, &b);
        let split_a = r.random_range(1..=n);
        let split_b = r.random_range(1..=p);
        for (slot, e, tol) in [(0, &ex, 1e-10), (1, &lv, 1e-5)] {
            let err = |x: henn::Error| format!("case {case} ({n}x{k}x{p}): {x}");
            let ea = encode_matrix(e, a.view(), Layout::FullMatrix).map_err(err)?;
            let ebt = encode_matrix(e, b.t(), Layout::FullMatrix).map_err(err)?;
            let eat = encode_matrix(e, a.t(), Layout::FullMatrix).map_err(err)?;
            let eb = encode_matrix(e, b.view(), Layout::FullMatrix).map_err(err)?;
            let second = henn::encoding::decode(e, &vr_matmul(e, &ea, &ebt).map_err(err)?);
            let first = henn::encoding::decode(e, &vr_matmul_first_transposed(e, &eat, &eb).map_err(err)?);
            let team_a = split_rows(e, a.view(), Some(split_a)).map_err(err)?;
            let team_b = split_rows(e, b.t(), Some(split_b)).map_err(err)?;
            let tiles = dvr_matmul(e, &team_a, &team_b).map_err(err)?;
            let tiled = assemble_tiles(e, &tiles, team_b.len()).map_err(err)?;
            for (name, got) in [("vr", &second), ("first-transposed", &first), ("dvr", &tiled)] {
                let d = max_abs_diff2(got, &want);
                worst[slot] = worst[slot].max(d);
                if d > tol {
                    return Err(format!("case {case} {name} {n}x{k}x{p}: error {d:e} > {tol:e}"));
                }
            }
            if max_abs_diff2(&second, &first) > tol {
                return Err(format!("case {case}: transposition variants disagree"));
            }
        }
    }
    Ok(format!(
        "{instances} instances, max error exact {:.2e}, leveled {:.2e}",
        worst[0], worst[1]
    ))
}

/// Central differences of `loss_value` against `backward` for one configuration.
pub fn finite_difference_check(
    params: &ModelParams,
    batch: &Batch,
    spec: &LossSpec,
) -> Result<f64, String> {
    let t = forward(params, batch.x.view()).unwrap();
    let (gw, gv) = backward(params, batch, &t, spec).unwrap();
    let loss = |p: &ModelParams| {
        let t = forward(p, batch.x.view()).unwrap();
        loss_value(spec, t.yhat.view(), batch.y.view())
    };
    let h = 1e-5;
    let mut worst = 0.0f64;
    for which in 0..2 {
        let (rows, cols) = if which == 0 { params.w.dim() } else { params.v.dim() };
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = params.clone();
                let mut minus = params.clone();
                let (mp, mm) = if which == 0 { (&mut plus.w, &mut minus.w) } else { (&mut plus.v, &mut minus.v) };
                mp[(i, j)] += h;
                mm[(i, j)] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let an = if which == 0 { gw[(i, j)] } else { gv[(i, j)] };
                let denom = an.abs().max(fd.abs()).max(1e-6);
                let rel = (an - fd).abs() / denom;
                worst = worst.max(rel);
                if rel > 1e-4 {
                    return Err(format!(
                        "{} {} ({i},{j}): analytic {an:e} vs fd {fd:e}",
                        spec.kind,
                        if which == 0 { "W" } else { "V" }
                    ));
                }
            }
        }
    }
    Ok(worst)
}

pub fn random_problem(r: &mut rand_chacha::ChaCha8Rng, n: usize, d: usize, m: usize, c: usize, one_hot: bool) -> (ModelParams, Batch) {
    let mut x = uniform(r, n, d + 1);
    x.column_mut(0).fill(1.0);
    let y = if one_hot {
        let mut y = Array2::zeros((n, c));
        for i in 0..n {
            y[(i, r.random_range(0..c))] = 1.0;
        }
        y
    } else {
        uniform(r, n, c)
    };
    let mut params = ModelParams::init(d, m, c, 0.5, r.random()).unwrap();
    params.lambda = 0.0;
    (params, Batch::new(x, y).unwrap())
}

/// FD checks for SLE, SLE1 exact, SLE2 and MSE, plus simplified-SLE1 sign agreement.
pub fn gradient_suite(seed: u64) -> Result<String, String> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut checks = 0;
    for kind in [LossKind::Sle, LossKind::Sle1Exact, LossKind::Sle2, LossKind::Mse] {
        for _ in 0..10 {
            let (n, d, m) = (r.random_range(1..=6), r.random_range(1..=4), r.random_range(1..=5));
            let c = if kind == LossKind::Mse { r.random_range(1..=2) } else { r.random_range(1..=3) };
            let (params, batch) = random_problem(&mut r, n, d, m, c, kind != LossKind::Mse);
            worst = worst.max(finite_difference_check(&params, &batch, &LossSpec::new(kind))?);
            checks += 1;
        }
    }
    let total = 100_000;
    let ybar = Array2::from_shape_simple_fn((total, 1), || r.random_range(-4.0..4.0));
    let y = Array2::from_shape_simple_fn((total, 1), || f64::from(r.random_bool(0.5)));
    let exact = s_matrix_sle1(ybar.view(), y.view(), false);
    let simple = s_matrix_sle1(ybar.view(), y.view(), true);
    let agree = exact
        .iter()
        .zip(simple.iter())
        .filter(|(a, b)| a.signum() == b.signum())
        .count();
    let rate = agree as f64 / total as f64;
    if rate < 0.99 {
        return Err(format!("simplified SLE1 sign agreement {rate:.4}"));
    }
    Ok(format!(
        "{checks} configurations, worst relative error {worst:.2e}; simplified SLE1 sign agreement {:.2}%",
        rate * 100.0
    ))
}

/// Random small problems trained 3 iterations on the exact backend and the oracle.
pub fn oracle_equivalence(configs: usize, iters: usize, seed: u64) -> Result<String, String> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for case in 0..configs {
        let kind = LossKind::ALL[case % LossKind::ALL.len()];
        let (n, d, m, c) = (
            r.random_range(1..=16),
            r.random_range(1..=8),
            r.random_range(1..=8),
            r.random_range(1..=4),
        );
        let (mut params, batch) = random_problem(&mut r, n, d, m, c, kind != LossKind::Mse);
        params.w.mapv_inplace(|x| x * 0.1);
        params.v.mapv_inplace(|x| x * 0.1);
        let mut cfg = TrainConfig::new(TrainBackend::Plain, kind);
        if kind.uses_sigmoid() {
            cfg.loss = LossSpec::with_poly(kind, default_sigmoid_poly());
        }
        cfg.hidden = m;
        cfg.iters = iters;
        cfg.eta = 0.01;
        cfg.lambda = if case % 2 == 0 { 0.0 } else { 0.1 };
        cfg.engine.slots = 256;
        let data = TrainData { train: &batch, test: None, target: None };
        let plain = train_from(&cfg, &data, params.clone()).map_err(|e| e.to_string())?;
        cfg.backend = TrainBackend::Exact;
        let enc = train_from(&cfg, &data, params.clone()).map_err(|e| e.to_string())?;
        if enc.iterations_completed != iters {
            return Err(format!("case {case}: only {} iterations", enc.iterations_completed));
        }
        let div = max_weight_divergence(&plain.final_params, &enc.final_params);
        worst = worst.max(div);
        if div > 1e-9 || div.is_nan() {
            return Err(format!("case {case} ({kind}, n={n} d={d} m={m} c={c}): divergence {div:e}"));
        }
    }
    Ok(format!("{configs} configurations x {iters} iterations, max weight divergence {worst:.2e}"))
}
