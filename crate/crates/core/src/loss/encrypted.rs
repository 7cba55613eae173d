use crate::engine::{Engine, PlainMask, SlotVector};
use crate::error::Result;

use super::{LossKind, LossSpec, PolyApprox};

/// Levels consumed by `eval_poly_encrypted` for a polynomial of `degree`.
pub fn poly_depth(degree: usize) -> u32 {
    match degree {
        0 | 1 => 1,
        d => {
            let m = d - 1;
            let pow_depth = usize::BITS - (m - 1).leading_zeros();
            pow_depth.max(1) + 1
        }
    }
}

/// `x^m` for `1 <= m`, with depth `ceil(log2 m)`.
fn power(engine: &Engine, cache: &mut Vec<Option<SlotVector>>, m: usize) -> Result<SlotVector> {
    if let Some(Some(v)) = cache.get(m) {
        return Ok(v.clone());
    }
    let (hi, lo) = (m.div_ceil(2), m / 2);
    let a = power(engine, cache, hi)?;
    let out = if hi == lo {
        engine.square(&a)?
    } else {
        let b = power(engine, cache, lo)?;
        engine.mult(&a, &b)?
    };
    if cache.len() <= m {
        cache.resize(m + 1, None);
    }
    cache[m] = Some(out.clone());
    Ok(out)
}

/// Evaluates `poly` slotwise; the constant term is added on slots `0..len` only.
///
/// Term `k >= 2` is formed as `(c_k x) x^(k-1)`.
pub fn eval_poly_encrypted(
    engine: &Engine,
    poly: &PolyApprox,
    x: &SlotVector,
    len: usize,
) -> Result<SlotVector> {
    let coeffs = &poly.coefficients;
    let mut cache = vec![None, Some(x.clone())];
    let mut acc: Option<SlotVector> = None;
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        let scaled = engine.mult_const(x, c)?;
        let term = if k == 1 {
            scaled
        } else {
            let p = power(engine, &mut cache, k - 1)?;
            engine.mult(&scaled, &p)?
        };
        match acc.as_mut() {
            None => acc = Some(term),
            Some(a) => engine.add_assign(a, &term)?,
        }
    }
    let body = match acc {
        Some(a) => a,
        None => engine.mult_const(x, 0.0)?,
    };
    let c0 = coeffs.first().copied().unwrap_or(0.0);
    engine.add_plain(&body, &PlainMask::range(0..len, c0, engine.slots()))
}

/// Error signal `S` from encrypted outputs and targets packed on slots `0..len`.
pub fn s_matrix_encrypted(
    engine: &Engine,
    spec: &LossSpec,
    yhat: &SlotVector,
    y: &SlotVector,
    len: usize,
) -> Result<SlotVector> {
    let ones = || PlainMask::range(0..len, 1.0, engine.slots());
    let sigma = |v: &SlotVector| -> Result<SlotVector> {
        let poly = spec
            .sigmoid_poly
            .as_ref()
            .ok_or_else(|| crate::Error::InvalidConfig(format!(
                "loss {} needs a sigmoid polynomial under encryption",
                spec.kind
            )))?;
        eval_poly_encrypted(engine, poly, v, len)
    };
    match spec.kind {
        LossKind::Sle2 | LossKind::Mse => {
            let d = engine.sub(yhat, y)?;
            engine.add(&d, &d)
        }
        LossKind::Sle1Simplified => {
            let p = sigma(yhat)?;
            engine.mult_const(&engine.sub(&p, y)?, 0.5)
        }
        LossKind::Sle1Exact => {
            let p = sigma(yhat)?;
            let gap = engine.sub(&p, y)?;
            let q = engine.add_plain(&engine.neg(&p)?, &ones())?;
            let w = engine.mult(&gap, &engine.mult(&p, &q)?)?;
            engine.add(&w, &w)
        }
        LossKind::Sle => {
            let p = sigma(yhat)?;
            let q = engine.add_plain(&engine.neg(&p)?, &ones())?;
            engine.sub(&q, y)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::loss::fit_sigmoid_poly;

    #[test]
    fn poly_matches_plain_and_depth() {
        for degree in 0..=7 {
            let e = Engine::traced(EngineConfig::exact(16)).unwrap();
            let poly = fit_sigmoid_poly(degree, -8.0, 8.0, 201).unwrap();
            let xs = [-3.0, -0.5, 0.0, 1.25, 7.0];
            let x = e.encrypt(&xs).unwrap();
            let out = eval_poly_encrypted(&e, &poly, &x, xs.len()).unwrap();
            let got = e.decrypt(&out);
            for (i, &v) in xs.iter().enumerate() {
                assert!((got[i] - poly.eval(v)).abs() < 1e-12, "degree {degree}");
            }
            assert!(got[xs.len()..].iter().all(|&v| v == 0.0));
            assert_eq!(out.depth(), poly_depth(degree), "degree {degree}");
        }
    }
}
