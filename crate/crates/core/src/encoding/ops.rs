use crate::engine::{Engine, PlainMask, SlotVector};
use crate::error::{Error, Result};

use super::{EncodedMatrix, Layout};

/// `sum_{t < count} rotate(v, t * step)` by doubling.
///
/// Costs `(bitlen(count) - 1) + (popcount(count) - 1)` rotations and no levels.
pub fn rotate_sum(engine: &Engine, v: &SlotVector, count: usize, step: i64) -> Result<SlotVector> {
    if count <= 1 {
        return Ok(if count == 1 { v.clone() } else { engine.zeros() });
    }
    let top = usize::BITS - 1 - count.leading_zeros();
    // powers[b] = sum over t < 2^b
    let mut powers = Vec::with_capacity(top as usize + 1);
    powers.push(v.clone());
    for b in 0..top {
        let p = &powers[b as usize];
        let next = engine.rotate_add(p, p, (1i64 << b) * step)?;
        powers.push(next);
    }
    let mut acc = powers.pop().expect("top power");
    let mut offset = 1usize << top;
    for b in (0..top).rev() {
        if count & (1 << b) != 0 {
            acc = engine.rotate_add(&acc, &powers[b as usize], offset as i64 * step)?;
            offset += 1 << b;
        }
    }
    Ok(acc)
}

/// Two rotations, two masks and an add: `rot(v, k) on keep_a` plus `rot(v, back) on keep_b`.
fn masked_pair(
    engine: &Engine,
    v: &SlotVector,
    k: i64,
    keep_a: impl Fn(usize) -> bool,
    back: i64,
    keep_b: impl Fn(usize) -> bool,
) -> Result<SlotVector> {
    let s = engine.slots();
    let mask = |f: &dyn Fn(usize) -> bool| PlainMask::from_fn(s, |p| if f(p) { 1.0 } else { 0.0 });
    let a = engine.cmult(&engine.rotate(v, k)?, &mask(&keep_a))?;
    let b = engine.cmult(&engine.rotate(v, back)?, &mask(&keep_b))?;
    engine.add(&a, &b)
}

/// Moves row `i + 1` into row `i`; the first row wraps to the last.
///
/// A plain rotation by `cols` when the matrix fills every slot, otherwise the
/// wrapped row is masked back into place (one level).
pub fn complete_row_shift(engine: &Engine, a: &EncodedMatrix) -> Result<EncodedMatrix> {
    a.require_packed("complete_row_shift")?;
    if a.rows <= 1 || a.parts.is_empty() {
        return Ok(a.clone());
    }
    let len = a.block_len();
    let cols = a.cols as i64;
    let v = if len == engine.slots() {
        engine.rotate(a.vector(), cols)?
    } else {
        let tail = len - a.cols;
        masked_pair(
            engine,
            a.vector(),
            cols,
            |p| p < tail,
            -(tail as i64),
            |p| (tail..len).contains(&p),
        )?
    };
    Ok(a.with_vector(v))
}

/// Flat rotation by one over the occupied prefix.
pub fn incomplete_column_shift(engine: &Engine, a: &EncodedMatrix) -> Result<EncodedMatrix> {
    a.require_packed("incomplete_column_shift")?;
    let len = a.block_len();
    if len <= 1 || a.parts.is_empty() {
        return Ok(a.clone());
    }
    let v = if len == engine.slots() {
        engine.rotate(a.vector(), 1)?
    } else {
        masked_pair(
            engine,
            a.vector(),
            1,
            |p| p + 1 < len,
            -(len as i64 - 1),
            |p| p + 1 == len,
        )?
    };
    Ok(a.with_vector(v))
}

/// Left cyclic shift of every row by one column.
pub fn complete_column_shift(engine: &Engine, a: &EncodedMatrix) -> Result<EncodedMatrix> {
    a.require_packed("complete_column_shift")?;
    if a.parts.is_empty() {
        return Ok(a.clone());
    }
    let len = a.block_len();
    let cols = a.cols;
    let v = masked_pair(
        engine,
        a.vector(),
        1,
        |p| p < len && p % cols + 1 < cols,
        -(cols as i64 - 1),
        |p| p < len && p % cols + 1 == cols,
    )?;
    Ok(a.with_vector(v))
}

/// Row sums, each replicated across its row's slots.
pub fn sum_row_vec(engine: &Engine, a: &EncodedMatrix) -> Result<SlotVector> {
    a.require_packed("sum_row_vec")?;
    if a.parts.is_empty() {
        return Ok(engine.zeros());
    }
    if a.cols == 1 {
        return Ok(a.vector().clone());
    }
    let (rows, cols) = (a.rows, a.cols);
    let summed = rotate_sum(engine, a.vector(), cols, 1)?;
    let starts = PlainMask::from_fn(engine.slots(), |p| {
        if p % cols == 0 && p / cols < rows {
            1.0
        } else {
            0.0
        }
    });
    let heads = engine.cmult(&summed, &starts)?;
    rotate_sum(engine, &heads, cols, -1)
}

/// Column sums, replicated into every row block.
pub fn sum_col_vec(engine: &Engine, a: &EncodedMatrix) -> Result<SlotVector> {
    a.require_packed("sum_col_vec")?;
    if a.parts.is_empty() {
        return Ok(engine.zeros());
    }
    if a.rows == 1 {
        return Ok(a.vector().clone());
    }
    let (rows, cols) = (a.rows, a.cols);
    let summed = rotate_sum(engine, a.vector(), rows, cols as i64)?;
    let first = engine.cmult(&summed, &PlainMask::range(0..cols, 1.0, engine.slots()))?;
    rotate_sum(engine, &first, rows, -(cols as i64))
}

fn check_index(a: &EncodedMatrix, i: usize, j: usize) -> Result<()> {
    let rows = a.block_rows();
    if i >= rows || j >= a.cols {
        return Err(Error::IndexOutOfRange {
            row: i,
            col: j,
            rows,
            cols: a.cols,
        });
    }
    Ok(())
}

/// Zeroes every slot except `(i, j)`.
pub fn keep_only(engine: &Engine, a: &EncodedMatrix, i: usize, j: usize) -> Result<EncodedMatrix> {
    match a.layout {
        Layout::FullMatrix | Layout::RepeatedRow { .. } => {}
        other => {
            return Err(Error::WrongLayout {
                op: "keep_only",
                expected: Layout::FullMatrix.name(),
                found: other.name(),
            })
        }
    }
    check_index(a, i, j)?;
    let mask = PlainMask::one_hot(i * a.cols + j, engine.slots());
    Ok(a.with_vector(engine.cmult(a.vector(), &mask)?))
}

/// Replicates the one non-zero slot of `v` into all slots (`log2 S` doublings).
pub fn roll_fill(engine: &Engine, v: &SlotVector) -> Result<SlotVector> {
    rotate_sum(engine, v, engine.slots(), 1)
}

/// `roll_fill(keep_only(a, i, j))`: entry `(i, j)` in every slot.
pub fn extract_scalar(engine: &Engine, a: &EncodedMatrix, i: usize, j: usize) -> Result<SlotVector> {
    let kept = keep_only(engine, a, i, j)?;
    roll_fill(engine, kept.vector())
}

/// Row `i` moved to slots `0..cols`, zeros elsewhere (one level).
pub fn extract_row(engine: &Engine, a: &EncodedMatrix, i: usize) -> Result<SlotVector> {
    a.require_packed("extract_row")?;
    check_index(a, i, 0)?;
    let start = i * a.cols;
    let masked = engine.cmult(
        a.vector(),
        &PlainMask::range(start..start + a.cols, 1.0, engine.slots()),
    )?;
    if start == 0 {
        Ok(masked)
    } else {
        engine.rotate(&masked, start as i64)
    }
}

/// Repeats the row held in slots `0..cols` of `v` `times` times; no level consumed.
///
/// Slots of `v` past `cols` must be zero.
pub fn replicate_row(
    engine: &Engine,
    v: &SlotVector,
    cols: usize,
    times: usize,
) -> Result<EncodedMatrix> {
    if cols * times > engine.slots() {
        return Err(Error::MatrixTooLarge {
            rows: times,
            cols,
            layout: Layout::RepeatedRow { times }.name(),
            slots: engine.slots(),
        });
    }
    let rep = rotate_sum(engine, v, times, -(cols as i64))?;
    Ok(EncodedMatrix {
        rows: 1,
        cols,
        layout: Layout::RepeatedRow { times },
        parts: vec![rep],
        team_id: None,
    })
}
