//! Matrix products over packed matrices with one operand stored transposed.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::encoding::{
    decode, encode_matrix, extract_row, replicate_row, rotate_sum, sum_row_vec, EncodedMatrix,
    Layout,
};
use crate::engine::{Engine, PlainMask, SlotVector};
use crate::error::{Error, Result};
use crate::par;

fn require_full(a: &EncodedMatrix, op: &'static str) -> Result<()> {
    a.require_packed(op)?;
    if a.parts.is_empty() {
        return Err(Error::DimensionMismatch(format!("{op}: empty operand")));
    }
    Ok(())
}

/// Moves the value at slot `from` of `v` to slot `to` and zeroes the rest.
fn place(engine: &Engine, v: &SlotVector, from: usize, to: usize) -> Result<SlotVector> {
    let picked = engine.cmult(v, &PlainMask::one_hot(from, engine.slots()))?;
    if from == to {
        Ok(picked)
    } else {
        engine.rotate(&picked, from as i64 - to as i64)
    }
}

/// Column `j` of `A x B`, laid out at slots `i * p + j`.
fn product_column(
    engine: &Engine,
    a: &EncodedMatrix,
    rep: &SlotVector,
    j: usize,
    p: usize,
) -> Result<SlotVector> {
    let (n, k) = (a.rows, a.cols);
    let prod = engine.mult(a.vector(), rep)?;
    let packed = a.with_vector(prod);
    let sums = sum_row_vec(engine, &packed)?;
    let mut acc: Option<SlotVector> = None;
    for i in 0..n {
        let placed = place(engine, &sums, i * k, i * p + j)?;
        match acc.as_mut() {
            None => acc = Some(placed),
            Some(acc) => engine.add_assign(acc, &placed)?,
        }
    }
    Ok(acc.expect("n >= 1"))
}

fn sum_ordered(engine: &Engine, parts: Vec<SlotVector>) -> Result<SlotVector> {
    let mut iter = parts.into_iter();
    let mut acc = iter.next().unwrap_or_else(|| engine.zeros());
    for v in iter {
        engine.add_assign(&mut acc, &v)?;
    }
    Ok(acc)
}

fn full(rows: usize, cols: usize, v: SlotVector) -> EncodedMatrix {
    EncodedMatrix {
        rows,
        cols,
        layout: Layout::FullMatrix,
        parts: vec![v],
        team_id: None,
    }
}

/// `A x B` from `A` (n x k) and `B_T` (p x k), both full-matrix encoded.
///
/// Each row of `B_T` is cut out, replicated down `n` row blocks, multiplied
/// into `A`, row-summed, and each resulting entry placed at `(i, j)`.
pub fn vr_matmul(engine: &Engine, a: &EncodedMatrix, b_t: &EncodedMatrix) -> Result<EncodedMatrix> {
    require_full(a, "vr_matmul")?;
    require_full(b_t, "vr_matmul")?;
    let (n, k, p) = (a.rows, a.cols, b_t.rows);
    if b_t.cols != k {
        return Err(Error::DimensionMismatch(format!(
            "inner dimensions differ: {n}x{k} times ({p}x{})^T",
            b_t.cols
        )));
    }
    check_product_fits(engine, n, k, p)?;
    let columns = par::try_map_range(p, |j| {
        let row = extract_row(engine, b_t, j)?;
        let rep = replicate_row(engine, &row, k, n)?;
        product_column(engine, a, rep.vector(), j, p)
    })?;
    Ok(full(n, p, sum_ordered(engine, columns)?))
}

/// `A x B` where the rows of `B_T` are already replicated (`RepeatedRow`
/// with at least `n` repetitions), one encoded matrix per row.
pub fn vr_matmul_rows(
    engine: &Engine,
    a: &EncodedMatrix,
    b_rows: &[EncodedMatrix],
) -> Result<EncodedMatrix> {
    require_full(a, "vr_matmul_rows")?;
    let (n, k, p) = (a.rows, a.cols, b_rows.len());
    for (j, r) in b_rows.iter().enumerate() {
        let ok = matches!(r.layout, Layout::RepeatedRow { times } if times >= n);
        if !ok || r.cols != k {
            return Err(Error::DimensionMismatch(format!(
                "row {j} of the transposed operand is not a {k}-wide row repeated {n} times"
            )));
        }
    }
    if p == 0 {
        return Err(Error::DimensionMismatch("no rows in transposed operand".into()));
    }
    check_product_fits(engine, n, k, p)?;
    let columns = par::try_map_range(p, |j| product_column(engine, a, b_rows[j].vector(), j, p))?;
    Ok(full(n, p, sum_ordered(engine, columns)?))
}

fn check_product_fits(engine: &Engine, n: usize, k: usize, p: usize) -> Result<()> {
    if n * p > engine.slots() || n * k > engine.slots() {
        return Err(Error::MatrixTooLarge {
            rows: n,
            cols: p.max(k),
            layout: Layout::FullMatrix.name(),
            slots: engine.slots(),
        });
    }
    Ok(())
}

/// `A x B` from `A_T` (k x n) and `B` (k x p): a sum of `k` outer products.
pub fn vr_matmul_first_transposed(
    engine: &Engine,
    a_t: &EncodedMatrix,
    b: &EncodedMatrix,
) -> Result<EncodedMatrix> {
    require_full(a_t, "vr_matmul_first_transposed")?;
    require_full(b, "vr_matmul_first_transposed")?;
    let (k, n, p) = (a_t.rows, a_t.cols, b.cols);
    if b.rows != k {
        return Err(Error::DimensionMismatch(format!(
            "inner dimensions differ: ({k}x{n})^T times {}x{p}",
            b.rows
        )));
    }
    check_product_fits(engine, n, k, p)?;
    let terms = par::try_map_range(k, |t| {
        let b_row = extract_row(engine, b, t)?;
        let b_rep = replicate_row(engine, &b_row, p, n)?;
        let mut spread: Option<SlotVector> = None;
        for i in 0..n {
            let placed = place(engine, a_t.vector(), t * n + i, i * p)?;
            match spread.as_mut() {
                None => spread = Some(placed),
                Some(acc) => engine.add_assign(acc, &placed)?,
            }
        }
        let spread = rotate_sum(engine, &spread.expect("n >= 1"), p, -1)?;
        engine.mult(&spread, b_rep.vector())
    })?;
    Ok(full(n, p, sum_ordered(engine, terms)?))
}

/// Tiled product: `team_a` holds row tiles of `A`, `team_b` row tiles of `B_T`.
///
/// Returns one tile per pair in row-major pair order (`a` outer, `b` inner);
/// tile `(i, j)` carries `team_id = i * team_b.len() + j`.
pub fn dvr_matmul(
    engine: &Engine,
    team_a: &[EncodedMatrix],
    team_b: &[EncodedMatrix],
) -> Result<Vec<EncodedMatrix>> {
    if team_a.is_empty() || team_b.is_empty() {
        return Err(Error::TileShapeMismatch("empty team".into()));
    }
    let k = team_a[0].cols;
    if let Some(t) = team_a.iter().chain(team_b).find(|t| t.cols != k) {
        return Err(Error::TileShapeMismatch(format!(
            "tile has {} columns, expected inner dimension {k}",
            t.cols
        )));
    }
    let pairs = team_a.len() * team_b.len();
    par::try_map_range(pairs, |idx| {
        let (i, j) = (idx / team_b.len(), idx % team_b.len());
        Ok(vr_matmul(engine, &team_a[i], &team_b[j])?.with_team(idx))
    })
}

/// Splits `m` into full-matrix row tiles of at most `tile_rows` rows
/// (default: as many rows as fit in the slot count).
pub fn split_rows(
    engine: &Engine,
    m: ArrayView2<'_, f64>,
    tile_rows: Option<usize>,
) -> Result<Vec<EncodedMatrix>> {
    let (rows, cols) = m.dim();
    let per = tile_rows.unwrap_or_else(|| (engine.slots() / cols.max(1)).max(1));
    if per == 0 {
        return Err(Error::TileShapeMismatch("tile height must be positive".into()));
    }
    (0..rows.div_ceil(per))
        .map(|t| {
            let end = ((t + 1) * per).min(rows);
            Ok(encode_matrix(engine, m.slice(s![t * per..end, ..]), Layout::FullMatrix)?
                .with_team(t))
        })
        .collect()
}

/// Reassembles `dvr_matmul` output into the full product.
pub fn assemble_tiles(
    engine: &Engine,
    tiles: &[EncodedMatrix],
    team_b_len: usize,
) -> Result<Array2<f64>> {
    if team_b_len == 0 || !tiles.len().is_multiple_of(team_b_len) {
        return Err(Error::TileShapeMismatch(format!(
            "{} tiles do not form a grid with {team_b_len} columns",
            tiles.len()
        )));
    }
    let grid: Vec<&[EncodedMatrix]> = tiles.chunks(team_b_len).collect();
    let rows: usize = grid.iter().map(|r| r[0].rows).sum();
    let cols: usize = grid[0].iter().map(|t| t.cols).sum();
    let mut out = Array2::zeros((rows, cols));
    let mut r0 = 0;
    for row in grid {
        let mut c0 = 0;
        for t in row {
            let block = decode(engine, t);
            out.slice_mut(s![r0..r0 + t.rows, c0..c0 + t.cols]).assign(&block);
            c0 += t.cols;
        }
        r0 += row[0].rows;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransposedOperand {
    First,
    Second,
}

/// Operation counts for one tile-pair product.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub rotations: u64,
    pub masks: u64,
    pub mults: u64,
    /// Levels consumed on fresh inputs.
    pub depth: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatmulPlan {
    pub transposed_operand: TransposedOperand,
    pub tiles_a: usize,
    pub tiles_b: usize,
    /// One step per tile pair, `a` outer.
    pub rotation_schedule: Vec<PlanStep>,
}

impl MatmulPlan {
    pub fn total(&self) -> PlanStep {
        self.rotation_schedule
            .iter()
            .fold(PlanStep::default(), |acc, s| PlanStep {
                rotations: acc.rotations + s.rotations,
                masks: acc.masks + s.masks,
                mults: acc.mults + s.mults,
                depth: acc.depth.max(s.depth),
            })
    }
}

fn rotate_sum_cost(count: usize) -> u64 {
    if count <= 1 {
        0
    } else {
        let bitlen = usize::BITS - count.leading_zeros();
        ((bitlen - 1) + (count.count_ones() - 1)) as u64
    }
}

/// Counts for `vr_matmul` of an `n x k` by `k x p` product.
pub fn vr_step(n: usize, k: usize, p: usize) -> PlanStep {
    let mut step = PlanStep::default();
    for j in 0..p {
        step.masks += 1;
        step.rotations += u64::from(j > 0) + rotate_sum_cost(n);
        step.mults += 1;
        if k > 1 {
            step.rotations += 2 * rotate_sum_cost(k);
            step.masks += 1;
        }
        for i in 0..n {
            step.masks += 1;
            step.rotations += u64::from(i * k != i * p + j);
        }
    }
    step.depth = if k > 1 { 4 } else { 3 };
    step
}

/// Counts for `vr_matmul_first_transposed` with `A_T` k x n and `B` k x p.
pub fn first_transposed_step(k: usize, n: usize, p: usize) -> PlanStep {
    let mut step = PlanStep::default();
    for t in 0..k {
        step.masks += 1;
        step.rotations += u64::from(t > 0) + rotate_sum_cost(n);
        for i in 0..n {
            step.masks += 1;
            step.rotations += u64::from(t * n + i != i * p);
        }
        step.rotations += rotate_sum_cost(p);
        step.mults += 1;
    }
    step.depth = 2;
    step
}

/// Plan for a tiled product; tile shapes given as `(rows, cols)`.
pub fn plan_dvr(a_tiles: &[(usize, usize)], b_tiles: &[(usize, usize)]) -> MatmulPlan {
    let rotation_schedule = a_tiles
        .iter()
        .flat_map(|&(n, k)| b_tiles.iter().map(move |&(p, _)| vr_step(n, k, p)))
        .collect();
    MatmulPlan {
        transposed_operand: TransposedOperand::Second,
        tiles_a: a_tiles.len(),
        tiles_b: b_tiles.len(),
        rotation_schedule,
    }
}
