//! Emulated slot-vector arithmetic: exact `f64` slots or fixed-point slots with levels.

mod config;
mod slot;
mod trace;

use std::sync::{Mutex, MutexGuard};

pub use config::{Backend, EngineConfig};
pub use slot::{PlainMask, SlotVector};
pub use trace::{depth_report, DepthReport, OpCounts, OpKind, OpRecord, PhaseDepth, Trace};

use crate::error::{Error, Result};

/// Rounds to the nearest integer, ties to even.
#[inline(always)]
fn round_fast(y: f64) -> f64 {
    // Adding and subtracting 1.5 * 2^52 forces rounding at the units place.
    const MAGIC: f64 = 6_755_399_441_055_744.0;
    if y.abs() < 2_251_799_813_685_248.0 {
        (y + MAGIC) - MAGIC
    } else {
        y.round_ties_even()
    }
}

/// The arithmetic contract. Operations are pure; the only interior state is
/// the optional operation trace.
#[derive(Debug)]
pub struct Engine {
    config: EngineConfig,
    scale: f64,
    inv_scale: f64,
    trace: Option<Mutex<Trace>>,
}

impl Clone for Engine {
    /// Clones the configuration; the clone's trace (if any) starts empty.
    fn clone(&self) -> Self {
        Engine {
            config: self.config.clone(),
            scale: self.scale,
            inv_scale: self.inv_scale,
            trace: self.trace.as_ref().map(|_| Mutex::new(Trace::new())),
        }
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let scale = 2f64.powi(config.logp as i32);
        Ok(Engine {
            config,
            scale,
            inv_scale: 1.0 / scale,
            trace: None,
        })
    }

    /// An engine that records every operation.
    pub fn traced(config: EngineConfig) -> Result<Self> {
        let mut engine = Self::new(config)?;
        engine.trace = Some(Mutex::new(Trace::new()));
        Ok(engine)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn slots(&self) -> usize {
        self.config.slots
    }

    pub fn backend(&self) -> Backend {
        self.config.backend
    }

    pub fn is_leveled(&self) -> bool {
        self.config.backend == Backend::Leveled
    }

    fn lock(&self) -> Option<MutexGuard<'_, Trace>> {
        self.trace
            .as_ref()
            .map(|t| t.lock().unwrap_or_else(|p| p.into_inner()))
    }

    /// Attributes subsequent operations to a new labeled phase.
    pub fn set_phase(&self, label: impl Into<String>) {
        if let Some(mut t) = self.lock() {
            t.begin_phase(label);
        }
    }

    /// Snapshot of the trace, if this engine records one.
    pub fn trace(&self) -> Option<Trace> {
        self.lock().map(|t| t.clone())
    }

    /// Returns the trace and starts a fresh one.
    pub fn take_trace(&self) -> Option<Trace> {
        self.lock().map(|mut t| std::mem::take(&mut *t))
    }

    pub fn depth_report(&self) -> Option<DepthReport> {
        self.lock().map(|t| depth_report(&t))
    }

    fn record(&self, kind: OpKind, out: &SlotVector) {
        if let Some(mut t) = self.lock() {
            t.push(kind, out.depth, out.level);
        }
    }

    #[inline]
    fn quantize(&self, x: f64) -> f64 {
        round_fast(x * self.scale) * self.inv_scale
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.config.slots {
            return Err(Error::LengthMismatch {
                left: len,
                right: self.config.slots,
            });
        }
        Ok(())
    }

    fn check_pair(&self, a: &SlotVector, b: &SlotVector) -> Result<()> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        self.check_len(a.len())
    }

    fn min_level(a: Option<u32>, b: Option<u32>) -> Option<u32> {
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, None) => x,
            (None, y) => y,
        }
    }

    fn consume(level: Option<u32>, op: &'static str) -> Result<Option<u32>> {
        match level {
            Some(0) => Err(Error::DepthExhausted { op, level: 0 }),
            Some(l) => Ok(Some(l - 1)),
            None => Ok(None),
        }
    }

    /// Encodes and encrypts `values`, zero-padded to the slot count.
    pub fn encrypt(&self, values: &[f64]) -> Result<SlotVector> {
        let s = self.config.slots;
        if values.len() > s {
            return Err(Error::InputTooLong {
                len: values.len(),
                slots: s,
            });
        }
        let mut slots = vec![0.0; s];
        let level = if self.is_leveled() {
            for (dst, &x) in slots.iter_mut().zip(values) {
                *dst = self.quantize(x);
            }
            Some(self.config.level_budget())
        } else {
            slots[..values.len()].copy_from_slice(values);
            None
        };
        let out = SlotVector {
            slots,
            level,
            depth: 0,
        };
        self.record(OpKind::Encrypt, &out);
        Ok(out)
    }

    pub fn decrypt(&self, c: &SlotVector) -> Vec<f64> {
        c.slots.clone()
    }

    /// Vector of zeros at full level; not recorded.
    pub fn zeros(&self) -> SlotVector {
        SlotVector {
            slots: vec![0.0; self.config.slots],
            level: self.is_leveled().then(|| self.config.level_budget()),
            depth: 0,
        }
    }

    pub fn add(&self, a: &SlotVector, b: &SlotVector) -> Result<SlotVector> {
        self.check_pair(a, b)?;
        let slots = a.slots.iter().zip(&b.slots).map(|(x, y)| x + y).collect();
        let out = SlotVector {
            slots,
            level: Self::min_level(a.level, b.level),
            depth: a.depth.max(b.depth),
        };
        self.record(OpKind::Add, &out);
        Ok(out)
    }

    pub fn sub(&self, a: &SlotVector, b: &SlotVector) -> Result<SlotVector> {
        self.check_pair(a, b)?;
        let slots = a.slots.iter().zip(&b.slots).map(|(x, y)| x - y).collect();
        let out = SlotVector {
            slots,
            level: Self::min_level(a.level, b.level),
            depth: a.depth.max(b.depth),
        };
        self.record(OpKind::Sub, &out);
        Ok(out)
    }

    /// Negation; exact in both backends and free of levels.
    pub fn neg(&self, a: &SlotVector) -> Result<SlotVector> {
        self.check_len(a.len())?;
        let out = SlotVector {
            slots: a.slots.iter().map(|x| -x).collect(),
            level: a.level,
            depth: a.depth,
        };
        self.record(OpKind::Sub, &out);
        Ok(out)
    }

    /// Sum of a list of vectors, left to right. Empty input gives `zeros()`.
    pub fn add_many<'a, I>(&self, items: I) -> Result<SlotVector>
    where
        I: IntoIterator<Item = &'a SlotVector>,
    {
        let mut iter = items.into_iter();
        let Some(first) = iter.next() else {
            return Ok(self.zeros());
        };
        let mut acc = first.clone();
        for v in iter {
            self.add_assign(&mut acc, v)?;
        }
        Ok(acc)
    }

    /// `acc += b` without allocating; recorded as an `add`.
    pub fn add_assign(&self, acc: &mut SlotVector, b: &SlotVector) -> Result<()> {
        self.check_pair(acc, b)?;
        for (x, y) in acc.slots.iter_mut().zip(&b.slots) {
            *x += y;
        }
        acc.level = Self::min_level(acc.level, b.level);
        acc.depth = acc.depth.max(b.depth);
        self.record(OpKind::Add, acc);
        Ok(())
    }

    pub fn mult(&self, a: &SlotVector, b: &SlotVector) -> Result<SlotVector> {
        self.check_pair(a, b)?;
        let level = Self::consume(Self::min_level(a.level, b.level), "mult")?;
        let slots = if self.is_leveled() {
            a.slots
                .iter()
                .zip(&b.slots)
                .map(|(x, y)| self.quantize(x * y))
                .collect()
        } else {
            a.slots.iter().zip(&b.slots).map(|(x, y)| x * y).collect()
        };
        let out = SlotVector {
            slots,
            level,
            depth: a.depth.max(b.depth) + 1,
        };
        self.record(OpKind::Mult, &out);
        Ok(out)
    }

    pub fn square(&self, a: &SlotVector) -> Result<SlotVector> {
        self.mult(a, a)
    }

    /// Product with a plaintext; the plaintext is encoded at scale `2^logp`
    /// and the result rescaled, consuming one level.
    pub fn cmult(&self, a: &SlotVector, m: &PlainMask) -> Result<SlotVector> {
        if m.len() != a.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: m.len(),
            });
        }
        self.check_len(a.len())?;
        let level = Self::consume(a.level, "cmult")?;
        let slots = if self.is_leveled() {
            a.slots
                .iter()
                .zip(&m.slots)
                .map(|(x, p)| self.quantize(x * self.quantize(*p)))
                .collect()
        } else {
            a.slots.iter().zip(&m.slots).map(|(x, p)| x * p).collect()
        };
        let out = SlotVector {
            slots,
            level,
            depth: a.depth + 1,
        };
        self.record(OpKind::CMult, &out);
        Ok(out)
    }

    /// Product with a constant broadcast to every slot; charged like `cmult`.
    pub fn mult_const(&self, a: &SlotVector, c: f64) -> Result<SlotVector> {
        self.check_len(a.len())?;
        let level = Self::consume(a.level, "cmult")?;
        let slots = if self.is_leveled() {
            let qc = self.quantize(c);
            a.slots.iter().map(|x| self.quantize(x * qc)).collect()
        } else {
            a.slots.iter().map(|x| x * c).collect()
        };
        let out = SlotVector {
            slots,
            level,
            depth: a.depth + 1,
        };
        self.record(OpKind::CMult, &out);
        Ok(out)
    }

    /// Adds a plaintext; no level consumed.
    pub fn add_plain(&self, a: &SlotVector, m: &PlainMask) -> Result<SlotVector> {
        if m.len() != a.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: m.len(),
            });
        }
        self.check_len(a.len())?;
        let slots = if self.is_leveled() {
            a.slots
                .iter()
                .zip(&m.slots)
                .map(|(x, p)| x + self.quantize(*p))
                .collect()
        } else {
            a.slots.iter().zip(&m.slots).map(|(x, p)| x + p).collect()
        };
        let out = SlotVector {
            slots,
            level: a.level,
            depth: a.depth,
        };
        self.record(OpKind::AddPlain, &out);
        Ok(out)
    }

    /// Left cyclic rotation: slot `i` of the result is slot `i + k` of `a`.
    pub fn rotate(&self, a: &SlotVector, k: i64) -> Result<SlotVector> {
        self.check_len(a.len())?;
        let s = a.len();
        let r = k.rem_euclid(s as i64) as usize;
        let mut slots = Vec::with_capacity(s);
        slots.extend_from_slice(&a.slots[r..]);
        slots.extend_from_slice(&a.slots[..r]);
        let out = SlotVector {
            slots,
            level: a.level,
            depth: a.depth,
        };
        self.record(OpKind::Rotate, &out);
        Ok(out)
    }

    /// `acc + rotate(b, k)` in one pass; recorded as a rotation and an add.
    pub fn rotate_add(&self, acc: &SlotVector, b: &SlotVector, k: i64) -> Result<SlotVector> {
        self.check_pair(acc, b)?;
        let s = b.len();
        let r = k.rem_euclid(s as i64) as usize;
        let mut slots = Vec::with_capacity(s);
        slots.extend(acc.slots[..s - r].iter().zip(&b.slots[r..]).map(|(x, y)| x + y));
        slots.extend(acc.slots[s - r..].iter().zip(&b.slots[..r]).map(|(x, y)| x + y));
        let rotated_level = b.level;
        if let Some(mut t) = self.lock() {
            t.push(OpKind::Rotate, b.depth, rotated_level);
        }
        let out = SlotVector {
            slots,
            level: Self::min_level(acc.level, b.level),
            depth: acc.depth.max(b.depth),
        };
        self.record(OpKind::Add, &out);
        Ok(out)
    }
}
