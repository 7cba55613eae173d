/// A fixed-length vector of real slots: the emulator's stand-in for a ciphertext.
///
/// Values are immutable once built; every engine operation returns a new vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotVector {
    pub(crate) slots: Vec<f64>,
    /// Remaining levels (leveled backend only).
    pub(crate) level: Option<u32>,
    /// Rescaling operations along this vector's dataflow.
    pub(crate) depth: u32,
}

impl SlotVector {
    pub fn slots(&self) -> &[f64] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn level(&self) -> Option<u32> {
        self.level
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }
}

/// Plaintext operand for `cmult` and `add_plain`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainMask {
    pub(crate) slots: Vec<f64>,
}

impl PlainMask {
    /// Zero-pads `values` on the right to `slots` entries.
    ///
    /// Panics if `values` is longer than `slots`.
    pub fn from_values(values: &[f64], slots: usize) -> Self {
        assert!(values.len() <= slots, "mask longer than slot count");
        let mut v = vec![0.0; slots];
        v[..values.len()].copy_from_slice(values);
        PlainMask { slots: v }
    }

    pub fn constant(value: f64, slots: usize) -> Self {
        PlainMask {
            slots: vec![value; slots],
        }
    }

    pub fn one_hot(index: usize, slots: usize) -> Self {
        Self::from_fn(slots, |s| if s == index { 1.0 } else { 0.0 })
    }

    pub fn from_fn(slots: usize, f: impl Fn(usize) -> f64) -> Self {
        PlainMask {
            slots: (0..slots).map(f).collect(),
        }
    }

    /// `value` on every slot in `range`, zero elsewhere.
    pub fn range(range: std::ops::Range<usize>, value: f64, slots: usize) -> Self {
        Self::from_fn(slots, |s| if range.contains(&s) { value } else { 0.0 })
    }

    pub fn slots(&self) -> &[f64] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}
