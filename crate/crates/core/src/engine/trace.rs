//! Operation log and the depth report derived from it.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Encrypt,
    Add,
    Sub,
    AddPlain,
    Mult,
    CMult,
    Rotate,
}

impl OpKind {
    /// Whether the operation rescales (consumes a level).
    pub fn rescales(self) -> bool {
        matches!(self, OpKind::Mult | OpKind::CMult)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpRecord {
    pub phase: usize,
    pub kind: OpKind,
    /// Depth of the produced vector.
    pub depth: u32,
    /// Level of the produced vector (leveled backend).
    pub level: Option<u32>,
}

/// Ordered log of engine operations, grouped into labeled phases.
#[derive(Clone, Debug)]
pub struct Trace {
    phases: Vec<String>,
    records: Vec<OpRecord>,
}

impl Default for Trace {
    fn default() -> Self {
        Trace::new()
    }
}

impl Trace {
    pub fn new() -> Self {
        Trace {
            phases: vec!["setup".to_string()],
            records: Vec::new(),
        }
    }

    /// Starts a new phase; subsequent records are attributed to it.
    pub fn begin_phase(&mut self, label: impl Into<String>) {
        self.phases.push(label.into());
    }

    pub fn push(&mut self, kind: OpKind, depth: u32, level: Option<u32>) {
        self.records.push(OpRecord {
            phase: self.phases.len() - 1,
            kind,
            depth,
            level,
        });
    }

    pub fn phases(&self) -> &[String] {
        &self.phases
    }

    pub fn records(&self) -> &[OpRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub encrypt: u64,
    pub add: u64,
    pub sub: u64,
    pub add_plain: u64,
    pub mult: u64,
    pub cmult: u64,
    pub rotate: u64,
}

impl OpCounts {
    fn bump(&mut self, kind: OpKind) {
        let slot = match kind {
            OpKind::Encrypt => &mut self.encrypt,
            OpKind::Add => &mut self.add,
            OpKind::Sub => &mut self.sub,
            OpKind::AddPlain => &mut self.add_plain,
            OpKind::Mult => &mut self.mult,
            OpKind::CMult => &mut self.cmult,
            OpKind::Rotate => &mut self.rotate,
        };
        *slot += 1;
    }

    pub fn total(&self) -> u64 {
        self.encrypt + self.add + self.sub + self.add_plain + self.mult + self.cmult + self.rotate
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDepth {
    pub label: String,
    pub ops: OpCounts,
    /// Growth of the maximum dataflow depth during this phase.
    pub depth: u32,
    /// Maximum dataflow depth reached by the end of this phase.
    pub max_depth: u32,
    pub min_level: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthReport {
    /// Phases that recorded at least one operation, in order.
    pub phases: Vec<PhaseDepth>,
    pub total_depth: u32,
    /// Lowest level of any produced vector (leveled backend).
    pub min_level: Option<u32>,
}

impl DepthReport {
    pub fn phase(&self, label: &str) -> Option<&PhaseDepth> {
        self.phases.iter().find(|p| p.label == label)
    }
}

/// Summarizes multiplicative depth per phase.
pub fn depth_report(trace: &Trace) -> DepthReport {
    let mut per_phase: Vec<(OpCounts, u32, Option<u32>, bool)> =
        vec![(OpCounts::default(), 0, None, false); trace.phases.len()];
    let mut min_level: Option<u32> = None;
    for rec in &trace.records {
        let entry = &mut per_phase[rec.phase];
        entry.0.bump(rec.kind);
        entry.1 = entry.1.max(rec.depth);
        entry.3 = true;
        if let Some(level) = rec.level {
            entry.2 = Some(entry.2.map_or(level, |m: u32| m.min(level)));
            min_level = Some(min_level.map_or(level, |m: u32| m.min(level)));
        }
    }

    let mut phases = Vec::new();
    let mut running_max = 0u32;
    for (label, (ops, phase_max, phase_min_level, used)) in trace.phases.iter().zip(per_phase) {
        if !used {
            continue;
        }
        let max_depth = running_max.max(phase_max);
        phases.push(PhaseDepth {
            label: label.clone(),
            ops,
            depth: max_depth - running_max,
            max_depth,
            min_level: phase_min_level,
        });
        running_max = max_depth;
    }

    DepthReport {
        phases,
        total_depth: running_max,
        min_level,
    }
}
