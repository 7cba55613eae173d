use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic backend behind the slot engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Plain `f64` slot arithmetic; levels are tracked for reporting only.
    Exact,
    /// Fixed-point slots at scale `2^logp` with a finite level budget.
    Leveled,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "leveled" => Ok(Backend::Leveled),
            other => Err(Error::InvalidConfig(format!("unknown backend {other:?}"))),
        }
    }
}

/// Parameters of the emulated scheme.
///
/// The defaults are the HEAAN parameters of the Iris experiment:
/// `logN = 16`, `logQ = 990`, `logp = 30`, 32768 slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(rename = "logN")]
    pub log_n: u32,
    #[serde(rename = "logQ")]
    pub log_q: u32,
    pub logp: u32,
    pub slots: usize,
    pub backend: Backend,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            log_n: 16,
            log_q: 990,
            logp: 30,
            slots: 32768,
            backend: Backend::Leveled,
        }
    }
}

impl EngineConfig {
    /// Exact backend with `slots` slots and the default modulus chain.
    pub fn exact(slots: usize) -> Self {
        EngineConfig {
            slots,
            backend: Backend::Exact,
            ..Default::default()
        }
    }

    /// Leveled backend with `slots` slots and the default modulus chain.
    pub fn leveled(slots: usize) -> Self {
        EngineConfig {
            slots,
            backend: Backend::Leveled,
            ..Default::default()
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    /// Number of rescaling multiplications a fresh ciphertext supports.
    pub fn level_budget(&self) -> u32 {
        self.log_q.checked_div(self.logp).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 || !self.slots.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "slots must be a power of two, got {}",
                self.slots
            )));
        }
        if self.logp == 0 {
            return Err(Error::InvalidConfig("logp must be positive".into()));
        }
        // Quantized slots are held as f64; the scaled integer must stay well inside the mantissa.
        if self.logp > 45 {
            return Err(Error::InvalidConfig(format!(
                "logp = {} exceeds the emulator's 45-bit limit",
                self.logp
            )));
        }
        if self.log_q < self.logp {
            return Err(Error::InvalidConfig(format!(
                "logQ ({}) must be at least logp ({})",
                self.log_q, self.logp
            )));
        }
        Ok(())
    }
}
