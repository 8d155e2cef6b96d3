//! Simulation size limits. Every exponential enumeration in the crate is
//! exact and refuses inputs beyond these bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable overriding [`Limits::max_qubits`].
pub const MAX_QUBITS_ENV: &str = "QLLL_MAX_QUBITS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Largest simulated register (dense operators are `2^n × 2^n`).
    pub max_qubits: usize,
    /// Largest flaw count for enumerating `Ind(F)`.
    pub max_independent_set_flaws: usize,
    /// Largest flaw count for the uniform gap (all `2^|F|` subsets).
    pub max_gap_flaws: usize,
    /// Largest total size `k` for stable set sequence enumeration.
    pub max_sequence_size: usize,
    /// Largest flaw count for stable set sequence enumeration.
    pub max_sequence_flaws: usize,
    /// Largest flaw count for exhaustive log-tree enumeration.
    pub max_tree_flaws: usize,
    /// Largest qubit count for exhaustive log-tree enumeration.
    pub max_tree_qubits: usize,
    /// Largest qubit count for superoperator (vectorized) channel evaluation.
    pub max_superoperator_qubits: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_qubits: 14,
            max_independent_set_flaws: 20,
            max_gap_flaws: 16,
            max_sequence_size: 10,
            max_sequence_flaws: 8,
            max_tree_flaws: 4,
            max_tree_qubits: 5,
            max_superoperator_qubits: 5,
        }
    }
}

impl Limits {
    /// Defaults with `max_qubits` taken from `QLLL_MAX_QUBITS` when set.
    pub fn from_env() -> Result<Self> {
        let mut limits = Self::default();
        if let Ok(raw) = std::env::var(MAX_QUBITS_ENV) {
            limits.max_qubits = raw.trim().parse().map_err(|_| Error::InvalidParameter {
                name: "QLLL_MAX_QUBITS",
                reason: format!("not a non-negative integer: {raw:?}"),
            })?;
        }
        Ok(limits)
    }

    pub fn max_dim(&self) -> usize {
        1usize
            .checked_shl(self.max_qubits as u32)
            .unwrap_or(usize::MAX)
    }

    pub(crate) fn check(what: &'static str, value: usize, limit: usize) -> Result<()> {
        if value > limit {
            Err(Error::LimitExceeded { what, value, limit })
        } else {
            Ok(())
        }
    }
}
