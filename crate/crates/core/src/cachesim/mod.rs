//! Trace-driven L1 data cache simulation with retention expiry, backed by
//! an SRAM L2.
//!
//! Each L1 block carries the time of its last write. Any write (store hit,
//! write-miss fill or read-miss fill) restarts the block's monitor counter;
//! reads do not. Once a block's age reaches `(N-1)/N` of the retention time
//! it is invalidated, and written back to L2 first if dirty. The check runs
//! lazily on the indexed set before every lookup and eagerly at each
//! counter quantum (`T/N`) boundary.

mod core;
mod l1;
mod l2;
mod profile;
mod stats;

pub use self::core::{simulate, simulate_with_l2, AccessOutcome, Core, Simulator};
pub use l1::{BlockMeta, L1Access, L1Cache};
pub use l2::{L2Cache, L2Outcome};
pub use profile::{RetentionProfile, Technology};
pub use stats::{PhaseStats, SimStats, GAP_BUCKETS_PER_OCTAVE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheGeometry {
    pub capacity_bytes: u64,
    pub line_bytes: u64,
    pub associativity: u32,
}

impl CacheGeometry {
    pub const fn new(capacity_bytes: u64, line_bytes: u64, associativity: u32) -> Self {
        Self {
            capacity_bytes,
            line_bytes,
            associativity,
        }
    }

    /// 32 KB, 64 B lines, 4-way.
    pub const fn l1_default() -> Self {
        Self::new(32 * 1024, 64, 4)
    }

    /// 1 MB, 64 B lines, 16-way.
    pub const fn l2_default() -> Self {
        Self::new(1024 * 1024, 64, 16)
    }

    pub fn validate(&self) -> Result<()> {
        if self.line_bytes == 0 || !self.line_bytes.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "line size must be a power of two, got {}",
                self.line_bytes
            )));
        }
        if self.associativity == 0 {
            return Err(Error::InvalidConfig("associativity must be >= 1".into()));
        }
        let set_bytes = self.line_bytes * self.associativity as u64;
        if self.capacity_bytes == 0 || !self.capacity_bytes.is_multiple_of(set_bytes) {
            return Err(Error::InvalidConfig(format!(
                "capacity {} is not a multiple of line size x associativity ({set_bytes})",
                self.capacity_bytes
            )));
        }
        Ok(())
    }

    pub fn sets(&self) -> usize {
        (self.capacity_bytes / (self.line_bytes * self.associativity as u64)) as usize
    }

    pub fn lines(&self) -> usize {
        (self.capacity_bytes / self.line_bytes) as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgingClock {
    /// Cycles (including stalls) divided by the clock frequency.
    #[default]
    SimulatedTime,
    /// Retired instructions divided by the clock frequency.
    NominalTime,
}

/// Per-block N-state retention monitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub n_states: u32,
    pub aging_clock: AgingClock,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            n_states: 4,
            aging_clock: AgingClock::SimulatedTime,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_states < 2 {
            return Err(Error::InvalidConfig(format!(
                "monitor needs at least 2 states, got {}",
                self.n_states
            )));
        }
        Ok(())
    }

    pub fn quantum_ns<F: Scalar>(&self, retention_ns: F) -> F {
        retention_ns / F::from_u32(self.n_states).expect("u32 fits")
    }

    /// Age at which the flag state is reached: `(N-1)/N * T`.
    pub fn threshold_ns<F: Scalar>(&self, retention_ns: F) -> F {
        let n = F::from_u32(self.n_states).expect("u32 fits");
        retention_ns * (n - F::one()) / n
    }

    pub fn flag_state(&self) -> u32 {
        self.n_states - 1
    }

    /// Counter bits per block: `ceil(log2 N)`.
    pub fn storage_bits(&self) -> u32 {
        u32::BITS - (self.n_states - 1).leading_zeros()
    }

    /// FSM state of a block of age `age_ns`.
    pub fn state_for_age<F: Scalar>(&self, age_ns: F, retention_ns: F) -> u32 {
        if !retention_ns.is_finite() {
            return 0;
        }
        let q = (age_ns / self.quantum_ns(retention_ns)).floor();
        q.to_u32().unwrap_or(u32::MAX).min(self.flag_state())
    }
}
