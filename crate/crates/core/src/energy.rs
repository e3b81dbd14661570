//! Additive in-order timing and per-component energy accounting.

use serde::{Deserialize, Serialize};

use crate::cachesim::{RetentionProfile, SimStats};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Core clock, CPI and lower-level constants.
///
/// The L2 and memory constants are placeholders: the reference platform
/// only pins the clock (2 GHz) and the one-cycle L1 hit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingParams<F> {
    pub frequency_hz: F,
    pub base_cpi: F,
    pub hit_cycles: F,
    pub l2_hit_penalty_cycles: F,
    pub memory_penalty_cycles: F,
    /// Energy charged per L2 access (fills, writebacks, expiry writebacks).
    pub l2_access_energy_nj: F,
}

impl<F: Scalar> Default for TimingParams<F> {
    fn default() -> Self {
        Self {
            frequency_hz: F::lit(2e9),
            base_cpi: F::one(),
            hit_cycles: F::one(),
            l2_hit_penalty_cycles: F::lit(20.0),
            memory_penalty_cycles: F::lit(200.0),
            l2_access_energy_nj: F::lit(0.05),
        }
    }
}

/// Counters the cycle formula depends on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimingCounters {
    pub instructions: u64,
    pub l1_misses: u64,
    pub l2_misses: u64,
    pub l1_writes: u64,
}

impl<F: Scalar> TimingParams<F> {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("frequency_hz", self.frequency_hz),
            ("base_cpi", self.base_cpi),
            ("hit_cycles", self.hit_cycles),
        ];
        for (name, v) in pos {
            if !(v > F::zero() && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        let nonneg = [
            ("l2_hit_penalty_cycles", self.l2_hit_penalty_cycles),
            ("memory_penalty_cycles", self.memory_penalty_cycles),
            ("l2_access_energy_nj", self.l2_access_energy_nj),
        ];
        for (name, v) in nonneg {
            if !(v >= F::zero() && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Extra cycles a store costs beyond the hit: `max(0, ceil(write_latency * f) - hit_cycles)`.
    pub fn write_stall_cycles(&self, profile: &RetentionProfile<F>) -> F {
        let cycles = (profile.write_latency_ns * self.frequency_hz / F::lit(1e9)).ceil();
        (cycles - self.hit_cycles).max(F::zero())
    }

    pub fn cycles(&self, c: &TimingCounters, write_stall: F) -> F {
        F::from_count(c.instructions) * self.base_cpi
            + F::from_count(c.l1_misses) * self.l2_hit_penalty_cycles
            + F::from_count(c.l2_misses) * self.memory_penalty_cycles
            + F::from_count(c.l1_writes) * write_stall
    }

    pub fn cycles_to_ns(&self, cycles: F) -> F {
        cycles * F::lit(1e9) / self.frequency_hz
    }

    pub fn ns_to_cycles(&self, ns: F) -> F {
        ns * self.frequency_hz / F::lit(1e9)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport<F> {
    pub dynamic_read_nj: F,
    pub dynamic_write_nj: F,
    pub leakage_nj: F,
    pub l2_charge_nj: F,
    pub total_nj: F,
    pub latency_ns: F,
}

impl<F: Scalar> EnergyReport<F> {
    pub fn component_sum(&self) -> F {
        self.dynamic_read_nj + self.dynamic_write_nj + self.leakage_nj + self.l2_charge_nj
    }
}

pub fn compute_cycles<F: Scalar>(
    stats: &SimStats<F>,
    profile: &RetentionProfile<F>,
    timing: &TimingParams<F>,
) -> F {
    timing.cycles(&stats.timing_counters(), timing.write_stall_cycles(profile))
}

/// Total latency in ns; equal to the simulator's `sim_time_ns` for a run
/// on a single profile.
pub fn compute_latency<F: Scalar>(
    stats: &SimStats<F>,
    profile: &RetentionProfile<F>,
    timing: &TimingParams<F>,
) -> F {
    timing.cycles_to_ns(compute_cycles(stats, profile, timing))
}

/// Leakage energy in nJ for `duration_ns` at `leakage_mw` (mW x ns = pJ).
pub fn leakage_energy_nj<F: Scalar>(leakage_mw: F, duration_ns: F) -> F {
    leakage_mw * duration_ns / F::lit(1e3)
}

pub fn energy_for_latency<F: Scalar>(
    stats: &SimStats<F>,
    profile: &RetentionProfile<F>,
    timing: &TimingParams<F>,
    latency_ns: F,
) -> EnergyReport<F> {
    let dynamic_read_nj = F::from_count(stats.l1_reads) * profile.read_energy_nj;
    let dynamic_write_nj = F::from_count(stats.l1_writes + stats.fills()) * profile.write_energy_nj;
    let leakage_nj = leakage_energy_nj(profile.leakage_mw, latency_ns);
    let l2_charge_nj = F::from_count(stats.l2_accesses) * timing.l2_access_energy_nj;
    let mut report = EnergyReport {
        dynamic_read_nj,
        dynamic_write_nj,
        leakage_nj,
        l2_charge_nj,
        total_nj: F::zero(),
        latency_ns,
    };
    report.total_nj = report.component_sum();
    report
}

pub fn compute_energy<F: Scalar>(
    stats: &SimStats<F>,
    profile: &RetentionProfile<F>,
    timing: &TimingParams<F>,
) -> EnergyReport<F> {
    energy_for_latency(stats, profile, timing, compute_latency(stats, profile, timing))
}

/// What a policy minimizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Latency,
    Energy,
}

impl Objective {
    pub const ALL: [Objective; 2] = [Objective::Latency, Objective::Energy];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Latency => "latency",
            Objective::Energy => "energy",
        }
    }

    /// Latency in ns or total energy in nJ.
    pub fn of<F: Scalar>(self, report: &EnergyReport<F>) -> F {
        match self {
            Objective::Latency => report.latency_ns,
            Objective::Energy => report.total_nj,
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "latency" => Ok(Objective::Latency),
            "energy" => Ok(Objective::Energy),
            other => Err(Error::InvalidConfig(format!(
                "unknown objective `{other}` (expected latency or energy)"
            ))),
        }
    }
}
