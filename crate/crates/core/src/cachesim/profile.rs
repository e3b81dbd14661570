use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Technology {
    Sram,
    SttRam,
}

/// One cache technology point: retention plus latency, energy and leakage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetentionProfile<F> {
    pub name: String,
    pub technology: Technology,
    /// Infinite for SRAM and non-volatile arrays.
    pub retention_time_ns: F,
    pub hit_latency_ns: F,
    pub write_latency_ns: F,
    pub read_energy_nj: F,
    pub write_energy_nj: F,
    pub leakage_mw: F,
}

// name, retention (ns), hit (ns), write (ns), read (nJ), write (nJ)
const STT_RAM_COLUMNS: [(&str, f64, f64, f64, f64, f64); 6] = [
    ("10us", 10_000.0, 0.464, 0.601, 0.003, 0.026),
    ("26.5us", 26_500.0, 0.454, 0.769, 0.003, 0.030),
    ("50us", 50_000.0, 0.448, 0.894, 0.003, 0.033),
    ("75us", 75_000.0, 0.445, 0.981, 0.003, 0.035),
    ("100us", 100_000.0, 0.443, 1.045, 0.003, 0.036),
    ("1ms", 1_000_000.0, 0.438, 1.647, 0.003, 0.051),
];
const STT_RAM_LEAKAGE_MW: f64 = 4.659;
const SRAM_LEAKAGE_MW: f64 = 34.265;

impl<F: Scalar> RetentionProfile<F> {
    pub fn sram() -> Self {
        Self {
            name: "sram".into(),
            technology: Technology::Sram,
            retention_time_ns: F::infinity(),
            hit_latency_ns: F::lit(0.486),
            write_latency_ns: F::lit(0.350),
            read_energy_nj: F::lit(0.0076),
            write_energy_nj: F::lit(0.0066),
            leakage_mw: F::lit(SRAM_LEAKAGE_MW),
        }
    }

    /// The six relaxed-retention STT-RAM columns, shortest retention first.
    pub fn stt_ram_set() -> Vec<Self> {
        STT_RAM_COLUMNS
            .iter()
            .map(|&(name, ret, hit, write, re, we)| Self {
                name: name.into(),
                technology: Technology::SttRam,
                retention_time_ns: F::lit(ret),
                hit_latency_ns: F::lit(hit),
                write_latency_ns: F::lit(write),
                read_energy_nj: F::lit(re),
                write_energy_nj: F::lit(we),
                leakage_mw: F::lit(STT_RAM_LEAKAGE_MW),
            })
            .collect()
    }

    /// SRAM followed by the six STT-RAM columns.
    pub fn table_ii() -> Vec<Self> {
        let mut v = vec![Self::sram()];
        v.extend(Self::stt_ram_set());
        v
    }

    pub fn is_volatile(&self) -> bool {
        self.retention_time_ns.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidConfig(format!("profile `{}`: {m}", self.name)));
        for (field, v) in [
            ("hit_latency_ns", self.hit_latency_ns),
            ("write_latency_ns", self.write_latency_ns),
            ("read_energy_nj", self.read_energy_nj),
            ("write_energy_nj", self.write_energy_nj),
            ("leakage_mw", self.leakage_mw),
        ] {
            if !(v > F::zero() && v.is_finite()) {
                return err(format!("{field} must be finite and > 0, got {v}"));
            }
        }
        if !(self.retention_time_ns > F::zero()) {
            return err(format!(
                "retention must be > 0 or infinite, got {}",
                self.retention_time_ns
            ));
        }
        match (self.technology, self.is_volatile()) {
            (Technology::SttRam, false) => err(
                "infinite retention with STT-RAM parameters; use an SRAM profile for non-volatile behaviour"
                    .into(),
            ),
            (Technology::Sram, true) => err("SRAM profiles cannot have finite retention".into()),
            _ => Ok(()),
        }
    }
}
