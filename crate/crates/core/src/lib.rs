//! Relaxed-retention STT-RAM L1 cache simulation and per-phase retention
//! time prediction.
//!
//! The library is generic over the floating-point type; the aliases below
//! fix it to `f64`.

pub mod cachesim;
pub mod energy;
pub mod error;
pub mod features;
pub mod learn;
pub mod policy;
pub mod scalar;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SimStats = cachesim::SimStats<f64>;
pub type RetentionProfile = cachesim::RetentionProfile<f64>;
pub type TimingParams = energy::TimingParams<f64>;
pub type EnergyReport = energy::EnergyReport<f64>;
