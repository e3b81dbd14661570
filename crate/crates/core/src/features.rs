//! Counter-derived feature vectors and their standardization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cachesim::SimStats;
use crate::error::{Error, Result};
use crate::scalar::{ratio, Scalar};

pub const DEFAULT_CATALOG_VERSION: &str = "counters-v1";

/// Profiling window length in instructions.
pub const DEFAULT_WINDOW_INSTRUCTIONS: u64 = 1_000_000;

/// A single extractable feature. Ratios whose denominator is zero are 0,
/// except `ReadWriteRatio`, which divides by `max(writes, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    L1ReadPerKi,
    L1WritePerKi,
    L1ReadMissRate,
    L1WriteMissRate,
    L1TotalMissRate,
    /// Dirty replacement and expiry writebacks per 1000 instructions.
    WritebackPerKi,
    L2AccessPerKi,
    /// L2 demand misses over L2 demand accesses (one per L1 miss).
    L2MissRate,
    L2MissPerKi,
    UniqueLinesPerKi,
    ReadWriteRatio,
    /// Dirty victims over all victims, replacement and expiry together.
    DirtyEvictionRatio,
    MeanWriteReuseGapNs,
    P90WriteReuseGapNs,
    MeanReadReuseGapNs,
    /// Replacement evictions over L1 misses.
    SetConflictRatio,
    /// Lines touched once over lines touched.
    StreamingRatio,
    /// Writes immediately following a write, over writes.
    StoreBurstiness,
    /// L1 hits over maximal hit runs.
    HitRunLengthMean,
    InstructionsPerEvent,
}

const ALL: [Feature; 20] = [
    Feature::L1ReadPerKi,
    Feature::L1WritePerKi,
    Feature::L1ReadMissRate,
    Feature::L1WriteMissRate,
    Feature::L1TotalMissRate,
    Feature::WritebackPerKi,
    Feature::L2AccessPerKi,
    Feature::L2MissRate,
    Feature::L2MissPerKi,
    Feature::UniqueLinesPerKi,
    Feature::ReadWriteRatio,
    Feature::DirtyEvictionRatio,
    Feature::MeanWriteReuseGapNs,
    Feature::P90WriteReuseGapNs,
    Feature::MeanReadReuseGapNs,
    Feature::SetConflictRatio,
    Feature::StreamingRatio,
    Feature::StoreBurstiness,
    Feature::HitRunLengthMean,
    Feature::InstructionsPerEvent,
];

impl Feature {
    pub fn all() -> &'static [Feature] {
        &ALL
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::L1ReadPerKi => "l1_read_per_ki",
            Feature::L1WritePerKi => "l1_write_per_ki",
            Feature::L1ReadMissRate => "l1_read_miss_rate",
            Feature::L1WriteMissRate => "l1_write_miss_rate",
            Feature::L1TotalMissRate => "l1_total_miss_rate",
            Feature::WritebackPerKi => "writeback_per_ki",
            Feature::L2AccessPerKi => "l2_access_per_ki",
            Feature::L2MissRate => "l2_miss_rate",
            Feature::L2MissPerKi => "l2_miss_per_ki",
            Feature::UniqueLinesPerKi => "unique_lines_per_ki",
            Feature::ReadWriteRatio => "read_write_ratio",
            Feature::DirtyEvictionRatio => "dirty_eviction_ratio",
            Feature::MeanWriteReuseGapNs => "mean_write_reuse_gap_ns",
            Feature::P90WriteReuseGapNs => "p90_write_reuse_gap_ns",
            Feature::MeanReadReuseGapNs => "mean_read_reuse_gap_ns",
            Feature::SetConflictRatio => "set_conflict_ratio",
            Feature::StreamingRatio => "streaming_ratio",
            Feature::StoreBurstiness => "store_burstiness",
            Feature::HitRunLengthMean => "hit_run_length_mean",
            Feature::InstructionsPerEvent => "instructions_per_event",
        }
    }

    /// True for features bounded to [0, 1].
    pub fn is_rate(self) -> bool {
        matches!(
            self,
            Feature::L1ReadMissRate
                | Feature::L1WriteMissRate
                | Feature::L1TotalMissRate
                | Feature::L2MissRate
                | Feature::DirtyEvictionRatio
                | Feature::SetConflictRatio
                | Feature::StreamingRatio
                | Feature::StoreBurstiness
        )
    }

    pub fn value<F: Scalar>(self, s: &SimStats<F>) -> F {
        let per_ki = |n: u64| F::from_count(n) * F::lit(1000.0) / F::from_count(s.instructions);
        match self {
            Feature::L1ReadPerKi => per_ki(s.l1_reads),
            Feature::L1WritePerKi => per_ki(s.l1_writes),
            Feature::L1ReadMissRate => ratio(s.l1_read_misses, s.l1_reads),
            Feature::L1WriteMissRate => ratio(s.l1_write_misses, s.l1_writes),
            Feature::L1TotalMissRate => ratio(s.l1_misses(), s.l1_accesses()),
            Feature::WritebackPerKi => per_ki(s.l1_writebacks + s.expiry_writebacks),
            Feature::L2AccessPerKi => per_ki(s.l2_accesses),
            Feature::L2MissRate => ratio(s.l2_misses, s.l1_misses()),
            Feature::L2MissPerKi => per_ki(s.l2_misses),
            Feature::UniqueLinesPerKi => per_ki(s.unique_lines),
            Feature::ReadWriteRatio => ratio(s.l1_reads, s.l1_writes.max(1)),
            Feature::DirtyEvictionRatio => ratio(
                s.l1_writebacks + s.expiry_writebacks,
                s.replacement_evictions + s.expiry_evictions,
            ),
            Feature::MeanWriteReuseGapNs => s.mean_write_gap_ns(),
            Feature::P90WriteReuseGapNs => s.p90_write_gap_ns(),
            Feature::MeanReadReuseGapNs => s.mean_read_gap_ns(),
            Feature::SetConflictRatio => ratio(s.replacement_evictions, s.l1_misses()),
            Feature::StreamingRatio => ratio(s.single_touch_lines, s.unique_lines),
            Feature::StoreBurstiness => ratio(s.write_after_write, s.l1_writes),
            Feature::HitRunLengthMean => ratio(s.l1_hits(), s.hit_runs),
            Feature::InstructionsPerEvent => ratio(s.instructions, s.events),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL.iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown feature `{s}`")))
    }
}

/// Ordered, versioned list of features.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub version: String,
    pub features: Vec<Feature>,
}

impl Default for FeatureCatalog {
    fn default() -> Self {
        Self {
            version: DEFAULT_CATALOG_VERSION.into(),
            features: ALL.to_vec(),
        }
    }
}

impl FeatureCatalog {
    pub fn new(version: impl Into<String>, features: Vec<Feature>) -> Result<Self> {
        let cat = Self {
            version: version.into(),
            features,
        };
        cat.validate()?;
        Ok(cat)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version.trim().is_empty() || self.version.contains(char::is_whitespace) {
            return Err(Error::Schema(format!("bad catalog version `{}`", self.version)));
        }
        if self.features.is_empty() {
            return Err(Error::Schema("catalog has no features".into()));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].contains(f) {
                return Err(Error::Schema(format!("feature `{f}` listed twice")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.features.iter().map(|f| f.name()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name() == name)
    }

    /// Text manifest: a `version` line then one feature name per line.
    pub fn to_manifest(&self) -> String {
        let mut s = format!("# feature catalog\nversion {}\n", self.version);
        for f in &self.features {
            s.push_str(f.name());
            s.push('\n');
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut version = None;
        let mut features = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("version ") {
                if version.replace(v.trim().to_string()).is_some() {
                    return Err(Error::Schema("manifest has two version lines".into()));
                }
            } else {
                features.push(line.parse()?);
            }
        }
        let version = version.ok_or_else(|| Error::Schema("manifest has no version line".into()))?;
        Self::new(version, features)
    }

    pub fn check_version(&self, found: &str) -> Result<()> {
        if self.version != found {
            return Err(Error::CatalogMismatch {
                expected: self.version.clone(),
                found: found.into(),
            });
        }
        Ok(())
    }
}

/// Feature values of one profiling window, in catalog order.
pub fn extract<F: Scalar>(stats: &SimStats<F>, catalog: &FeatureCatalog) -> Result<Vec<F>> {
    if stats.instructions == 0 {
        return Err(Error::InvalidParams("cannot extract features from a zero-instruction window".into()));
    }
    Ok(catalog.features.iter().map(|f| f.value(stats)).collect())
}

/// Per-feature mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Standardizer<F> {
    pub mean: Vec<F>,
    pub std: Vec<F>,
}

impl<F: Scalar> Standardizer<F> {
    pub fn fit(vectors: &[Vec<F>]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "standardizer needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        let dim = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: v.len() });
        }
        let n = F::from_count(vectors.len() as u64);
        let mut mean = vec![F::zero(); dim];
        let mut std = vec![F::zero(); dim];
        for j in 0..dim {
            let first = vectors[0][j];
            if vectors.iter().all(|v| v[j] == first) {
                mean[j] = first;
                continue;
            }
            let m = vectors.iter().map(|v| v[j]).sum::<F>() / n;
            let var = vectors.iter().map(|v| (v[j] - m) * (v[j] - m)).sum::<F>() / n;
            mean[j] = m;
            std[j] = var.sqrt();
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[F]) -> Result<Vec<F>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| if s > F::zero() { (x - m) / s } else { F::zero() })
            .collect())
    }
}
