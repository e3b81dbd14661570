use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::energy::TimingCounters;
use crate::scalar::Scalar;

pub const GAP_BUCKETS_PER_OCTAVE: usize = 8;
const GAP_BUCKETS: usize = 256;

/// Raw counters from one simulation window.
///
/// `l1_writebacks` counts dirty replacement victims only; dirty expiry
/// victims are in `expiry_writebacks`. `l2_accesses` includes demand
/// fills and both kinds of L1 writeback. `l2_misses` counts demand misses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SimStats<F> {
    pub instructions: u64,
    pub events: u64,
    pub l1_reads: u64,
    pub l1_writes: u64,
    pub l1_read_misses: u64,
    pub l1_write_misses: u64,
    pub l1_writebacks: u64,
    pub replacement_evictions: u64,
    pub expiry_evictions: u64,
    pub expiry_writebacks: u64,
    pub l2_accesses: u64,
    pub l2_misses: u64,
    pub l2_writebacks: u64,
    pub unique_lines: u64,
    /// Lines touched exactly once in the window.
    pub single_touch_lines: u64,
    /// Maximal runs of consecutive L1 hits.
    pub hit_runs: u64,
    /// Writes immediately preceded by another write.
    pub write_after_write: u64,
    /// Per-line write-to-write gaps.
    pub write_gap_count: u64,
    pub write_gap_sum_ns: F,
    #[serde(default)]
    pub write_gap_histogram: Vec<u64>,
    /// Per-read data age: time since the line's last write, or since its
    /// first touch in the window when it has not been written.
    pub read_gap_count: u64,
    pub read_gap_sum_ns: F,
    pub cycles: F,
    pub sim_time_ns: F,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<PhaseStats<F>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PhaseStats<F> {
    pub id: String,
    pub weight: f64,
    pub stats: SimStats<F>,
}

impl<F: Scalar> SimStats<F> {
    pub fn l1_accesses(&self) -> u64 {
        self.l1_reads + self.l1_writes
    }

    pub fn l1_misses(&self) -> u64 {
        self.l1_read_misses + self.l1_write_misses
    }

    pub fn l1_hits(&self) -> u64 {
        self.l1_accesses() - self.l1_misses()
    }

    /// Array writes caused by miss fills (one per miss, write-allocate).
    pub fn fills(&self) -> u64 {
        self.l1_misses()
    }

    pub fn timing_counters(&self) -> TimingCounters {
        TimingCounters {
            instructions: self.instructions,
            l1_misses: self.l1_misses(),
            l2_misses: self.l2_misses,
            l1_writes: self.l1_writes,
        }
    }

    pub fn mean_write_gap_ns(&self) -> F {
        if self.write_gap_count == 0 {
            F::zero()
        } else {
            self.write_gap_sum_ns / F::from_count(self.write_gap_count)
        }
    }

    pub fn mean_read_gap_ns(&self) -> F {
        if self.read_gap_count == 0 {
            F::zero()
        } else {
            self.read_gap_sum_ns / F::from_count(self.read_gap_count)
        }
    }

    /// 90th percentile of the write-gap histogram, reported at the
    /// geometric midpoint of its bucket. Zero when no gaps were seen.
    pub fn p90_write_gap_ns(&self) -> F {
        let total: u64 = self.write_gap_histogram.iter().sum();
        if total == 0 {
            return F::zero();
        }
        let target = (total as f64 * 0.9).ceil() as u64;
        let mut seen = 0;
        for (i, &n) in self.write_gap_histogram.iter().enumerate() {
            seen += n;
            if seen >= target {
                return F::lit(bucket_midpoint(i));
            }
        }
        F::lit(bucket_midpoint(self.write_gap_histogram.len() - 1))
    }

    /// Adds every counter of `other`. `cycles`, `sim_time_ns` and `phases`
    /// are left to the caller, and `unique_lines` simply sums.
    pub fn accumulate(&mut self, other: &SimStats<F>) {
        self.instructions += other.instructions;
        self.events += other.events;
        self.l1_reads += other.l1_reads;
        self.l1_writes += other.l1_writes;
        self.l1_read_misses += other.l1_read_misses;
        self.l1_write_misses += other.l1_write_misses;
        self.l1_writebacks += other.l1_writebacks;
        self.replacement_evictions += other.replacement_evictions;
        self.expiry_evictions += other.expiry_evictions;
        self.expiry_writebacks += other.expiry_writebacks;
        self.l2_accesses += other.l2_accesses;
        self.l2_misses += other.l2_misses;
        self.l2_writebacks += other.l2_writebacks;
        self.unique_lines += other.unique_lines;
        self.single_touch_lines += other.single_touch_lines;
        self.hit_runs += other.hit_runs;
        self.write_after_write += other.write_after_write;
        self.write_gap_count += other.write_gap_count;
        self.write_gap_sum_ns += other.write_gap_sum_ns;
        if self.write_gap_histogram.len() < other.write_gap_histogram.len() {
            self.write_gap_histogram.resize(other.write_gap_histogram.len(), 0);
        }
        for (a, b) in self.write_gap_histogram.iter_mut().zip(&other.write_gap_histogram) {
            *a += b;
        }
        self.read_gap_count += other.read_gap_count;
        self.read_gap_sum_ns += other.read_gap_sum_ns;
    }
}

pub(crate) fn gap_bucket(gap_ns: f64) -> usize {
    if gap_ns < 1.0 {
        return 0;
    }
    ((gap_ns.log2() * GAP_BUCKETS_PER_OCTAVE as f64) as usize).min(GAP_BUCKETS - 1)
}

fn bucket_midpoint(bucket: usize) -> f64 {
    ((bucket as f64 + 0.5) / GAP_BUCKETS_PER_OCTAVE as f64).exp2()
}

#[derive(Clone, Copy, Debug)]
struct LineTrack<F> {
    touches: u32,
    /// Last write, or first touch until the line is written.
    origin_ns: F,
    written: bool,
}

/// Per-line reuse bookkeeping for the features that need it.
#[derive(Clone, Debug, Default)]
pub(crate) struct ReuseTracker<F> {
    lines: FxHashMap<u64, LineTrack<F>>,
}

impl<F: Scalar> ReuseTracker<F> {
    pub(crate) fn record(&mut self, line: u64, is_write: bool, now: F, stats: &mut SimStats<F>) {
        match self.lines.get_mut(&line) {
            None => {
                self.lines.insert(
                    line,
                    LineTrack {
                        touches: 1,
                        origin_ns: now,
                        written: is_write,
                    },
                );
                if !is_write {
                    stats.read_gap_count += 1;
                }
            }
            Some(t) => {
                t.touches = t.touches.saturating_add(1);
                let gap = now - t.origin_ns;
                if is_write {
                    if t.written {
                        stats.write_gap_count += 1;
                        stats.write_gap_sum_ns += gap;
                        if stats.write_gap_histogram.is_empty() {
                            stats.write_gap_histogram.resize(GAP_BUCKETS, 0);
                        }
                        stats.write_gap_histogram[gap_bucket(gap.as_f64())] += 1;
                    }
                    t.written = true;
                    t.origin_ns = now;
                } else {
                    stats.read_gap_count += 1;
                    stats.read_gap_sum_ns += gap;
                }
            }
        }
    }

    pub(crate) fn summarize(&self, stats: &mut SimStats<F>) {
        stats.unique_lines = self.lines.len() as u64;
        stats.single_touch_lines = self.lines.values().filter(|t| t.touches == 1).count() as u64;
    }

    /// Writes the line totals into `stats` and forgets every line.
    pub(crate) fn finish(&mut self, stats: &mut SimStats<F>) {
        self.summarize(stats);
        self.lines.clear();
    }
}
