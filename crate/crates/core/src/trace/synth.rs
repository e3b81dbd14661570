//! Deterministic synthetic workload generator.
//!
//! The working set is split into a small hot set and a cold tail. Cold
//! lines are rewritten by independent renewal processes whose gaps come
//! from a two-component exponential mixture with mean `reuse_gap_mean_ns`;
//! between their scheduled writes they are read at random. The hot set
//! absorbs `hot_access_fraction` of the remaining slots. Streaming
//! accesses touch a fresh line each time. Reads and writes on hot and
//! streaming slots are chosen so the overall write fraction tracks
//! `write_fraction`; when writes fall behind by more than a few events,
//! cold filler slots are diverted to hot writes (or, without a hot set, to
//! early renewals of the next due cold line).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use super::{AccessEvent, AccessKind, Workload};
use crate::error::{Error, Result};

/// Instructions per nanosecond used to convert gap targets to instruction
/// counts (2 GHz at one instruction per cycle).
pub const NOMINAL_INSTRUCTIONS_PER_NS: f64 = 2.0;

const LINE_BYTES: u64 = 64;
const WORKING_SET_BASE: u64 = 0x1000_0000;
const STREAMING_BASE: u64 = 0x4000_0000_0000;

// Mixture: 70% of gaps short (0.5x mean), 30% long; overall mean 1x.
const SHORT_WEIGHT: f64 = 0.7;
const SHORT_SCALE: f64 = 0.5;
const LONG_SCALE: f64 = (1.0 - SHORT_WEIGHT * SHORT_SCALE) / (1.0 - SHORT_WEIGHT);

// Write deficit at which cold filler slots are diverted to writes.
const WRITE_SLACK: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Hot plus cold lines.
    pub working_set_lines: u64,
    /// Lines of the working set that form the hot set.
    pub hot_lines: u64,
    /// Share of non-streaming, non-scheduled slots sent to the hot set.
    pub hot_access_fraction: f64,
    pub write_fraction: f64,
    /// Mean time between successive writes to the same cold line.
    pub reuse_gap_mean_ns: f64,
    /// Share of events that touch a never-reused line.
    pub streaming_fraction: f64,
    pub event_count: u64,
    pub instr_per_event_mean: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            working_set_lines: 256,
            hot_lines: 16,
            hot_access_fraction: 0.5,
            write_fraction: 0.3,
            reuse_gap_mean_ns: 20_000.0,
            streaming_fraction: 0.02,
            event_count: 100_000,
            instr_per_event_mean: 4.0,
            seed: 1,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        for (name, v) in [
            ("hot_access_fraction", self.hot_access_fraction),
            ("write_fraction", self.write_fraction),
            ("streaming_fraction", self.streaming_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0,1], got {v}"));
            }
        }
        if self.working_set_lines == 0 {
            return bad("working_set_lines must be >= 1".into());
        }
        if self.hot_lines > self.working_set_lines {
            return bad(format!(
                "hot_lines ({}) exceeds working_set_lines ({})",
                self.hot_lines, self.working_set_lines
            ));
        }
        if self.event_count == 0 {
            return bad("event_count must be >= 1".into());
        }
        if !(self.instr_per_event_mean >= 1.0 && self.instr_per_event_mean.is_finite()) {
            return bad(format!(
                "instr_per_event_mean must be >= 1, got {}",
                self.instr_per_event_mean
            ));
        }
        if !(self.reuse_gap_mean_ns > 0.0 && self.reuse_gap_mean_ns.is_finite()) {
            return bad(format!(
                "reuse_gap_mean_ns must be positive, got {}",
                self.reuse_gap_mean_ns
            ));
        }
        Ok(())
    }

    pub fn cold_lines(&self) -> u64 {
        self.working_set_lines - self.hot_lines
    }
}

fn line_address(line: u64, offset: u64) -> u64 {
    WORKING_SET_BASE + line * LINE_BYTES + offset
}

pub fn generate_synthetic(params: &SyntheticParams) -> Result<Workload> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mean_gap_instr = params.reuse_gap_mean_ns * NOMINAL_INSTRUCTIONS_PER_NS;
    let short = Exp::new(1.0 / (mean_gap_instr * SHORT_SCALE)).expect("positive rate");
    let long = Exp::new(1.0 / (mean_gap_instr * LONG_SCALE)).expect("positive rate");
    let draw_gap = |rng: &mut ChaCha8Rng| -> u64 {
        let g = if rng.random::<f64>() < SHORT_WEIGHT {
            short.sample(rng)
        } else {
            long.sample(rng)
        };
        (g.round() as u64).max(1)
    };
    let geometric =
        Geometric::new(1.0 / params.instr_per_event_mean).expect("probability in (0,1]");

    let hot = params.hot_lines;
    let cold = params.cold_lines();

    // Min-heap of (due instruction, cold line).
    let mut due: BinaryHeap<Reverse<(u64, u64)>> = BinaryHeap::new();
    if params.write_fraction > 0.0 {
        for line in hot..hot + cold {
            let first = draw_gap(&mut rng);
            let start = rng.random_range(0..=first);
            due.push(Reverse((start, line)));
        }
    }

    let mut events = Vec::with_capacity(params.event_count as usize);
    let mut now = 0u64;
    let mut writes = 0u64;
    let mut next_stream = 0u64;

    for n in 0..params.event_count {
        let gap = geometric.sample(&mut rng);
        now += gap + 1;
        let offset = rng.random_range(0..LINE_BYTES / 8) * 8;

        let balance_kind = |writes: u64| {
            if params.write_fraction > 0.0 && (writes as f64) < params.write_fraction * (n + 1) as f64
            {
                AccessKind::Write
            } else {
                AccessKind::Read
            }
        };

        let lagging = |writes: u64, n: u64| {
            (writes as f64) + WRITE_SLACK < params.write_fraction * (n + 1) as f64
        };

        let (kind, address) = if rng.random::<f64>() < params.streaming_fraction {
            let addr = STREAMING_BASE + next_stream * LINE_BYTES + offset;
            next_stream += 1;
            (balance_kind(writes), addr)
        } else if matches!(due.peek(), Some(Reverse((t, _))) if *t <= now) {
            let Reverse((_, line)) = due.pop().expect("peeked");
            due.push(Reverse((now + draw_gap(&mut rng), line)));
            (AccessKind::Write, line_address(line, offset))
        } else if hot > 0
            && (cold == 0
                || lagging(writes, n)
                || rng.random::<f64>() < params.hot_access_fraction)
        {
            let line = rng.random_range(0..hot);
            (balance_kind(writes), line_address(line, offset))
        } else if lagging(writes, n) && !due.is_empty() {
            // No hot set to absorb the deficit: renew the next cold line early.
            let Reverse((_, line)) = due.pop().expect("non-empty");
            due.push(Reverse((now + draw_gap(&mut rng), line)));
            (AccessKind::Write, line_address(line, offset))
        } else {
            let line = hot + rng.random_range(0..cold);
            (AccessKind::Read, line_address(line, offset))
        };

        if kind.is_write() {
            writes += 1;
        }
        events.push(AccessEvent {
            instr_gap: gap,
            kind,
            address,
            core: 0,
        });
    }

    Ok(Workload::single(format!("synthetic-{}", params.seed), events))
}

/// Shape of the built-in desk-scale corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub workloads: usize,
    pub phases_per_workload: usize,
    /// Target instructions per phase.
    pub phase_instructions: u64,
    /// Range of mean write-reuse gaps, drawn log-uniformly per phase.
    pub min_gap_ns: f64,
    pub max_gap_ns: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            workloads: 40,
            phases_per_workload: 2,
            phase_instructions: 5_000_000,
            min_gap_ns: 5_000.0,
            max_gap_ns: 2_000_000.0,
            seed: 2024,
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Generator parameters for every phase of every corpus workload.
pub fn corpus_params(spec: &CorpusSpec) -> Result<Vec<Vec<SyntheticParams>>> {
    if spec.workloads == 0 || spec.phases_per_workload == 0 || spec.phase_instructions == 0 {
        return Err(Error::InvalidParams("corpus needs workloads, phases and instructions".into()));
    }
    if !(spec.min_gap_ns > 0.0 && spec.min_gap_ns <= spec.max_gap_ns && spec.max_gap_ns.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "bad gap range {}..{}",
            spec.min_gap_ns, spec.max_gap_ns
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.workloads);
    for _ in 0..spec.workloads {
        let mut phases = Vec::with_capacity(spec.phases_per_workload);
        for _ in 0..spec.phases_per_workload {
            let hot_lines = rng.random_range(8..=48);
            let cold = rng.random_range(96..=400);
            let instr_per_event_mean = rng.random_range(3.0..6.0);
            phases.push(SyntheticParams {
                working_set_lines: hot_lines + cold,
                hot_lines,
                hot_access_fraction: rng.random_range(0.3..0.8),
                write_fraction: rng.random_range(0.1..0.4),
                reuse_gap_mean_ns: log_uniform(&mut rng, spec.min_gap_ns, spec.max_gap_ns),
                streaming_fraction: rng.random_range(0.0..0.04),
                event_count: (spec.phase_instructions as f64 / instr_per_event_mean).ceil() as u64,
                instr_per_event_mean,
                seed: rng.random(),
            });
        }
        out.push(phases);
    }
    Ok(out)
}

/// Deterministic multi-phase synthetic corpus named `desk-00`, `desk-01`, ...
pub fn desk_corpus(spec: &CorpusSpec) -> Result<Vec<Workload>> {
    let params = corpus_params(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
    let width = params.len().saturating_sub(1).to_string().len().max(2);
    params
        .iter()
        .enumerate()
        .map(|(i, phases)| {
            let mut out = Vec::with_capacity(phases.len());
            for (j, p) in phases.iter().enumerate() {
                let mut phase = generate_synthetic(p)?.phases.remove(0);
                phase.id = format!("p{j}");
                phase.weight = rng.random_range(0.5..1.5);
                out.push(phase);
            }
            let mut w = Workload::new(format!("desk-{i:0width$}"), out);
            w.normalize_weights();
            Ok(w)
        })
        .collect()
}
