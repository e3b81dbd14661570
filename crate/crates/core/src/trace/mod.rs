//! Phase-annotated memory traces: the simulator's input.
//!
//! A [`Workload`] is a list of phases. Each phase carries a weight and an
//! ordered list of [`AccessEvent`]s. Events record how many non-memory
//! instructions retired since the previous memory event, so a phase's
//! instruction count is `sum(instr_gap + 1) + trailing_gap`.

mod format;
mod synth;

pub use format::{parse_trace, parse_trace_str, write_trace, write_trace_string};
pub use synth::{
    corpus_params, desk_corpus, generate_synthetic, CorpusSpec, SyntheticParams, NOMINAL_INSTRUCTIONS_PER_NS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    pub fn is_write(self) -> bool {
        self == AccessKind::Write
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessEvent {
    /// Non-memory instructions retired since the previous memory event.
    pub instr_gap: u64,
    pub kind: AccessKind,
    pub address: u64,
    pub core: u32,
}

impl AccessEvent {
    pub fn new(instr_gap: u64, kind: AccessKind, address: u64) -> Self {
        Self {
            instr_gap,
            kind,
            address,
            core: 0,
        }
    }

    pub fn read(instr_gap: u64, address: u64) -> Self {
        Self::new(instr_gap, AccessKind::Read, address)
    }

    pub fn write(instr_gap: u64, address: u64) -> Self {
        Self::new(instr_gap, AccessKind::Write, address)
    }

    /// Instructions this event accounts for, including the memory instruction itself.
    pub fn instructions(&self) -> u64 {
        self.instr_gap + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub id: String,
    pub weight: f64,
    pub events: Vec<AccessEvent>,
    /// Instructions retired after the last memory event.
    pub trailing_gap: u64,
}

impl PhaseTrace {
    pub fn new(id: impl Into<String>, weight: f64, events: Vec<AccessEvent>) -> Self {
        Self {
            id: id.into(),
            weight,
            events,
            trailing_gap: 0,
        }
    }

    pub fn instruction_count(&self) -> u64 {
        self.events.iter().map(AccessEvent::instructions).sum::<u64>() + self.trailing_gap
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub phases: Vec<PhaseTrace>,
}

impl Workload {
    pub fn new(name: impl Into<String>, phases: Vec<PhaseTrace>) -> Self {
        Self {
            name: name.into(),
            phases,
        }
    }

    /// One phase of weight 1 holding `events`.
    pub fn single(name: impl Into<String>, events: Vec<AccessEvent>) -> Self {
        Self::new(name, vec![PhaseTrace::new("p0", 1.0, events)])
    }

    pub fn event_count(&self) -> usize {
        self.phases.iter().map(|p| p.events.len()).sum()
    }

    pub fn instruction_count(&self) -> u64 {
        self.phases.iter().map(PhaseTrace::instruction_count).sum()
    }

    pub fn is_single_core(&self) -> bool {
        self.phases
            .iter()
            .all(|p| p.events.iter().all(|e| e.core == 0))
    }

    /// Number of cores referenced by events (at least 1).
    pub fn core_count(&self) -> usize {
        self.phases
            .iter()
            .flat_map(|p| p.events.iter())
            .map(|e| e.core as usize + 1)
            .max()
            .unwrap_or(1)
    }

    pub fn weight_sum(&self) -> f64 {
        self.phases.iter().map(|p| p.weight).sum()
    }

    /// Rescales phase weights to sum to one. Returns `true` if anything changed.
    ///
    /// All-zero weights become uniform.
    pub fn normalize_weights(&mut self) -> bool {
        let sum = self.weight_sum();
        if (sum - 1.0).abs() <= 1e-9 {
            return false;
        }
        if sum <= 0.0 {
            let w = 1.0 / self.phases.len() as f64;
            self.phases.iter_mut().for_each(|p| p.weight = w);
        } else {
            self.phases.iter_mut().for_each(|p| p.weight /= sum);
        }
        true
    }

    /// Events issued by `core`, in order, across all phases, relabeled as
    /// core 0.
    pub fn project(&self, core: u32) -> Vec<AccessEvent> {
        self.phases
            .iter()
            .flat_map(|p| p.events.iter())
            .filter(|e| e.core == core)
            .map(|e| AccessEvent { core: 0, ..*e })
            .collect()
    }

    /// Splits a pre-interleaved workload into one single-core workload per core.
    pub fn split_cores(&self) -> Vec<Workload> {
        (0..self.core_count() as u32)
            .map(|core| {
                let phases = self
                    .phases
                    .iter()
                    .map(|p| PhaseTrace {
                        id: p.id.clone(),
                        weight: p.weight,
                        events: p
                            .events
                            .iter()
                            .filter(|e| e.core == core)
                            .map(|e| AccessEvent { core: 0, ..*e })
                            .collect(),
                        trailing_gap: p.trailing_gap,
                    })
                    .collect();
                Workload::new(format!("{}.core{core}", self.name), phases)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InterleavePolicy {
    #[default]
    RoundRobin,
}

/// Merges up to eight single-core workloads into one multi-core workload.
///
/// Output phase `j` holds phase `j` of every input that has one, merged
/// round-robin by event; events keep their source position as core index.
/// Phase id, weight and trailing gap come from the lowest-index input that
/// has that phase.
pub fn interleave(workloads: &[Workload], policy: InterleavePolicy) -> Result<Workload> {
    let InterleavePolicy::RoundRobin = policy;
    if workloads.is_empty() {
        return Err(Error::InvalidParams("interleave needs at least one workload".into()));
    }
    if workloads.len() > 8 {
        return Err(Error::InvalidParams(format!(
            "interleave supports at most 8 workloads, got {}",
            workloads.len()
        )));
    }
    if let Some(w) = workloads.iter().find(|w| !w.is_single_core()) {
        return Err(Error::InvalidParams(format!(
            "workload `{}` is already multi-core",
            w.name
        )));
    }

    let phase_count = workloads.iter().map(|w| w.phases.len()).max().unwrap_or(0);
    let mut phases = Vec::with_capacity(phase_count);
    for j in 0..phase_count {
        let sources: Vec<(u32, &PhaseTrace)> = workloads
            .iter()
            .enumerate()
            .filter_map(|(i, w)| w.phases.get(j).map(|p| (i as u32, p)))
            .collect();
        let head = sources[0].1;
        let total: usize = sources.iter().map(|(_, p)| p.events.len()).sum();
        let mut events = Vec::with_capacity(total);
        let mut cursor = 0;
        while events.len() < total {
            for (core, p) in &sources {
                if let Some(e) = p.events.get(cursor) {
                    events.push(AccessEvent { core: *core, ..*e });
                }
            }
            cursor += 1;
        }
        phases.push(PhaseTrace {
            id: head.id.clone(),
            weight: head.weight,
            events,
            trailing_gap: head.trailing_gap,
        });
    }

    let name = workloads
        .iter()
        .map(|w| w.name.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let mut out = Workload::new(name, phases);
    out.normalize_weights();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: u64, base: u64) -> Workload {
        Workload::single(
            "t",
            (0..n).map(|i| AccessEvent::read(i, base + i * 64)).collect(),
        )
    }

    #[test]
    fn interleave_single_is_identity() {
        let w = trace(10, 0);
        let out = interleave(std::slice::from_ref(&w), InterleavePolicy::RoundRobin).unwrap();
        assert_eq!(out.phases, w.phases);
    }

    #[test]
    fn interleave_two_single_events_alternates() {
        let a = Workload::single("a", vec![AccessEvent::read(1, 0x40)]);
        let b = Workload::single("b", vec![AccessEvent::write(2, 0x80)]);
        let out = interleave(&[a, b], InterleavePolicy::RoundRobin).unwrap();
        let ev = &out.phases[0].events;
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].core, ev[0].address), (0, 0x40));
        assert_eq!((ev[1].core, ev[1].address), (1, 0x80));
    }

    #[test]
    fn interleave_four_copies_projects_back() {
        let w = trace(25, 0x1000);
        let out = interleave(&vec![w.clone(); 4], InterleavePolicy::RoundRobin).unwrap();
        for core in 0..4 {
            assert_eq!(out.project(core), w.phases[0].events);
        }
        let split = out.split_cores();
        assert_eq!(split.len(), 4);
        assert_eq!(split[3].phases[0].events, w.phases[0].events);
    }

    #[test]
    fn interleave_uneven_lengths_preserves_order() {
        let a = trace(3, 0);
        let b = trace(7, 0x10000);
        let out = interleave(&[a.clone(), b.clone()], InterleavePolicy::RoundRobin).unwrap();
        assert_eq!(out.event_count(), 10);
        assert_eq!(out.project(0), a.phases[0].events);
        let pb: Vec<_> = out.project(1).into_iter().map(|e| AccessEvent { core: 0, ..e }).collect();
        assert_eq!(pb, b.phases[0].events);
    }

    #[test]
    fn interleave_rejects_empty_and_oversized() {
        assert!(interleave(&[], InterleavePolicy::RoundRobin).is_err());
        assert!(interleave(&vec![trace(1, 0); 9], InterleavePolicy::RoundRobin).is_err());
    }

    #[test]
    fn instruction_count_includes_memory_ops_and_tail() {
        let mut p = PhaseTrace::new("p", 1.0, vec![AccessEvent::read(5, 0), AccessEvent::read(0, 64)]);
        p.trailing_gap = 4;
        assert_eq!(p.instruction_count(), 6 + 1 + 4);
        assert!(p.instruction_count() >= p.events.len() as u64);
    }
}
