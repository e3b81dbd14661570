use super::stats::ReuseTracker;
use super::{AgingClock, CacheGeometry, L1Cache, L2Cache, MonitorConfig, PhaseStats, RetentionProfile, SimStats};
use crate::energy::{TimingCounters, TimingParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trace::{AccessEvent, PhaseTrace, Workload};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AccessOutcome<F> {
    pub hit: bool,
    /// At least one block of the indexed set expired before the lookup.
    pub expiry_triggered: bool,
    pub expiry_evictions: u32,
    /// A dirty block (expired or replaced) was written to L2.
    pub writeback_issued: bool,
    /// Cycles beyond the base CPI charged to this access.
    pub stall_cycles: F,
    pub hit_age_ns: Option<F>,
}

/// One core's private L1 plus its clock and counters. The L2 is passed in
/// so that several cores can share one.
#[derive(Clone, Debug)]
pub struct Core<F> {
    l1: L1Cache<F>,
    profile: RetentionProfile<F>,
    monitor: MonitorConfig,
    timing: TimingParams<F>,
    write_stall: F,
    stats: SimStats<F>,
    /// Cycles of segments closed since the current stats window began.
    window_closed_cycles: F,
    /// Cycles of all closed segments.
    closed_cycles: F,
    /// Counters since the last profile switch or window boundary.
    segment: TimingCounters,
    total_instructions: u64,
    tracker: Option<ReuseTracker<F>>,
    next_sweep_ns: F,
    prev_write: bool,
    in_hit_run: bool,
    writebacks: Vec<u64>,
}

impl<F: Scalar> Core<F> {
    pub fn new(
        geometry: CacheGeometry,
        profile: RetentionProfile<F>,
        monitor: MonitorConfig,
        timing: TimingParams<F>,
    ) -> Result<Self> {
        geometry.validate()?;
        profile.validate()?;
        monitor.validate()?;
        timing.validate()?;
        let mut core = Self {
            l1: L1Cache::new(geometry, &monitor, profile.retention_time_ns),
            write_stall: timing.write_stall_cycles(&profile),
            profile,
            monitor,
            timing,
            stats: SimStats::default(),
            window_closed_cycles: F::zero(),
            closed_cycles: F::zero(),
            segment: TimingCounters::default(),
            total_instructions: 0,
            tracker: None,
            next_sweep_ns: F::zero(),
            prev_write: false,
            in_hit_run: false,
            writebacks: Vec::new(),
        };
        core.schedule_sweep(F::zero());
        Ok(core)
    }

    pub fn profile(&self) -> &RetentionProfile<F> {
        &self.profile
    }

    pub fn timing(&self) -> &TimingParams<F> {
        &self.timing
    }

    pub fn l1(&self) -> &L1Cache<F> {
        &self.l1
    }

    /// Counters of the current window. `cycles`, `sim_time_ns` and the
    /// line totals are filled in by [`Core::take_stats`].
    pub fn stats(&self) -> &SimStats<F> {
        &self.stats
    }

    pub fn total_instructions(&self) -> u64 {
        self.total_instructions
    }

    /// Enables the per-line bookkeeping behind the reuse-gap and footprint
    /// counters.
    pub fn set_tracking(&mut self, on: bool) {
        if on && self.tracker.is_none() {
            self.tracker = Some(ReuseTracker::default());
        } else if !on {
            self.tracker = None;
        }
    }

    pub fn total_cycles(&self) -> F {
        self.closed_cycles + self.timing.cycles(&self.segment, self.write_stall)
    }

    /// Current time on the aging clock.
    pub fn now_ns(&self) -> F {
        match self.monitor.aging_clock {
            AgingClock::SimulatedTime => self.timing.cycles_to_ns(self.total_cycles()),
            AgingClock::NominalTime => self.timing.cycles_to_ns(F::from_count(self.total_instructions)),
        }
    }

    fn schedule_sweep(&mut self, now: F) {
        let t = self.profile.retention_time_ns;
        self.next_sweep_ns = if t.is_finite() {
            let q = self.monitor.quantum_ns(t);
            ((now / q).floor() + F::one()) * q
        } else {
            F::infinity()
        };
    }

    fn add_instructions(&mut self, n: u64) {
        self.stats.instructions += n;
        self.segment.instructions += n;
        self.total_instructions += n;
    }

    fn sweep_if_due(&mut self, now: F, l2: &mut L2Cache) {
        if now >= self.next_sweep_ns {
            self.sweep_expired(now, l2);
            self.schedule_sweep(now);
        }
    }

    /// Retires the event's instructions, then performs its access at the
    /// resulting time.
    pub fn step(&mut self, event: &AccessEvent, l2: &mut L2Cache) -> AccessOutcome<F> {
        self.add_instructions(event.instructions());
        let now = self.now_ns();
        self.sweep_if_due(now, l2);
        self.access(event, now, l2)
    }

    /// Performs one L1 access at `now` without retiring instructions.
    pub fn access(&mut self, event: &AccessEvent, now: F, l2: &mut L2Cache) -> AccessOutcome<F> {
        let is_write = event.kind.is_write();
        let line = self.l1.line_of(event.address);
        if let Some(t) = self.tracker.as_mut() {
            t.record(line, is_write, now, &mut self.stats);
        }
        self.writebacks.clear();
        let r = self.l1.access(line, is_write, now, &mut self.writebacks);

        let s = &mut self.stats;
        s.events += 1;
        if is_write {
            s.l1_writes += 1;
            self.segment.l1_writes += 1;
            if self.prev_write {
                s.write_after_write += 1;
            }
        } else {
            s.l1_reads += 1;
        }
        self.prev_write = is_write;
        if r.hit && !self.in_hit_run {
            s.hit_runs += 1;
        }
        self.in_hit_run = r.hit;
        s.expiry_evictions += r.expiry_evictions as u64;
        s.expiry_writebacks += r.expiry_writebacks as u64;
        if r.replacement_eviction {
            s.replacement_evictions += 1;
        }
        if r.replacement_writeback {
            s.l1_writebacks += 1;
        }

        let mut stall = if is_write { self.write_stall } else { F::zero() };
        if !r.hit {
            if is_write {
                s.l1_write_misses += 1;
            } else {
                s.l1_read_misses += 1;
            }
            self.segment.l1_misses += 1;
            stall += self.timing.l2_hit_penalty_cycles;
            s.l2_accesses += 1;
            let fill = l2.access(line, false);
            if !fill.hit {
                s.l2_misses += 1;
                self.segment.l2_misses += 1;
                stall += self.timing.memory_penalty_cycles;
            }
            if fill.writeback {
                s.l2_writebacks += 1;
            }
        }
        for &wb in &self.writebacks {
            s.l2_accesses += 1;
            if l2.access(wb, true).writeback {
                s.l2_writebacks += 1;
            }
        }

        AccessOutcome {
            hit: r.hit,
            expiry_triggered: r.expiry_evictions > 0,
            expiry_evictions: r.expiry_evictions,
            writeback_issued: !self.writebacks.is_empty(),
            stall_cycles: stall,
            hit_age_ns: r.hit_age_ns,
        }
    }

    /// Invalidates all blocks expired at `now`, writing dirty ones to L2.
    pub fn sweep_expired(&mut self, now: F, l2: &mut L2Cache) -> u32 {
        self.writebacks.clear();
        let (evicted, written) = self.l1.sweep(now, &mut self.writebacks);
        self.stats.expiry_evictions += evicted as u64;
        self.stats.expiry_writebacks += written as u64;
        for &wb in &self.writebacks {
            self.stats.l2_accesses += 1;
            if l2.access(wb, true).writeback {
                self.stats.l2_writebacks += 1;
            }
        }
        evicted
    }

    /// Retires `n` instructions that make no memory access.
    pub fn retire(&mut self, n: u64, l2: &mut L2Cache) {
        if n == 0 {
            return;
        }
        self.add_instructions(n);
        let now = self.now_ns();
        self.sweep_if_due(now, l2);
    }

    /// Sweeps at the current time so expiries up to now are counted.
    pub fn settle(&mut self, l2: &mut L2Cache) {
        let now = self.now_ns();
        self.sweep_expired(now, l2);
    }

    fn close_segment(&mut self) {
        let c = self.timing.cycles(&self.segment, self.write_stall);
        self.closed_cycles += c;
        self.window_closed_cycles += c;
        self.segment = TimingCounters::default();
    }

    /// Moves execution to another retention profile, carrying the L1
    /// contents over (every resident block is rewritten now).
    pub fn switch_profile(&mut self, profile: RetentionProfile<F>) -> Result<()> {
        profile.validate()?;
        let now = self.now_ns();
        self.close_segment();
        self.l1.migrate(&self.monitor, profile.retention_time_ns, now);
        self.write_stall = self.timing.write_stall_cycles(&profile);
        self.profile = profile;
        self.schedule_sweep(now);
        Ok(())
    }

    /// Current window's counters with `cycles`, `sim_time_ns` and line
    /// totals filled in, without ending the window.
    pub fn snapshot_stats(&self) -> SimStats<F> {
        let cycles = self.window_closed_cycles + self.timing.cycles(&self.segment, self.write_stall);
        let mut s = self.stats.clone();
        if let Some(t) = self.tracker.as_ref() {
            t.summarize(&mut s);
        }
        s.cycles = cycles;
        s.sim_time_ns = self.timing.cycles_to_ns(cycles);
        s
    }

    /// Ends the current stats window and returns its counters with
    /// `cycles` and `sim_time_ns` filled in.
    pub fn take_stats(&mut self) -> SimStats<F> {
        let cycles = self.window_closed_cycles + self.timing.cycles(&self.segment, self.write_stall);
        self.close_segment();
        self.window_closed_cycles = F::zero();
        let mut s = std::mem::take(&mut self.stats);
        if let Some(t) = self.tracker.as_mut() {
            t.finish(&mut s);
        }
        s.cycles = cycles;
        s.sim_time_ns = self.timing.cycles_to_ns(cycles);
        self.in_hit_run = false;
        self.prev_write = false;
        s
    }
}

/// A single core with its own L2.
#[derive(Clone, Debug)]
pub struct Simulator<F> {
    pub core: Core<F>,
    pub l2: L2Cache,
}

impl<F: Scalar> Simulator<F> {
    pub fn new(
        l1: CacheGeometry,
        l2: CacheGeometry,
        profile: RetentionProfile<F>,
        monitor: MonitorConfig,
        timing: TimingParams<F>,
    ) -> Result<Self> {
        l2.validate()?;
        if l2.line_bytes != l1.line_bytes {
            return Err(Error::InvalidConfig(format!(
                "L1 and L2 line sizes differ ({} vs {})",
                l1.line_bytes, l2.line_bytes
            )));
        }
        Ok(Self {
            core: Core::new(l1, profile, monitor, timing)?,
            l2: L2Cache::new(l2),
        })
    }

    pub fn step(&mut self, event: &AccessEvent) -> AccessOutcome<F> {
        self.core.step(event, &mut self.l2)
    }

    pub fn run(&mut self, events: &[AccessEvent]) {
        for e in events {
            self.core.step(e, &mut self.l2);
        }
    }

    pub fn retire(&mut self, n: u64) {
        self.core.retire(n, &mut self.l2);
    }

    pub fn sweep_expired(&mut self, now: F) -> u32 {
        self.core.sweep_expired(now, &mut self.l2)
    }

    /// Runs a whole phase and returns its stats, expiries up to the end
    /// included.
    pub fn run_phase(&mut self, phase: &PhaseTrace) -> SimStats<F> {
        self.run(&phase.events);
        self.retire(phase.trailing_gap);
        self.core.settle(&mut self.l2);
        self.core.take_stats()
    }
}

/// Simulates a single-core workload with the default L2. Every phase starts
/// from cold caches; the totals add the phase counters and recompute
/// cycles from them.
pub fn simulate<F: Scalar>(
    workload: &Workload,
    geometry: &CacheGeometry,
    profile: &RetentionProfile<F>,
    monitor: &MonitorConfig,
    timing: &TimingParams<F>,
) -> Result<SimStats<F>> {
    simulate_with_l2(workload, geometry, &CacheGeometry::l2_default(), profile, monitor, timing)
}

pub fn simulate_with_l2<F: Scalar>(
    workload: &Workload,
    l1: &CacheGeometry,
    l2: &CacheGeometry,
    profile: &RetentionProfile<F>,
    monitor: &MonitorConfig,
    timing: &TimingParams<F>,
) -> Result<SimStats<F>> {
    if !workload.is_single_core() {
        return Err(Error::InvalidParams(format!(
            "workload `{}` spans {} cores; simulate takes one",
            workload.name,
            workload.core_count()
        )));
    }
    let mut total = SimStats::default();
    for phase in &workload.phases {
        let mut sim = Simulator::new(*l1, *l2, profile.clone(), *monitor, timing.clone())?;
        sim.core.set_tracking(true);
        let stats = sim.run_phase(phase);
        total.accumulate(&stats);
        total.phases.push(PhaseStats {
            id: phase.id.clone(),
            weight: phase.weight,
            stats,
        });
    }
    total.cycles = timing.cycles(&total.timing_counters(), timing.write_stall_cycles(profile));
    total.sim_time_ns = timing.cycles_to_ns(total.cycles);
    Ok(total)
}
