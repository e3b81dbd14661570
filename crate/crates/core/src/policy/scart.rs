use super::{require_single_core, PhaseDecision, Platform, PolicyConfig, PolicyResult, Segment};
use crate::cachesim::{Core, L2Cache, RetentionProfile, SimStats};
use crate::error::{Error, Result};
use crate::features::extract;
use crate::learn::KnnModel;
use crate::scalar::Scalar;
use crate::trace::{AccessEvent, PhaseTrace, Workload};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Profiling,
    Feedback,
    Settled,
}

/// One core's SCART decision over one phase.
struct ScartPhase<'a, F> {
    config: &'a PolicyConfig<F>,
    /// `None` pins the core to its starting unit.
    model: Option<&'a KnnModel<F>>,
    core: Core<F>,
    current: usize,
    stage: Stage,
    segments: Vec<Segment<F>>,
    base_rate: F,
    predicted: Option<usize>,
    moves: Vec<(usize, usize)>,
    feedback_delta: Option<F>,
    reverted: bool,
    address_offset: u64,
}

impl<'a, F: Scalar> ScartPhase<'a, F> {
    fn new(config: &'a PolicyConfig<F>, model: Option<&'a KnnModel<F>>, start: usize) -> Result<Self> {
        let pl = &config.platform;
        let mut core = Core::new(pl.l1, config.retention_set[start].clone(), pl.monitor, pl.timing.clone())?;
        core.set_tracking(model.is_some());
        Ok(Self {
            config,
            model,
            core,
            current: start,
            stage: if model.is_some() { Stage::Profiling } else { Stage::Settled },
            segments: Vec::new(),
            base_rate: F::zero(),
            predicted: None,
            moves: Vec::new(),
            feedback_delta: None,
            reverted: false,
            address_offset: 0,
        })
    }

    fn migrate(&mut self, to: usize) -> Result<()> {
        self.core.switch_profile(self.config.retention_set[to].clone())?;
        self.moves.push((self.current, to));
        self.current = to;
        Ok(())
    }

    fn step(&mut self, event: &AccessEvent, l2: &mut L2Cache) -> Result<()> {
        if self.address_offset == 0 {
            self.core.step(event, l2);
        } else {
            self.core.step(&in_space(event, self.address_offset), l2);
        }
        let objective = self.config.objective;
        match self.stage {
            Stage::Profiling if self.core.stats().instructions >= self.config.profiling_window => {
                let Some(model) = self.model else { return Ok(()) };
                let window = self.core.snapshot_stats();
                self.core.set_tracking(false);
                let seg = Segment::from_stats(self.current, &window, self.config);
                self.base_rate = seg.rate(objective);
                let label = model.predict(&extract(&window, &model.catalog)?)?;
                if label >= self.config.retention_set.len() {
                    return Err(Error::Schema(format!(
                        "model predicted class {label}, retention set has {}",
                        self.config.retention_set.len()
                    )));
                }
                self.predicted = Some(label);
                if label == self.config.base {
                    self.stage = Stage::Settled;
                } else {
                    self.core.take_stats();
                    self.segments.push(seg);
                    self.migrate(label)?;
                    self.stage = Stage::Feedback;
                }
            }
            Stage::Feedback if self.core.stats().instructions >= self.config.feedback_window => {
                let window = self.core.snapshot_stats();
                let seg = Segment::from_stats(self.current, &window, self.config);
                let instr = F::from_count(seg.instructions);
                self.feedback_delta = Some(seg.objective(objective) - self.base_rate * instr);
                let slack = F::one() + F::lit(self.config.feedback_epsilon);
                if seg.rate(objective) > self.base_rate * slack {
                    self.core.take_stats();
                    self.segments.push(seg);
                    self.migrate(self.config.base)?;
                    self.reverted = true;
                }
                self.stage = Stage::Settled;
            }
            _ => {}
        }
        Ok(())
    }

    fn finish(mut self, phase: &PhaseTrace, l2: &mut L2Cache) -> PhaseDecision<F> {
        self.core.retire(phase.trailing_gap, l2);
        self.core.settle(l2);
        let rest = self.core.take_stats();
        self.segments.push(Segment::from_stats(self.current, &rest, self.config));
        let predictions = u64::from(self.predicted.is_some());
        let overhead = self.config.overhead(predictions, &self.moves);
        let mut d = PhaseDecision::assemble(phase.id.clone(), phase.weight, self.current, self.segments, overhead);
        d.predicted = self.predicted;
        d.migrations = self.moves.len() as u64;
        d.reverted = self.reverted;
        d.feedback_delta = self.feedback_delta;
        d
    }
}

/// Co-running programs have disjoint physical address spaces; the shift
/// keeps set indices unchanged for any power-of-two set count up to 2^42.
pub const CORE_SPACE_SHIFT: u32 = 48;

fn in_space(event: &AccessEvent, offset: u64) -> AccessEvent {
    AccessEvent {
        address: event.address.wrapping_add(offset),
        ..*event
    }
}

fn space_offset(core: usize) -> u64 {
    (core as u64) << CORE_SPACE_SHIFT
}

fn check_model<F: Scalar>(model: &KnnModel<F>, config: &PolicyConfig<F>) -> Result<()> {
    config.validate()?;
    config.catalog.check_version(&model.catalog.version)?;
    if model.catalog != config.catalog {
        return Err(Error::CatalogMismatch {
            expected: config.catalog.version.clone(),
            found: format!("{} (different feature list)", model.catalog.version),
        });
    }
    if !model.classes.is_empty() && model.classes != config.class_names() {
        return Err(Error::Schema(format!(
            "model classes {:?} differ from the retention set {:?}",
            model.classes,
            config.class_names()
        )));
    }
    Ok(())
}

/// Per phase: profile on the base unit, predict, migrate, check one
/// feedback window against the base rate and revert if worse by more than
/// epsilon. Each phase starts from cold caches.
pub fn run_scart<F: Scalar>(
    workload: &Workload,
    model: &KnnModel<F>,
    config: &PolicyConfig<F>,
) -> Result<PolicyResult<F>> {
    check_model(model, config)?;
    require_single_core(workload)?;
    let pl = &config.platform;
    let mut phases = Vec::with_capacity(workload.phases.len());
    for phase in &workload.phases {
        let mut l2 = L2Cache::new(pl.l2);
        let mut run = ScartPhase::new(config, Some(model), config.base)?;
        for e in &phase.events {
            run.step(e, &mut l2)?;
        }
        phases.push(run.finish(phase, &mut l2));
    }
    Ok(PolicyResult::from_phases("scart", workload, config, phases))
}

/// SCART on several cores with private L1s and one shared L2. Phase `j`
/// of every workload runs together, events issued round-robin across cores
/// (a core that runs out simply drops out of the rotation).
pub fn run_multiprogrammed<F: Scalar>(
    workloads: &[Workload],
    model: &KnnModel<F>,
    config: &PolicyConfig<F>,
) -> Result<Vec<PolicyResult<F>>> {
    check_model(model, config)?;
    corun(workloads, Some(model), config.base, config, "scart-mp")
}

/// The co-run of [`run_multiprogrammed`] with every core pinned to
/// `retention_set[profile]`: the multi-programmed static baseline.
pub fn run_multiprogrammed_static<F: Scalar>(
    workloads: &[Workload],
    profile: usize,
    config: &PolicyConfig<F>,
) -> Result<Vec<PolicyResult<F>>> {
    config.validate()?;
    let name = config
        .retention_set
        .get(profile)
        .ok_or_else(|| Error::InvalidParams(format!("no profile at index {profile}")))?
        .name
        .clone();
    corun(workloads, None, profile, config, &format!("static-mp:{name}"))
}

fn corun<F: Scalar>(
    workloads: &[Workload],
    model: Option<&KnnModel<F>>,
    start: usize,
    config: &PolicyConfig<F>,
    policy: &str,
) -> Result<Vec<PolicyResult<F>>> {
    if workloads.is_empty() {
        return Err(Error::InvalidParams("no workloads to co-run".into()));
    }
    for w in workloads {
        require_single_core(w)?;
    }
    let n_phases = workloads.iter().map(|w| w.phases.len()).max().unwrap_or(0);
    let mut per_core: Vec<Vec<PhaseDecision<F>>> = vec![Vec::new(); workloads.len()];
    for j in 0..n_phases {
        let mut l2 = L2Cache::new(config.platform.l2);
        let mut runs: Vec<Option<(ScartPhase<F>, &PhaseTrace)>> = workloads
            .iter()
            .enumerate()
            .map(|(c, w)| {
                w.phases.get(j).map(|p| {
                    ScartPhase::new(config, model, start).map(|mut r| {
                        r.address_offset = space_offset(c);
                        (r, p)
                    })
                })
            })
            .map(Option::transpose)
            .collect::<Result<_>>()?;
        let longest = runs.iter().flatten().map(|(_, p)| p.events.len()).max().unwrap_or(0);
        for i in 0..longest {
            for (run, phase) in runs.iter_mut().flatten() {
                if let Some(e) = phase.events.get(i) {
                    run.step(e, &mut l2)?;
                }
            }
        }
        for (c, slot) in runs.iter_mut().enumerate() {
            if let Some((run, phase)) = slot.take() {
                per_core[c].push(run.finish(phase, &mut l2));
            }
        }
    }
    Ok(workloads
        .iter()
        .zip(per_core)
        .map(|(w, phases)| PolicyResult::from_phases(policy, w, config, phases))
        .collect())
}

/// Runs the workloads side by side on one profile with private L1s and a
/// shared L2, returning each core's counters summed over phases.
pub fn corun_static<F: Scalar>(
    workloads: &[Workload],
    profile: &RetentionProfile<F>,
    platform: &Platform<F>,
) -> Result<Vec<SimStats<F>>> {
    platform.validate()?;
    for w in workloads {
        require_single_core(w)?;
    }
    let mut totals = vec![SimStats::default(); workloads.len()];
    let n_phases = workloads.iter().map(|w| w.phases.len()).max().unwrap_or(0);
    for j in 0..n_phases {
        let mut l2 = L2Cache::new(platform.l2);
        let mut cores = workloads
            .iter()
            .map(|_| Core::new(platform.l1, profile.clone(), platform.monitor, platform.timing.clone()))
            .collect::<Result<Vec<_>>>()?;
        let phases: Vec<Option<&PhaseTrace>> = workloads.iter().map(|w| w.phases.get(j)).collect();
        let longest = phases.iter().flatten().map(|p| p.events.len()).max().unwrap_or(0);
        for i in 0..longest {
            for (c, (core, phase)) in cores.iter_mut().zip(&phases).enumerate() {
                if let Some(e) = phase.and_then(|p| p.events.get(i)) {
                    core.step(&in_space(e, space_offset(c)), &mut l2);
                }
            }
        }
        for ((core, phase), total) in cores.iter_mut().zip(&phases).zip(totals.iter_mut()) {
            if let Some(p) = phase {
                core.retire(p.trailing_gap, &mut l2);
                core.settle(&mut l2);
                total.accumulate(&core.take_stats());
            }
        }
    }
    for t in &mut totals {
        t.cycles = platform.timing.cycles(&t.timing_counters(), platform.timing.write_stall_cycles(profile));
        t.sim_time_ns = platform.timing.cycles_to_ns(t.cycles);
    }
    Ok(totals)
}
