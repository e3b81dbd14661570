use super::exhaustive::argmin;
use super::{require_single_core, PhaseDecision, PolicyConfig, PolicyResult, Segment};
use crate::cachesim::Simulator;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::trace::Workload;

/// Per phase: run one profiling window on each unit in retention-set
/// order, then finish the phase on the unit with the best objective per
/// instruction. A decision is charged one migration per unit in the set
/// (none when the set has a single unit), whatever the transitions were.
pub fn run_lars_sampling<F: Scalar>(workload: &Workload, config: &PolicyConfig<F>) -> Result<PolicyResult<F>> {
    config.validate()?;
    require_single_core(workload)?;
    let pl = &config.platform;
    let n = config.retention_set.len();
    let objective = config.objective;
    let mut phases = Vec::with_capacity(workload.phases.len());
    for phase in &workload.phases {
        let mut sim = Simulator::new(pl.l1, pl.l2, config.retention_set[0].clone(), pl.monitor, pl.timing.clone())?;
        let mut current = 0;
        let mut segments = Vec::new();
        let mut rates = Vec::with_capacity(n);
        let mut events = phase.events.iter();
        for unit in 0..n {
            if unit != current {
                sim.core.switch_profile(config.retention_set[unit].clone())?;
                current = unit;
            }
            for e in events.by_ref() {
                sim.step(e);
                if sim.core.stats().instructions >= config.profiling_window {
                    break;
                }
            }
            let seg = Segment::from_stats(unit, &sim.core.take_stats(), config);
            rates.push((seg.instructions > 0).then(|| seg.rate(objective)));
            segments.push(seg);
        }
        let chosen = argmin(&rates.iter().map(|r| r.unwrap_or(F::infinity())).collect::<Vec<_>>());
        if chosen != current {
            sim.core.switch_profile(config.retention_set[chosen].clone())?;
            current = chosen;
        }
        sim.run(events.as_slice());
        sim.retire(phase.trailing_gap);
        sim.core.settle(&mut sim.l2);
        segments.push(Segment::from_stats(current, &sim.core.take_stats(), config));
        segments.retain(|s| s.instructions > 0);

        // The sampling walk plus the move to the chosen unit.
        let moves: Vec<(usize, usize)> = if n > 1 {
            (0..n - 1).map(|i| (i, i + 1)).chain([(n - 1, chosen)]).collect()
        } else {
            Vec::new()
        };
        let overhead = config.overhead(0, &moves);
        let mut d = PhaseDecision::assemble(phase.id.clone(), phase.weight, chosen, segments, overhead);
        d.migrations = moves.len() as u64;
        d.sampled_rates = rates;
        phases.push(d);
    }
    Ok(PolicyResult::from_phases("lars", workload, config, phases))
}
