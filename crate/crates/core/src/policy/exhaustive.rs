use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_single_core, PhaseDecision, PolicyConfig, PolicyResult, Segment};
use crate::cachesim::{SimStats, Simulator};
use crate::energy::Objective;
use crate::error::{Error, Result};
use crate::features::extract;
use crate::scalar::Scalar;
use crate::trace::{PhaseTrace, Workload};

/// Objective of every profile on one phase, plus the base-unit profiling
/// window's features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PhaseTable<F> {
    pub phase: String,
    pub weight: f64,
    pub instructions: u64,
    pub features: Vec<F>,
    pub latency_ns: Vec<F>,
    pub energy_nj: Vec<F>,
    pub best_latency: usize,
    pub best_energy: usize,
}

impl<F: Scalar> PhaseTable<F> {
    pub fn values(&self, objective: Objective) -> &[F] {
        match objective {
            Objective::Latency => &self.latency_ns,
            Objective::Energy => &self.energy_nj,
        }
    }

    pub fn best(&self, objective: Objective) -> usize {
        match objective {
            Objective::Latency => self.best_latency,
            Objective::Energy => self.best_energy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ExhaustiveTable<F> {
    pub workload: String,
    pub profiles: Vec<String>,
    pub phases: Vec<PhaseTable<F>>,
}

impl<F: Scalar> ExhaustiveTable<F> {
    /// Phase-weighted objective of the per-phase best choices.
    pub fn best_total(&self, objective: Objective) -> F {
        self.phases
            .iter()
            .map(|p| F::lit(p.weight) * p.values(objective)[p.best(objective)])
            .sum()
    }

    /// Phase-weighted objective of running everything on one profile.
    pub fn static_total(&self, objective: Objective, profile: usize) -> F {
        self.phases
            .iter()
            .map(|p| F::lit(p.weight) * p.values(objective)[profile])
            .sum()
    }
}

/// Lowest index among the minima.
pub(crate) fn argmin<F: Scalar>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Runs one phase from cold on `profile`. When `window` is given, the
/// counters of the first `window` instructions (or the whole phase if it is
/// shorter) are captured with per-line tracking.
pub(crate) fn run_phase_on<F: Scalar>(
    phase: &PhaseTrace,
    profile: usize,
    config: &PolicyConfig<F>,
    window: Option<u64>,
) -> Result<(Segment<F>, Option<SimStats<F>>)> {
    let pl = &config.platform;
    let mut sim = Simulator::new(
        pl.l1,
        pl.l2,
        config.retention_set[profile].clone(),
        pl.monitor,
        pl.timing.clone(),
    )?;
    let mut captured = None;
    let mut events = phase.events.iter();
    if let Some(w) = window {
        sim.core.set_tracking(true);
        for e in events.by_ref() {
            sim.step(e);
            if sim.core.stats().instructions >= w {
                captured = Some(sim.core.snapshot_stats());
                break;
            }
        }
    }
    for e in events {
        sim.step(e);
    }
    sim.retire(phase.trailing_gap);
    sim.core.settle(&mut sim.l2);
    let stats = sim.core.take_stats();
    if window.is_some() && captured.is_none() {
        captured = Some(stats.clone());
    }
    Ok((Segment::from_stats(profile, &stats, config), captured))
}

/// Simulates every phase under every profile of the retention set.
pub fn label_exhaustive<F: Scalar>(workload: &Workload, config: &PolicyConfig<F>) -> Result<ExhaustiveTable<F>> {
    config.validate()?;
    require_single_core(workload)?;
    let mut phases = Vec::with_capacity(workload.phases.len());
    for phase in &workload.phases {
        let mut latency_ns = Vec::with_capacity(config.retention_set.len());
        let mut energy_nj = Vec::with_capacity(config.retention_set.len());
        let mut features = Vec::new();
        let mut instructions = 0;
        for i in 0..config.retention_set.len() {
            let window = (i == config.base).then_some(config.profiling_window);
            let (seg, captured) = run_phase_on(phase, i, config, window)?;
            if let Some(stats) = captured {
                if stats.instructions == 0 {
                    return Err(Error::InvalidParams(format!(
                        "phase `{}` of `{}` retires no instructions",
                        phase.id, workload.name
                    )));
                }
                features = extract(&stats, &config.catalog)?;
            }
            instructions = seg.instructions;
            latency_ns.push(seg.latency_ns);
            energy_nj.push(seg.energy_nj);
        }
        phases.push(PhaseTable {
            phase: phase.id.clone(),
            weight: phase.weight,
            instructions,
            features,
            best_latency: argmin(&latency_ns),
            best_energy: argmin(&energy_nj),
            latency_ns,
            energy_nj,
        });
    }
    Ok(ExhaustiveTable {
        workload: workload.name.clone(),
        profiles: config.class_names(),
        phases,
    })
}

/// Labels many workloads on up to `jobs` threads; output order follows
/// the input.
pub fn label_corpus<F: Scalar>(
    workloads: &[Workload],
    config: &PolicyConfig<F>,
    jobs: usize,
) -> Result<Vec<ExhaustiveTable<F>>> {
    if jobs <= 1 {
        return workloads.iter().map(|w| label_exhaustive(w, config)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| workloads.par_iter().map(|w| label_exhaustive(w, config)).collect())
}

/// The oracle policy: every phase on its exhaustive-best unit, free of
/// overhead.
pub fn run_exhaustive<F: Scalar>(workload: &Workload, config: &PolicyConfig<F>) -> Result<PolicyResult<F>> {
    let table = label_exhaustive(workload, config)?;
    let phases = table
        .phases
        .iter()
        .map(|p| {
            let best = p.best(config.objective);
            let seg = Segment {
                profile: best,
                instructions: p.instructions,
                latency_ns: p.latency_ns[best],
                energy_nj: p.energy_nj[best],
            };
            PhaseDecision::assemble(p.phase.clone(), p.weight, best, vec![seg], (F::zero(), F::zero()))
        })
        .collect();
    Ok(PolicyResult::from_phases("exhaustive", workload, config, phases))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::run_static;
    use crate::trace::{generate_synthetic, SyntheticParams};

    #[test]
    fn argmin_prefers_lower_index() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), 1);
        assert_eq!(argmin(&[1.0]), 0);
    }

    #[test]
    fn table_is_consistent_with_static_runs() {
        let w = generate_synthetic(&SyntheticParams {
            event_count: 30_000,
            ..Default::default()
        })
        .unwrap();
        let c = PolicyConfig::<f64> {
            profiling_window: 20_000,
            ..Default::default()
        };
        let t = label_exhaustive(&w, &c).unwrap();
        let p = &t.phases[0];
        assert_eq!(p.features.len(), c.catalog.len());
        for (i, prof) in c.retention_set.iter().enumerate() {
            let r = run_static(&w, prof, &c).unwrap();
            assert_eq!(r.latency_ns, p.latency_ns[i]);
            assert_eq!(r.energy_nj, p.energy_nj[i]);
        }
        for o in Objective::ALL {
            let v = p.values(o);
            assert!(v.iter().all(|x| *x >= v[p.best(o)]));
        }
        let scaled: Vec<f64> = p.latency_ns.iter().map(|x| x * 3.5).collect();
        assert_eq!(argmin(&scaled), p.best_latency);
        let oracle = run_exhaustive(&w, &c).unwrap();
        assert_eq!(oracle.latency_ns, t.best_total(Objective::Latency));
    }
}
