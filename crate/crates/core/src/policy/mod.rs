//! Retention-time selection strategies over workloads: exhaustive oracle,
//! static base, LARS-style sampling and SCART one-shot prediction with a
//! revert-to-base guard, plus the shared-L2 multi-core mode.

mod dataset;
mod exhaustive;
mod lars;
mod mix;
mod report;
mod scart;

pub use dataset::{read_dataset_csv, write_dataset_csv, LabeledRow, LabeledTable};
pub use exhaustive::{label_corpus, label_exhaustive, run_exhaustive, ExhaustiveTable, PhaseTable};
pub use lars::run_lars_sampling;
pub use mix::{parse_mix_manifest, Mix};
pub use report::{geometric_mean, savings_report, SavingsReport, SavingsRow};
pub use scart::{corun_static, run_multiprogrammed, run_multiprogrammed_static, run_scart, CORE_SPACE_SHIFT};

use serde::{Deserialize, Serialize};

use crate::cachesim::{simulate_with_l2, CacheGeometry, MonitorConfig, RetentionProfile, SimStats};
use crate::energy::{energy_for_latency, leakage_energy_nj, Objective, TimingParams};
use crate::error::{Error, Result};
use crate::features::{FeatureCatalog, DEFAULT_WINDOW_INSTRUCTIONS};
use crate::scalar::Scalar;
use crate::trace::Workload;

/// Cycles per migration between cache units.
pub const MIGRATION_CYCLES: u64 = 4608;

/// Everything below the policy: cache shapes, monitor and timing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Platform<F> {
    pub l1: CacheGeometry,
    pub l2: CacheGeometry,
    pub monitor: MonitorConfig,
    pub timing: TimingParams<F>,
}

impl<F: Scalar> Default for Platform<F> {
    fn default() -> Self {
        Self {
            l1: CacheGeometry::l1_default(),
            l2: CacheGeometry::l2_default(),
            monitor: MonitorConfig::default(),
            timing: TimingParams::default(),
        }
    }
}

impl<F: Scalar> Platform<F> {
    pub fn validate(&self) -> Result<()> {
        self.l1.validate()?;
        self.l2.validate()?;
        self.monitor.validate()?;
        self.timing.validate()?;
        if self.l1.line_bytes != self.l2.line_bytes {
            return Err(Error::InvalidConfig("L1 and L2 line sizes differ".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PolicyConfig<F> {
    pub platform: Platform<F>,
    /// Candidate units; labels index into this list.
    pub retention_set: Vec<RetentionProfile<F>>,
    /// Index of the base unit in `retention_set`.
    pub base: usize,
    pub objective: Objective,
    pub catalog: FeatureCatalog,
    pub profiling_window: u64,
    pub feedback_window: u64,
    /// Relative slack before the feedback guard reverts to base.
    pub feedback_epsilon: f64,
    pub migration_cost_ns: F,
    /// Modeled classifier query time charged per prediction.
    pub prediction_time_ns: F,
    /// Energy per migration on top of the leakage of both units.
    pub migration_energy_nj: F,
}

impl<F: Scalar> Default for PolicyConfig<F> {
    fn default() -> Self {
        let retention_set = RetentionProfile::stt_ram_set();
        let base = retention_set.len() - 1;
        let timing = TimingParams::<F>::default();
        Self {
            migration_cost_ns: timing.cycles_to_ns(F::from_count(MIGRATION_CYCLES)),
            platform: Platform {
                timing,
                ..Platform::default()
            },
            retention_set,
            base,
            objective: Objective::Latency,
            catalog: FeatureCatalog::default(),
            profiling_window: DEFAULT_WINDOW_INSTRUCTIONS,
            feedback_window: DEFAULT_WINDOW_INSTRUCTIONS,
            feedback_epsilon: 0.01,
            prediction_time_ns: F::lit(4250.0),
            migration_energy_nj: F::zero(),
        }
    }
}

impl<F: Scalar> PolicyConfig<F> {
    pub fn validate(&self) -> Result<()> {
        self.platform.validate()?;
        self.catalog.validate()?;
        if self.retention_set.is_empty() {
            return Err(Error::InvalidConfig("empty retention set".into()));
        }
        for p in &self.retention_set {
            p.validate()?;
        }
        if self.base >= self.retention_set.len() {
            return Err(Error::InvalidConfig(format!(
                "base index {} outside a retention set of {}",
                self.base,
                self.retention_set.len()
            )));
        }
        if self.profiling_window == 0 || self.feedback_window == 0 {
            return Err(Error::InvalidConfig("windows must be at least one instruction".into()));
        }
        if !(self.feedback_epsilon >= 0.0 && self.feedback_epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "feedback_epsilon must be >= 0, got {}",
                self.feedback_epsilon
            )));
        }
        for (name, v) in [
            ("migration_cost_ns", self.migration_cost_ns),
            ("prediction_time_ns", self.prediction_time_ns),
            ("migration_energy_nj", self.migration_energy_nj),
        ] {
            if !(v >= F::zero() && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn base_profile(&self) -> &RetentionProfile<F> {
        &self.retention_set[self.base]
    }

    pub fn profile_index(&self, name: &str) -> Option<usize> {
        self.retention_set.iter().position(|p| p.name == name)
    }

    pub fn class_names(&self) -> Vec<String> {
        self.retention_set.iter().map(|p| p.name.clone()).collect()
    }

    /// Overhead of one decision in ns and nJ: `migrations` moves (each
    /// charged on the pair of units it connects) plus `predictions`
    /// classifier queries run on the base unit.
    fn overhead(&self, predictions: u64, moves: &[(usize, usize)]) -> (F, F) {
        let pred_ns = F::from_count(predictions) * self.prediction_time_ns;
        let mut ns = pred_ns;
        let mut nj = leakage_energy_nj(self.base_profile().leakage_mw, pred_ns);
        for &(from, to) in moves {
            ns += self.migration_cost_ns;
            let leak = self.retention_set[from].leakage_mw + self.retention_set[to].leakage_mw;
            nj += leakage_energy_nj(leak, self.migration_cost_ns) + self.migration_energy_nj;
        }
        (ns, nj)
    }
}

/// Contiguous stretch of a phase on one unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Segment<F> {
    pub profile: usize,
    pub instructions: u64,
    pub latency_ns: F,
    pub energy_nj: F,
}

impl<F: Scalar> Segment<F> {
    pub fn from_stats(profile: usize, stats: &SimStats<F>, config: &PolicyConfig<F>) -> Self {
        let p = &config.retention_set[profile];
        let report = energy_for_latency(stats, p, &config.platform.timing, stats.sim_time_ns);
        Self {
            profile,
            instructions: stats.instructions,
            latency_ns: report.latency_ns,
            energy_nj: report.total_nj,
        }
    }

    pub fn objective(&self, objective: Objective) -> F {
        match objective {
            Objective::Latency => self.latency_ns,
            Objective::Energy => self.energy_nj,
        }
    }

    /// Objective per instruction; zero for an empty segment.
    pub fn rate(&self, objective: Objective) -> F {
        if self.instructions == 0 {
            F::zero()
        } else {
            self.objective(objective) / F::from_count(self.instructions)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PhaseDecision<F> {
    pub phase: String,
    pub weight: f64,
    /// Unit the phase finished on.
    pub chosen: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<usize>,
    pub migrations: u64,
    pub reverted: bool,
    /// Feedback-window objective minus the base profiling window's rate
    /// times the feedback window's instructions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback_delta: Option<F>,
    /// LARS: objective per instruction measured on each unit, `None` for
    /// units the phase ended before reaching.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sampled_rates: Vec<Option<F>>,
    pub segments: Vec<Segment<F>>,
    pub overhead_ns: F,
    pub overhead_energy_nj: F,
    /// Segments plus overhead.
    pub latency_ns: F,
    pub energy_nj: F,
}

impl<F: Scalar> PhaseDecision<F> {
    fn assemble(
        phase: String,
        weight: f64,
        chosen: usize,
        segments: Vec<Segment<F>>,
        overhead: (F, F),
    ) -> Self {
        let latency_ns = segments.iter().map(|s| s.latency_ns).sum::<F>() + overhead.0;
        let energy_nj = segments.iter().map(|s| s.energy_nj).sum::<F>() + overhead.1;
        Self {
            phase,
            weight,
            chosen,
            predicted: None,
            migrations: 0,
            reverted: false,
            feedback_delta: None,
            sampled_rates: Vec::new(),
            segments,
            overhead_ns: overhead.0,
            overhead_energy_nj: overhead.1,
            latency_ns,
            energy_nj,
        }
    }

    pub fn objective(&self, objective: Objective) -> F {
        match objective {
            Objective::Latency => self.latency_ns,
            Objective::Energy => self.energy_nj,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PolicyResult<F> {
    pub policy: String,
    pub workload: String,
    pub objective: Objective,
    pub profiles: Vec<String>,
    pub phases: Vec<PhaseDecision<F>>,
    pub migrations: u64,
    pub reverts: u64,
    pub predictions: u64,
    /// migrations x migration cost + predictions x prediction time.
    pub overhead_ns: F,
    pub overhead_energy_nj: F,
    /// Phase-weighted totals, overheads included.
    pub latency_ns: F,
    pub energy_nj: F,
    pub objective_total: F,
}

impl<F: Scalar> PolicyResult<F> {
    fn from_phases(
        policy: &str,
        workload: &Workload,
        config: &PolicyConfig<F>,
        phases: Vec<PhaseDecision<F>>,
    ) -> Self {
        let w = |p: &PhaseDecision<F>| F::lit(p.weight);
        let latency_ns = phases.iter().map(|p| w(p) * p.latency_ns).sum::<F>();
        let energy_nj = phases.iter().map(|p| w(p) * p.energy_nj).sum::<F>();
        let mut r = Self {
            policy: policy.into(),
            workload: workload.name.clone(),
            objective: config.objective,
            profiles: config.class_names(),
            migrations: phases.iter().map(|p| p.migrations).sum(),
            reverts: phases.iter().filter(|p| p.reverted).count() as u64,
            predictions: phases.iter().filter(|p| p.predicted.is_some()).count() as u64,
            overhead_ns: phases.iter().map(|p| p.overhead_ns).sum(),
            overhead_energy_nj: phases.iter().map(|p| p.overhead_energy_nj).sum(),
            phases,
            latency_ns,
            energy_nj,
            objective_total: F::zero(),
        };
        r.objective_total = r.total_for(config.objective);
        r
    }

    pub fn total_for(&self, objective: Objective) -> F {
        match objective {
            Objective::Latency => self.latency_ns,
            Objective::Energy => self.energy_nj,
        }
    }

    /// Profile names chosen per phase.
    pub fn chosen_names(&self) -> Vec<&str> {
        self.phases.iter().map(|p| self.profiles[p.chosen].as_str()).collect()
    }
}

fn require_single_core(workload: &Workload) -> Result<()> {
    if workload.is_single_core() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "workload `{}` spans {} cores; use the multi-programmed mode",
            workload.name,
            workload.core_count()
        )))
    }
}

/// Whole workload on one profile, no migrations.
pub fn run_static<F: Scalar>(
    workload: &Workload,
    profile: &RetentionProfile<F>,
    config: &PolicyConfig<F>,
) -> Result<PolicyResult<F>> {
    config.platform.validate()?;
    profile.validate()?;
    require_single_core(workload)?;
    let pl = &config.platform;
    let stats = simulate_with_l2(workload, &pl.l1, &pl.l2, profile, &pl.monitor, &pl.timing)?;
    let mut cfg = config.clone();
    let index = match config.profile_index(&profile.name) {
        Some(i) if config.retention_set[i] == *profile => i,
        _ => {
            cfg.retention_set.push(profile.clone());
            cfg.retention_set.len() - 1
        }
    };
    let phases = stats
        .phases
        .iter()
        .map(|ps| {
            let seg = Segment::from_stats(index, &ps.stats, &cfg);
            PhaseDecision::assemble(ps.id.clone(), ps.weight, index, vec![seg], (F::zero(), F::zero()))
        })
        .collect();
    Ok(PolicyResult::from_phases(&format!("static:{}", profile.name), workload, &cfg, phases))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cachesim::simulate;
    use crate::energy::compute_energy;
    use crate::trace::{generate_synthetic, SyntheticParams};

    #[test]
    fn defaults_match_overhead_arithmetic() {
        let c = PolicyConfig::<f64>::default();
        c.validate().unwrap();
        assert_eq!(c.migration_cost_ns, 2304.0);
        assert_eq!(c.base_profile().name, "1ms");
        assert_eq!(c.retention_set.len(), 6);
    }

    #[test]
    fn static_equals_simulate_and_energy() {
        let w = generate_synthetic(&SyntheticParams {
            event_count: 20_000,
            ..Default::default()
        })
        .unwrap();
        let c = PolicyConfig::<f64>::default();
        for p in RetentionProfile::<f64>::table_ii() {
            let r = run_static(&w, &p, &c).unwrap();
            let s = simulate(&w, &c.platform.l1, &p, &c.platform.monitor, &c.platform.timing).unwrap();
            let e = compute_energy(&s, &p, &c.platform.timing);
            assert_eq!(r.latency_ns, e.latency_ns, "{}", p.name);
            assert_eq!(r.energy_nj, e.total_nj, "{}", p.name);
            assert_eq!(r.migrations, 0);
            assert_eq!(r.overhead_ns, 0.0);
        }
    }

    #[test]
    fn volatile_sram_constants_rejected() {
        let mut p = RetentionProfile::<f64>::stt_ram_set().remove(0);
        p.retention_time_ns = f64::INFINITY;
        let w = Workload::single("w", vec![crate::trace::AccessEvent::read(0, 0)]);
        assert!(run_static(&w, &p, &PolicyConfig::default()).is_err());
    }
}
