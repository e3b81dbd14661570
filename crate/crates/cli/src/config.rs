//! INI experiment configuration.
//!
//! Sections appear in a fixed order in the canonical dump: `[run]`,
//! `[cache]`, `[monitor]`, `[timing]`, `[policy]`, `[corpus]`,
//! `[workloads]`, then one `[profile.<name>]` per retention profile. Every
//! section and key is optional on input; anything unknown is an error.
//! Durations take `ns`, `us`, `ms` or `s`, energies `nj` or `uj`; bare
//! numbers are ns and nJ.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ini::Ini;
use retention_lab::cachesim::{AgingClock, CacheGeometry, MonitorConfig, RetentionProfile, Technology};
use retention_lab::energy::{Objective, TimingParams};
use retention_lab::learn::DEFAULT_K;
use retention_lab::policy::{Platform, PolicyConfig};
use retention_lab::trace::CorpusSpec;
use retention_lab::{Error, Result};

pub const DEFAULT_SEED: u64 = 2024;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub jobs: usize,
    pub platform: Platform<f64>,
    /// Every profile the config knows about; `candidates` picks the policy set.
    pub profiles: Vec<RetentionProfile<f64>>,
    pub candidates: Vec<String>,
    pub base: String,
    pub objective: Objective,
    pub k: usize,
    pub profiling_window: u64,
    pub feedback_window: u64,
    pub feedback_epsilon: f64,
    pub migration_cost_ns: f64,
    pub prediction_time_ns: f64,
    pub migration_energy_nj: f64,
    pub corpus: CorpusSpec,
    pub workloads: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let policy = PolicyConfig::<f64>::default();
        let corpus = CorpusSpec::default();
        Self {
            seed: DEFAULT_SEED,
            jobs: 1,
            platform: policy.platform.clone(),
            profiles: RetentionProfile::table_ii(),
            candidates: policy.class_names(),
            base: policy.base_profile().name.clone(),
            objective: policy.objective,
            k: DEFAULT_K,
            profiling_window: policy.profiling_window,
            feedback_window: policy.feedback_window,
            feedback_epsilon: policy.feedback_epsilon,
            migration_cost_ns: policy.migration_cost_ns,
            prediction_time_ns: policy.prediction_time_ns,
            migration_energy_nj: policy.migration_energy_nj,
            corpus,
            workloads: Vec::new(),
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn scaled(raw: &str, key: &str, units: &[(&str, f64)]) -> Result<f64> {
    let s = raw.trim();
    let (num, scale) = units
        .iter()
        .find_map(|(suffix, scale)| s.strip_suffix(suffix).map(|n| (n.trim_end(), *scale)))
        .unwrap_or((s, 1.0));
    let v: f64 = num.parse().map_err(|_| bad(format!("{key}: cannot read `{raw}`")))?;
    if v.is_nan() || v < 0.0 {
        return Err(bad(format!("{key}: must be >= 0, got `{raw}`")));
    }
    Ok(v * scale)
}

fn duration_ns(raw: &str, key: &str) -> Result<f64> {
    scaled(raw, key, &[("ns", 1.0), ("us", 1e3), ("ms", 1e6), ("s", 1e9)])
}

fn energy_nj(raw: &str, key: &str) -> Result<f64> {
    scaled(raw, key, &[("nj", 1.0), ("uj", 1e3)])
}

fn number<T: std::str::FromStr>(raw: &str, key: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| bad(format!("{key}: cannot read `{raw}`")))
}

fn real(raw: &str, key: &str) -> Result<f64> {
    let v: f64 = number(raw, key)?;
    if v.is_nan() {
        return Err(bad(format!("{key}: NaN")));
    }
    Ok(v)
}

fn objective(raw: &str) -> Result<Objective> {
    match raw.trim() {
        "latency" => Ok(Objective::Latency),
        "energy" => Ok(Objective::Energy),
        other => Err(bad(format!("objective must be latency or energy, got `{other}`"))),
    }
}

fn technology_name(t: Technology) -> &'static str {
    match t {
        Technology::Sram => "sram",
        Technology::SttRam => "stt-ram",
    }
}

fn clock_name(c: AgingClock) -> &'static str {
    match c {
        AgingClock::SimulatedTime => "simulated",
        AgingClock::NominalTime => "nominal",
    }
}

fn ns(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}ns")
    }
}

fn nj(v: f64) -> String {
    format!("{v}nj")
}

/// Applies `key = value` pairs of one section through `set`, rejecting
/// keys it does not know.
fn each<'a>(
    section: &str,
    props: impl Iterator<Item = (&'a str, &'a str)>,
    mut set: impl FnMut(&str, &str) -> Result<bool>,
) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (k, v) in props {
        if !seen.insert(k) {
            return Err(bad(format!("[{section}] sets `{k}` twice")));
        }
        if !set(k, v)? {
            return Err(bad(format!("unknown key `{k}` in [{section}]")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Parse {
            line: e.line,
            message: e.msg.to_string(),
        })?;
        let mut c = Self::default();
        let mut profiles = Vec::new();
        let mut candidates = None;
        let mut base = None;
        let mut sections = BTreeSet::new();

        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(bad(format!("key `{k}` outside any section")));
                }
                continue;
            };
            if !sections.insert(name.to_string()) {
                return Err(bad(format!("section [{name}] appears twice")));
            }
            let kv = props.iter();
            match name {
                "run" => each(name, kv, |k, v| {
                    match k {
                        "seed" => c.seed = number(v, k)?,
                        "jobs" => c.jobs = number(v, k)?,
                        _ => return Ok(false),
                    }
                    Ok(true)
                })?,
                "cache" => {
                    let (l1, l2) = (&mut c.platform.l1, &mut c.platform.l2);
                    each(name, kv, |k, v| {
                        match k {
                            "l1_capacity_bytes" => l1.capacity_bytes = number(v, k)?,
                            "l1_line_bytes" => l1.line_bytes = number(v, k)?,
                            "l1_associativity" => l1.associativity = number(v, k)?,
                            "l2_capacity_bytes" => l2.capacity_bytes = number(v, k)?,
                            "l2_line_bytes" => l2.line_bytes = number(v, k)?,
                            "l2_associativity" => l2.associativity = number(v, k)?,
                            _ => return Ok(false),
                        }
                        Ok(true)
                    })?
                }
                "monitor" => {
                    let m = &mut c.platform.monitor;
                    each(name, kv, |k, v| {
                        match k {
                            "n_states" => m.n_states = number(v, k)?,
                            "aging_clock" => {
                                m.aging_clock = match v.trim() {
                                    "simulated" => AgingClock::SimulatedTime,
                                    "nominal" => AgingClock::NominalTime,
                                    other => {
                                        return Err(bad(format!("aging_clock must be simulated or nominal, got `{other}`")))
                                    }
                                }
                            }
                            _ => return Ok(false),
                        }
                        Ok(true)
                    })?
                }
                "timing" => {
                    let t = &mut c.platform.timing;
                    each(name, kv, |k, v| {
                        match k {
                            "frequency_hz" => t.frequency_hz = real(v, k)?,
                            "base_cpi" => t.base_cpi = real(v, k)?,
                            "hit_cycles" => t.hit_cycles = real(v, k)?,
                            "l2_hit_penalty_cycles" => t.l2_hit_penalty_cycles = real(v, k)?,
                            "memory_penalty_cycles" => t.memory_penalty_cycles = real(v, k)?,
                            "l2_access_energy" => t.l2_access_energy_nj = energy_nj(v, k)?,
                            _ => return Ok(false),
                        }
                        Ok(true)
                    })?
                }
                "policy" => each(name, kv, |k, v| {
                    match k {
                        "objective" => c.objective = objective(v)?,
                        "candidates" => candidates = Some(v.split_whitespace().map(str::to_string).collect()),
                        "base" => base = Some(v.trim().to_string()),
                        "k" => c.k = number(v, k)?,
                        "profiling_window" => c.profiling_window = number(v, k)?,
                        "feedback_window" => c.feedback_window = number(v, k)?,
                        "feedback_epsilon" => c.feedback_epsilon = real(v, k)?,
                        "migration_cost" => c.migration_cost_ns = duration_ns(v, k)?,
                        "prediction_time" => c.prediction_time_ns = duration_ns(v, k)?,
                        "migration_energy" => c.migration_energy_nj = energy_nj(v, k)?,
                        _ => return Ok(false),
                    }
                    Ok(true)
                })?,
                "corpus" => {
                    let s = &mut c.corpus;
                    each(name, kv, |k, v| {
                        match k {
                            "workloads" => s.workloads = number(v, k)?,
                            "phases_per_workload" => s.phases_per_workload = number(v, k)?,
                            "phase_instructions" => s.phase_instructions = number(v, k)?,
                            "min_gap" => s.min_gap_ns = duration_ns(v, k)?,
                            "max_gap" => s.max_gap_ns = duration_ns(v, k)?,
                            _ => return Ok(false),
                        }
                        Ok(true)
                    })?
                }
                "workloads" => each(name, kv, |k, v| {
                    match k {
                        "paths" => c.workloads = v.split_whitespace().map(str::to_string).collect(),
                        _ => return Ok(false),
                    }
                    Ok(true)
                })?,
                _ => {
                    let Some(pname) = name.strip_prefix("profile.").filter(|n| !n.is_empty()) else {
                        return Err(bad(format!("unknown section [{name}]")));
                    };
                    let mut p = RetentionProfile::<f64> {
                        name: pname.to_string(),
                        ..RetentionProfile::sram()
                    };
                    let mut has_technology = false;
                    each(name, kv, |k, v| {
                        match k {
                            "technology" => {
                                has_technology = true;
                                p.technology = match v.trim() {
                                    "sram" => Technology::Sram,
                                    "stt-ram" => Technology::SttRam,
                                    other => return Err(bad(format!("technology must be sram or stt-ram, got `{other}`"))),
                                }
                            }
                            "retention" => p.retention_time_ns = duration_ns(v, k)?,
                            "hit_latency" => p.hit_latency_ns = duration_ns(v, k)?,
                            "write_latency" => p.write_latency_ns = duration_ns(v, k)?,
                            "read_energy" => p.read_energy_nj = energy_nj(v, k)?,
                            "write_energy" => p.write_energy_nj = energy_nj(v, k)?,
                            "leakage_mw" => p.leakage_mw = real(v, k)?,
                            _ => return Ok(false),
                        }
                        Ok(true)
                    })?;
                    if !has_technology {
                        return Err(bad(format!("[{name}] needs a technology")));
                    }
                    profiles.push(p);
                }
            }
        }

        if !profiles.is_empty() {
            c.candidates = profiles
                .iter()
                .filter(|p| p.technology == Technology::SttRam)
                .map(|p| p.name.clone())
                .collect();
            c.profiles = profiles;
            c.base = c.candidates.last().cloned().unwrap_or_default();
        }
        if let Some(list) = candidates {
            c.candidates = list;
        }
        if let Some(b) = base {
            c.base = b;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(bad("jobs must be >= 1"));
        }
        if self.k == 0 {
            return Err(bad("k must be >= 1"));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            if p.name.contains(char::is_whitespace) || p.name.contains(['[', ']', '#', ';']) {
                return Err(bad(format!("bad profile name `{}`", p.name)));
            }
            if self.profiles[..i].iter().any(|q| q.name == p.name) {
                return Err(bad(format!("profile `{}` defined twice", p.name)));
            }
        }
        for p in &self.workloads {
            if p.contains(char::is_whitespace) {
                return Err(bad(format!("workload path `{p}` contains whitespace")));
            }
        }
        self.policy()?;
        Ok(())
    }

    pub fn profile(&self, name: &str) -> Result<&RetentionProfile<f64>> {
        self.profiles.iter().find(|p| p.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.profiles.iter().map(|p| p.name.as_str()).collect();
            bad(format!("no profile `{name}` (known: {})", known.join(", ")))
        })
    }

    pub fn policy(&self) -> Result<PolicyConfig<f64>> {
        let retention_set = self
            .candidates
            .iter()
            .map(|n| self.profile(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        for (i, n) in self.candidates.iter().enumerate() {
            if self.candidates[..i].contains(n) {
                return Err(bad(format!("candidate `{n}` listed twice")));
            }
        }
        let base = self
            .candidates
            .iter()
            .position(|n| *n == self.base)
            .ok_or_else(|| bad(format!("base `{}` is not among the candidates", self.base)))?;
        let config = PolicyConfig {
            platform: self.platform.clone(),
            retention_set,
            base,
            objective: self.objective,
            profiling_window: self.profiling_window,
            feedback_window: self.feedback_window,
            feedback_epsilon: self.feedback_epsilon,
            migration_cost_ns: self.migration_cost_ns,
            prediction_time_ns: self.prediction_time_ns,
            migration_energy_nj: self.migration_energy_nj,
            ..PolicyConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        CorpusSpec {
            seed: self.seed,
            ..self.corpus.clone()
        }
    }

    /// Canonical text form; `parse(dump())` reproduces `self` and dumps
    /// to the same bytes.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let pl = &self.platform;
        let t: &TimingParams<f64> = &pl.timing;
        let g = |c: &CacheGeometry| (c.capacity_bytes, c.line_bytes, c.associativity);
        let (c1, l1, a1) = g(&pl.l1);
        let (c2, l2, a2) = g(&pl.l2);
        let m: &MonitorConfig = &pl.monitor;
        let _ = write!(
            s,
            "[run]\nseed = {}\njobs = {}\n\n\
             [cache]\nl1_capacity_bytes = {c1}\nl1_line_bytes = {l1}\nl1_associativity = {a1}\n\
             l2_capacity_bytes = {c2}\nl2_line_bytes = {l2}\nl2_associativity = {a2}\n\n\
             [monitor]\nn_states = {}\naging_clock = {}\n\n\
             [timing]\nfrequency_hz = {}\nbase_cpi = {}\nhit_cycles = {}\nl2_hit_penalty_cycles = {}\n\
             memory_penalty_cycles = {}\nl2_access_energy = {}\n\n",
            self.seed,
            self.jobs,
            m.n_states,
            clock_name(m.aging_clock),
            t.frequency_hz,
            t.base_cpi,
            t.hit_cycles,
            t.l2_hit_penalty_cycles,
            t.memory_penalty_cycles,
            nj(t.l2_access_energy_nj),
        );
        let _ = write!(
            s,
            "[policy]\nobjective = {}\ncandidates = {}\nbase = {}\nk = {}\nprofiling_window = {}\n\
             feedback_window = {}\nfeedback_epsilon = {}\nmigration_cost = {}\nprediction_time = {}\n\
             migration_energy = {}\n\n",
            self.objective.name(),
            self.candidates.join(" "),
            self.base,
            self.k,
            self.profiling_window,
            self.feedback_window,
            self.feedback_epsilon,
            ns(self.migration_cost_ns),
            ns(self.prediction_time_ns),
            nj(self.migration_energy_nj),
        );
        let cs = &self.corpus;
        let _ = write!(
            s,
            "[corpus]\nworkloads = {}\nphases_per_workload = {}\nphase_instructions = {}\nmin_gap = {}\nmax_gap = {}\n\n",
            cs.workloads,
            cs.phases_per_workload,
            cs.phase_instructions,
            ns(cs.min_gap_ns),
            ns(cs.max_gap_ns),
        );
        let _ = write!(s, "[workloads]\npaths = {}\n", self.workloads.join(" "));
        for p in &self.profiles {
            let _ = write!(
                s,
                "\n[profile.{}]\ntechnology = {}\nretention = {}\nhit_latency = {}\nwrite_latency = {}\n\
                 read_energy = {}\nwrite_energy = {}\nleakage_mw = {}\n",
                p.name,
                technology_name(p.technology),
                ns(p.retention_time_ns),
                ns(p.hit_latency_ns),
                ns(p.write_latency_ns),
                nj(p.read_energy_nj),
                nj(p.write_energy_nj),
                p.leakage_mw,
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dump_round_trips() {
        let d = ExperimentConfig::default().dump();
        let parsed = ExperimentConfig::parse(&d).unwrap();
        assert_eq!(parsed, ExperimentConfig::default());
        assert_eq!(parsed.dump(), d);
    }

    #[test]
    fn empty_text_is_default() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn suffixes_scale() {
        assert_eq!(duration_ns("26.5us", "x").unwrap(), 26_500.0);
        assert_eq!(duration_ns("1ms", "x").unwrap(), 1e6);
        assert_eq!(duration_ns("2304", "x").unwrap(), 2304.0);
        assert_eq!(duration_ns("inf", "x").unwrap(), f64::INFINITY);
        assert_eq!(energy_nj("4.659uj", "x").unwrap(), 4659.0);
        assert!(duration_ns("3 parsecs", "x").is_err());
        assert!(energy_nj("-1nj", "x").is_err());
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::parse(
            "[policy]\nobjective = energy\nprediction_time = 4.25us\nbase = 100us\n[run]\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.objective, Objective::Energy);
        assert_eq!(c.prediction_time_ns, 4250.0);
        assert_eq!(c.seed, 9);
        assert_eq!(c.policy().unwrap().base, 4);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(ExperimentConfig::parse("[policy]\nobjectiv = energy\n").is_err());
        assert!(ExperimentConfig::parse("[polcy]\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\n").is_err());
        assert!(ExperimentConfig::parse("[profile.x]\nretention = 1us\n").is_err());
        assert!(ExperimentConfig::parse("[policy]\nbase = sram\n").is_err());
    }

    #[test]
    fn custom_profile_table_replaces_defaults() {
        let c = ExperimentConfig::parse(
            "[profile.fast]\ntechnology = stt-ram\nretention = 20us\nhit_latency = 0.5ns\nwrite_latency = 0.7ns\n\
             read_energy = 0.003nj\nwrite_energy = 0.03nj\nleakage_mw = 4.659\n\
             [profile.slow]\ntechnology = stt-ram\nretention = 1ms\nhit_latency = 0.44ns\nwrite_latency = 1.6ns\n\
             read_energy = 0.003nj\nwrite_energy = 0.05nj\nleakage_mw = 4.659\n",
        )
        .unwrap();
        assert_eq!(c.candidates, vec!["fast", "slow"]);
        assert_eq!(c.base, "slow");
        let again = ExperimentConfig::parse(&c.dump()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.dump(), c.dump());
    }
}
