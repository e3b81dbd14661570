use retention_lab::energy::Objective;
use retention_lab::learn::{fit_rows, KnnModel};
use retention_lab::policy::{
    label_corpus, label_exhaustive, run_exhaustive, run_lars_sampling, run_multiprogrammed, run_scart, run_static,
    savings_report, PolicyConfig,
};
use retention_lab::trace::{desk_corpus, generate_synthetic, CorpusSpec, SyntheticParams, Workload};
use retention_lab::Error;

fn constant_model(config: &PolicyConfig<f64>, label: usize) -> KnnModel<f64> {
    let dim = config.catalog.len();
    let all: Vec<usize> = (0..dim).collect();
    let x = vec![vec![0.0; dim], vec![1.0; dim]];
    fit_rows(&config.catalog, &config.class_names(), &x, &[label, label], 1, &all).unwrap()
}

fn two_phase(gap_a: f64, gap_b: f64, seed: u64) -> Workload {
    let mut phases = Vec::new();
    for (i, gap) in [gap_a, gap_b].into_iter().enumerate() {
        let mut p = generate_synthetic(&SyntheticParams {
            reuse_gap_mean_ns: gap,
            event_count: 500_000,
            seed: seed + i as u64,
            ..SyntheticParams::default()
        })
        .unwrap()
        .phases
        .remove(0);
        p.id = format!("p{i}");
        p.weight = if i == 0 { 0.25 } else { 0.75 };
        phases.push(p);
    }
    Workload::new("two-phase", phases)
}

fn read_mostly(seed: u64) -> Workload {
    generate_synthetic(&SyntheticParams {
        working_set_lines: 400,
        hot_lines: 4,
        hot_access_fraction: 0.3,
        write_fraction: 0.05,
        reuse_gap_mean_ns: 400_000.0,
        streaming_fraction: 0.0,
        event_count: 700_000,
        seed,
        ..SyntheticParams::default()
    })
    .unwrap()
}

#[test]
fn scart_predicting_base_is_static_plus_prediction() {
    let config = PolicyConfig::<f64>::default();
    let w = two_phase(10_000.0, 200_000.0, 3);
    let scart = run_scart(&w, &constant_model(&config, config.base), &config).unwrap();
    let stat = run_static(&w, config.base_profile(), &config).unwrap();
    assert_eq!(scart.migrations, 0);
    assert_eq!(scart.reverts, 0);
    assert_eq!(scart.predictions, 2);
    for (a, b) in scart.phases.iter().zip(&stat.phases) {
        assert_eq!(a.segments, b.segments);
        assert_eq!(a.overhead_ns, config.prediction_time_ns);
        assert_eq!(a.latency_ns, b.latency_ns + config.prediction_time_ns);
    }
    assert_eq!(scart.overhead_ns, 2.0 * config.prediction_time_ns);
}

#[test]
fn bad_prediction_reverts_with_two_migrations() {
    let config = PolicyConfig::<f64>::default();
    let w = read_mostly(5);
    let r = run_scart(&w, &constant_model(&config, 0), &config).unwrap();
    let p = &r.phases[0];
    assert_eq!((r.reverts, r.migrations), (1, 2));
    assert!(p.reverted);
    assert_eq!(p.chosen, config.base);
    assert_eq!(p.segments.iter().map(|s| s.profile).collect::<Vec<_>>(), vec![config.base, 0, config.base]);
    assert_eq!(p.overhead_ns, config.prediction_time_ns + 2.0 * config.migration_cost_ns);
    assert!(p.feedback_delta.unwrap() > 0.0);
}

#[test]
fn objective_total_recomputes_from_components() {
    let config = PolicyConfig::<f64> {
        objective: Objective::Energy,
        ..PolicyConfig::default()
    };
    let w = two_phase(8_000.0, 50_000.0, 11);
    let r = run_scart(&w, &constant_model(&config, 1), &config).unwrap();
    let mut total = 0.0;
    for p in &r.phases {
        let seg: f64 = p.segments.iter().map(|s| s.energy_nj).sum();
        assert_eq!(p.energy_nj, seg + p.overhead_energy_nj);
        let moves = p.migrations as f64;
        let preds = if p.predicted.is_some() { 1.0 } else { 0.0 };
        assert_eq!(p.overhead_ns, preds * config.prediction_time_ns + moves * config.migration_cost_ns);
        total += p.weight * p.energy_nj;
    }
    assert!((r.objective_total - total).abs() <= 1e-9 * total);
}

#[test]
fn lars_overhead_is_set_size_times_migration() {
    let w = two_phase(20_000.0, 90_000.0, 21);
    for n in 1..=6 {
        let full = PolicyConfig::<f64>::default();
        let config = PolicyConfig {
            retention_set: full.retention_set[6 - n..].to_vec(),
            base: n - 1,
            ..full
        };
        let r = run_lars_sampling(&w, &config).unwrap();
        let expected = if n == 1 { 0 } else { n as u64 };
        for p in &r.phases {
            assert_eq!(p.migrations, expected, "set size {n}");
            assert_eq!(p.overhead_ns, expected as f64 * config.migration_cost_ns);
            assert_eq!(p.sampled_rates.len(), n);
        }
    }
}

#[test]
fn lars_on_stable_phases_matches_exhaustive() {
    let config = PolicyConfig::<f64>::default();
    let w = generate_synthetic(&SyntheticParams {
        write_fraction: 0.3,
        reuse_gap_mean_ns: 20_000.0,
        event_count: 2_000_000,
        seed: 8,
        ..SyntheticParams::default()
    })
    .unwrap();
    let lars = run_lars_sampling(&w, &config).unwrap();
    let table = label_exhaustive(&w, &config).unwrap();
    assert_eq!(lars.phases[0].chosen, table.phases[0].best(Objective::Latency));
}

#[test]
fn exhaustive_choice_is_table_minimum() {
    let config = PolicyConfig::<f64>::default();
    let w = two_phase(6_000.0, 600_000.0, 31);
    let table = label_exhaustive(&w, &config).unwrap();
    let r = run_exhaustive(&w, &config).unwrap();
    assert_eq!(r.migrations, 0);
    for (p, d) in table.phases.iter().zip(&r.phases) {
        let values = p.values(Objective::Latency);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(values[p.best(Objective::Latency)], min);
        assert_eq!(d.chosen, p.best(Objective::Latency));
    }
}

#[test]
fn dominated_profile_is_never_chosen() {
    let mut config = PolicyConfig::<f64>::default();
    let mut worse = config.retention_set[3].clone();
    worse.name = "75us-slow".into();
    worse.write_latency_ns *= 2.0;
    worse.write_energy_nj *= 2.0;
    worse.read_energy_nj *= 2.0;
    worse.leakage_mw *= 2.0;
    config.retention_set.insert(3, worse);
    config.base += 1;
    let w = two_phase(30_000.0, 60_000.0, 41);
    let table = label_exhaustive(&w, &config).unwrap();
    for p in &table.phases {
        for o in Objective::ALL {
            assert_ne!(p.best(o), 3);
        }
    }
}

#[test]
fn corpus_has_phase_where_energy_and_latency_disagree() {
    let spec = CorpusSpec {
        workloads: 8,
        phase_instructions: 2_000_000,
        ..CorpusSpec::default()
    };
    let config = PolicyConfig::<f64>::default();
    let tables = label_corpus(&desk_corpus(&spec).unwrap(), &config, 2).unwrap();
    let split = tables
        .iter()
        .flat_map(|t| &t.phases)
        .filter(|p| p.best(Objective::Energy) != p.best(Objective::Latency))
        .count();
    assert!(split > 0);
}

#[test]
fn labeling_is_identical_across_job_counts() {
    let spec = CorpusSpec {
        workloads: 3,
        phase_instructions: 300_000,
        ..CorpusSpec::default()
    };
    let config = PolicyConfig::<f64>::default();
    let corpus = desk_corpus(&spec).unwrap();
    assert_eq!(label_corpus(&corpus, &config, 1).unwrap(), label_corpus(&corpus, &config, 3).unwrap());
}

#[test]
fn identical_cores_decide_identically() {
    let config = PolicyConfig::<f64>::default();
    let w = two_phase(15_000.0, 150_000.0, 51);
    let model = constant_model(&config, 2);
    let results = run_multiprogrammed(&vec![w.clone(); 4], &model, &config).unwrap();
    assert_eq!(results.len(), 4);
    for r in &results[1..] {
        assert_eq!(r.phases, results[0].phases);
    }
    assert_eq!(results[0].policy, "scart-mp");
}

#[test]
fn savings_against_itself_are_zero() {
    let config = PolicyConfig::<f64>::default();
    let w = two_phase(15_000.0, 150_000.0, 61);
    let a = run_static(&w, config.base_profile(), &config).unwrap();
    let report = savings_report(std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap();
    assert_eq!(report.rows[0].latency_savings_pct, 0.0);
    assert_eq!(report.latency_geomean_savings_pct, 0.0);
    assert_eq!(report.energy_geomean_savings_pct, 0.0);
    let mut other = a.clone();
    other.workload = "elsewhere".into();
    assert!(savings_report(&[other], &[a]).is_err());
}

#[test]
fn mismatched_model_catalog_is_refused() {
    let config = PolicyConfig::<f64>::default();
    let mut model = constant_model(&config, 0);
    model.catalog.version = "counters-v0".into();
    let w = two_phase(15_000.0, 150_000.0, 71);
    assert!(matches!(run_scart(&w, &model, &config), Err(Error::CatalogMismatch { .. })));
}
