use proptest::prelude::*;

use retention_lab::cachesim::{simulate, AgingClock, CacheGeometry, MonitorConfig, RetentionProfile, Technology};
use retention_lab::energy::{compute_energy, TimingParams};
use retention_lab::features::{Feature, FeatureCatalog, Standardizer};
use retention_lab::learn::{f_score, fit_rows, ConfusionMatrix};
use retention_lab::policy::{label_exhaustive, PolicyConfig};
use retention_lab::trace::{
    interleave, parse_trace_str, write_trace_string, AccessEvent, AccessKind, InterleavePolicy, PhaseTrace,
    Workload,
};

fn event() -> impl Strategy<Value = AccessEvent> {
    (0u64..1000, any::<bool>(), 0u64..(1 << 40)).prop_map(|(gap, w, addr)| {
        AccessEvent::new(gap, if w { AccessKind::Write } else { AccessKind::Read }, addr)
    })
}

fn phase(core_max: u32) -> impl Strategy<Value = PhaseTrace> {
    (
        "[a-z][a-z0-9_]{0,7}",
        0.01f64..1.0,
        prop::collection::vec((event(), 0..=core_max), 1..40),
        0u64..500,
    )
        .prop_map(|(id, weight, evs, tail)| PhaseTrace {
            id,
            weight,
            events: evs.into_iter().map(|(e, core)| AccessEvent { core, ..e }).collect(),
            trailing_gap: tail,
        })
}

fn workload(core_max: u32) -> impl Strategy<Value = Workload> {
    ("[a-z][a-z0-9.-]{0,11}", prop::collection::vec(phase(core_max), 1..4)).prop_map(|(name, phases)| {
        let mut w = Workload::new(name, phases);
        w.normalize_weights();
        w
    })
}

fn single_core_events(n: usize) -> impl Strategy<Value = Vec<AccessEvent>> {
    prop::collection::vec(event(), 1..n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_text_round_trips(w in workload(3)) {
        let parsed = parse_trace_str(&write_trace_string(&w)).unwrap();
        prop_assert_eq!(parsed, w);
    }

    #[test]
    fn interleave_projects_back(inputs in prop::collection::vec(single_core_events(60), 1..=8)) {
        let ws: Vec<Workload> = inputs
            .iter()
            .enumerate()
            .map(|(i, evs)| Workload::single(format!("w{i}"), evs.clone()))
            .collect();
        let merged = interleave(&ws, InterleavePolicy::RoundRobin).unwrap();
        for (i, evs) in inputs.iter().enumerate() {
            prop_assert_eq!(&merged.project(i as u32), evs);
        }
    }

    #[test]
    fn infinite_retention_matches_sram_stream(evs in prop::collection::vec((0u64..20, any::<bool>(), 0u64..64), 1..400)) {
        // 1ms column timing and energy, never expiring.
        let mut forever = RetentionProfile::<f64>::stt_ram_set().pop().unwrap();
        forever.name = "forever".into();
        forever.technology = Technology::Sram;
        forever.retention_time_ns = f64::INFINITY;
        let events: Vec<AccessEvent> = evs
            .iter()
            .map(|&(g, w, l)| if w { AccessEvent::write(g, l * 64) } else { AccessEvent::read(g, l * 64) })
            .collect();
        let w = Workload::single("p", events);
        let g = CacheGeometry::new(4 * 2 * 64, 64, 2);
        let m = MonitorConfig::default();
        let t = TimingParams::default();
        let a = simulate(&w, &g, &RetentionProfile::sram(), &m, &t).unwrap();
        let b = simulate(&w, &g, &forever, &m, &t).unwrap();
        prop_assert_eq!(a.l1_read_misses, b.l1_read_misses);
        prop_assert_eq!(a.l1_write_misses, b.l1_write_misses);
        prop_assert_eq!(b.expiry_evictions, 0);
    }

    #[test]
    fn single_line_hits_grow_with_retention(
        evs in prop::collection::vec((0u64..40_000, any::<bool>()), 1..300),
    ) {
        let events: Vec<AccessEvent> = evs
            .iter()
            .map(|&(g, w)| if w { AccessEvent::write(g, 0x80) } else { AccessEvent::read(g, 0x80) })
            .collect();
        let w = Workload::single("one-line", events);
        let timing = TimingParams::<f64> {
            l2_hit_penalty_cycles: 0.0,
            memory_penalty_cycles: 0.0,
            ..TimingParams::default()
        };
        let monitor = MonitorConfig { aging_clock: AgingClock::NominalTime, ..MonitorConfig::default() };
        let mut prev = 0;
        for p in RetentionProfile::<f64>::stt_ram_set() {
            let s = simulate(&w, &CacheGeometry::l1_default(), &p, &monitor, &timing).unwrap();
            prop_assert!(s.l1_hits() >= prev, "{} hits {} < {}", p.name, s.l1_hits(), prev);
            prev = s.l1_hits();
        }
    }

    #[test]
    fn energy_total_is_component_sum(evs in single_core_events(300), idx in 0usize..7) {
        let p = &RetentionProfile::<f64>::table_ii()[idx];
        let w = Workload::single("e", evs);
        let t = TimingParams::default();
        let s = simulate(&w, &CacheGeometry::l1_default(), p, &MonitorConfig::default(), &t).unwrap();
        let e = compute_energy(&s, p, &t);
        prop_assert_eq!(e.total_nj, e.dynamic_read_nj + e.dynamic_write_nj + e.leakage_nj + e.l2_charge_nj);
    }

    #[test]
    fn knn_is_affine_invariant(
        rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 4..30),
        labels in prop::collection::vec(0usize..4, 30),
        query in prop::collection::vec(-100.0f64..100.0, 3),
        scale in prop::collection::vec(0.01f64..100.0, 3),
        shift in prop::collection::vec(-1000.0f64..1000.0, 3),
        k in 1usize..4,
    ) {
        let catalog = FeatureCatalog::new("t", Feature::all()[..3].to_vec()).unwrap();
        let classes: Vec<String> = (0..4).map(|c| c.to_string()).collect();
        let y = &labels[..rows.len()];
        let tf = |r: &Vec<f64>| -> Vec<f64> { r.iter().zip(&scale).zip(&shift).map(|((x, a), b)| a * x + b).collect() };
        let moved: Vec<Vec<f64>> = rows.iter().map(tf).collect();
        let k = k.min(rows.len());
        let a = fit_rows(&catalog, &classes, &rows, y, k, &[0, 1, 2]).unwrap();
        let b = fit_rows(&catalog, &classes, &moved, y, k, &[0, 1, 2]).unwrap();

        let za = Standardizer::fit(&rows).unwrap();
        let zb = Standardizer::fit(&moved).unwrap();
        for (r, m) in rows.iter().zip(&moved) {
            for (u, v) in za.apply(r).unwrap().iter().zip(zb.apply(m).unwrap()) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
        prop_assert_eq!(a.predict(&query).unwrap(), b.predict(&tf(&query)).unwrap());
    }

    #[test]
    fn f_score_is_bounded_and_one_only_on_full_diagonal(cells in prop::collection::vec(0u64..6, 9)) {
        let rows: Vec<Vec<u64>> = cells.chunks(3).map(<[u64]>::to_vec).collect();
        let f = f_score(&ConfusionMatrix::from_rows(rows.clone()));
        prop_assert!((0.0..=1.0).contains(&f));
        let diagonal = (0..3).all(|i| (0..3).all(|j| (i == j) == (rows[i][j] > 0)));
        prop_assert_eq!(f == 1.0, diagonal);
    }

    #[test]
    fn prediction_cost_is_linear_in_selected_features(n in 2usize..30, dim in 1usize..=6) {
        let catalog = FeatureCatalog::new("t", Feature::all()[..6].to_vec()).unwrap();
        let x: Vec<Vec<f64>> = (0..n).map(|i| (0..6).map(|j| (i * 7 + j * 3) as f64 % 11.0).collect()).collect();
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let selected: Vec<usize> = (0..dim).collect();
        let m = fit_rows(&catalog, &["a".into(), "b".into()], &x, &y, 1, &selected).unwrap();
        let (_, ops) = m.predict_counted(&x[0]).unwrap();
        prop_assert_eq!(ops, (n * dim) as u64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exhaustive_argmin_is_scale_invariant(evs in prop::collection::vec((0u64..4000, any::<bool>(), 0u64..600), 200..1500), scale in 0.001f64..1000.0) {
        let events: Vec<AccessEvent> = evs
            .iter()
            .map(|&(g, w, l)| if w { AccessEvent::write(g, l * 64) } else { AccessEvent::read(g, l * 64) })
            .collect();
        let w = Workload::single("s", events);
        let config = PolicyConfig::<f64>::default();
        let table = label_exhaustive(&w, &config).unwrap();
        for p in &table.phases {
            for objective in retention_lab::energy::Objective::ALL {
                let values = p.values(objective);
                let best = p.best(objective);
                prop_assert!(values.iter().all(|v| values[best] <= *v));
                let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
                let first_min = (0..scaled.len()).fold(0, |b, i| if scaled[i] < scaled[b] { i } else { b });
                prop_assert_eq!(first_min, best);
            }
        }
    }
}
