use std::collections::BTreeSet;

use edgeadapt::fsm::FsmSpec;
use edgeadapt::objective::OBJECTIVE_COUNT;
use edgeadapt::search::{exhaustive_search, nsga2_search};
use edgeadapt::sim::{compare, simulate_adaptive, simulate_static, SimConfig};
use edgeadapt::wgra::{default_mode_specs, filter_front, select_from_matrix, select_modes, DEFAULT_ZETA};
use edgeadapt::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup() -> (SearchSpace, SyntheticDevice) {
    let space = SearchSpace::pedestrian();
    let device = SyntheticDevice::new(DeviceModelParams::synthetic(), &space).unwrap();
    (space, device)
}

fn pairwise_front(store: &TrialStore) -> BTreeSet<usize> {
    let trials = store.trials();
    let better = |a: &ObjectiveVector, b: &ObjectiveVector| {
        let ge = a.acc >= b.acc && a.eng <= b.eng && a.rate >= b.rate;
        let gt = a.acc > b.acc || a.eng < b.eng || a.rate > b.rate;
        ge && gt
    };
    trials
        .iter()
        .filter(|t| !trials.iter().any(|u| better(&u.objectives, &t.objectives)))
        .map(|t| t.index)
        .collect()
}

#[test]
fn exhaustive_front_matches_pairwise_filter() {
    let (space, device) = setup();
    let store = exhaustive_search(&space, &device).unwrap();
    assert_eq!(store.trials().len(), 3402);
    let front = extract_front(&store, &DEFAULT_DIRECTIONS);
    let got: BTreeSet<usize> = front.members().iter().map(|t| t.index).collect();
    assert_eq!(got, pairwise_front(&store));
}

#[test]
fn bundled_modes_on_oracle_front() {
    let (space, device) = setup();
    let front = extract_front(&exhaustive_search(&space, &device).unwrap(), &DEFAULT_DIRECTIONS);
    let modes = select_modes(&front, &default_mode_specs(), DEFAULT_ZETA).unwrap();
    let chosen: Vec<(String, String)> = modes.iter().map(|m| (m.name().to_string(), m.chosen.to_string())).collect();
    let expect = [
        ("power-saving", "(640x480, 1, SSDLite MobileDet, 0.4, true)"),
        ("low-energy", "(1280x720, 1, EfficientDet-Lite3, 0.4, true)"),
        ("high-accuracy", "(1920x1080, 1, EfficientDet-Lite3, 0.4, true)"),
        ("high-rate", "(1920x1080, 5, EfficientDet-Lite3, 0.4, true)"),
        ("balanced", "(1920x1080, 1, EfficientDet-Lite3, 0.4, true)"),
    ];
    let expect: Vec<(String, String)> = expect.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    assert_eq!(chosen, expect);
    for m in &modes {
        assert!(wgra::satisfies_thresholds(&m.objectives, &m.spec.thresholds, &DEFAULT_DIRECTIONS));
    }
}

#[test]
fn affine_rescaling_keeps_selection() {
    let (space, device) = setup();
    let front = extract_front(&exhaustive_search(&space, &device).unwrap(), &DEFAULT_DIRECTIONS);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in default_mode_specs() {
        let filtered = filter_front(&front, &spec.thresholds, &DEFAULT_DIRECTIONS).unwrap();
        let raw: Vec<[f64; OBJECTIVE_COUNT]> = filtered.objectives().iter().map(|v| v.to_array()).collect();
        let keys: Vec<usize> = filtered.members().iter().map(|t| t.index).collect();
        let (base, _) = select_from_matrix(&raw, &keys, &spec.weights, &DEFAULT_DIRECTIONS, DEFAULT_ZETA).unwrap();
        for _ in 0..5 {
            let scale: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.01..100.0));
            let shift: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-50.0..50.0));
            let moved: Vec<_> = raw
                .iter()
                .map(|r| std::array::from_fn(|j| r[j] * scale[j] + shift[j]))
                .collect();
            let (idx, _) = select_from_matrix(&moved, &keys, &spec.weights, &DEFAULT_DIRECTIONS, DEFAULT_ZETA).unwrap();
            assert_eq!(idx, base, "mode {}", spec.name);
        }
    }
}

#[test]
fn nsga2_is_seed_deterministic() {
    let (space, device) = setup();
    let run = |seed| {
        let budget = SearchBudget::new(&space, 200, 40, seed).unwrap();
        let store = nsga2_search(&space, &device, budget, &DEFAULT_DIRECTIONS).unwrap();
        let mut log = Vec::new();
        store.write_log(&mut log).unwrap();
        log
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn replay_compare_end_to_end() {
    let (space, device) = setup();
    let front = extract_front(&exhaustive_search(&space, &device).unwrap(), &DEFAULT_DIRECTIONS);
    let modes = select_modes(&front, &default_mode_specs(), DEFAULT_ZETA).unwrap();
    let config = SimConfig::default();
    let scenario = generate_scenario(ScenarioKind::Weekdays, 9);
    let mut fsm = FsmRuntime::new(FsmSpec::pedestrian(), &modes).unwrap();
    let mut reports = vec![simulate_adaptive(&scenario, &mut fsm, &device, 9, &config, "adaptive").unwrap()];
    for m in &modes {
        reports.push(simulate_static(&scenario, m, &device, 9, &config).unwrap());
    }
    assert_eq!(reports[0].windows.len(), 24);
    let table = compare(&reports, 3).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert_eq!(table.deltas.len(), 5);
    assert_eq!(table.boxplots.len(), 6 * 8);
    let csv = report::comparison_table(&table).render(report::Format::Csv);
    assert!(csv.starts_with("subject,total_energy_wh,"));
    assert_eq!(csv, report::comparison_table(&compare(&reports, 3).unwrap()).render(report::Format::Csv));
}

#[test]
fn weekday_peaks_engage_costlier_modes() {
    let (space, device) = setup();
    let front = extract_front(&exhaustive_search(&space, &device).unwrap(), &DEFAULT_DIRECTIONS);
    let modes = select_modes(&front, &default_mode_specs(), DEFAULT_ZETA).unwrap();
    for seed in 0..5 {
        let scenario = generate_scenario(ScenarioKind::Weekdays, seed);
        let mut fsm = FsmRuntime::new(FsmSpec::pedestrian(), &modes).unwrap();
        let report = simulate_adaptive(&scenario, &mut fsm, &device, seed, &SimConfig::default(), "adaptive").unwrap();
        let timeline = report.mode_timeline();
        for peak in [6..=8, 12..=13, 17..=19] {
            assert!(
                peak.clone().any(|h| matches!(timeline[h], "high-accuracy" | "high-rate")),
                "seed {seed}: {timeline:?}"
            );
        }
        assert!(timeline[..=5].iter().all(|m| matches!(*m, "power-saving" | "low-energy")));
    }
}
