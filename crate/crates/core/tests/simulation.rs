use clicktree_core::analytic::AnalyticModel;
use clicktree_core::estimator::{analyze, theta_estimate, AnalysisOptions, UncertaintyMethod};
use clicktree_core::ingest::{ingest, WindowingPolicy};
use clicktree_core::sim::{simulate, simulate_stream, SimulationConfig};
use clicktree_core::{ChannelMask, CountSummary, DetectorTree, EmitterEnsemble, NoiseModel};
use proptest::prelude::*;

fn config(m: usize, eta: f64, lambda: f64, tree: DetectorTree, pulses: u64, seed: u64) -> SimulationConfig {
    SimulationConfig::new(
        EmitterEnsemble::uniform(m, eta).unwrap(),
        NoiseModel::new(lambda).unwrap(),
        tree,
        pulses,
        seed,
    )
}

fn model_for(config: &SimulationConfig) -> AnalyticModel {
    AnalyticModel::new(config.ensemble.clone(), config.noise, config.tree.clone()).unwrap()
}

/// Every subset click frequency within `z` binomial standard errors of the model.
fn assert_consistent(config: &SimulationConfig, counts: &CountSummary, z: f64) {
    let model = model_for(config);
    let n = counts.n_trials() as f64;
    for s in config.tree.all_channels().subsets().filter(|s| !s.is_empty()) {
        let p = model.pclick_subset(s).unwrap();
        let observed = counts.count(s) as f64 / n;
        if p == 0.0 {
            assert_eq!(counts.count(s), 0, "{s}");
            continue;
        }
        let se = (p * (1.0 - p) / n).sqrt();
        assert!((observed - p).abs() <= z * se, "{s}: observed {observed}, model {p}, se {se}");
    }
}

#[test]
fn subset_frequencies_within_five_sigma() {
    let grid = [
        config(1, 0.3, 0.0, DetectorTree::balanced(4, 0.8).unwrap(), 1_000_000, 1),
        config(2, 0.5, 0.1, DetectorTree::balanced(2, 0.4).unwrap(), 1_000_000, 2),
        config(3, 0.2, 0.05, DetectorTree::new(vec![0.9, 0.5, 0.7], vec![0.5, 0.3, 0.2]).unwrap(), 1_000_000, 3),
        config(8, 0.1, 0.5, DetectorTree::balanced(4, 0.6).unwrap(), 1_000_000, 4),
        config(0, 0.0, 1.0, DetectorTree::balanced(3, 0.5).unwrap(), 1_000_000, 5),
    ];
    for c in &grid {
        assert_consistent(c, &simulate(c).unwrap(), 5.0);
    }
}

#[test]
fn heterogeneous_ensemble_within_five_sigma() {
    let c = SimulationConfig::new(
        EmitterEnsemble::heterogeneous(vec![0.9, 0.2, 0.5]).unwrap(),
        NoiseModel::new(0.05).unwrap(),
        DetectorTree::balanced(3, 0.7).unwrap(),
        1_000_000,
        11,
    );
    assert_consistent(&c, &simulate(&c).unwrap(), 5.0);
}

#[test]
fn single_photon_never_coincides() {
    let c = config(1, 1.0, 0.0, DetectorTree::balanced(2, 1.0).unwrap(), 1_000_000, 8);
    let counts = simulate(&c).unwrap();
    assert_eq!(counts.count(ChannelMask::full(2)), 0);
    let p = counts.singles(0) as f64 / 1e6;
    assert!((p - 0.5).abs() < 5.0 * (0.25f64 / 1e6).sqrt());
}

#[test]
fn theta_estimator_is_unbiased() {
    let tree = DetectorTree::balanced(2, 0.5).unwrap();
    let reps = 200;
    let estimates: Vec<f64> = (0..reps)
        .map(|r| {
            let c = config(3, 0.4, 0.05, tree.clone(), 20_000, 1000 + r);
            theta_estimate(&simulate(&c).unwrap(), ChannelMask::full(2)).unwrap().value
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let var = estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let se = (var / reps as f64).sqrt();
    let target = model_for(&config(3, 0.4, 0.05, tree, 1, 0)).theta_closed().unwrap();
    assert!((mean - target).abs() < 3.0 * se, "mean {mean}, target {target}, se {se}");
}

#[test]
fn bootstrap_and_propagation_agree_within_factor_two() {
    // Soft sanity band: the two error estimates are not required to agree exactly.
    let c = config(3, 0.3, 0.1, DetectorTree::balanced(4, 0.6).unwrap(), 200_000, 21);
    let counts = simulate(&c).unwrap();
    let propagated =
        analyze(&counts, &AnalysisOptions { uncertainty: UncertaintyMethod::Propagation, ..Default::default() })
            .unwrap();
    let boot = analyze(&counts, &AnalysisOptions::default()).unwrap();
    for (a, b) in propagated.orders.iter().zip(&boot.orders) {
        for (ca, cb) in a.combinations.iter().zip(&b.combinations) {
            for (x, y) in [(&ca.theta, &cb.theta), (&ca.g, &cb.g)] {
                let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
                assert_eq!(x.value, y.value);
                let ratio = y.std_error / x.std_error;
                assert!((0.5..=2.0).contains(&ratio), "order {}: {} vs {}", a.order, x.std_error, y.std_error);
            }
        }
        let ratio = b.theta_mean.unwrap().std_error / a.theta_mean.unwrap().std_error;
        assert!((0.5..=2.0).contains(&ratio));
    }
}

#[test]
fn bootstrap_replicates_are_deterministic() {
    let c = config(2, 0.3, 0.1, DetectorTree::balanced(3, 0.6).unwrap(), 50_000, 4);
    let counts = simulate(&c).unwrap();
    let a = analyze(&counts, &AnalysisOptions::default()).unwrap();
    let b = analyze(&counts, &AnalysisOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cluster_is_nonclassical() {
    let c = config(3, 0.2, 0.0, DetectorTree::balanced(4, 0.5).unwrap(), 2_000_000, 17);
    let report = analyze(&simulate(&c).unwrap(), &AnalysisOptions::default()).unwrap();
    let o2 = report.order(2).unwrap();
    assert_eq!(o2.combinations.len(), 6);
    assert_eq!(report.order(3).unwrap().combinations.len(), 4);
    assert_eq!(report.order(4).unwrap().combinations.len(), 1);
    assert_eq!(report.classification, clicktree_core::estimator::Classification::Nonclassical);
}

fn small_config() -> impl Strategy<Value = SimulationConfig> {
    (
        0usize..=4,
        0.0..=1.0f64,
        prop_oneof![Just(0.0), 0.0..1.5f64],
        1usize..=4,
        0.1..=1.0f64,
        1u64..200_000,
        any::<u64>(),
    )
        .prop_map(|(m, eta, lambda, n, xi, pulses, seed)| {
            let mut c = config(m, eta, lambda, DetectorTree::balanced(n, xi).unwrap(), pulses, seed);
            c.emit_stream = true;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_same_counts(c in small_config()) {
        prop_assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
        prop_assert_eq!(simulate_stream(&c).unwrap(), simulate_stream(&c).unwrap());
    }

    #[test]
    fn stream_round_trips_through_ingestion(c in small_config()) {
        let stream = simulate_stream(&c).unwrap();
        let policy = WindowingPolicy::from_header(&stream.header).unwrap();
        let (counts, diagnostics) = ingest(&stream, policy).unwrap();
        prop_assert_eq!(counts, simulate(&c).unwrap());
        prop_assert_eq!(diagnostics.out_of_window, 0);
        prop_assert_eq!(diagnostics.repeated_in_window, 0);
    }

    #[test]
    fn coincidences_bounded_by_singles(c in small_config()) {
        let counts = simulate(&c).unwrap();
        for s in c.tree.all_channels().subsets().filter(|s| s.len() >= 2) {
            for ch in s.channels() {
                prop_assert!(counts.count(s) <= counts.singles(ch));
            }
        }
    }
}
