mod common;

use clicktree_core::analytic::AnalyticModel;
use clicktree_core::estimator::{g_k, theta_k};
use clicktree_core::oracle::inclusion_exclusion;
use clicktree_core::{ChannelMask, DetectorTree, EmitterEnsemble, NoiseModel, PROBABILITY_SLACK};
use proptest::prelude::*;

fn model(m: usize, eta: f64, lambda: f64, tree: DetectorTree) -> AnalyticModel {
    AnalyticModel::new(EmitterEnsemble::uniform(m, eta).unwrap(), NoiseModel::new(lambda).unwrap(), tree).unwrap()
}

/// θ written out by hand, independent of the library path.
fn theta_formula(n: usize, m: usize, eta: f64, xi: f64) -> f64 {
    (1.0 - eta * xi).powi(m as i32) / (1.0 - eta * xi / n as f64).powi((m * n) as i32)
}

#[test]
fn theta_closed_matches_formula_grid() {
    for n in 1..=4 {
        for m in 0..=10 {
            for eta_xi in [0.01, 0.1, 0.5] {
                let th = model(m, eta_xi, 0.3, DetectorTree::balanced(n, 1.0).unwrap()).theta_closed().unwrap();
                let expected = theta_formula(n, m, eta_xi, 1.0);
                assert!((th - expected).abs() < 1e-12, "N={n} M={m}: {th} vs {expected}");
            }
        }
    }
}

#[test]
fn theta_lambda_invariance_grid() {
    for n in 2..=4 {
        for m in 1..=10 {
            for eta_xi in [0.01, 0.1, 0.5] {
                let values: Vec<f64> = [0.0, 0.01, 0.1, 1.0, 10.0]
                    .iter()
                    .map(|&l| model(m, eta_xi, l, DetectorTree::balanced(n, 1.0).unwrap()).theta_closed().unwrap())
                    .collect();
                let spread =
                    values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
                assert!(spread < 1e-12, "N={n} M={m} ηξ={eta_xi}: {values:?}");
            }
        }
    }
}

#[test]
fn theta_via_probabilities_is_lambda_invariant() {
    // Same check routed through p0_all / Π p0_single rather than the λ-free formula.
    for n in 2..=4 {
        for m in 1..=10 {
            let tree = DetectorTree::balanced(n, 0.5).unwrap();
            let base = model(m, 0.2, 0.0, tree.clone());
            let reference = base.p0_all().unwrap() / (0..n).map(|c| base.p0_single(c).unwrap()).product::<f64>();
            for l in [0.01, 0.1, 1.0, 10.0] {
                let mm = model(m, 0.2, l, tree.clone());
                let ratio = mm.p0_all().unwrap() / (0..n).map(|c| mm.p0_single(c).unwrap()).product::<f64>();
                assert!((ratio - reference).abs() < 1e-12, "N={n} M={m} λ={l}");
            }
        }
    }
}

#[test]
fn m_zero_is_exactly_classical() {
    for n in 1..=4 {
        for l in [0.0, 0.01, 0.5, 3.0, 10.0] {
            let m = model(0, 0.7, l, DetectorTree::balanced(n, 0.6).unwrap());
            assert_eq!(m.theta_closed().unwrap(), 1.0);
            if l > 0.0 {
                assert_eq!(m.g_closed().unwrap(), 1.0);
            }
        }
    }
}

#[test]
fn ensemble_scaling_is_exponential() {
    for eta_xi in [0.01, 0.1, 0.5, 0.9] {
        let tree = DetectorTree::balanced(2, 1.0).unwrap();
        let one = model(1, eta_xi, 0.0, tree.clone()).theta_closed().unwrap();
        for m in 1..=20 {
            let th = model(m, eta_xi, 0.2, tree.clone()).theta_closed().unwrap();
            assert!((th - one.powi(m as i32)).abs() < 1e-12, "M={m}");
        }
    }
}

#[test]
fn theta_strictly_decreasing_below_one() {
    for eta_xi in [0.01, 0.3, 0.99] {
        let tree = DetectorTree::balanced(2, 1.0).unwrap();
        let mut previous = 1.0;
        for m in 1..=15 {
            let th = model(m, eta_xi, 0.0, tree.clone()).theta_closed().unwrap();
            assert!(th < previous, "M={m}: {th} !< {previous}");
            previous = th;
        }
    }
    for m in 1..=5 {
        assert_eq!(model(m, 1.0, 0.0, DetectorTree::balanced(2, 1.0).unwrap()).theta_closed().unwrap(), 0.0);
    }
}

#[test]
fn g_nondecreasing_toward_one() {
    for eta_xi in [0.001, 0.1, 0.5] {
        let tree = DetectorTree::balanced(2, 1.0).unwrap();
        let mut previous = 0.0;
        for m in 1..=30 {
            let g = model(m, eta_xi, 0.0, tree.clone()).g_closed().unwrap();
            assert!(g >= previous && g < 1.0, "M={m}: {g}");
            previous = g;
        }
    }
}

#[test]
fn small_efficiency_g_limit() {
    for m in 2..=6 {
        let g = model(m, 1e-4, 0.0, DetectorTree::balanced(2, 1.0).unwrap()).g_closed().unwrap();
        assert!((g - (1.0 - 1.0 / m as f64)).abs() < 1e-4, "M={m}: {g}");
    }
}

#[test]
fn channel_efficiency_sensitivity() {
    let source = |xi: Vec<f64>| {
        let tree = DetectorTree::with_efficiencies(xi).unwrap();
        model(3, 0.1, 0.01, tree)
    };
    let even = source(vec![0.4, 0.4]);
    let skew = source(vec![0.6, 0.2]);
    let pair = ChannelMask::full(2);
    let (g_even, g_skew) = (even.g_subset(pair).unwrap(), skew.g_subset(pair).unwrap());
    assert!((g_even - g_skew).abs() / g_even < 1e-3);
    let (d_even, d_skew) = (1.0 - even.theta_subset(pair).unwrap(), 1.0 - skew.theta_subset(pair).unwrap());
    assert!((d_even - d_skew).abs() / d_even.abs() > 0.1, "{d_even} vs {d_skew}");
}

fn uniform_source() -> impl Strategy<Value = (usize, f64, f64)> {
    (0usize..=10, 0.0..=1.0f64, prop_oneof![Just(0.0), 0.0..5.0f64])
}

proptest! {
    #[test]
    fn probabilities_in_unit_interval((m, eta, lambda) in uniform_source(), tree in common::tree_strategy(4)) {
        let model = model(m, eta, lambda, tree);
        for s in model.tree().all_channels().subsets().filter(|s| !s.is_empty()) {
            let p0 = model.p0_subset(s).unwrap();
            let pc = model.pclick_subset(s).unwrap();
            prop_assert!((0.0..=1.0 + PROBABILITY_SLACK).contains(&p0));
            prop_assert!((0.0..=1.0 + PROBABILITY_SLACK).contains(&pc));
        }
    }

    #[test]
    fn closed_form_matches_generic_path((m, eta, lambda) in uniform_source(), n in 1usize..=4, xi in 0.0..=1.0f64) {
        let model = model(m, eta, lambda, DetectorTree::balanced(n, xi).unwrap());
        for s in model.tree().all_channels().subsets().filter(|s| !s.is_empty()) {
            let closed = model.p0_subset_closed(s).unwrap();
            let generic = model.p0_subset_generic(s).unwrap();
            prop_assert!((closed - generic.value).abs() <= generic.uncertainty + 1e-14, "{s}: {closed} vs {generic:?}");
            // The truncated tail's click probability is a fraction of its mass.
            let closed = model.pclick_subset_closed(s).unwrap();
            let generic = model.pclick_subset_generic(s).unwrap();
            prop_assert!((closed - generic).abs() <= model.distribution().tail_bound() + 1e-14, "{s}: {closed} vs {generic}");
        }
    }

    #[test]
    fn pclick_is_inclusion_exclusion_of_p0((m, eta, lambda) in uniform_source(), tree in common::tree_strategy(4)) {
        let model = model(m, eta, lambda, tree);
        for s in model.tree().all_channels().subsets().filter(|s| !s.is_empty()) {
            let expected = inclusion_exclusion(s, |t| model.p0_subset(t).unwrap());
            prop_assert!((model.pclick_subset(s).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_invariance_random(m in 1usize..=10, eta in 0.0..0.99f64, xi in 0.0..=1.0f64, n in 2usize..=4, l in 0.0..10.0f64) {
        let tree = DetectorTree::balanced(n, xi).unwrap();
        let a = model(m, eta, 0.0, tree.clone()).theta_closed().unwrap();
        let b = model(m, eta, l, tree).theta_closed().unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn estimator_on_exact_probabilities_reproduces_closed_forms(
        m in 1usize..=8, eta in 0.01..0.9f64, lambda in 0.0..2.0f64, xi in 0.05..=1.0f64, n in 2usize..=4,
    ) {
        let model = model(m, eta, lambda, DetectorTree::balanced(n, xi).unwrap());
        let table = model.probability_table().unwrap();
        let all = ChannelMask::full(n);
        let th = theta_k(&table, all).unwrap();
        let closed = model.theta_closed().unwrap();
        // No-click probabilities come back from an alternating sum of 2^n
        // click probabilities, so their absolute rounding error is ~2^n ε.
        let rounding = 8.0 * (1u32 << n) as f64 * f64::EPSILON
            * (1.0 / table.no_click(all) + (0..n).map(|i| 1.0 / table.no_click(ChannelMask::from_channels(&[i]))).sum::<f64>());
        prop_assert!((th - closed).abs() < 1e-12 + closed * rounding, "θ {th} vs {closed}");
        if let Ok(g) = model.g_closed() {
            let est = g_k(&table, all).unwrap();
            prop_assert!((est - g).abs() < 1e-12 * g.max(1.0), "g {est} vs {g}");
        }
    }
}
