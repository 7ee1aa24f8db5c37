#![allow(dead_code)]

use clicktree_core::model::WEIGHT_SUM_TOLERANCE;
use clicktree_core::DetectorTree;
use proptest::prelude::*;

/// Random tree: efficiencies in [0, 1], weights normalized from positive draws.
pub fn tree_strategy(max_channels: usize) -> impl Strategy<Value = DetectorTree> {
    (1..=max_channels).prop_flat_map(|n| {
        (prop::collection::vec(0.0..=1.0f64, n), prop::collection::vec(0.05..1.0f64, n)).prop_map(|(xi, raw)| {
            let total: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let drift = 1.0 - w.iter().sum::<f64>();
            w[0] += drift;
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOLERANCE);
            DetectorTree::new(xi, w).unwrap()
        })
    })
}
