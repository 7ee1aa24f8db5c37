//! θ⁽ᵏ⁾ and g⁽ᵏ⁾ estimators (k = 2, 3, 4) from sampled click probabilities.
//!
//! For a channel combination `S` of size `k`:
//!
//! ```text
//! θ_S = Σ_{T⊆S} (−1)^{|T|} P_click[T]  /  Π_{i∈S} (1 − P_click[i])
//! g_S = P_click[S]                     /  Π_{i∈S} P_click[i]
//! ```
//!
//! where `P_click[∅] = 1` and each probability is a count divided by the
//! number of trials. The θ numerator is the sampled probability that no
//! channel of `S` clicks.
//!
//! Uncertainties come either from first-order propagation over the
//! multinomial click-pattern counts or from a bootstrap that resamples pulses
//! (equivalently, draws a multinomial sample of the pattern histogram). Both
//! treat each per-order mean as a single function of the pattern
//! probabilities, so correlations between combinations that share channels
//! are accounted for.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution};

use crate::rng::{stream_rng, DOMAIN_BOOTSTRAP};
use crate::{ChannelMask, CountSummary, Error, ProbabilityTable, Result};

pub const DEFAULT_K_SIGMA: f64 = 3.0;
pub const DEFAULT_BOOTSTRAP_REPLICATES: usize = 200;
pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 4;

/// A value with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub const fn new(value: f64, std_error: f64) -> Self {
        Estimate { value, std_error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Theta,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyMethod {
    Propagation,
    Bootstrap { replicates: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Weights `1/σ_c²`; falls back to equal weights when any combination
    /// has zero or undefined uncertainty.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Classical,
    Nonclassical,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub k_sigma: f64,
    pub uncertainty: UncertaintyMethod,
    pub weighting: Weighting,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            k_sigma: DEFAULT_K_SIGMA,
            uncertainty: UncertaintyMethod::Bootstrap { replicates: DEFAULT_BOOTSTRAP_REPLICATES, seed: 0 },
            weighting: Weighting::Unweighted,
        }
    }
}

fn check_order(table: &ProbabilityTable, mask: ChannelMask) -> Result<()> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&mask.len()) {
        return Err(Error::invalid("order", "combinations must hold 2, 3 or 4 channels"));
    }
    if mask.span() > table.channels() {
        return Err(Error::ChannelOutOfRange { channel: mask.span() - 1, channels: table.channels() });
    }
    Ok(())
}

/// θ over the channels of `mask` from click probabilities.
pub fn theta_k(table: &ProbabilityTable, mask: ChannelMask) -> Result<f64> {
    check_order(table, mask)?;
    theta_unchecked(table, mask)
}

/// g over the channels of `mask` from click probabilities.
pub fn g_k(table: &ProbabilityTable, mask: ChannelMask) -> Result<f64> {
    check_order(table, mask)?;
    g_unchecked(table, mask)
}

fn theta_unchecked(table: &ProbabilityTable, mask: ChannelMask) -> Result<f64> {
    let mut denominator = 1.0;
    for c in mask.channels() {
        denominator *= 1.0 - table.single(c);
    }
    if denominator == 0.0 {
        return Err(Error::UndefinedEstimator { reason: "a channel clicked in every pulse" });
    }
    Ok(table.no_click(mask) / denominator)
}

fn g_unchecked(table: &ProbabilityTable, mask: ChannelMask) -> Result<f64> {
    let mut denominator = 1.0;
    for c in mask.channels() {
        denominator *= table.single(c);
    }
    if denominator == 0.0 {
        return Err(Error::UndefinedEstimator { reason: "a channel never clicked" });
    }
    Ok(table.click(mask) / denominator)
}

fn evaluate(table: &ProbabilityTable, stat: Statistic, mask: ChannelMask) -> Result<f64> {
    match stat {
        Statistic::Theta => theta_unchecked(table, mask),
        Statistic::G => g_unchecked(table, mask),
    }
}

/// Gradient of the statistic with respect to the click-pattern probabilities.
fn gradient(table: &ProbabilityTable, stat: Statistic, mask: ChannelMask, value: f64) -> Vec<f64> {
    let patterns = 1usize << table.channels();
    let singles: Vec<(usize, f64)> = mask.channels().map(|c| (c, table.single(c))).collect();
    let mut grad = vec![0.0; patterns];
    match stat {
        Statistic::Theta => {
            let denominator: f64 = singles.iter().map(|(_, p)| 1.0 - p).product();
            for (s, g) in grad.iter_mut().enumerate() {
                let pattern = ChannelMask::from_bits(s as u32);
                let mut d = if pattern.intersects(mask) { 0.0 } else { 1.0 / denominator };
                for &(c, p) in &singles {
                    if !pattern.contains(c) {
                        d -= value / (1.0 - p);
                    }
                }
                *g = d;
            }
        }
        Statistic::G => {
            let denominator: f64 = singles.iter().map(|(_, p)| p).product();
            for (s, g) in grad.iter_mut().enumerate() {
                let pattern = ChannelMask::from_bits(s as u32);
                let mut d = if mask.is_subset_of(pattern) { 1.0 / denominator } else { 0.0 };
                for &(c, p) in &singles {
                    if pattern.contains(c) {
                        d -= value / p;
                    }
                }
                *g = d;
            }
        }
    }
    grad
}

/// Delta-method variance of a smooth function of multinomial frequencies.
fn multinomial_std_error(counts: &CountSummary, grad: &[f64]) -> f64 {
    let n = counts.n_trials() as f64;
    let (mut first, mut second) = (0.0, 0.0);
    for (&c, &g) in counts.patterns().iter().zip(grad) {
        let p = c as f64 / n;
        first += p * g;
        second += p * g * g;
    }
    libm::sqrt(((second - first * first) / n).max(0.0))
}

fn propagated(counts: &CountSummary, table: &ProbabilityTable, stat: Statistic, mask: ChannelMask) -> Result<Estimate> {
    check_order(table, mask)?;
    let value = evaluate(table, stat, mask)?;
    let grad = gradient(table, stat, mask, value);
    Ok(Estimate::new(value, multinomial_std_error(counts, &grad)))
}

/// θ over `mask` with a propagated uncertainty.
pub fn theta_estimate(counts: &CountSummary, mask: ChannelMask) -> Result<Estimate> {
    propagated(counts, &ProbabilityTable::from_counts(counts)?, Statistic::Theta, mask)
}

/// g over `mask` with a propagated uncertainty.
pub fn g_estimate(counts: &CountSummary, mask: ChannelMask) -> Result<Estimate> {
    propagated(counts, &ProbabilityTable::from_counts(counts)?, Statistic::G, mask)
}

/// θ and g of one channel combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationEstimate {
    pub channels: ChannelMask,
    pub theta: Result<Estimate, Error>,
    pub g: Result<Estimate, Error>,
}

impl CombinationEstimate {
    pub fn get(&self, stat: Statistic) -> &Result<Estimate, Error> {
        match stat {
            Statistic::Theta => &self.theta,
            Statistic::G => &self.g,
        }
    }
}

/// All combinations of one order with their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimates {
    pub order: usize,
    pub combinations: Vec<CombinationEstimate>,
    pub theta_mean: Option<Estimate>,
    pub g_mean: Option<Estimate>,
    /// False when none of the channels involved ever clicked.
    pub informative: bool,
    /// k-fold coincidences summed over the combinations; `None` for
    /// precomputed inputs. With none at all the g values are 0 ± 0, which
    /// carries no evidence, so the g verdict is inconclusive.
    pub coincidences: Option<u64>,
    pub theta_verdict: Classification,
    pub g_verdict: Classification,
}

impl OrderEstimates {
    /// Whether the g aggregate can support a verdict.
    pub fn g_informative(&self) -> bool {
        self.informative && self.coincidences != Some(0)
    }

    pub fn mean(&self, stat: Statistic) -> Option<Estimate> {
        match stat {
            Statistic::Theta => self.theta_mean,
            Statistic::G => self.g_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub k_sigma: f64,
    /// `None` for precomputed inputs.
    pub method: Option<UncertaintyMethod>,
    pub weighting: Weighting,
    pub n_trials: Option<u64>,
    pub orders: Vec<OrderEstimates>,
    pub classification: Classification,
    /// Aggregate g⁽²⁾ below 1/2 by more than k·σ.
    pub single_emitter_candidate: bool,
}

impl EstimateReport {
    pub fn order(&self, order: usize) -> Option<&OrderEstimates> {
        self.orders.iter().find(|o| o.order == order)
    }
}

/// Classicality verdict of one aggregate under the k·σ rule.
///
/// Nonclassical iff `mean + kσ < 1`. Otherwise the value is consistent with
/// the classical bound and reported as classical, unless there is no
/// informative data at all.
pub fn verdict(mean: Option<Estimate>, informative: bool, k_sigma: f64) -> Classification {
    match mean {
        Some(e) if informative && e.value.is_finite() && e.std_error.is_finite() => {
            if e.value + k_sigma * e.std_error < 1.0 {
                Classification::Nonclassical
            } else {
                Classification::Classical
            }
        }
        _ => Classification::Inconclusive,
    }
}

fn finish_report(
    orders: Vec<OrderEstimates>,
    k_sigma: f64,
    method: Option<UncertaintyMethod>,
    weighting: Weighting,
    n_trials: Option<u64>,
) -> EstimateReport {
    let combine = |verdicts: &mut dyn Iterator<Item = Classification>| {
        verdicts.fold(Classification::Inconclusive, |acc, v| match (acc, v) {
            (Classification::Nonclassical, _) | (_, Classification::Nonclassical) => Classification::Nonclassical,
            (Classification::Classical, _) | (_, Classification::Classical) => Classification::Classical,
            _ => Classification::Inconclusive,
        })
    };
    // θ decides; g is the secondary indicator when no θ verdict is available.
    let classification = match combine(&mut orders.iter().map(|o| o.theta_verdict)) {
        Classification::Inconclusive => combine(&mut orders.iter().map(|o| o.g_verdict)),
        v => v,
    };
    let single_emitter_candidate = orders
        .iter()
        .find(|o| o.order == 2 && o.g_informative())
        .and_then(|o| o.g_mean)
        .is_some_and(|g| g.value.is_finite() && g.std_error.is_finite() && g.value + k_sigma * g.std_error < 0.5);
    EstimateReport { k_sigma, method, weighting, n_trials, orders, classification, single_emitter_candidate }
}

fn weights(estimates: &[Estimate], weighting: Weighting) -> Vec<f64> {
    let n = estimates.len() as f64;
    let equal = || vec![1.0 / n; estimates.len()];
    match weighting {
        Weighting::Unweighted => equal(),
        Weighting::InverseVariance => {
            if estimates.iter().any(|e| !(e.std_error > 0.0 && e.std_error.is_finite())) {
                return equal();
            }
            let raw: Vec<f64> = estimates.iter().map(|e| 1.0 / (e.std_error * e.std_error)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        }
    }
}

/// Input to [`aggregate_and_classify`]: estimates computed elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedOrder {
    pub order: usize,
    pub combinations: Vec<CombinationEstimate>,
}

fn precomputed_mean(combinations: &[CombinationEstimate], stat: Statistic, weighting: Weighting) -> Option<Estimate> {
    let ests: Vec<Estimate> = combinations.iter().filter_map(|c| c.get(stat).as_ref().ok().copied()).collect();
    if ests.is_empty() {
        return None;
    }
    let w = weights(&ests, weighting);
    let value = ests.iter().zip(&w).map(|(e, w)| w * e.value).sum();
    let variance: f64 = ests.iter().zip(&w).map(|(e, w)| w * w * e.std_error * e.std_error).sum();
    Some(Estimate::new(value, libm::sqrt(variance)))
}

/// Average precomputed per-combination estimates and classify them. The
/// combinations are treated as independent when combining uncertainties.
pub fn aggregate_and_classify(inputs: &[PrecomputedOrder], k_sigma: f64, weighting: Weighting) -> EstimateReport {
    let orders = inputs
        .iter()
        .map(|input| {
            let theta_mean = precomputed_mean(&input.combinations, Statistic::Theta, weighting);
            let g_mean = precomputed_mean(&input.combinations, Statistic::G, weighting);
            OrderEstimates {
                order: input.order,
                combinations: input.combinations.clone(),
                theta_mean,
                g_mean,
                informative: true,
                coincidences: None,
                theta_verdict: verdict(theta_mean, true, k_sigma),
                g_verdict: verdict(g_mean, true, k_sigma),
            }
        })
        .collect();
    finish_report(orders, k_sigma, None, weighting, None)
}

/// Draw a bootstrap replicate: `n_trials` pulses resampled with replacement,
/// i.e. a multinomial sample of the pattern histogram.
pub fn bootstrap_replicate(counts: &CountSummary, seed: u64, replicate: u64) -> CountSummary {
    let mut rng = stream_rng(seed, DOMAIN_BOOTSTRAP, replicate);
    let mut remaining = counts.n_trials();
    let mut remaining_mass = remaining;
    let mut out = vec![0u64; counts.patterns().len()];
    for (slot, &c) in out.iter_mut().zip(counts.patterns()) {
        if remaining == 0 {
            break;
        }
        if c == 0 {
            continue;
        }
        let k = if c >= remaining_mass {
            remaining
        } else {
            Binomial::new(remaining, c as f64 / remaining_mass as f64).expect("probability in [0, 1]").sample(&mut rng)
        };
        *slot = k;
        remaining -= k;
        remaining_mass -= c;
    }
    CountSummary::from_patterns(counts.channels(), out).expect("same shape")
}

fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some(libm::sqrt(ss / (n - 1.0)))
}

/// Which combinations enter each order's aggregate, and with what weight.
struct Aggregate {
    members: Vec<usize>,
    weights: Vec<f64>,
}

fn aggregate_plan(combinations: &[CombinationEstimate], stat: Statistic, weighting: Weighting) -> Option<Aggregate> {
    let members: Vec<usize> = (0..combinations.len()).filter(|&i| combinations[i].get(stat).is_ok()).collect();
    if members.is_empty() {
        return None;
    }
    let ests: Vec<Estimate> = members.iter().map(|&i| *combinations[i].get(stat).as_ref().unwrap()).collect();
    Some(Aggregate { weights: weights(&ests, weighting), members })
}

/// Estimate θ and g at every order from 2 to `min(4, N)`, aggregate each
/// order and classify.
pub fn analyze(counts: &CountSummary, options: &AnalysisOptions) -> Result<EstimateReport> {
    let table = ProbabilityTable::from_counts(counts)?;
    let n = counts.channels();
    let stats = [Statistic::Theta, Statistic::G];
    let mut orders = Vec::new();
    let mut plans = Vec::new();
    for order in MIN_ORDER..=MAX_ORDER.min(n) {
        let masks = ChannelMask::combinations(n, order);
        let combinations: Vec<CombinationEstimate> = masks
            .iter()
            .map(|&m| CombinationEstimate {
                channels: m,
                theta: propagated(counts, &table, Statistic::Theta, m),
                g: propagated(counts, &table, Statistic::G, m),
            })
            .collect();
        let informative = masks.iter().any(|m| m.channels().any(|c| table.single(c) > 0.0));
        let mut means = [None, None];
        let mut order_plans = [None, None];
        for (slot, &stat) in stats.iter().enumerate() {
            if let Some(plan) = aggregate_plan(&combinations, stat, options.weighting) {
                let mut grad = vec![0.0; counts.patterns().len()];
                let mut value = 0.0;
                for (&i, &w) in plan.members.iter().zip(&plan.weights) {
                    let e = combinations[i].get(stat).as_ref().unwrap();
                    value += w * e.value;
                    for (acc, g) in grad.iter_mut().zip(gradient(&table, stat, masks[i], e.value)) {
                        *acc += w * g;
                    }
                }
                means[slot] = Some(Estimate::new(value, multinomial_std_error(counts, &grad)));
                order_plans[slot] = Some(plan);
            }
        }
        orders.push(OrderEstimates {
            order,
            combinations,
            theta_mean: means[0],
            g_mean: means[1],
            informative,
            coincidences: Some(masks.iter().map(|&m| counts.count(m)).sum()),
            theta_verdict: Classification::Inconclusive,
            g_verdict: Classification::Inconclusive,
        });
        plans.push(order_plans);
    }

    if let UncertaintyMethod::Bootstrap { replicates, seed } = options.uncertainty {
        apply_bootstrap(counts, &mut orders, &plans, replicates, seed)?;
    }

    for o in &mut orders {
        o.theta_verdict = verdict(o.theta_mean, o.informative, options.k_sigma);
        o.g_verdict = verdict(o.g_mean, o.g_informative(), options.k_sigma);
    }
    Ok(finish_report(orders, options.k_sigma, Some(options.uncertainty), options.weighting, Some(counts.n_trials())))
}

fn apply_bootstrap(
    counts: &CountSummary,
    orders: &mut [OrderEstimates],
    plans: &[[Option<Aggregate>; 2]],
    replicates: usize,
    seed: u64,
) -> Result<()> {
    let stats = [Statistic::Theta, Statistic::G];
    // samples[order][stat][combination] and means[order][stat]
    let mut combo_samples: Vec<[Vec<Vec<f64>>; 2]> = orders
        .iter()
        .map(|o| [vec![Vec::new(); o.combinations.len()], vec![Vec::new(); o.combinations.len()]])
        .collect();
    let mut mean_samples: Vec<[Vec<f64>; 2]> = orders.iter().map(|_| [Vec::new(), Vec::new()]).collect();

    for r in 0..replicates {
        let sample = bootstrap_replicate(counts, seed, r as u64);
        let table = ProbabilityTable::from_counts(&sample)?;
        for (oi, o) in orders.iter().enumerate() {
            for (si, &stat) in stats.iter().enumerate() {
                let values: Vec<Option<f64>> =
                    o.combinations.iter().map(|c| evaluate(&table, stat, c.channels).ok()).collect();
                for (ci, v) in values.iter().enumerate() {
                    if let Some(v) = v {
                        combo_samples[oi][si][ci].push(*v);
                    }
                }
                if let Some(plan) = &plans[oi][si] {
                    let mean: Option<f64> =
                        plan.members.iter().zip(&plan.weights).map(|(&i, &w)| values[i].map(|v| w * v)).sum();
                    if let Some(m) = mean {
                        mean_samples[oi][si].push(m);
                    }
                }
            }
        }
    }

    for (oi, o) in orders.iter_mut().enumerate() {
        for (ci, c) in o.combinations.iter_mut().enumerate() {
            for (si, slot) in [&mut c.theta, &mut c.g].into_iter().enumerate() {
                if let (Ok(e), Some(sd)) = (slot.as_mut(), sample_std(&combo_samples[oi][si][ci])) {
                    e.std_error = sd;
                }
            }
        }
        for (si, slot) in [&mut o.theta_mean, &mut o.g_mean].into_iter().enumerate() {
            if let (Some(e), Some(sd)) = (slot.as_mut(), sample_std(&mean_samples[oi][si])) {
                e.std_error = sd;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts2(n: u64, n1: u64, n2: u64, n12: u64) -> CountSummary {
        CountSummary::from_subset_counts(2, &[n, n1, n2, n12]).unwrap()
    }

    fn pair() -> ChannelMask {
        ChannelMask::full(2)
    }

    #[test]
    fn dark_run_theta_is_one() {
        let c = counts2(1000, 0, 0, 0);
        assert_eq!(theta_estimate(&c, pair()).unwrap().value, 1.0);
        assert!(matches!(g_estimate(&c, pair()), Err(Error::UndefinedEstimator { .. })));
        let r = analyze(&c, &AnalysisOptions::default()).unwrap();
        assert_eq!(r.classification, Classification::Inconclusive);
        assert!(!r.single_emitter_candidate);
    }

    #[test]
    fn independent_channels() {
        let c = counts2(1000, 500, 500, 250);
        assert_eq!(theta_estimate(&c, pair()).unwrap().value, 1.0);
        assert_eq!(g_estimate(&c, pair()).unwrap().value, 1.0);
    }

    #[test]
    fn worked_examples() {
        let c = counts2(1_000_000, 100_000, 100_000, 0);
        let theta = theta_estimate(&c, pair()).unwrap().value;
        assert!((theta - 0.8 / 0.81).abs() < 1e-15);
        assert!((theta - 0.98765).abs() < 1e-5);
        assert_eq!(g_estimate(&c, pair()).unwrap().value, 0.0);
        let c = counts2(1_000_000, 100_000, 100_000, 5000);
        assert!((g_estimate(&c, pair()).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn always_clicking_channel_is_undefined() {
        let c = counts2(100, 100, 30, 30);
        assert!(matches!(theta_estimate(&c, pair()), Err(Error::UndefinedEstimator { .. })));
    }

    #[test]
    fn order_bounds() {
        let c = CountSummary::new(4).unwrap();
        let t = ProbabilityTable::from_click_probabilities(4, {
            let mut v = vec![0.0; 16];
            v[0] = 1.0;
            v
        })
        .unwrap();
        assert!(theta_k(&t, ChannelMask::from_channels(&[1])).is_err());
        assert!(g_k(&t, ChannelMask::from_channels(&[0, 5])).is_err());
        assert!(analyze(&c, &AnalysisOptions::default()).is_err());
    }

    #[test]
    fn order_three_and_four_match_explicit_expressions() {
        // Hand-written order-3 inclusion-exclusion on an arbitrary consistent table.
        let patterns: Vec<u64> = (0..16u64).map(|s| 1000 + 37 * s * s % 101).collect();
        let c = CountSummary::from_patterns(4, patterns).unwrap();
        let t = ProbabilityTable::from_counts(&c).unwrap();
        let p = |ch: &[usize]| t.click(ChannelMask::from_channels(ch));
        let (i, j, k, l) = (0, 1, 2, 3);
        let num3 = 1.0 - p(&[i]) - p(&[j]) - p(&[k]) + p(&[i, j]) + p(&[i, k]) + p(&[j, k]) - p(&[i, j, k]);
        let den3 = (1.0 - p(&[i])) * (1.0 - p(&[j])) * (1.0 - p(&[k]));
        let theta3 = theta_k(&t, ChannelMask::from_channels(&[i, j, k])).unwrap();
        assert!((theta3 - num3 / den3).abs() < 1e-14);
        let num4 = 1.0 - p(&[i]) - p(&[j]) - p(&[k]) - p(&[l])
            + p(&[i, j])
            + p(&[i, k])
            + p(&[i, l])
            + p(&[j, k])
            + p(&[j, l])
            + p(&[k, l])
            - p(&[i, j, k])
            - p(&[i, j, l])
            - p(&[i, k, l])
            - p(&[j, k, l])
            + p(&[i, j, k, l]);
        let den4: f64 = (0..4).map(|c| 1.0 - p(&[c])).product();
        let theta4 = theta_k(&t, ChannelMask::full(4)).unwrap();
        assert!((theta4 - num4 / den4).abs() < 1e-14);
        let g4 = g_k(&t, ChannelMask::full(4)).unwrap();
        let g4_expected = p(&[0, 1, 2, 3]) / (p(&[0]) * p(&[1]) * p(&[2]) * p(&[3]));
        assert!((g4 - g4_expected).abs() < 1e-12);
    }

    #[test]
    fn propagated_error_matches_finite_differences() {
        // Independent check of the analytic gradient: perturb the pattern
        // probabilities numerically and rebuild the delta-method variance.
        let c = CountSummary::from_patterns(2, vec![9000, 600, 500, 40]).unwrap();
        for stat in [Statistic::Theta, Statistic::G] {
            let est = propagated(&c, &ProbabilityTable::from_counts(&c).unwrap(), stat, pair()).unwrap();
            let n = c.n_trials() as f64;
            let p: Vec<f64> = c.patterns().iter().map(|&x| x as f64 / n).collect();
            let f = |q: &[f64]| {
                let mut click = vec![1.0; 4];
                click[1] = q[1] + q[3];
                click[2] = q[2] + q[3];
                click[3] = q[3];
                let t = ProbabilityTable::from_click_probabilities(2, click).unwrap();
                evaluate(&t, stat, pair()).unwrap()
            };
            let h = 1e-7;
            let grad: Vec<f64> = (0..4)
                .map(|s| {
                    let mut up = p.clone();
                    let mut dn = p.clone();
                    up[s] += h;
                    dn[s] -= h;
                    (f(&up) - f(&dn)) / (2.0 * h)
                })
                .collect();
            let mean: f64 = p.iter().zip(&grad).map(|(a, b)| a * b).sum();
            let var: f64 = p.iter().zip(&grad).map(|(a, b)| a * b * b).sum::<f64>() - mean * mean;
            let sd = libm::sqrt(var / n);
            assert!((sd - est.std_error).abs() < 1e-6 * sd, "{stat:?}: {sd} vs {}", est.std_error);
        }
    }

    #[test]
    fn bootstrap_is_deterministic_and_preserves_trials() {
        let c = CountSummary::from_patterns(2, vec![9000, 600, 500, 40]).unwrap();
        let a = bootstrap_replicate(&c, 9, 3);
        assert_eq!(a, bootstrap_replicate(&c, 9, 3));
        assert_eq!(a.n_trials(), c.n_trials());
        assert_ne!(a, bootstrap_replicate(&c, 9, 4));
    }

    #[test]
    fn single_emitter_estimate_smoke() {
        let input = PrecomputedOrder {
            order: 2,
            combinations: vec![CombinationEstimate {
                channels: pair(),
                theta: Err(Error::UndefinedEstimator { reason: "not provided" }),
                g: Ok(Estimate::new(0.407, 0.012)),
            }],
        };
        let r = aggregate_and_classify(&[input], DEFAULT_K_SIGMA, Weighting::Unweighted);
        assert_eq!(r.classification, Classification::Nonclassical);
        assert!(r.single_emitter_candidate);
    }

    #[test]
    fn classical_control_smoke() {
        let input = PrecomputedOrder {
            order: 2,
            combinations: vec![CombinationEstimate {
                channels: pair(),
                theta: Ok(Estimate::new(1.0 + 4e-8, 2e-8)),
                g: Ok(Estimate::new(1.0 - 0.004, 0.005)),
            }],
        };
        let r = aggregate_and_classify(&[input], DEFAULT_K_SIGMA, Weighting::Unweighted);
        assert_ne!(r.classification, Classification::Nonclassical);
        assert!(!r.single_emitter_candidate);
    }

    #[test]
    fn weighting() {
        let combos = vec![
            CombinationEstimate {
                channels: pair(),
                theta: Ok(Estimate::new(0.9, 0.1)),
                g: Ok(Estimate::new(0.5, 0.1)),
            },
            CombinationEstimate {
                channels: pair(),
                theta: Ok(Estimate::new(0.7, 0.05)),
                g: Err(Error::UndefinedEstimator { reason: "x" }),
            },
        ];
        let input = [PrecomputedOrder { order: 2, combinations: combos }];
        let r = aggregate_and_classify(&input, 3.0, Weighting::Unweighted);
        let o = r.order(2).unwrap();
        assert!((o.theta_mean.unwrap().value - 0.8).abs() < 1e-15);
        assert!((o.theta_mean.unwrap().std_error - libm::sqrt(0.0125) / 2.0).abs() < 1e-15);
        assert_eq!(o.g_mean.unwrap().value, 0.5);
        let r = aggregate_and_classify(&input, 3.0, Weighting::InverseVariance);
        let o = r.order(2).unwrap();
        // weights 100 : 400
        assert!((o.theta_mean.unwrap().value - (0.9 * 100.0 + 0.7 * 400.0) / 500.0).abs() < 1e-12);
        assert!((o.theta_mean.unwrap().std_error - 1.0 / libm::sqrt(500.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_coincidences_do_not_count_as_evidence() {
        // Independent channels, no pair ever observed: g = 0 ± 0 must not
        // be read as antibunching.
        let c = counts2(1000, 10, 10, 0);
        let r = analyze(&c, &AnalysisOptions { uncertainty: UncertaintyMethod::Propagation, ..Default::default() })
            .unwrap();
        let o = r.order(2).unwrap();
        assert_eq!(o.g_mean.unwrap(), Estimate::new(0.0, 0.0));
        assert_eq!(o.g_verdict, Classification::Inconclusive);
        assert!(!r.single_emitter_candidate);
        assert_ne!(r.classification, Classification::Nonclassical);
    }

    #[test]
    fn theta_decides_before_g() {
        let input = PrecomputedOrder {
            order: 2,
            combinations: vec![CombinationEstimate {
                channels: pair(),
                theta: Ok(Estimate::new(1.01, 0.001)),
                g: Ok(Estimate::new(0.9, 0.01)),
            }],
        };
        let r = aggregate_and_classify(&[input], 3.0, Weighting::Unweighted);
        assert_eq!(r.order(2).unwrap().g_verdict, Classification::Nonclassical);
        assert_eq!(r.classification, Classification::Classical);
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(verdict(Some(Estimate::new(0.9, 0.03)), true, 3.0), Classification::Nonclassical);
        assert_eq!(verdict(Some(Estimate::new(0.9, 0.04)), true, 3.0), Classification::Classical);
        assert_eq!(verdict(Some(Estimate::new(0.9, 0.0)), false, 3.0), Classification::Inconclusive);
        assert_eq!(verdict(None, true, 3.0), Classification::Inconclusive);
    }
}
