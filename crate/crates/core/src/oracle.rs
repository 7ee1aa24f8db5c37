//! Exact outcome probabilities of a detector tree fed with `n` photons.
//!
//! Each photon is routed independently to channel `i` with probability `w_i`
//! (multinomial splitting) and a channel holding `k_i` photons stays dark with
//! probability `(1 − ξ_i)^{k_i}`. [`enumerate_outcomes`] sums this model over
//! every occupation vector; the closed expressions ([`q_single_noclick`],
//! [`q_all_noclick`], [`q_kfold_click`]) must reproduce its marginals, which
//! [`equivalence_suite`] checks exhaustively.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::{stream_rng, DOMAIN_TREES};
use crate::{clamp_probability, ChannelMask, DetectorTree, Error, Result};

pub const DEFAULT_ENUMERATION_LIMIT: usize = 12;

/// Signed sum over all subsets `T ⊆ mask` of `(−1)^{|T|} f(T)`.
pub fn inclusion_exclusion(mask: ChannelMask, mut f: impl FnMut(ChannelMask) -> f64) -> f64 {
    let mut sum = 0.0;
    for t in mask.subsets() {
        let v = f(t);
        if t.len() % 2 == 0 {
            sum += v;
        } else {
            sum -= v;
        }
    }
    sum
}

fn powi(x: f64, n: usize) -> f64 {
    libm::pow(x, n as f64)
}

/// One way of distributing the incoming photons over the channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupation {
    pub photons: Vec<usize>,
    pub probability: f64,
}

fn compositions(n: usize, parts: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(remaining: usize, slot: usize, current: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if slot + 1 == current.len() {
            current[slot] = remaining;
            visit(current);
            return;
        }
        for k in (0..=remaining).rev() {
            current[slot] = k;
            rec(remaining - k, slot + 1, current, visit);
        }
    }
    let mut current = vec![0; parts];
    rec(n, 0, &mut current, &mut visit);
}

/// Multinomial distribution of `n` photons over the channels of `tree`:
/// `n!/Π k_i! · Π w_i^{k_i}` for every composition `(k_1..k_N)` of `n`.
pub fn multinomial_split_probs(n: usize, tree: &DetectorTree) -> Vec<Occupation> {
    let weights = tree.weights();
    let mut out = Vec::new();
    compositions(n, tree.channels(), |ks| {
        let mut remaining = n;
        let mut probability = 1.0;
        for (&k, &w) in ks.iter().zip(weights) {
            probability *= binomial(remaining, k) * powi(w, k);
            remaining -= k;
        }
        out.push(Occupation { photons: ks.to_vec(), probability });
    });
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that `channel` stays dark given `n` photons: `(1 − w_i ξ_i)^n`
/// (`(1 − ξ_i/N)^n` for equal splitting).
pub fn q_single_noclick(n: usize, tree: &DetectorTree, channel: usize) -> Result<f64> {
    tree.check_channel(channel)?;
    Ok(powi(1.0 - tree.detection(channel), n))
}

/// Probability that no channel clicks given `n` photons: `(1 − Σ_i w_i ξ_i)^n`.
pub fn q_all_noclick(n: usize, tree: &DetectorTree) -> f64 {
    powi((1.0 - tree.subset_detection(tree.all_channels())).max(0.0), n)
}

/// Probability that every channel of `mask` clicks given `n` photons (the
/// other channels unconstrained):
/// `Σ_{T⊆S} (−1)^{|T|} (1 − Σ_{i∈T} w_i ξ_i)^n`.
pub fn q_kfold_click(n: usize, tree: &DetectorTree, mask: ChannelMask) -> Result<f64> {
    tree.check_mask(mask)?;
    if mask.is_empty() {
        return Err(Error::invalid("channels", "the coincidence subset must be nonempty"));
    }
    if n < mask.len() {
        return Ok(0.0);
    }
    let sum = inclusion_exclusion(mask, |t| powi((1.0 - tree.subset_detection(t)).max(0.0), n));
    clamp_probability(sum)
}

/// The coincidence sum with the photon-number exponent dropped:
/// `Σ_{T⊆S} (−1)^{|T|} (1 − Σ_{i∈T} w_i ξ_i)`. It does not depend on `n` and
/// is not a conditional probability; kept only to demonstrate that the oracle
/// rejects it.
pub fn q_kfold_click_without_exponent(tree: &DetectorTree, mask: ChannelMask) -> f64 {
    inclusion_exclusion(mask, |t| 1.0 - tree.subset_detection(t))
}

/// Probability of each of the `2^N` click patterns (bit `i` set = channel `i`
/// clicked).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    channels: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn probability(&self, pattern: ChannelMask) -> f64 {
        self.probs[pattern.index()]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Marginal probability that all channels of `mask` click.
    pub fn subset_click(&self, mask: ChannelMask) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(s, _)| mask.is_subset_of(ChannelMask::from_bits(*s as u32)))
            .map(|(_, p)| p)
            .sum()
    }

    /// Marginal probability that no channel of `mask` clicks.
    pub fn no_click(&self, mask: ChannelMask) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(s, _)| !mask.intersects(ChannelMask::from_bits(*s as u32)))
            .map(|(_, p)| p)
            .sum()
    }
}

/// Exact click-pattern distribution for `n` photons, summed over every
/// multinomial occupation vector. `n` must not exceed `limit`.
pub fn enumerate_outcomes(n: usize, tree: &DetectorTree, limit: usize) -> Result<OutcomeDistribution> {
    if n > limit {
        return Err(Error::EnumerationLimit { photons: n, limit });
    }
    let channels = tree.channels();
    let mut probs = vec![0.0; 1 << channels];
    let mut patterns = vec![0.0; 1 << channels];
    for occ in multinomial_split_probs(n, tree) {
        patterns[0] = occ.probability;
        let mut filled = 1usize;
        for (i, (&k, &xi)) in occ.photons.iter().zip(tree.xi()).enumerate() {
            let dark = powi(1.0 - xi, k);
            let click = 1.0 - dark;
            for s in 0..filled {
                let p = patterns[s];
                patterns[s] = p * dark;
                patterns[s | (1 << i)] = p * click;
            }
            filled <<= 1;
        }
        for (acc, p) in probs.iter_mut().zip(&patterns) {
            *acc += p;
        }
    }
    Ok(OutcomeDistribution { channels, probs })
}

/// Parameters of the exhaustive closed-form vs enumeration comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceLimits {
    pub max_photons: usize,
    pub max_channels: usize,
    /// Random trees drawn per channel count.
    pub trees: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Compare against the coincidence sum without the `n` exponent instead
    /// of [`q_kfold_click`].
    pub drop_exponent: bool,
}

impl Default for EquivalenceLimits {
    fn default() -> Self {
        EquivalenceLimits {
            max_photons: 6,
            max_channels: 4,
            trees: 50,
            seed: 0,
            tolerance: 1e-12,
            drop_exponent: false,
        }
    }
}

/// The comparison with the largest absolute deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub channels: usize,
    pub photons: usize,
    pub subset: ChannelMask,
    pub xi: Vec<f64>,
    pub weights: Vec<f64>,
    pub enumerated: f64,
    pub closed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub limits: EquivalenceLimits,
    pub comparisons: u64,
    pub max_abs_deviation: f64,
    pub worst: Option<WorstCase>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.max_abs_deviation <= self.limits.tolerance
    }
}

/// Random tree with `ξ_i ~ U[0,1)` and normalized random splitting weights.
pub fn random_tree(rng: &mut impl Rng, channels: usize) -> Result<DetectorTree> {
    let xi: Vec<f64> = (0..channels).map(|_| rng.random::<f64>()).collect();
    let raw: Vec<f64> = (0..channels).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    DetectorTree::new(xi, raw.iter().map(|w| w / total).collect())
}

/// For every channel count up to `max_channels`, `trees` random trees and
/// every photon number up to `max_photons`, compare the enumerated marginals
/// with the closed expressions over all channel subsets.
pub fn equivalence_suite(limits: EquivalenceLimits) -> Result<EquivalenceReport> {
    if limits.max_photons > DEFAULT_ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit { photons: limits.max_photons, limit: DEFAULT_ENUMERATION_LIMIT });
    }
    if limits.max_channels == 0 || limits.max_channels > crate::MAX_CHANNELS {
        return Err(Error::invalid("max_channels", "must be in 1..=16"));
    }
    let mut report = EquivalenceReport { limits, comparisons: 0, max_abs_deviation: 0.0, worst: None };
    for channels in 1..=limits.max_channels {
        let mut rng = stream_rng(limits.seed, DOMAIN_TREES, channels as u64);
        for _ in 0..limits.trees {
            let tree = random_tree(&mut rng, channels)?;
            for n in 0..=limits.max_photons {
                let outcomes = enumerate_outcomes(n, &tree, DEFAULT_ENUMERATION_LIMIT)?;
                let mut check = |subset: ChannelMask, enumerated: f64, closed: f64| {
                    report.comparisons += 1;
                    let dev = (enumerated - closed).abs();
                    if !(dev <= report.max_abs_deviation) {
                        report.max_abs_deviation = dev;
                        report.worst = Some(WorstCase {
                            channels,
                            photons: n,
                            subset,
                            xi: tree.xi().to_vec(),
                            weights: tree.weights().to_vec(),
                            enumerated,
                            closed,
                        });
                    }
                };
                check(ChannelMask::EMPTY, outcomes.total(), 1.0);
                check(tree.all_channels(), outcomes.no_click(tree.all_channels()), q_all_noclick(n, &tree));
                for c in 0..channels {
                    let single = ChannelMask::from_channels(&[c]);
                    check(single, outcomes.no_click(single), q_single_noclick(n, &tree, c)?);
                }
                for bits in 1..1u32 << channels {
                    let subset = ChannelMask::from_bits(bits);
                    let closed = if limits.drop_exponent {
                        q_kfold_click_without_exponent(&tree, subset)
                    } else {
                        q_kfold_click(n, &tree, subset)?
                    };
                    check(subset, outcomes.subset_click(subset), closed);
                }
            }
        }
    }
    Ok(report)
}
