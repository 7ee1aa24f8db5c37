//! Closed-form photon statistics of an emitter ensemble with Poissonian
//! background, seen through a detector tree.
//!
//! All detector POVMs are diagonal in photon number, so a source is fully
//! described by its photon-number distribution `p_n`, and every no-click
//! probability has the form `Σ σ^n p_n` with `σ = 1 − Σ_{i∈S} w_i ξ_i`.
//!
//! Two evaluation paths exist:
//!
//! - *closed form*: balanced tree (`w_i = 1/N`, equal `ξ`) and uniform `η`.
//!   `P_{0,S} = (1 − η s)^M e^{−λ s}` with `s = |S| ξ / N`, and the all-click
//!   probability is the alternating sum over `r` of `C(k,r) (1 − η r ξ/N)^M e^{−λ r ξ/N}`.
//! - *generic*: any tree and per-emitter efficiencies. `P_{0,S}` is the
//!   σ-expectation over the truncated mixed distribution and click
//!   probabilities follow from subset inclusion-exclusion.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::oracle::inclusion_exclusion;
use crate::{
    clamp_probability, ChannelMask, DetectorTree, EmitterEnsemble, Error, NoiseModel, ProbabilityTable, Result,
};

/// Default upper bound on the Poisson tail mass dropped by truncation.
pub const DEFAULT_TAIL_CUTOFF: f64 = 1e-12;

/// A value together with a bound on the error introduced by truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub uncertainty: f64,
}

/// Photon-number distribution `p_0..p_nmax`, plus probability mass that was
/// not represented. That mass sits at photon numbers `>= tail_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
    tail_bound: f64,
    tail_start: usize,
}

impl PhotonNumberDistribution {
    pub fn new(probs: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("probs", "distribution needs at least p_0"));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) || !(tail_bound >= 0.0) {
            return Err(Error::invalid("probs", "probabilities must be nonnegative"));
        }
        let total = probs.iter().sum::<f64>() + tail_bound;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("probs", format!("total mass {total} is not 1")));
        }
        let tail_start = probs.len();
        Ok(PhotonNumberDistribution { probs, tail_bound, tail_start })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Largest represented photon number.
    pub fn max_photons(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// `Σ_n σ^n p_n`. The unrepresented mass contributes at most
    /// `tail_bound · σ^{tail_start}`, which is reported as the uncertainty.
    /// At `σ = 1` the result is exact.
    pub fn expectation_sigma(&self, sigma: f64) -> Result<Bounded> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::invalid("sigma", format!("{sigma} is not in [0, 1]")));
        }
        if sigma == 1.0 {
            // The tail mass is known exactly even though its shape is not.
            return Ok(Bounded { value: self.probs.iter().sum::<f64>() + self.tail_bound, uncertainty: 0.0 });
        }
        let mut power = 1.0;
        let mut value = 0.0;
        for &p in &self.probs {
            value += power * p;
            power *= sigma;
        }
        Ok(Bounded { value, uncertainty: self.tail_bound * powi(sigma, self.tail_start) })
    }
}

/// Photon-number distribution of the emitters alone: binomial `(M, η)` for a
/// uniform ensemble, Poisson-binomial over `η_α` otherwise. Support `0..=M`,
/// no tail.
pub fn sps_distribution(ensemble: &EmitterEnsemble) -> PhotonNumberDistribution {
    let mut probs = vec![1.0];
    for eta in ensemble.efficiencies() {
        let mut next = vec![0.0; probs.len() + 1];
        for (m, &q) in probs.iter().enumerate() {
            next[m] += q * (1.0 - eta);
            next[m + 1] += q * eta;
        }
        probs = next;
    }
    let tail_start = probs.len();
    PhotonNumberDistribution { probs, tail_bound: 0.0, tail_start }
}

/// Poisson(λ) probabilities up to the smallest `k` whose tail mass is below
/// `cutoff`, and that tail mass.
fn poisson_truncated(lambda: f64, cutoff: f64) -> (Vec<f64>, f64) {
    if lambda == 0.0 {
        return (vec![1.0], 0.0);
    }
    let ln_lambda = libm::log(lambda);
    // The product recurrence is accurate to a few ulps but e^{-λ} underflows
    // for large λ, where the log-space form takes over.
    let recurrence = lambda < 500.0;
    let mut pmf: Vec<f64> = Vec::new();
    let mut cdf = 0.0;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let p = match (recurrence, pmf.last()) {
            (true, None) => libm::exp(-lambda),
            (true, Some(&prev)) => prev * lambda / kf,
            (false, _) => libm::exp(kf * ln_lambda - lambda - libm::lgamma(kf + 1.0)),
        };
        pmf.push(p);
        cdf += p;
        let tail = 1.0 - cdf;
        if kf >= lambda && (tail < cutoff || p == 0.0) {
            return (pmf, tail.max(0.0));
        }
        k += 1;
    }
}

/// Emitter photons convolved with Poisson(λ) background, truncated where the
/// Poisson tail mass drops below `cutoff`.
pub fn mixed_distribution(
    ensemble: &EmitterEnsemble,
    noise: &NoiseModel,
    cutoff: f64,
) -> Result<PhotonNumberDistribution> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::invalid("cutoff", format!("{cutoff} is not in (0, 1)")));
    }
    let sps = sps_distribution(ensemble);
    let (pois, tail_bound) = poisson_truncated(noise.lambda(), cutoff);
    let mut probs = vec![0.0; sps.probs.len() + pois.len() - 1];
    for (m, &a) in sps.probs.iter().enumerate() {
        for (k, &b) in pois.iter().enumerate() {
            probs[m + k] += a * b;
        }
    }
    // Dropped background photons come with any number of emitter photons,
    // including none.
    Ok(PhotonNumberDistribution { probs, tail_bound, tail_start: pois.len() })
}

fn powi(x: f64, n: usize) -> f64 {
    libm::pow(x, n as f64)
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// A source (emitters + background) observed through a detector tree.
#[derive(Debug, Clone)]
pub struct AnalyticModel {
    ensemble: EmitterEnsemble,
    noise: NoiseModel,
    tree: DetectorTree,
    distribution: PhotonNumberDistribution,
}

impl AnalyticModel {
    pub fn new(ensemble: EmitterEnsemble, noise: NoiseModel, tree: DetectorTree) -> Result<Self> {
        Self::with_cutoff(ensemble, noise, tree, DEFAULT_TAIL_CUTOFF)
    }

    pub fn with_cutoff(ensemble: EmitterEnsemble, noise: NoiseModel, tree: DetectorTree, cutoff: f64) -> Result<Self> {
        let distribution = mixed_distribution(&ensemble, &noise, cutoff)?;
        Ok(AnalyticModel { ensemble, noise, tree, distribution })
    }

    pub fn ensemble(&self) -> &EmitterEnsemble {
        &self.ensemble
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn tree(&self) -> &DetectorTree {
        &self.tree
    }

    pub fn distribution(&self) -> &PhotonNumberDistribution {
        &self.distribution
    }

    /// Balanced tree and uniform ensemble: the closed forms apply.
    pub fn uses_closed_form(&self) -> bool {
        self.tree.is_balanced() && self.ensemble.is_uniform()
    }

    /// Single-photon detection probability of `r` channels of a balanced
    /// tree: `r ξ / N`.
    fn balanced_detection(&self, r: usize) -> f64 {
        self.tree.xi()[0] * (r as f64 / self.tree.channels() as f64)
    }

    fn require_closed_form(&self) -> Result<()> {
        if !self.uses_closed_form() {
            return Err(Error::invalid("tree", "closed forms need a balanced tree and a uniform ensemble"));
        }
        Ok(())
    }

    /// Closed-form probability that no channel of `mask` clicks.
    pub fn p0_subset_closed(&self, mask: ChannelMask) -> Result<f64> {
        self.require_closed_form()?;
        self.tree.check_mask(mask)?;
        let s = self.balanced_detection(mask.len());
        let emitters = powi(1.0 - self.ensemble.eta() * s, self.ensemble.count());
        clamp_probability(emitters * libm::exp(-self.noise.lambda() * s))
    }

    /// `E[σ^n]` with `σ = 1 − Σ_{i∈S} w_i ξ_i`; valid for any tree.
    pub fn p0_subset_generic(&self, mask: ChannelMask) -> Result<Bounded> {
        self.tree.check_mask(mask)?;
        let sigma = (1.0 - self.tree.subset_detection(mask)).clamp(0.0, 1.0);
        self.distribution.expectation_sigma(sigma)
    }

    /// Probability that no channel of `mask` clicks in a pulse.
    pub fn p0_subset(&self, mask: ChannelMask) -> Result<f64> {
        if self.uses_closed_form() {
            self.p0_subset_closed(mask)
        } else {
            clamp_probability(self.p0_subset_generic(mask)?.value)
        }
    }

    /// `P_{0^{⊗N}}`: no detector of the tree clicks.
    pub fn p0_all(&self) -> Result<f64> {
        self.p0_subset(self.tree.all_channels())
    }

    /// `P_{0[i]}`: channel `i` does not click.
    pub fn p0_single(&self, channel: usize) -> Result<f64> {
        self.tree.check_channel(channel)?;
        self.p0_subset(ChannelMask::from_channels(&[channel]))
    }

    /// Closed-form probability that every channel of `mask` clicks.
    pub fn pclick_subset_closed(&self, mask: ChannelMask) -> Result<f64> {
        self.require_closed_form()?;
        self.tree.check_mask(mask)?;
        let k = mask.len();
        let m = self.ensemble.count();
        let lambda = self.noise.lambda();
        if k == 0 {
            return Ok(1.0);
        }
        if m == 0 {
            // Poissonian light splits into independent Poissonian channels.
            let per_channel = -libm::expm1(-lambda * self.balanced_detection(1));
            return clamp_probability(powi(per_channel, k));
        }
        if lambda == 0.0 && m < k {
            // Fewer photons than channels: the alternating sum is exactly zero.
            return Ok(0.0);
        }
        let eta = self.ensemble.eta();
        let mut sum = 0.0;
        for r in 0..=k {
            let s = self.balanced_detection(r);
            let term = binomial_coefficient(k, r) * powi(1.0 - eta * s, m) * libm::exp(-lambda * s);
            if r % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        clamp_probability(sum)
    }

    /// Subset inclusion-exclusion over σ-expectations; valid for any tree.
    pub fn pclick_subset_generic(&self, mask: ChannelMask) -> Result<f64> {
        self.tree.check_mask(mask)?;
        if mask.is_empty() {
            return Ok(1.0);
        }
        if self.ensemble.count() == 0 {
            let lambda = self.noise.lambda();
            let p = mask.channels().map(|c| -libm::expm1(-lambda * self.tree.detection(c))).product();
            return clamp_probability(p);
        }
        if self.distribution.tail_bound() == 0.0 && self.distribution.max_photons() < mask.len() {
            return Ok(0.0);
        }
        let mut failure = None;
        let sum = inclusion_exclusion(mask, |t| match self.p0_subset_generic(t) {
            Ok(b) => b.value,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        clamp_probability(sum)
    }

    /// Probability that every channel of `mask` clicks in the same pulse.
    pub fn pclick_subset(&self, mask: ChannelMask) -> Result<f64> {
        if self.uses_closed_form() {
            self.pclick_subset_closed(mask)
        } else {
            self.pclick_subset_generic(mask)
        }
    }

    /// `P_{click^{⊗N}}`: all `N` detectors click.
    pub fn pclick_nfold(&self) -> Result<f64> {
        self.pclick_subset(self.tree.all_channels())
    }

    /// θ over the channels of `mask`: `P_{0,S} / Π_{i∈S} P_{0[i]}`.
    pub fn theta_subset(&self, mask: ChannelMask) -> Result<f64> {
        self.tree.check_mask(mask)?;
        if self.ensemble.count() == 0 {
            return Ok(1.0);
        }
        if self.uses_closed_form() {
            let m = self.ensemble.count();
            let eta = self.ensemble.eta();
            let k = mask.len();
            let numerator = powi(1.0 - eta * self.balanced_detection(k), m);
            let denominator = powi(1.0 - eta * self.balanced_detection(1), m * k);
            if denominator == 0.0 {
                return Err(Error::UndefinedEstimator { reason: "a channel clicks in every pulse" });
            }
            let theta = numerator / denominator;
            debug_assert!({
                // Background cancels between numerator and denominator.
                let with_noise = self.p0_subset_closed(mask).unwrap()
                    / powi(self.p0_subset_closed(ChannelMask::from_channels(&[0])).unwrap(), k);
                !with_noise.is_finite() || (with_noise - theta).abs() <= 1e-9 * theta.abs().max(1e-300)
            });
            return Ok(theta);
        }
        let numerator = self.p0_subset(mask)?;
        let mut denominator = 1.0;
        for c in mask.channels() {
            denominator *= self.p0_single(c)?;
        }
        if denominator == 0.0 {
            return Err(Error::UndefinedEstimator { reason: "a channel clicks in every pulse" });
        }
        Ok(numerator / denominator)
    }

    /// θ⁽ᴺ⁾(0) over the whole tree.
    pub fn theta_closed(&self) -> Result<f64> {
        self.theta_subset(self.tree.all_channels())
    }

    /// g over the channels of `mask`: `P_{click,S} / Π_{i∈S} (1 − P_{0[i]})`.
    pub fn g_subset(&self, mask: ChannelMask) -> Result<f64> {
        self.tree.check_mask(mask)?;
        let mut denominator = 1.0;
        for c in mask.channels() {
            denominator *= 1.0 - self.p0_single(c)?;
        }
        if denominator == 0.0 {
            return Err(Error::UndefinedEstimator { reason: "a channel never clicks" });
        }
        if self.ensemble.count() == 0 {
            return Ok(1.0);
        }
        Ok(self.pclick_subset(mask)? / denominator)
    }

    /// g⁽ᴺ⁾(0) over the whole tree.
    pub fn g_closed(&self) -> Result<f64> {
        self.g_subset(self.tree.all_channels())
    }

    /// Exact click probabilities of every channel subset.
    pub fn probability_table(&self) -> Result<ProbabilityTable> {
        let n = self.tree.channels();
        let click =
            (0..1u32 << n).map(|bits| self.pclick_subset(ChannelMask::from_bits(bits))).collect::<Result<Vec<_>>>()?;
        ProbabilityTable::from_click_probabilities(n, click)
    }
}
