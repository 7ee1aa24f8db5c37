//! Source and detector descriptions shared by every other module.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{ChannelMask, Error, Result, MAX_CHANNELS};

/// Tolerance on the splitting weights summing to one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(name, format!("{value} is not in [0, 1]")));
    }
    Ok(())
}

/// `M` single-photon emitters, each delivering its photon to the tree with
/// collection efficiency η (or η_α per emitter).
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterEnsemble {
    count: usize,
    eta: f64,
    eta_per_emitter: Option<Vec<f64>>,
}

impl EmitterEnsemble {
    pub fn uniform(count: usize, eta: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        Ok(EmitterEnsemble { count, eta, eta_per_emitter: None })
    }

    /// Emitters with individual efficiencies. `eta()` then reports the mean.
    pub fn heterogeneous(efficiencies: Vec<f64>) -> Result<Self> {
        for &e in &efficiencies {
            check_unit("eta_per_emitter", e)?;
        }
        let count = efficiencies.len();
        let eta = if count == 0 { 0.0 } else { efficiencies.iter().sum::<f64>() / count as f64 };
        Ok(EmitterEnsemble { count, eta, eta_per_emitter: Some(efficiencies) })
    }

    /// No emitters: the source is pure background.
    pub fn empty() -> Self {
        EmitterEnsemble { count: 0, eta: 0.0, eta_per_emitter: None }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eta_per_emitter(&self) -> Option<&[f64]> {
        self.eta_per_emitter.as_deref()
    }

    /// True when every emitter shares one efficiency, so binomial closed
    /// forms apply.
    pub fn is_uniform(&self) -> bool {
        match &self.eta_per_emitter {
            None => true,
            Some(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Efficiency of every emitter, in order.
    pub fn efficiencies(&self) -> impl Iterator<Item = f64> + '_ {
        let uniform = self.eta;
        (0..self.count).map(move |i| match &self.eta_per_emitter {
            Some(v) => v[i],
            None => uniform,
        })
    }
}

/// Poissonian background: `lambda` photons per excitation pulse on average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    lambda: f64,
}

impl NoiseModel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("{lambda} must be finite and >= 0")));
        }
        Ok(NoiseModel { lambda })
    }

    pub const fn off() -> Self {
        NoiseModel { lambda: 0.0 }
    }

    /// Background specified as a detected count rate: `λ·ξ = rate / rep_rate`.
    pub fn from_detected_rate(rate_cps: f64, rep_rate_hz: f64, xi: f64) -> Result<Self> {
        if !(rep_rate_hz > 0.0) {
            return Err(Error::invalid("rep_rate_hz", format!("{rep_rate_hz} must be > 0")));
        }
        if rate_cps == 0.0 {
            return Ok(Self::off());
        }
        if !(xi > 0.0) {
            return Err(Error::invalid("xi", "a detected noise rate needs xi > 0"));
        }
        Self::new(rate_cps / (rep_rate_hz * xi))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_off(&self) -> bool {
        self.lambda == 0.0
    }
}

/// `N` click detectors behind a generalized beam splitter. A photon entering
/// the tree goes to channel `i` with probability `w_i` and is detected there
/// with efficiency `ξ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorTree {
    xi: Vec<f64>,
    weights: Vec<f64>,
}

impl DetectorTree {
    pub fn new(xi: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if xi.is_empty() {
            return Err(Error::invalid("channels", "a tree needs at least one channel"));
        }
        if xi.len() > MAX_CHANNELS {
            return Err(Error::invalid("channels", format!("at most {MAX_CHANNELS} channels are supported")));
        }
        if weights.len() != xi.len() {
            return Err(Error::invalid("weights", format!("{} weights for {} channels", weights.len(), xi.len())));
        }
        for &x in &xi {
            check_unit("xi", x)?;
        }
        for &w in &weights {
            check_unit("weights", w)?;
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid("weights", format!("weights sum to {sum}, not 1")));
        }
        Ok(DetectorTree { xi, weights })
    }

    /// Equal splitting `w_i = 1/N` and identical efficiency on every channel.
    pub fn balanced(channels: usize, xi: f64) -> Result<Self> {
        Self::with_efficiencies(vec![xi; channels])
    }

    /// Equal splitting with per-channel efficiencies.
    pub fn with_efficiencies(xi: Vec<f64>) -> Result<Self> {
        let n = xi.len().max(1);
        Self::new(xi, vec![1.0 / n as f64; n])
    }

    pub fn channels(&self) -> usize {
        self.xi.len()
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn all_channels(&self) -> ChannelMask {
        ChannelMask::full(self.channels())
    }

    pub fn check_channel(&self, channel: usize) -> Result<()> {
        if channel >= self.channels() {
            return Err(Error::ChannelOutOfRange { channel, channels: self.channels() });
        }
        Ok(())
    }

    pub fn check_mask(&self, mask: ChannelMask) -> Result<()> {
        if mask.span() > self.channels() {
            return Err(Error::ChannelOutOfRange { channel: mask.span() - 1, channels: self.channels() });
        }
        Ok(())
    }

    /// Probability that a single photon entering the tree is detected on
    /// `channel`: `w_i ξ_i`.
    pub fn detection(&self, channel: usize) -> f64 {
        self.weights[channel] * self.xi[channel]
    }

    /// Probability that a single photon is detected on some channel of
    /// `mask`: `Σ_{i∈S} w_i ξ_i`.
    pub fn subset_detection(&self, mask: ChannelMask) -> f64 {
        mask.channels().map(|c| self.detection(c)).sum()
    }

    /// All splitting weights equal and all efficiencies equal.
    pub fn is_balanced(&self) -> bool {
        self.xi.windows(2).all(|w| w[0] == w[1]) && self.weights.windows(2).all(|w| w[0] == w[1])
    }
}
