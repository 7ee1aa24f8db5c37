//! Pulse-by-pulse Monte Carlo of emitters, background, tree and detectors.
//!
//! Per pulse: `m ~ Binomial(M, η)` emitter photons (independent Bernoulli
//! draws when the η_α differ), `k ~ Poisson(λ)` background photons, and each
//! of the `m + k` photons lands on channel `i` and is detected there with
//! probability `w_i ξ_i`. The click pattern is the set of channels that
//! detected at least one photon.
//!
//! Pulses are processed in fixed blocks of [`BLOCK_PULSES`]; block `b` draws
//! from its own counter-derived stream, so any partition of the blocks over
//! threads merges to the same result.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::ingest::{period_ps, window_ps, StreamHeader, TimeTag, TimeTagStream};
use crate::rng::{stream_rng, StreamRng, DOMAIN_JITTER, DOMAIN_PHOTONS};
use crate::{ChannelMask, CountSummary, DetectorTree, EmitterEnsemble, Error, NoiseModel, Result};

pub const DEFAULT_REP_RATE_HZ: f64 = 5e6;
pub const DEFAULT_WINDOW_NS: f64 = 40.0;
pub const BLOCK_PULSES: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub ensemble: EmitterEnsemble,
    pub noise: NoiseModel,
    pub tree: DetectorTree,
    pub n_pulses: u64,
    pub seed: u64,
    pub emit_stream: bool,
    pub rep_rate_hz: f64,
    pub window_ns: f64,
    /// Clock origin of the synthetic time tags.
    pub t0_ps: i64,
}

impl SimulationConfig {
    pub fn new(ensemble: EmitterEnsemble, noise: NoiseModel, tree: DetectorTree, n_pulses: u64, seed: u64) -> Self {
        SimulationConfig {
            ensemble,
            noise,
            tree,
            n_pulses,
            seed,
            emit_stream: false,
            rep_rate_hz: DEFAULT_REP_RATE_HZ,
            window_ns: DEFAULT_WINDOW_NS,
            t0_ps: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::invalid("n_pulses", "must be >= 1"));
        }
        let period = period_ps(self.rep_rate_hz)?;
        let window = window_ps(self.window_ns)?;
        if window == 0 || window >= period {
            return Err(Error::invalid(
                "window_ns",
                format!("{} ns window must be positive and shorter than the {period} ps period", self.window_ns),
            ));
        }
        if self.t0_ps < 0 {
            return Err(Error::invalid("t0_ps", "synthetic streams need t0 >= 0"));
        }
        if self.n_pulses.checked_mul(period).and_then(|d| d.checked_add(self.t0_ps as u64)).is_none() {
            return Err(Error::invalid("n_pulses", "acquisition too long for picosecond timestamps"));
        }
        Ok(())
    }

    pub fn period_ps(&self) -> Result<u64> {
        period_ps(self.rep_rate_hz)
    }

    pub fn window_ps(&self) -> Result<u64> {
        window_ps(self.window_ns)
    }

    /// Header describing the synthetic stream of this configuration.
    pub fn stream_header(&self) -> Result<StreamHeader> {
        Ok(StreamHeader {
            channels: self.tree.channels(),
            rep_rate_hz: self.rep_rate_hz,
            t0_ps: self.t0_ps,
            window_ns: self.window_ns,
            window_start_ps: 0,
            duration_ps: Some(self.n_pulses * self.period_ps()?),
            source: format!("clicktree simulate seed={}", self.seed),
        })
    }
}

#[derive(Debug, Clone)]
enum EmitterSampler {
    Binomial(Binomial),
    Bernoulli(Vec<f64>),
}

/// Prepared sampler for one configuration.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    config: &'a SimulationConfig,
    emitters: EmitterSampler,
    noise: Option<Poisson<f64>>,
    /// Cumulative single-photon detection probabilities `Σ_{j≤i} w_j ξ_j`.
    thresholds: Vec<f64>,
    full: ChannelMask,
    period_ps: u64,
    window_ps: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(config: &'a SimulationConfig) -> Result<Self> {
        config.validate()?;
        let ensemble = &config.ensemble;
        let emitters = if ensemble.is_uniform() {
            let b = Binomial::new(ensemble.count() as u64, ensemble.eta())
                .map_err(|e| Error::invalid("eta", format!("{e}")))?;
            EmitterSampler::Binomial(b)
        } else {
            EmitterSampler::Bernoulli(ensemble.efficiencies().collect())
        };
        let noise = if config.noise.is_off() {
            None
        } else {
            Some(Poisson::new(config.noise.lambda()).map_err(|e| Error::invalid("lambda", format!("{e}")))?)
        };
        let mut acc = 0.0;
        let thresholds = (0..config.tree.channels())
            .map(|c| {
                acc += config.tree.detection(c);
                acc
            })
            .collect();
        Ok(Simulator {
            config,
            emitters,
            noise,
            thresholds,
            full: config.tree.all_channels(),
            period_ps: config.period_ps()?,
            window_ps: config.window_ps()?,
        })
    }

    pub fn block_count(&self) -> u64 {
        self.config.n_pulses.div_ceil(BLOCK_PULSES)
    }

    fn block_range(&self, block: u64) -> core::ops::Range<u64> {
        let start = block * BLOCK_PULSES;
        start..(start + BLOCK_PULSES).min(self.config.n_pulses)
    }

    fn pulse(&self, rng: &mut StreamRng) -> ChannelMask {
        let emitted = match &self.emitters {
            EmitterSampler::Binomial(b) => b.sample(rng),
            EmitterSampler::Bernoulli(etas) => etas.iter().filter(|&&eta| rng.random::<f64>() < eta).count() as u64,
        };
        let background = self.noise.as_ref().map_or(0, |p| p.sample(rng) as u64);
        let mut mask = ChannelMask::EMPTY;
        for _ in 0..emitted + background {
            if mask == self.full {
                break;
            }
            let u: f64 = rng.random();
            if let Some(c) = self.thresholds.iter().position(|&t| u < t) {
                mask = mask.with(c);
            }
        }
        mask
    }

    /// Click patterns of one block of pulses.
    pub fn run_block(&self, block: u64) -> CountSummary {
        let mut counts = CountSummary::new(self.config.tree.channels()).expect("validated tree");
        let mut rng = stream_rng(self.config.seed, DOMAIN_PHOTONS, block);
        for _ in self.block_range(block) {
            counts.record(self.pulse(&mut rng));
        }
        counts
    }

    /// Like [`Simulator::run_block`], also appending one time tag per click to
    /// `events`, ordered by time. Jitter draws use a separate stream, so the
    /// counts equal those of `run_block`.
    pub fn run_block_with_tags(&self, block: u64, events: &mut Vec<TimeTag>) -> CountSummary {
        let mut counts = CountSummary::new(self.config.tree.channels()).expect("validated tree");
        let mut rng = stream_rng(self.config.seed, DOMAIN_PHOTONS, block);
        let mut jitter = stream_rng(self.config.seed, DOMAIN_JITTER, block);
        let t0 = self.config.t0_ps as u64;
        let mut pulse_tags = Vec::with_capacity(self.config.tree.channels());
        for pulse in self.block_range(block) {
            let mask = self.pulse(&mut rng);
            counts.record(mask);
            let base = t0 + pulse * self.period_ps;
            pulse_tags.clear();
            pulse_tags.extend(
                mask.channels()
                    .map(|c| TimeTag { timestamp_ps: base + jitter.random_range(0..self.window_ps), channel: c as u8 }),
            );
            pulse_tags.sort_unstable();
            events.extend_from_slice(&pulse_tags);
        }
        counts
    }
}

/// Run the whole configuration sequentially.
pub fn simulate(config: &SimulationConfig) -> Result<CountSummary> {
    let sim = Simulator::new(config)?;
    let mut total = CountSummary::new(config.tree.channels())?;
    for b in 0..sim.block_count() {
        total.merge(&sim.run_block(b))?;
    }
    Ok(total)
}

/// Synthetic time-tag stream of the configuration; windowing it reproduces
/// [`simulate`] exactly.
pub fn simulate_stream(config: &SimulationConfig) -> Result<TimeTagStream> {
    if !config.emit_stream {
        return Err(Error::invalid("emit_stream", "stream output was not requested"));
    }
    let sim = Simulator::new(config)?;
    let mut events = Vec::new();
    for b in 0..sim.block_count() {
        sim.run_block_with_tags(b, &mut events);
    }
    Ok(TimeTagStream { header: config.stream_header()?, events })
}
