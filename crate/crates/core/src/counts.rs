//! Count summaries and the click-probability tables derived from them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::oracle::inclusion_exclusion;
use crate::{ChannelMask, Error, Result, MAX_CHANNELS};

/// Per-pulse click statistics of an `N`-channel tree.
///
/// Stored as a histogram over the `2^N` click patterns: `patterns[S]` is the
/// number of pulses in which exactly the channels of `S` clicked. Coincidence
/// counts (`N_i`, `N_ij`, ...) are superset sums of this histogram, which
/// keeps them mutually consistent by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountSummary {
    channels: usize,
    patterns: Vec<u64>,
}

fn check_channels(channels: usize) -> Result<()> {
    if channels == 0 || channels > MAX_CHANNELS {
        return Err(Error::invalid("channels", format!("{channels} is not in 1..={MAX_CHANNELS}")));
    }
    Ok(())
}

/// In-place superset-sum transform: `f[S] ← Σ_{T ⊇ S} f[T]`.
fn superset_sums(values: &mut [u64], channels: usize) {
    for bit in 0..channels {
        let b = 1usize << bit;
        for s in 0..values.len() {
            if s & b == 0 {
                values[s] += values[s | b];
            }
        }
    }
}

impl CountSummary {
    pub fn new(channels: usize) -> Result<Self> {
        check_channels(channels)?;
        Ok(CountSummary { channels, patterns: vec![0; 1 << channels] })
    }

    pub fn from_patterns(channels: usize, patterns: Vec<u64>) -> Result<Self> {
        check_channels(channels)?;
        if patterns.len() != 1 << channels {
            return Err(Error::InconsistentCounts {
                reason: format!("{} pattern bins for {channels} channels", patterns.len()),
            });
        }
        Ok(CountSummary { channels, patterns })
    }

    /// Rebuild the pattern histogram from coincidence counts. `subset_counts[S]`
    /// is the number of pulses in which every channel of `S` clicked, and
    /// `subset_counts[∅]` is the number of trials. Fails when the counts cannot
    /// come from any set of pulses (e.g. a pair count above a single count).
    pub fn from_subset_counts(channels: usize, subset_counts: &[u64]) -> Result<Self> {
        check_channels(channels)?;
        if subset_counts.len() != 1 << channels {
            return Err(Error::InconsistentCounts {
                reason: format!("{} subset counts for {channels} channels", subset_counts.len()),
            });
        }
        let mut exact: Vec<i128> = subset_counts.iter().map(|&c| c as i128).collect();
        // Möbius inversion of the superset sum.
        for bit in 0..channels {
            let b = 1usize << bit;
            for s in 0..exact.len() {
                if s & b == 0 {
                    exact[s] -= exact[s | b];
                }
            }
        }
        if let Some(pos) = exact.iter().position(|&v| v < 0) {
            return Err(Error::InconsistentCounts {
                reason: format!(
                    "coincidence counts imply {} pulses with click pattern {{{}}}",
                    exact[pos],
                    ChannelMask::from_bits(pos as u32)
                ),
            });
        }
        Ok(CountSummary { channels, patterns: exact.into_iter().map(|v| v as u64).collect() })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn record(&mut self, pattern: ChannelMask) {
        self.patterns[pattern.index()] += 1;
    }

    pub fn record_many(&mut self, pattern: ChannelMask, pulses: u64) {
        self.patterns[pattern.index()] += pulses;
    }

    pub fn merge(&mut self, other: &CountSummary) -> Result<()> {
        if other.channels != self.channels {
            return Err(Error::InconsistentCounts {
                reason: format!("cannot merge {} and {} channel summaries", self.channels, other.channels),
            });
        }
        for (a, b) in self.patterns.iter_mut().zip(&other.patterns) {
            *a += b;
        }
        Ok(())
    }

    /// `N_TR`: number of excitation pulses analyzed.
    pub fn n_trials(&self) -> u64 {
        self.patterns.iter().sum()
    }

    /// Pulses with exactly this click pattern.
    pub fn pattern(&self, pattern: ChannelMask) -> u64 {
        self.patterns[pattern.index()]
    }

    pub fn patterns(&self) -> &[u64] {
        &self.patterns
    }

    /// Pulses in which every channel of `mask` clicked; `N_TR` for the empty
    /// mask.
    pub fn count(&self, mask: ChannelMask) -> u64 {
        self.patterns
            .iter()
            .enumerate()
            .filter(|(s, _)| mask.is_subset_of(ChannelMask::from_bits(*s as u32)))
            .map(|(_, &c)| c)
            .sum()
    }

    /// `N_i`.
    pub fn singles(&self, channel: usize) -> u64 {
        self.count(ChannelMask::from_channels(&[channel]))
    }

    /// Coincidence counts of every subset, indexed by mask.
    pub fn subset_counts(&self) -> Vec<u64> {
        let mut v = self.patterns.clone();
        superset_sums(&mut v, self.channels);
        v
    }

    /// True when no channel ever clicked.
    pub fn is_dark(&self) -> bool {
        self.patterns[1..].iter().all(|&c| c == 0)
    }
}

/// Click probabilities of every channel subset: `click[S]` is the probability
/// that all channels of `S` click in a pulse, with `click[∅] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    channels: usize,
    click: Vec<f64>,
}

impl ProbabilityTable {
    /// `P_{click[S]} = N_S / N_TR`.
    pub fn from_counts(counts: &CountSummary) -> Result<Self> {
        let n = counts.n_trials();
        if n == 0 {
            return Err(Error::invalid("n_trials", "at least one trial is required"));
        }
        let click = counts.subset_counts().into_iter().map(|c| c as f64 / n as f64).collect();
        Ok(ProbabilityTable { channels: counts.channels, click })
    }

    pub fn from_click_probabilities(channels: usize, click: Vec<f64>) -> Result<Self> {
        check_channels(channels)?;
        if click.len() != 1 << channels {
            return Err(Error::invalid("click", format!("{} entries for {channels} channels", click.len())));
        }
        if click.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("click", "probabilities must lie in [0, 1]"));
        }
        if click[0] != 1.0 {
            return Err(Error::invalid("click", "the empty coincidence must have probability 1"));
        }
        Ok(ProbabilityTable { channels, click })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn click(&self, mask: ChannelMask) -> f64 {
        self.click[mask.index()]
    }

    /// `P_{click[i]}`.
    pub fn single(&self, channel: usize) -> f64 {
        self.click[1 << channel]
    }

    /// Probability that no channel of `mask` clicks, by inclusion-exclusion
    /// over the click probabilities of its subsets.
    pub fn no_click(&self, mask: ChannelMask) -> f64 {
        inclusion_exclusion(mask, |t| self.click(t))
    }
}
