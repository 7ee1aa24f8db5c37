//! Photon statistics for ensembles of single-photon emitters observed through
//! a detector tree of click/no-click detectors.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation:
//!
//! - [`analytic`]: photon-number distributions of a binomial emitter ensemble
//!   mixed with Poissonian background, no-click and coincidence probabilities,
//!   and the closed-form θ⁽ᴺ⁾ and g⁽ᴺ⁾ values.
//! - [`oracle`]: exact combinatorial outcome probabilities for `n` photons
//!   routed through a (possibly unbalanced) tree, used to validate the closed
//!   forms.
//! - [`sim`]: a seeded pulse-by-pulse Monte Carlo of the full detection chain.
//! - [`estimator`]: θ⁽ᵏ⁾ / g⁽ᵏ⁾ estimators (k = 2..4) with uncertainties and a
//!   k·σ classicality verdict.
//! - [`ingest`]: coincidence windowing of time-tag streams into count
//!   summaries.
//!
//! File formats, parallel drivers and the command-line tool live in the
//! `clicktree` crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(x >= 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod counts;
mod error;
pub mod estimator;
pub mod ingest;
mod mask;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sim;

pub use counts::{CountSummary, ProbabilityTable};
pub use error::{Error, Result};
pub use mask::{ChannelMask, MAX_CHANNELS};
pub use model::{DetectorTree, EmitterEnsemble, NoiseModel};

/// Slack allowed on probabilities that land just outside `[0, 1]` through
/// rounding. Larger violations are reported as errors.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Clamp a computed probability into `[0, 1]`, rejecting values further out
/// than [`PROBABILITY_SLACK`].
pub fn clamp_probability(value: f64) -> Result<f64> {
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&value) {
        return Err(Error::ProbabilityOutOfRange { value });
    }
    Ok(value.clamp(0.0, 1.0))
}
