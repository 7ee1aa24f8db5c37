//! Block-parallel simulation. Each block draws from its own counter-derived
//! stream, so these functions return exactly what the sequential
//! [`clicktree_core::sim`] functions return, for any thread count.

use clicktree_core::ingest::TimeTagStream;
use clicktree_core::sim::{SimulationConfig, Simulator};
use clicktree_core::{CountSummary, Error as ModelError};
use rayon::prelude::*;

use crate::error::Result;

pub fn simulate(config: &SimulationConfig) -> Result<CountSummary> {
    let sim = Simulator::new(config)?;
    let empty = CountSummary::new(config.tree.channels())?;
    let merged = (0..sim.block_count())
        .into_par_iter()
        .map(|b| Ok::<_, ModelError>(sim.run_block(b)))
        .try_reduce(|| empty.clone(), |mut a, b| a.merge(&b).map(|_| a))?;
    Ok(merged)
}

/// Counts and the synthetic stream in one pass.
pub fn simulate_with_stream(config: &SimulationConfig) -> Result<(CountSummary, TimeTagStream)> {
    if !config.emit_stream {
        return Err(ModelError::InvalidParameter {
            name: "emit_stream",
            reason: "stream output was not requested".into(),
        }
        .into());
    }
    let sim = Simulator::new(config)?;
    let blocks: Vec<_> = (0..sim.block_count())
        .into_par_iter()
        .map(|b| {
            let mut events = Vec::new();
            let counts = sim.run_block_with_tags(b, &mut events);
            (counts, events)
        })
        .collect();
    let mut counts = CountSummary::new(config.tree.channels())?;
    let mut events = Vec::with_capacity(blocks.iter().map(|(_, e)| e.len()).sum());
    for (c, e) in blocks {
        counts.merge(&c)?;
        events.extend(e);
    }
    Ok((counts, TimeTagStream { header: config.stream_header()?, events }))
}
