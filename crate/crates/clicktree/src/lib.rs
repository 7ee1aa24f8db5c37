//! File formats, configuration, parallel simulation, sweeps and reports
//! around [`clicktree_core`].

pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod parallel;
pub mod report;
pub mod sweep;

pub use clicktree_core as core;
pub use error::{Error, Result};
