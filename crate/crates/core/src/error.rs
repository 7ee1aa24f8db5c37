use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model or configuration parameter violates its documented range.
    InvalidParameter {
        name: &'static str,
        reason: String,
    },
    ChannelOutOfRange {
        channel: usize,
        channels: usize,
    },
    /// An estimator denominator vanished (a channel that never, or always,
    /// clicks).
    UndefinedEstimator {
        reason: &'static str,
    },
    ProbabilityOutOfRange {
        value: f64,
    },
    EnumerationLimit {
        photons: usize,
        limit: usize,
    },
    UnsortedStream {
        record: usize,
        timestamp_ps: u64,
        previous_ps: u64,
    },
    EventBeforeOrigin {
        record: usize,
        timestamp_ps: u64,
    },
    InconsistentCounts {
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::ChannelOutOfRange { channel, channels } => {
                write!(f, "channel {channel} out of range for a {channels}-channel tree")
            }
            Error::UndefinedEstimator { reason } => write!(f, "estimator undefined: {reason}"),
            Error::ProbabilityOutOfRange { value } => {
                write!(f, "probability {value:e} outside [0, 1] beyond rounding slack")
            }
            Error::EnumerationLimit { photons, limit } => {
                write!(f, "{photons} photons exceeds the enumeration limit of {limit}")
            }
            Error::UnsortedStream { record, timestamp_ps, previous_ps } => {
                write!(f, "record {record}: timestamp {timestamp_ps} ps precedes previous timestamp {previous_ps} ps")
            }
            Error::EventBeforeOrigin { record, timestamp_ps } => {
                write!(f, "record {record}: timestamp {timestamp_ps} ps precedes the clock origin t0")
            }
            Error::InconsistentCounts { reason } => write!(f, "inconsistent counts: {reason}"),
        }
    }
}

impl core::error::Error for Error {}
