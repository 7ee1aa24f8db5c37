//! Coincidence windowing of detector time tags into per-pulse click
//! patterns.
//!
//! A tag at time `t` belongs to pulse `⌊(t − t0) / period⌋`. A channel clicks
//! in that pulse iff at least one of its tags falls in
//! `[window_start, window_start + window)` of the pulse period; repeated tags
//! inside one window collapse into a single click. Tags outside the window are
//! dropped and tallied.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{ChannelMask, CountSummary, Error, Result};

/// One detector event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    pub timestamp_ps: u64,
    pub channel: u8,
}

/// Acquisition parameters carried alongside a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub channels: usize,
    pub rep_rate_hz: f64,
    pub t0_ps: i64,
    pub window_ns: f64,
    pub window_start_ps: u64,
    /// Acquisition length measured from `t0`. When absent the acquisition is
    /// taken to end with the last pulse that holds a tag.
    pub duration_ps: Option<u64>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagStream {
    pub header: StreamHeader,
    pub events: Vec<TimeTag>,
}

/// Excitation-pulse period in picoseconds for a repetition rate.
pub fn period_ps(rep_rate_hz: f64) -> Result<u64> {
    if !(rep_rate_hz > 0.0 && rep_rate_hz.is_finite()) {
        return Err(Error::invalid("rep_rate_hz", "must be finite and > 0"));
    }
    let period = libm::round(1e12 / rep_rate_hz);
    if period < 1.0 {
        return Err(Error::invalid("rep_rate_hz", "period is shorter than 1 ps"));
    }
    Ok(period as u64)
}

/// Window width in picoseconds.
pub fn window_ps(window_ns: f64) -> Result<u64> {
    if !(window_ns > 0.0 && window_ns.is_finite()) {
        return Err(Error::invalid("window_ns", "must be finite and > 0"));
    }
    Ok(libm::round(window_ns * 1000.0) as u64)
}

/// Where, within each excitation period, tags count as clicks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowingPolicy {
    period_ps: u64,
    window_start_ps: u64,
    window_ps: u64,
    t0_ps: i64,
}

impl WindowingPolicy {
    pub fn new(period_ps: u64, window_start_ps: u64, window_ps: u64, t0_ps: i64) -> Result<Self> {
        if period_ps == 0 {
            return Err(Error::invalid("period_ps", "must be > 0"));
        }
        if window_ps == 0 {
            return Err(Error::invalid("window_ps", "must be > 0"));
        }
        if window_start_ps.checked_add(window_ps).map_or(true, |end| end > period_ps) {
            return Err(Error::invalid("window_ps", "window extends past the pulse period"));
        }
        Ok(WindowingPolicy { period_ps, window_start_ps, window_ps, t0_ps })
    }

    pub fn from_header(header: &StreamHeader) -> Result<Self> {
        Self::new(period_ps(header.rep_rate_hz)?, header.window_start_ps, window_ps(header.window_ns)?, header.t0_ps)
    }

    pub fn period_ps(&self) -> u64 {
        self.period_ps
    }

    pub fn window_start_ps(&self) -> u64 {
        self.window_start_ps
    }

    pub fn window_ps(&self) -> u64 {
        self.window_ps
    }

    pub fn t0_ps(&self) -> i64 {
        self.t0_ps
    }

    /// Pulses covered by an acquisition of `duration_ps` starting at `t0`.
    pub fn pulses_in(&self, duration_ps: u64) -> u64 {
        duration_ps / self.period_ps
    }
}

/// Tags that did not become clicks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestDiagnostics {
    pub events: u64,
    pub out_of_window: u64,
    /// Extra tags on a channel that had already clicked in the same window.
    pub repeated_in_window: u64,
    pub beyond_acquisition: u64,
}

/// Single-pass windowing state machine. Feed tags in nondecreasing time order
/// with [`Ingestor::push`]; the result does not depend on how the input is
/// chunked.
#[derive(Debug, Clone)]
pub struct Ingestor {
    policy: WindowingPolicy,
    channels: usize,
    acquisition_pulses: Option<u64>,
    counts: CountSummary,
    current: Option<(u64, ChannelMask)>,
    last_pulse: Option<u64>,
    previous_ps: Option<u64>,
    diagnostics: IngestDiagnostics,
}

impl Ingestor {
    pub fn new(channels: usize, policy: WindowingPolicy, acquisition_pulses: Option<u64>) -> Result<Self> {
        Ok(Ingestor {
            policy,
            channels,
            acquisition_pulses,
            counts: CountSummary::new(channels)?,
            current: None,
            last_pulse: None,
            previous_ps: None,
            diagnostics: IngestDiagnostics::default(),
        })
    }

    pub fn for_header(header: &StreamHeader) -> Result<Self> {
        let policy = WindowingPolicy::from_header(header)?;
        let pulses = header.duration_ps.map(|d| policy.pulses_in(d));
        Self::new(header.channels, policy, pulses)
    }

    /// Number of tags pushed so far.
    pub fn records(&self) -> u64 {
        self.diagnostics.events
    }

    pub fn push(&mut self, tag: TimeTag) -> Result<()> {
        let record = self.diagnostics.events as usize;
        let channel = tag.channel as usize;
        if channel >= self.channels {
            return Err(Error::ChannelOutOfRange { channel, channels: self.channels });
        }
        if let Some(prev) = self.previous_ps {
            if tag.timestamp_ps < prev {
                return Err(Error::UnsortedStream { record, timestamp_ps: tag.timestamp_ps, previous_ps: prev });
            }
        }
        let rel = tag.timestamp_ps as i128 - self.policy.t0_ps as i128;
        if rel < 0 {
            return Err(Error::EventBeforeOrigin { record, timestamp_ps: tag.timestamp_ps });
        }
        self.previous_ps = Some(tag.timestamp_ps);
        self.diagnostics.events += 1;

        let rel = rel as u64;
        let pulse = rel / self.policy.period_ps;
        let offset = rel % self.policy.period_ps;
        if self.acquisition_pulses.is_some_and(|n| pulse >= n) {
            self.diagnostics.beyond_acquisition += 1;
            return Ok(());
        }
        let start = self.policy.window_start_ps;
        if offset < start || offset - start >= self.policy.window_ps {
            self.diagnostics.out_of_window += 1;
            return Ok(());
        }
        self.last_pulse = Some(pulse);
        match &mut self.current {
            Some((p, mask)) if *p == pulse => {
                if mask.contains(channel) {
                    self.diagnostics.repeated_in_window += 1;
                } else {
                    *mask = mask.with(channel);
                }
            }
            _ => {
                self.flush();
                self.current = Some((pulse, ChannelMask::EMPTY.with(channel)));
            }
        }
        Ok(())
    }

    fn flush(&mut self) {
        if let Some((_, mask)) = self.current.take() {
            self.counts.record(mask);
        }
    }

    /// Close the acquisition. Pulses without clicks are counted as dark, so
    /// `n_trials` equals the number of pulses spanned by the acquisition.
    pub fn finish(mut self) -> Result<(CountSummary, IngestDiagnostics)> {
        self.flush();
        let n_trials = self.acquisition_pulses.unwrap_or_else(|| self.last_pulse.map_or(0, |p| p + 1));
        let clicked = self.counts.n_trials();
        if clicked > n_trials {
            return Err(Error::InconsistentCounts { reason: "more clicked pulses than trials".into() });
        }
        self.counts.record_many(ChannelMask::EMPTY, n_trials - clicked);
        Ok((self.counts, self.diagnostics))
    }
}

/// Window a whole stream into a count summary.
pub fn ingest(stream: &TimeTagStream, policy: WindowingPolicy) -> Result<(CountSummary, IngestDiagnostics)> {
    let pulses = stream.header.duration_ps.map(|d| policy.pulses_in(d));
    let mut ingestor = Ingestor::new(stream.header.channels, policy, pulses)?;
    for &tag in &stream.events {
        ingestor.push(tag)?;
    }
    ingestor.finish()
}

/// Scan the clock origin over one period in steps of `step_ps` and return the
/// origin that places the most tags inside the window. Ties go to the earliest
/// phase. The result is shifted back by one period when needed so that no tag
/// precedes it.
pub fn calibrate_t0(timestamps: &[u64], period_ps: u64, window_start_ps: u64, window_ps: u64, step_ps: u64) -> i64 {
    let Some(&first) = timestamps.iter().min() else {
        return 0;
    };
    let mut phases: Vec<u64> = timestamps.iter().map(|t| t % period_ps).collect();
    phases.sort_unstable();
    let below = |x: u64| phases.partition_point(|&p| p < x);
    let in_range = |lo: u64, hi: u64| below(hi) - below(lo);
    let step = step_ps.max(1);
    let mut best = (0usize, 0u64);
    let mut phase = 0;
    while phase < period_ps {
        let lo = (phase + window_start_ps) % period_ps;
        let hi = lo + window_ps;
        let hits =
            if hi <= period_ps { in_range(lo, hi) } else { in_range(lo, period_ps) + in_range(0, hi - period_ps) };
        if hits > best.0 {
            best = (hits, phase);
        }
        phase += step;
    }
    let t0 = best.1 as i64;
    if best.1 > first {
        t0 - period_ps as i64
    } else {
        t0
    }
}
