//! Count summaries as text.
//!
//! ```text
//! # clicktree counts v1
//! channels 2
//! n_trials 1000
//! 0 100
//! 1 80
//! 0,1 5
//! ```
//!
//! After the header, one line per nonempty channel subset: the 0-based
//! channels, comma separated, then the number of pulses in which all of them
//! clicked. Every subset appears exactly once; the writer lists them by size,
//! then lexicographically.

use std::io::{BufRead, Write};

use clicktree_core::{ChannelMask, CountSummary, MAX_CHANNELS};

use super::read_line;
use crate::error::{Error, Location, Result};

pub const MAGIC: &str = "# clicktree counts v1";

/// Nonempty subsets of `channels`, by size then lexicographic.
pub fn subset_order(channels: usize) -> Vec<ChannelMask> {
    (1..=channels).flat_map(|k| ChannelMask::combinations(channels, k)).collect()
}

pub fn write(counts: &CountSummary, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "channels {}", counts.channels())?;
    writeln!(out, "n_trials {}", counts.n_trials())?;
    for mask in subset_order(counts.channels()) {
        writeln!(out, "{mask} {}", counts.count(mask))?;
    }
    Ok(())
}

pub fn to_string(counts: &CountSummary) -> String {
    let mut buf = Vec::new();
    write(counts, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ASCII output")
}

fn header_value(line: Option<String>, key: &str, number: u64) -> Result<u64> {
    let location = Location::Line(number);
    let line = line.ok_or_else(|| Error::format(location, format!("missing `{key}` line")))?;
    let value = line
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::format(location, format!("expected `{key} <n>`, found `{line}`")))?;
    value.trim().parse().map_err(|e| Error::format(location, format!("{key}: {e}")))
}

fn parse_mask(text: &str, channels: usize) -> Option<ChannelMask> {
    let mut mask = ChannelMask::EMPTY;
    for part in text.split(',') {
        let c: usize = part.trim().parse().ok()?;
        if c >= channels || mask.contains(c) {
            return None;
        }
        mask = mask.with(c);
    }
    Some(mask)
}

pub fn read(reader: &mut impl BufRead) -> Result<CountSummary> {
    let mut buf = Vec::new();
    let magic = read_line(reader, &mut buf, 1)?;
    if magic.as_deref().map(str::trim_end) != Some(MAGIC) {
        return Err(Error::format(Location::Line(1), format!("expected `{MAGIC}`")));
    }
    let channels = header_value(read_line(reader, &mut buf, 2)?, "channels", 2)? as usize;
    if channels == 0 || channels > MAX_CHANNELS {
        return Err(Error::format(Location::Line(2), format!("channels must be in 1..={MAX_CHANNELS}")));
    }
    let n_trials = header_value(read_line(reader, &mut buf, 3)?, "n_trials", 3)?;

    let mut subset = vec![None; 1 << channels];
    subset[0] = Some(n_trials);
    let mut number = 3;
    loop {
        number += 1;
        let Some(line) = read_line(reader, &mut buf, number)? else { break };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let location = Location::Line(number);
        let (mask_text, count_text) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::format(location, format!("expected `<channels> <count>`, found `{line}`")))?;
        let mask = parse_mask(mask_text, channels)
            .ok_or_else(|| Error::format(location, format!("bad channel list `{mask_text}`")))?;
        let count: u64 =
            count_text.trim().parse().map_err(|e| Error::format(location, format!("count `{count_text}`: {e}")))?;
        let slot = &mut subset[mask.index()];
        if slot.is_some() {
            return Err(Error::format(location, format!("subset {mask} listed twice")));
        }
        *slot = Some(count);
    }
    let mut values = Vec::with_capacity(subset.len());
    for (i, v) in subset.into_iter().enumerate() {
        match v {
            Some(v) => values.push(v),
            None => {
                let mask = ChannelMask::from_bits(i as u32);
                return Err(Error::format(Location::Header, format!("subset {mask} missing")));
            }
        }
    }
    Ok(CountSummary::from_subset_counts(channels, &values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CountSummary {
        CountSummary::from_subset_counts(2, &[1000, 100, 80, 5]).unwrap()
    }

    #[test]
    fn text_layout() {
        assert_eq!(to_string(&sample()), "# clicktree counts v1\nchannels 2\nn_trials 1000\n0 100\n1 80\n0,1 5\n");
    }

    #[test]
    fn round_trip() {
        let mut counts = CountSummary::new(4).unwrap();
        for bits in 0..16u32 {
            counts.record_many(ChannelMask::from_bits(bits), (bits as u64 * 7919) % 1000);
        }
        let text = to_string(&counts);
        assert_eq!(read(&mut text.as_bytes()).unwrap(), counts);
    }

    #[test]
    fn any_line_order() {
        let text = "# clicktree counts v1\nchannels 2\nn_trials 1000\n0,1 5\n# comment\n1 80\n0 100\n";
        assert_eq!(read(&mut text.as_bytes()).unwrap(), sample());
    }

    #[test]
    fn errors_name_lines() {
        let cases = [
            ("# wrong\n", "line 1"),
            ("# clicktree counts v1\nchannel 2\n", "line 2"),
            ("# clicktree counts v1\nchannels 2\nn_trials 10\n0 1\n7 1\n", "line 5"),
            ("# clicktree counts v1\nchannels 2\nn_trials 10\n0 1\n0 1\n", "line 5"),
            ("# clicktree counts v1\nchannels 2\nn_trials 10\n0 1\n1 x\n", "line 5"),
            ("# clicktree counts v1\nchannels 2\nn_trials 10\n0 1\n1 1\n", "missing"),
        ];
        for (text, needle) in cases {
            let err = read(&mut text.as_bytes()).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn inconsistent_counts_rejected() {
        let text = "# clicktree counts v1\nchannels 2\nn_trials 10\n0 1\n1 1\n0,1 5\n";
        assert!(read(&mut text.as_bytes()).is_err());
    }
}
