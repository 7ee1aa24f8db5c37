//! Time-tag stream files.
//!
//! Text variant: a magic line, `# key=value` header lines, then one record
//! per line as `channel<TAB>timestamp_ps`.
//!
//! ```text
//! # clicktree timetags v1
//! # channels=2
//! # rep_rate_hz=5000000
//! # t0_ps=0
//! # window_ns=40
//! 0<TAB>1200
//! 1<TAB>201500
//! ```
//!
//! Binary variant: the same header under [`BINARY_MAGIC`], a `#data` line,
//! then 9-byte records: `u8` channel followed by a little-endian `u64`
//! timestamp in picoseconds.
//!
//! Header keys: `channels` and `rep_rate_hz` are required; `t0_ps` (0),
//! `window_ns` (40), `window_start_ps` (0), `duration_ps` (none) and `source`
//! (empty) are optional. `#` lines without `=` are comments.

use std::io::{self, BufRead, Write};

use clicktree_core::ingest::{IngestDiagnostics, Ingestor, StreamHeader, TimeTag, TimeTagStream};
use clicktree_core::sim::DEFAULT_WINDOW_NS;
use clicktree_core::{CountSummary, MAX_CHANNELS};

use super::{read_line, InputKind};
use crate::error::{Error, Location, Result};

pub const TEXT_MAGIC: &str = "# clicktree timetags v1";
pub const BINARY_MAGIC: &str = "# clicktree timetags-bin v1";
pub const DATA_MARKER: &str = "#data";
pub const RECORD_BYTES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Text,
    Binary,
}

fn write_header(header: &StreamHeader, magic: &str, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{magic}")?;
    writeln!(out, "# channels={}", header.channels)?;
    writeln!(out, "# rep_rate_hz={}", header.rep_rate_hz)?;
    writeln!(out, "# t0_ps={}", header.t0_ps)?;
    writeln!(out, "# window_ns={}", header.window_ns)?;
    writeln!(out, "# window_start_ps={}", header.window_start_ps)?;
    if let Some(d) = header.duration_ps {
        writeln!(out, "# duration_ps={d}")?;
    }
    if !header.source.is_empty() {
        writeln!(out, "# source={}", header.source.replace(['\n', '\r'], " "))?;
    }
    Ok(())
}

pub fn write(stream: &TimeTagStream, encoding: Encoding, out: &mut impl Write) -> Result<()> {
    match encoding {
        Encoding::Text => {
            write_header(&stream.header, TEXT_MAGIC, out)?;
            for tag in &stream.events {
                writeln!(out, "{}\t{}", tag.channel, tag.timestamp_ps)?;
            }
        }
        Encoding::Binary => {
            write_header(&stream.header, BINARY_MAGIC, out)?;
            writeln!(out, "{DATA_MARKER}")?;
            let mut record = [0u8; RECORD_BYTES];
            for tag in &stream.events {
                record[0] = tag.channel;
                record[1..].copy_from_slice(&tag.timestamp_ps.to_le_bytes());
                out.write_all(&record)?;
            }
        }
    }
    Ok(())
}

#[derive(Default)]
struct HeaderFields {
    channels: Option<usize>,
    rep_rate_hz: Option<f64>,
    t0_ps: Option<i64>,
    window_ns: Option<f64>,
    window_start_ps: Option<u64>,
    duration_ps: Option<u64>,
    source: Option<String>,
}

fn set_field(fields: &mut HeaderFields, key: &str, value: &str, line: u64) -> Result<()> {
    let location = Location::Line(line);
    let bad = |e: &dyn std::fmt::Display| Error::format(location, format!("{key}: `{value}`: {e}"));
    fn put<T>(slot: &mut Option<T>, v: T, key: &str, location: Location) -> Result<()> {
        if slot.is_some() {
            return Err(Error::format(location, format!("duplicate header key `{key}`")));
        }
        *slot = Some(v);
        Ok(())
    }
    match key {
        "channels" => put(&mut fields.channels, value.parse().map_err(|e| bad(&e))?, key, location),
        "rep_rate_hz" => put(&mut fields.rep_rate_hz, value.parse().map_err(|e| bad(&e))?, key, location),
        "t0_ps" => put(&mut fields.t0_ps, value.parse().map_err(|e| bad(&e))?, key, location),
        "window_ns" => put(&mut fields.window_ns, value.parse().map_err(|e| bad(&e))?, key, location),
        "window_start_ps" => put(&mut fields.window_start_ps, value.parse().map_err(|e| bad(&e))?, key, location),
        "duration_ps" => put(&mut fields.duration_ps, value.parse().map_err(|e| bad(&e))?, key, location),
        "source" => put(&mut fields.source, value.to_string(), key, location),
        _ => Err(Error::format(location, format!("unknown header key `{key}`"))),
    }
}

/// Record-by-record reader over either encoding.
pub struct StreamReader<R> {
    reader: R,
    encoding: Encoding,
    header: StreamHeader,
    /// Text record line held back while reading the header.
    pending: Option<String>,
    line: u64,
    records: u64,
    previous_ps: Option<u64>,
    buf: Vec<u8>,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(mut reader: R) -> Result<Self> {
        let mut buf = Vec::new();
        let magic = read_line(&mut reader, &mut buf, 1)?.unwrap_or_default();
        let encoding = match InputKind::from_magic(&magic) {
            Some(InputKind::TextStream) => Encoding::Text,
            Some(InputKind::BinaryStream) => Encoding::Binary,
            _ => return Err(Error::format(Location::Line(1), format!("expected `{TEXT_MAGIC}` or `{BINARY_MAGIC}`"))),
        };
        let mut fields = HeaderFields::default();
        let mut line = 1;
        let mut pending = None;
        loop {
            line += 1;
            let Some(text) = read_line(&mut reader, &mut buf, line)? else {
                if encoding == Encoding::Binary {
                    return Err(Error::format(Location::Line(line), format!("missing `{DATA_MARKER}` line")));
                }
                break;
            };
            if encoding == Encoding::Binary && text == DATA_MARKER {
                break;
            }
            let Some(comment) = text.strip_prefix('#') else {
                if encoding == Encoding::Binary {
                    return Err(Error::format(Location::Line(line), "header lines must start with `#`"));
                }
                pending = Some(text);
                break;
            };
            if let Some((key, value)) = comment.split_once('=') {
                set_field(&mut fields, key.trim(), value.trim(), line)?;
            }
        }
        let header = StreamHeader {
            channels: fields.channels.ok_or_else(|| Error::format(Location::Header, "missing `channels`"))?,
            rep_rate_hz: fields.rep_rate_hz.ok_or_else(|| Error::format(Location::Header, "missing `rep_rate_hz`"))?,
            t0_ps: fields.t0_ps.unwrap_or(0),
            window_ns: fields.window_ns.unwrap_or(DEFAULT_WINDOW_NS),
            window_start_ps: fields.window_start_ps.unwrap_or(0),
            duration_ps: fields.duration_ps,
            source: fields.source.unwrap_or_default(),
        };
        if header.channels == 0 || header.channels > MAX_CHANNELS {
            return Err(Error::format(Location::Header, format!("channels must be in 1..={MAX_CHANNELS}")));
        }
        // Reject an unusable rate or window up front rather than at the first record.
        clicktree_core::ingest::WindowingPolicy::from_header(&header)?;
        if pending.is_some() {
            line -= 1;
        }
        Ok(StreamReader { reader, encoding, header, pending, line, records: 0, previous_ps: None, buf })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    /// Records returned so far.
    pub fn records(&self) -> u64 {
        self.records
    }

    fn location(&self) -> Location {
        match self.encoding {
            Encoding::Text => Location::Line(self.line),
            Encoding::Binary => Location::Record(self.records + 1),
        }
    }

    fn next_text(&mut self) -> Result<Option<(u8, u64)>> {
        loop {
            let text = match self.pending.take() {
                Some(t) => {
                    self.line += 1;
                    t
                }
                None => {
                    self.line += 1;
                    match read_line(&mut self.reader, &mut self.buf, self.line)? {
                        Some(t) => t,
                        None => return Ok(None),
                    }
                }
            };
            let trimmed = text.trim();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed.starts_with('#') {
                return Err(Error::format(self.location(), "header line after the first record"));
            }
            let (channel, timestamp) = trimmed.split_once('\t').ok_or_else(|| {
                Error::format(self.location(), format!("expected `channel<TAB>timestamp_ps`, found `{trimmed}`"))
            })?;
            let channel = channel
                .trim()
                .parse()
                .map_err(|e| Error::format(self.location(), format!("channel `{channel}`: {e}")))?;
            let timestamp = timestamp
                .trim()
                .parse()
                .map_err(|e| Error::format(self.location(), format!("timestamp `{timestamp}`: {e}")))?;
            return Ok(Some((channel, timestamp)));
        }
    }

    fn next_binary(&mut self) -> Result<Option<(u8, u64)>> {
        let mut record = [0u8; RECORD_BYTES];
        let mut filled = 0;
        while filled < RECORD_BYTES {
            match self.reader.read(&mut record[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => {
                    return Err(Error::format(
                        self.location(),
                        format!("truncated record ({filled} of {RECORD_BYTES} bytes)"),
                    ))
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let mut ts = [0u8; 8];
        ts.copy_from_slice(&record[1..]);
        Ok(Some((record[0], u64::from_le_bytes(ts))))
    }

    /// Next record, validated for channel range and time order.
    pub fn next_tag(&mut self) -> Result<Option<TimeTag>> {
        let raw = match self.encoding {
            Encoding::Text => self.next_text()?,
            Encoding::Binary => self.next_binary()?,
        };
        let Some((channel, timestamp_ps)) = raw else { return Ok(None) };
        let record = self.records + 1;
        if channel as usize >= self.header.channels {
            return Err(Error::format(
                self.location(),
                format!("record {record}: channel {channel} out of range for {} channels", self.header.channels),
            ));
        }
        if let Some(prev) = self.previous_ps {
            if timestamp_ps < prev {
                return Err(Error::format(
                    self.location(),
                    format!("record {record}: timestamp {timestamp_ps} ps precedes the previous record ({prev} ps)"),
                ));
            }
        }
        self.previous_ps = Some(timestamp_ps);
        self.records = record;
        Ok(Some(TimeTag { timestamp_ps, channel }))
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<TimeTag>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_tag().transpose()
    }
}

/// Parse a whole stream into memory.
pub fn read(reader: impl BufRead) -> Result<TimeTagStream> {
    let mut r = StreamReader::new(reader)?;
    let mut events = Vec::new();
    while let Some(tag) = r.next_tag()? {
        events.push(tag);
    }
    Ok(TimeTagStream { header: r.header, events })
}

/// Single-pass ingestion straight from a reader. `adjust` may override header
/// fields such as `t0_ps` or the window before windowing starts.
pub fn ingest_reader(
    reader: impl BufRead,
    adjust: impl FnOnce(&mut StreamHeader),
) -> Result<(StreamHeader, CountSummary, IngestDiagnostics)> {
    let mut r = StreamReader::new(reader)?;
    adjust(&mut r.header);
    let mut ingestor = Ingestor::for_header(&r.header)?;
    while let Some(tag) = r.next_tag()? {
        let location = r.location();
        ingestor.push(tag).map_err(|e| Error::format(location, format!("record {}: {e}", r.records())))?;
    }
    let (counts, diagnostics) = ingestor.finish()?;
    Ok((r.header, counts, diagnostics))
}
