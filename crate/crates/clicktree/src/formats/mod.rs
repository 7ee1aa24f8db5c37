//! Text and binary file formats. Every format opens with a magic line so
//! inputs can be recognized by content.

pub mod counts;
pub mod estimates;
pub mod stream;

use std::io::BufRead;

use crate::error::{Error, Location, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Counts,
    TextStream,
    BinaryStream,
    Estimates,
}

impl InputKind {
    pub fn from_magic(line: &str) -> Option<Self> {
        match line.trim_end() {
            counts::MAGIC => Some(InputKind::Counts),
            stream::TEXT_MAGIC => Some(InputKind::TextStream),
            stream::BINARY_MAGIC => Some(InputKind::BinaryStream),
            estimates::MAGIC => Some(InputKind::Estimates),
            _ => None,
        }
    }
}

/// Identify an input from its first line without consuming it.
pub fn detect(reader: &mut impl BufRead) -> Result<InputKind> {
    let buf = reader.fill_buf()?;
    let end = buf.iter().position(|&b| b == b'\n').unwrap_or(buf.len());
    let first = String::from_utf8_lossy(&buf[..end]).into_owned();
    InputKind::from_magic(&first)
        .ok_or_else(|| Error::format(Location::Line(1), format!("unrecognized input `{first}`")))
}

/// Read one `\n`-terminated line as UTF-8, without the terminator.
pub(crate) fn read_line(reader: &mut impl BufRead, buf: &mut Vec<u8>, line: u64) -> Result<Option<String>> {
    buf.clear();
    if reader.read_until(b'\n', buf)? == 0 {
        return Ok(None);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
    }
    String::from_utf8(std::mem::take(buf)).map(Some).map_err(|_| Error::format(Location::Line(line), "not valid UTF-8"))
}
