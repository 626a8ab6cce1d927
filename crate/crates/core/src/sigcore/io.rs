//! Segment corpus files.
//!
//! CSV: one segment per row, plain decimal values.
//! Binary: the 8-byte magic `TADASEG1`, little-endian `u32` segment count and
//! `u32` segment length, then `f32` little-endian samples in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::Segment;
use crate::error::{Error, Result};

pub const BIN_MAGIC: &[u8; 8] = b"TADASEG1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentFormat {
    Csv,
    Bin,
}

impl SegmentFormat {
    /// `.bin` selects the binary format, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => SegmentFormat::Bin,
            _ => SegmentFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            SegmentFormat::Csv => "csv",
            SegmentFormat::Bin => "bin",
        }
    }
}

impl FromStr for SegmentFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(SegmentFormat::Csv),
            "bin" => Ok(SegmentFormat::Bin),
            other => Err(Error::Format(format!("unknown segment format '{other}'"))),
        }
    }
}

pub fn read_segments(path: &Path, format: SegmentFormat) -> Result<Vec<Segment>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        SegmentFormat::Csv => parse_csv(&bytes),
        SegmentFormat::Bin => parse_bin(&bytes),
    }
}

pub fn write_segments(path: &Path, segments: &[Segment], format: SegmentFormat) -> Result<()> {
    let bytes = match format {
        SegmentFormat::Csv => encode_csv(segments),
        SegmentFormat::Bin => encode_bin(segments)?,
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn encode_csv(segments: &[Segment]) -> Vec<u8> {
    let mut out = String::new();
    for seg in segments {
        let row: Vec<String> = seg.samples().iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn parse_csv(bytes: &[u8]) -> Result<Vec<Segment>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let samples = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::Format(format!("row {}: bad value '{}'", row + 1, tok.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let seg = Segment::new(samples)
            .map_err(|e| Error::Format(format!("row {}: {e}", row + 1)))?;
        out.push(seg);
    }
    Ok(out)
}

fn encode_bin(segments: &[Segment]) -> Result<Vec<u8>> {
    let len = segments.first().map_or(0, |s| s.len());
    if let Some(bad) = segments.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch {
            left: len,
            right: bad.len(),
        });
    }
    let count = u32::try_from(segments.len())
        .map_err(|_| Error::Format("too many segments".into()))?;
    let len32 = u32::try_from(len).map_err(|_| Error::Format("segment too long".into()))?;
    let mut out = Vec::with_capacity(16 + 4 * segments.len() * len);
    out.extend_from_slice(BIN_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&len32.to_le_bytes());
    for seg in segments {
        for &v in seg.samples() {
            let v32 = v as f32;
            if !v32.is_finite() {
                return Err(Error::Format(format!("value {v} overflows f32")));
            }
            out.extend_from_slice(&v32.to_le_bytes());
        }
    }
    Ok(out)
}

fn parse_bin(bytes: &[u8]) -> Result<Vec<Segment>> {
    if bytes.len() < 16 || &bytes[..8] != BIN_MAGIC {
        return Err(Error::Format("missing TADASEG1 header".into()));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = count
        .checked_mul(len)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| Error::Format("header overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for {count}x{len}, found {}",
            bytes.len()
        )));
    }
    bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect::<Vec<f64>>()
        .chunks(len.max(1))
        .take(count)
        .enumerate()
        .map(|(i, row)| {
            Segment::new(row.to_vec()).map_err(|e| Error::Format(format!("segment {i}: {e}")))
        })
        .collect()
}
