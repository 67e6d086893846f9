//! Plain-text shot-record files.
//!
//! ```text
//! # photoncorr shot-record v1
//! # source.kind = twin_beam
//! # source.mean_photons = 20
//! # source.modes = 100
//! # source.transmittance = 0.5
//! # detection.eta1 = 0.05
//! # detection.eta2 = 0.05
//! # seed = 1234
//! # count = 3
//! # axis = mean_detected
//! # axis_value = 1
//! 0,1
//! 2,2
//! 1,0
//! ```
//!
//! Floats are written in shortest round-trip form, so the header regenerates
//! the series bit for bit. `axis` and `axis_value` are optional.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use crate::config::SweepAxis;
use crate::detection::DetectionSpec;
use crate::sampler::{sample_series, ShotRecord, ShotSeries};
use crate::states::{SourceKind, SourceSpec};

pub const FORMAT_LINE: &str = "# photoncorr shot-record v1";

/// Position of a sweep point, as recorded in a shot file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisTag {
    pub axis: SweepAxis,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotFile {
    pub series: ShotSeries,
    pub axis: Option<AxisTag>,
}

#[derive(Debug)]
pub enum ReadError {
    Io(io::Error),
    /// Malformed content starting at byte `offset`.
    Corrupt { offset: u64, message: String },
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReadError::Io(e) => write!(f, "{e}"),
            ReadError::Corrupt { offset, message } => write!(f, "byte {offset}: {message}"),
        }
    }
}

impl std::error::Error for ReadError {}

impl From<io::Error> for ReadError {
    fn from(e: io::Error) -> Self {
        ReadError::Io(e)
    }
}

fn corrupt(offset: u64, message: impl Into<String>) -> ReadError {
    ReadError::Corrupt {
        offset,
        message: message.into(),
    }
}

pub fn write_series<W: Write>(mut w: W, series: &ShotSeries, axis: Option<AxisTag>) -> io::Result<()> {
    let s = series.source();
    let d = series.detection();
    writeln!(w, "{FORMAT_LINE}")?;
    writeln!(w, "# source.kind = {}", s.kind)?;
    writeln!(w, "# source.mean_photons = {}", s.mean_photons)?;
    writeln!(w, "# source.modes = {}", s.modes)?;
    writeln!(w, "# source.transmittance = {}", s.transmittance)?;
    writeln!(w, "# detection.eta1 = {}", d.eta1)?;
    writeln!(w, "# detection.eta2 = {}", d.eta2)?;
    writeln!(w, "# seed = {}", series.seed())?;
    writeln!(w, "# count = {}", series.count())?;
    if let Some(tag) = axis {
        writeln!(w, "# axis = {}", tag.axis)?;
        writeln!(w, "# axis_value = {}", tag.value)?;
    }
    for r in series.records() {
        writeln!(w, "{},{}", r.m1, r.m2)?;
    }
    w.flush()
}

pub fn read_series<R: BufRead>(mut r: R) -> Result<ShotFile, ReadError> {
    let mut header: BTreeMap<String, (String, u64)> = BTreeMap::new();
    let mut records = Vec::new();
    let mut line = String::new();
    let mut offset = 0u64;
    let mut first = true;
    loop {
        line.clear();
        let n = match r.read_line(&mut line) {
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                return Err(corrupt(offset, "line is not valid UTF-8"))
            }
            Err(e) => return Err(e.into()),
        };
        if n == 0 {
            break;
        }
        let start = offset;
        offset += n as u64;
        let text = line.trim_end_matches(['\n', '\r']);
        if first {
            if text != FORMAT_LINE {
                return Err(corrupt(start, "missing shot-record format line"));
            }
            first = false;
            continue;
        }
        if let Some(rest) = text.strip_prefix('#') {
            if !records.is_empty() {
                return Err(corrupt(start, "header line after shot records"));
            }
            if let Some((k, v)) = rest.split_once('=') {
                header.insert(k.trim().to_string(), (v.trim().to_string(), start));
            }
            continue;
        }
        if text.trim().is_empty() {
            continue;
        }
        let rec = text
            .split_once(',')
            .and_then(|(a, b)| Some(ShotRecord::new(a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| corrupt(start, format!("bad shot record `{text}`")))?;
        records.push(rec);
    }
    if first {
        return Err(corrupt(0, "empty file"));
    }
    let end = offset;
    let field = |key: &str| -> Result<(&str, u64), ReadError> {
        header
            .get(key)
            .map(|(v, o)| (v.as_str(), *o))
            .ok_or_else(|| corrupt(end, format!("missing header field `{key}`")))
    };
    let float = |key: &str| -> Result<f64, ReadError> {
        let (v, o) = field(key)?;
        v.parse().map_err(|_| corrupt(o, format!("`{key}` is not a number")))
    };
    let uint = |key: &str| -> Result<u64, ReadError> {
        let (v, o) = field(key)?;
        v.parse().map_err(|_| corrupt(o, format!("`{key}` is not an unsigned integer")))
    };
    let (kind, kind_at) = field("source.kind")?;
    let kind: SourceKind = kind.parse().map_err(|e| corrupt(kind_at, format!("{e}")))?;
    let source = SourceSpec::new(
        kind,
        float("source.mean_photons")?,
        float("source.modes")?,
        float("source.transmittance")?,
    )
    .map_err(|e| corrupt(kind_at, format!("{e}")))?;
    let detection = DetectionSpec::new(float("detection.eta1")?, float("detection.eta2")?)
        .map_err(|e| corrupt(kind_at, format!("{e}")))?;
    let seed = uint("seed")?;
    let count = uint("count")?;
    if count != records.len() as u64 {
        return Err(corrupt(
            end,
            format!("header declares {count} records, found {}", records.len()),
        ));
    }
    let axis = match header.get("axis") {
        None => None,
        Some((a, o)) => Some(AxisTag {
            axis: a.parse().map_err(|e| corrupt(*o, format!("{e}")))?,
            value: float("axis_value")?,
        }),
    };
    let series = ShotSeries::from_records(records, source, detection, seed)
        .map_err(|e| corrupt(end, format!("{e}")))?;
    Ok(ShotFile { series, axis })
}

/// Redraws the series described by a file's header.
pub fn regenerate(file: &ShotFile) -> crate::Result<ShotSeries> {
    let s = &file.series;
    sample_series(s.source(), s.detection(), s.count(), s.seed())
}
