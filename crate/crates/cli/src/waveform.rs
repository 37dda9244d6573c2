//! `t,phi` waveform files.
//!
//! Lines starting with `#` are comments and may precede the header. Times
//! increase strictly; every phase satisfies `|phi| ≤ 0.3`.

use std::io::{Read, Write};
use std::path::Path;

use postselect::codec::{is_weak_signal, MAX_PHASE};

use crate::output::fmt17;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WaveformError {
    #[error("{0}")]
    Io(String),
    #[error("expected header \"t,phi\", found \"{0}\"")]
    Header(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: t = {t} does not increase")]
    NonMonotonic { line: u64, t: f64 },
    #[error("line {line}: |phi| = {phi} exceeds 0.3")]
    OutOfRegime { line: u64, phi: f64 },
    #[error("no samples")]
    Empty,
}

/// A sampled phase signal `φ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<(f64, f64)>,
}

impl Waveform {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, WaveformError> {
        if samples.is_empty() {
            return Err(WaveformError::Empty);
        }
        for (i, &(t, phi)) in samples.iter().enumerate() {
            let line = i as u64 + 2;
            if !t.is_finite() || (i > 0 && !(t > samples[i - 1].0)) {
                return Err(WaveformError::NonMonotonic { line, t });
            }
            if !(phi.abs() <= MAX_PHASE) {
                return Err(WaveformError::OutOfRegime { line, phi });
            }
        }
        Ok(Waveform { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn phis(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    /// Samples outside the small-signal regime `|phi| ≤ 0.05`.
    pub fn weak_signal_exceedances(&self) -> usize {
        self.phis().filter(|&p| !is_weak_signal(p)).count()
    }
}

pub fn parse(reader: impl Read) -> Result<Waveform, WaveformError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| WaveformError::Io(e.to_string()))?.clone();
    if header.len() != 2 || &header[0] != "t" || &header[1] != "phi" {
        return Err(WaveformError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| WaveformError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| {
            record[i].parse::<f64>().map_err(|e| WaveformError::Parse {
                line,
                message: format!("\"{}\": {e}", &record[i]),
            })
        };
        let (t, phi) = (num(0)?, num(1)?);
        if let Some(&(prev, _)) = samples.last() {
            if !(t > prev) {
                return Err(WaveformError::NonMonotonic { line, t });
            }
        }
        if !(phi.abs() <= MAX_PHASE) {
            return Err(WaveformError::OutOfRegime { line, phi });
        }
        samples.push((t, phi));
    }
    Waveform::new(samples)
}

pub fn ingest(path: &Path) -> Result<Waveform, WaveformError> {
    let file = std::fs::File::open(path).map_err(|e| WaveformError::Io(format!("{}: {e}", path.display())))?;
    parse(std::io::BufReader::new(file))
}

/// Writes `# key = value` comment lines, the header and one row per sample.
pub fn emit<W: Write>(w: &Waveform, meta: &[(&str, String)], out: W) -> std::io::Result<()> {
    write_rows(w.samples(), meta, out)
}

pub(crate) fn write_rows<W: Write>(rows: &[(f64, f64)], meta: &[(&str, String)], mut out: W) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k} = {v}")?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "phi"])?;
    for &(t, phi) in rows {
        wtr.write_record([fmt17(t), fmt17(phi)])?;
    }
    wtr.flush()
}
