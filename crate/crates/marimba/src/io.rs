//! Artifact formats: JSON Lines crossing logs and CSV curve exports.
//! Every log opens with a header object carrying the spec content hash,
//! the seed, and the trace configuration, so artifacts are reproducible
//! from their own metadata.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{Crossing, TraceConfig};
use crate::melody::{Melody, MelodyError};
use crate::spectra::EmpiricalCDF;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("log line {0}: {1}")]
    BadLine(usize, String),
    #[error("log has no header object")]
    MissingHeader,
    #[error(transparent)]
    Melody(#[from] MelodyError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogHeader {
    /// SHA-256 of the spec's canonical TOML form.
    pub spec: String,
    pub seed: u64,
    pub config: TraceConfig,
    pub version: String,
}

/// One crossing as it appears in a log file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogEntry {
    pub i: usize,
    pub note: String,
    pub t: f64,
    pub x: f64,
    pub theta: f64,
}

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Stream a crossing log: the header object, then one object per crossing
/// with times at 15 significant digits. Deterministic byte-for-byte for
/// identical inputs.
pub fn write_crossing_log<W: Write>(
    mut w: W,
    header: &LogHeader,
    crossings: &[Crossing],
) -> Result<(), IoError> {
    writeln!(w, "{}", serde_json::to_string(header).expect("header serializes"))?;
    for (i, c) in crossings.iter().enumerate() {
        writeln!(
            w,
            "{{\"i\":{},\"note\":{},\"t\":{:.14e},\"x\":{:.14e},\"theta\":{:.14e}}}",
            i,
            serde_json::to_string(&c.label).expect("label serializes"),
            c.t,
            c.x,
            c.theta,
        )?;
    }
    Ok(())
}

pub fn read_crossing_log<R: BufRead>(r: R) -> Result<(LogHeader, Vec<LogEntry>), IoError> {
    let mut lines = r.lines();
    let first = lines.next().ok_or(IoError::MissingHeader)??;
    let header: LogHeader =
        serde_json::from_str(&first).map_err(|e| IoError::BadLine(1, e.to_string()))?;
    let mut entries = Vec::new();
    for (num, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry =
            serde_json::from_str(&line).map_err(|e| IoError::BadLine(num + 2, e.to_string()))?;
        entries.push(entry);
    }
    Ok((header, entries))
}

/// Rebuild a melody from a log: only (note, t) are used, plus the horizon
/// from the header's trace config.
pub fn melody_from_log(header: &LogHeader, entries: &[LogEntry]) -> Result<Melody, IoError> {
    let crossings: Vec<Crossing> = entries
        .iter()
        .map(|e| Crossing { label: e.note.clone(), gluing: 0, t: e.t, x: e.x, theta: e.theta })
        .collect();
    let mut labels: Vec<String> = entries.iter().map(|e| e.note.clone()).collect();
    labels.sort();
    labels.dedup();
    Ok(Melody::from_crossings(&crossings, header.config.max_time, labels)?)
}

/// CSV export of a CDF curve, one `T,value` pair per line.
pub fn write_cdf_csv<W: Write>(mut w: W, cdf: &EmpiricalCDF) -> Result<(), IoError> {
    writeln!(w, "T,value")?;
    for (t, v) in cdf.grid.iter().zip(&cdf.values) {
        writeln!(w, "{t:.14e},{v:.14e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{sample_liouville, trace};
    use crate::spec::genus2_theta;
    use crate::surface::build_surface;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_log() -> (LogHeader, Vec<Crossing>) {
        let spec = genus2_theta([0.9, 1.1, 1.4], [0.15, -0.2, 0.3], &[(0, "C4"), (1, "E4")]);
        let surface = build_surface(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let start = sample_liouville(&surface, &mut rng);
        let config = TraceConfig::for_time(500.0);
        let t = trace(&surface, start, &config).unwrap();
        let header = LogHeader {
            spec: spec.content_hash(),
            seed: 42,
            config,
            version: tool_version(),
        };
        (header, t.crossings)
    }

    #[test]
    fn log_round_trip_preserves_notes_and_times() {
        let (header, crossings) = sample_log();
        assert!(crossings.len() > 10);
        let mut buf = Vec::new();
        write_crossing_log(&mut buf, &header, &crossings).unwrap();
        let (back, entries) = read_crossing_log(buf.as_slice()).unwrap();
        assert_eq!(back.spec, header.spec);
        assert_eq!(back.seed, 42);
        assert_eq!(entries.len(), crossings.len());
        for (e, c) in entries.iter().zip(&crossings) {
            assert_eq!(e.note, c.label);
            // 15 significant digits: relative error below 1e-14.
            assert!((e.t - c.t).abs() <= 1e-14 * c.t.abs().max(1.0));
        }
        let melody = melody_from_log(&back, &entries).unwrap();
        assert_eq!(melody.notes.len(), crossings.len());
    }

    #[test]
    fn log_bytes_are_deterministic() {
        let (header, crossings) = sample_log();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_crossing_log(&mut a, &header, &crossings).unwrap();
        write_crossing_log(&mut b, &header, &crossings).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cdf_csv_has_header_and_rows() {
        let cdf = EmpiricalCDF::from_samples(&[0.5, 1.0, 1.5], vec![0.0, 1.0, 2.0]);
        let mut buf = Vec::new();
        write_cdf_csv(&mut buf, &cdf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("T,value"));
        assert_eq!(lines.count(), 3);
    }
}
