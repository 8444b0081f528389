//! File interchange: the canonical record CSV, charge/estimate series, and
//! JSON parameter and report documents.
//!
//! The record format is one header `time_s,current_a,voltage_v,temp_c`
//! followed by decimal floats, UTF-8, LF line endings, positive current
//! meaning discharge. Floats are written in shortest round-trip form, so a
//! write/read cycle reproduces the same values bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimate::SocEstimate;
use crate::models::ModelParams;
use crate::trace::{Sample, Trace};

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Writes a record in the canonical CSV layout.
pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(display(path), e);
    out.write_all(b"time_s,current_a,voltage_v,temp_c\n")
        .map_err(io_err)?;
    for s in trace.samples() {
        let temp = s.temp_c.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", s.time_s, s.current_a, s.voltage_v, temp).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

fn parse_field(path: &Path, line: usize, name: &str, field: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: display(path),
        line,
        reason: format!("bad {name} value {field:?}"),
    })
}

/// Reads a canonical record CSV back into a validated trace.
pub fn read_trace_csv(path: &Path) -> Result<Trace> {
    let file = File::open(path).map_err(|e| Error::io(display(path), e))?;
    let mut text = String::new();
    BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|e| Error::io(display(path), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: display(path),
        line: 1,
        reason: "empty file".into(),
    })?;
    if header.trim() != "time_s,current_a,voltage_v,temp_c" {
        return Err(Error::Parse {
            path: display(path),
            line: 1,
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut samples = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: display(path),
                line,
                reason: format!("expected 4 columns, found {}", fields.len()),
            });
        }
        let temp = fields[3].trim();
        samples.push(Sample {
            time_s: parse_field(path, line, "time_s", fields[0])?,
            current_a: parse_field(path, line, "current_a", fields[1])?,
            voltage_v: parse_field(path, line, "voltage_v", fields[2])?,
            temp_c: if temp.is_empty() {
                None
            } else {
                Some(parse_field(path, line, "temp_c", temp)?)
            },
        });
    }
    Trace::new(samples)
}

/// Writes a charge series alongside its timestamps.
pub fn write_soc_csv(path: &Path, times_s: &[f64], soc: &[f64]) -> Result<()> {
    if times_s.len() != soc.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} timestamps against {} charge values",
            times_s.len(),
            soc.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(display(path), e);
    out.write_all(b"time_s,soc\n").map_err(io_err)?;
    for (t, s) in times_s.iter().zip(soc) {
        writeln!(out, "{t},{s}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads a charge series written by [`write_soc_csv`].
pub fn read_soc_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display(path), e))?;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if line == 1 {
            if raw.trim() != "time_s,soc" {
                return Err(Error::Parse {
                    path: display(path),
                    line,
                    reason: format!("unexpected header {raw:?}"),
                });
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let (t, s) = raw.split_once(',').ok_or_else(|| Error::Parse {
            path: display(path),
            line,
            reason: "expected 2 columns".into(),
        })?;
        rows.push((
            parse_field(path, line, "time_s", t)?,
            parse_field(path, line, "soc", s)?,
        ));
    }
    Ok(rows)
}

/// Writes an estimation series: `time_s,soc,sigma,innovation_v`.
pub fn write_estimates_csv(path: &Path, times_s: &[f64], estimates: &[SocEstimate]) -> Result<()> {
    if times_s.len() != estimates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} timestamps against {} estimates",
            times_s.len(),
            estimates.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(display(path), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(display(path), e);
    out.write_all(b"time_s,soc,sigma,innovation_v\n")
        .map_err(io_err)?;
    for (t, e) in times_s.iter().zip(estimates) {
        writeln!(out, "{t},{},{},{}", e.soc, e.sigma, e.innovation_v).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Writes model parameters as a tagged JSON document.
pub fn write_params_json(path: &Path, params: &ModelParams) -> Result<()> {
    write_json(path, params)
}

/// Reads a parameter document and validates it for its family.
pub fn read_params_json(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display(path), e))?;
    let params: ModelParams = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: display(path),
        line: e.line(),
        reason: e.to_string(),
    })?;
    params.validate()?;
    Ok(params)
}

/// Writes any serializable document as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParams(format!("unserializable document: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(display(path), e))
}

/// Hex SHA-256 digest of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(display(path), e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = reader
            .read(&mut buf)
            .map_err(|e| Error::io(display(path), e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}
