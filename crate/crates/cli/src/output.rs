//! Row format, manifest and file emission.
//!
//! Floats are written in shortest round-trip form, so parsing a file gives
//! back the exact values that were computed.

use std::io::Write;
use std::path::Path;

use ep_dimer::{EpLocation, Method};
use serde::{Deserialize, Serialize};

use crate::config::{Format, SweepConfig};
use crate::error::{CliError, Result};

pub const CSV_HEADER: &str = "delta,method,branch_id,s,mu_re,mu_im,residual";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub delta: f64,
    pub method: Method,
    pub branch_id: usize,
    pub s: f64,
    pub mu_re: f64,
    pub mu_im: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedEp {
    pub method: Method,
    pub delta: f64,
    pub coupling_j: f64,
    pub s: f64,
    pub mu_re: f64,
    pub mu_im: f64,
}

impl DetectedEp {
    pub fn new(method: Method, ep: &EpLocation) -> Self {
        Self {
            method,
            delta: ep.delta_ep,
            coupling_j: ep.coupling_j,
            s: ep.imbalance(),
            mu_re: ep.mu_ep.re,
            mu_im: ep.mu_ep.im,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCount {
    pub method: Method,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: SweepConfig,
    pub counts: Vec<MethodCount>,
    pub detected_eps: Vec<DetectedEp>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn count(&self, method: Method) -> usize {
        self.counts
            .iter()
            .find(|c| c.method == method)
            .map_or(0, |c| c.rows)
    }
}

#[derive(Serialize, Deserialize)]
struct JsonOutput {
    rows: Vec<Row>,
    manifest: RunManifest,
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| CliError::Serialize(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Serialize(e.to_string()))?;
    Ok(())
}

pub fn write_outputs(config: &SweepConfig, rows: &[Row], manifest: &RunManifest) -> Result<()> {
    let path = &config.output_path;
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    match config.format {
        Format::Csv => write_csv(&mut out, rows)?,
        Format::Json => {
            let doc = JsonOutput {
                rows: rows.to_vec(),
                manifest: manifest.clone(),
            };
            serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Serialize(e.to_string()))?;
            writeln!(out).map_err(|e| CliError::io(path, e))?;
        }
    }
    out.flush().map_err(|e| CliError::io(path, e))?;

    let manifest_path = config.manifest_path();
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Serialize(e.to_string()))?;
    std::fs::write(&manifest_path, text + "\n").map_err(|e| CliError::io(&manifest_path, e))
}

/// Read a sweep file written by [`write_outputs`], CSV or JSON.
pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if text.trim_start().starts_with('{') {
        let doc: JsonOutput = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            reason: e.to_string(),
        })?;
        return Ok(doc.rows);
    }
    parse_csv(path, &text)
}

fn parse_csv(path: &Path, text: &str) -> Result<Vec<Row>> {
    let parse_error = |line: u64, reason: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let header = text.lines().next().unwrap_or("");
    if header.trim_end() != CSV_HEADER {
        return Err(parse_error(1, format!("expected header `{CSV_HEADER}`, found `{header}`")));
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.deserialize::<Row>() {
        match record {
            Ok(row) => rows.push(row),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(parse_error(line, e.to_string()));
            }
        }
    }
    Ok(rows)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        reason: e.to_string(),
    })
}
