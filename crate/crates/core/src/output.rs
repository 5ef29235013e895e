//! CSV and JSON outputs. Floats use the shortest decimal that round-trips;
//! absent values are empty fields. Files are written through a temporary file
//! in the target directory and renamed into place.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::ensemble::{CorrelationPoint, CurvePoint, EnsembleResult};
use crate::error::{Error, Result};
use crate::stats::{fit_gaussian, GaussianFit};

pub const TRACE_HEADER: [&str; 5] = [
    "sample_index",
    "k",
    "energy",
    "energy_variance",
    "truncation_error",
];
pub const HISTOGRAM_HEADER: [&str; 3] = ["checkpoint_k", "sample_index", "energy"];
pub const FITS_HEADER: [&str; 6] = [
    "checkpoint_k",
    "mean",
    "variance",
    "stderr_mean",
    "ks_statistic",
    "sample_count",
];
pub const CURVE_HEADER: [&str; 3] = ["h", "m_z", "stderr"];
pub const CORR_HEADER: [&str; 3] = ["j", "phi", "stderr"];

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn trace_csv(result: &EnsembleResult) -> Result<Vec<u8>> {
    render(
        &TRACE_HEADER,
        result.samples.iter().flat_map(|s| {
            s.trace.records.iter().map(move |r| {
                vec![
                    s.sample_index.to_string(),
                    r.k.to_string(),
                    num(r.energy),
                    num(r.energy_variance),
                    num(r.truncation_error),
                ]
            })
        }),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramRow {
    pub checkpoint_k: usize,
    pub sample_index: u64,
    pub energy: f64,
}

pub fn histogram_rows(result: &EnsembleResult) -> Vec<HistogramRow> {
    result
        .checkpoints
        .iter()
        .flat_map(|c| {
            result.samples.iter().filter_map(move |s| {
                s.trace.at(c.k).map(|r| HistogramRow {
                    checkpoint_k: c.k,
                    sample_index: s.sample_index,
                    energy: r.energy,
                })
            })
        })
        .collect()
}

pub fn histogram_csv(rows: &[HistogramRow]) -> Result<Vec<u8>> {
    render(
        &HISTOGRAM_HEADER,
        rows.iter().map(|r| {
            vec![
                r.checkpoint_k.to_string(),
                r.sample_index.to_string(),
                num(r.energy),
            ]
        }),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitRow {
    pub checkpoint_k: usize,
    pub fit: GaussianFit,
}

/// Normal fits per checkpoint; checkpoints with fewer than two energies are
/// skipped.
pub fn fits_from_histogram(rows: &[HistogramRow]) -> Vec<FitRow> {
    let mut ks: Vec<usize> = rows.iter().map(|r| r.checkpoint_k).collect();
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter()
        .filter_map(|k| {
            let energies: Vec<f64> = rows
                .iter()
                .filter(|r| r.checkpoint_k == k)
                .map(|r| r.energy)
                .collect();
            fit_gaussian(&energies).ok().map(|fit| FitRow {
                checkpoint_k: k,
                fit,
            })
        })
        .collect()
}

pub fn fits_csv(rows: &[FitRow]) -> Result<Vec<u8>> {
    render(
        &FITS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.checkpoint_k.to_string(),
                num(r.fit.mean),
                num(r.fit.variance),
                num(r.fit.standard_error_mean),
                opt(r.fit.ks_statistic),
                r.fit.sample_count.to_string(),
            ]
        }),
    )
}

pub fn curve_csv(points: &[CurvePoint]) -> Result<Vec<u8>> {
    render(
        &CURVE_HEADER,
        points
            .iter()
            .map(|p| vec![num(p.h), num(p.m_z), opt(p.stderr)]),
    )
}

pub fn corr_csv(points: &[CorrelationPoint]) -> Result<Vec<u8>> {
    render(
        &CORR_HEADER,
        points
            .iter()
            .map(|p| vec![p.j.to_string(), num(p.phi), opt(p.stderr)]),
    )
}

pub fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `bytes` to `path` via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads a `histogram.csv` produced by [`histogram_csv`].
pub fn read_histogram(path: &Path) -> Result<Vec<HistogramRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HISTOGRAM_HEADER {
        return Err(Error::Format(format!(
            "unexpected histogram header: {:?}",
            headers
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |what: &str| Error::Format(format!("row {}: invalid {what}", line + 2));
        rows.push(HistogramRow {
            checkpoint_k: field(0).parse().map_err(|_| bad("checkpoint_k"))?,
            sample_index: field(1).parse().map_err(|_| bad("sample_index"))?,
            energy: field(2).parse().map_err(|_| bad("energy"))?,
        });
    }
    Ok(rows)
}
