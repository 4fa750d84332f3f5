//! CSV emission for single runs and ensembles.
//!
//! Reals are written in Rust's shortest round-trip form. Optional `# key=value`
//! comment lines precede the header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::montecarlo::EnsembleStats;
use crate::observables::{MomentSeries, RecordEvent};

pub const ENSEMBLE_COLUMNS: [&str; 7] = [
    "t",
    "mean_w",
    "stderr_w",
    "mean_v",
    "stderr_v",
    "mean_m1_dev",
    "stderr_m1_dev",
];

#[inline]
fn real(x: f64) -> String {
    format!("{x:?}")
}

fn write_comments<W: Write>(out: &mut W, meta: &[(&str, String)]) -> Result<()> {
    for (key, value) in meta {
        writeln!(out, "# {key}={value}")?;
    }
    Ok(())
}

pub fn series_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "n".to_string()];
    h.extend((0..dim).map(|a| format!("m1_{a}")));
    h.extend(["m2", "v", "w", "dissipation", "event"].map(String::from));
    h
}

/// Columns `t, n, m1_0..m1_{d-1}, m2, v, w, dissipation, event`, one row per entry.
pub fn write_series_csv<W: Write>(
    series: &MomentSeries,
    out: W,
    meta: &[(&str, String)],
) -> Result<()> {
    let mut out = out;
    write_comments(&mut out, meta)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(series_header(series.dim))?;
    for (event, r) in series.entries() {
        let mut row = vec![real(r.t), r.n.to_string()];
        row.extend(r.m1.iter().map(|&x| real(x)));
        row.extend([
            real(r.m2),
            real(r.v),
            real(r.w),
            real(r.dissipation),
            event.as_str().to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_series_csv(series: &MomentSeries, path: &Path, meta: &[(&str, String)]) -> Result<()> {
    write_series_csv(series, BufWriter::new(File::create(path)?), meta)
}

/// Columns [`ENSEMBLE_COLUMNS`], one row per shared grid point.
pub fn write_ensemble_csv<W: Write>(
    stats: &EnsembleStats,
    out: W,
    meta: &[(&str, String)],
) -> Result<()> {
    let mut out = out;
    write_comments(&mut out, meta)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(ENSEMBLE_COLUMNS)?;
    for (i, g) in stats.grid.iter().enumerate() {
        w.write_record([
            real(g.t),
            real(stats.mean_w[i]),
            real(stats.stderr_w[i]),
            real(stats.mean_v[i]),
            real(stats.stderr_v[i]),
            real(stats.mean_m1_dev[i]),
            real(stats.stderr_m1_dev[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_ensemble_csv(
    stats: &EnsembleStats,
    path: &Path,
    meta: &[(&str, String)],
) -> Result<()> {
    write_ensemble_csv(stats, BufWriter::new(File::create(path)?), meta)
}

/// One parsed row of a single-run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub n: usize,
    pub m1: Vec<f64>,
    pub m2: f64,
    pub v: f64,
    pub w: f64,
    pub dissipation: f64,
    pub event: RecordEvent,
}

/// Parse a single-run CSV (comment lines are skipped).
pub fn read_series_csv<R: std::io::Read>(input: R) -> Result<Vec<SeriesRow>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = r.headers()?.clone();
    let dim = headers
        .len()
        .checked_sub(7)
        .ok_or_else(|| Error::Domain("too few columns".into()))?;
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Domain(format!("bad number `{s}`: {e}")))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(SeriesRow {
            t: num(&rec[0])?,
            n: rec[1]
                .parse()
                .map_err(|e| Error::Domain(format!("bad count `{}`: {e}", &rec[1])))?,
            m1: (0..dim).map(|a| num(&rec[2 + a])).collect::<Result<_>>()?,
            m2: num(&rec[2 + dim])?,
            v: num(&rec[3 + dim])?,
            w: num(&rec[4 + dim])?,
            dissipation: num(&rec[5 + dim])?,
            event: rec[6 + dim].parse()?,
        });
    }
    Ok(rows)
}
