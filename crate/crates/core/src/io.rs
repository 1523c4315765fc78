//! Patch and trace files.
//!
//! A patch is stored as `<stem>.csv` with columns `x1..xn,u` (one row per
//! node, node order) and a sidecar `<stem>.json` holding [`PatchMeta`].
//! Floats are written in shortest round-trip form, so a read-back patch is
//! bit-identical.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GraphPatch, Grid};
use crate::solver::TraceRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMeta {
    pub n: usize,
    pub r: f64,
    pub m: usize,
    /// Surface the data came from; for solver output, the surface that
    /// supplied the boundary data.
    pub kind: String,
    pub params: Vec<f64>,
}

impl PatchMeta {
    pub fn new(grid: &Grid, kind: &str, params: Vec<f64>) -> Self {
        Self {
            n: grid.n(),
            r: grid.r(),
            m: grid.m(),
            kind: kind.to_string(),
            params,
        }
    }
}

pub const TRACE_HEADER: [&str; 4] = ["iter", "residual_max", "step_length", "admissible"];

fn flush(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Argument(format!("cannot flush CSV buffer: {e}")))
}

pub fn patch_csv_bytes(patch: &GraphPatch) -> Result<Vec<u8>> {
    let grid = patch.grid();
    let wrap = |e| Error::csv("<memory>", e);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=grid.n()).map(|a| format!("x{a}")).collect();
    header.push("u".into());
    w.write_record(&header).map_err(wrap)?;
    for (node, u) in patch.u().iter().enumerate() {
        let mut row: Vec<String> = grid.position(node).iter().map(|x| x.to_string()).collect();
        row.push(u.to_string());
        w.write_record(&row).map_err(wrap)?;
    }
    flush(w)
}

pub fn trace_csv_bytes(trace: &[TraceRow]) -> Result<Vec<u8>> {
    let wrap = |e| Error::csv("<memory>", e);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).map_err(wrap)?;
    for t in trace {
        w.write_record([
            t.iter.to_string(),
            format!("{:e}", t.residual_max),
            t.step_length.to_string(),
            t.admissible.to_string(),
        ])
        .map_err(wrap)?;
    }
    flush(w)
}

/// Sidecar path for a patch CSV: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `csv_path` and its JSON sidecar.
pub fn write_patch(csv_path: &Path, patch: &GraphPatch, meta: &PatchMeta) -> Result<()> {
    write(csv_path, &patch_csv_bytes(patch)?)?;
    let json = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::Argument(format!("cannot encode patch metadata: {e}")))?;
    write(&sidecar_path(csv_path), format!("{json}\n").as_bytes())
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    write(path, &trace_csv_bytes(trace)?)
}

/// Reads a patch written by [`write_patch`], checking the node coordinates
/// against the grid described by the sidecar.
pub fn read_patch(csv_path: &Path) -> Result<(GraphPatch, PatchMeta)> {
    let side = sidecar_path(csv_path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: PatchMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", side.display())))?;
    let grid = Grid::new(meta.n, meta.r, meta.m)?;
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| Error::csv(csv_path, e))?;
    let bad = |msg: String| Error::Config(format!("{}: {msg}", csv_path.display()));
    let mut u = Vec::with_capacity(grid.len());
    for (node, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(csv_path, e))?;
        if record.len() != meta.n + 1 {
            return Err(bad(format!("row {node} has {} fields, expected {}", record.len(), meta.n + 1)));
        }
        let values = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("row {node}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if node >= grid.len() {
            return Err(bad(format!("more than {} rows", grid.len())));
        }
        let expect = grid.position(node);
        if values[..meta.n] != expect[..] {
            return Err(bad(format!("row {node} is not at grid position {expect:?}")));
        }
        u.push(values[meta.n]);
    }
    if u.len() != grid.len() {
        return Err(bad(format!("{} rows, expected {}", u.len(), grid.len())));
    }
    Ok((GraphPatch::new(grid, u)?, meta))
}
