//! On-disk formats.
//!
//! Binary snapshot: little-endian `u64` header length, a JSON header, then
//! the fields as row-major little-endian `f64`. Trajectories are a directory
//! holding `manifest.json`, `diagnostics.csv` and optionally `snapshots/`.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::Params;
use crate::dynamics::{State, Trajectory, TrajectoryKind};
use crate::entropy::DiagRecord;
use crate::error::{NskError, Result};
use crate::grid::{Field, Grid};

pub const DIAGNOSTICS_HEADER: [&str; 9] = [
    "t",
    "mass",
    "energy",
    "psi_gamma",
    "rel_kinetic",
    "rel_drift",
    "h_e_rel",
    "friction_diss",
    "viscous_diss",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    pub length: f64,
    pub time: f64,
    pub field_names: Vec<String>,
    pub dtype: String,
    pub shape: Vec<usize>,
}

/// Write to a sibling temporary file and rename, so readers never observe a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn encode_snapshot(state: &State) -> Result<Vec<u8>> {
    let grid = state.grid();
    let n = grid.n_points();
    let header = SnapshotHeader {
        n,
        length: grid.length(),
        time: state.time,
        field_names: vec!["rho".into(), "m".into(), "J".into()],
        dtype: "f64le".into(),
        shape: vec![3, n],
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + json.len() + 24 * n);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for f in [&state.rho, &state.m, &state.j] {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_snapshot_bin(path: &Path, state: &State) -> Result<()> {
    write_atomic(path, &encode_snapshot(state)?)
}

pub fn read_snapshot_bin(path: &Path) -> Result<(SnapshotHeader, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(SnapshotHeader, Vec<Vec<f64>>)> {
    let bad = |what: &str| NskError::Config(format!("malformed snapshot: {what}"));
    if bytes.len() < 8 {
        return Err(bad("truncated header length"));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let body_start = 8usize.checked_add(hlen).ok_or_else(|| bad("header length"))?;
    if bytes.len() < body_start {
        return Err(bad("truncated header"));
    }
    let header: SnapshotHeader = serde_json::from_slice(&bytes[8..body_start])?;
    if header.dtype != "f64le" {
        return Err(bad("unsupported dtype"));
    }
    let count: usize = header.shape.iter().product();
    let body = &bytes[body_start..];
    if body.len() != 8 * count || header.shape.last() != Some(&header.n) {
        return Err(bad("payload size does not match shape"));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let rows = values.chunks(header.n).map(<[f64]>::to_vec).collect();
    Ok((header, rows))
}

/// Rebuild a [`State`] from a binary snapshot on a fresh grid.
pub fn load_state(path: &Path) -> Result<State> {
    let (h, rows) = read_snapshot_bin(path)?;
    if rows.len() != 3 {
        return Err(NskError::Config("snapshot must hold rho, m, J".into()));
    }
    let grid = Grid::new(h.n, h.length)?;
    let mut it = rows.into_iter();
    let mut next = || Field::new(&grid, it.next().unwrap());
    State::new(h.time, next()?, next()?, next()?)
}

/// Two-column `x,value` CSV of one field.
pub fn write_field_csv(path: &Path, field: &Field) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "value"])?;
    for (x, v) in field.grid().nodes().iter().zip(field.values()) {
        w.write_record([fmt(*x), fmt(*v)])?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| NskError::Io(e.into_error()))?)
}

pub fn read_field_csv(path: &Path, grid: &Arc<Grid>) -> Result<Field> {
    let mut r = csv::Reader::from_path(path)?;
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: f64 = rec
            .get(1)
            .ok_or_else(|| NskError::Config("missing value column".into()))?
            .parse()
            .map_err(|e| NskError::Config(format!("bad value: {e}")))?;
        values.push(v);
    }
    Field::new(grid, values)
}

/// Shortest round-trip formatting.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn diagnostics_csv(records: &[DiagRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DIAGNOSTICS_HEADER)?;
    for d in records {
        w.write_record(
            [
                d.time,
                d.mass,
                d.energy,
                d.psi_gamma,
                d.rel_kinetic,
                d.rel_drift,
                d.h_e_rel_total,
                d.friction_dissipation,
                d.viscous_dissipation,
            ]
            .map(fmt),
        )?;
    }
    w.into_inner().map_err(|e| NskError::Io(e.into_error()))
}

pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != DIAGNOSTICS_HEADER {
        return Err(NskError::Config(format!("unexpected diagnostics header {header:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| NskError::Config(format!("diagnostics row {}: {e}", line + 2)))?;
        out.push(DiagRecord {
            time: v[0],
            mass: v[1],
            energy: v[2],
            psi_gamma: v[3],
            rel_kinetic: v[4],
            rel_drift: v[5],
            h_e_rel_total: v[6],
            friction_dissipation: v[7],
            viscous_dissipation: v[8],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub kind: TrajectoryKind,
    pub params: Params,
    pub n: usize,
    pub length: f64,
    pub times: Vec<f64>,
    pub steps: usize,
    pub max_dt: f64,
    pub min_dt: f64,
    pub snapshots: Vec<String>,
    pub crate_version: String,
}

/// Write `manifest.json`, `diagnostics.csv` and, if requested, one binary
/// snapshot per sample under `snapshots/`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory, with_snapshots: bool) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    if with_snapshots {
        let sdir = dir.join("snapshots");
        fs::create_dir_all(&sdir)?;
        for (k, s) in traj.snapshots.iter().enumerate() {
            let name = format!("snapshots/snap_{k:05}.bin");
            write_snapshot_bin(&dir.join(&name), s)?;
            names.push(name);
        }
    }
    write_atomic(&dir.join("diagnostics.csv"), &diagnostics_csv(&traj.diagnostics)?)?;
    let grid = traj.last().grid();
    let manifest = TrajectoryManifest {
        kind: traj.kind,
        params: traj.params.clone(),
        n: grid.n_points(),
        length: grid.length(),
        times: traj.times(),
        steps: traj.steps,
        max_dt: traj.max_dt,
        min_dt: traj.min_dt,
        snapshots: names,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<TrajectoryManifest> {
    let bytes = fs::read(dir.join("manifest.json"))?;
    Ok(serde_json::from_slice(&bytes)?)
}
