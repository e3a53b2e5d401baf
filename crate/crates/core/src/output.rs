//! Output files: diagnostics and Newton-trace CSV, legacy VTK and columnar
//! snapshots, and a JSON manifest with a SHA-256 checksum of every file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::experiments::{DiagnosticsRecord, Snapshot};
use crate::monge_ampere::NewtonTrace;

pub const DIAGNOSTICS_HEADER: &str =
    "time,total_V,total_AV,total_rhoV,total_rhoAV,min_A,max_A,max_courant,min_cell_volume";
pub const TRACE_HEADER: &str = "step,outer_iter,initial_residual,inner_iters";

/// Seventeen significant digits, enough to round-trip any double.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for r in records {
        let row = [
            r.time,
            r.total_v,
            r.total_av,
            r.total_rho_v,
            r.total_rho_av,
            r.min_a,
            r.max_a,
            r.max_courant,
            r.min_cell_volume,
        ];
        let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Newton traces keyed by time step; step 0 is the initial mesh generation.
pub fn trace_csv<'a, I>(traces: I) -> String
where
    I: IntoIterator<Item = (usize, &'a NewtonTrace)>,
{
    let mut out = format!("{TRACE_HEADER}\n");
    for (step, trace) in traces {
        for e in &trace.entries {
            let _ = writeln!(
                out,
                "{step},{},{},{}",
                e.outer_iter,
                num(e.initial_residual),
                e.inner_iters
            );
        }
    }
    out
}

/// File stem for a snapshot: scenario name and whole seconds.
pub fn snapshot_stem(name: &str, time: f64) -> String {
    format!("{name}_t{}", time.round() as i64)
}

/// Legacy VTK structured grid: bottom and top vertex layers, cell scalars rho, A, V.
pub fn snapshot_vtk(name: &str, snap: &Snapshot) -> String {
    let mesh = &snap.mesh;
    let n = mesh.n();
    let points = (n + 1) * (n + 1);
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{name} t={}", snap.time);
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_GRID");
    let _ = writeln!(out, "DIMENSIONS {} {} 2", n + 1, n + 1);
    let _ = writeln!(out, "POINTS {} double", 2 * points);
    for (p, z) in mesh.vertices().iter().zip(mesh.bottom_heights()) {
        let _ = writeln!(out, "{} {} {}", num(p[0]), num(p[1]), num(*z));
    }
    for p in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", num(p[0]), num(p[1]), num(mesh.height()));
    }
    let _ = writeln!(out, "CELL_DATA {}", n * n);
    for (label, field) in [("rho", &snap.rho[..]), ("A", &snap.a[..]), ("V", mesh.volumes())] {
        let _ = writeln!(out, "SCALARS {label} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for v in field {
            let _ = writeln!(out, "{}", num(*v));
        }
    }
    out
}

/// Whitespace-separated columns `x_center y_center rho A V`, one row per cell.
pub fn snapshot_columns(snap: &Snapshot) -> String {
    let mesh = &snap.mesh;
    let mut out = String::from("# x_center y_center rho A V\n");
    for c in 0..mesh.num_cells() {
        let g = mesh.centroids()[c];
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            num(g.x),
            num(g.y),
            num(snap.rho[c]),
            num(snap.a[c]),
            num(mesh.volumes()[c])
        );
    }
    out
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one invocation: configuration, code version, timing and outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub status: String,
    pub files: Vec<ManifestFile>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// An output directory that remembers what it wrote.
pub struct OutputDir {
    root: PathBuf,
    started: f64,
    written: BTreeMap<String, ManifestFile>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            started: now(),
            written: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `name`; a second write to the same name replaces the entry.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents)?;
        self.written.insert(
            name.to_string(),
            ManifestFile {
                path: name.to_string(),
                sha256: sha256_hex(contents.as_bytes()),
                bytes: contents.len() as u64,
            },
        );
        Ok(path)
    }

    pub fn files(&self) -> impl Iterator<Item = &ManifestFile> {
        self.written.values()
    }

    pub fn write_snapshot(&mut self, name: &str, snap: &Snapshot) -> Result<()> {
        let stem = snapshot_stem(name, snap.time);
        self.write(&format!("{stem}.vtk"), &snapshot_vtk(name, snap))?;
        self.write(&format!("{stem}.dat"), &snapshot_columns(snap))?;
        Ok(())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(self, command: &str, config: &str, status: &str) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.to_string(),
            started: self.started,
            finished: now(),
            status: status.to_string(),
            files: self.written.into_values().collect(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        fs::write(self.root.join(MANIFEST_NAME), json)?;
        Ok(manifest)
    }
}
