//! On-disk formats.
//!
//! A field snapshot is one raw file per component holding little-endian
//! `f64` physical samples in C row-major order, plus a JSON sidecar that
//! records `dim`, `n`, `length` and the time stamp. A trajectory is a
//! directory with a `manifest.json` and one velocity and one pressure
//! snapshot per recorded sample.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ac::{AcState, SolverKind, Trajectory};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub time: f64,
    /// Component files, relative to the sidecar's directory.
    pub files: Vec<String>,
}

fn sidecar_path(stem: &Path) -> PathBuf {
    stem.with_extension("json")
}

/// Writes `<stem>.json` and `<stem>.<c>.f64` for every component.
pub fn write_field(stem: &Path, field: &SpectralField, time: f64) -> Result<PathBuf> {
    let g = field.grid();
    let base = stem
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidParameter(format!("bad snapshot stem {}", stem.display())))?
        .to_string();
    let dir = stem.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut files = Vec::new();
    for (c, samples) in field.to_physical().iter().enumerate() {
        let name = format!("{base}.{c}.f64");
        let mut w = BufWriter::new(fs::File::create(dir.join(&name))?);
        for v in samples {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        files.push(name);
    }
    let meta = SnapshotMeta { dim: g.dim(), n: g.n(), length: g.length(), time, files };
    let side = sidecar_path(stem);
    fs::write(&side, serde_json::to_string_pretty(&meta)?)?;
    Ok(side)
}

/// Reads a snapshot given its JSON sidecar; builds the grid unless one is supplied.
pub fn read_field(sidecar: &Path, grid: Option<&Arc<TorusGrid>>) -> Result<(SpectralField, f64)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    let grid = match grid {
        Some(g) => {
            if g.dim() != meta.dim || g.n() != meta.n || g.length() != meta.length {
                return Err(Error::Mismatch(format!("snapshot {} is on a different grid", sidecar.display())));
            }
            Arc::clone(g)
        }
        None => TorusGrid::with_length(meta.dim, meta.n, meta.length)?,
    };
    let dir = sidecar.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut samples = Vec::with_capacity(meta.files.len());
    for name in &meta.files {
        let mut bytes = Vec::new();
        fs::File::open(dir.join(name))?.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * grid.len() {
            return Err(Error::SizeMismatch { expected: 8 * grid.len(), found: bytes.len() });
        }
        samples.push(
            bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
                .collect(),
        );
    }
    Ok((SpectralField::from_physical(&grid, &samples)?, meta.time))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub solver: SolverKind,
    pub eps: f64,
    pub nu: f64,
    pub nonlinear: bool,
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub dt_rec: f64,
    pub count: usize,
    /// Per-step `ν‖∇u‖²`, when the producing solver kept it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_history: Option<Vec<f64>>,
}

impl TrajectoryManifest {
    pub fn of(traj: &Trajectory) -> Self {
        Self {
            solver: traj.solver,
            eps: traj.eps,
            nu: traj.nu,
            nonlinear: traj.nonlinear,
            dim: traj.grid.dim(),
            n: traj.grid.n(),
            length: traj.grid.length(),
            t0: traj.t0(),
            t_end: traj.t_end(),
            dt: traj.dt,
            dt_rec: traj.dt_rec,
            count: traj.len(),
            rate_history: traj.rate_history.clone(),
        }
    }
}

pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (j, s) in traj.samples.iter().enumerate() {
        write_field(&dir.join(format!("u_{j:05}")), &s.u, s.t)?;
        write_field(&dir.join(format!("p_{j:05}")), &s.p, s.t)?;
    }
    let manifest = TrajectoryManifest::of(traj);
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let m: TrajectoryManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let grid = TorusGrid::with_length(m.dim, m.n, m.length)?;
    let mut samples = Vec::with_capacity(m.count);
    for j in 0..m.count {
        let (u, t) = read_field(&dir.join(format!("u_{j:05}.json")), Some(&grid))?;
        let (p, _) = read_field(&dir.join(format!("p_{j:05}.json")), Some(&grid))?;
        samples.push(AcState { u, p, eps: m.eps, t });
    }
    let traj = Trajectory::new(m.solver, m.nu, m.nonlinear, m.dt, m.dt_rec, samples)?;
    match m.rate_history {
        Some(r) => traj.with_rate_history(r),
        None => Ok(traj),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::random_field;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(3, 8).unwrap();
        let f = random_field(&g, 3, 1, false);
        let side = write_field(&dir.path().join("f"), &f, 0.25).unwrap();
        let (back, t) = read_field(&side, None).unwrap();
        assert_eq!(t, 0.25);
        assert!(back.max_diff(&f) < 1e-15);
        let raw = fs::read(dir.path().join("f.0.f64")).unwrap();
        assert_eq!(raw.len(), 8 * 512);
        let first = f64::from_le_bytes(raw[..8].try_into().unwrap());
        assert_eq!(first, f.to_physical()[0][0]);
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(2, 8).unwrap();
        let u0 = crate::ns::taylor_green(0.0, 1.0, &g).0;
        let traj = crate::ac::simulate_from_velocity(&u0, &crate::ac::AcParams::new(0.1, 1.0), 0.1, 0.01, 0.05).unwrap();
        write_trajectory(dir.path(), &traj).unwrap();
        let back = read_trajectory(dir.path()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.rate_history, traj.rate_history);
        assert_eq!(back.solver, SolverKind::Ac);
        for (a, b) in back.samples.iter().zip(&traj.samples) {
            assert!(a.u.max_diff(&b.u) < 1e-15 && a.p.max_diff(&b.p) < 1e-15);
            assert_eq!(a.t, b.t);
        }
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(text.contains("\"solver\": \"ac\""));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let g = TorusGrid::new(2, 8).unwrap();
        let side = write_field(&dir.path().join("f"), &SpectralField::scalar_zeros(&g), 0.0).unwrap();
        let other = TorusGrid::new(2, 16).unwrap();
        assert!(matches!(read_field(&side, Some(&other)), Err(Error::Mismatch(_))));
    }
}
