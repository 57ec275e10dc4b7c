//! Snapshots, diagnostics series and the run manifest.
//!
//! A snapshot file holds one field: an ASCII header line
//! `MPE1 <name> <nx> <ny> <np> <time>` followed by `nx*ny*np` little-endian
//! f64 values, `k` slowest and `i` fastest (`k = 0` is the top level `p0`).
//! Ghost cells are not stored. `w` lives on the `np + 1` pressure faces and is
//! written with that count in the `<np>` slot; `Phi_s` is written with `np = 1`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ModelState};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub np: usize,
    pub time: f64,
    pub data: Vec<f64>,
}

/// Interior values of every stored field, in file order.
pub fn snapshot_fields(state: &ModelState, grid: &Grid) -> Vec<Snapshot> {
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
    let mut out: Vec<Snapshot> = state
        .named_fields()
        .into_iter()
        .map(|(name, f)| Snapshot {
            name: name.to_string(),
            nx,
            ny,
            np,
            time: state.time,
            data: f.interior().collect(),
        })
        .collect();
    let mut w = Vec::with_capacity(nx * ny * (np + 1));
    for kf in 0..=np {
        for j in 0..ny {
            for i in 0..nx {
                w.push(state.vel.w.get(i, j, kf));
            }
        }
    }
    out.push(Snapshot {
        name: "w".into(),
        nx,
        ny,
        np: np + 1,
        time: state.time,
        data: w,
    });
    let mut ps = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            ps.push(state.phi_s.get(i as isize, j as isize));
        }
    }
    out.push(Snapshot {
        name: "Phi_s".into(),
        nx,
        ny,
        np: 1,
        time: state.time,
        data: ps,
    });
    out
}

pub fn snapshot_path(dir: &Path, tag: &str, name: &str) -> PathBuf {
    dir.join(format!("{tag}_{name}.mpe1"))
}

fn create(path: &Path, overwrite: bool) -> Result<File> {
    let mut opts = OpenOptions::new();
    opts.write(true);
    if overwrite {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    opts.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::Exists(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

pub fn write_field(path: &Path, snap: &Snapshot, overwrite: bool) -> Result<()> {
    if snap.data.len() != snap.nx * snap.ny * snap.np {
        return Err(Error::Snapshot {
            path: path.to_path_buf(),
            msg: format!("{} values for {}x{}x{}", snap.data.len(), snap.nx, snap.ny, snap.np),
        });
    }
    let mut buf = format!(
        "MPE1 {} {} {} {} {:e}\n",
        snap.name, snap.nx, snap.ny, snap.np, snap.time
    )
    .into_bytes();
    buf.reserve(snap.data.len() * 8);
    for v in &snap.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = create(path, overwrite)?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<Snapshot> {
    let bad = |msg: String| Error::Snapshot {
        path: path.to_path_buf(),
        msg,
    };
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut header = String::new();
    r.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "MPE1" {
        return Err(bad(format!("bad header `{}`", header.trim_end())));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad dimension `{s}`")));
    let (nx, ny, np) = (num(parts[2])?, num(parts[3])?, num(parts[4])?);
    let time: f64 = parts[5].parse().map_err(|_| bad(format!("bad time `{}`", parts[5])))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let n = nx * ny * np;
    if bytes.len() != n * 8 {
        return Err(bad(format!("expected {} payload bytes, found {}", n * 8, bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Snapshot {
        name: parts[1].to_string(),
        nx,
        ny,
        np,
        time,
        data,
    })
}

/// Writes every field of `state` under `dir` with file names `<tag>_<name>.mpe1`.
pub fn write_snapshot(state: &ModelState, grid: &Grid, dir: &Path, tag: &str, overwrite: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let snaps = snapshot_fields(state, grid);
    if !overwrite {
        for s in &snaps {
            let p = snapshot_path(dir, tag, &s.name);
            if p.exists() {
                return Err(Error::Exists(p));
            }
        }
    }
    snaps
        .iter()
        .map(|s| {
            let p = snapshot_path(dir, tag, &s.name);
            write_field(&p, s, overwrite).map(|_| p)
        })
        .collect()
}

/// Reads the fields written by [`write_snapshot`] for `tag`.
pub fn read_snapshot(dir: &Path, tag: &str, names: &[&str]) -> Result<Vec<Snapshot>> {
    names.iter().map(|n| read_field(&snapshot_path(dir, tag, n))).collect()
}

/// All names written by [`write_snapshot`].
pub const SNAPSHOT_NAMES: [&str; 9] = ["v1", "v2", "T", "qv", "qc", "qr", "Phi", "w", "Phi_s"];

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Appends one row to a CSV series, writing the header first when the file is
/// empty or missing. Flushes before returning.
pub fn append_timeseries(path: &Path, header: &[String], values: &[f64]) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let empty = f.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
    let mut line = String::new();
    if empty {
        line.push_str(&header.join(","));
        line.push('\n');
    }
    let row: Vec<String> = values.iter().map(|v| fmt17(*v)).collect();
    line.push_str(&row.join(","));
    line.push('\n');
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Parses a series written by [`append_timeseries`].
pub fn read_timeseries(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Snapshot {
                        path: path.to_path_buf(),
                        msg: format!("bad number `{v}`"),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub tag: String,
    pub time: f64,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub start_wall: f64,
    pub end_wall: Option<f64>,
    pub snapshots: Vec<SnapshotEntry>,
    pub timeseries: Option<PathBuf>,
    pub complete: bool,
    pub error: Option<String>,
    pub baseline_keys: Vec<String>,
}

pub fn wall_seconds() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(config: String) -> Self {
        RunManifest {
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            start_wall: wall_seconds(),
            end_wall: None,
            snapshots: Vec::new(),
            timeseries: None,
            complete: false,
            error: None,
            baseline_keys: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Marks the run finished. Fails if a listed snapshot file is missing.
    pub fn finalize(&mut self, path: &Path, outcome: std::result::Result<(), String>) -> Result<()> {
        self.end_wall = Some(wall_seconds());
        for f in self.snapshots.iter().flat_map(|s| &s.files) {
            if !f.exists() {
                self.complete = false;
                self.error = Some(format!("missing snapshot {}", f.display()));
                self.write(path)?;
                return Err(Error::Snapshot {
                    path: f.clone(),
                    msg: "listed in manifest but missing".into(),
                });
            }
        }
        match outcome {
            Ok(()) => self.complete = true,
            Err(e) => {
                self.complete = false;
                self.error = Some(e);
            }
        }
        self.write(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(g: &Grid) -> ModelState {
        let mut s = ModelState::zeros(g);
        s.t = crate::grid::ScalarField3::from_fn(g, |x, y, p| 1.0 / 3.0 + x * y * p.ln());
        s.vel.w.set(1, 2, 3, std::f64::consts::PI);
        s.phi_s.set(1, 1, -2.5e-300);
        s.time = 0.1;
        s
    }

    #[test]
    fn snapshot_round_trip_and_collision() {
        let g = Grid::new(5, 4, 6, 1.0, 1.0, 1.0e4, 1.0e5).unwrap();
        let s = state(&g);
        let dir = tempfile::tempdir().unwrap();
        let files = write_snapshot(&s, &g, dir.path(), "000000", false).unwrap();
        assert_eq!(files.len(), SNAPSHOT_NAMES.len());
        let back = read_snapshot(dir.path(), "000000", &SNAPSHOT_NAMES).unwrap();
        for (a, b) in snapshot_fields(&s, &g).iter().zip(&back) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.time.to_bits(), b.time.to_bits());
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.data), bits(&b.data));
        }
        assert!(matches!(
            write_snapshot(&s, &g, dir.path(), "000000", false),
            Err(Error::Exists(_))
        ));
        write_snapshot(&s, &g, dir.path(), "000000", true).unwrap();
    }

    #[test]
    fn csv_appends_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("series.csv");
        let header = vec!["a".to_string(), "b".to_string()];
        let mut rows = Vec::new();
        for n in 0..100 {
            let r = vec![n as f64 / 7.0, (n as f64).exp() * 1e-300];
            append_timeseries(&p, &header, &r).unwrap();
            rows.push(r);
        }
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 101);
        let (h, back) = read_timeseries(&p).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, rows);
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.mpe1");
        fs::write(&p, b"MPE1 T 2 2 2 0\n\x00\x00").unwrap();
        assert!(matches!(read_field(&p), Err(Error::Snapshot { .. })));
    }

    #[test]
    fn manifest_flags_incomplete_runs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        let mut m = RunManifest::new("cfg".into());
        m.write(&p).unwrap();
        assert!(!RunManifest::read(&p).unwrap().complete);
        m.finalize(&p, Err("boom".into())).unwrap();
        let back = RunManifest::read(&p).unwrap();
        assert!(!back.complete);
        assert_eq!(back.error.as_deref(), Some("boom"));
        m.finalize(&p, Ok(())).unwrap();
        assert!(RunManifest::read(&p).unwrap().complete);
    }
}
