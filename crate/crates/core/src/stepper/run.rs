//! Run loop with snapshots, diagnostics series and manifest.
//!
//! Output layout under `run.out_dir`:
//!
//! ```text
//! manifest.json
//! series.csv
//! snapshots/<step:06>_<field>.mpe1
//! ```

use std::path::{Path, PathBuf};

use super::Model;
use crate::analysis::{record_diagnostics, BoundLimits, DiagnosticsRecord};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::{ModelState, Species};
use crate::io::{append_timeseries, write_snapshot, RunManifest, SnapshotEntry};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub overwrite: bool,
    /// Print a progress line to stderr at every output step.
    pub progress: bool,
    /// Skip every file write.
    pub dry: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: ModelState,
    pub series: Vec<DiagnosticsRecord>,
    pub limits: BoundLimits,
    pub manifest: RunManifest,
    pub manifest_path: Option<PathBuf>,
}

/// Diagnostics for `s` using the model's latest projection and continuity reports.
pub fn record(m: &Model, s: &ModelState, limits: &BoundLimits, dt: f64) -> DiagnosticsRecord {
    record_diagnostics(s, &m.grid, &m.cfg, limits, &m.last_continuity, &m.last_projection, dt)
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: rayon default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn progress_line(r: &DiagnosticsRecord, cfl: f64, s: &ModelState) -> String {
    let qmin = Species::ALL
        .iter()
        .map(|&sp| s.q(sp).min_max().0)
        .fold(f64::INFINITY, f64::min);
    format!(
        "t={:.6e} dt={:.3e} cfl={:.3} max|v|={:.3e} min_q={:.3e} energy={:.6e}",
        r.time,
        r.dt,
        cfl,
        s.vel.max_speed(),
        qmin,
        r.v.l2 * r.v.l2
    )
}

struct Sink<'a> {
    dir: Option<&'a Path>,
    opts: &'a RunOptions,
    write_snapshots: bool,
    monitors: bool,
    manifest: RunManifest,
}

impl Sink<'_> {
    fn manifest_path(&self) -> Option<PathBuf> {
        self.dir.map(|d| d.join("manifest.json"))
    }

    fn emit(&mut self, m: &Model, s: &ModelState, r: &DiagnosticsRecord) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        if self.monitors {
            let p = dir.join("series.csv");
            append_timeseries(&p, &DiagnosticsRecord::csv_header(), &r.csv_values())?;
            self.manifest.timeseries = Some(p);
        }
        if self.write_snapshots {
            let tag = format!("{:06}", s.step);
            let files = write_snapshot(s, &m.grid, &dir.join("snapshots"), &tag, self.opts.overwrite)?;
            self.manifest.snapshots.push(SnapshotEntry {
                tag,
                time: s.time,
                files,
            });
            if let Some(p) = self.manifest_path() {
                self.manifest.write(&p)?;
            }
        }
        Ok(())
    }
}

fn prepare_dir(dir: &Path, overwrite: bool) -> Result<()> {
    let manifest = dir.join("manifest.json");
    if manifest.exists() && !overwrite {
        return Err(Error::Exists(manifest));
    }
    if overwrite {
        let series = dir.join("series.csv");
        if series.exists() {
            std::fs::remove_file(&series).map_err(|e| Error::io(&series, e))?;
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Integrates to `t_end` (or `max_steps`), emitting output every
/// `output_every` steps and at the end.
pub fn run(cfg: &Config, opts: &RunOptions) -> Result<RunOutcome> {
    let mut m = Model::new(cfg.clone())?;
    let dir = (!opts.dry).then_some(cfg.run.out_dir.as_path());
    if let Some(d) = dir {
        prepare_dir(d, opts.overwrite)?;
    }
    let mut sink = Sink {
        dir,
        opts,
        write_snapshots: cfg.run.write_snapshots,
        monitors: cfg.run.monitors,
        manifest: RunManifest::new(cfg.to_config_string()),
    };
    let manifest_path = sink.manifest_path();
    if let Some(p) = &manifest_path {
        sink.manifest.write(p)?;
    }
    let result = run_loop(&mut m, &mut sink);
    if let Some(p) = &manifest_path {
        let outcome = match &result {
            Ok(_) => Ok(()),
            Err(e) => Err(e.to_string()),
        };
        sink.manifest.finalize(p, outcome)?;
    } else if result.is_ok() {
        sink.manifest.complete = true;
    }
    let (state, series, limits) = result?;
    Ok(RunOutcome {
        state,
        series,
        limits,
        manifest: sink.manifest,
        manifest_path,
    })
}

type LoopOut = (ModelState, Vec<DiagnosticsRecord>, BoundLimits);

fn run_loop(m: &mut Model, sink: &mut Sink) -> Result<LoopOut> {
    let mut s = m.initial_state()?;
    let limits = BoundLimits::from_initial(&s, &m.cfg.boundary);
    let r0 = record(m, &s, &limits, 0.0);
    sink.emit(m, &s, &r0)?;
    if sink.opts.progress {
        eprintln!("{}", progress_line(&r0, 0.0, &s));
    }
    let mut series = vec![r0];
    let (t_end, max_steps, every) = (m.cfg.run.t_end, m.cfg.run.max_steps, m.cfg.run.output_every);
    loop {
        let remaining = t_end - s.time;
        if max_steps > 0 && s.step >= max_steps {
            break;
        }
        let report = m.choose_dt(&s);
        if remaining <= 1e-9 * report.dt {
            break;
        }
        let dt = report.dt.min(remaining);
        s = m.step(&s, dt)?;
        let last = t_end - s.time <= 1e-9 * dt || (max_steps > 0 && s.step >= max_steps);
        let r = record(m, &s, &limits, dt);
        if s.step % every == 0 || last {
            sink.emit(m, &s, &r)?;
            if sink.opts.progress {
                eprintln!("{}", progress_line(&r, report.cfl * dt / report.dt, &s));
            }
        }
        series.push(r);
    }
    Ok((s, series, limits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ParamMode;

    fn cfg(dir: &Path) -> Config {
        let mut c = Config::defaults(ParamMode::Nondimensional);
        c.run.nx = 8;
        c.run.ny = 8;
        c.run.np = 4;
        c.run.out_dir = dir.to_path_buf();
        let qv = c.run.initial.qv_background * c.phys.q_vs;
        c.boundary.q_surface[0] = qv;
        c.boundary.q_lateral[0] = qv;
        c
    }

    #[test]
    fn zero_horizon_writes_initial_snapshot_only() {
        let d = tempfile::tempdir().unwrap();
        let mut c = cfg(d.path());
        c.run.t_end = 0.0;
        let out = run(&c, &RunOptions::default()).unwrap();
        assert_eq!(out.series.len(), 1);
        assert_eq!(out.manifest.snapshots.len(), 1);
        assert!(RunManifest::read(&d.path().join("manifest.json")).unwrap().complete);
    }

    #[test]
    fn rest_rows_are_identical() {
        let d = tempfile::tempdir().unwrap();
        let mut c = cfg(d.path());
        c.run.dt = 1e-4;
        c.run.t_end = 1.0;
        c.run.max_steps = 10;
        c.run.write_snapshots = false;
        let out = run(&c, &RunOptions::default()).unwrap();
        assert_eq!(out.series.len(), 11);
        let (_, rows) = crate::io::read_timeseries(&d.path().join("series.csv")).unwrap();
        assert_eq!(rows.len(), 11);
        let r1 = &out.series[1];
        for r in &out.series[2..] {
            assert!((r.t.l2 - r1.t.l2).abs() <= 1e-12 * r1.t.l2);
            assert!((r.qv.max - r1.qv.max).abs() <= 1e-14);
            assert!(r.v.l2 <= 1e-10);
        }
    }

    #[test]
    fn aborted_run_leaves_incomplete_manifest() {
        let d = tempfile::tempdir().unwrap();
        let mut c = cfg(d.path());
        c.run.dt = 1e3;
        c.run.t_end = 1e4;
        c.run.initial.kind = crate::config::InitialKind::WarmBubble;
        c.run.write_snapshots = false;
        assert!(run(&c, &RunOptions::default()).is_err());
        let man = RunManifest::read(&d.path().join("manifest.json")).unwrap();
        assert!(!man.complete);
        assert!(man.error.is_some());
    }

    #[test]
    fn existing_output_needs_overwrite() {
        let d = tempfile::tempdir().unwrap();
        let mut c = cfg(d.path());
        c.run.t_end = 0.0;
        run(&c, &RunOptions::default()).unwrap();
        assert!(matches!(run(&c, &RunOptions::default()), Err(Error::Exists(_))));
        let o = RunOptions {
            overwrite: true,
            ..Default::default()
        };
        run(&c, &o).unwrap();
    }
}
