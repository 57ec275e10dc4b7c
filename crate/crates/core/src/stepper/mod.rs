//! IMEX time stepping of the regularized system.
//!
//! One stage advances `y` by `dt`:
//!
//! 1. ghosts, hydrostatic Φ
//! 2. explicit advection, Coriolis, pressure gradient, horizontal diffusion
//!    and sources; phase-change sinks of each species divided by
//!    `1 + dt * rate` (rate = sink / q)
//! 3. implicit vertical diffusion per column (T, q_j; v only when ε₁ > 0)
//! 4. barotropic projection, w from continuity, ghosts
//!
//! `Rk2Imex` is Heun: `y¹ = S(yⁿ)`, `yⁿ⁺¹ = (yⁿ + S(y¹)) / 2`.

pub mod init;
pub mod mms;
pub mod run;
pub mod tridiag;

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{fill_lateral, fill_velocity, fill_vertical, GhostRule};
use crate::config::{AdvectionScheme, BoundaryData, Config, PhysParams, RunConfig, TimeScheme};
use crate::diagnostic::{
    diagnose_w, hydrostatic_phi, ContinuityReport, ProjectionReport, ProjectionWorkspace,
};
use crate::error::{Error, Result};
use crate::grid::{Field2, Grid, ModelState, ScalarField3, Species};
use crate::microphysics::{assemble_sources, sedimentation_factor, thermal_source_field};
use crate::operators::{advect, grad_h, laplace_h, DiffusionSpec, VerticalWeight};
use tridiag::solve_tridiagonal;

/// Ghost rules `(top, bottom, lateral)` for T.
pub fn temperature_rules(b: &BoundaryData) -> (GhostRule, GhostRule, GhostRule) {
    (
        GhostRule::Neumann,
        GhostRule::Robin { target: b.t_surface },
        GhostRule::Robin { target: b.t_lateral },
    )
}

/// Ghost rules `(top, bottom, lateral)` for a moisture species.
pub fn moisture_rules(b: &BoundaryData, s: Species) -> (GhostRule, GhostRule, GhostRule) {
    (
        GhostRule::Neumann,
        GhostRule::Robin { target: b.q_surface[s as usize] },
        GhostRule::Robin { target: b.q_lateral[s as usize] },
    )
}

fn fill_scalar(f: &mut ScalarField3, grid: &Grid, rules: (GhostRule, GhostRule, GhostRule)) {
    fill_vertical(f, grid, rules.0, rules.1);
    fill_lateral(f, grid, rules.2);
}

/// Fills every ghost layer: Robin on Γ_i and Γ_l and Neumann on Γ_u for T and
/// q_j; `∂_p v = 0` on the pressure faces and `v = 0` on the walls. w is pinned
/// to zero on both pressure faces by [`diagnose_w`].
pub fn apply_boundaries(state: &mut ModelState, grid: &Grid, bdata: &BoundaryData) {
    fill_scalar(&mut state.t, grid, temperature_rules(bdata));
    for s in Species::ALL {
        fill_scalar(state.q_mut(s), grid, moisture_rules(bdata, s));
    }
    fill_velocity(&mut state.vel, grid);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DtReport {
    pub dt: f64,
    pub advective: f64,
    pub diffusive: f64,
    pub sedimentation: f64,
    /// Advective Courant number `dt (|u|/dx + |v|/dy + |w|/dp)` at `dt`.
    pub cfl: f64,
    /// Set when no limit was finite and the floor `safety * min(dx, dy)` was used.
    pub floor_used: bool,
}

/// `safety * min(advective, horizontal diffusion, sedimentation)` limits.
pub fn stable_dt(state: &ModelState, grid: &Grid, phys: &PhysParams, sed_factor_max: f64, safety: f64) -> DtReport {
    let rate = state.vel.v1.max_abs() / grid.dx + state.vel.v2.max_abs() / grid.dy + state.vel.w.max_abs() / grid.dp;
    let advective = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    let mu = phys.mu_v.max(phys.mu_t).max(phys.mu_q);
    let diffusive = if mu > 0.0 {
        1.0 / (2.0 * mu * (1.0 / (grid.dx * grid.dx) + 1.0 / (grid.dy * grid.dy)))
    } else {
        f64::INFINITY
    };
    let sed_rate = phys.v_t * sed_factor_max;
    let sedimentation = if sed_rate > 0.0 { grid.dp / sed_rate } else { f64::INFINITY };
    let lim = advective.min(diffusive).min(sedimentation);
    let (dt, floor_used) = if lim.is_finite() {
        (safety * lim, false)
    } else {
        (safety * grid.dx.min(grid.dy), true)
    };
    DtReport {
        dt,
        advective,
        diffusive,
        sedimentation,
        cfl: dt * rate,
        floor_used,
    }
}

/// Solves `(I - dt ν ∂_p(c² ∂_p)) x = f` per column with affine ghost closures.
pub fn implicit_vertical(
    f: &mut ScalarField3,
    spec: &DiffusionSpec,
    dt: f64,
    top: GhostRule,
    bottom: GhostRule,
    grid: &Grid,
) {
    assert!(spec.conjugation.is_none(), "implicit solve supports the plain operator only");
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
    let r = dt * spec.nu / (grid.dp * grid.dp);
    if r == 0.0 {
        return;
    }
    let c = &spec.face_coeff;
    let (off_t, beta_t) = top.affine(grid.dp);
    let (off_b, beta_b) = bottom.affine(grid.dp);
    let mut a = vec![0.0; np];
    let mut b = vec![0.0; np];
    let mut cc = vec![0.0; np];
    for k in 0..np {
        a[k] = -r * c[k];
        cc[k] = -r * c[k + 1];
        b[k] = 1.0 + r * (c[k] + c[k + 1]);
    }
    b[0] = 1.0 + r * c[1] + r * c[0] * (1.0 - beta_t);
    b[np - 1] = 1.0 + r * c[np - 1] + r * c[np] * (1.0 - beta_b);
    let (src0, srcn) = (r * c[0] * off_t, r * c[np] * off_b);
    let mut cols = vec![0.0; nx * ny * np];
    let fr = &*f;
    cols.par_chunks_mut(np).enumerate().for_each(|(n, col)| {
        let (i, j) = ((n % nx) as isize, (n / nx) as isize);
        for (k, x) in col.iter_mut().enumerate() {
            *x = fr.get(i, j, k as isize);
        }
        col[0] += src0;
        col[np - 1] += srcn;
        let mut scratch = vec![0.0; np];
        solve_tridiagonal(&a, &b, &cc, col, &mut scratch);
    });
    for (n, col) in cols.chunks(np).enumerate() {
        let (i, j) = ((n % nx) as isize, (n / nx) as isize);
        for (k, x) in col.iter().enumerate() {
            f.set(i, j, k as isize, *x);
        }
    }
}

/// Time integrator bound to one configuration.
pub struct Model {
    pub cfg: Config,
    pub grid: Grid,
    f_t1: ScalarField3,
    spec_t: DiffusionSpec,
    spec_q: DiffusionSpec,
    spec_v: DiffusionSpec,
    sed_factor_max: f64,
    ws: ProjectionWorkspace,
    pub last_projection: ProjectionReport,
    pub last_continuity: ContinuityReport,
}

impl Model {
    pub fn new(cfg: Config) -> Result<Self> {
        cfg.validate()?;
        let grid = crate::grid::make_grid(&cfg.run, &cfg.phys)?;
        let phys = &cfg.phys;
        let prof = &cfg.profiles;
        let spec_t = DiffusionSpec::scalar(&grid, phys, prof, phys.mu_t, phys.nu_t);
        let spec_q = DiffusionSpec::scalar(&grid, phys, prof, phys.mu_q, phys.nu_q);
        let spec_v = DiffusionSpec::new(
            &grid,
            phys,
            phys.mu_v,
            phys.eps1,
            VerticalWeight::Reference(prof.theta_bar),
            0.0,
        );
        let sed_factor_max = sedimentation_factor(&grid, phys, prof).into_iter().fold(0.0, f64::max);
        let f_t1 = thermal_source_field(&cfg.run.thermal_source, &grid);
        let ws = ProjectionWorkspace::new(&grid, cfg.run.projection_tol, cfg.run.projection_max_iter);
        Ok(Model {
            cfg,
            grid,
            f_t1,
            spec_t,
            spec_q,
            spec_v,
            sed_factor_max,
            ws,
            last_projection: ProjectionReport::default(),
            last_continuity: ContinuityReport::default(),
        })
    }

    pub fn phys(&self) -> &PhysParams {
        &self.cfg.phys
    }

    pub fn run_cfg(&self) -> &RunConfig {
        &self.cfg.run
    }

    /// Initial state from the configured scenario, projected and diagnosed.
    pub fn initial_state(&mut self) -> Result<ModelState> {
        let mut s = init::initial_fields(&self.cfg, &self.grid);
        self.finish(&mut s, None)?;
        Ok(s)
    }

    /// Projects, diagnoses w, refreshes ghosts and Φ. With `dt`, records
    /// `ψ / dt` as the surface geopotential.
    pub fn finish(&mut self, s: &mut ModelState, dt: Option<f64>) -> Result<()> {
        self.last_projection = crate::diagnostic::barotropic_project(&mut s.vel, &self.grid, &mut self.ws)?;
        if let Some(dt) = dt {
            let (nx, ny) = (self.grid.nx, self.grid.ny);
            let mut ps = Field2::zeros(nx, ny);
            for j in 0..ny {
                for i in 0..nx {
                    ps.set(i as isize, j as isize, self.ws.psi[j * nx + i] / dt);
                }
            }
            ps.fill_neumann_ghosts();
            s.phi_s = ps;
        }
        self.last_continuity = diagnose_w(&mut s.vel, &self.grid)?;
        apply_boundaries(s, &self.grid, &self.cfg.boundary);
        s.phi = hydrostatic_phi(&s.t, &s.phi_s, &self.grid, self.cfg.phys.r_dry);
        Ok(())
    }

    pub fn apply_boundaries(&self, s: &mut ModelState) {
        apply_boundaries(s, &self.grid, &self.cfg.boundary);
    }

    pub fn stable_dt(&self, s: &ModelState) -> DtReport {
        stable_dt(s, &self.grid, &self.cfg.phys, self.sed_factor_max, self.cfg.run.cfl_safety)
    }

    /// Step size: the fixed `dt` if configured, else the adaptive limit.
    pub fn choose_dt(&self, s: &ModelState) -> DtReport {
        let mut r = self.stable_dt(s);
        if self.cfg.run.dt > 0.0 {
            r.cfl *= self.cfg.run.dt / r.dt;
            r.dt = self.cfg.run.dt;
            r.floor_used = false;
        }
        r
    }

    fn stage(&mut self, y: &ModelState, dt: f64) -> Result<ModelState> {
        let grid = &self.grid;
        let phys = &self.cfg.phys;
        let run = &self.cfg.run;
        let mut y = y.clone();
        apply_boundaries(&mut y, grid, &self.cfg.boundary);

        let phi = hydrostatic_phi(&y.t, &Field2::zeros(grid.nx, grid.ny), grid, phys.r_dry);
        let (px, py) = grad_h(&phi, grid);
        let src = assemble_sources(&y, grid, phys, &self.cfg.profiles, &self.f_t1);

        let mut out = y.clone();
        let f0 = phys.f0;
        let adv_m = run.momentum_advection;
        let (du1, du2) = rayon::join(
            || momentum_tendency(&y.vel.v1, &y, adv_m, phys.mu_v, grid),
            || momentum_tendency(&y.vel.v2, &y, adv_m, phys.mu_v, grid),
        );
        for (n, o) in out.vel.v1.data.iter_mut().enumerate() {
            *o += dt * (du1.data[n] + f0 * y.vel.v2.data[n] - px.data[n]);
        }
        for (n, o) in out.vel.v2.data.iter_mut().enumerate() {
            *o += dt * (du2.data[n] - f0 * y.vel.v1.data[n] - py.data[n]);
        }

        let dtt = scalar_tendency(&y.t, &y, adv_m, phys.mu_t, grid);
        for (n, o) in out.t.data.iter_mut().enumerate() {
            *o += dt * (dtt.data[n] + src.dt.data[n]);
        }

        let adv_q = run.moisture_advection;
        let semi = run.semi_implicit_sinks;
        let results: Vec<ScalarField3> = Species::ALL
            .par_iter()
            .map(|&s| {
                let q = y.q(s);
                let tend = scalar_tendency(q, &y, adv_q, phys.mu_q, grid);
                let total = match s {
                    Species::Vapor => &src.dqv,
                    Species::Cloud => &src.dqc,
                    Species::Rain => &src.dqr,
                };
                let sink = &src.sink[s as usize];
                let mut o = q.clone();
                for n in 0..o.data.len() {
                    let qn = q.data[n];
                    if semi {
                        let rate = if qn > 0.0 { sink.data[n] / qn } else { 0.0 };
                        let explicit = tend.data[n] + total.data[n] + sink.data[n];
                        o.data[n] = (qn + dt * explicit) / (1.0 + dt * rate);
                    } else {
                        o.data[n] = qn + dt * (tend.data[n] + total.data[n]);
                    }
                }
                o
            })
            .collect();
        for (s, q) in Species::ALL.into_iter().zip(results) {
            *out.q_mut(s) = q;
        }

        let b = &self.cfg.boundary;
        let (tt, tb, _) = temperature_rules(b);
        implicit_vertical(&mut out.t, &self.spec_t, dt, tt, tb, grid);
        for s in Species::ALL {
            let (qt, qb, _) = moisture_rules(b, s);
            implicit_vertical(out.q_mut(s), &self.spec_q, dt, qt, qb, grid);
        }
        if phys.eps1 > 0.0 {
            for c in [&mut out.vel.v1, &mut out.vel.v2] {
                implicit_vertical(c, &self.spec_v, dt, GhostRule::Neumann, GhostRule::Neumann, grid);
            }
        }
        self.finish(&mut out, Some(dt))?;
        Ok(out)
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self, y: &ModelState, dt: f64) -> Result<ModelState> {
        let mut next = match self.cfg.run.scheme {
            TimeScheme::EulerImex => self.stage(y, dt)?,
            TimeScheme::Rk2Imex => {
                let y1 = self.stage(y, dt)?;
                let mut y2 = self.stage(&y1, dt)?;
                average_into(&mut y2, y);
                for (a, b) in y2.phi_s.data.iter_mut().zip(&y1.phi_s.data) {
                    *a = 0.5 * (*a + b);
                }
                self.last_continuity = diagnose_w(&mut y2.vel, &self.grid)?;
                apply_boundaries(&mut y2, &self.grid, &self.cfg.boundary);
                y2.phi = hydrostatic_phi(&y2.t, &y2.phi_s, &self.grid, self.cfg.phys.r_dry);
                y2
            }
        };
        next.time = y.time + dt;
        next.step = y.step + 1;
        if let Some(field) = next.first_non_finite() {
            return Err(Error::NonFinite {
                field: field.to_string(),
                step: next.step,
            });
        }
        Ok(next)
    }
}

/// `y2 = (y2 + y0) / 2` for every prognostic field and w.
fn average_into(y2: &mut ModelState, y0: &ModelState) {
    let pairs: [(&mut ScalarField3, &ScalarField3); 6] = [
        (&mut y2.vel.v1, &y0.vel.v1),
        (&mut y2.vel.v2, &y0.vel.v2),
        (&mut y2.t, &y0.t),
        (&mut y2.qv, &y0.qv),
        (&mut y2.qc, &y0.qc),
        (&mut y2.qr, &y0.qr),
    ];
    for (a, b) in pairs {
        a.combine(0.5, 0.5, b);
    }
    for (a, b) in y2.vel.w.data.iter_mut().zip(&y0.vel.w.data) {
        *a = 0.5 * (*a + b);
    }
}

fn scalar_tendency(f: &ScalarField3, y: &ModelState, scheme: AdvectionScheme, mu: f64, grid: &Grid) -> ScalarField3 {
    let mut a = advect(f, &y.vel, scheme, grid);
    if mu != 0.0 {
        a.axpy(mu, &laplace_h(f, grid));
    }
    a
}

fn momentum_tendency(c: &ScalarField3, y: &ModelState, scheme: AdvectionScheme, mu: f64, grid: &Grid) -> ScalarField3 {
    scalar_tendency(c, y, scheme, mu, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitialKind, ParamMode};

    fn small(kind: InitialKind) -> Config {
        let mut c = Config::defaults(ParamMode::Nondimensional);
        c.run.nx = 12;
        c.run.ny = 12;
        c.run.np = 6;
        c.run.initial.kind = kind;
        c
    }

    #[test]
    fn robin_fixed_point_and_mirror() {
        let cfg = small(InitialKind::Rest);
        let mut m = Model::new(cfg).unwrap();
        let mut s = m.initial_state().unwrap();
        let g = m.grid.clone();
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                let a = s.t.get(i, j, g.np as isize - 1);
                assert!((s.t.get(i, j, g.np as isize) - a).abs() < 1e-12);
            }
        }
        s.vel.v1 = ScalarField3::from_fn(&g, |x, y, _| x + 2.0 * y);
        m.apply_boundaries(&mut s);
        for k in 0..g.np as isize {
            for j in 0..g.ny as isize {
                assert_eq!(s.vel.v1.get(-1, j, k), -s.vel.v1.get(0, j, k));
            }
        }
        // lateral Robin with zero target: (g - a)/h = -(g + a)/2
        let h = g.dx;
        for k in 0..g.np as isize {
            let (a, gh) = (s.qv.get(0, 3, k), s.qv.get(-1, 3, k));
            assert!(((gh - a) / h + 0.5 * (gh + a)).abs() < 1e-12);
        }
    }

    #[test]
    fn stable_dt_cases() {
        let mut phys = PhysParams::defaults(ParamMode::Nondimensional);
        phys.v_t = 0.0;
        let g = Grid::new(10, 10, 4, 1.0, 1.0, 1.0e4, 1.0e5).unwrap();
        let s = ModelState::zeros(&g);
        let r = stable_dt(&s, &g, &phys, 1.0, 0.5);
        assert!((r.dt - 1.25e-3).abs() < 1e-15);

        phys.mu_v = 0.0;
        phys.mu_t = 0.0;
        phys.mu_q = 0.0;
        let g = Grid::new(4, 4, 4, 4.0, 4.0, 1.0e4, 1.0e5).unwrap();
        let mut s = ModelState::zeros(&g);
        s.vel.v1.fill(10.0);
        let r = stable_dt(&s, &g, &phys, 1.0, 0.5);
        assert!((r.dt - 0.05).abs() < 1e-15);
    }

    #[test]
    fn stable_dt_mixed_is_min() {
        let phys = PhysParams::defaults(ParamMode::Nondimensional);
        let g = Grid::new(8, 8, 4, 1.0, 1.0, 1.0e4, 1.0e5).unwrap();
        let mut s = ModelState::zeros(&g);
        s.vel.v2.fill(3.0);
        let r = stable_dt(&s, &g, &phys, 2.0, 0.4);
        let adv = g.dy / 3.0;
        let dif = g.dx * g.dx / 4.0;
        let sed = g.dp / (phys.v_t * 2.0);
        assert!((r.dt - 0.4 * adv.min(dif).min(sed)).abs() < 1e-15);
    }

    #[test]
    fn rest_state_is_steady() {
        let mut cfg = small(InitialKind::Rest);
        let qv = cfg.run.initial.qv_background * cfg.phys.q_vs;
        cfg.boundary.q_surface[0] = qv;
        cfg.boundary.q_lateral[0] = qv;
        let mut m = Model::new(cfg).unwrap();
        let s0 = m.initial_state().unwrap();
        let dt = m.choose_dt(&s0).dt;
        let mut s = s0.clone();
        for _ in 0..5 {
            let n = m.step(&s, dt).unwrap();
            for (a, b) in [(&s.t, &n.t), (&s.qv, &n.qv), (&s.vel.v1, &n.vel.v1)] {
                let d = a.interior().zip(b.interior()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                assert!(d <= 1e-12, "{d}");
            }
            s = n;
        }
    }

    #[test]
    fn rain_decays_without_flow() {
        let mut cfg = small(InitialKind::Rest);
        cfg.run.initial.qr0 = 0.01;
        cfg.run.initial.qv_background = 0.0;
        let mut m = Model::new(cfg).unwrap();
        let mut s = m.initial_state().unwrap();
        let dt = m.choose_dt(&s).dt;
        let mut prev = crate::operators::norms(&s.qr, &m.grid).l2;
        for _ in 0..10 {
            s = m.step(&s, dt).unwrap();
            let n = crate::operators::norms(&s.qr, &m.grid).l2;
            assert!(n < prev);
            prev = n;
        }
    }
}
