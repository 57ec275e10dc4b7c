//! Structural checks shared by the command line and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use super::{BoundLimits, Violation};
use crate::boundary::{fill_all, fill_lateral, fill_vertical, GhostRule};
use crate::config::{AdvectionScheme, Config, InitialKind, ParamMode, PhysParams, ReferenceProfiles};
use crate::diagnostic::{barotropic_project, continuity_residual, diagnose_w, ProjectionWorkspace};
use crate::error::Result;
use crate::grid::{Grid, HorizontalVelocity, ScalarField3};
use crate::operators::trilinear::{trilinear_ratio_check, TrilinearKind};
use crate::operators::{advect, grad_inner_h, inner, laplace_h, vertical_diffusion, DiffusionSpec};
use crate::stepper::run::record;
use crate::stepper::Model;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Measured quantity (relative error, ratio, ...).
    pub value: f64,
    /// Pass threshold; `+∞` for report-only entries.
    pub tol: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, value: f64, tol: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            tol,
            pass: value <= tol,
        }
    }
}

/// Smooth random field with a few low modes in each direction.
pub fn random_smooth(g: &Grid, rng: &mut ChaCha8Rng) -> ScalarField3 {
    let mut coef = [[[0.0; 3]; 4]; 4];
    for c in coef.iter_mut().flatten().flatten() {
        *c = rng.gen_range(-1.0..1.0);
    }
    let (p0, p1, lx, ly) = (g.p0, g.p1, g.lx, g.ly);
    ScalarField3::from_fn(g, |x, y, p| {
        let s = (p - p0) / (p1 - p0);
        let mut v = 0.0;
        for (m, a) in coef.iter().enumerate() {
            let bx = ((m + 1) as f64 * PI * x / lx).cos();
            for (n, b) in a.iter().enumerate() {
                let by = ((n + 1) as f64 * PI * y / ly).sin();
                for (l, c) in b.iter().enumerate() {
                    v += c * bx * by * (l as f64 * PI * s).cos();
                }
            }
        }
        v
    })
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Discrete integration-by-parts and skew-symmetry identities on `fields`
/// random fields over an `n³` grid; tolerance `1e-12` relative.
pub fn operator_checks(n: usize, fields: usize, seed: u64) -> Vec<CheckResult> {
    const TOL: f64 = 1e-12;
    let g = Grid::new(n, n, n, 1.0, 1.0, 1.0e4, 1.0e5).expect("valid grid");
    let phys = PhysParams::defaults(ParamMode::Nondimensional);
    let prof = ReferenceProfiles::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lap, mut vd_t, mut vd_theta, mut skew) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let spec_t = DiffusionSpec::scalar(&g, &phys, &prof, 1.0, 1.0);
    let spec_theta = DiffusionSpec::theta(&g, &phys, &prof);
    for _ in 0..fields {
        let mut f = random_smooth(&g, &mut rng);
        let mut h = random_smooth(&g, &mut rng);
        fill_all(&mut f, &g, GhostRule::DirichletZero);
        fill_all(&mut h, &g, GhostRule::DirichletZero);
        lap = lap.max(rel(inner(&laplace_h(&f, &g), &h, &g), -grad_inner_h(&f, &h, &g)));

        fill_vertical(&mut f, &g, GhostRule::Neumann, GhostRule::Neumann);
        fill_vertical(&mut h, &g, GhostRule::Neumann, GhostRule::Neumann);
        for (acc, spec) in [(&mut vd_t, &spec_t), (&mut vd_theta, &spec_theta)] {
            let a = inner(&vertical_diffusion(&f, spec, &g), &h, &g);
            let b = inner(&f, &vertical_diffusion(&h, spec, &g), &g);
            *acc = acc.max(rel(a, b));
        }

        let mut vel = HorizontalVelocity::zeros(&g);
        vel.v1 = random_smooth(&g, &mut rng);
        vel.v2 = random_smooth(&g, &mut rng);
        fill_all(&mut vel.v1, &g, GhostRule::DirichletZero);
        fill_all(&mut vel.v2, &g, GhostRule::DirichletZero);
        for j in 0..g.ny {
            for i in 0..g.nx {
                for kf in 1..g.np {
                    vel.w.set(i, j, kf, rng.gen_range(-1.0e4..1.0e4));
                }
            }
        }
        let t = advect(&f, &vel, AdvectionScheme::Centered, &g);
        let scale = inner(&t, &t, &g).sqrt() * inner(&f, &f, &g).sqrt();
        skew = skew.max(if scale > 0.0 { inner(&t, &f, &g).abs() / scale } else { 0.0 });
    }
    let mut out = vec![
        CheckResult::new("laplacian integration by parts (Dirichlet)", lap, TOL),
        CheckResult::new("vertical diffusion self-adjoint (T weight, Neumann)", vd_t, TOL),
        CheckResult::new("vertical diffusion self-adjoint (theta weight, Neumann)", vd_theta, TOL),
        CheckResult::new("centered advection skew-symmetry", skew, TOL),
    ];
    for (kind, name) in [(TrilinearKind::Hhp, "trilinear ratio hhp"), (TrilinearKind::Clt, "trilinear ratio clt")] {
        let r = trilinear_ratio_check(kind, fields, n.min(16), seed);
        out.push(CheckResult::new(name, r.max_ratio, f64::INFINITY));
    }
    out
}

/// Continuity after projection and w diagnosis on random velocities.
/// Returns the checks and the worst relative values.
pub fn constraint_checks(nx: usize, ny: usize, np: usize, fields: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let g = Grid::new(nx, ny, np, 1.0, 1.0, 1.0e4, 1.0e5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = ProjectionWorkspace::new(&g, 1e-14, 8);
    let (mut res, mut top) = (0.0f64, 0.0f64);
    for _ in 0..fields {
        let mut vel = HorizontalVelocity::zeros(&g);
        vel.v1 = random_smooth(&g, &mut rng);
        vel.v2 = random_smooth(&g, &mut rng);
        fill_lateral(&mut vel.v1, &g, GhostRule::DirichletZero);
        fill_lateral(&mut vel.v2, &g, GhostRule::DirichletZero);
        crate::boundary::fill_velocity(&mut vel, &g);
        barotropic_project(&mut vel, &g, &mut ws)?;
        let rep = diagnose_w(&mut vel, &g)?;
        res = res.max(continuity_residual(&vel, &g) / rep.divergence_scale);
        top = top.max(rep.w_top_max / rep.w_scale);
    }
    Ok(vec![
        CheckResult::new("max |div v + dw/dp| / divergence scale", res, 1e-10),
        CheckResult::new("max |w(p0)| / w scale before pinning", top, 1e-8),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioBounds {
    pub scenario: &'static str,
    pub steps: usize,
    pub limits: BoundLimits,
    /// Largest value of each of qv, qc, qr, T over all cells and steps.
    pub max: [f64; 4],
    /// Smallest value of each of qv, qc, qr, T over all cells and steps.
    pub min: [f64; 4],
    /// Worst violation per field over the run.
    pub violations: Vec<Violation>,
    pub pass: bool,
}

/// The acceptance scenarios with their names.
pub const BOUND_SCENARIOS: [(&str, InitialKind); 3] = [
    ("rest", InitialKind::Rest),
    ("warm_bubble", InitialKind::WarmBubble),
    ("saturated_blob", InitialKind::SaturatedBlob),
];

/// Runs `steps` adaptive steps of `base` with the given initial kind and
/// tracks every cell against the bounds from initial and boundary data.
pub fn bound_scenario(base: &Config, name: &'static str, kind: InitialKind, steps: usize) -> Result<ScenarioBounds> {
    let mut cfg = base.clone();
    cfg.run.initial.kind = kind;
    let mut m = Model::new(cfg)?;
    let mut s = m.initial_state()?;
    let limits = BoundLimits::from_initial(&s, &m.cfg.boundary);
    let mut max = [f64::NEG_INFINITY; 4];
    let mut min = [f64::INFINITY; 4];
    let mut worst: Vec<Violation> = Vec::new();
    for n in 0..=steps {
        if n > 0 {
            let dt = m.choose_dt(&s).dt;
            s = m.step(&s, dt)?;
        }
        let r = record(&m, &s, &limits, 0.0);
        for (a, st) in [r.qv, r.qc, r.qr, r.t].iter().enumerate() {
            max[a] = max[a].max(st.max);
            min[a] = min[a].min(st.min);
        }
        for v in r.violations {
            match worst.iter_mut().find(|w| w.field == v.field) {
                Some(w) if v.excess > w.excess => *w = v,
                Some(_) => {}
                None => worst.push(v),
            }
        }
    }
    Ok(ScenarioBounds {
        scenario: name,
        steps,
        limits,
        max,
        min,
        pass: worst.is_empty(),
        violations: worst,
    })
}
