//! Initial-condition menu.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::config::{Config, InitialKind};
use crate::grid::{Grid, ModelState, ScalarField3};

/// Normalized Gaussian bump centered per the bubble parameters.
fn bump(cfg: &Config, grid: &Grid) -> impl Fn(f64, f64, f64) -> f64 {
    let ic = cfg.run.initial;
    let (lx, ly) = (grid.lx, grid.ly);
    move |x, y, p| {
        let rx = (x / lx - ic.bubble_x) / ic.bubble_radius;
        let ry = (y / ly - ic.bubble_y) / ic.bubble_radius;
        let rp = (p - ic.bubble_p) / ic.bubble_p_width;
        (-(rx * rx + ry * ry + rp * rp)).exp()
    }
}

/// Prognostic fields before projection; ghosts are not meaningful.
pub fn initial_fields(cfg: &Config, grid: &Grid) -> ModelState {
    let ic = cfg.run.initial;
    let q_vs = cfg.phys.q_vs;
    let mut s = ModelState::zeros(grid);
    let g = bump(cfg, grid);
    let uniform = |v: f64| ScalarField3::from_fn(grid, |_, _, _| v);
    match ic.kind {
        InitialKind::Rest => {
            s.t = uniform(ic.t0);
            s.qv = uniform(ic.qv_background * q_vs);
        }
        InitialKind::WarmBubble => {
            s.t = ScalarField3::from_fn(grid, |x, y, p| ic.t0 + ic.bubble_amplitude * g(x, y, p));
            s.qv = uniform(ic.qv_background * q_vs);
        }
        InitialKind::SaturatedBlob => {
            s.t = ScalarField3::from_fn(grid, |x, y, p| ic.t0 + ic.bubble_amplitude * g(x, y, p));
            s.qv = ScalarField3::from_fn(grid, |x, y, p| {
                q_vs * (ic.qv_background + (ic.qv_peak - ic.qv_background) * g(x, y, p))
            });
        }
        InitialKind::BarotropicDecay => {
            let mut rng = ChaCha8Rng::seed_from_u64(ic.seed);
            for c in [&mut s.vel.v1, &mut s.vel.v2] {
                *c = random_wall_field(grid, &mut rng, ic.velocity_amplitude);
            }
            return s;
        }
    }
    s.qc = uniform(ic.qc0);
    s.qr = uniform(ic.qr0);
    s
}

/// Smooth random field vanishing on the lateral walls, with vertical structure.
pub fn random_wall_field(grid: &Grid, rng: &mut ChaCha8Rng, amplitude: f64) -> ScalarField3 {
    const M: usize = 3;
    let mut c = [[[0.0; 2]; M]; M];
    for a in c.iter_mut().flatten().flatten() {
        *a = rng.gen_range(-1.0..1.0);
    }
    let (lx, ly, p0, p1) = (grid.lx, grid.ly, grid.p0, grid.p1);
    ScalarField3::from_fn(grid, |x, y, p| {
        let s = (p - p0) / (p1 - p0);
        let mut v = 0.0;
        for (m, cm) in c.iter().enumerate() {
            let bx = ((m + 1) as f64 * PI * x / lx).sin();
            for (n, cn) in cm.iter().enumerate() {
                let by = ((n + 1) as f64 * PI * y / ly).sin();
                v += bx * by * (cn[0] + cn[1] * (PI * s).cos());
            }
        }
        amplitude * v / (M * M) as f64
    })
}
