//! Empirical ratio checks for the two trilinear inequalities.
//!
//! Both are evaluated with unit constant; the maximum ratio over a seeded
//! family of band-limited fields is regression-tracked, never compared with a
//! theoretical constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use super::{ddp_inner, grad_inner_h, inner};
use crate::boundary::{fill_all, fill_lateral, fill_vertical, GhostRule};
use crate::grid::{Grid, ScalarField3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrilinearKind {
    /// `∫|f||g||h| ≤ C |∇f|^½|f|^½ |∇g|^½|g|^½ (|h|^½|∂_p h|^½ + |h|)`.
    Hhp,
    /// `∫_{M'} ∫f dp ∫gh dp ≤ C min{…}` with column integrals.
    Clt,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrilinearReport {
    pub kind: TrilinearKind,
    pub samples: usize,
    pub n: usize,
    pub seed: u64,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Ratio LHS / RHS for one triple. Ghosts of `f`, `g`, `h` must be filled.
/// Returns 0 when the right-hand side vanishes.
pub fn trilinear_ratio(kind: TrilinearKind, f: &ScalarField3, g: &ScalarField3, h: &ScalarField3, grid: &Grid) -> f64 {
    let l2 = |a: &ScalarField3| inner(a, a, grid).sqrt();
    let (lhs, rhs) = match kind {
        TrilinearKind::Hhp => {
            let lhs: f64 = f
                .interior()
                .zip(g.interior())
                .zip(h.interior())
                .map(|((a, b), c)| (a * b * c).abs())
                .sum::<f64>()
                * grid.cell_volume();
            let gf = grad_inner_h(f, f, grid).sqrt();
            let gg = grad_inner_h(g, g, grid).sqrt();
            let (lh, ph) = (l2(h), ddp_inner(h, h, grid).sqrt());
            let rhs = (gf * l2(f) * gg * l2(g)).sqrt() * ((lh * ph).sqrt() + lh);
            (lhs, rhs)
        }
        TrilinearKind::Clt => {
            let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
            let mut lhs = 0.0;
            for j in 0..ny {
                for i in 0..nx {
                    let (mut sf, mut sgh) = (0.0, 0.0);
                    for k in 0..np {
                        sf += f.at(i, j, k);
                        sgh += g.at(i, j, k) * h.at(i, j, k);
                    }
                    lhs += sf * sgh * grid.dp * grid.dp;
                }
            }
            lhs = (lhs * grid.dx * grid.dy).abs();
            let h1 = |a: &ScalarField3| (grad_inner_h(a, a, grid) + ddp_inner(a, a, grid)).sqrt();
            let half = |a: &ScalarField3| {
                let n = l2(a);
                n.sqrt() * (n.sqrt() + h1(a).sqrt())
            };
            let first = half(f) * l2(g) * half(h);
            let second = l2(f) * half(g) * half(h);
            (lhs, first.min(second))
        }
    };
    if rhs > 0.0 {
        lhs / rhs
    } else {
        0.0
    }
}

/// Random band-limited field; with `wall_zero` it vanishes on the lateral walls.
fn band_limited(grid: &Grid, rng: &mut ChaCha8Rng, wall_zero: bool) -> ScalarField3 {
    const M: usize = 4;
    let mut c = [[[0.0; 3]; M]; M];
    for a in c.iter_mut().flatten().flatten() {
        *a = rng.gen_range(-1.0..1.0);
    }
    let (lx, ly, p0, p1) = (grid.lx, grid.ly, grid.p0, grid.p1);
    ScalarField3::from_fn(grid, |x, y, p| {
        let s = (p - p0) / (p1 - p0);
        let mut v = 0.0;
        for (m, cm) in c.iter().enumerate() {
            let bx = if wall_zero {
                ((m + 1) as f64 * PI * x / lx).sin()
            } else {
                (m as f64 * PI * x / lx).cos()
            };
            for (n, cn) in cm.iter().enumerate() {
                let by = if wall_zero {
                    ((n + 1) as f64 * PI * y / ly).sin()
                } else {
                    (n as f64 * PI * y / ly).cos()
                };
                for (l, a) in cn.iter().enumerate() {
                    v += a * bx * by * (l as f64 * PI * s).cos();
                }
            }
        }
        v
    })
}

/// Samples `samples` random triples on an `n³` unit grid from `seed`.
pub fn trilinear_ratio_check(kind: TrilinearKind, samples: usize, n: usize, seed: u64) -> TrilinearReport {
    let grid = Grid::new(n, n, n, 1.0, 1.0, 1.0, 2.0).expect("unit grid is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut f = band_limited(&grid, &mut rng, true);
        let mut g = band_limited(&grid, &mut rng, true);
        let mut h = band_limited(&grid, &mut rng, false);
        fill_all(&mut f, &grid, GhostRule::DirichletZero);
        fill_all(&mut g, &grid, GhostRule::DirichletZero);
        fill_vertical(&mut h, &grid, GhostRule::Neumann, GhostRule::Neumann);
        fill_lateral(&mut h, &grid, GhostRule::Neumann);
        ratios.push(trilinear_ratio(kind, &f, &g, &h, &grid));
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    TrilinearReport {
        kind,
        samples,
        n,
        seed,
        max_ratio,
        ratios,
    }
}
