//! Diagnosed fields: hydrostatic geopotential, vertical velocity from
//! continuity, and the barotropic projection onto vertically-integrated
//! divergence-free velocities.
//!
//! The projection uses the centered divergence `D` (mirror ghosts on the walls)
//! and the centered gradient `G` (Neumann ghosts on ψ). With uniform cells
//! `G = -Dᵀ`, so `D G` is symmetric negative semidefinite with the constants as
//! its null space, and the removed component `Gψ` is orthogonal to every field
//! with `D v = 0`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::fill_velocity;
use crate::error::{Error, Result};
use crate::grid::{Field2, Grid, HorizontalVelocity, ScalarField3};
use crate::operators::divergence_h;

/// `Φ = Φ_s + ∫_p^{p1} R T d(ln p)`, trapezoid in ln p. The bottom-face
/// temperature is extrapolated linearly in ln p from the two lowest levels.
/// Lateral and vertical ghosts get a Neumann fill.
pub fn hydrostatic_phi(t: &ScalarField3, phi_s: &Field2, grid: &Grid, r_dry: f64) -> ScalarField3 {
    let (nx, ny, np) = (grid.nx as isize, grid.ny as isize, grid.np as isize);
    let ln: Vec<f64> = grid.p_levels.iter().map(|p| p.ln()).collect();
    let ln1 = grid.p1.ln();
    let (la, lb) = (ln[np as usize - 2], ln[np as usize - 1]);
    let mut phi = ScalarField3::zeros(grid);
    for j in 0..ny {
        for i in 0..nx {
            let tb = t.get(i, j, np - 1);
            let ta = t.get(i, j, np - 2);
            let t1 = tb + (tb - ta) * (ln1 - lb) / (lb - la);
            let mut acc = phi_s.get(i, j) + r_dry * 0.5 * (t1 + tb) * (ln1 - lb);
            phi.set(i, j, np - 1, acc);
            for k in (0..np - 1).rev() {
                let dl = ln[k as usize + 1] - ln[k as usize];
                acc += r_dry * 0.5 * (t.get(i, j, k) + t.get(i, j, k + 1)) * dl;
                phi.set(i, j, k, acc);
            }
        }
    }
    crate::boundary::fill_all(&mut phi, grid, crate::boundary::GhostRule::Neumann);
    phi
}

/// Characteristic horizontal speed: max |v| over the interior.
pub fn velocity_scale(vel: &HorizontalVelocity) -> f64 {
    vel.max_speed()
}

/// Scale for w: `V (p1 - p0) / min(Lx, Ly)`.
pub fn w_scale(vel: &HorizontalVelocity, grid: &Grid) -> f64 {
    velocity_scale(vel) * (grid.p1 - grid.p0) / grid.lx.min(grid.ly)
}

/// Scale for divergences: `V / min(Lx, Ly)`.
pub fn divergence_scale(vel: &HorizontalVelocity, grid: &Grid) -> f64 {
    velocity_scale(vel) / grid.lx.min(grid.ly)
}

pub const COMPAT_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ContinuityReport {
    /// max |w(p0)| before it is pinned to zero.
    pub w_top_max: f64,
    /// max |∇·v + ∂_p w| after pinning.
    pub residual_max: f64,
    pub w_scale: f64,
    pub divergence_scale: f64,
}

/// Integrates continuity upward from `w(p1) = 0`. Velocity ghosts must be
/// filled. Fails with a compatibility error when the column integral of the
/// divergence does not vanish at `p0`.
pub fn diagnose_w(vel: &mut HorizontalVelocity, grid: &Grid) -> Result<ContinuityReport> {
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
    let div = divergence_h(&vel.v1, &vel.v2, grid);
    let ws = w_scale(vel, grid);
    let mut w_top: f64 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            vel.w.set(i, j, np, 0.0);
            for k in (0..np).rev() {
                acc += div.at(i, j, k) * grid.dp;
                vel.w.set(i, j, k, acc);
            }
            w_top = w_top.max(acc.abs());
        }
    }
    let tol = COMPAT_REL_TOL * ws;
    if w_top > tol {
        return Err(Error::Compatibility { w_top, tol });
    }
    for j in 0..ny {
        for i in 0..nx {
            vel.w.set(i, j, 0, 0.0);
        }
    }
    Ok(ContinuityReport {
        w_top_max: w_top,
        residual_max: continuity_residual(vel, grid),
        w_scale: ws,
        divergence_scale: divergence_scale(vel, grid),
    })
}

/// max |∇·v + ∂_p w| over interior cells.
pub fn continuity_residual(vel: &HorizontalVelocity, grid: &Grid) -> f64 {
    let div = divergence_h(&vel.v1, &vel.v2, grid);
    let mut m: f64 = 0.0;
    for k in 0..grid.np {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let dw = (vel.w.get(i, j, k + 1) - vel.w.get(i, j, k)) / grid.dp;
                m = m.max((div.at(i, j, k) + dw).abs());
            }
        }
    }
    m
}

/// Largest `|∇·v|` on the level nearest `p0`. Zero `∂_p w` at the top would
/// require it to vanish; the scheme does not enforce that, so it is monitored.
pub fn top_divergence(vel: &HorizontalVelocity, grid: &Grid) -> f64 {
    let div = divergence_h(&vel.v1, &vel.v2, grid);
    let mut m: f64 = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            m = m.max(div.at(i, j, 0).abs());
        }
    }
    m
}

/// Largest `|∂_n v|` across the lateral walls, from the ghost/interior pair.
/// The walls carry Dirichlet `v = 0` only; this is what is left of the
/// Neumann condition.
pub fn lateral_normal_derivative(vel: &HorizontalVelocity, grid: &Grid) -> f64 {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let mut m: f64 = 0.0;
    for f in [&vel.v1, &vel.v2] {
        for k in 0..grid.np as isize {
            for j in 0..ny {
                m = m.max((f.get(0, j, k) - f.get(-1, j, k)).abs() / grid.dx);
                m = m.max((f.get(nx, j, k) - f.get(nx - 1, j, k)).abs() / grid.dx);
            }
            for i in 0..nx {
                m = m.max((f.get(i, 0, k) - f.get(i, -1, k)).abs() / grid.dy);
                m = m.max((f.get(i, ny, k) - f.get(i, ny - 1, k)).abs() / grid.dy);
            }
        }
    }
    m
}

/// Solver state for the 2D barotropic elliptic problem.
///
/// `-D G` separates into 1D operators along x and y, each symmetric with the
/// constants as its only null vector. Their eigenbases give a direct solve;
/// a few refinement passes bring the residual to `tol`.
#[derive(Debug, Clone)]
pub struct ProjectionWorkspace {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Vertically averaged divergence (right-hand side).
    pub rhs: Vec<f64>,
    /// Correction potential from the last solve, mean zero.
    pub psi: Vec<f64>,
    qx: DMatrix<f64>,
    qy: DMatrix<f64>,
    /// `1 / (λx_i + λy_j)`, row-major in j; zero on the null mode.
    inv_eig: DMatrix<f64>,
    r: Vec<f64>,
    ad: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ProjectionReport {
    /// Direct-solve passes, refinement included.
    pub iterations: usize,
    pub relative_residual: f64,
    /// max |∇ψ| removed from every level.
    pub correction_max: f64,
    /// max |∇·v̄| after the correction.
    pub mean_divergence_max: f64,
}

/// Dense `-D G` in 1D: `G` centered with Neumann ends, `D` centered with
/// mirrored ghosts.
fn neg_dg_1d(n: usize, h: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let r = 0.5 / h;
    for c in 0..n {
        let at = |m: isize| if m.clamp(0, n as isize - 1) == c as isize { 1.0 } else { 0.0 };
        let g: Vec<f64> = (0..n as isize).map(|m| (at(m + 1) - at(m - 1)) * r).collect();
        let gv = |m: isize| {
            if m < 0 {
                -g[0]
            } else if m >= n as isize {
                -g[n - 1]
            } else {
                g[m as usize]
            }
        };
        for i in 0..n as isize {
            a[(i as usize, c)] = -(gv(i + 1) - gv(i - 1)) * r;
        }
    }
    a
}

/// Eigenpairs of the positive semidefinite `-D G`, taken from its SVD
/// (right singular vectors), which stays accurate on the repeated eigenvalues.
fn eigen_1d(n: usize, h: f64) -> (DMatrix<f64>, DVector<f64>) {
    let svd = neg_dg_1d(n, h).svd(false, true);
    let q = svd.v_t.expect("requested").transpose();
    (q, svd.singular_values)
}

impl ProjectionWorkspace {
    pub fn new(grid: &Grid, tol: f64, max_iter: usize) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let n = nx * ny;
        let (qx, lx) = eigen_1d(nx, grid.dx);
        let (qy, ly) = eigen_1d(ny, grid.dy);
        let top = lx.amax() + ly.amax();
        let inv_eig = DMatrix::from_fn(ny, nx, |j, i| {
            let l = lx[i] + ly[j];
            if l.abs() <= 1e-12 * top {
                0.0
            } else {
                1.0 / l
            }
        });
        ProjectionWorkspace {
            nx,
            ny,
            dx: grid.dx,
            dy: grid.dy,
            tol,
            max_iter,
            rhs: vec![0.0; n],
            psi: vec![0.0; n],
            qx,
            qy,
            inv_eig,
            r: vec![0.0; n],
            ad: vec![0.0; n],
            gx: vec![0.0; n],
            gy: vec![0.0; n],
        }
    }

    /// `G ψ` with Neumann ghosts.
    fn gradient(&mut self, psi: &[f64]) {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let at = |i: isize, j: isize| psi[(j.clamp(0, ny - 1) * nx + i.clamp(0, nx - 1)) as usize];
        let (rx, ry) = (0.5 / self.dx, 0.5 / self.dy);
        let nxu = self.nx;
        self.gx
            .par_chunks_mut(nxu)
            .zip(self.gy.par_chunks_mut(nxu))
            .enumerate()
            .for_each(|(j, (rowx, rowy))| {
                let j = j as isize;
                for i in 0..nx {
                    rowx[i as usize] = (at(i + 1, j) - at(i - 1, j)) * rx;
                    rowy[i as usize] = (at(i, j + 1) - at(i, j - 1)) * ry;
                }
            });
    }

    /// `ad = -D(G ψ)` with mirror ghosts for the gradient field.
    fn apply(&mut self) {
        let psi = std::mem::take(&mut self.psi);
        self.gradient(&psi);
        self.psi = psi;
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let (gx, gy) = (&self.gx, &self.gy);
        let mx = |i: isize, j: isize| -> f64 {
            if i < 0 {
                -gx[(j * nx) as usize]
            } else if i >= nx {
                -gx[(j * nx + nx - 1) as usize]
            } else {
                gx[(j * nx + i) as usize]
            }
        };
        let my = |i: isize, j: isize| -> f64 {
            if j < 0 {
                -gy[i as usize]
            } else if j >= ny {
                -gy[((ny - 1) * nx + i) as usize]
            } else {
                gy[(j * nx + i) as usize]
            }
        };
        let (rx, ry) = (0.5 / self.dx, 0.5 / self.dy);
        self.ad.par_chunks_mut(self.nx).enumerate().for_each(|(j, row)| {
            let j = j as isize;
            for i in 0..nx {
                row[i as usize] = -((mx(i + 1, j) - mx(i - 1, j)) * rx + (my(i, j + 1) - my(i, j - 1)) * ry);
            }
        });
    }

    /// Adds the eigenbasis solution of `-D G δ = r` to ψ.
    fn direct_pass(&mut self) {
        let r = DMatrix::from_row_slice(self.ny, self.nx, &self.r);
        let mut h = self.qy.tr_mul(&r) * &self.qx;
        h.component_mul_assign(&self.inv_eig);
        let d = &self.qy * h * self.qx.transpose();
        for j in 0..self.ny {
            for i in 0..self.nx {
                self.psi[j * self.nx + i] += d[(j, i)];
            }
        }
    }

    /// Solves `-D G ψ = -rhs` (rhs mean removed). `reference` is the residual
    /// norm below which the rhs counts as zero.
    fn solve(&mut self, reference: f64) -> Result<(usize, f64)> {
        let n = self.rhs.len();
        let mean = self.rhs.iter().sum::<f64>() / n as f64;
        let b: Vec<f64> = self.rhs.iter().map(|v| -(v - mean)).collect();
        self.r.copy_from_slice(&b);
        self.psi.iter_mut().for_each(|x| *x = 0.0);
        let norm = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bnorm = norm(&b);
        let target = self.tol * bnorm.max(reference);
        if bnorm <= target {
            return Ok((0, if bnorm > 0.0 { 1.0 } else { 0.0 }));
        }
        let mut last = f64::INFINITY;
        for it in 1..=self.max_iter {
            self.direct_pass();
            self.apply();
            for ((r, b), ad) in self.r.iter_mut().zip(&b).zip(&self.ad) {
                *r = b - ad;
            }
            let rn = norm(&self.r);
            if rn <= target {
                let m = self.psi.iter().sum::<f64>() / n as f64;
                self.psi.iter_mut().for_each(|x| *x -= m);
                return Ok((it, rn / bnorm));
            }
            if rn >= 0.5 * last {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: rn / bnorm,
                });
            }
            last = rn;
        }
        Err(Error::NonConvergence {
            iterations: self.max_iter,
            residual: last / bnorm,
        })
    }
}

/// Vertical means of `v1`, `v2` with ghosts (mirror ghosts average to mirror ghosts).
fn vertical_mean(f: &ScalarField3, grid: &Grid) -> Field2 {
    let mut m = Field2::zeros(grid.nx, grid.ny);
    let inv = 1.0 / grid.np as f64;
    for j in -1..=grid.ny as isize {
        for i in -1..=grid.nx as isize {
            let s: f64 = (0..grid.np as isize).map(|k| f.get(i, j, k)).sum();
            m.set(i, j, s * inv);
        }
    }
    m
}

fn mean_divergence(v1: &Field2, v2: &Field2, grid: &Grid, out: &mut [f64]) {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let (rx, ry) = (0.5 / grid.dx, 0.5 / grid.dy);
    for j in 0..ny {
        for i in 0..nx {
            out[(j * nx + i) as usize] =
                (v1.get(i + 1, j) - v1.get(i - 1, j)) * rx + (v2.get(i, j + 1) - v2.get(i, j - 1)) * ry;
        }
    }
}

/// Removes the divergent part of the vertical-mean velocity, uniformly in p,
/// and refreshes the velocity ghosts.
pub fn barotropic_project(
    vel: &mut HorizontalVelocity,
    grid: &Grid,
    ws: &mut ProjectionWorkspace,
) -> Result<ProjectionReport> {
    fill_velocity(vel, grid);
    let m1 = vertical_mean(&vel.v1, grid);
    let m2 = vertical_mean(&vel.v2, grid);
    mean_divergence(&m1, &m2, grid, &mut ws.rhs);
    let n = (grid.nx * grid.ny) as f64;
    let scale = m1.data.iter().chain(&m2.data).fold(0.0f64, |a, v| a.max(v.abs()));
    let reference = scale / grid.lx.min(grid.ly) * n.sqrt();
    let (iterations, relative_residual) = ws.solve(reference)?;
    let psi = std::mem::take(&mut ws.psi);
    ws.gradient(&psi);
    ws.psi = psi;
    let nx = grid.nx;
    let (gx, gy) = (&ws.gx, &ws.gy);
    for (c, g) in [(&mut vel.v1, gx), (&mut vel.v2, gy)] {
        let slab = c.slab_len();
        c.data.par_chunks_mut(slab).enumerate().for_each(|(kk, s)| {
            if kk == 0 || kk > grid.np {
                return;
            }
            for j in 0..grid.ny {
                for i in 0..nx {
                    s[(j + 1) * (nx + 2) + i + 1] -= g[j * nx + i];
                }
            }
        });
    }
    fill_velocity(vel, grid);
    let correction_max = gx.iter().chain(gy).fold(0.0f64, |a, v| a.max(v.abs()));
    let m1 = vertical_mean(&vel.v1, grid);
    let m2 = vertical_mean(&vel.v2, grid);
    let mut div = vec![0.0; grid.nx * grid.ny];
    mean_divergence(&m1, &m2, grid, &mut div);
    Ok(ProjectionReport {
        iterations,
        relative_residual,
        correction_max,
        mean_divergence_max: div.iter().fold(0.0f64, |a, v| a.max(v.abs())),
    })
}

/// Projection followed by the continuity diagnosis.
pub fn project_and_diagnose(
    vel: &mut HorizontalVelocity,
    grid: &Grid,
    ws: &mut ProjectionWorkspace,
) -> Result<(ProjectionReport, ContinuityReport)> {
    let p = barotropic_project(vel, grid, ws)?;
    let c = diagnose_w(vel, grid)?;
    Ok((p, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::inner;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(16, 12, 6, 1.0, 0.8, 1.0e4, 1.0e5).unwrap()
    }

    #[test]
    fn wall_residual_of_constant_flow() {
        let g = grid();
        let mut vel = HorizontalVelocity::zeros(&g);
        vel.v2.fill(0.3);
        crate::boundary::fill_velocity(&mut vel, &g);
        // Dirichlet ghosts mirror to -0.3, so the jump is 0.6 over one spacing
        let want = (0.6 / g.dx).max(0.6 / g.dy);
        assert!((lateral_normal_derivative(&vel, &g) - want).abs() <= 1e-12 * want);
        vel.v2.fill(0.0);
        assert_eq!(lateral_normal_derivative(&vel, &g), 0.0);
    }

    #[test]
    fn top_divergence_sees_only_the_top_level() {
        let g = grid();
        let mut vel = HorizontalVelocity::zeros(&g);
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                vel.v1.set(i, j, 2, g.x(i));
            }
        }
        crate::boundary::fill_velocity(&mut vel, &g);
        assert_eq!(top_divergence(&vel, &g), 0.0);
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                vel.v1.set(i, j, 0, g.x(i));
            }
        }
        // centered difference of x away from the walls is exactly 1
        let d = divergence_h(&vel.v1, &vel.v2, &g);
        assert!((d.at(5, 5, 0) - 1.0).abs() < 1e-12);
        assert!(top_divergence(&vel, &g) >= 1.0 - 1e-12);
    }

    #[test]
    fn phi_zero_temperature() {
        let g = grid();
        let mut ps = Field2::zeros(g.nx, g.ny);
        ps.set(3, 4, 17.0);
        let phi = hydrostatic_phi(&ScalarField3::zeros(&g), &ps, &g, 287.0);
        for k in 0..g.np {
            assert_eq!(phi.at(3, 4, k), 17.0);
            assert_eq!(phi.at(0, 0, k), 0.0);
        }
    }

    #[test]
    fn phi_constant_temperature() {
        let g = grid();
        let t = ScalarField3::from_fn(&g, |_, _, _| 300.0);
        let phi = hydrostatic_phi(&t, &Field2::zeros(g.nx, g.ny), &g, 287.0);
        for k in 0..g.np {
            let exact = 287.0 * 300.0 * (g.p1 / g.p_levels[k]).ln();
            assert!((phi.at(2, 2, k) - exact).abs() <= 1e-10 * exact);
        }
    }

    #[test]
    fn phi_linear_in_ln_p() {
        let g = grid();
        let (a, b) = (250.0, 30.0);
        let t = ScalarField3::from_fn(&g, |_, _, p| a + b * p.ln());
        let phi = hydrostatic_phi(&t, &Field2::zeros(g.nx, g.ny), &g, 287.0);
        let anti = |l: f64| 287.0 * (a * l + 0.5 * b * l * l);
        for k in 0..g.np {
            let exact = anti(g.p1.ln()) - anti(g.p_levels[k].ln());
            assert!((phi.at(1, 1, k) - exact).abs() <= 1e-12 * exact.abs(), "{k}");
        }
    }

    #[test]
    fn w_zero_for_divergence_free() {
        let g = grid();
        let mut vel = HorizontalVelocity::zeros(&g);
        vel.v1 = ScalarField3::from_fn(&g, |_, y, _| 2.0 * y);
        vel.v2 = ScalarField3::from_fn(&g, |x, _, _| -3.0 * x);
        diagnose_w(&mut vel, &g).unwrap();
        assert!(vel.w.max_abs() < 1e-9);
    }

    #[test]
    fn w_baroclinic_profile() {
        let g = grid();
        let mut vel = HorizontalVelocity::zeros(&g);
        let (p0, p1) = (g.p0, g.p1);
        vel.v1 = ScalarField3::from_fn(&g, |x, _, p| (2.0 * PI * x).sin() * (PI * (p - p0) / (p1 - p0)).cos());
        let rep = diagnose_w(&mut vel, &g).unwrap();
        let mid = vel.w.get(1, 1, g.np / 2).abs();
        assert!(mid > 1.0, "{mid}");
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(vel.w.get(i, j, 0), 0.0);
                assert_eq!(vel.w.get(i, j, g.np), 0.0);
            }
        }
        assert!(rep.residual_max <= 1e-10 * rep.divergence_scale);
    }

    #[test]
    fn unprojected_field_is_incompatible() {
        let g = grid();
        let mut vel = HorizontalVelocity::zeros(&g);
        vel.v1 = ScalarField3::from_fn(&g, |x, _, _| x);
        assert!(matches!(diagnose_w(&mut vel, &g), Err(Error::Compatibility { .. })));
    }

    fn random_vel(g: &Grid, rng: &mut ChaCha8Rng) -> HorizontalVelocity {
        let mut vel = HorizontalVelocity::zeros(g);
        for c in [&mut vel.v1, &mut vel.v2] {
            for v in c.data.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        vel
    }

    #[test]
    fn projection_constraint_idempotence_orthogonality() {
        let g = grid();
        let mut ws = ProjectionWorkspace::new(&g, 1e-12, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut vel = random_vel(&g, &mut rng);
            barotropic_project(&mut vel, &g, &mut ws).unwrap();
            let rep = diagnose_w(&mut vel.clone(), &g).unwrap();
            assert!(rep.w_top_max <= COMPAT_REL_TOL * rep.w_scale);
            let before = vel.clone();
            let second = barotropic_project(&mut vel, &g, &mut ws).unwrap();
            assert!(second.correction_max <= 1e-12 * before.max_speed().max(1.0), "{second:?}");
            let drift = before
                .v1
                .data
                .iter()
                .zip(&vel.v1.data)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(drift <= 1e-12);
        }
        // orthogonality of retained mean flow and removed gradient
        let mut vel = random_vel(&g, &mut rng);
        fill_velocity(&mut vel, &g);
        let mean_before = vertical_mean(&vel.v1, &g);
        let mean_before2 = vertical_mean(&vel.v2, &g);
        barotropic_project(&mut vel, &g, &mut ws).unwrap();
        let a1 = vertical_mean(&vel.v1, &g);
        let a2 = vertical_mean(&vel.v2, &g);
        let mut ip = 0.0;
        let mut n1 = 0.0;
        let mut n2 = 0.0;
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                let r1 = mean_before.get(i, j) - a1.get(i, j);
                let r2 = mean_before2.get(i, j) - a2.get(i, j);
                ip += r1 * a1.get(i, j) + r2 * a2.get(i, j);
                n1 += r1 * r1 + r2 * r2;
                n2 += a1.get(i, j).powi(2) + a2.get(i, j).powi(2);
            }
        }
        assert!(ip.abs() <= 1e-10 * (n1 * n2).sqrt(), "{ip}");
    }

    #[test]
    fn one_dimensional_operator_is_symmetric_with_constant_kernel() {
        for n in [1, 2, 5, 7, 15, 16, 25, 75] {
            let a = neg_dg_1d(n, 0.3);
            assert_eq!(a, a.transpose());
            let ones = DVector::from_element(n, 1.0);
            assert!((&a * ones).amax() <= 1e-14);
            let (q, lam) = eigen_1d(n, 0.3);
            let rebuilt = &q * DMatrix::from_diagonal(&lam) * q.transpose();
            assert!((rebuilt - &a).amax() <= 1e-13);
            let zeros = lam.iter().filter(|l| l.abs() <= 1e-10).count();
            assert_eq!(zeros, 1, "{lam}");
        }
    }

    #[test]
    fn zero_pass_budget_reports_nonconvergence() {
        let g = grid();
        let mut ws = ProjectionWorkspace::new(&g, 1e-12, 0);
        let mut vel = random_vel(&g, &mut ChaCha8Rng::seed_from_u64(9));
        assert!(matches!(
            barotropic_project(&mut vel, &g, &mut ws),
            Err(Error::NonConvergence { iterations: 0, .. })
        ));
    }

    #[test]
    fn gradient_field_is_removed() {
        let g = grid();
        let mut ws = ProjectionWorkspace::new(&g, 1e-12, 8);
        // χ with zero normal derivative on the walls
        let chi = |x: f64, y: f64| (PI * x / g.lx).cos() * (2.0 * PI * y / g.ly).cos();
        let mut c = ScalarField3::from_fn(&g, |x, y, _| chi(x, y));
        crate::boundary::fill_all(&mut c, &g, crate::boundary::GhostRule::Neumann);
        let (gx, gy) = crate::operators::grad_h(&c, &g);
        let mut vel = HorizontalVelocity::zeros(&g);
        vel.v1 = gx;
        vel.v2 = gy;
        let norm0 = inner(&vel.v1, &vel.v1, &g) + inner(&vel.v2, &vel.v2, &g);
        barotropic_project(&mut vel, &g, &mut ws).unwrap();
        let norm1 = inner(&vel.v1, &vel.v1, &g) + inner(&vel.v2, &vel.v2, &g);
        assert!(norm1 <= 1e-20 * norm0, "{norm1} {norm0}");
    }
}
