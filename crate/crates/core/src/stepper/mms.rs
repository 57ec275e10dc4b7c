//! Manufactured-solution convergence study for forced advection-diffusion of
//! cloud water.
//!
//! Exact field `q = 1 + ½ e^{-t} sin(2πx + 0.3) cos(πy - 0.2)` on the unit
//! square, advected by the solenoidal `v = (sin πx cos πy, -cos πx sin πy)`
//! with `w = 0`, diffused by `μΔ`. Ghosts carry the exact solution; the forcing
//! is the analytic residual. Heun in time with `dt ∝ dx²` so the temporal error
//! is negligible against the spatial one.

use serde::Serialize;
use std::f64::consts::PI;

use crate::config::AdvectionScheme;
use crate::error::Result;
use crate::grid::{Grid, HorizontalVelocity, ScalarField3};
use crate::operators::{advect, inner, laplace_h};

const MU: f64 = 0.05;

fn exact(x: f64, y: f64, t: f64) -> f64 {
    1.0 + 0.5 * (-t).exp() * (2.0 * PI * x + 0.3).sin() * (PI * y - 0.2).cos()
}

fn forcing(x: f64, y: f64, t: f64) -> f64 {
    let a = 0.5 * (-t).exp();
    let (s, c) = ((2.0 * PI * x + 0.3).sin(), (PI * y - 0.2).cos());
    let qt = -a * s * c;
    let qx = a * 2.0 * PI * (2.0 * PI * x + 0.3).cos() * c;
    let qy = -a * s * PI * (PI * y - 0.2).sin();
    let lap = -a * s * c * 5.0 * PI * PI;
    let (u, v) = velocity(x, y);
    qt + u * qx + v * qy - MU * lap
}

fn velocity(x: f64, y: f64) -> (f64, f64) {
    ((PI * x).sin() * (PI * y).cos(), -(PI * x).cos() * (PI * y).sin())
}

fn with_exact_ghosts(q: &mut ScalarField3, grid: &Grid, t: f64) {
    let (nx, ny, np) = (grid.nx as isize, grid.ny as isize, grid.np as isize);
    for k in -1..=np {
        for j in -1..=ny {
            for i in -1..=nx {
                if i < 0 || j < 0 || k < 0 || i == nx || j == ny || k == np {
                    q.set(i, j, k, exact(grid.x(i), grid.y(j), t));
                }
            }
        }
    }
}

fn rhs(q: &ScalarField3, vel: &HorizontalVelocity, scheme: AdvectionScheme, grid: &Grid, t: f64) -> ScalarField3 {
    let mut r = advect(q, vel, scheme, grid);
    r.axpy(MU, &laplace_h(q, grid));
    let f = ScalarField3::from_fn(grid, |x, y, _| forcing(x, y, t));
    r.axpy(1.0, &f);
    r
}

/// RMS error at `t_end` on an `n × n × 4` grid.
pub fn mms_error(n: usize, scheme: AdvectionScheme, t_end: f64) -> Result<f64> {
    let grid = Grid::new(n, n, 4, 1.0, 1.0, 1.0e4, 1.0e5)?;
    let mut vel = HorizontalVelocity::zeros(&grid);
    vel.v1 = ScalarField3::from_fn(&grid, |x, y, _| velocity(x, y).0);
    vel.v2 = ScalarField3::from_fn(&grid, |x, y, _| velocity(x, y).1);
    let dt_max = 0.25 * grid.dx * grid.dx / MU * 0.5;
    let steps = (t_end / dt_max).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut q = ScalarField3::from_fn(&grid, |x, y, _| exact(x, y, 0.0));
    for s in 0..steps {
        let t = s as f64 * dt;
        with_exact_ghosts(&mut q, &grid, t);
        let mut q1 = q.clone();
        q1.axpy(dt, &rhs(&q, &vel, scheme, &grid, t));
        with_exact_ghosts(&mut q1, &grid, t + dt);
        let mut q2 = q1.clone();
        q2.axpy(dt, &rhs(&q1, &vel, scheme, &grid, t + dt));
        q.combine(0.5, 0.5, &q2);
    }
    let e = ScalarField3::from_fn(&grid, |x, y, _| exact(x, y, t_end));
    let mut diff = q;
    diff.axpy(-1.0, &e);
    Ok((inner(&diff, &diff, &grid) / grid.volume()).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct MmsReport {
    pub scheme: AdvectionScheme,
    pub grids: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log2(e_n / e_2n)` for consecutive grids.
    pub slopes: Vec<f64>,
    /// Least-squares slope of `-log e` against `log n`.
    pub fit_slope: f64,
}

pub fn mms_study(grids: &[usize], scheme: AdvectionScheme, t_end: f64) -> Result<MmsReport> {
    let errors = grids
        .iter()
        .map(|&n| mms_error(n, scheme, t_end))
        .collect::<Result<Vec<_>>>()?;
    let slopes = errors
        .windows(2)
        .zip(grids.windows(2))
        .map(|(e, g)| (e[0] / e[1]).ln() / (g[1] as f64 / g[0] as f64).ln())
        .collect();
    let xs: Vec<f64> = grids.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(MmsReport {
        scheme,
        grids: grids.to_vec(),
        errors,
        slopes,
        fit_slope: sxy / sxx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forcing_matches_finite_difference_residual() {
        let (x, y, t, h) = (0.3, 0.7, 0.1, 1e-5);
        let qt = (exact(x, y, t + h) - exact(x, y, t - h)) / (2.0 * h);
        let qx = (exact(x + h, y, t) - exact(x - h, y, t)) / (2.0 * h);
        let qy = (exact(x, y + h, t) - exact(x, y - h, t)) / (2.0 * h);
        let lap = (exact(x + h, y, t) + exact(x - h, y, t) + exact(x, y + h, t) + exact(x, y - h, t)
            - 4.0 * exact(x, y, t))
            / (h * h);
        let (u, v) = velocity(x, y);
        let r = qt + u * qx + v * qy - MU * lap;
        assert!((r - forcing(x, y, t)).abs() < 1e-4);
    }

    #[test]
    fn coarse_errors_shrink() {
        let a = mms_error(8, AdvectionScheme::Centered, 0.02).unwrap();
        let b = mms_error(16, AdvectionScheme::Centered, 0.02).unwrap();
        assert!(b < a);
    }
}
