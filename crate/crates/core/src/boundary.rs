//! Ghost-cell fills realizing the boundary conditions on one face family.
//!
//! Faces sit halfway between the last interior cell `a` and its ghost `g`, a
//! distance `h` apart. Conditions are imposed on the face:
//!
//! * Neumann: `g = a`
//! * Dirichlet zero: `g = -a` (face average vanishes)
//! * Robin with unit coefficient `∂_n q = target - q`:
//!   `(g - a) / h = target - (g + a) / 2`

use crate::grid::{Grid, HorizontalVelocity, ScalarField3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GhostRule {
    Neumann,
    DirichletZero,
    Robin { target: f64 },
}

impl GhostRule {
    #[inline]
    pub fn ghost(self, interior: f64, h: f64) -> f64 {
        match self {
            GhostRule::Neumann => interior,
            GhostRule::DirichletZero => -interior,
            GhostRule::Robin { target } => robin_ghost(interior, target, h),
        }
    }

    /// Affine form `g = alpha * target_term + beta * interior` as `(offset, beta)`.
    #[inline]
    pub fn affine(self, h: f64) -> (f64, f64) {
        match self {
            GhostRule::Neumann => (0.0, 1.0),
            GhostRule::DirichletZero => (0.0, -1.0),
            GhostRule::Robin { target } => {
                let denom = 1.0 / h + 0.5;
                (target / denom, (1.0 / h - 0.5) / denom)
            }
        }
    }
}

#[inline]
pub fn robin_ghost(interior: f64, target: f64, h: f64) -> f64 {
    (target + interior * (1.0 / h - 0.5)) / (1.0 / h + 0.5)
}

/// Fills the top (k = -1) and bottom (k = np) ghost layers for interior columns.
pub fn fill_vertical(f: &mut ScalarField3, grid: &Grid, top: GhostRule, bottom: GhostRule) {
    let (nx, ny, np) = (grid.nx as isize, grid.ny as isize, grid.np as isize);
    for j in 0..ny {
        for i in 0..nx {
            let a = f.get(i, j, 0);
            f.set(i, j, -1, top.ghost(a, grid.dp));
            let b = f.get(i, j, np - 1);
            f.set(i, j, np, bottom.ghost(b, grid.dp));
        }
    }
}

/// Fills the four lateral ghost walls on every level including the vertical
/// ghost layers; applied after [`fill_vertical`] so shared edges carry the
/// lateral condition.
pub fn fill_lateral(f: &mut ScalarField3, grid: &Grid, rule: GhostRule) {
    let (nx, ny, np) = (grid.nx as isize, grid.ny as isize, grid.np as isize);
    for k in -1..=np {
        for j in 0..ny {
            let a = f.get(0, j, k);
            f.set(-1, j, k, rule.ghost(a, grid.dx));
            let b = f.get(nx - 1, j, k);
            f.set(nx, j, k, rule.ghost(b, grid.dx));
        }
        for i in -1..=nx {
            let a = f.get(i, 0, k);
            f.set(i, -1, k, rule.ghost(a, grid.dy));
            let b = f.get(i, ny - 1, k);
            f.set(i, ny, k, rule.ghost(b, grid.dy));
        }
    }
}

/// Same rule on every face.
pub fn fill_all(f: &mut ScalarField3, grid: &Grid, rule: GhostRule) {
    fill_vertical(f, grid, rule, rule);
    fill_lateral(f, grid, rule);
}

/// Horizontal velocity: `∂_p v = 0` on both pressure faces, `v = 0` on the walls.
pub fn fill_velocity(vel: &mut HorizontalVelocity, grid: &Grid) {
    for c in [&mut vel.v1, &mut vel.v2] {
        fill_vertical(c, grid, GhostRule::Neumann, GhostRule::Neumann);
        fill_lateral(c, grid, GhostRule::DirichletZero);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robin_fixed_point() {
        // interior already at the target: zero normal gradient
        let g = robin_ghost(300.0, 300.0, 0.25);
        assert!((g - 300.0).abs() < 1e-12);
    }

    #[test]
    fn robin_face_relation_holds() {
        for &(a, t, h) in &[(1.0, 0.0, 0.1), (0.3, 2.0, 5.0e3), (5.0, 1.0, 1.0)] {
            let g = robin_ghost(a, t, h);
            let lhs = (g - a) / h;
            let rhs = t - 0.5 * (g + a);
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn affine_matches_ghost() {
        let rule = GhostRule::Robin { target: 0.7 };
        let (off, beta) = rule.affine(0.05);
        assert!((off + beta * 0.2 - rule.ghost(0.2, 0.05)).abs() < 1e-14);
    }
}
