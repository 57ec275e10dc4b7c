//! Discrete differential operators on the collocated grid.
//!
//! All operators read ghost values as filled by the caller and write interior
//! cells of a fresh field (ghosts zero). Face-based quantities use the face
//! average `U_{i+1/2} = (u_i + u_{i+1}) / 2`, so a Dirichlet-mirror ghost gives
//! zero wall flux and the discrete divergence telescopes.
//!
//! Quadrature is the midpoint rule with cell volume `dx dy dp`. Gradient inner
//! products sum over faces, weighting the boundary faces by 1/2; with that
//! weight `<Δ_h f, g> = -<∇f, ∇g>` holds exactly for Dirichlet-mirror ghosts.

pub mod trilinear;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AdvectionScheme, LnProfile, PhysParams, ReferenceProfiles};
use crate::grid::{FaceField, Grid, HorizontalVelocity, ScalarField3};

/// Runs `body(k, slab)` for every interior level in parallel. The slab slice is
/// the full ghost-extended horizontal plane of `out` at level `k`.
pub(crate) fn par_levels(
    out: &mut ScalarField3,
    body: impl Fn(isize, &mut [f64]) + Sync + Send,
) {
    let slab = out.slab_len();
    let (_, _, np) = out.dims();
    out.data
        .par_chunks_mut(slab)
        .enumerate()
        .filter(|(kk, _)| *kk >= 1 && *kk <= np)
        .for_each(|(kk, s)| body(kk as isize - 1, s));
}

#[inline]
pub(crate) fn slab_idx(nx: usize, i: isize, j: isize) -> usize {
    (j + 1) as usize * (nx + 2) + (i + 1) as usize
}

/// Centered horizontal gradient.
pub fn grad_h(f: &ScalarField3, grid: &Grid) -> (ScalarField3, ScalarField3) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut gx = ScalarField3::zeros(grid);
    let mut gy = ScalarField3::zeros(grid);
    let (rdx, rdy) = (0.5 / grid.dx, 0.5 / grid.dy);
    par_levels(&mut gx, |k, s| {
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                s[slab_idx(nx, i, j)] = (f.get(i + 1, j, k) - f.get(i - 1, j, k)) * rdx;
            }
        }
    });
    par_levels(&mut gy, |k, s| {
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                s[slab_idx(nx, i, j)] = (f.get(i, j + 1, k) - f.get(i, j - 1, k)) * rdy;
            }
        }
    });
    (gx, gy)
}

/// Five-point horizontal Laplacian on each level.
pub fn laplace_h(f: &ScalarField3, grid: &Grid) -> ScalarField3 {
    let (nx, ny) = (grid.nx, grid.ny);
    let (rx, ry) = (1.0 / (grid.dx * grid.dx), 1.0 / (grid.dy * grid.dy));
    let mut out = ScalarField3::zeros(grid);
    par_levels(&mut out, |k, s| {
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let c = f.get(i, j, k);
                s[slab_idx(nx, i, j)] = (f.get(i + 1, j, k) - 2.0 * c + f.get(i - 1, j, k)) * rx
                    + (f.get(i, j + 1, k) - 2.0 * c + f.get(i, j - 1, k)) * ry;
            }
        }
    });
    out
}

/// Centered pressure derivative at cell centers (ghost levels supply the
/// boundary closure).
pub fn ddp(f: &ScalarField3, grid: &Grid) -> ScalarField3 {
    let (nx, ny) = (grid.nx, grid.ny);
    let r = 0.5 / grid.dp;
    let mut out = ScalarField3::zeros(grid);
    par_levels(&mut out, |k, s| {
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                s[slab_idx(nx, i, j)] = (f.get(i, j, k + 1) - f.get(i, j, k - 1)) * r;
            }
        }
    });
    out
}

/// Pressure derivative on the `np + 1` faces, `(f_k - f_{k-1}) / dp`.
pub fn ddp_faces(f: &ScalarField3, grid: &Grid) -> FaceField {
    let mut out = FaceField::zeros(grid.nx, grid.ny, grid.np);
    for kf in 0..=grid.np {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (ii, jj, kk) = (i as isize, j as isize, kf as isize);
                out.set(i, j, kf, (f.get(ii, jj, kk) - f.get(ii, jj, kk - 1)) / grid.dp);
            }
        }
    }
    out
}

/// Horizontal divergence of `(v1, v2)` from face-averaged velocities.
pub fn divergence_h(v1: &ScalarField3, v2: &ScalarField3, grid: &Grid) -> ScalarField3 {
    let (nx, ny) = (grid.nx, grid.ny);
    let (rdx, rdy) = (0.5 / grid.dx, 0.5 / grid.dy);
    let mut out = ScalarField3::zeros(grid);
    par_levels(&mut out, |k, s| {
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                s[slab_idx(nx, i, j)] = (v1.get(i + 1, j, k) - v1.get(i - 1, j, k)) * rdx
                    + (v2.get(i, j + 1, k) - v2.get(i, j - 1, k)) * rdy;
            }
        }
    });
    out
}

/// Vertical weight `c(p)` of the diffusion operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerticalWeight {
    /// `c ≡ 1`.
    Unit,
    /// `c(p) = g p / (R * profile(p))`.
    Reference(LnProfile),
}

/// Coefficients of `ν s(p) ∂_p( c(p)^2 ∂_p( s(p) f ) )` with `s = (p0/p)^e`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    pub mu: f64,
    pub nu: f64,
    /// `c^2` at the `np + 1` faces.
    pub face_coeff: Vec<f64>,
    /// `(p0/p)^e` at interior levels; `None` for the plain operator.
    pub conjugation: Option<Vec<f64>>,
}

impl DiffusionSpec {
    pub fn new(
        grid: &Grid,
        phys: &PhysParams,
        mu: f64,
        nu: f64,
        weight: VerticalWeight,
        exponent: f64,
    ) -> Self {
        let face_coeff = grid
            .p_faces
            .iter()
            .map(|&p| {
                let c = match weight {
                    VerticalWeight::Unit => 1.0,
                    VerticalWeight::Reference(prof) => {
                        phys.gravity * p / (phys.r_dry * prof.value(p))
                    }
                };
                c * c
            })
            .collect();
        let conjugation = (exponent != 0.0).then(|| {
            grid.p_levels
                .iter()
                .map(|&p| (grid.p0 / p).powf(exponent))
                .collect()
        });
        DiffusionSpec {
            mu,
            nu,
            face_coeff,
            conjugation,
        }
    }

    /// Operator for T or a moisture species: weight `g p / (R T̄)`, no conjugation.
    pub fn scalar(grid: &Grid, phys: &PhysParams, profiles: &ReferenceProfiles, mu: f64, nu: f64) -> Self {
        Self::new(grid, phys, mu, nu, VerticalWeight::Reference(profiles.t_bar), 0.0)
    }

    /// Potential-temperature variant: weight `g p / (R θ̄)`, conjugated by `(p0/p)^{R/c_p}`.
    pub fn theta(grid: &Grid, phys: &PhysParams, profiles: &ReferenceProfiles) -> Self {
        Self::new(
            grid,
            phys,
            phys.mu_t,
            phys.nu_t,
            VerticalWeight::Reference(profiles.theta_bar),
            phys.kappa(),
        )
    }
}

/// Flux-form vertical diffusion `ν s ∂_p(c² ∂_p(s f))`.
///
/// Boundary-face fluxes come from the ghost levels; with conjugation the ghost
/// operand is `s_adjacent * f_ghost` so a Neumann fill still gives zero flux.
pub fn vertical_diffusion(f: &ScalarField3, spec: &DiffusionSpec, grid: &Grid) -> ScalarField3 {
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np as isize);
    let rdp2 = 1.0 / (grid.dp * grid.dp);
    let conj = spec.conjugation.as_deref();
    let s_at = |k: isize| -> f64 {
        match conj {
            None => 1.0,
            Some(c) => c[k.clamp(0, np - 1) as usize],
        }
    };
    let mut out = ScalarField3::zeros(grid);
    par_levels(&mut out, |k, s| {
        let sk = s_at(k);
        // ghost levels borrow the adjacent interior factor
        let s_up = s_at(k - 1);
        let s_dn = s_at(k + 1);
        let c_up = spec.face_coeff[k as usize];
        let c_dn = spec.face_coeff[k as usize + 1];
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let u = sk * f.get(i, j, k);
                let u_up = s_up * f.get(i, j, k - 1);
                let u_dn = s_dn * f.get(i, j, k + 1);
                let flux = c_dn * (u_dn - u) - c_up * (u - u_up);
                s[slab_idx(nx, i, j)] = spec.nu * sk * flux * rdp2;
            }
        }
    });
    out
}

/// Face velocities used by the advection stencils.
struct FaceVelocity<'a> {
    v1: &'a ScalarField3,
    v2: &'a ScalarField3,
    w: &'a FaceField,
}

impl FaceVelocity<'_> {
    /// x-face between cells i and i+1.
    #[inline]
    fn u(&self, i: isize, j: isize, k: isize) -> f64 {
        0.5 * (self.v1.get(i, j, k) + self.v1.get(i + 1, j, k))
    }

    #[inline]
    fn v(&self, i: isize, j: isize, k: isize) -> f64 {
        0.5 * (self.v2.get(i, j, k) + self.v2.get(i, j + 1, k))
    }

    /// Face `kf` of column (i, j); `kf = k` is the upper face of cell k.
    #[inline]
    fn w(&self, i: isize, j: isize, kf: isize) -> f64 {
        self.w.get(i as usize, j as usize, kf as usize)
    }
}

/// Advective tendency `-(v·∇f + w ∂_p f)`.
///
/// `Centered` is the skew-symmetric average of flux and advective forms, for
/// which `<advect(f), f> = 0` whenever the wall and top/bottom face velocities
/// vanish. `Upwind` is the first-order monotone advective form.
pub fn advect(
    f: &ScalarField3,
    vel: &HorizontalVelocity,
    scheme: AdvectionScheme,
    grid: &Grid,
) -> ScalarField3 {
    let (nx, ny) = (grid.nx, grid.ny);
    let (rdx, rdy, rdp) = (1.0 / grid.dx, 1.0 / grid.dy, 1.0 / grid.dp);
    let fv = FaceVelocity {
        v1: &vel.v1,
        v2: &vel.v2,
        w: &vel.w,
    };
    let mut out = ScalarField3::zeros(grid);
    match scheme {
        AdvectionScheme::Centered => par_levels(&mut out, |k, s| {
            for j in 0..ny as isize {
                for i in 0..nx as isize {
                    let fc = f.get(i, j, k);
                    let ue = fv.u(i, j, k);
                    let uw = fv.u(i - 1, j, k);
                    let vn = fv.v(i, j, k);
                    let vs = fv.v(i, j - 1, k);
                    let wt = fv.w(i, j, k);
                    let wb = fv.w(i, j, k + 1);
                    // (F(f) - f D(U)/2) with F the face-average flux divergence
                    let flux = (ue * (f.get(i + 1, j, k) + fc) - uw * (f.get(i - 1, j, k) + fc))
                        * 0.5
                        * rdx
                        + (vn * (f.get(i, j + 1, k) + fc) - vs * (f.get(i, j - 1, k) + fc))
                            * 0.5
                            * rdy
                        + (wb * (f.get(i, j, k + 1) + fc) - wt * (f.get(i, j, k - 1) + fc))
                            * 0.5
                            * rdp;
                    let div = (ue - uw) * rdx + (vn - vs) * rdy + (wb - wt) * rdp;
                    s[slab_idx(nx, i, j)] = -(flux - 0.5 * fc * div);
                }
            }
        }),
        AdvectionScheme::Upwind => par_levels(&mut out, |k, s| {
            for j in 0..ny as isize {
                for i in 0..nx as isize {
                    let fc = f.get(i, j, k);
                    let uw = fv.u(i - 1, j, k).max(0.0);
                    let ue = fv.u(i, j, k).min(0.0);
                    let vs = fv.v(i, j - 1, k).max(0.0);
                    let vn = fv.v(i, j, k).min(0.0);
                    let wt = fv.w(i, j, k).max(0.0);
                    let wb = fv.w(i, j, k + 1).min(0.0);
                    let adv = (uw * (fc - f.get(i - 1, j, k)) + ue * (f.get(i + 1, j, k) - fc)) * rdx
                        + (vs * (fc - f.get(i, j - 1, k)) + vn * (f.get(i, j + 1, k) - fc)) * rdy
                        + (wt * (fc - f.get(i, j, k - 1)) + wb * (f.get(i, j, k + 1) - fc)) * rdp;
                    s[slab_idx(nx, i, j)] = -adv;
                }
            }
        }),
    }
    out
}

/// `<f, g>` over the interior with cell volumes.
pub fn inner(f: &ScalarField3, g: &ScalarField3, grid: &Grid) -> f64 {
    f.interior().zip(g.interior()).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume()
}

/// Horizontal face-gradient inner product `<∇f, ∇g>` (boundary faces weighted 1/2).
pub fn grad_inner_h(f: &ScalarField3, g: &ScalarField3, grid: &Grid) -> f64 {
    let (nx, ny, np) = (grid.nx as isize, grid.ny as isize, grid.np as isize);
    let mut sx = 0.0;
    let mut sy = 0.0;
    for k in 0..np {
        for j in 0..ny {
            for i in -1..nx {
                let w = if i == -1 || i == nx - 1 { 0.5 } else { 1.0 };
                sx += w * (f.get(i + 1, j, k) - f.get(i, j, k)) * (g.get(i + 1, j, k) - g.get(i, j, k));
            }
        }
        for j in -1..ny {
            let w = if j == -1 || j == ny - 1 { 0.5 } else { 1.0 };
            for i in 0..nx {
                sy += w * (f.get(i, j + 1, k) - f.get(i, j, k)) * (g.get(i, j + 1, k) - g.get(i, j, k));
            }
        }
    }
    let vol = grid.cell_volume();
    (sx / (grid.dx * grid.dx) + sy / (grid.dy * grid.dy)) * vol
}

/// Vertical face-gradient inner product `<∂_p f, ∂_p g>` (top/bottom faces weighted 1/2).
pub fn ddp_inner(f: &ScalarField3, g: &ScalarField3, grid: &Grid) -> f64 {
    let (nx, ny, np) = (grid.nx as isize, grid.ny as isize, grid.np as isize);
    let mut s = 0.0;
    for k in -1..np {
        let w = if k == -1 || k == np - 1 { 0.5 } else { 1.0 };
        for j in 0..ny {
            for i in 0..nx {
                s += w * (f.get(i, j, k + 1) - f.get(i, j, k)) * (g.get(i, j, k + 1) - g.get(i, j, k));
            }
        }
    }
    s / (grid.dp * grid.dp) * grid.cell_volume()
}

/// `‖(g p / (R θ̄)) f‖_{L²}`.
pub fn weighted_norm_w(f: &ScalarField3, grid: &Grid, phys: &PhysParams, theta_bar: &LnProfile) -> f64 {
    let mut s = 0.0;
    for k in 0..grid.np {
        let p = grid.p_levels[k];
        let c = phys.gravity * p / (phys.r_dry * theta_bar.value(p));
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let v = c * f.at(i, j, k);
                s += v * v;
            }
        }
    }
    (s * grid.cell_volume()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    /// `(‖f‖² + ‖∇_h f‖²)^{1/2}`.
    pub h1_horizontal: f64,
    /// `(‖f‖² + ‖∇_h f‖² + ‖∂_p f‖²)^{1/2}`.
    pub h1_full: f64,
    pub linf: f64,
}

pub fn norms(f: &ScalarField3, grid: &Grid) -> Norms {
    let l2sq = inner(f, f, grid);
    let gh = grad_inner_h(f, f, grid);
    let gp = ddp_inner(f, f, grid);
    Norms {
        l2: l2sq.sqrt(),
        h1_horizontal: (l2sq + gh).sqrt(),
        h1_full: (l2sq + gh + gp).sqrt(),
        linf: f.max_abs(),
    }
}
