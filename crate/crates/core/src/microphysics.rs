//! Warm-rain source terms in T-form.
//!
//! Condensation `C = w⁻ F(T,p) H_ε₂(q_v - q_vs)`, evaporation
//! `E = k₃ τ(q_r)(q_vs - q_v)⁺`, autoconversion `A = k₁(q_c - q_crit)⁺`,
//! collection `K = k₂ q_c τ(q_r)`:
//!
//! ```text
//! dT   = (R T / (c_p p)) w + (L / c_p)(C - E) + f_T¹
//! dq_v = E - C
//! dq_c = C - A - K
//! dq_r = A + K - E + sedimentation
//! ```
//!
//! Sedimentation moves rain toward increasing p:
//! `-V_t ∂_p(p q_r / (R θ̄))`, upwinded from above with no inflow at p0.

use rayon::prelude::*;

use crate::config::{PhysParams, ReferenceProfiles, ThermalSource};
use crate::grid::{FaceField, Grid, ModelState, ScalarField3};
use crate::operators::{par_levels, slab_idx};

/// Cutoff φ: `max(T_*/2, T)` up to `T*`, then linear to 0 at `2T*`, 0 beyond.
pub fn phi_cutoff(t: f64, phys: &PhysParams) -> f64 {
    let (lo, hi) = (phys.t_star_lo, phys.t_star_hi);
    if t <= hi {
        t.max(0.5 * lo)
    } else if t < 2.0 * hi {
        2.0 * hi - t
    } else {
        0.0
    }
}

/// Saturation rate F(T, p); its positive part when `use_f_plus`.
pub fn saturation_rate_f(t: f64, p: f64, phys: &PhysParams) -> f64 {
    let phi = phi_cutoff(t, phys);
    let PhysParams {
        q_vs,
        latent_heat: l,
        r_dry: r,
        r_vapor: rv,
        c_p: cp,
        ..
    } = *phys;
    let f = q_vs * phi / p * (l * r - cp * rv * phi) / (cp * rv * phi * phi + q_vs * l * l);
    if phys.use_f_plus {
        f.max(0.0)
    } else {
        f
    }
}

#[inline]
pub fn tau_clamp(q_r: f64) -> f64 {
    q_r.clamp(0.0, 1.0)
}

#[inline]
pub fn regularized_heaviside(r: f64, eps2: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r <= eps2 {
        r / eps2
    } else {
        1.0
    }
}

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Cell-centered `max(-w, 0)` from the two bounding faces.
pub fn w_minus(w: &FaceField, grid: &Grid) -> ScalarField3 {
    let mut out = ScalarField3::zeros(grid);
    let nx = grid.nx;
    par_levels(&mut out, |k, s| {
        for j in 0..grid.ny {
            for i in 0..nx {
                s[slab_idx(nx, i as isize, j as isize)] = pos(-w.center(i, j, k as usize));
            }
        }
    });
    out
}

/// Flux factor `p / (R θ̄(p))` on the pressure faces.
pub fn sedimentation_factor(grid: &Grid, phys: &PhysParams, profiles: &ReferenceProfiles) -> Vec<f64> {
    grid.p_faces
        .iter()
        .map(|&p| p / (phys.r_dry * profiles.theta_bar.value(p)))
        .collect()
}

/// Sedimentation tendency of rain, and the per-column outflow `V_t c(p1) q_r`
/// through the bottom face (row-major over i, j).
pub fn sedimentation(
    qr: &ScalarField3,
    grid: &Grid,
    phys: &PhysParams,
    profiles: &ReferenceProfiles,
) -> (ScalarField3, Vec<f64>) {
    let c = sedimentation_factor(grid, phys, profiles);
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
    let vt = phys.v_t;
    let rdp = 1.0 / grid.dp;
    let mut out = ScalarField3::zeros(grid);
    par_levels(&mut out, |k, s| {
        let ku = k as usize;
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let below = c[ku + 1] * qr.get(i, j, k);
                let above = if k == 0 { 0.0 } else { c[ku] * qr.get(i, j, k - 1) };
                s[slab_idx(nx, i, j)] = -vt * (below - above) * rdp;
            }
        }
    });
    let mut outflow = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            outflow[j * nx + i] = vt * c[np] * qr.at(i, j, np - 1);
        }
    }
    (out, outflow)
}

/// External heating field f_T¹.
pub fn thermal_source_field(src: &ThermalSource, grid: &Grid) -> ScalarField3 {
    match *src {
        ThermalSource::Zero => ScalarField3::zeros(grid),
        ThermalSource::Constant(c) => ScalarField3::from_fn(grid, |_, _, _| c),
        ThermalSource::Gaussian {
            amplitude,
            x,
            y,
            p,
            radius,
            p_width,
        } => {
            let (lx, ly) = (grid.lx, grid.ly);
            ScalarField3::from_fn(grid, |xx, yy, pp| {
                let rx = (xx / lx - x) / radius;
                let ry = (yy / ly - y) / radius;
                let rp = (pp - p) / p_width;
                amplitude * (-(rx * rx + ry * ry + rp * rp)).exp()
            })
        }
    }
}

/// Right-hand sides of the temperature and moisture equations.
///
/// `sink[s]` holds the nonnegative loss of species `s` through phase change
/// (`C` for vapor, `A + K` for cloud, `E` for rain). Each vanishes where its
/// species is zero, so the stepper may treat it as `rate * q` at the new level.
#[derive(Debug, Clone)]
pub struct SourceTendencies {
    pub dt: ScalarField3,
    pub dqv: ScalarField3,
    pub dqc: ScalarField3,
    pub dqr: ScalarField3,
    pub sedimentation: ScalarField3,
    pub sink: [ScalarField3; 3],
}

struct Rates {
    c: f64,
    e: f64,
    a: f64,
    k: f64,
}

#[inline]
fn rates(t: f64, p: f64, qv: f64, qc: f64, qr: f64, wm: f64, phys: &PhysParams) -> Rates {
    let f = saturation_rate_f(t, p, phys);
    let tr = tau_clamp(qr);
    Rates {
        c: wm * f * regularized_heaviside(qv - phys.q_vs, phys.eps2),
        e: phys.k3 * tr * pos(phys.q_vs - qv),
        a: phys.k1 * pos(qc - phys.q_crit),
        k: phys.k2 * qc * tr,
    }
}

/// Evaluates all source terms at the state's current values and w.
pub fn assemble_sources(
    state: &ModelState,
    grid: &Grid,
    phys: &PhysParams,
    profiles: &ReferenceProfiles,
    f_t1: &ScalarField3,
) -> SourceTendencies {
    let (nx, ny, np) = (grid.nx, grid.ny, grid.np);
    let (sed, _) = sedimentation(&state.qr, grid, phys, profiles);
    let wm = w_minus(&state.vel.w, grid);
    let slab = state.t.slab_len();
    let n = state.t.data.len();
    let mut buf = vec![[0.0f64; 7]; n];
    buf.par_chunks_mut(slab).enumerate().for_each(|(kk, s)| {
        if kk == 0 || kk > np {
            return;
        }
        let k = kk as isize - 1;
        let p = grid.p_levels[k as usize];
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let t = state.t.get(i, j, k);
                let (qv, qc, qr) = (state.qv.get(i, j, k), state.qc.get(i, j, k), state.qr.get(i, j, k));
                let w = state.vel.w.center(i as usize, j as usize, k as usize);
                let r = rates(t, p, qv, qc, qr, wm.get(i, j, k), phys);
                let sd = sed.get(i, j, k);
                s[slab_idx(nx, i, j)] = [
                    phys.r_dry * t / (phys.c_p * p) * w + phys.latent_heat / phys.c_p * (r.c - r.e) + f_t1.get(i, j, k),
                    r.e - r.c,
                    r.c - r.a - r.k,
                    r.a + r.k - r.e + sd,
                    r.c,
                    r.a + r.k,
                    r.e,
                ];
            }
        }
    });
    let mut fields: Vec<ScalarField3> = (0..7).map(|_| ScalarField3::zeros(grid)).collect();
    for (m, f) in fields.iter_mut().enumerate() {
        for (dst, src) in f.data.iter_mut().zip(&buf) {
            *dst = src[m];
        }
    }
    let mut it = fields.into_iter();
    let mut next = || it.next().expect("seven fields");
    SourceTendencies {
        dt: next(),
        dqv: next(),
        dqc: next(),
        dqr: next(),
        sedimentation: sed,
        sink: [next(), next(), next()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ParamMode;

    fn phys() -> PhysParams {
        PhysParams::defaults(ParamMode::Nondimensional)
    }

    #[test]
    fn phi_cases() {
        let p = phys();
        assert_eq!(phi_cutoff(280.0, &p), 280.0);
        assert_eq!(phi_cutoff(2.0 * p.t_star_hi + 1.0, &p), 0.0);
        assert!(phi_cutoff(100.0, &p) >= 75.0);
        assert!(phi_cutoff(-50.0, &p) >= 75.0);
        // continuous at the ramp ends
        assert!((phi_cutoff(p.t_star_hi + 1e-9, &p) - p.t_star_hi).abs() < 1e-6);
        assert!(phi_cutoff(2.0 * p.t_star_hi - 1e-9, &p) < 1e-6);
    }

    #[test]
    fn f_regression_value() {
        let mut p = phys();
        p.use_f_plus = false;
        let f = saturation_rate_f(280.0, 8.5e4, &p);
        let oracle = 2.400303669075989e-07;
        assert!((f - oracle).abs() <= 1e-15 * oracle, "{f:e}");
    }

    #[test]
    fn f_zero_when_phi_zero() {
        let p = phys();
        assert_eq!(saturation_rate_f(2.0 * p.t_star_hi + 5.0, 5.0e4, &p), 0.0);
    }

    #[test]
    fn f_envelope() {
        let mut p = phys();
        p.use_f_plus = false;
        let max_phi = (0..=3000)
            .map(|n| phi_cutoff(100.0 + 0.1 * n as f64, &p))
            .fold(0.0f64, f64::max);
        let bound = p.r_dry * max_phi / (p.p0 * p.latent_heat);
        for n in 0..=3000 {
            let t = 100.0 + 0.1 * n as f64;
            for pp in [p.p0, 5.0e4, p.p1] {
                assert!(saturation_rate_f(t, pp, &p).abs() <= bound);
            }
        }
    }

    #[test]
    fn tau_and_heaviside() {
        assert_eq!(tau_clamp(-0.5), 0.0);
        assert_eq!(tau_clamp(0.3), 0.3);
        assert_eq!(tau_clamp(2.0), 1.0);
        assert_eq!(regularized_heaviside(-0.3, 0.1), 0.0);
        assert!((regularized_heaviside(0.05, 0.1) - 0.5).abs() < 1e-15);
        assert_eq!(regularized_heaviside(0.2, 0.1), 1.0);
    }

    #[test]
    fn w_minus_cases() {
        let g = Grid::new(4, 4, 4, 1.0, 1.0, 1.0e4, 1.0e5).unwrap();
        let mut w = FaceField::zeros(4, 4, 4);
        assert_eq!(w_minus(&w, &g).max_abs(), 0.0);
        w.data.iter_mut().for_each(|x| *x = -2.0);
        assert!(w_minus(&w, &g).interior().all(|v| v == 2.0));
        w.data.iter_mut().for_each(|x| *x = 3.0);
        assert_eq!(w_minus(&w, &g).max_abs(), 0.0);
    }

    #[test]
    fn sedimentation_constant_rain() {
        let p = phys();
        let g = Grid::new(4, 4, 8, 1.0, 1.0, 1.0e4, 1.0e5).unwrap();
        let prof = ReferenceProfiles::default();
        let z = sedimentation(&ScalarField3::zeros(&g), &g, &p, &prof).0;
        assert_eq!(z.max_abs(), 0.0);
        let q = 0.01;
        let qr = ScalarField3::from_fn(&g, |_, _, _| q);
        let (s, _) = sedimentation(&qr, &g, &p, &prof);
        let expect = -p.v_t * q / (p.r_dry * 300.0);
        for k in 1..g.np {
            assert!((s.at(1, 2, k) - expect).abs() <= 1e-12 * expect.abs());
        }
    }
}
