//! Continuous dependence on initial data.
//!
//! Two runs from data differing by a perturbation advance in lockstep with a
//! shared fixed step. With `Q = q_v + q_c` and `H = T + (L/c_p) q_v`,
//!
//! ```text
//! Ψ = δ² (‖q̂_r‖² + ‖q̂_v‖² + ‖Ĥ‖² + ‖Q̂‖²) + ‖v̂‖²
//! ```
//!
//! is recorded each step together with the multiplier shape
//!
//! ```text
//! a(t) = 1 + ‖v₂‖⁴_{H¹} + ‖∇v₂‖² + 2‖∇∂_p v₂‖² + ‖∂_p v₂‖² + ‖∂_p v₂‖⁴
//!          + ‖∂_p v₂‖² ‖∇∂_p v₂‖²
//! ```
//!
//! from the perturbed run. The envelope is `Ψ(0) exp(C ∫ a)`.

use serde::Serialize;
use std::f64::consts::PI;

use super::bihari::gronwall_bound;
use crate::boundary::{fill_lateral, fill_vertical, GhostRule};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::{Grid, ModelState, ScalarField3};
use crate::operators::{ddp, ddp_inner, grad_inner_h, inner, norms};
use crate::stepper::Model;

/// Weight of the scalar terms in Ψ.
pub const DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PerturbationShape {
    /// Solenoidal, wall-vanishing horizontal velocity cell.
    Velocity,
    /// Nonnegative Gaussian vapor bump at the bubble position.
    Vapor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub shape: PerturbationShape,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct UniquenessMetrics {
    pub time: f64,
    pub v_hat_sq: f64,
    pub qv_hat_sq: f64,
    pub qr_hat_sq: f64,
    pub q_hat_sq: f64,
    pub h_hat_sq: f64,
    pub psi: f64,
    /// Multiplier shape `a(t)` from the perturbed run.
    pub a7_shape: f64,
    /// `(Ψₙ - Ψₙ₋₁) / (dt Ψₙ₋₁)`; zero at the first record or when Ψ vanishes.
    pub a7_empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub perturbation: Perturbation,
    pub delta: f64,
    pub steps: usize,
    pub dt: f64,
    pub metrics: Vec<UniquenessMetrics>,
    pub psi0: f64,
    pub psi_final: f64,
    /// Smallest `C` with `Â₇ ≤ C a` at every step.
    pub a7_ratio_max: f64,
    /// Constant used for the envelope, if one was supplied.
    pub a7_constant: Option<f64>,
    pub envelope: Vec<f64>,
    /// Largest `Ψ / envelope` (≤ 1 when the envelope holds).
    pub envelope_ratio_max: f64,
}

fn diff_sq(a: &ScalarField3, b: &ScalarField3, grid: &Grid) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    inner(&d, &d, grid)
}

/// `Ψ` and its parts for the pair `(s1, s2)`.
pub fn psi_metrics(s1: &ModelState, s2: &ModelState, grid: &Grid, cfg: &Config, delta: f64) -> UniquenessMetrics {
    let lc = cfg.phys.latent_heat / cfg.phys.c_p;
    let comb = |a: &ModelState| {
        let mut q = a.qv.clone();
        q.axpy(1.0, &a.qc);
        let mut h = a.t.clone();
        h.axpy(lc, &a.qv);
        (q, h)
    };
    let (q1, h1) = comb(s1);
    let (q2, h2) = comb(s2);
    let v_hat_sq = diff_sq(&s1.vel.v1, &s2.vel.v1, grid) + diff_sq(&s1.vel.v2, &s2.vel.v2, grid);
    let qv_hat_sq = diff_sq(&s1.qv, &s2.qv, grid);
    let qr_hat_sq = diff_sq(&s1.qr, &s2.qr, grid);
    let q_hat_sq = diff_sq(&q1, &q2, grid);
    let h_hat_sq = diff_sq(&h1, &h2, grid);
    UniquenessMetrics {
        time: s2.time,
        v_hat_sq,
        qv_hat_sq,
        qr_hat_sq,
        q_hat_sq,
        h_hat_sq,
        psi: delta * delta * (qr_hat_sq + qv_hat_sq + h_hat_sq + q_hat_sq) + v_hat_sq,
        a7_shape: a7_shape(s2, grid),
        a7_empirical: 0.0,
    }
}

/// Multiplier shape `a(t)` for the velocity of `s`. Ghosts must be filled.
pub fn a7_shape(s: &ModelState, grid: &Grid) -> f64 {
    let (mut h1_sq, mut grad_sq, mut dp_sq, mut grad_dp_sq) = (0.0, 0.0, 0.0, 0.0);
    for c in [&s.vel.v1, &s.vel.v2] {
        h1_sq += norms(c, grid).h1_full.powi(2);
        grad_sq += grad_inner_h(c, c, grid);
        dp_sq += ddp_inner(c, c, grid);
        let mut d = ddp(c, grid);
        fill_vertical(&mut d, grid, GhostRule::Neumann, GhostRule::Neumann);
        fill_lateral(&mut d, grid, GhostRule::DirichletZero);
        grad_dp_sq += grad_inner_h(&d, &d, grid);
    }
    1.0 + h1_sq * h1_sq + grad_sq + 2.0 * grad_dp_sq + dp_sq + dp_sq * dp_sq + dp_sq * grad_dp_sq
}

/// Adds the perturbation to the prognostic fields (before re-diagnosis).
pub fn perturb(s: &mut ModelState, grid: &Grid, cfg: &Config, p: Perturbation) {
    let a = p.amplitude;
    if a == 0.0 {
        return;
    }
    let (lx, ly) = (grid.lx, grid.ly);
    match p.shape {
        PerturbationShape::Velocity => {
            let u = ScalarField3::from_fn(grid, |x, y, _| {
                a * (PI * x / lx).sin().powi(2) * (2.0 * PI * y / ly).sin()
            });
            let v = ScalarField3::from_fn(grid, |x, y, _| {
                -a * (ly / lx) * (2.0 * PI * x / lx).sin() * (PI * y / ly).sin().powi(2)
            });
            s.vel.v1.axpy(1.0, &u);
            s.vel.v2.axpy(1.0, &v);
        }
        PerturbationShape::Vapor => {
            let ic = cfg.run.initial;
            let q = ScalarField3::from_fn(grid, |x, y, pr| {
                let rx = (x / lx - ic.bubble_x) / ic.bubble_radius;
                let ry = (y / ly - ic.bubble_y) / ic.bubble_radius;
                let rp = (pr - ic.bubble_p) / ic.bubble_p_width;
                a * (-(rx * rx + ry * ry + rp * rp)).exp()
            });
            s.qv.axpy(1.0, &q);
        }
    }
}

/// Paired runs of `steps` steps. With `a7_constant`, the envelope uses it;
/// otherwise the fitted ratio is used.
pub fn uniqueness_experiment(
    cfg: &Config,
    perturbation: Perturbation,
    steps: usize,
    delta: f64,
    a7_constant: Option<f64>,
) -> Result<UniquenessReport> {
    if !cfg.phys.use_f_plus {
        return Err(Error::Invariant("uniqueness experiment requires use_F_plus = true".into()));
    }
    let mut m1 = Model::new(cfg.clone())?;
    let mut m2 = Model::new(cfg.clone())?;
    let grid = m1.grid.clone();
    let mut s1 = m1.initial_state()?;
    let mut s2 = init_perturbed(&mut m2, perturbation)?;
    let dt = m1.choose_dt(&s1).dt;

    let mut metrics = vec![psi_metrics(&s1, &s2, &grid, cfg, delta)];
    for _ in 0..steps {
        let (a, b) = rayon::join(|| m1.step(&s1, dt), || m2.step(&s2, dt));
        s1 = a?;
        s2 = b?;
        let mut m = psi_metrics(&s1, &s2, &grid, cfg, delta);
        let prev = metrics.last().expect("nonempty").psi;
        if prev > 0.0 {
            m.a7_empirical = (m.psi - prev) / (dt * prev);
        }
        metrics.push(m);
    }

    let a7_ratio_max = metrics
        .windows(2)
        .map(|w| w[1].a7_empirical / w[0].a7_shape)
        .fold(0.0, f64::max);
    let c = a7_constant.unwrap_or(a7_ratio_max);
    let times: Vec<f64> = metrics.iter().map(|m| m.time).collect();
    let rates: Vec<f64> = metrics.iter().map(|m| c * m.a7_shape).collect();
    let psi0 = metrics[0].psi;
    let envelope = gronwall_bound(psi0, &times, &rates);
    let envelope_ratio_max = metrics
        .iter()
        .zip(&envelope)
        .map(|(m, e)| if *e > 0.0 { m.psi / e } else if m.psi > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(UniquenessReport {
        perturbation,
        delta,
        steps,
        dt,
        psi0,
        psi_final: metrics.last().expect("nonempty").psi,
        metrics,
        a7_ratio_max,
        a7_constant,
        envelope,
        envelope_ratio_max,
    })
}

fn init_perturbed(m: &mut Model, p: Perturbation) -> Result<ModelState> {
    let mut s = crate::stepper::init::initial_fields(&m.cfg, &m.grid);
    perturb(&mut s, &m.grid, &m.cfg, p);
    m.finish(&mut s, None)?;
    Ok(s)
}
