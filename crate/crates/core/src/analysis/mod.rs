//! Runtime monitors: norms, dissipation, maximum-principle bounds, energy
//! budget, and the continuous-dependence experiment.

pub mod baselines;
pub mod bihari;
pub mod checks;
pub mod convergence;
pub mod uniqueness;

use serde::Serialize;

use crate::boundary::{fill_all, GhostRule};
use crate::config::{BoundaryData, Config};
use crate::diagnostic::{continuity_residual, lateral_normal_derivative, top_divergence, ContinuityReport, ProjectionReport};
use crate::error::{Error, Result};
use crate::grid::{Grid, ModelState, ScalarField3};
use crate::operators::{ddp, grad_inner_h, norms, weighted_norm_w};

pub use bihari::{bihari_lasalle_bound, capital_g, capital_g_inverse, gronwall_bound, BihariBound, Nonlinearity};
pub use uniqueness::{uniqueness_experiment, Perturbation, PerturbationShape, UniquenessMetrics, UniquenessReport};

/// Slack above a bound before a cell counts as a violation.
pub const BOUND_TOL: f64 = 1e-8;
/// Slack below zero before a cell counts as negative.
pub const FLOOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ScalarStats {
    pub l2: f64,
    pub h1: f64,
    /// `‖∂_p f‖_w`.
    pub dp_w: f64,
    /// `‖∇f‖²` (horizontal).
    pub grad_sq: f64,
    pub min: f64,
    pub max: f64,
}

/// Upper bounds from the initial data and the boundary targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundLimits {
    pub qv: f64,
    pub qc: f64,
    pub qr: f64,
    pub t: f64,
}

impl BoundLimits {
    pub fn from_initial(s0: &ModelState, b: &BoundaryData) -> Self {
        let m = |f: &ScalarField3, surf: f64, lat: f64| f.max_abs().max(surf).max(lat);
        BoundLimits {
            qv: m(&s0.qv, b.q_surface[0], b.q_lateral[0]),
            qc: m(&s0.qc, b.q_surface[1], b.q_lateral[1]),
            qr: m(&s0.qr, b.q_surface[2], b.q_lateral[2]),
            t: m(&s0.t, b.t_surface, b.t_lateral),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    /// The bound crossed: the upper limit, or `0` for a negative value.
    pub bound: f64,
    pub excess: f64,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub step: usize,
    pub dt: f64,
    /// Both horizontal components; `min`/`max` span both.
    pub v: ScalarStats,
    pub t: ScalarStats,
    pub qv: ScalarStats,
    pub qc: ScalarStats,
    pub qr: ScalarStats,
    pub flag_qv: bool,
    pub flag_qc: bool,
    pub flag_qr: bool,
    pub flag_t: bool,
    /// Worst violation per flagged field.
    pub violations: Vec<Violation>,
    pub continuity_residual: f64,
    pub w_top: f64,
    /// `max |∇·v|` on the top level.
    pub div_top: f64,
    /// `max |∂_n v|` on the lateral walls.
    pub dn_v_lateral: f64,
    pub projection_residual: f64,
    pub projection_iterations: usize,
}

fn stats(f: &ScalarField3, grid: &Grid, cfg: &Config) -> ScalarStats {
    let n = norms(f, grid);
    let mut d = ddp(f, grid);
    fill_all(&mut d, grid, GhostRule::Neumann);
    let (min, max) = f.min_max();
    ScalarStats {
        l2: n.l2,
        h1: n.h1_full,
        dp_w: weighted_norm_w(&d, grid, &cfg.phys, &cfg.profiles.theta_bar),
        grad_sq: grad_inner_h(f, f, grid),
        min,
        max,
    }
}

fn combine(a: ScalarStats, b: ScalarStats) -> ScalarStats {
    let h = |x: f64, y: f64| (x * x + y * y).sqrt();
    ScalarStats {
        l2: h(a.l2, b.l2),
        h1: h(a.h1, b.h1),
        dp_w: h(a.dp_w, b.dp_w),
        grad_sq: a.grad_sq + b.grad_sq,
        min: a.min.min(b.min),
        max: a.max.max(b.max),
    }
}

/// Worst cell of `f` against `[0, upper]` with the monitor tolerances.
pub fn check_bound(name: &'static str, f: &ScalarField3, upper: f64, grid: &Grid) -> Option<Violation> {
    let mut worst: Option<Violation> = None;
    for k in 0..grid.np {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let v = f.at(i, j, k);
                let (excess, bound) = if v > upper + BOUND_TOL {
                    (v - upper, upper)
                } else if v < -FLOOR_TOL {
                    (-v, 0.0)
                } else if v.is_nan() {
                    (f64::INFINITY, upper)
                } else {
                    continue;
                };
                if worst.as_ref().is_none_or(|w| excess > w.excess) {
                    worst = Some(Violation {
                        field: name,
                        value: v,
                        bound,
                        excess,
                        i,
                        j,
                        k,
                    });
                }
            }
        }
    }
    worst
}

/// Monitors for one diagnosed state. Ghosts must be filled.
pub fn record_diagnostics(
    state: &ModelState,
    grid: &Grid,
    cfg: &Config,
    limits: &BoundLimits,
    continuity: &ContinuityReport,
    projection: &ProjectionReport,
    dt: f64,
) -> DiagnosticsRecord {
    let v = combine(stats(&state.vel.v1, grid, cfg), stats(&state.vel.v2, grid, cfg));
    let checks = [
        check_bound("qv", &state.qv, limits.qv, grid),
        check_bound("qc", &state.qc, limits.qc, grid),
        check_bound("qr", &state.qr, limits.qr, grid),
        check_bound("T", &state.t, limits.t, grid),
    ];
    let flags: Vec<bool> = checks.iter().map(Option::is_some).collect();
    DiagnosticsRecord {
        time: state.time,
        step: state.step,
        dt,
        v,
        t: stats(&state.t, grid, cfg),
        qv: stats(&state.qv, grid, cfg),
        qc: stats(&state.qc, grid, cfg),
        qr: stats(&state.qr, grid, cfg),
        flag_qv: flags[0],
        flag_qc: flags[1],
        flag_qr: flags[2],
        flag_t: flags[3],
        violations: checks.into_iter().flatten().collect(),
        continuity_residual: continuity_residual(&state.vel, grid),
        w_top: continuity.w_top_max,
        div_top: top_divergence(&state.vel, grid),
        dn_v_lateral: lateral_normal_derivative(&state.vel, grid),
        projection_residual: projection.relative_residual,
        projection_iterations: projection.iterations,
    }
}

impl DiagnosticsRecord {
    pub fn any_flag(&self) -> bool {
        self.flag_qv || self.flag_qc || self.flag_qr || self.flag_t
    }

    /// `(name, value)` pairs in CSV column order.
    pub fn columns(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("time".to_string(), self.time),
            ("step".to_string(), self.step as f64),
            ("dt".to_string(), self.dt),
        ];
        for (name, s) in [("v", &self.v), ("T", &self.t), ("qv", &self.qv), ("qc", &self.qc), ("qr", &self.qr)] {
            for (suffix, x) in [
                ("l2", s.l2),
                ("h1", s.h1),
                ("dp_w", s.dp_w),
                ("grad_sq", s.grad_sq),
                ("min", s.min),
                ("max", s.max),
            ] {
                out.push((format!("{name}_{suffix}"), x));
            }
        }
        for (name, f) in [
            ("flag_qv", self.flag_qv),
            ("flag_qc", self.flag_qc),
            ("flag_qr", self.flag_qr),
            ("flag_T", self.flag_t),
        ] {
            out.push((name.to_string(), f as u8 as f64));
        }
        out.extend([
            ("continuity_residual".to_string(), self.continuity_residual),
            ("w_top".to_string(), self.w_top),
            ("div_top".to_string(), self.div_top),
            ("dn_v_lateral".to_string(), self.dn_v_lateral),
            ("projection_residual".to_string(), self.projection_residual),
            ("projection_iterations".to_string(), self.projection_iterations as f64),
        ]);
        out
    }

    pub fn csv_header() -> Vec<String> {
        DiagnosticsRecord::default().columns().into_iter().map(|(n, _)| n).collect()
    }

    pub fn csv_values(&self) -> Vec<f64> {
        self.columns().into_iter().map(|(_, v)| v).collect()
    }
}

/// Running trapezoid integral of `‖∇v‖²` over the series.
pub fn cumulative_dissipation(series: &[DiagnosticsRecord]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(series.len());
    for (n, r) in series.iter().enumerate() {
        if n > 0 {
            let p = &series[n - 1];
            acc += 0.5 * (r.time - p.time) * (r.v.grad_sq + p.v.grad_sq);
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub pass: bool,
    pub c_hat: f64,
    pub mu: f64,
    /// `lhs - rhs` at each interior record.
    pub margins: Vec<f64>,
    pub max_margin: f64,
    /// Step index of the record with the largest margin.
    pub worst_step: usize,
}

/// `d/dt ‖v‖² + 2μ‖∇v‖² - Ĉ(‖v‖² + ‖T‖² + 1)` at interior record `n`, with the
/// derivative a centered difference.
fn budget_terms(series: &[DiagnosticsRecord], n: usize, mu: f64) -> (f64, f64) {
    let (a, r, b) = (&series[n - 1], &series[n], &series[n + 1]);
    let ddt = (b.v.l2.powi(2) - a.v.l2.powi(2)) / (b.time - a.time);
    let lhs = ddt + 2.0 * mu * r.v.grad_sq;
    let scale = r.v.l2.powi(2) + r.t.l2.powi(2) + 1.0;
    (lhs, scale)
}

/// Checks the discrete momentum energy inequality over a recorded series.
pub fn energy_budget_check(series: &[DiagnosticsRecord], mu: f64, c_hat: f64) -> Result<BudgetReport> {
    if series.len() < 3 {
        return Err(Error::SeriesTooShort(series.len()));
    }
    let margins: Vec<f64> = (1..series.len() - 1)
        .map(|n| {
            let (lhs, scale) = budget_terms(series, n, mu);
            lhs - c_hat * scale
        })
        .collect();
    let (worst, max_margin) = margins
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (n, m)| if m > acc.1 { (n, m) } else { acc });
    Ok(BudgetReport {
        pass: max_margin <= 0.0,
        c_hat,
        mu,
        margins,
        max_margin,
        worst_step: series[worst + 1].step,
    })
}

/// Smallest `Ĉ >= 0` for which [`energy_budget_check`] passes on `series`.
pub fn fit_budget_constant(series: &[DiagnosticsRecord], mu: f64) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::SeriesTooShort(series.len()));
    }
    Ok((1..series.len() - 1)
        .map(|n| {
            let (lhs, scale) = budget_terms(series, n, mu);
            lhs / scale
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ParamMode;
    use crate::diagnostic::{ContinuityReport, ProjectionReport};

    fn setup() -> (Grid, Config) {
        let mut cfg = Config::defaults(ParamMode::Nondimensional);
        cfg.run.nx = 6;
        cfg.run.ny = 5;
        cfg.run.np = 4;
        let g = crate::grid::make_grid(&cfg.run, &cfg.phys).unwrap();
        (g, cfg)
    }

    fn rec(s: &ModelState, g: &Grid, cfg: &Config, lim: &BoundLimits) -> DiagnosticsRecord {
        record_diagnostics(s, g, cfg, lim, &ContinuityReport::default(), &ProjectionReport::default(), 0.0)
    }

    #[test]
    fn zero_state_has_zero_norms_and_no_flags() {
        let (g, cfg) = setup();
        let s = ModelState::zeros(&g);
        let lim = BoundLimits::from_initial(&s, &cfg.boundary);
        let r = rec(&s, &g, &cfg, &lim);
        assert!(!r.any_flag());
        for (name, v) in r.columns() {
            if !name.starts_with("flag") {
                assert_eq!(v, 0.0, "{name}");
            }
        }
    }

    #[test]
    fn single_cell_excess_is_located() {
        let (g, cfg) = setup();
        let mut s = ModelState::zeros(&g);
        s.qv.fill(0.01);
        let lim = BoundLimits::from_initial(&s, &cfg.boundary);
        s.qv.set(2, 3, 1, 0.01 + 0.1);
        let r = rec(&s, &g, &cfg, &lim);
        assert!(r.flag_qv && !r.flag_qc && !r.flag_qr);
        let v = &r.violations[0];
        assert_eq!((v.field, v.i, v.j, v.k), ("qv", 2, 3, 1));
        assert!((v.excess - 0.1).abs() < 1e-15);
    }

    #[test]
    fn negative_cell_is_flagged() {
        let (g, cfg) = setup();
        let mut s = ModelState::zeros(&g);
        let lim = BoundLimits::from_initial(&s, &cfg.boundary);
        s.qr.set(0, 0, 0, -1e-11);
        assert!(rec(&s, &g, &cfg, &lim).flag_qr);
        s.qr.set(0, 0, 0, -1e-13);
        assert!(!rec(&s, &g, &cfg, &lim).flag_qr);
    }

    fn series(energy: &[f64]) -> Vec<DiagnosticsRecord> {
        energy
            .iter()
            .enumerate()
            .map(|(n, e)| {
                let mut r = DiagnosticsRecord {
                    time: n as f64 * 0.1,
                    step: n,
                    ..Default::default()
                };
                r.v.l2 = e.sqrt();
                r
            })
            .collect()
    }

    #[test]
    fn budget_short_series_is_an_error() {
        assert!(matches!(energy_budget_check(&series(&[1.0, 1.0]), 1.0, 0.0), Err(Error::SeriesTooShort(2))));
    }

    #[test]
    fn budget_zero_series_passes() {
        let r = energy_budget_check(&series(&[0.0; 5]), 1.0, 0.0).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn budget_detects_injected_growth() {
        let mut e: Vec<f64> = (0..10).map(|n| (-0.5 * n as f64).exp()).collect();
        assert!(energy_budget_check(&series(&e), 1.0, 0.0).unwrap().pass);
        e[6] = 10.0;
        let r = energy_budget_check(&series(&e), 1.0, 0.0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.worst_step, 5);
    }

    #[test]
    fn cumulative_dissipation_is_nondecreasing() {
        let mut s = series(&[1.0; 6]);
        for (n, r) in s.iter_mut().enumerate() {
            r.v.grad_sq = (n as f64).sin().abs();
        }
        let c = cumulative_dissipation(&s);
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn csv_header_matches_values() {
        let r = DiagnosticsRecord::default();
        assert_eq!(DiagnosticsRecord::csv_header().len(), r.csv_values().len());
    }
}
