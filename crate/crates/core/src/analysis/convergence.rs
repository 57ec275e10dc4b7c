//! Regularization-limit studies.
//!
//! `Eps2`: for each ε₂ the distance `‖q_v^{ε₂} - q_v^{ε₂/10}‖` at the final
//! step. `Eps1`: for each ε₁ the distance `‖v^{ε₁} - v^{0}‖`. Every run shares
//! the step size chosen for the base configuration's initial state.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::ModelState;
use crate::operators::inner;
use crate::stepper::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EpsKind {
    Eps1,
    Eps2,
}

impl EpsKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "eps1" => Some(EpsKind::Eps1),
            "eps2" => Some(EpsKind::Eps2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsReport {
    pub which: EpsKind,
    pub values: Vec<f64>,
    pub steps: usize,
    pub dt: f64,
    /// Distance at each value, in input order.
    pub diffs: Vec<f64>,
    /// `diffs[n] / diffs[n + 1]`.
    pub ratios: Vec<f64>,
    /// Distances strictly decrease along the input order.
    pub decreasing: bool,
}

fn with_eps(cfg: &Config, which: EpsKind, eps: f64) -> Config {
    let mut c = cfg.clone();
    match which {
        EpsKind::Eps1 => c.phys.eps1 = eps,
        EpsKind::Eps2 => c.phys.eps2 = eps,
    }
    c
}

/// Runs `steps` fixed steps of size `dt` from the configured initial state.
pub fn run_fixed(cfg: Config, steps: usize, dt: f64) -> Result<ModelState> {
    let mut m = Model::new(cfg)?;
    let mut s = m.initial_state()?;
    for _ in 0..steps {
        s = m.step(&s, dt)?;
    }
    Ok(s)
}

pub fn converge_eps(cfg: &Config, which: EpsKind, values: &[f64], steps: usize) -> Result<EpsReport> {
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Invariant("epsilon values must be positive".into()));
    }
    let dt = {
        let mut m = Model::new(cfg.clone())?;
        let s = m.initial_state()?;
        m.choose_dt(&s).dt
    };
    let mut needed: Vec<f64> = values.to_vec();
    match which {
        EpsKind::Eps1 => needed.push(0.0),
        EpsKind::Eps2 => needed.extend(values.iter().map(|v| v / 10.0)),
    }
    needed.sort_by(|a, b| a.total_cmp(b));
    needed.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let states: Vec<ModelState> = needed
        .par_iter()
        .map(|&e| run_fixed(with_eps(cfg, which, e), steps, dt))
        .collect::<Result<_>>()?;
    let by_eps: BTreeMap<u64, &ModelState> = needed.iter().map(|e| e.to_bits()).zip(&states).collect();
    let m = Model::new(cfg.clone())?;
    let grid = &m.grid;
    let dist = |a: &ModelState, b: &ModelState| -> f64 {
        let d = |x: &crate::grid::ScalarField3, y: &crate::grid::ScalarField3| {
            let mut z = x.clone();
            z.axpy(-1.0, y);
            inner(&z, &z, grid)
        };
        match which {
            EpsKind::Eps1 => (d(&a.vel.v1, &b.vel.v1) + d(&a.vel.v2, &b.vel.v2)).sqrt(),
            EpsKind::Eps2 => d(&a.qv, &b.qv).sqrt(),
        }
    };
    let diffs: Vec<f64> = values
        .iter()
        .map(|&e| {
            let other = match which {
                EpsKind::Eps1 => 0.0,
                EpsKind::Eps2 => e / 10.0,
            };
            dist(by_eps[&e.to_bits()], by_eps[&other.to_bits()])
        })
        .collect();
    let ratios = diffs.windows(2).map(|w| w[0] / w[1]).collect();
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    Ok(EpsReport {
        which,
        values: values.to_vec(),
        steps,
        dt,
        diffs,
        ratios,
        decreasing,
    })
}
