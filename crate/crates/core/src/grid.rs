//! Discrete domain `[0, Lx] x [0, Ly] x (p0, p1)` and field storage.
//!
//! Cells are collocated (Arakawa A) in the horizontal. Cell centers sit at
//! `x_i = (i + 1/2) dx`, `y_j = (j + 1/2) dy`, `p_k = p0 + (k + 1/2) dp`, so the
//! walls and the two pressure boundaries lie on cell faces. The vertical
//! velocity `w` lives on the `np + 1` pressure faces, `p_faces[0] = p0` (top,
//! Γ_u) to `p_faces[np] = p1` (bottom, Γ_i).
//!
//! Every cell-centered field carries one ghost layer on each side. Storage is
//! k-major: `((k + 1) * (ny + 2) + (j + 1)) * (nx + 2) + (i + 1)` for signed
//! indices `i ∈ [-1, nx]`, `j ∈ [-1, ny]`, `k ∈ [-1, np]`. Snapshot files store
//! the interior only, in the same k, j, i nesting order.

use serde::Serialize;

use crate::config::{PhysParams, RunConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub np: usize,
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub dy: f64,
    pub p0: f64,
    pub p1: f64,
    pub dp: f64,
    pub p_levels: Vec<f64>,
    pub p_faces: Vec<f64>,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, np: usize, lx: f64, ly: f64, p0: f64, p1: f64) -> Result<Self> {
        if nx < 1 || ny < 1 || np < 1 {
            return Err(Error::Invariant("grid sizes must be positive".into()));
        }
        if !(lx > 0.0 && ly > 0.0) {
            return Err(Error::Invariant("Lx > 0 and Ly > 0 violated".into()));
        }
        if !(p0 > 0.0 && p0 < p1) {
            return Err(Error::Invariant("0 < p0 < p1 violated".into()));
        }
        let dp = (p1 - p0) / np as f64;
        let p_faces: Vec<f64> = (0..=np)
            .map(|k| {
                if k == np {
                    p1
                } else {
                    p0 + k as f64 * dp
                }
            })
            .collect();
        let p_levels = (0..np).map(|k| 0.5 * (p_faces[k] + p_faces[k + 1])).collect();
        Ok(Grid {
            nx,
            ny,
            np,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
            p0,
            p1,
            dp,
            p_levels,
            p_faces,
        })
    }

    pub fn x(&self, i: isize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn y(&self, j: isize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    /// Pressure at level `k`, extended linearly to the ghost levels.
    pub fn p(&self, k: isize) -> f64 {
        self.p0 + (k as f64 + 0.5) * self.dp
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dp
    }

    pub fn volume(&self) -> f64 {
        self.lx * self.ly * (self.p1 - self.p0)
    }

    pub fn interior_len(&self) -> usize {
        self.nx * self.ny * self.np
    }

    pub fn boundary_region(&self, i: isize, j: isize, k: isize) -> Result<BoundaryRegion> {
        let (nx, ny, np) = (self.nx as isize, self.ny as isize, self.np as isize);
        if !(-1..=nx).contains(&i) || !(-1..=ny).contains(&j) || !(-1..=np).contains(&k) {
            return Err(Error::Invariant(format!(
                "index ({i}, {j}, {k}) outside the ghost-extended grid"
            )));
        }
        // lateral first: shared edges take the wall condition
        if i <= 0 || i >= nx - 1 || j <= 0 || j >= ny - 1 {
            return Ok(BoundaryRegion::GammaL);
        }
        if k >= np - 1 {
            return Ok(BoundaryRegion::GammaI);
        }
        if k <= 0 {
            return Ok(BoundaryRegion::GammaU);
        }
        Ok(BoundaryRegion::Interior)
    }

    /// Every face of the domain boundary with its region.
    pub fn boundary_faces(&self) -> Vec<(BoundaryFace, BoundaryRegion)> {
        let mut out = Vec::with_capacity(2 * self.nx * self.ny + 2 * (self.nx + self.ny) * self.np);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push((BoundaryFace::Top { i, j }, BoundaryRegion::GammaU));
                out.push((BoundaryFace::Bottom { i, j }, BoundaryRegion::GammaI));
            }
        }
        for k in 0..self.np {
            for j in 0..self.ny {
                out.push((BoundaryFace::West { j, k }, BoundaryRegion::GammaL));
                out.push((BoundaryFace::East { j, k }, BoundaryRegion::GammaL));
            }
            for i in 0..self.nx {
                out.push((BoundaryFace::South { i, k }, BoundaryRegion::GammaL));
                out.push((BoundaryFace::North { i, k }, BoundaryRegion::GammaL));
            }
        }
        out
    }
}

/// Builds the grid described by a validated configuration.
pub fn make_grid(run: &RunConfig, phys: &PhysParams) -> Result<Grid> {
    run.validate()?;
    Grid::new(run.nx, run.ny, run.np, run.lx, run.ly, phys.p0, phys.p1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryRegion {
    Interior,
    /// Bottom, p = p1.
    GammaI,
    /// Top, p = p0.
    GammaU,
    /// Lateral walls.
    GammaL,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryFace {
    Top { i: usize, j: usize },
    Bottom { i: usize, j: usize },
    West { j: usize, k: usize },
    East { j: usize, k: usize },
    South { i: usize, k: usize },
    North { i: usize, k: usize },
}

/// Cell-centered scalar with one ghost layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    nx: usize,
    ny: usize,
    np: usize,
    pub data: Vec<f64>,
}

impl ScalarField3 {
    pub fn zeros(grid: &Grid) -> Self {
        Self::with_dims(grid.nx, grid.ny, grid.np)
    }

    pub fn with_dims(nx: usize, ny: usize, np: usize) -> Self {
        ScalarField3 {
            nx,
            ny,
            np,
            data: vec![0.0; (nx + 2) * (ny + 2) * (np + 2)],
        }
    }

    /// Fills interior and ghosts from a function of position.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for k in -1..=grid.np as isize {
            for j in -1..=grid.ny as isize {
                for i in -1..=grid.nx as isize {
                    let v = f(grid.x(i), grid.y(j), grid.p(k));
                    out.set(i, j, k, v);
                }
            }
        }
        out
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.np)
    }

    #[inline]
    pub fn idx(&self, i: isize, j: isize, k: isize) -> usize {
        debug_assert!(i >= -1 && i <= self.nx as isize);
        debug_assert!(j >= -1 && j <= self.ny as isize);
        debug_assert!(k >= -1 && k <= self.np as isize);
        (((k + 1) as usize * (self.ny + 2)) + (j + 1) as usize) * (self.nx + 2) + (i + 1) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize, k: isize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, k: isize, v: f64) {
        let n = self.idx(i, j, k);
        self.data[n] = v;
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.get(i as isize, j as isize, k as isize)
    }

    /// Stride of one horizontal slab (ghosts included).
    pub fn slab_len(&self) -> usize {
        (self.nx + 2) * (self.ny + 2)
    }

    pub fn row_len(&self) -> usize {
        self.nx + 2
    }

    /// Interior values in k, j, i order.
    pub fn interior(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.np).flat_map(move |k| {
            (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| self.at(i, j, k)))
        })
    }

    pub fn set_interior_from(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.nx * self.ny * self.np);
        let mut it = values.iter();
        for k in 0..self.np as isize {
            for j in 0..self.ny as isize {
                for i in 0..self.nx as isize {
                    self.set(i, j, k, *it.next().unwrap());
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.interior().all(f64::is_finite)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.interior()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.interior().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self += a * other` over all storage, ghosts included.
    pub fn axpy(&mut self, a: f64, other: &ScalarField3) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.data {
            *x *= a;
        }
    }

    /// `self = a * self + b * other`.
    pub fn combine(&mut self, a: f64, b: f64, other: &ScalarField3) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x = a * *x + b * y;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// Horizontal cell-centered 2D array with one ghost layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    nx: usize,
    ny: usize,
    pub data: Vec<f64>,
}

impl Field2 {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Field2 {
            nx,
            ny,
            data: vec![0.0; (nx + 2) * (ny + 2)],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn idx(&self, i: isize, j: isize) -> usize {
        (j + 1) as usize * (self.nx + 2) + (i + 1) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let n = self.idx(i, j);
        self.data[n] = v;
    }

    /// Homogeneous Neumann ghost fill (mirror of the adjacent interior value).
    pub fn fill_neumann_ghosts(&mut self) {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        for j in 0..ny {
            self.set(-1, j, self.get(0, j));
            self.set(nx, j, self.get(nx - 1, j));
        }
        for i in -1..=nx {
            self.set(i, -1, self.get(i, 0));
            self.set(i, ny, self.get(i, ny - 1));
        }
    }
}

/// Face-centered vertical velocity, `np + 1` faces per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    nx: usize,
    ny: usize,
    np: usize,
    pub data: Vec<f64>,
}

impl FaceField {
    pub fn zeros(nx: usize, ny: usize, np: usize) -> Self {
        FaceField {
            nx,
            ny,
            np,
            data: vec![0.0; nx * ny * (np + 1)],
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, kf: usize) -> usize {
        (kf * self.ny + j) * self.nx + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, kf: usize) -> f64 {
        self.data[self.idx(i, j, kf)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, kf: usize, v: f64) {
        let n = self.idx(i, j, kf);
        self.data[n] = v;
    }

    /// Average of the two faces bounding cell `k`.
    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> f64 {
        0.5 * (self.get(i, j, k) + self.get(i, j, k + 1))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.np)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalVelocity {
    pub v1: ScalarField3,
    pub v2: ScalarField3,
    pub w: FaceField,
}

impl HorizontalVelocity {
    pub fn zeros(grid: &Grid) -> Self {
        HorizontalVelocity {
            v1: ScalarField3::zeros(grid),
            v2: ScalarField3::zeros(grid),
            w: FaceField::zeros(grid.nx, grid.ny, grid.np),
        }
    }

    /// Largest horizontal speed component over the interior.
    pub fn max_speed(&self) -> f64 {
        self.v1.max_abs().max(self.v2.max_abs())
    }
}

/// Index of the moist species in per-species arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Species {
    Vapor = 0,
    Cloud = 1,
    Rain = 2,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::Vapor, Species::Cloud, Species::Rain];

    pub fn name(self) -> &'static str {
        match self {
            Species::Vapor => "qv",
            Species::Cloud => "qc",
            Species::Rain => "qr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub vel: HorizontalVelocity,
    pub t: ScalarField3,
    pub qv: ScalarField3,
    pub qc: ScalarField3,
    pub qr: ScalarField3,
    /// Geopotential diagnosed from the hydrostatic relation (baroclinic part plus Φ_s).
    pub phi: ScalarField3,
    pub phi_s: Field2,
    pub time: f64,
    pub step: usize,
}

impl ModelState {
    pub fn zeros(grid: &Grid) -> Self {
        ModelState {
            vel: HorizontalVelocity::zeros(grid),
            t: ScalarField3::zeros(grid),
            qv: ScalarField3::zeros(grid),
            qc: ScalarField3::zeros(grid),
            qr: ScalarField3::zeros(grid),
            phi: ScalarField3::zeros(grid),
            phi_s: Field2::zeros(grid.nx, grid.ny),
            time: 0.0,
            step: 0,
        }
    }

    pub fn q(&self, s: Species) -> &ScalarField3 {
        match s {
            Species::Vapor => &self.qv,
            Species::Cloud => &self.qc,
            Species::Rain => &self.qr,
        }
    }

    pub fn q_mut(&mut self, s: Species) -> &mut ScalarField3 {
        match s {
            Species::Vapor => &mut self.qv,
            Species::Cloud => &mut self.qc,
            Species::Rain => &mut self.qr,
        }
    }

    /// Named prognostic and diagnostic fields, in snapshot order.
    pub fn named_fields(&self) -> [(&'static str, &ScalarField3); 7] {
        [
            ("v1", &self.vel.v1),
            ("v2", &self.vel.v2),
            ("T", &self.t),
            ("qv", &self.qv),
            ("qc", &self.qc),
            ("qr", &self.qr),
            ("Phi", &self.phi),
        ]
    }

    /// First non-finite prognostic field, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.named_fields()
            .into_iter()
            .find(|(_, f)| !f.is_finite())
            .map(|(n, _)| n)
            .or_else(|| {
                (!self.vel.w.data.iter().all(|v| v.is_finite())).then_some("w")
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Config, ParamMode};

    #[test]
    fn uniform_pressure_partition() {
        let g = Grid::new(8, 8, 4, 1.0, 1.0, 1.0e4, 1.0e5).unwrap();
        assert_eq!(g.p_faces, vec![1.0e4, 3.25e4, 5.5e4, 7.75e4, 1.0e5]);
        for k in 0..4 {
            assert!(g.p_faces[k] < g.p_levels[k] && g.p_levels[k] < g.p_faces[k + 1]);
        }
    }

    #[test]
    fn spacing_from_extent() {
        let g = Grid::new(8, 8, 4, 2.0 * std::f64::consts::PI, 1.0, 1.0e4, 1.0e5).unwrap();
        assert!((g.dx - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn config_rejects_single_level() {
        let mut cfg = Config::defaults(ParamMode::Nondimensional);
        cfg.run.np = 1;
        assert!(make_grid(&cfg.run, &cfg.phys).is_err());
    }

    #[test]
    fn region_tags() {
        let g = Grid::new(8, 8, 6, 1.0, 1.0, 1.0e4, 1.0e5).unwrap();
        assert_eq!(g.boundary_region(4, 4, 6).unwrap(), BoundaryRegion::GammaI);
        assert_eq!(g.boundary_region(4, 4, 5).unwrap(), BoundaryRegion::GammaI);
        assert_eq!(g.boundary_region(4, 4, -1).unwrap(), BoundaryRegion::GammaU);
        assert_eq!(g.boundary_region(0, 3, 2).unwrap(), BoundaryRegion::GammaL);
        assert_eq!(g.boundary_region(-1, 3, 6).unwrap(), BoundaryRegion::GammaL);
        assert_eq!(g.boundary_region(4, 4, 3).unwrap(), BoundaryRegion::Interior);
        assert!(g.boundary_region(9, 0, 0).is_err());
    }

    #[test]
    fn face_partition_counts() {
        let g = Grid::new(7, 5, 4, 1.0, 1.0, 1.0e4, 1.0e5).unwrap();
        let faces = g.boundary_faces();
        let count = |r| faces.iter().filter(|(_, t)| *t == r).count();
        assert_eq!(count(BoundaryRegion::GammaI), 35);
        assert_eq!(count(BoundaryRegion::GammaU), 35);
        assert_eq!(count(BoundaryRegion::GammaL), 2 * (7 + 5) * 4);
        let mut uniq: Vec<_> = faces.iter().map(|(f, _)| format!("{f:?}")).collect();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), faces.len());
    }

    #[test]
    fn storage_is_k_major() {
        let f = ScalarField3::with_dims(3, 2, 2);
        assert_eq!(f.idx(-1, -1, -1), 0);
        assert_eq!(f.idx(0, -1, -1), 1);
        assert_eq!(f.idx(-1, 0, -1), 5);
        assert_eq!(f.idx(-1, -1, 0), 20);
    }
}
