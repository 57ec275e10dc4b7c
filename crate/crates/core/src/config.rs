//! Physical constants, reference profiles, boundary targets and run settings.
//!
//! Configuration files are sectioned `key = value` text:
//!
//! ```text
//! [grid]
//! nx = 32
//! ny = 32
//! np = 16
//!
//! [physics]
//! eps2 = 1e-3
//! ```
//!
//! Sections are `[physics]`, `[grid]`, `[time]`, `[boundary]`, `[initial]` and
//! `[output]`. Any key not given takes the default listed by
//! [`Config::to_config_string`] on a default config (`mpe --dump-defaults`).
//! Comments start with `#` or `;`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamMode {
    /// All horizontal and vertical viscosities equal to 1, unit-square domain.
    Nondimensional,
    /// SI eddy coefficients and a 1000 km domain.
    Physical,
}

impl ParamMode {
    fn as_str(self) -> &'static str {
        match self {
            ParamMode::Nondimensional => "nondimensional",
            ParamMode::Physical => "physical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysParams {
    pub mode: ParamMode,
    /// Dry-air gas constant, J/(kg K).
    pub r_dry: f64,
    /// Water-vapor gas constant, J/(kg K).
    pub r_vapor: f64,
    /// Specific heat at constant pressure, J/(kg K).
    pub c_p: f64,
    /// Latent heat of vaporization, J/kg.
    pub latent_heat: f64,
    pub gravity: f64,
    /// Coriolis parameter (f-plane).
    pub f0: f64,
    /// Ratio of specific heats; only enters the Exner-type factor of the theta diagnostic.
    pub gamma: f64,
    /// Autoconversion rate.
    pub k1: f64,
    /// Collection rate.
    pub k2: f64,
    /// Evaporation rate.
    pub k3: f64,
    /// Saturation mixing ratio (constant).
    pub q_vs: f64,
    /// Autoconversion threshold.
    pub q_crit: f64,
    /// Rain terminal fall speed (positive, downward).
    pub v_t: f64,
    pub mu_v: f64,
    pub mu_t: f64,
    pub mu_q: f64,
    pub nu_t: f64,
    pub nu_q: f64,
    /// Artificial vertical viscosity for v; zero for the target system.
    pub eps1: f64,
    /// Smoothing width of the regularized Heaviside switch.
    pub eps2: f64,
    pub t_star_lo: f64,
    pub t_star_hi: f64,
    /// Replace the saturation rate F by max(F, 0).
    pub use_f_plus: bool,
    /// Top pressure, Pa.
    pub p0: f64,
    /// Bottom pressure, Pa.
    pub p1: f64,
}

impl PhysParams {
    pub fn defaults(mode: ParamMode) -> Self {
        let (mu, nu) = match mode {
            ParamMode::Nondimensional => (1.0, 1.0),
            ParamMode::Physical => (1.0e5, 1.0),
        };
        PhysParams {
            mode,
            r_dry: 287.0,
            r_vapor: 461.5,
            c_p: 1004.0,
            latent_heat: 2.5e6,
            gravity: 9.81,
            f0: 1.0e-4,
            gamma: 1.4,
            k1: 1.0e-3,
            k2: 2.2,
            k3: 1.0e-3,
            q_vs: 0.02,
            q_crit: 5.0e-4,
            v_t: 5.0,
            mu_v: mu,
            mu_t: mu,
            mu_q: mu,
            nu_t: nu,
            nu_q: nu,
            eps1: 0.0,
            eps2: 1.0e-3,
            t_star_lo: 150.0,
            t_star_hi: 340.0,
            use_f_plus: true,
            p0: 1.0e4,
            p1: 1.0e5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p1 > 0.0) {
            return Err(Error::Invariant("p0 > 0 and p1 > 0 violated".into()));
        }
        if !(self.p0 < self.p1) {
            return Err(Error::Invariant("p0 < p1 violated".into()));
        }
        if !(self.eps2 > 0.0) {
            return Err(Error::Invariant("eps2 > 0 violated".into()));
        }
        if !(self.eps1 >= 0.0) {
            return Err(Error::Invariant("eps1 >= 0 violated".into()));
        }
        if !(self.t_star_lo > 0.0 && self.t_star_lo < self.t_star_hi) {
            return Err(Error::Invariant(
                "0 < T_star_lo < T_star_hi violated".into(),
            ));
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3), ("V_t", self.v_t)] {
            if !(v >= 0.0) {
                return Err(Error::Invariant(format!("{name} >= 0 violated")));
            }
        }
        if !(self.q_vs > 0.0 && self.q_vs < 1.0) {
            return Err(Error::Invariant("q_vs in (0, 1) violated".into()));
        }
        if !(self.q_crit >= 0.0 && self.q_crit < 1.0) {
            return Err(Error::Invariant("q_crit in [0, 1) violated".into()));
        }
        for (name, v) in [
            ("mu_v", self.mu_v),
            ("mu_T", self.mu_t),
            ("mu_q", self.mu_q),
            ("nu_T", self.nu_t),
            ("nu_q", self.nu_q),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Invariant(format!("{name} >= 0 violated")));
            }
        }
        for (name, v) in [
            ("R", self.r_dry),
            ("R_v", self.r_vapor),
            ("c_p", self.c_p),
            ("L", self.latent_heat),
            ("g", self.gravity),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Invariant(format!("{name} > 0 violated")));
            }
        }
        Ok(())
    }

    /// Exponent R/c_p of the potential-temperature transform.
    pub fn kappa(&self) -> f64 {
        self.r_dry / self.c_p
    }
}

/// `base + ln_slope * ln(p / p_ref)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LnProfile {
    pub base: f64,
    pub ln_slope: f64,
    pub p_ref: f64,
}

impl LnProfile {
    pub fn constant(value: f64) -> Self {
        LnProfile {
            base: value,
            ln_slope: 0.0,
            p_ref: 1.0e5,
        }
    }

    pub fn value(&self, p: f64) -> f64 {
        if self.ln_slope == 0.0 {
            self.base
        } else {
            self.base + self.ln_slope * (p / self.p_ref).ln()
        }
    }

    pub fn dp(&self, p: f64) -> f64 {
        self.ln_slope / p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceProfiles {
    pub t_bar: LnProfile,
    pub theta_bar: LnProfile,
    pub theta_h: LnProfile,
}

impl Default for ReferenceProfiles {
    fn default() -> Self {
        ReferenceProfiles {
            t_bar: LnProfile::constant(300.0),
            theta_bar: LnProfile::constant(300.0),
            theta_h: LnProfile::constant(300.0),
        }
    }
}

impl ReferenceProfiles {
    pub fn validate(&self, p0: f64, p1: f64) -> Result<()> {
        for (name, prof) in [
            ("T_bar", &self.t_bar),
            ("theta_bar", &self.theta_bar),
            ("theta_h", &self.theta_h),
        ] {
            if !(prof.p_ref > 0.0) {
                return Err(Error::Invariant(format!("{name}_p_ref > 0 violated")));
            }
            // linear in ln p, so the extremes sit at the end points
            for p in [p0, p1] {
                let v = prof.value(p);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Invariant(format!(
                        "{name} > 0 on [p0, p1] violated (value {v} at p = {p})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Robin targets: `T_surface`, `q_surface` on the bottom face, `*_lateral` on the walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryData {
    pub t_surface: f64,
    pub t_lateral: f64,
    /// Indexed by species: vapor, cloud, rain.
    pub q_surface: [f64; 3],
    pub q_lateral: [f64; 3],
}

impl Default for BoundaryData {
    fn default() -> Self {
        BoundaryData {
            t_surface: 300.0,
            t_lateral: 300.0,
            q_surface: [0.0; 3],
            q_lateral: [0.0; 3],
        }
    }
}

impl BoundaryData {
    pub fn validate(&self) -> Result<()> {
        let all = [self.t_surface, self.t_lateral]
            .into_iter()
            .chain(self.q_surface)
            .chain(self.q_lateral);
        for v in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Invariant(
                    "boundary targets must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// External heating f_T¹ added to the temperature tendency, K/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ThermalSource {
    Zero,
    Constant(f64),
    /// Amplitude at the center; horizontal position and radius are fractions
    /// of the domain extents, `p`/`p_width` are in Pa.
    Gaussian {
        amplitude: f64,
        x: f64,
        y: f64,
        p: f64,
        radius: f64,
        p_width: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitialKind {
    Rest,
    WarmBubble,
    SaturatedBlob,
    BarotropicDecay,
}

impl InitialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InitialKind::Rest => "rest",
            InitialKind::WarmBubble => "warm_bubble",
            InitialKind::SaturatedBlob => "saturated_blob",
            InitialKind::BarotropicDecay => "barotropic_decay",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "rest" => InitialKind::Rest,
            "warm_bubble" => InitialKind::WarmBubble,
            "saturated_blob" => InitialKind::SaturatedBlob,
            "barotropic_decay" => InitialKind::BarotropicDecay,
            _ => return None,
        })
    }
}

/// Shape parameters of the initial-condition menu.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialSpec {
    pub kind: InitialKind,
    /// Background temperature, K.
    pub t0: f64,
    pub bubble_amplitude: f64,
    /// Horizontal e-folding radius as a fraction of Lx.
    pub bubble_radius: f64,
    pub bubble_x: f64,
    pub bubble_y: f64,
    /// Pressure of the bubble center, Pa.
    pub bubble_p: f64,
    pub bubble_p_width: f64,
    /// Background vapor as a fraction of q_vs.
    pub qv_background: f64,
    /// Peak vapor (at the blob center) as a fraction of q_vs.
    pub qv_peak: f64,
    pub qc0: f64,
    pub qr0: f64,
    /// Amplitude of the random barotropic-decay velocity, m/s.
    pub velocity_amplitude: f64,
    pub seed: u64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            kind: InitialKind::Rest,
            t0: 300.0,
            bubble_amplitude: 0.5,
            bubble_radius: 0.15,
            bubble_x: 0.5,
            bubble_y: 0.5,
            bubble_p: 6.0e4,
            bubble_p_width: 2.0e4,
            qv_background: 0.5,
            qv_peak: 1.5,
            qc0: 0.0,
            qr0: 0.0,
            velocity_amplitude: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeScheme {
    EulerImex,
    Rk2Imex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AdvectionScheme {
    /// Second-order skew-symmetric flux form.
    Centered,
    /// First-order monotone upwind (advective form).
    Upwind,
}

impl AdvectionScheme {
    fn as_str(self) -> &'static str {
        match self {
            AdvectionScheme::Centered => "centered",
            AdvectionScheme::Upwind => "upwind",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "centered" => Some(AdvectionScheme::Centered),
            "upwind" => Some(AdvectionScheme::Upwind),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub np: usize,
    pub lx: f64,
    pub ly: f64,
    /// Fixed step; `0` selects the adaptive stable step.
    pub dt: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    /// Hard cap on the number of steps; `0` means no cap.
    pub max_steps: usize,
    pub scheme: TimeScheme,
    pub semi_implicit_sinks: bool,
    pub momentum_advection: AdvectionScheme,
    pub moisture_advection: AdvectionScheme,
    pub projection_tol: f64,
    /// Refinement passes allowed in the projection solve.
    pub projection_max_iter: usize,
    pub thermal_source: ThermalSource,
    pub initial: InitialSpec,
    pub out_dir: PathBuf,
    /// Write snapshots and a diagnostics row every this many steps.
    pub output_every: usize,
    pub write_snapshots: bool,
    pub monitors: bool,
}

impl RunConfig {
    pub fn defaults(mode: ParamMode) -> Self {
        let (lx, ly) = match mode {
            ParamMode::Nondimensional => (1.0, 1.0),
            ParamMode::Physical => (1.0e6, 1.0e6),
        };
        RunConfig {
            nx: 32,
            ny: 32,
            np: 16,
            lx,
            ly,
            dt: 0.0,
            cfl_safety: 0.5,
            t_end: 0.01,
            max_steps: 0,
            scheme: TimeScheme::Rk2Imex,
            semi_implicit_sinks: true,
            momentum_advection: AdvectionScheme::Centered,
            moisture_advection: AdvectionScheme::Upwind,
            projection_tol: 1.0e-14,
            projection_max_iter: 8,
            thermal_source: ThermalSource::Zero,
            initial: InitialSpec::default(),
            out_dir: PathBuf::from("out"),
            output_every: 1,
            write_snapshots: true,
            monitors: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny), ("np", self.np)] {
            if n < 4 {
                return Err(Error::Invariant(format!("{name} >= 4 violated")));
            }
        }
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(Error::Invariant("Lx > 0 and Ly > 0 violated".into()));
        }
        if !(self.dt >= 0.0) {
            return Err(Error::Invariant("dt >= 0 violated".into()));
        }
        if self.dt == 0.0 && !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Invariant("cfl_safety in (0, 1] violated".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Invariant("t_end >= 0 violated".into()));
        }
        if self.output_every == 0 {
            return Err(Error::Invariant("output_every >= 1 violated".into()));
        }
        if !(self.projection_tol > 0.0) {
            return Err(Error::Invariant("projection_tol > 0 violated".into()));
        }
        Ok(())
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub phys: PhysParams,
    pub profiles: ReferenceProfiles,
    pub boundary: BoundaryData,
    pub run: RunConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config::defaults(ParamMode::Nondimensional)
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Raw `section.key -> value` table with line numbers.
struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

const SECTIONS: [&str; 6] = ["physics", "grid", "time", "boundary", "initial", "output"];

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw
                .split(|c| c == '#' || c == ';')
                .next()
                .unwrap_or("")
                .trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::ConfigParse {
                        line,
                        msg: format!("unterminated section header `{content}`"),
                    })?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::ConfigParse {
                        line,
                        msg: format!("unknown section `[{name}]`"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                msg: format!("expected `key = value`, found `{content}`"),
            })?;
            let sec = section.as_deref().ok_or_else(|| Error::ConfigParse {
                line,
                msg: "key outside of any section".into(),
            })?;
            let full = format!("{sec}.{}", key.trim());
            if entries.contains_key(&full) {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("duplicate key `{full}`"),
                });
            }
            entries.insert(
                full,
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        Ok(RawConfig { entries })
    }

    fn set(&mut self, dotted: &str, value: &str) -> Result<()> {
        let (sec, key) = dotted.split_once('.').ok_or_else(|| {
            Error::Invariant(format!("override `{dotted}` must be `section.key=value`"))
        })?;
        if !SECTIONS.contains(&sec) || key.is_empty() {
            return Err(Error::Invariant(format!("unknown override key `{dotted}`")));
        }
        self.entries.insert(
            dotted.to_string(),
            Entry {
                value: value.trim().to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(e) => e.value.parse::<f64>().map_err(|_| Error::ConfigParse {
                line: e.line,
                msg: format!("`{key}`: expected a number, found `{}`", e.value),
            }),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(e) => e.value.parse::<usize>().map_err(|_| Error::ConfigParse {
                line: e.line,
                msg: format!("`{key}`: expected a nonnegative integer, found `{}`", e.value),
            }),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some(e) => e.value.parse::<u64>().map_err(|_| Error::ConfigParse {
                line: e.line,
                msg: format!("`{key}`: expected a nonnegative integer, found `{}`", e.value),
            }),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(Error::ConfigParse {
                    line: e.line,
                    msg: format!("`{key}`: expected true/false, found `{other}`"),
                }),
            },
        }
    }

    fn choice<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Option<T>,
        allowed: &str,
    ) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(e) => parse(&e.value).ok_or_else(|| Error::ConfigParse {
                line: e.line,
                msg: format!("`{key}`: expected one of {allowed}, found `{}`", e.value),
            }),
        }
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.take(key).map(|e| e.value).unwrap_or_else(|| default.to_string())
    }

    fn finish(self) -> Result<()> {
        if let Some((key, e)) = self.entries.into_iter().next() {
            return Err(Error::ConfigParse {
                line: e.line,
                msg: format!("unknown key `{key}`"),
            });
        }
        Ok(())
    }
}

impl Config {
    pub fn defaults(mode: ParamMode) -> Self {
        Config {
            phys: PhysParams::defaults(mode),
            profiles: ReferenceProfiles::default(),
            boundary: BoundaryData::default(),
            run: RunConfig::defaults(mode),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.phys.validate()?;
        self.profiles.validate(self.phys.p0, self.phys.p1)?;
        self.boundary.validate()?;
        self.run.validate()
    }

    /// Parses configuration text, then applies `section.key=value` overrides
    /// and validates the result.
    pub fn from_str_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;
        for (k, v) in overrides {
            raw.set(k, v)?;
        }
        let cfg = Config::from_raw(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Config::from_str_with_overrides(text, &[])
    }

    fn from_raw(mut raw: RawConfig) -> Result<Self> {
        let mode = raw.choice(
            "physics.mode",
            ParamMode::Nondimensional,
            |s| match s {
                "nondimensional" => Some(ParamMode::Nondimensional),
                "physical" => Some(ParamMode::Physical),
                _ => None,
            },
            "nondimensional, physical",
        )?;
        let d = Config::defaults(mode);
        let dp = &d.phys;

        let phys = PhysParams {
            mode,
            r_dry: raw.f64("physics.R", dp.r_dry)?,
            r_vapor: raw.f64("physics.R_v", dp.r_vapor)?,
            c_p: raw.f64("physics.c_p", dp.c_p)?,
            latent_heat: raw.f64("physics.L", dp.latent_heat)?,
            gravity: raw.f64("physics.g", dp.gravity)?,
            f0: raw.f64("physics.f0", dp.f0)?,
            gamma: raw.f64("physics.gamma", dp.gamma)?,
            k1: raw.f64("physics.k1", dp.k1)?,
            k2: raw.f64("physics.k2", dp.k2)?,
            k3: raw.f64("physics.k3", dp.k3)?,
            q_vs: raw.f64("physics.q_vs", dp.q_vs)?,
            q_crit: raw.f64("physics.q_crit", dp.q_crit)?,
            v_t: raw.f64("physics.V_t", dp.v_t)?,
            mu_v: raw.f64("physics.mu_v", dp.mu_v)?,
            mu_t: raw.f64("physics.mu_T", dp.mu_t)?,
            mu_q: raw.f64("physics.mu_q", dp.mu_q)?,
            nu_t: raw.f64("physics.nu_T", dp.nu_t)?,
            nu_q: raw.f64("physics.nu_q", dp.nu_q)?,
            eps1: raw.f64("physics.eps1", dp.eps1)?,
            eps2: raw.f64("physics.eps2", dp.eps2)?,
            t_star_lo: raw.f64("physics.T_star_lo", dp.t_star_lo)?,
            t_star_hi: raw.f64("physics.T_star_hi", dp.t_star_hi)?,
            use_f_plus: raw.bool("physics.use_F_plus", dp.use_f_plus)?,
            p0: raw.f64("grid.p0", dp.p0)?,
            p1: raw.f64("grid.p1", dp.p1)?,
        };

        let mut profile = |name: &str, def: LnProfile| -> Result<LnProfile> {
            Ok(LnProfile {
                base: raw.f64(&format!("physics.{name}"), def.base)?,
                ln_slope: raw.f64(&format!("physics.{name}_lnp_slope"), def.ln_slope)?,
                p_ref: raw.f64(&format!("physics.{name}_p_ref"), def.p_ref)?,
            })
        };
        let profiles = ReferenceProfiles {
            t_bar: profile("T_bar", d.profiles.t_bar)?,
            theta_bar: profile("theta_bar", d.profiles.theta_bar)?,
            theta_h: profile("theta_h", d.profiles.theta_h)?,
        };

        let thermal_source = {
            let kind = raw.string("physics.f_T", "zero");
            let amplitude = raw.f64("physics.f_T_amplitude", 0.0)?;
            let x = raw.f64("physics.f_T_x", 0.5)?;
            let y = raw.f64("physics.f_T_y", 0.5)?;
            let p = raw.f64("physics.f_T_p", 6.0e4)?;
            let radius = raw.f64("physics.f_T_radius", 0.15)?;
            let p_width = raw.f64("physics.f_T_p_width", 2.0e4)?;
            match kind.as_str() {
                "zero" => ThermalSource::Zero,
                "constant" => ThermalSource::Constant(amplitude),
                "gaussian" => ThermalSource::Gaussian {
                    amplitude,
                    x,
                    y,
                    p,
                    radius,
                    p_width,
                },
                other => {
                    return Err(Error::ConfigParse {
                        line: 0,
                        msg: format!(
                            "`physics.f_T`: expected one of zero, constant, gaussian, found `{other}`"
                        ),
                    })
                }
            }
        };

        let db = d.boundary;
        let boundary = BoundaryData {
            t_surface: raw.f64("boundary.T_surface", db.t_surface)?,
            t_lateral: raw.f64("boundary.T_lateral", db.t_lateral)?,
            q_surface: [
                raw.f64("boundary.qv_surface", db.q_surface[0])?,
                raw.f64("boundary.qc_surface", db.q_surface[1])?,
                raw.f64("boundary.qr_surface", db.q_surface[2])?,
            ],
            q_lateral: [
                raw.f64("boundary.qv_lateral", db.q_lateral[0])?,
                raw.f64("boundary.qc_lateral", db.q_lateral[1])?,
                raw.f64("boundary.qr_lateral", db.q_lateral[2])?,
            ],
        };

        let di = d.run.initial;
        let initial = InitialSpec {
            kind: raw.choice(
                "initial.kind",
                di.kind,
                InitialKind::parse,
                "rest, warm_bubble, saturated_blob, barotropic_decay",
            )?,
            t0: raw.f64("initial.T0", di.t0)?,
            bubble_amplitude: raw.f64("initial.bubble_amplitude", di.bubble_amplitude)?,
            bubble_radius: raw.f64("initial.bubble_radius", di.bubble_radius)?,
            bubble_x: raw.f64("initial.bubble_x", di.bubble_x)?,
            bubble_y: raw.f64("initial.bubble_y", di.bubble_y)?,
            bubble_p: raw.f64("initial.bubble_p", di.bubble_p)?,
            bubble_p_width: raw.f64("initial.bubble_p_width", di.bubble_p_width)?,
            qv_background: raw.f64("initial.qv_background", di.qv_background)?,
            qv_peak: raw.f64("initial.qv_peak", di.qv_peak)?,
            qc0: raw.f64("initial.qc0", di.qc0)?,
            qr0: raw.f64("initial.qr0", di.qr0)?,
            velocity_amplitude: raw.f64("initial.velocity_amplitude", di.velocity_amplitude)?,
            seed: raw.u64("initial.seed", di.seed)?,
        };

        let dr = &d.run;
        let run = RunConfig {
            nx: raw.usize("grid.nx", dr.nx)?,
            ny: raw.usize("grid.ny", dr.ny)?,
            np: raw.usize("grid.np", dr.np)?,
            lx: raw.f64("grid.Lx", dr.lx)?,
            ly: raw.f64("grid.Ly", dr.ly)?,
            dt: raw.f64("time.dt", dr.dt)?,
            cfl_safety: raw.f64("time.cfl_safety", dr.cfl_safety)?,
            t_end: raw.f64("time.t_end", dr.t_end)?,
            max_steps: raw.usize("time.max_steps", dr.max_steps)?,
            scheme: raw.choice(
                "time.scheme",
                dr.scheme,
                |s| match s {
                    "rk2" => Some(TimeScheme::Rk2Imex),
                    "euler" => Some(TimeScheme::EulerImex),
                    _ => None,
                },
                "rk2, euler",
            )?,
            semi_implicit_sinks: raw.bool("time.semi_implicit_sinks", dr.semi_implicit_sinks)?,
            momentum_advection: raw.choice(
                "time.momentum_advection",
                dr.momentum_advection,
                AdvectionScheme::parse,
                "centered, upwind",
            )?,
            moisture_advection: raw.choice(
                "time.moisture_advection",
                dr.moisture_advection,
                AdvectionScheme::parse,
                "centered, upwind",
            )?,
            projection_tol: raw.f64("time.projection_tol", dr.projection_tol)?,
            projection_max_iter: raw.usize("time.projection_max_iter", dr.projection_max_iter)?,
            thermal_source,
            initial,
            out_dir: PathBuf::from(raw.string("output.dir", &dr.out_dir.to_string_lossy())),
            output_every: raw.usize("output.every", dr.output_every)?,
            write_snapshots: raw.bool("output.snapshots", dr.write_snapshots)?,
            monitors: raw.bool("output.monitors", dr.monitors)?,
        };

        raw.finish()?;
        Ok(Config {
            phys,
            profiles,
            boundary,
            run,
        })
    }

    /// Serializes every resolved value; the output parses back to `self`.
    pub fn to_config_string(&self) -> String {
        let p = &self.phys;
        let r = &self.run;
        let b = &self.boundary;
        let i = &r.initial;
        let mut s = String::new();
        let _ = writeln!(s, "[grid]");
        let _ = writeln!(s, "nx = {}", r.nx);
        let _ = writeln!(s, "ny = {}", r.ny);
        let _ = writeln!(s, "np = {}", r.np);
        let _ = writeln!(s, "Lx = {:?}", r.lx);
        let _ = writeln!(s, "Ly = {:?}", r.ly);
        let _ = writeln!(s, "p0 = {:?}", p.p0);
        let _ = writeln!(s, "p1 = {:?}", p.p1);

        let _ = writeln!(s, "\n[physics]");
        let _ = writeln!(s, "mode = {}", p.mode.as_str());
        for (k, v) in [
            ("R", p.r_dry),
            ("R_v", p.r_vapor),
            ("c_p", p.c_p),
            ("L", p.latent_heat),
            ("g", p.gravity),
            ("f0", p.f0),
            ("gamma", p.gamma),
            ("k1", p.k1),
            ("k2", p.k2),
            ("k3", p.k3),
            ("q_vs", p.q_vs),
            ("q_crit", p.q_crit),
            ("V_t", p.v_t),
            ("mu_v", p.mu_v),
            ("mu_T", p.mu_t),
            ("mu_q", p.mu_q),
            ("nu_T", p.nu_t),
            ("nu_q", p.nu_q),
            ("eps1", p.eps1),
            ("eps2", p.eps2),
            ("T_star_lo", p.t_star_lo),
            ("T_star_hi", p.t_star_hi),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "use_F_plus = {}", p.use_f_plus);
        for (name, prof) in [
            ("T_bar", &self.profiles.t_bar),
            ("theta_bar", &self.profiles.theta_bar),
            ("theta_h", &self.profiles.theta_h),
        ] {
            let _ = writeln!(s, "{name} = {:?}", prof.base);
            let _ = writeln!(s, "{name}_lnp_slope = {:?}", prof.ln_slope);
            let _ = writeln!(s, "{name}_p_ref = {:?}", prof.p_ref);
        }
        match r.thermal_source {
            ThermalSource::Zero => {
                let _ = writeln!(s, "f_T = zero");
            }
            ThermalSource::Constant(a) => {
                let _ = writeln!(s, "f_T = constant\nf_T_amplitude = {a:?}");
            }
            ThermalSource::Gaussian {
                amplitude,
                x,
                y,
                p,
                radius,
                p_width,
            } => {
                let _ = writeln!(
                    s,
                    "f_T = gaussian\nf_T_amplitude = {amplitude:?}\nf_T_x = {x:?}\nf_T_y = {y:?}\nf_T_p = {p:?}\nf_T_radius = {radius:?}\nf_T_p_width = {p_width:?}"
                );
            }
        }

        let _ = writeln!(s, "\n[time]");
        let _ = writeln!(s, "dt = {:?}", r.dt);
        let _ = writeln!(s, "cfl_safety = {:?}", r.cfl_safety);
        let _ = writeln!(s, "t_end = {:?}", r.t_end);
        let _ = writeln!(s, "max_steps = {}", r.max_steps);
        let _ = writeln!(
            s,
            "scheme = {}",
            match r.scheme {
                TimeScheme::Rk2Imex => "rk2",
                TimeScheme::EulerImex => "euler",
            }
        );
        let _ = writeln!(s, "semi_implicit_sinks = {}", r.semi_implicit_sinks);
        let _ = writeln!(s, "momentum_advection = {}", r.momentum_advection.as_str());
        let _ = writeln!(s, "moisture_advection = {}", r.moisture_advection.as_str());
        let _ = writeln!(s, "projection_tol = {:?}", r.projection_tol);
        let _ = writeln!(s, "projection_max_iter = {}", r.projection_max_iter);

        let _ = writeln!(s, "\n[boundary]");
        let _ = writeln!(s, "T_surface = {:?}", b.t_surface);
        let _ = writeln!(s, "T_lateral = {:?}", b.t_lateral);
        for (idx, name) in ["qv", "qc", "qr"].iter().enumerate() {
            let _ = writeln!(s, "{name}_surface = {:?}", b.q_surface[idx]);
            let _ = writeln!(s, "{name}_lateral = {:?}", b.q_lateral[idx]);
        }

        let _ = writeln!(s, "\n[initial]");
        let _ = writeln!(s, "kind = {}", i.kind.as_str());
        for (k, v) in [
            ("T0", i.t0),
            ("bubble_amplitude", i.bubble_amplitude),
            ("bubble_radius", i.bubble_radius),
            ("bubble_x", i.bubble_x),
            ("bubble_y", i.bubble_y),
            ("bubble_p", i.bubble_p),
            ("bubble_p_width", i.bubble_p_width),
            ("qv_background", i.qv_background),
            ("qv_peak", i.qv_peak),
            ("qc0", i.qc0),
            ("qr0", i.qr0),
            ("velocity_amplitude", i.velocity_amplitude),
        ] {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let _ = writeln!(s, "seed = {}", i.seed);

        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", r.out_dir.to_string_lossy());
        let _ = writeln!(s, "every = {}", r.output_every);
        let _ = writeln!(s, "snapshots = {}", r.write_snapshots);
        let _ = writeln!(s, "monitors = {}", r.monitors);
        s
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<Config> {
    load_config_with_overrides(path, &[])
}

pub fn load_config_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Config::from_str_with_overrides(&text, overrides)
}

/// Splits `section.key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Invariant(format!("override `{s}` must be `section.key=value`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
