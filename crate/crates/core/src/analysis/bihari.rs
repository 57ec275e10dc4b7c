//! Bihari–LaSalle and Gronwall bounds.
//!
//! For `u(t) ≤ f₀ + ∫ α β g(u)`, the bound is `u ≤ 𝒢⁻¹(𝒢(f₀) + I(t))` with
//! `𝒢(r) = ∫₀ʳ ds / g(s)` and `I` the integral of `αβ`. The bound exists while
//! the argument stays below `sup 𝒢`; the first time it does not is reported as
//! the blow-up time of the bound.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Nonlinearity {
    /// `g ≡ 1` (plain Gronwall).
    One,
    /// `1 + s + s²`.
    Poly1UU2,
    /// `1 + s² + s⁴`.
    Poly1U2U4,
    /// `1 + s²`.
    Poly1U2,
    /// Piecewise-linear through `(s, g)` pairs with increasing `s` starting at
    /// 0; held constant past the last point.
    Table(Vec<(f64, f64)>),
}

impl Nonlinearity {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::One => 1.0,
            Nonlinearity::Poly1UU2 => 1.0 + s + s * s,
            Nonlinearity::Poly1U2U4 => {
                let s2 = s * s;
                1.0 + s2 + s2 * s2
            }
            Nonlinearity::Poly1U2 => 1.0 + s * s,
            Nonlinearity::Table(pts) => {
                let n = pts.partition_point(|&(x, _)| x <= s);
                if n == 0 {
                    pts[0].1
                } else if n == pts.len() {
                    pts[n - 1].1
                } else {
                    let ((x0, g0), (x1, g1)) = (pts[n - 1], pts[n]);
                    g0 + (g1 - g0) * (s - x0) / (x1 - x0)
                }
            }
        }
    }

    /// Whether `𝒢` is bounded above (superlinear growth).
    pub fn finite_range(&self) -> bool {
        matches!(self, Nonlinearity::Poly1UU2 | Nonlinearity::Poly1U2U4 | Nonlinearity::Poly1U2)
    }

    /// Positive and strictly increasing on the table nodes.
    pub fn validate(&self) -> Result<(), String> {
        if let Nonlinearity::Table(pts) = self {
            if pts.len() < 2 || pts[0].0 != 0.0 {
                return Err("table needs at least two points starting at s = 0".into());
            }
            for w in pts.windows(2) {
                if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                    return Err("table must be strictly increasing in s and g".into());
                }
            }
            if !(pts[0].1 > 0.0) {
                return Err("g must be positive".into());
            }
        }
        Ok(())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod estimate and `|K - G|` on `[a, b]`.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for n in 0..7 {
        let x = h * XGK[n];
        let s = f(c - x) + f(c + x);
        k += WGK[n] * s;
        if n % 2 == 1 {
            g += WG[n / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive 7/15-point Gauss–Kronrod quadrature.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, tol, 40)
}

const QUAD_TOL: f64 = 1e-15;

/// `𝒢(r) = ∫₀ʳ ds / g(s)`.
pub fn capital_g(g: &Nonlinearity, r: f64) -> f64 {
    match g {
        Nonlinearity::One => r,
        _ => integrate(|s| 1.0 / g.eval(s), 0.0, r, QUAD_TOL * r.abs().max(1.0)),
    }
}

/// `sup 𝒢`, infinite unless `g` grows superlinearly.
pub fn capital_g_sup(g: &Nonlinearity) -> f64 {
    if !g.finite_range() {
        return f64::INFINITY;
    }
    // s = u / (1 - u) maps [0, 1) onto [0, ∞)
    integrate(
        |u| {
            let d = 1.0 - u;
            if d <= 0.0 {
                0.0
            } else {
                1.0 / (g.eval(u / d) * d * d)
            }
        },
        0.0,
        1.0,
        QUAD_TOL,
    )
}

/// `𝒢⁻¹(y)` for `0 ≤ y < sup 𝒢` by bracketing and bisection; `None` outside
/// the range.
pub fn capital_g_inverse(g: &Nonlinearity, y: f64) -> Option<f64> {
    if matches!(g, Nonlinearity::One) {
        return (y >= 0.0).then_some(y);
    }
    if !(y >= 0.0) || y >= capital_g_sup(g) {
        return None;
    }
    if y == 0.0 {
        return Some(0.0);
    }
    let mut hi = 1.0;
    while capital_g(g, hi) < y {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if capital_g(g, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BihariBound {
    pub times: Vec<f64>,
    /// `+∞` from the blow-up time on.
    pub bound: Vec<f64>,
    pub blow_up_time: Option<f64>,
}

/// Bound `u(t) ≤ 𝒢⁻¹(𝒢(f₀) + I(t))` on `times`, with `I` nondecreasing.
pub fn bihari_lasalle_bound(f0: f64, integral: impl Fn(f64) -> f64, g: &Nonlinearity, times: &[f64]) -> BihariBound {
    let g0 = capital_g(g, f0);
    let sup = capital_g_sup(g);
    let mut bound = Vec::with_capacity(times.len());
    let mut blow_up_time = None;
    let mut prev: Option<f64> = None;
    for &t in times {
        let y = g0 + integral(t);
        if blow_up_time.is_none() && y >= sup {
            // refine between the previous sample and t
            let (mut a, mut b) = (prev.unwrap_or(t), t);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if g0 + integral(m) >= sup {
                    b = m;
                } else {
                    a = m;
                }
            }
            blow_up_time = Some(b);
        }
        bound.push(if blow_up_time.is_some() {
            f64::INFINITY
        } else {
            capital_g_inverse(g, y).unwrap_or(f64::INFINITY)
        });
        prev = Some(t);
    }
    BihariBound {
        times: times.to_vec(),
        bound,
        blow_up_time,
    }
}

/// `f₀ exp(∫₀ᵗ rate)` with the integral a cumulative trapezoid over `(times, rates)`.
pub fn gronwall_bound(f0: f64, times: &[f64], rates: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), rates.len());
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for n in 0..times.len() {
        if n > 0 {
            acc += 0.5 * (times[n] - times[n - 1]) * (rates[n] + rates[n - 1]);
        }
        out.push(f0 * acc.exp());
    }
    out
}
