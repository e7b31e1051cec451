//! First entry into `[0, B]`: the time `bar chi(y)` and position `bar X(y)`.
//!
//! Every formula is built from the overshoot measures
//! `m_x(du) = E[exp(-s tau^x); T^x in du]` and their `Exp(lambda)` average
//! `m_gamma`. For rational jump laws `m_x` has an exponential-polynomial
//! density whose coefficients are read off the transform by a Cauchy integral
//! around each pole, so restrictions to `[0, B]` and tails beyond `B` are
//! closed form. Fixed-size jumps use the killed potential: `m_x` is an atom
//! plus a density on `(0, d)` written with `R` and `R'`, and `m_gamma` is
//! `kappa exp(-c (d - u))` on `(0, d]`. Otherwise the tail beyond `B` is
//! obtained by Bromwich inversion of `(nu(z) - nu(z + q)) / q` in `q`; above a
//! fixed level this nests two inversions and is only fit for cross-checks at
//! small `x`.
//!
//! Entry values are restricted to `[0, B]`: `P(lambda, du)` and `m_gamma`
//! enter only through their mass on the interval.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exit::{exit_up_overshoot_lt, gamma_average, ExitQuery, KernelSeries};
use crate::inversion::bromwich_invert;
use crate::model::JumpLaw;
use crate::one_boundary::{down_transform, gamma_overshoot_lt, up_transform};
use crate::quadrature::{exp_tail_quadrature, integrate_with_breaks};
use crate::resolvent::ResolventContext;

const CAUCHY_NODES: usize = 64;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Where the process starts relative to `[0, B]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntryStart {
    /// At `B + v`, `v > 0`.
    Above(f64),
    /// At `-v`, `v > 0`.
    Below(f64),
    /// At `y` in `[0, B]`; entry is counted after the first exit.
    Inside(f64),
}

impl EntryStart {
    pub fn kind(&self) -> &'static str {
        match self {
            EntryStart::Above(_) => "above",
            EntryStart::Below(_) => "below",
            EntryStart::Inside(_) => "inside",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            EntryStart::Above(v) | EntryStart::Below(v) | EntryStart::Inside(v) => v,
        }
    }
}

/// Interval, start and the transform argument `z` of the entry position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntryQuery {
    pub b: f64,
    pub start: EntryStart,
    pub z: f64,
}

impl EntryQuery {
    pub fn new(b: f64, start: EntryStart, z: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid(format!("B must be finite and > 0, got {b}")));
        }
        match start {
            EntryStart::Above(v) | EntryStart::Below(v) if !(v > 0.0 && v.is_finite()) => {
                return Err(invalid(format!("start distance v must be finite and > 0, got {v}")));
            }
            EntryStart::Inside(y) if !(0.0..=b).contains(&y) => {
                return Err(invalid(format!("start y must lie in [0, {b}], got {y}")));
            }
            _ => {}
        }
        if !(z >= 0.0 && z.is_finite()) {
            return Err(invalid(format!("z must be finite and >= 0, got {z}")));
        }
        Ok(Self { b, start, z })
    }
}

/// `E[exp(-s bar chi - z bar X)]` together with its value at `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntryResult {
    pub b: f64,
    pub start_kind: &'static str,
    pub start_value: f64,
    pub s: f64,
    pub z: f64,
    pub transform: f64,
    pub mass_at_z0: f64,
}

/// Exponential-polynomial density `sum_q exp(q u) sum_n c_n u^{n-1} / (n-1)!`.
#[derive(Debug, Clone, PartialEq)]
struct ExpPoly {
    terms: Vec<(f64, Vec<f64>)>,
}

impl ExpPoly {
    /// Reads the principal parts of `f` at the given real poles off a
    /// trapezoidal Cauchy integral on a circle avoiding every other singularity.
    fn from_transform<F>(f: F, poles: &[(f64, usize)], avoid: &[Complex64]) -> Result<Self>
    where
        F: Fn(Complex64) -> Result<Complex64>,
    {
        let mut terms = Vec::with_capacity(poles.len());
        for &(q, order) in poles {
            let gap = poles
                .iter()
                .filter(|&&(p, _)| p != q)
                .map(|&(p, _)| (p - q).abs())
                .chain(avoid.iter().map(|a| (a - q).norm()))
                .fold(q.abs().max(1.0), f64::min);
            let radius = 0.45 * gap;
            let mut coeffs = vec![0.0; order];
            for k in 0..CAUCHY_NODES {
                let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / CAUCHY_NODES as f64);
                let value = f(q + radius * w)?;
                let mut power = radius * w;
                for c in coeffs.iter_mut() {
                    *c += (value * power).re;
                    power *= radius * w;
                }
            }
            for c in coeffs.iter_mut() {
                *c /= CAUCHY_NODES as f64;
            }
            terms.push((q, coeffs));
        }
        Ok(Self { terms })
    }

    fn density(&self, u: f64) -> f64 {
        self.terms
            .iter()
            .map(|(q, coeffs)| {
                let mut poly = 0.0;
                let mut power = 1.0;
                for (n, c) in coeffs.iter().enumerate() {
                    if n > 0 {
                        power *= u / n as f64;
                    }
                    poly += c * power;
                }
                (q * u).exp() * poly
            })
            .sum()
    }

    /// `int_a^inf exp(-z u) density(u) du`.
    fn tail(&self, z: f64, a: f64) -> f64 {
        self.terms
            .iter()
            .map(|(q, coeffs)| {
                let w = z - q;
                let mut total = 0.0;
                for (idx, c) in coeffs.iter().enumerate() {
                    let n = idx + 1;
                    let mut inner = 0.0;
                    let mut a_pow = 1.0;
                    for j in 0..n {
                        if j > 0 {
                            a_pow *= a / j as f64;
                        }
                        inner += a_pow / w.powi((n - j) as i32);
                    }
                    total += c * inner;
                }
                (-w * a).exp() * total
            })
            .sum()
    }
}

/// Poles of the jump transform with their orders, for rational laws.
fn jump_poles(law: &JumpLaw) -> Option<Vec<(f64, usize)>> {
    match law {
        JumpLaw::Dirac { .. } => None,
        JumpLaw::Exponential { mu } => Some(vec![(-mu, 1)]),
        JumpLaw::Erlang { k, mu } => Some(vec![(-mu, *k as usize)]),
        JumpLaw::HyperExponential { rates, .. } => {
            let mut poles: Vec<(f64, usize)> = Vec::new();
            for r in rates {
                if !poles.iter().any(|(p, _)| *p == -r) {
                    poles.push((-r, 1));
                }
            }
            Some(poles)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Level {
    At(f64),
    Gamma,
}

#[derive(Debug, Clone)]
enum Repr {
    /// Exponential-polynomial density (rational jump laws).
    Closed(ExpPoly),
    /// Fixed jumps of size `d` above a fixed level: the density comes from the
    /// killed potential, plus one atom.
    FixedAtLevel { d: f64, atom_at: f64, atom_mass: f64 },
    /// Fixed jumps of size `d`, `Exp(lambda)` level: `kappa exp(-c (d - u))` on `(0, d]`.
    FixedGamma { d: f64, kappa: f64 },
    /// Numerical inversion of the transform.
    Numeric,
}

/// The overshoot measure `m_x` above a fixed level, or its average `m_gamma`
/// over an `Exp(lambda)` level.
#[derive(Debug, Clone)]
pub struct OvershootMeasure<'a> {
    ctx: &'a ResolventContext,
    level: Level,
    repr: Repr,
}

impl<'a> OvershootMeasure<'a> {
    /// `m_x(du) = E[exp(-s tau^x); T^x in du]`.
    pub fn at_level(ctx: &'a ResolventContext, x: f64) -> Result<Self> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(invalid(format!("level x must be finite and >= 0, got {x}")));
        }
        Self::build(ctx, Level::At(x))
    }

    /// `m_gamma(du) = lambda int_0^inf exp(-lambda x) m_x(du) dx`.
    pub fn gamma(ctx: &'a ResolventContext) -> Result<Self> {
        Self::build(ctx, Level::Gamma)
    }

    fn build(ctx: &'a ResolventContext, level: Level) -> Result<Self> {
        let mut measure = Self {
            ctx,
            level,
            repr: Repr::Numeric,
        };
        let params = ctx.params();
        if let JumpLaw::Dirac { d } = params.eta() {
            let d = *d;
            measure.repr = match level {
                Level::At(x) => {
                    // Only up-jumps until the level is passed.
                    let n = (x / d).floor() + 1.0;
                    let ratio = params.a2() / (params.c() + ctx.s());
                    Repr::FixedAtLevel {
                        d,
                        atom_at: n * d - x,
                        atom_mass: ratio.powf(n),
                    }
                }
                Level::Gamma => Repr::FixedGamma {
                    d,
                    kappa: params.a2() * (params.lambda() - ctx.c_s()) / params.a1(),
                },
            };
            return Ok(measure);
        }
        if let (Some(form), Some(poles)) = (ctx.partial_fractions(), jump_poles(params.eta())) {
            let avoid: Vec<Complex64> = form.poles().to_vec();
            let closed = ExpPoly::from_transform(|z| measure.transform(z), &poles, &avoid)?;
            measure.repr = Repr::Closed(closed);
        }
        Ok(measure)
    }

    fn transform(&self, z: Complex64) -> Result<Complex64> {
        match self.level {
            Level::At(x) => self.ctx.overshoot_lt(x, z),
            Level::Gamma => gamma_overshoot_lt(self.ctx, z),
        }
    }

    /// Position and mass of the atom, present for fixed jumps above a level.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match self.repr {
            Repr::FixedAtLevel { atom_at, atom_mass, .. } => Some((atom_at, atom_mass)),
            _ => None,
        }
    }

    /// Density of the fixed-jump measure above level `x` at `u` in `(0, d)`:
    /// `a2 [(R'_w - lambda R_w) 1{w > 0} + (lambda - c) exp(c (w - x)) R_x]`,
    /// `w = x + u - d` the pre-jump position.
    fn fixed_density(&self, x: f64, d: f64, u: f64) -> Result<f64> {
        if u <= 0.0 || u >= d {
            return Ok(0.0);
        }
        let ctx = self.ctx;
        let lambda = ctx.params().lambda();
        let c = ctx.c_s();
        let w = x + u - d;
        let inner = if w > 0.0 {
            ctx.density_derivative(w)? - lambda * ctx.density(w)?
        } else {
            0.0
        };
        Ok(ctx.params().a2() * (inner + (lambda - c) * (c * (w - x)).exp() * ctx.density(x)?))
    }

    /// `int_lo^hi exp(-z u) m(du)` over the absolutely continuous part.
    fn continuous_part(&self, z: f64, lo: f64, hi: f64) -> Result<f64> {
        match self.repr {
            Repr::FixedAtLevel { d, atom_at, .. } => {
                let (lo, hi) = (lo.max(0.0), hi.min(d));
                if lo >= hi {
                    return Ok(0.0);
                }
                let Level::At(x) = self.level else { unreachable!() };
                let tol = self.ctx.tolerances();
                let breaks = if atom_at > lo && atom_at < hi { vec![atom_at] } else { Vec::new() };
                integrate_with_breaks(
                    |u| Ok((-z * u).exp() * self.fixed_density(x, d, u)?),
                    lo,
                    hi,
                    &breaks,
                    tol.quad_abs,
                    tol.quad_rel,
                )
            }
            Repr::FixedGamma { d, kappa } => {
                let (lo, hi) = (lo.max(0.0), hi.min(d));
                if lo >= hi {
                    return Ok(0.0);
                }
                // kappa exp(-c d) int_lo^hi exp((c - z) u) du
                let g = self.ctx.c_s() - z;
                let span = |t: f64| if (g * t).abs() < 1e-300 { t } else { (g * t).exp_m1() / g };
                Ok(kappa * (-self.ctx.c_s() * d).exp() * (g * lo).exp() * span(hi - lo))
            }
            _ => Err(Error::Unsupported("continuous part of a non-fixed overshoot law")),
        }
    }

    fn atom_lt(&self, z: f64, lo: f64, hi: f64) -> f64 {
        match self.atom() {
            Some((u0, mass)) if u0 > lo && u0 <= hi => mass * (-z * u0).exp(),
            Some((u0, mass)) if lo == 0.0 && u0 == 0.0 => mass,
            _ => 0.0,
        }
    }

    /// `int exp(-z u) m(du)`.
    pub fn lt(&self, z: f64) -> Result<f64> {
        check_z(z)?;
        match &self.repr {
            Repr::Closed(c) => Ok(c.tail(z, 0.0)),
            Repr::Numeric => Ok(self.transform(re(z))?.re),
            Repr::FixedAtLevel { .. } | Repr::FixedGamma { .. } => {
                Ok(self.continuous_part(z, 0.0, f64::INFINITY)? + self.atom_lt(z, 0.0, f64::INFINITY))
            }
        }
    }

    /// `int_{(b, inf)} exp(-z u) m(du)`.
    pub fn tail_lt(&self, z: f64, b: f64) -> Result<f64> {
        check_z(z)?;
        if !(b >= 0.0) {
            return Err(invalid(format!("tail point must be >= 0, got {b}")));
        }
        match &self.repr {
            Repr::Closed(c) => Ok(c.tail(z, b)),
            Repr::FixedAtLevel { .. } | Repr::FixedGamma { .. } => {
                Ok(self.continuous_part(z, b, f64::INFINITY)? + self.atom_lt(z, b, f64::INFINITY))
            }
            Repr::Numeric => {
                if b == 0.0 {
                    return self.lt(z);
                }
                let zc = re(z);
                let base = self.transform(zc)?;
                bromwich_invert(
                    |q| Ok((base - self.transform(zc + q)?) / q),
                    b,
                    0.0,
                    &self.ctx.tolerances().bromwich,
                )
            }
        }
    }

    /// `int_{[0, b]} exp(-z u) m(du)`.
    pub fn head_lt(&self, z: f64, b: f64) -> Result<f64> {
        check_z(z)?;
        match &self.repr {
            Repr::FixedAtLevel { .. } | Repr::FixedGamma { .. } => {
                Ok(self.continuous_part(z, 0.0, b)? + self.atom_lt(z, 0.0, b))
            }
            _ => Ok(self.lt(z)? - self.tail_lt(z, b)?),
        }
    }

    /// Density of the absolutely continuous part of `m` at `u >= 0`.
    pub fn density(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0 && u.is_finite()) {
            return Err(invalid(format!("u must be finite and >= 0, got {u}")));
        }
        match &self.repr {
            Repr::Closed(c) => Ok(c.density(u)),
            Repr::FixedAtLevel { d, .. } => {
                let Level::At(x) = self.level else { unreachable!() };
                self.fixed_density(x, *d, u)
            }
            Repr::FixedGamma { d, kappa } => Ok(if u > 0.0 && u <= *d {
                kappa * (-self.ctx.c_s() * (d - u)).exp()
            } else {
                0.0
            }),
            Repr::Numeric => {
                if matches!(self.ctx.params().eta(), JumpLaw::Dirac { .. }) {
                    return Err(Error::Unsupported("inverted overshoot density for fixed-size jumps"));
                }
                if u == 0.0 {
                    return Err(invalid("the inverted density needs u > 0"));
                }
                bromwich_invert(
                    |z| self.transform(z),
                    u,
                    self.ctx.params().eta().analyticity_bound(),
                    &self.ctx.tolerances().bromwich,
                )
            }
        }
    }

    /// Total mass `m([0, inf))`.
    pub fn mass(&self) -> Result<f64> {
        self.lt(0.0)
    }
}

fn check_z(z: f64) -> Result<()> {
    if z >= 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("z must be finite and >= 0, got {z}")))
    }
}

/// Density of `m_x(du) = E[exp(-s tau^x); T^x in du]` on a grid.
///
/// For rational laws the mass of the reconstruction is compared with
/// `E[exp(-s tau^x)]` and a disagreement beyond the representation tolerance
/// is an error.
pub fn overshoot_density(ctx: &ResolventContext, x: f64, u_grid: &[f64]) -> Result<Vec<f64>> {
    let m = OvershootMeasure::at_level(ctx, x)?;
    if !matches!(m.repr, Repr::Numeric) {
        let mass = m.mass()?;
        let direct = up_transform(ctx, x)?;
        if (mass - direct).abs() > ctx.tolerances().representation_mismatch {
            return Err(Error::RepresentationMismatch {
                resolvent: direct,
                kernel: mass,
            });
        }
    }
    u_grid.iter().map(|&u| m.density(u)).collect()
}

/// `T(s)`, the `gamma`-averaged tail factor and the entry-position law
/// `P(lambda, du)` restricted to `[0, B]`.
#[derive(Debug, Clone)]
pub struct EntryFactors<'a> {
    ctx: &'a ResolventContext,
    b: f64,
    t_s: f64,
    hat_t_gamma: f64,
    gamma: OvershootMeasure<'a>,
}

/// Builds the factors shared by all entry transforms on `[0, B]`.
pub fn entry_factors(ctx: &ResolventContext, b: f64) -> Result<EntryFactors<'_>> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("B must be finite and > 0, got {b}")));
    }
    let lambda = ctx.params().lambda();
    let c = ctx.c_s();
    let gamma = OvershootMeasure::gamma(ctx)?;
    let hat_t_gamma = gamma.tail_lt(c, b)?;
    let t_s = 1.0 - (1.0 - c / lambda) * hat_t_gamma * (-b * (lambda - c)).exp();
    Ok(EntryFactors {
        ctx,
        b,
        t_s,
        hat_t_gamma,
        gamma,
    })
}

impl<'a> EntryFactors<'a> {
    pub fn ctx(&self) -> &'a ResolventContext {
        self.ctx
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `T(s)`.
    pub fn t_s(&self) -> f64 {
        self.t_s
    }

    /// `lambda int_0^inf exp(-lambda x) hat T_x dx`.
    pub fn hat_t_gamma(&self) -> f64 {
        self.hat_t_gamma
    }

    /// `hat T_x = E[exp(-s tau^x - c(s) T^x); T^x > B]`.
    pub fn hat_t(&self, x: f64) -> Result<f64> {
        OvershootMeasure::at_level(self.ctx, x)?.tail_lt(self.ctx.c_s(), self.b)
    }

    /// `int exp(-z u) m_x(du)` over all `u`.
    pub fn m_lt(&self, x: f64, z: f64) -> Result<f64> {
        OvershootMeasure::at_level(self.ctx, x)?.lt(z)
    }

    /// `int_{[0, B]} exp(-z u) m_gamma(du)`.
    pub fn gamma_restricted(&self, z: f64) -> Result<f64> {
        self.gamma.head_lt(z, self.b)
    }

    /// `int_{[0, B]} exp(-z u) P(lambda, du)` with
    /// `P(lambda, du) = exp(-lambda B)(m_gamma(du) + lambda exp(lambda u) du)`.
    pub fn p_lt(&self, z: f64) -> Result<f64> {
        check_z(z)?;
        let lambda = self.ctx.params().lambda();
        let h = lambda - z;
        let uniform = if (h * self.b).abs() < 1e-12 {
            self.b
        } else {
            (h * self.b).exp_m1() / h
        };
        Ok((-lambda * self.b).exp() * (self.gamma_restricted(z)? + lambda * uniform))
    }

    fn lead(&self) -> f64 {
        1.0 - self.ctx.c_s() / self.ctx.params().lambda()
    }

    fn check(&self, q: &EntryQuery) -> Result<()> {
        if q.b != self.b {
            return Err(invalid(format!(
                "query has B = {} but the factors were built for B = {}",
                q.b, self.b
            )));
        }
        Ok(())
    }
}

/// `E[exp(-s bar chi - z bar X)]` from `B + v`:
/// `exp(-v c)(1 - c/lambda) P(z) / T(s)`.
pub fn entry_from_above(q: &EntryQuery, f: &EntryFactors) -> Result<f64> {
    f.check(q)?;
    let EntryStart::Above(v) = q.start else {
        return Err(invalid("entry_from_above needs an Above start"));
    };
    Ok((-v * f.ctx.c_s()).exp() * f.lead() * f.p_lt(q.z)? / f.t_s)
}

/// `E[exp(-s bar chi - z bar X)]` from `-v`: direct landing in `[0, B]` plus
/// overshooting `B` and coming back from above.
pub fn entry_from_below(q: &EntryQuery, f: &EntryFactors) -> Result<f64> {
    f.check(q)?;
    let EntryStart::Below(v) = q.start else {
        return Err(invalid("entry_from_below needs a Below start"));
    };
    below_value(f, v, q.z)
}

fn below_value(f: &EntryFactors, v: f64, z: f64) -> Result<f64> {
    let c = f.ctx.c_s();
    let m = OvershootMeasure::at_level(f.ctx, v)?;
    let direct = m.head_lt(z, f.b)?;
    let back = (f.b * c).exp() * f.lead() * m.tail_lt(c, f.b)? * f.p_lt(z)? / f.t_s;
    Ok(direct + back)
}

/// `(1/lambda) exp(-lambda B) R_x / hat R_B`, the lower-exit transform.
fn exit_down_value(ctx: &ResolventContext, b: f64, x: f64) -> Result<f64> {
    let lambda = ctx.params().lambda();
    Ok((-lambda * b).exp() * ctx.density(x)? / (lambda * ctx.hat_r(b)?))
}

/// Re-entry after the first exit from `y`, in the form
/// `(1 - c/lambda) T^{-1} [exp(c x) - (R_x / hat R_B) exp(-B(lambda - c)) / (lambda - c)] P(z)
///  + (1/lambda)(R_x / hat R_B)(T^{-1} - 1) P(z)`, `x = B - y`.
///
/// This misses re-entry straight after a downward exit (landing in `[0, B]`
/// on the first up-crossing of 0); [`entry_from_inside`] adds it.
pub fn entry_from_inside_as_printed(q: &EntryQuery, f: &EntryFactors) -> Result<f64> {
    f.check(q)?;
    let EntryStart::Inside(y) = q.start else {
        return Err(invalid("entry from inside needs an Inside start"));
    };
    let ctx = f.ctx;
    let lambda = ctx.params().lambda();
    let c = ctx.c_s();
    let x = f.b - y;
    let ratio = ctx.density(x)? / ctx.hat_r(f.b)?;
    let p = f.p_lt(q.z)?;
    let bracket = (c * x).exp() - ratio * (-f.b * (lambda - c)).exp() / (lambda - c);
    Ok(f.lead() / f.t_s * bracket * p + ratio / lambda * (1.0 / f.t_s - 1.0) * p)
}

/// `E[exp(-s bar chi(y) - z bar X(y))]` for `y` in `[0, B]`, entry counted
/// after the first exit.
///
/// After an upward exit the process restarts above `B`; after a downward exit
/// it restarts at `-gamma` with `gamma ~ Exp(lambda)` and may land in `[0, B]`
/// on its first up-crossing of 0 or overshoot `B` and come back from above.
pub fn entry_from_inside(q: &EntryQuery, f: &EntryFactors) -> Result<f64> {
    let printed = entry_from_inside_as_printed(q, f)?;
    let EntryStart::Inside(y) = q.start else {
        unreachable!("checked by entry_from_inside_as_printed");
    };
    let down = exit_down_value(f.ctx, f.b, f.b - y)?;
    Ok(printed + down * f.gamma_restricted(q.z)?)
}

/// [`entry_from_inside`] assembled by integrating over the exit position:
/// the upper exit through `E[exp(-s chi - c X); A^B]` times the entry law from
/// above, the lower exit through a quadrature of
/// `lambda exp(-lambda v)` against [`entry_from_below`].
pub fn entry_from_inside_composed(q: &EntryQuery, f: &EntryFactors) -> Result<f64> {
    f.check(q)?;
    let EntryStart::Inside(y) = q.start else {
        return Err(invalid("entry from inside needs an Inside start"));
    };
    let ctx = f.ctx;
    let lambda = ctx.params().lambda();
    let exit_q = ExitQuery::new(f.b, y)?;
    let up_part = exit_up_overshoot_lt(&exit_q, ctx, ctx.c_s())? * f.lead() * f.p_lt(q.z)? / f.t_s;
    let down = exit_down_value(ctx, f.b, f.b - y)?;
    let averaged = exp_tail_quadrature(
        |v| Ok(lambda * (-lambda * v).exp() * below_value(f, v.max(1e-300), q.z)?),
        0.0,
        lambda,
        ctx.tolerances().gamma_average,
    )?;
    Ok(up_part + down * averaged)
}

/// Dispatches on the start.
pub fn entry_transform(q: &EntryQuery, f: &EntryFactors) -> Result<f64> {
    match q.start {
        EntryStart::Above(_) => entry_from_above(q, f),
        EntryStart::Below(_) => entry_from_below(q, f),
        EntryStart::Inside(_) => entry_from_inside(q, f),
    }
}

/// The transform at `q.z` together with its value at `z = 0`.
pub fn evaluate(q: &EntryQuery, f: &EntryFactors) -> Result<EntryResult> {
    let transform = entry_transform(q, f)?;
    let mass_at_z0 = if q.z == 0.0 {
        transform
    } else {
        entry_transform(&EntryQuery { z: 0.0, ..*q }, f)?
    };
    Ok(EntryResult {
        b: q.b,
        start_kind: q.start.kind(),
        start_value: q.start.value(),
        s: f.ctx.s(),
        z: q.z,
        transform,
        mass_at_z0,
    })
}

/// Iterates of the entry kernels `Q_+` and `Q_-` with the contraction bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QKernelOracle {
    pub plus: KernelSeries,
    pub minus: KernelSeries,
    /// `E[exp(-s tau_B)] E[exp(-s tau^B)]`, which dominates every kernel mass.
    pub contraction_ratio: f64,
    pub bound_holds: bool,
}

/// Geometric-series oracle for `1 / T(s)`.
///
/// `Q_+(v, dl) = exp(-v c)(1 - c/lambda) exp(-lambda B) E[exp(-s tau^gamma); T^gamma - B in dl]`
/// and `Q_-(v, dl) = hat T_v exp(-B(lambda - c))(1 - c/lambda) lambda exp(-lambda l) dl`
/// are rank one, so iterate `n` is the kernel scaled by `ratio^{n-1}`. The
/// ratio of `Q_+` comes from the tail of `m_gamma`; that of `Q_-` from
/// quadrature of `l -> hat T_l` against `lambda exp(-lambda l)`. Masses are at `v = 0`.
pub fn q_kernel_iteration_oracle(ctx: &ResolventContext, b: f64, n: usize) -> Result<QKernelOracle> {
    if n == 0 {
        return Err(invalid("number of iterations must be >= 1"));
    }
    let f = entry_factors(ctx, b)?;
    let lambda = ctx.params().lambda();
    let c = ctx.c_s();
    let lead = f.lead();
    let limit = 1.0 / f.t_s;

    let plus_first = lead * (-lambda * b).exp() * f.gamma.tail_lt(0.0, b)?;
    let plus_ratio = lead * (-lambda * b).exp() * (c * b).exp() * f.gamma.tail_lt(c, b)?;

    let minus_scale = (-b * (lambda - c)).exp() * lead;
    let minus_first = f.hat_t(0.0)? * minus_scale;
    let minus_ratio = minus_scale * gamma_average(ctx, 0.0, |l| f.hat_t(l))?;

    let contraction_ratio = down_transform(ctx, b)?.transform_value * up_transform(ctx, b)?;
    let slack = 1.0 + 1e-9;
    let bound_holds = [plus_first, plus_ratio, minus_first, minus_ratio]
        .iter()
        .all(|&m| m <= contraction_ratio * slack);
    Ok(QKernelOracle {
        plus: KernelSeries::build(plus_first, plus_ratio, n, limit),
        minus: KernelSeries::build(minus_first, minus_ratio, n, limit),
        contraction_ratio,
        bound_holds,
    })
}
