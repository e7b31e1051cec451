//! The root `c(s)`, the transform `R(p, s) = 1 / D(p)` and the resolvent
//! density `R_x(s)` with its integrals.
//!
//! `D(p) = a1 p + (p - lambda)(s - a2 (eta(p) - 1)) = (lambda - p)(k(p) - s)`
//! is entire apart from the singularities of the jump transform, so `D` rather
//! than `k` is used wherever `p` may approach `lambda`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inversion::bromwich_invert;
use crate::model::{JumpLaw, ProcessParams};
use crate::quadrature::{exp_tail_quadrature_with_breaks, integrate_with_breaks};
use crate::rational_oracle::{build_partial_fractions, PartialFractionForm};
use crate::tolerances::{Tolerances, RESOLVENT_POLE_GUARD, ROOT_TOL};
use twofloat::TwoFloat;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("s must be finite and > 0, got {s}")))
    }
}

/// `D(p)`, the reciprocal of `R(p, s)`.
pub fn resolvent_denominator(params: &ProcessParams, s: f64, p: Complex64) -> Result<Complex64> {
    let eta = params.eta().lt(p)?;
    Ok(params.a1() * p + (p - params.lambda()) * (s - params.a2() * (eta - 1.0)))
}

/// `D'(p)`.
pub fn resolvent_denominator_prime(
    params: &ProcessParams,
    s: f64,
    p: Complex64,
) -> Result<Complex64> {
    let a2 = params.a2();
    let g = s - a2 * (params.eta().lt(p)? - 1.0);
    let g1 = -a2 * params.eta().lt_prime(p)?;
    Ok(params.a1() + g + (p - params.lambda()) * g1)
}

/// `D''(p)`.
pub fn resolvent_denominator_second(
    params: &ProcessParams,
    _s: f64,
    p: Complex64,
) -> Result<Complex64> {
    let a2 = params.a2();
    let g1 = -a2 * params.eta().lt_prime(p)?;
    let g2 = -a2 * params.eta().lt_second(p)?;
    Ok(2.0 * g1 + (p - params.lambda()) * g2)
}

/// `R(p, s) = 1 / D(p)`.
///
/// Fails with [`Error::ResolventPole`] where `|D(p)|` falls below the guard,
/// in particular at `p = c(s)`.
pub fn resolvent_transform(params: &ProcessParams, s: f64, p: Complex64) -> Result<Complex64> {
    check_s(s)?;
    let d = resolvent_denominator(params, s, p)?;
    if d.norm() <= RESOLVENT_POLE_GUARD * (params.c() + s) * (1.0 + p.norm()) {
        return Err(Error::ResolventPole(p));
    }
    Ok(1.0 / d)
}

/// The unique root `c(s)` of `k(p) = s` in `(0, lambda)`.
///
/// Bisection on `D`, which is negative at 0 and positive at `lambda`, then a
/// Newton polish on `k(p) - s` kept inside the final bracket.
pub fn root_c(params: &ProcessParams, s: f64) -> Result<f64> {
    check_s(s)?;
    let lambda = params.lambda();
    let d = |p: f64| -> Result<f64> { Ok(resolvent_denominator(params, s, re(p))?.re) };
    let (mut lo, mut hi) = (0.0, lambda);
    if !(d(lo)? < 0.0 && d(hi)? > 0.0) {
        return Err(Error::BracketFailure { s });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * lambda {
            break;
        }
    }
    let residual = |p: f64| -> Result<f64> { Ok(params.laplace_exponent(re(p))?.re - s) };
    let mut c = 0.5 * (lo + hi);
    if hi < lambda {
        for _ in 0..4 {
            let slope = params.laplace_exponent_prime(re(c))?.re;
            let next = c - residual(c)? / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                break;
            }
            c = next;
        }
    }
    let tol = ROOT_TOL * (1.0 + s);
    if hi < lambda && residual(c)?.abs() > tol {
        // k is very steep near lambda; the bracket midpoint is as good as it gets.
        log::debug!("root polish left residual {:e} at s = {s}", residual(c)?);
    }
    if !(c > 0.0 && c < lambda) {
        return Err(Error::BracketFailure { s });
    }
    Ok(c)
}

/// How `R_x(s)` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventMethod {
    /// Closed form for rational jump laws, delay series for Dirac jumps.
    #[default]
    Auto,
    /// Numerical Bromwich inversion of `R(p, s)` for every family.
    Bromwich,
}

#[derive(Debug, Clone)]
enum Engine {
    Rational(PartialFractionForm),
    DiracSeries(DiracSeries),
    Bromwich,
}

/// `R_x = sum_{n <= x/d} h_n(x - n d)` for jumps of fixed size `d`, obtained by
/// expanding `1 / D(p)` in powers of `exp(-p d)`.
#[derive(Debug, Clone)]
struct DiracSeries {
    d: f64,
    p0: f64,
    shift: f64,
    ratio: f64,
    lead: f64,
}

impl DiracSeries {
    fn new(params: &ProcessParams, s: f64, d: f64) -> Self {
        let cs = params.c() + s;
        let lambda = params.lambda();
        let p0 = lambda * (s + params.a2()) / cs;
        Self {
            d,
            p0,
            shift: p0 - lambda,
            ratio: params.a2() / cs,
            lead: 1.0 / cs,
        }
    }

    fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.density_terms(x, (x / self.d).floor() as usize)
    }

    /// The series cut after `terms + 1` terms. `R` jumps at every multiple of
    /// `d`, so recursions along `u, u + d, ...` fix the count themselves.
    fn density_terms(&self, x: f64, terms: usize) -> f64 {
        let mut total = 0.0;
        let mut magnitude = 0.0;
        let mut weight = self.lead;
        for n in 0..=terms {
            let y = x - n as f64 * self.d;
            // sum_k C(n, k) (shift y)^k / k! = L_n(-shift y)
            let term = weight * (self.p0 * y).exp() * laguerre(n, -self.shift * y);
            total += term;
            magnitude += term.abs();
            weight *= self.ratio;
        }
        if magnitude <= SERIES_CANCELLATION * total.abs() {
            total
        } else {
            self.density_extended(x, terms)
        }
    }

    /// The same sum in double-double arithmetic, with `exp(p0 x)` factored out.
    fn density_extended(&self, x: f64, terms: usize) -> f64 {
        let step = TwoFloat::from(self.ratio) * exp_extended(-self.p0 * self.d);
        let mut factor = TwoFloat::from(1.0);
        let mut total = TwoFloat::from(0.0);
        let mut magnitude = 0.0;
        for n in 0..=terms {
            let y = TwoFloat::from(x) - TwoFloat::new_mul(n as f64, self.d);
            let term = factor * laguerre_extended(n, y * (-self.shift));
            total += term;
            magnitude += term.hi().abs();
            factor *= step;
        }
        if magnitude > 1e26 * total.hi().abs() {
            log::warn!(
                "delay series at x = {x} cancels by {:.1e}; R_x is inaccurate",
                magnitude / total.hi().abs()
            );
        }
        self.lead * (self.p0 * x).exp() * total.hi()
    }

    /// `R'_x = sum_k ratio^k (p0 R_{x-kd} - ratio lambda R_{x-(k+1)d})`, the
    /// delay equation `R'_x = p0 R_x + ratio (R'_{x-d} - lambda R_{x-d})` unrolled.
    fn derivative(&self, x: f64) -> f64 {
        let lambda = self.p0 - self.shift;
        let steps = (x / self.d).floor() as usize;
        let mut total = 0.0;
        let mut weight = 1.0;
        for k in 0..=steps {
            let u = x - k as f64 * self.d;
            let below = if k < steps { self.density_terms(u - self.d, steps - k - 1) } else { 0.0 };
            total += weight * (self.p0 * self.density_terms(u, steps - k) - self.ratio * lambda * below);
            weight *= self.ratio;
        }
        total
    }

    /// `int_0^x R_u du` from the integrated delay equation
    /// `(c+s)(R_x - p0 S_x) - a2 (R_{x-d} - lambda S_{x-d}) = 1`.
    fn integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        // In units of lead = 1/(c+s) and ratio = a2/(c+s).
        let lambda = self.p0 - self.shift;
        let steps = (x / self.d).floor() as usize;
        let mut u = x - steps as f64 * self.d;
        let mut prev_r = 0.0;
        let mut prev_s = 0.0;
        let mut s_u = 0.0;
        for k in 0..=steps {
            let r_u = self.density_terms(u, k);
            s_u = (r_u - self.lead - self.ratio * (prev_r - lambda * prev_s)) / self.p0;
            prev_r = r_u;
            prev_s = s_u;
            u += self.d;
        }
        s_u
    }
}

/// Above this ratio of absolute to signed sum the series is redone in
/// double-double arithmetic.
const SERIES_CANCELLATION: f64 = 1e3;

fn laguerre_extended(n: usize, t: TwoFloat) -> TwoFloat {
    let (mut prev, mut cur) = (TwoFloat::from(1.0), 1.0 - t);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = ((2 * k + 1) as f64 - t) * cur - prev * k as f64;
        prev = cur;
        cur = next / (k + 1) as f64;
    }
    cur
}

/// `exp(z)` to double-double accuracy: Taylor series on `z / 2^k`, then `k`
/// squarings.
fn exp_extended(z: f64) -> TwoFloat {
    let halvings = if z.abs() > 1e-3 {
        (z.abs() / 1e-3).log2().ceil() as i32
    } else {
        0
    };
    let r = TwoFloat::from(z) / TwoFloat::from(2.0).powi(halvings);
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for j in 1..=12 {
        term = term * r / j as f64;
        sum += term;
    }
    for _ in 0..halvings {
        sum = sum * sum;
    }
    sum
}

/// Laguerre polynomial `L_n(t)` by the three-term recurrence.
fn laguerre(n: usize, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - t);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = ((2 * k + 1) as f64 - t) * cur - k as f64 * prev;
        prev = cur;
        cur = next / (k + 1) as f64;
    }
    cur
}

/// `R_x(s)` together with `S_x(s)` at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub r: f64,
    pub s: f64,
}

/// The integrals of the resolvent entering the two-sided exit formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventIntegrals {
    /// `S_x(s) = int_0^x R_u du`.
    pub s_x: f64,
    /// `int_B^inf exp(-lambda u) R_u du`.
    pub hat_r_b: f64,
    /// `int_B^inf exp(-lambda u) S_u du`.
    pub hat_s_b: f64,
}

/// Everything that depends on `(params, s)` alone: the root `c(s)`, the
/// derivative factor `r(c(s), s) = D'(c(s))` and the engine computing `R_x(s)`.
///
/// Immutable once built and cheap to share between threads.
#[derive(Debug, Clone)]
pub struct ResolventContext {
    params: ProcessParams,
    s: f64,
    c_s: f64,
    r_cs: f64,
    d2_cs: f64,
    method: ResolventMethod,
    tol: Tolerances,
    engine: Engine,
}

impl ResolventContext {
    pub fn new(params: &ProcessParams, s: f64) -> Result<Self> {
        Self::with_options(params, s, ResolventMethod::Auto, Tolerances::default())
    }

    pub fn with_options(
        params: &ProcessParams,
        s: f64,
        method: ResolventMethod,
        tol: Tolerances,
    ) -> Result<Self> {
        let c_s = root_c(params, s)?;
        let r_cs = resolvent_denominator_prime(params, s, re(c_s))?.re;
        let d2_cs = resolvent_denominator_second(params, s, re(c_s))?.re;
        let engine = match (method, params.eta()) {
            (ResolventMethod::Bromwich, _) => Engine::Bromwich,
            (ResolventMethod::Auto, JumpLaw::Dirac { d }) => {
                Engine::DiracSeries(DiracSeries::new(params, s, *d))
            }
            (ResolventMethod::Auto, _) => match build_partial_fractions(params, s) {
                Ok(form) => Engine::Rational(form),
                Err(Error::IllConditioned(a, b)) => {
                    log::warn!("poles {a} and {b} nearly coincide; falling back to Bromwich inversion");
                    Engine::Bromwich
                }
                Err(e) => return Err(e),
            },
        };
        Ok(Self {
            params: params.clone(),
            s,
            c_s,
            r_cs,
            d2_cs,
            method,
            tol,
            engine,
        })
    }

    /// A context for another `s` with the same parameters and options.
    pub fn at(&self, s: f64) -> Result<Self> {
        Self::with_options(&self.params, s, self.method, self.tol)
    }

    pub fn params(&self) -> &ProcessParams {
        &self.params
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// The root `c(s)`.
    pub fn c_s(&self) -> f64 {
        self.c_s
    }

    /// `r(c(s), s) = D'(c(s))`.
    pub fn r_cs(&self) -> f64 {
        self.r_cs
    }

    pub fn method(&self) -> ResolventMethod {
        self.method
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Name of the engine producing `R_x(s)`.
    pub fn engine_name(&self) -> &'static str {
        match self.engine {
            Engine::Rational(_) => "partial_fractions",
            Engine::DiracSeries(_) => "delay_series",
            Engine::Bromwich => "bromwich",
        }
    }

    /// The partial-fraction form, when the engine uses one.
    pub fn partial_fractions(&self) -> Option<&PartialFractionForm> {
        match &self.engine {
            Engine::Rational(f) => Some(f),
            _ => None,
        }
    }

    /// `R(p, s)`.
    pub fn transform(&self, p: Complex64) -> Result<Complex64> {
        resolvent_transform(&self.params, self.s, p)
    }

    /// `D(p)`.
    pub fn denominator(&self, p: Complex64) -> Result<Complex64> {
        resolvent_denominator(&self.params, self.s, p)
    }

    /// `(w - c(s)) R(w, s)`, analytic across `w = c(s)`.
    ///
    /// Within the removable-singularity guard of `c(s)` a Taylor expansion of
    /// `D(w) / (w - c(s))` is used.
    pub fn scaled(&self, w: Complex64) -> Result<Complex64> {
        if let Engine::Rational(f) = &self.engine {
            return Ok(f.scaled_near_root(w));
        }
        let h = w - self.c_s;
        if h.norm() < self.tol.removable_guard {
            return Ok(1.0 / (self.r_cs + 0.5 * self.d2_cs * h));
        }
        Ok(h * self.transform(w)?)
    }

    /// Points in `(lo, hi)` where `R_x(s)` is not smooth.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self.params.eta() {
            JumpLaw::Dirac { d } => {
                let first = (lo / d).floor() as i64 + 1;
                let last = (hi / d).ceil() as i64;
                (first.max(1)..last)
                    .map(|k| k as f64 * d)
                    .filter(|&t| t > lo && t < hi)
                    .take(100_000)
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// `R_x(s)`; zero for `x < 0` and `1 / (c + s)` at `x = 0`.
    pub fn density(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(invalid("x is NaN"));
        }
        if x < 0.0 {
            return Ok(0.0);
        }
        if x == 0.0 {
            return Ok(1.0 / (self.params.c() + self.s));
        }
        match &self.engine {
            Engine::Rational(f) => Ok(f.density(x)),
            Engine::DiracSeries(series) => Ok(series.density(x)),
            Engine::Bromwich => {
                bromwich_invert(|p| self.transform(p), x, self.c_s, &self.tol.bromwich)
            }
        }
    }

    /// `d R_x / dx` away from the jump points, right derivative at them.
    pub fn density_derivative(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(invalid(format!("x must be finite and >= 0, got {x}")));
        }
        match &self.engine {
            Engine::Rational(f) => Ok(f.density_derivative(x)),
            Engine::DiracSeries(series) => Ok(series.derivative(x)),
            Engine::Bromwich => {
                if x == 0.0 {
                    return Err(invalid("the inverted derivative needs x > 0"));
                }
                let r0 = 1.0 / (self.params.c() + self.s);
                bromwich_invert(|p| Ok(p * self.transform(p)? - r0), x, self.c_s, &self.tol.bromwich)
            }
        }
    }

    /// `S_x(s) = int_0^x R_u(s) du`.
    pub fn density_integral(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        match &self.engine {
            Engine::Rational(f) => Ok(f.integral(x)),
            Engine::Bromwich => bromwich_invert(
                |p| Ok(self.transform(p)? / p),
                x,
                self.c_s,
                &self.tol.bromwich,
            ),
            Engine::DiracSeries(series) => Ok(series.integral(x)),
        }
    }

    /// `int_B^inf exp(-lambda u) R_u(s) du`.
    pub fn hat_r(&self, b: f64) -> Result<f64> {
        check_b(b)?;
        if let Engine::Rational(f) = &self.engine {
            return Ok(f.hat_r(b));
        }
        let lambda = self.params.lambda();
        let decay = lambda - self.c_s;
        let scale = (-lambda * b).exp() * self.density(b)? / decay;
        let tol = self.tol.gamma_average * scale.max(f64::MIN_POSITIVE);
        if let Engine::DiracSeries(_) = &self.engine {
            // Full transform R(lambda, s) = 1 / (a1 lambda) minus the head on [0, B].
            let total = 1.0 / (self.params.a1() * lambda);
            let head = integrate_with_breaks(
                |u| Ok((-lambda * u).exp() * self.density(u)?),
                0.0,
                b,
                &self.breakpoints(0.0, b),
                0.5 * tol,
                0.0,
            )?;
            if total - head > 1e-3 * total {
                return Ok(total - head);
            }
        }
        let horizon = b + 60.0 / decay;
        exp_tail_quadrature_with_breaks(
            |u| Ok((-lambda * u).exp() * self.density(u)?),
            b,
            decay,
            tol,
            &self.breakpoints(b, horizon),
        )
    }

    /// `int_B^inf exp(-lambda u) S_u(s) du`, by parts from `hat_r`:
    /// `(exp(-lambda B) S_B + hat R_B) / lambda`.
    pub fn hat_s(&self, b: f64) -> Result<f64> {
        check_b(b)?;
        if let Engine::Rational(f) = &self.engine {
            return Ok(f.hat_s(b));
        }
        let lambda = self.params.lambda();
        Ok(((-lambda * b).exp() * self.density_integral(b)? + self.hat_r(b)?) / lambda)
    }

    /// `(S_x, hat R_B, hat S_B)`.
    pub fn integrals(&self, x: f64, b: f64) -> Result<ResolventIntegrals> {
        Ok(ResolventIntegrals {
            s_x: self.density_integral(x)?,
            hat_r_b: self.hat_r(b)?,
            hat_s_b: self.hat_s(b)?,
        })
    }

    /// `(x, R_x, S_x)` on a uniform grid `0, step, ..., x_max`.
    pub fn grid(&self, x_max: f64, step: f64) -> Result<Vec<GridPoint>> {
        if !(step > 0.0) || !(x_max >= 0.0) {
            return Err(invalid(format!(
                "grid needs step > 0 and x_max >= 0, got step {step}, x_max {x_max}"
            )));
        }
        let n = (x_max / step).round() as usize;
        let mut out = Vec::with_capacity(n + 1);
        let mut s_acc = 0.0;
        let mut prev = 0.0;
        for i in 0..=n {
            let x = (i as f64 * step).min(x_max);
            if i > 0 {
                s_acc += integrate_with_breaks(
                    |u| self.density(u),
                    prev,
                    x,
                    &self.breakpoints(prev, x),
                    self.tol.quad_abs,
                    self.tol.quad_rel,
                )?;
            }
            out.push(GridPoint {
                x,
                r: self.density(x)?,
                s: s_acc,
            });
            prev = x;
        }
        Ok(out)
    }

    /// `E[exp(-s tau^x - z T^x)]`, the transform of `m_x^s(du) = E[exp(-s tau^x); T^x in du]`.
    ///
    /// Closed form for rational laws; otherwise
    /// `exp(z x) - [R_x + (z - c) int_0^x exp(z (x - y)) R_y dy] / Z(z)` with
    /// `Z(z) = (z - c(s)) R(z, s)`.
    pub fn overshoot_lt(&self, x: f64, z: Complex64) -> Result<Complex64> {
        if !(x >= 0.0) {
            return Err(invalid(format!("level x must be >= 0, got {x}")));
        }
        if let Engine::Rational(f) = &self.engine {
            return Ok(f.overshoot_lt(x, z));
        }
        let zf = self.scaled(z)?;
        let convolution: Complex64 = if x == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let scale = (z * x).exp().norm() * self.density(x)?.max(1.0);
            integrate_with_breaks(
                |y| Ok((z * (x - y)).exp() * self.density(y)?),
                0.0,
                x,
                &self.breakpoints(0.0, x),
                self.tol.quad_abs * scale,
                self.tol.quad_rel,
            )?
        };
        Ok((z * x).exp() - (self.density(x)? + (z - self.c_s) * convolution) / zf)
    }
}

fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("B must be finite and > 0, got {b}")))
    }
}
