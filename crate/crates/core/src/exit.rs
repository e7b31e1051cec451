//! First exit from `[0, B]` started at `y`, with `x = B - y`.
//!
//! Two representations of the lower-exit transform are computed. The resolvent
//! form is
//!
//! ```text
//! E[exp(-s chi); A_0] = (1/lambda) exp(-lambda B) R_x / hat R_B
//! ```
//!
//! and the kernel form is
//! `(1 - c/lambda) exp(-y c) (1 - E[exp(-s tau^x - c xi(tau^x))]) / K(s)` with
//! `K(s) = 1 - E[exp(-s tau_B)] E[exp(-s tau^{gamma+B} - c T^{gamma+B})]`, the
//! latter average taken over an independent `gamma ~ Exp(lambda)` by quadrature.
//! They are required to agree. The overshoot on `A_0` is `Exp(lambda)` and
//! independent of the exit time.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::inversion::gaver_stehfest_weights;
use crate::one_boundary::{
    down_transform, up_overshoot_at_root, up_overshoot_lt, up_transform, up_transform_at_root,
};
use crate::quadrature::{exp_tail_quadrature_with_breaks, integrate_with_breaks};
use crate::resolvent::ResolventContext;

/// Interval `[0, B]` and start point `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitQuery {
    pub b: f64,
    pub y: f64,
}

impl ExitQuery {
    pub fn new(b: f64, y: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid(format!("B must be finite and > 0, got {b}")));
        }
        if !(0.0..=b).contains(&y) {
            return Err(invalid(format!("start y must lie in [0, B] = [0, {b}], got {y}")));
        }
        Ok(Self { b, y })
    }

    /// Distance to the upper boundary, `B - y`.
    pub fn x(&self) -> f64 {
        self.b - self.y
    }
}

/// Which formula produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Pure resolvent expressions (`R_x`, `S_x`, `hat R_B`, `hat S_B`).
    Resolvent,
    /// One-boundary transforms combined through the kernel factor `K(s)`.
    Kernel,
}

/// Both representations of `E[exp(-s chi(y)); A_0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitDown {
    pub resolvent_form: f64,
    pub kernel_form: f64,
}

/// Exit transforms at one `(B, y, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitResult {
    pub b: f64,
    pub y: f64,
    pub s: f64,
    /// `E[exp(-s chi(y)); A_0]`.
    pub down: f64,
    /// `E[exp(-s chi(y)); A^B]`.
    pub up: f64,
    /// `int_0^inf exp(-s t) P[chi(y) > t] dt`.
    pub survival_lt: f64,
    /// `K(s)`.
    pub k_s: f64,
    /// The lower-exit value from the other representation.
    pub down_cross_check: f64,
    /// The upper-exit value from the other representation.
    pub up_cross_check: f64,
    /// `down + up + s survival_lt - 1`.
    pub check_residual: f64,
    pub down_method: Representation,
    pub up_method: Representation,
}

/// `lambda int_0^inf exp(-lambda u) f(u + B) du` for `|f| <= 1`, which sets the decay rate.
pub(crate) fn gamma_average<F>(ctx: &ResolventContext, b: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let lambda = ctx.params().lambda();
    let tol = ctx.tolerances().gamma_average;
    let horizon = 60.0 / lambda;
    let breaks: Vec<f64> = ctx
        .breakpoints(b, b + horizon)
        .into_iter()
        .map(|w| w - b)
        .collect();
    exp_tail_quadrature_with_breaks(
        |u| Ok(lambda * (-lambda * u).exp() * f(u + b)?),
        0.0,
        lambda,
        tol,
        &breaks,
    )
}

/// `E[exp(-s tau^{gamma+B} - c(s) T^{gamma+B})]` by quadrature over `gamma`.
pub fn at_root_gamma_average(ctx: &ResolventContext, b: f64) -> Result<f64> {
    gamma_average(ctx, b, |w| up_overshoot_at_root(ctx, w))
}

/// `E[exp(-s tau^{gamma+B})]` by quadrature over `gamma`.
pub fn up_gamma_average(ctx: &ResolventContext, b: f64) -> Result<f64> {
    gamma_average(ctx, b, |w| up_transform(ctx, w))
}

/// `K(s) = 1 - E[exp(-s tau_B)] E[exp(-s tau^{gamma+B} - c(s) T^{gamma+B})]`.
pub fn k_factor(ctx: &ResolventContext, b: f64) -> Result<f64> {
    ExitQuery::new(b, 0.0)?;
    let down = down_transform(ctx, b)?.transform_value;
    Ok(1.0 - down * at_root_gamma_average(ctx, b)?)
}

fn down_resolvent_form(q: &ExitQuery, ctx: &ResolventContext) -> Result<f64> {
    let lambda = ctx.params().lambda();
    Ok((-lambda * q.b).exp() * ctx.density(q.x())? / (lambda * ctx.hat_r(q.b)?))
}

fn down_kernel_form(q: &ExitQuery, ctx: &ResolventContext, k: f64) -> Result<f64> {
    let first = down_transform(ctx, q.y)?.transform_value;
    Ok(first * (1.0 - up_transform_at_root(ctx, q.x())?) / k)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `E[exp(-s chi(y)); A_0]` in both representations.
///
/// Fails with [`Error::RepresentationMismatch`] when they disagree beyond the
/// configured relative tolerance.
pub fn exit_down(q: &ExitQuery, ctx: &ResolventContext) -> Result<ExitDown> {
    let k = k_factor(ctx, q.b)?;
    exit_down_with_k(q, ctx, k)
}

fn exit_down_with_k(q: &ExitQuery, ctx: &ResolventContext, k: f64) -> Result<ExitDown> {
    let resolvent_form = down_resolvent_form(q, ctx)?;
    let kernel_form = down_kernel_form(q, ctx, k)?;
    if relative_gap(resolvent_form, kernel_form) > ctx.tolerances().representation_mismatch {
        return Err(Error::RepresentationMismatch {
            resolvent: resolvent_form,
            kernel: kernel_form,
        });
    }
    Ok(ExitDown {
        resolvent_form,
        kernel_form,
    })
}

/// `E[exp(-s chi(y)); A^B] = E[exp(-s tau^x)] - E[exp(-s chi); A_0] E[exp(-s tau^{gamma+B})]`.
pub fn exit_up(q: &ExitQuery, ctx: &ResolventContext) -> Result<f64> {
    let down = down_resolvent_form(q, ctx)?;
    Ok(up_transform(ctx, q.x())? - down * up_gamma_average(ctx, q.b)?)
}

/// `E[exp(-s chi(y)); A^B]` from resolvent expressions only:
/// `1 - (R_x / hat R_B)(exp(-lambda B)/lambda + s lambda hat S_B) + s lambda S_x`.
pub fn exit_up_resolvent_form(q: &ExitQuery, ctx: &ResolventContext) -> Result<f64> {
    let lambda = ctx.params().lambda();
    let s = ctx.s();
    let ints = ctx.integrals(q.x(), q.b)?;
    let ratio = ctx.density(q.x())? / ints.hat_r_b;
    Ok(1.0 - ratio * ((-lambda * q.b).exp() / lambda + s * lambda * ints.hat_s_b)
        + s * lambda * ints.s_x)
}

/// `E[exp(-s chi(y) - z X(y)); A^B]`.
pub fn exit_up_overshoot_lt(q: &ExitQuery, ctx: &ResolventContext, z: f64) -> Result<f64> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(invalid(format!("z must be finite and >= 0, got {z}")));
    }
    let zc = num_complex::Complex64::new(z, 0.0);
    let down = down_resolvent_form(q, ctx)?;
    let direct = up_overshoot_lt(ctx, q.x(), zc)?.re;
    let averaged = gamma_average(ctx, q.b, |w| Ok(up_overshoot_lt(ctx, w, zc)?.re))?;
    Ok(direct - down * averaged)
}

/// `int_0^inf exp(-s t) P[chi(y) > t] dt = lambda (R_x / hat R_B) hat S_B - lambda S_x`.
pub fn survival_lt(q: &ExitQuery, ctx: &ResolventContext) -> Result<f64> {
    let lambda = ctx.params().lambda();
    let ints = ctx.integrals(q.x(), q.b)?;
    Ok(lambda * ctx.density(q.x())? / ints.hat_r_b * ints.hat_s_b - lambda * ints.s_x)
}

/// All exit transforms at one point, with the cross-checks.
///
/// The lower exit comes from the resolvent form, the upper exit from the
/// one-boundary combination; the residual of `down + up + s survival = 1` is
/// reported and must stay below the closure tolerance.
pub fn evaluate(q: &ExitQuery, ctx: &ResolventContext) -> Result<ExitResult> {
    let k = k_factor(ctx, q.b)?;
    let down = exit_down_with_k(q, ctx, k)?;
    let up = exit_up(q, ctx)?;
    let up_alt = exit_up_resolvent_form(q, ctx)?;
    let surv = survival_lt(q, ctx)?;
    let residual = down.resolvent_form + up + ctx.s() * surv - 1.0;
    if residual.abs() > ctx.tolerances().closure_violation {
        return Err(Error::ClosureViolation(residual));
    }
    Ok(ExitResult {
        b: q.b,
        y: q.y,
        s: ctx.s(),
        down: down.resolvent_form,
        up,
        survival_lt: surv,
        k_s: k,
        down_cross_check: down.kernel_form,
        up_cross_check: up_alt,
        check_residual: residual,
        down_method: Representation::Resolvent,
        up_method: Representation::Kernel,
    })
}

/// `P[chi(y) > t]` by Gaver-Stehfest inversion in `s`.
///
/// A context is built for each abscissa `k ln 2 / t` (in parallel) with the
/// parameters and options of `ctx`. Small negative values produced by the
/// inversion are clamped to 0 and values above 1 to 1, with a warning.
pub fn survival_time_domain(q: &ExitQuery, ctx: &ResolventContext, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be finite and > 0, got {t}")));
    }
    let order = ctx.tolerances().gaver_stehfest_order;
    let weights = gaver_stehfest_weights(order)?;
    let ln2t = std::f64::consts::LN_2 / t;
    let values: Vec<f64> = (1..=order)
        .into_par_iter()
        .map(|k| {
            let c = ctx.at(k as f64 * ln2t)?;
            survival_lt(q, &c)
        })
        .collect::<Result<_>>()?;
    let raw = ln2t * weights.iter().zip(&values).map(|(w, v)| w * v).sum::<f64>();
    if raw < 0.0 {
        log::warn!("survival inversion at t = {t} gave {raw:e}; clamped to 0");
        return Ok(0.0);
    }
    if raw > 1.0 {
        log::warn!("survival inversion at t = {t} gave 1 + {:e}; clamped to 1", raw - 1.0);
        return Ok(1.0);
    }
    Ok(raw)
}

/// Masses and partial sums of a rank-one kernel iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSeries {
    /// Mass ratio between successive iterates.
    pub ratio: f64,
    /// Total masses of the iterates `n = 1..N` at `v = 0`.
    pub masses: Vec<f64>,
    /// `sum_{k=1}^{n} ratio^{k-1}` for `n = 1..N`.
    pub partial_sums: Vec<f64>,
    /// The closed-form limit of the partial sums.
    pub limit: f64,
}

impl KernelSeries {
    pub(crate) fn build(first_mass: f64, ratio: f64, n: usize, limit: f64) -> Self {
        let mut masses = Vec::with_capacity(n);
        let mut partial_sums = Vec::with_capacity(n);
        let mut power = 1.0;
        let mut sum = 0.0;
        for _ in 0..n {
            masses.push(first_mass * power);
            sum += power;
            partial_sums.push(sum);
            power *= ratio;
        }
        Self {
            ratio,
            masses,
            partial_sums,
            limit,
        }
    }

    /// `ratio^n / (1 - ratio)`, the geometric tail after `n` terms.
    pub fn tail_bound(&self) -> f64 {
        self.ratio.powi(self.masses.len() as i32) / (1.0 - self.ratio)
    }
}

/// Iterates of the two exit kernels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelOracle {
    pub plus: KernelSeries,
    pub minus: KernelSeries,
}

fn simpson<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, panels: usize) -> Result<f64> {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

/// Geometric-series oracle for `1 / K(s)`.
///
/// Both kernels are rank one in this model:
/// `K_-(v, du) = (1 - c/lambda) exp(-c B) E[exp(-s tau^{v+B} - c T^{v+B})] lambda exp(-lambda u) du` and
/// `K_+(v, du) = (1 - c/lambda) exp(-c (v + B)) E[exp(-s tau^{gamma+B}); T^{gamma+B} in du]`,
/// so the `n`-th iterate is the kernel scaled by `ratio^{n-1}`. The ratio of
/// `K_-` is integrated by composite Simpson over the resolvent expression and
/// that of `K_+` by adaptive quadrature over the overshoot transform, so the
/// two series share no numerical path with each other or with [`k_factor`].
pub fn kernel_iteration_oracle(q: &ExitQuery, ctx: &ResolventContext, n: usize) -> Result<KernelOracle> {
    if n == 0 {
        return Err(invalid("number of iterations must be >= 1"));
    }
    let b = q.b;
    let lambda = ctx.params().lambda();
    let c = ctx.c_s();
    let lead = (1.0 - c / lambda) * (-c * b).exp();
    let limit = 1.0 / k_factor(ctx, b)?;

    // K_-: ratio = int lambda e^{-lambda l} K_-(l, R+) dl / lead ... collapses to
    // lead * lambda int e^{-lambda l} E[exp(-s tau^{l+B} - c T^{l+B})] dl.
    let upper = 60.0 / (lambda - c);
    let breaks = ctx.breakpoints(b, b + upper);
    let minus_ratio = if breaks.is_empty() {
        lead * simpson(
            |l| Ok(lambda * (-lambda * l).exp() * up_overshoot_at_root(ctx, l + b)?),
            0.0,
            upper,
            4000,
        )?
    } else {
        let mut edges = vec![0.0];
        edges.extend(breaks.iter().map(|w| w - b));
        edges.push(upper);
        let mut total = 0.0;
        for e in edges.windows(2) {
            total += simpson(
                |l| Ok(lambda * (-lambda * l).exp() * up_overshoot_at_root(ctx, l + b)?),
                e[0],
                e[1],
                200,
            )?;
        }
        lead * total
    };
    let minus_first = lead * up_overshoot_at_root(ctx, b)?;

    // K_+: total mass of E[exp(-s tau^{gamma+B} - c T^{gamma+B})] through the
    // overshoot transform at z = c.
    let zc = num_complex::Complex64::new(c, 0.0);
    let tol = ctx.tolerances();
    let plus_avg: f64 = integrate_with_breaks(
        |l| Ok(lambda * (-lambda * l).exp() * up_overshoot_lt(ctx, l + b, zc)?.re),
        0.0,
        upper,
        &breaks.iter().map(|w| w - b).collect::<Vec<_>>(),
        tol.quad_abs,
        tol.quad_rel,
    )?;
    let plus_ratio = lead * plus_avg;
    let plus_first = lead * up_gamma_average(ctx, b)?;

    Ok(KernelOracle {
        plus: KernelSeries::build(plus_first, plus_ratio, n, limit),
        minus: KernelSeries::build(minus_first, minus_ratio, n, limit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpLaw, ProcessParams};
    use crate::rational_oracle::build_partial_fractions;
    use crate::resolvent::ResolventMethod;
    use crate::tolerances::Tolerances;

    fn p0() -> ProcessParams {
        ProcessParams::new(2.0, 0.5, 1.0, JumpLaw::Exponential { mu: 1.0 }).unwrap()
    }

    fn hyper() -> ProcessParams {
        ProcessParams::new(
            1.0,
            0.45,
            0.8,
            JumpLaw::HyperExponential {
                weights: vec![0.3, 0.7],
                rates: vec![0.5, 3.0],
            },
        )
        .unwrap()
    }

    fn dirac() -> ProcessParams {
        ProcessParams::new(1.5, 0.4, 1.2, JumpLaw::Dirac { d: 0.8 }).unwrap()
    }

    #[test]
    fn query_validation() {
        assert!(ExitQuery::new(0.0, 0.0).is_err());
        assert!(ExitQuery::new(2.0, 2.5).is_err());
        assert!(ExitQuery::new(2.0, -0.1).is_err());
        assert_eq!(ExitQuery::new(2.0, 0.5).unwrap().x(), 1.5);
    }

    #[test]
    fn k_factor_closed_form() {
        // K(s) = (lambda - c) r exp((lambda - c) B) hat R_B.
        for params in [p0(), hyper(), dirac()] {
            let ctx = ResolventContext::new(&params, 1.0).unwrap();
            let l = params.lambda();
            let c = ctx.c_s();
            for b in [0.5, 2.0, 4.0] {
                let k = k_factor(&ctx, b).unwrap();
                let closed = (l - c) * ctx.r_cs() * ((l - c) * b).exp() * ctx.hat_r(b).unwrap();
                assert!(k > 0.0 && k < 1.0);
                assert!((k - closed).abs() < 1e-9, "{k} vs {closed}");
            }
        }
        let ctx = ResolventContext::new(&p0(), 1.0).unwrap();
        assert!((k_factor(&ctx, 40.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn p0_point_against_exact_resolvent() {
        let params = p0();
        let ctx = ResolventContext::new(&params, 1.0).unwrap();
        let q = ExitQuery::new(2.0, 1.0).unwrap();
        let f = build_partial_fractions(&params, 1.0).unwrap();
        let exact = (-2.0f64).exp() * f.density(1.0) / f.hat_r(2.0);
        let d = exit_down(&q, &ctx).unwrap();
        assert!((d.resolvent_form - exact).abs() < 1e-12);
        assert!((d.kernel_form - exact).abs() < 1e-8);
        let brom = ResolventContext::with_options(&params, 1.0, ResolventMethod::Bromwich, Tolerances::default()).unwrap();
        let n = exit_down(&q, &brom).unwrap();
        assert!((n.resolvent_form - exact).abs() < 1e-8);
    }

    #[test]
    fn down_at_upper_boundary_is_positive() {
        let ctx = ResolventContext::new(&p0(), 1.0).unwrap();
        let q = ExitQuery::new(2.0, 2.0).unwrap();
        assert!(exit_down(&q, &ctx).unwrap().resolvent_form > 0.0);
    }

    #[test]
    fn closure_and_duals() {
        for params in [p0(), hyper(), dirac()] {
            for s in [0.5, 1.0, 2.0] {
                let ctx = ResolventContext::new(&params, s).unwrap();
                for b in [1.0, 2.0, 4.0] {
                    for y in [0.0, 0.25 * b, 0.5 * b, 0.75 * b, b] {
                        let q = ExitQuery::new(b, y).unwrap();
                        let r = evaluate(&q, &ctx).unwrap();
                        assert!(r.check_residual.abs() < 1e-8, "{r:?}");
                        assert!(relative_gap(r.down, r.down_cross_check) < 1e-6);
                        assert!((r.up - r.up_cross_check).abs() < 1e-6, "{r:?}");
                        assert!(r.down > 0.0 && r.up > 0.0 && r.down + r.up < 1.0);
                        assert!(r.survival_lt > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn limits() {
        let params = p0();
        let ctx = ResolventContext::new(&params, 1.0).unwrap();
        let c = ctx.c_s();
        let big = 40.0 / c;
        let q = ExitQuery::new(big, 1.0).unwrap();
        let d = exit_down(&q, &ctx).unwrap().resolvent_form;
        let one_sided = down_transform(&ctx, 1.0).unwrap().transform_value;
        assert!((d - one_sided).abs() < 1e-4);
        let q = ExitQuery::new(30.0, 0.0).unwrap();
        let u = exit_up(&q, &ctx).unwrap();
        assert!((u - up_transform(&ctx, 30.0).unwrap()).abs() < 1e-6);
        // s large: s * survival -> 1.
        let fast = ResolventContext::new(&params, 1e4).unwrap();
        let q = ExitQuery::new(2.0, 1.0).unwrap();
        assert!((1e4 * survival_lt(&q, &fast).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn monotone_in_s() {
        let params = p0();
        let q = ExitQuery::new(2.0, 0.7).unwrap();
        let mut prev: Option<ExitResult> = None;
        for s in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let ctx = ResolventContext::new(&params, s).unwrap();
            let r = evaluate(&q, &ctx).unwrap();
            if let Some(p) = prev {
                assert!(r.down < p.down && r.up < p.up && r.survival_lt < p.survival_lt);
            }
            prev = Some(r);
        }
    }

    #[test]
    fn up_overshoot_examples() {
        let ctx = ResolventContext::new(&p0(), 1.0).unwrap();
        let q = ExitQuery::new(2.0, 1.0).unwrap();
        let at0 = exit_up_overshoot_lt(&q, &ctx, 0.0).unwrap();
        assert!((at0 - exit_up(&q, &ctx).unwrap()).abs() < 1e-8);
        let mut prev = at0;
        for z in [0.5, 1.0, 5.0, 50.0] {
            let v = exit_up_overshoot_lt(&q, &ctx, z).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        // Exp(1) upward jumps: the overshoot is Exp(1) on A^B too.
        let v = exit_up_overshoot_lt(&q, &ctx, 0.5).unwrap();
        assert!((v - at0 / 1.5).abs() < 1e-9);
    }

    #[test]
    fn time_domain_survival() {
        let ctx = ResolventContext::new(&p0(), 1.0).unwrap();
        let q = ExitQuery::new(2.0, 1.0).unwrap();
        let early = survival_time_domain(&q, &ctx, 1e-3).unwrap();
        assert!((early - 1.0).abs() < 5e-3);
        let mut prev = 1.0;
        for t in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let v = survival_time_domain(&q, &ctx, t).unwrap();
            assert!((0.0..=1.0).contains(&v) && v <= prev + 1e-9);
            prev = v;
        }
    }

    #[test]
    fn kernel_series() {
        let ctx = ResolventContext::new(&p0(), 1.0).unwrap();
        let q = ExitQuery::new(2.0, 1.0).unwrap();
        let oracle = kernel_iteration_oracle(&q, &ctx, 20).unwrap();
        let closed = 1.0 / oracle.minus.limit;
        let down_b = down_transform(&ctx, 2.0).unwrap().transform_value;
        let expected_ratio = down_b * at_root_gamma_average(&ctx, 2.0).unwrap();
        for series in [&oracle.plus, &oracle.minus] {
            assert!(series.ratio > 0.0 && series.ratio < 1.0);
            assert!((series.ratio - expected_ratio).abs() < 1e-9);
            assert!(series.partial_sums.windows(2).all(|w| w[1] >= w[0]));
            let last = *series.partial_sums.last().unwrap();
            assert!((last - series.limit).abs() <= series.tail_bound() * (1.0 + 1e-6) + 1e-9);
            assert!((series.masses[1] / series.masses[0] - series.ratio).abs() < 1e-14);
        }
        assert!((1.0 - closed - expected_ratio).abs() < 1e-12);
        let one = kernel_iteration_oracle(&q, &ctx, 1).unwrap();
        assert_eq!(one.minus.partial_sums, vec![1.0]);
        assert!((one.minus.masses[0] - (1.0 - ctx.c_s()) * (-2.0 * ctx.c_s()).exp() * up_overshoot_at_root(&ctx, 2.0).unwrap()).abs() < 1e-15);
    }
}
