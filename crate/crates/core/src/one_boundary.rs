//! One-boundary functionals.
//!
//! Downward passage below `-x` is explicit: `tau_x` and the overshoot `T_x` are
//! independent, the overshoot is `Exp(lambda)` and
//! `E[exp(-s tau_x)] = (1 - c(s)/lambda) exp(-x c(s))`.
//! Upward passage above `x` goes through the resolvent:
//!
//! ```text
//! E[exp(-s tau^x)]                 = 1 - (s lambda / c(s)) R_x(s) + s lambda S_x(s)
//! E[exp(-s tau^x - c(s) xi(tau^x))] = 1 - exp(-x c(s)) R_x(s) r(c(s), s)
//! ```
//!
//! and the position at the crossing through the double transform
//! `int exp(-p x) E[exp(-s tau^x - z xi(tau^x))] dx = (1/p)(1 - Z(p + z) / Z(z))`
//! with `Z(w) = (w - c(s)) R(w, s)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inversion::bromwich_invert;
use crate::model::JumpLaw;
use crate::resolvent::ResolventContext;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn check_level(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("level x must be finite and >= 0, got {x}")))
    }
}

/// First passage below `-x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownwardExit {
    /// `E[exp(-s tau_x)]`.
    pub transform_value: f64,
    /// Rate of the exponential overshoot `T_x`.
    pub overshoot_rate: f64,
}

impl DownwardExit {
    /// `E[exp(-s tau_x - z T_x)]`.
    pub fn joint(&self, z: f64) -> f64 {
        self.transform_value * self.overshoot_rate / (self.overshoot_rate + z)
    }

    /// Density of the overshoot.
    pub fn overshoot_density(&self, u: f64) -> f64 {
        if u < 0.0 {
            0.0
        } else {
            self.overshoot_rate * (-self.overshoot_rate * u).exp()
        }
    }
}

/// `tau_x` and `T_x` for the passage below `-x`.
pub fn down_transform(ctx: &ResolventContext, x: f64) -> Result<DownwardExit> {
    check_level(x)?;
    let lambda = ctx.params().lambda();
    Ok(DownwardExit {
        transform_value: (1.0 - ctx.c_s() / lambda) * (-x * ctx.c_s()).exp(),
        overshoot_rate: lambda,
    })
}

/// `E[exp(-s tau^x)]`.
pub fn up_transform(ctx: &ResolventContext, x: f64) -> Result<f64> {
    check_level(x)?;
    let (s, lambda, c) = (ctx.s(), ctx.params().lambda(), ctx.c_s());
    Ok(1.0 - s * lambda / c * ctx.density(x)? + s * lambda * ctx.density_integral(x)?)
}

/// `E[exp(-s tau^x - c(s) xi(tau^x))]`.
pub fn up_transform_at_root(ctx: &ResolventContext, x: f64) -> Result<f64> {
    check_level(x)?;
    Ok(1.0 - (-x * ctx.c_s()).exp() * ctx.density(x)? * ctx.r_cs())
}

/// `E[exp(-s tau^w - c(s) T^w)] = exp(c(s) w) - r(c(s), s) R_w(s)`.
pub fn up_overshoot_at_root(ctx: &ResolventContext, w: f64) -> Result<f64> {
    check_level(w)?;
    if let Some(form) = ctx.partial_fractions() {
        return Ok(form.overshoot_lt(w, Complex64::new(ctx.c_s(), 0.0)).re);
    }
    Ok((ctx.c_s() * w).exp() - ctx.r_cs() * ctx.density(w)?)
}

/// `int_0^inf exp(-p x) E[exp(-s tau^x - z xi(tau^x))] dx`.
pub fn up_joint_double_lt(ctx: &ResolventContext, p: Complex64, z: Complex64) -> Result<Complex64> {
    if p.re <= 0.0 {
        return Err(invalid(format!("double transform needs Re p > 0, got {p}")));
    }
    if z.re < 0.0 {
        return Err(invalid(format!("double transform needs Re z >= 0, got {z}")));
    }
    Ok((1.0 - ctx.scaled(p + z)? / ctx.scaled(z)?) / p)
}

/// `E[exp(-s tau^x - z xi(tau^x))]` by Bromwich inversion of the double
/// transform in `p`.
///
/// With Dirac jumps the original jumps at every multiple of `d`, which the
/// inversion cannot resolve; the convolution form of
/// [`up_overshoot_lt`] is used instead.
pub fn up_position_lt(ctx: &ResolventContext, x: f64, z: f64) -> Result<f64> {
    check_level(x)?;
    if !(z >= 0.0 && z.is_finite()) {
        return Err(invalid(format!("z must be finite and >= 0, got {z}")));
    }
    if matches!(ctx.params().eta(), JumpLaw::Dirac { .. }) {
        return Ok((-z * x).exp() * ctx.overshoot_lt(x, re(z))?.re);
    }
    if x == 0.0 {
        return Ok((1.0 - ctx.density(0.0)? / ctx.scaled(re(z))?).re);
    }
    let zc = re(z);
    let zf = ctx.scaled(zc)?;
    bromwich_invert(
        |p| Ok((1.0 - ctx.scaled(p + zc)? / zf) / p),
        x,
        0.0,
        &ctx.tolerances().bromwich,
    )
}

/// `E[exp(-s tau^x - z T^x)]` with the overshoot `T^x = xi(tau^x) - x`, for
/// complex `z` (closed form for rational jump laws).
pub fn up_overshoot_lt(ctx: &ResolventContext, x: f64, z: Complex64) -> Result<Complex64> {
    check_level(x)?;
    ctx.overshoot_lt(x, z)
}

/// `int e^{-z u} m_gamma^s(du)`, the overshoot transform averaged over an
/// `Exp(lambda)` level:
/// `lambda / (lambda - z) (1 - (lambda - c(s)) R(lambda, s) / Z(z))`.
pub fn gamma_overshoot_lt(ctx: &ResolventContext, z: Complex64) -> Result<Complex64> {
    let lambda = ctx.params().lambda();
    let c = ctx.c_s();
    // R(lambda, s) = 1 / (a1 lambda).
    let weight = (lambda - c) / (ctx.params().a1() * lambda);
    let h = z - lambda;
    if h.norm() < 1e-6 * lambda {
        // Removable: the limit is -lambda d/dz[1 - weight / Z(z)] at z = lambda.
        let step = 1e-3 * lambda;
        let zl = ctx.scaled(re(lambda))?;
        let dz = (ctx.scaled(re(lambda + step))? - ctx.scaled(re(lambda - step))?) / (2.0 * step);
        return Ok(-lambda * weight * dz / (zl * zl));
    }
    Ok(lambda / (lambda - z) * (1.0 - weight / ctx.scaled(z)?))
}

/// `E[exp(-p xi^-(nu_s))]` and `E[exp(-p xi^+(nu_s))]` for the infimum and
/// supremum of the process killed at an independent `Exp(s)` time.
pub fn supinf_transforms(ctx: &ResolventContext, p: Complex64) -> Result<(Complex64, Complex64)> {
    let lambda = ctx.params().lambda();
    let c = ctx.c_s();
    if (p - c).norm() <= 1e-12 * (1.0 + c) {
        return Err(Error::ResolventPole(p));
    }
    let inf = c / lambda * (lambda - p) / (c - p);
    let sup = ctx.s() * lambda / c * ctx.scaled(p)?;
    Ok((inf, sup))
}

/// `P[xi^-(nu_s) = 0] = c(s) / lambda`.
pub fn infimum_atom(ctx: &ResolventContext) -> f64 {
    ctx.c_s() / ctx.params().lambda()
}

/// `P[xi^+(nu_s) = 0] = (lambda / c(s)) s / (s + c)`.
pub fn supremum_atom(ctx: &ResolventContext) -> f64 {
    let s = ctx.s();
    ctx.params().lambda() / ctx.c_s() * s / (s + ctx.params().c())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProcessParams;
    use crate::quadrature::integrate;
    use crate::resolvent::ResolventMethod;
    use crate::tolerances::Tolerances;

    fn p0() -> ProcessParams {
        ProcessParams::new(2.0, 0.5, 1.0, JumpLaw::Exponential { mu: 1.0 }).unwrap()
    }

    fn erlang() -> ProcessParams {
        ProcessParams::new(1.3, 0.35, 1.6, JumpLaw::Erlang { k: 2, mu: 1.8 }).unwrap()
    }

    fn dirac() -> ProcessParams {
        ProcessParams::new(1.5, 0.4, 1.2, JumpLaw::Dirac { d: 0.8 }).unwrap()
    }

    fn ctx(params: &ProcessParams) -> ResolventContext {
        ResolventContext::new(params, 1.0).unwrap()
    }

    #[test]
    fn down_examples() {
        let c = ctx(&p0());
        let d0 = down_transform(&c, 0.0).unwrap();
        assert!((d0.transform_value - 0.422_649_730_810_374).abs() < 1e-12);
        let d1 = down_transform(&c, 1.0).unwrap();
        assert!((d1.transform_value - 0.237_268_760_048_391).abs() < 1e-12);
        assert!((d1.joint(0.5) - d1.transform_value / 1.5).abs() < 1e-15);
        assert_eq!(d1.overshoot_density(-1.0), 0.0);
    }

    #[test]
    fn up_examples() {
        let c = ctx(&p0());
        let u0 = up_transform(&c, 0.0).unwrap();
        assert!((u0 - (1.0 - 3f64.sqrt() / 3.0)).abs() < 1e-14);
        let mut prev = 1.0;
        for i in 0..40 {
            let v = up_transform(&c, 0.25 * i as f64).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        let r0 = up_transform_at_root(&c, 0.0).unwrap();
        assert!((r0 - (1.0 - c.r_cs() / 3.0)).abs() < 1e-14);
        for params in [p0(), erlang(), dirac()] {
            let c = ctx(&params);
            for i in 0..20 {
                let v = up_transform_at_root(&c, 0.3 * i as f64).unwrap();
                assert!(v > 0.0 && v < 1.0);
            }
        }
    }

    #[test]
    fn double_transform_against_x_quadrature() {
        // z = 0: int exp(-p x) E[exp(-s tau^x)] dx.
        let c = ctx(&p0());
        for p in [0.5, 1.0, 3.0] {
            let f = up_joint_double_lt(&c, re(p), re(0.0)).unwrap().re;
            let q: f64 = integrate(
                |x| Ok((-p * x).exp() * up_transform(&c, x)?),
                0.0,
                80.0 / p,
                1e-14,
                1e-12,
            )
            .unwrap();
            assert!((f - q).abs() < 1e-6 * q, "p={p}: {f} vs {q}");
        }
    }

    #[test]
    fn double_transform_scaling_and_continuity() {
        let c = ctx(&p0());
        let cs = c.c_s();
        for z in [0.0, 0.5] {
            let p = 1e6;
            let f = up_joint_double_lt(&c, re(p), re(z)).unwrap();
            let at0 = up_position_lt(&c, 0.0, z).unwrap();
            assert!((p * f.re - at0).abs() < 1e-5);
        }
        for params in [p0(), dirac()] {
            let c = ctx(&params);
            let cs = c.c_s();
            let lo = up_joint_double_lt(&c, re(0.7), re(cs - 1e-3)).unwrap();
            let hi = up_joint_double_lt(&c, re(0.7), re(cs + 1e-3)).unwrap();
            let mid = up_joint_double_lt(&c, re(0.7), re(cs)).unwrap();
            assert!((lo - hi).norm() < 1e-3);
            assert!((lo + hi - 2.0 * mid).norm() < 1e-5);
        }
        assert!(up_joint_double_lt(&c, re(-1.0), re(cs)).is_err());
    }

    #[test]
    fn position_lt_consistency() {
        for params in [p0(), erlang(), dirac()] {
            let c = ctx(&params);
            for x in [0.0, 0.5, 1.0, 2.5] {
                let at_root = up_position_lt(&c, x, c.c_s()).unwrap();
                assert!((at_root - up_transform_at_root(&c, x).unwrap()).abs() < 1e-6);
                let at_zero = up_position_lt(&c, x, 0.0).unwrap();
                assert!((at_zero - up_transform(&c, x).unwrap()).abs() < 1e-6, "x={x}");
            }
        }
    }

    #[test]
    fn position_lt_matches_overshoot_lt() {
        for params in [p0(), erlang(), dirac()] {
            let c = ctx(&params);
            for x in [0.4, 1.0, 2.0] {
                for z in [0.25, 0.9, 2.0] {
                    let a = up_position_lt(&c, x, z).unwrap();
                    let b = (-z * x).exp() * up_overshoot_lt(&c, x, re(z)).unwrap().re;
                    assert!((a - b).abs() < 1e-7, "x={x} z={z}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn gamma_average_closed_form() {
        for params in [p0(), erlang()] {
            let c = ctx(&params);
            let lambda = params.lambda();
            for z in [re(0.0), re(0.3), re(c.c_s()), Complex64::new(0.4, 1.5)] {
                let closed = gamma_overshoot_lt(&c, z).unwrap();
                let quad: Complex64 = integrate(
                    |x| Ok(lambda * (-lambda * x).exp() * up_overshoot_lt(&c, x, z)?),
                    0.0,
                    60.0 / (lambda - c.c_s()),
                    1e-14,
                    1e-12,
                )
                .unwrap();
                assert!((closed - quad).norm() < 1e-9, "z={z}: {closed} vs {quad}");
            }
            let near = gamma_overshoot_lt(&c, re(lambda * (1.0 + 1e-7))).unwrap();
            let off = gamma_overshoot_lt(&c, re(lambda * (1.0 + 1e-3))).unwrap();
            assert!((near - off).norm() < 1e-2 * off.norm());
        }
    }

    #[test]
    fn supinf_examples() {
        let c = ctx(&p0());
        let (i0, s0) = supinf_transforms(&c, re(0.0)).unwrap();
        assert!((i0.re - 1.0).abs() < 1e-14 && (s0.re - 1.0).abs() < 1e-14);
        let (inf, _) = supinf_transforms(&c, re(-1e9)).unwrap();
        assert!((inf.re - infimum_atom(&c)).abs() < 1e-8);
        let (_, sup) = supinf_transforms(&c, re(1e9)).unwrap();
        assert!((sup.re - supremum_atom(&c)).abs() < 1e-8);
        assert!(supinf_transforms(&c, re(c.c_s())).is_err());
    }

    #[test]
    fn bromwich_engine_agrees() {
        let exact = ctx(&p0());
        let brom = ResolventContext::with_options(&p0(), 1.0, ResolventMethod::Bromwich, Tolerances::default()).unwrap();
        for x in [0.0, 1.0, 3.0] {
            let a = up_transform(&exact, x).unwrap();
            let b = up_transform(&brom, x).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
    }
}
