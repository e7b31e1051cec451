//! Exact resolvent for rational jump laws.
//!
//! When `E[exp(-p eta)] = N(p) / Q(p)` is rational, clearing denominators in
//! `D(p) = a1 p + (p - lambda)(s - a2 (eta(p) - 1))` gives
//!
//! ```text
//! R(p, s) = Q(p) / P(p),   P(p) = a1 p Q(p) + (p - lambda)((s + a2) Q(p) - a2 N(p)),
//! ```
//!
//! so `R_x(s)` is a finite exponential sum over the roots of `P`. Everything in
//! this module is closed form and serves as ground truth for the numerical paths.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{JumpLaw, ProcessParams};
use crate::poly::Poly;
use crate::tolerances::POLE_SEPARATION;

/// Numerator and denominator of the jump-law transform, if rational.
pub fn rational_parts(law: &JumpLaw) -> Option<(Poly, Poly)> {
    match law {
        JumpLaw::Dirac { .. } => None,
        JumpLaw::Exponential { mu } => Some((Poly::constant(*mu), Poly::linear(*mu))),
        JumpLaw::Erlang { k, mu } => Some((Poly::constant(mu.powi(*k as i32)), Poly::linear(*mu).pow(*k))),
        JumpLaw::HyperExponential { weights, rates } => {
            let q = rates
                .iter()
                .fold(Poly::constant(1.0), |acc, &r| acc.mul(&Poly::linear(r)));
            let mut n = Poly::constant(0.0);
            for (i, (&w, &r)) in weights.iter().zip(rates).enumerate() {
                let others = rates
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .fold(Poly::constant(w * r), |acc, (_, &rj)| {
                        acc.mul(&Poly::linear(rj))
                    });
                n = n.add(&others);
            }
            Some((n, q))
        }
    }
}

/// `R(p, s) = sum_j residues[j] / (p - poles[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionForm {
    poles: Vec<Complex64>,
    residues: Vec<Complex64>,
    root_index: usize,
    s: f64,
    lambda: f64,
    numerator: Poly,
    denominator: Poly,
}

/// Closed-form resolvent quantities at one `(x, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactResolvent {
    /// `R_x(s)`.
    pub r_x: f64,
    /// `S_x(s) = int_0^x R_u du`.
    pub s_x: f64,
    /// `int_B^inf exp(-lambda u) R_u du`.
    pub hat_r_b: f64,
    /// `int_B^inf exp(-lambda u) S_u du`.
    pub hat_s_b: f64,
}

/// Builds the partial-fraction form of `R(., s)` for a rational jump law.
pub fn build_partial_fractions(params: &ProcessParams, s: f64) -> Result<PartialFractionForm> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("s must be finite and > 0, got {s}")));
    }
    let (n, q) = rational_parts(params.eta())
        .ok_or(Error::Unsupported("partial fractions need a rational jump law"))?;
    let (a1, a2, lambda) = (params.a1(), params.a2(), params.lambda());
    let first = Poly::new(vec![0.0, a1]).mul(&q);
    let bracket = q.scale(s + a2).add(&n.scale(-a2));
    let p = first.add(&Poly::linear(-lambda).mul(&bracket));
    let mut poles = p.roots()?;
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            if (poles[i] - poles[j]).norm() < POLE_SEPARATION {
                return Err(Error::IllConditioned(poles[i], poles[j]));
            }
        }
    }
    let root_index = poles
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
        .map(|(i, _)| i)
        .expect("P has degree >= 1");
    poles[root_index].im = 0.0;
    let root = poles[root_index].re;
    if !(root > 0.0 && root < lambda) {
        return Err(Error::BracketFailure { s });
    }
    let dp = p.derivative();
    let residues = poles.iter().map(|&z| q.eval(z) / dp.eval(z)).collect();
    Ok(PartialFractionForm {
        poles,
        residues,
        root_index,
        s,
        lambda,
        numerator: q,
        denominator: p,
    })
}

impl PartialFractionForm {
    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn residues(&self) -> &[Complex64] {
        &self.residues
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// The rightmost pole, `c(s)`.
    pub fn root(&self) -> f64 {
        self.poles[self.root_index].re
    }

    /// Residue at `c(s)`, equal to `1 / r(c(s), s)`.
    pub fn root_residue(&self) -> f64 {
        self.residues[self.root_index].re
    }

    fn others(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        self.poles
            .iter()
            .zip(&self.residues)
            .enumerate()
            .filter(move |(i, _)| *i != self.root_index)
            .map(|(_, (&p, &r))| (p, r))
    }

    /// `R(p, s)` from the cleared polynomials.
    pub fn eval(&self, p: Complex64) -> Complex64 {
        self.numerator.eval(p) / self.denominator.eval(p)
    }

    /// `R(p, s)` reassembled from poles and residues.
    pub fn eval_fractions(&self, p: Complex64) -> Complex64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(&z, &r)| r / (p - z))
            .sum()
    }

    /// `R_x(s)`; zero for `x < 0`.
    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(&z, &r)| r * (z * x).exp())
            .sum::<Complex64>()
            .re
    }

    /// `d R_x / dx`.
    pub fn density_derivative(&self, x: f64) -> f64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(p, r)| r * p * (p * x).exp())
            .sum::<Complex64>()
            .re
    }

    /// `S_x(s)`.
    pub fn integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(&z, &r)| r * expm1(z * x) / z)
            .sum::<Complex64>()
            .re
    }

    /// `int_B^inf exp(-lambda u) R_u du`.
    pub fn hat_r(&self, b: f64) -> f64 {
        let l = self.lambda;
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(&z, &r)| r * ((z - l) * b).exp() / (l - z))
            .sum::<Complex64>()
            .re
    }

    /// `int_B^inf exp(-lambda u) S_u du`.
    pub fn hat_s(&self, b: f64) -> f64 {
        let l = self.lambda;
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(&z, &r)| r / z * (((z - l) * b).exp() / (l - z) - (-l * b).exp() / l))
            .sum::<Complex64>()
            .re
    }

    /// `(w - c(s)) R(w, s)` with the removable singularity at `c(s)` cancelled.
    pub fn scaled_near_root(&self, w: Complex64) -> Complex64 {
        let c = self.root();
        self.residues[self.root_index]
            + self
                .others()
                .map(|(z, r)| r * (w - c) / (w - z))
                .sum::<Complex64>()
    }

    /// `E[exp(-s tau^x - z T^x)]` for the overshoot `T^x` above level `x`.
    pub fn overshoot_lt(&self, x: f64, z: Complex64) -> Complex64 {
        let c = self.root();
        let num: Complex64 = self
            .others()
            .map(|(p, r)| r * (p - c) * (p * x).exp() / (z - p))
            .sum();
        num / self.scaled_near_root(z)
    }
}

fn expm1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-5 {
        z * (1.0 + z * (0.5 + z / 6.0))
    } else {
        z.exp() - 1.0
    }
}

/// `R_x`, `S_x`, `hat R_B` and `hat S_B` in closed form.
pub fn exact_resolvent_quantities(
    form: &PartialFractionForm,
    x: f64,
    b: f64,
    lambda: f64,
) -> ExactResolvent {
    let relabelled;
    let form = if lambda == form.lambda {
        form
    } else {
        relabelled = PartialFractionForm {
            lambda,
            ..form.clone()
        };
        &relabelled
    };
    ExactResolvent {
        r_x: form.density(x),
        s_x: form.integral(x),
        hat_r_b: form.hat_r(b),
        hat_s_b: form.hat_s(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn p0() -> ProcessParams {
        ProcessParams::new(2.0, 0.5, 1.0, JumpLaw::Exponential { mu: 1.0 }).unwrap()
    }

    fn rational_sets() -> Vec<ProcessParams> {
        vec![
            p0(),
            ProcessParams::new(1.5, 0.3, 2.0, JumpLaw::Exponential { mu: 0.7 }).unwrap(),
            ProcessParams::new(3.0, 0.6, 1.2, JumpLaw::Erlang { k: 3, mu: 2.5 }).unwrap(),
            ProcessParams::new(
                1.0,
                0.45,
                0.8,
                JumpLaw::HyperExponential {
                    weights: vec![0.3, 0.7],
                    rates: vec![0.5, 3.0],
                },
            )
            .unwrap(),
        ]
    }

    #[test]
    fn p0_closed_form() {
        let f = build_partial_fractions(&p0(), 1.0).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((f.root() - r).abs() < 1e-14);
        assert!((f.eval(c(2.0)) - c(3.0 / 11.0)).norm() < 1e-15);
        assert!((f.eval_fractions(c(2.0)) - c(3.0 / 11.0)).norm() < 1e-14);
        // (1 + p) / (3 p^2 - 1): residue at +-r is (1 +- r) / (+-6 r).
        assert!((f.root_residue() - (1.0 + r) / (6.0 * r)).abs() < 1e-14);
        let x: f64 = 1.0;
        let exact = ((1.0 + r) * (r * x).exp() - (1.0 - r) * (-r * x).exp()) / (6.0 * r);
        assert!((f.density(x) - exact).abs() < 1e-14);
        assert!((f.density(0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.density(-0.5), 0.0);
    }

    #[test]
    fn residues_sum_to_r0() {
        for params in rational_sets() {
            for s in [0.1, 1.0, 5.0] {
                let f = build_partial_fractions(&params, s).unwrap();
                let total: Complex64 = f.residues().iter().sum();
                assert!((total - c(1.0 / (params.c() + s))).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reconstruction_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for params in rational_sets() {
            let f = build_partial_fractions(&params, 0.8).unwrap();
            for _ in 0..20 {
                let p = Complex64::new(rng.random_range(0.1..4.0), rng.random_range(-5.0..5.0));
                let direct = 1.0 / (params.laplace_exponent(p).unwrap() - 0.8) / (params.lambda() - p);
                assert!((f.eval_fractions(p) - direct).norm() < 1e-10 * direct.norm());
            }
        }
    }

    #[test]
    fn density_is_real_and_growing() {
        for params in rational_sets() {
            let f = build_partial_fractions(&params, 1.0).unwrap();
            let mut prev = 0.0;
            for i in 0..=50 {
                let x = 0.1 * i as f64;
                let complex: Complex64 = f
                    .poles()
                    .iter()
                    .zip(f.residues())
                    .map(|(&z, &r)| r * (z * x).exp())
                    .sum();
                assert!(complex.im.abs() < 1e-12 * complex.re.abs());
                assert!(complex.re >= prev);
                prev = complex.re;
            }
        }
    }

    #[test]
    fn integrals_match_quadrature() {
        for params in rational_sets() {
            let f = build_partial_fractions(&params, 1.0).unwrap();
            let l = params.lambda();
            for b in [1.0, 2.0, 4.0] {
                let e = exact_resolvent_quantities(&f, 1.3, b, l);
                let sx: f64 = integrate(|u| Ok(f.density(u)), 0.0, 1.3, 1e-14, 1e-13).unwrap();
                assert!((e.s_x - sx).abs() < 1e-12);
                let hat_r: f64 = integrate(|u| Ok((-l * u).exp() * f.density(u)), b, b + 60.0 / (l - f.root()), 1e-16, 1e-13).unwrap();
                assert!((e.hat_r_b - hat_r).abs() < 1e-10 * hat_r);
                let hat_s: f64 = integrate(|u| Ok((-l * u).exp() * f.integral(u)), b, b + 60.0 / (l - f.root()), 1e-16, 1e-13).unwrap();
                assert!((e.hat_s_b - hat_s).abs() < 1e-10 * hat_s);
                // Integration by parts.
                let ibp = ((-l * b).exp() * f.integral(b) + e.hat_r_b) / l;
                assert!((e.hat_s_b - ibp).abs() < 1e-12 * ibp);
            }
        }
    }

    #[test]
    fn scaled_near_root_is_smooth() {
        let f = build_partial_fractions(&p0(), 1.0).unwrap();
        let cr = f.root();
        let at = f.scaled_near_root(c(cr));
        assert!((at.re - f.root_residue()).abs() < 1e-15);
        let w = c(cr + 0.3);
        let direct = (w - cr) * f.eval(w);
        assert!((f.scaled_near_root(w) - direct).norm() < 1e-14);
    }

    #[test]
    fn overshoot_lt_at_root_and_memoryless() {
        let params = p0();
        let f = build_partial_fractions(&params, 1.0).unwrap();
        let cr = f.root();
        let r = 1.0 / f.root_residue();
        for x in [0.0, 0.7, 2.0] {
            let at_root = f.overshoot_lt(x, c(cr)).re;
            assert!((at_root - ((cr * x).exp() - r * f.density(x))).abs() < 1e-12);
            // Exp(1) upward jumps: the overshoot is Exp(1) and independent of tau^x.
            let mass = f.overshoot_lt(x, c(0.0)).re;
            for z in [0.25, 1.5] {
                let v = f.overshoot_lt(x, c(z)).re;
                assert!((v - mass / (1.0 + z)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_dirac_and_bad_s() {
        let d = ProcessParams::new(1.0, 0.5, 1.0, JumpLaw::Dirac { d: 1.0 }).unwrap();
        assert!(matches!(build_partial_fractions(&d, 1.0), Err(Error::Unsupported(_))));
        assert!(build_partial_fractions(&p0(), 0.0).is_err());
    }
}
