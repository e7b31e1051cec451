//! The process: a compound Poisson process with intensity `c` whose jumps are
//! negative and `Exp(lambda)`-distributed with probability `a`, and positive
//! with law `eta` otherwise.
//!
//! Its Laplace exponent `k(p) = ln E[exp(-p xi(1))]` is
//!
//! ```text
//! k(p) = a1 p / (lambda - p) + a2 (E[exp(-p eta)] - 1),   a1 = a c,  a2 = (1 - a) c.
//! ```

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tolerances::POLE_GUARD_REL;

/// Law of the positive jumps.
///
/// Only families with closed-form Laplace transforms are supported; every
/// formula in the crate consumes `eta` through its transform alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpLaw {
    /// Deterministic jump of size `d`.
    Dirac { d: f64 },
    Exponential { mu: f64 },
    /// Sum of `k` independent `Exp(mu)` variables.
    Erlang { k: u32, mu: f64 },
    /// Mixture of exponentials, `P[phase i] = weights[i]`.
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
}

fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::Dirac { d } => positive_finite("d", *d),
            JumpLaw::Exponential { mu } => positive_finite("mu", *mu),
            JumpLaw::Erlang { k, mu } => {
                if *k == 0 {
                    return Err(invalid("Erlang shape k must be >= 1"));
                }
                positive_finite("mu", *mu)
            }
            JumpLaw::HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(invalid(
                        "hyper-exponential weights and rates must be non-empty and of equal length",
                    ));
                }
                for &r in rates {
                    positive_finite("rate", r)?;
                }
                if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return Err(invalid("hyper-exponential weights must be > 0"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!(
                        "hyper-exponential weights must sum to 1, got {total}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Whether the transform is a rational function of `p`.
    pub fn is_rational(&self) -> bool {
        !matches!(self, JumpLaw::Dirac { .. })
    }

    /// Infimum of the real parts where the transform is analytic.
    pub fn analyticity_bound(&self) -> f64 {
        match self {
            JumpLaw::Dirac { .. } => f64::NEG_INFINITY,
            JumpLaw::Exponential { mu } | JumpLaw::Erlang { mu, .. } => -mu,
            JumpLaw::HyperExponential { rates, .. } => {
                -rates.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    fn check_domain(&self, p: Complex64) -> Result<()> {
        if p.re.is_finite() && p.im.is_finite() && p.re > self.analyticity_bound() {
            Ok(())
        } else {
            Err(Error::Domain(p))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Dirac { d } => *d,
            JumpLaw::Exponential { mu } => 1.0 / mu,
            JumpLaw::Erlang { k, mu } => *k as f64 / mu,
            JumpLaw::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w / r).sum()
            }
        }
    }

    /// `E[exp(-p eta)]`.
    pub fn lt(&self, p: Complex64) -> Result<Complex64> {
        self.check_domain(p)?;
        if p == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        Ok(match self {
            JumpLaw::Dirac { d } => (-p * d).exp(),
            JumpLaw::Exponential { mu } => *mu / (p + mu),
            JumpLaw::Erlang { k, mu } => (*mu / (p + mu)).powu(*k),
            JumpLaw::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| *w * r / (p + r))
                .sum(),
        })
    }

    /// `d/dp E[exp(-p eta)] = -E[eta exp(-p eta)]`.
    pub fn lt_prime(&self, p: Complex64) -> Result<Complex64> {
        self.check_domain(p)?;
        Ok(match self {
            JumpLaw::Dirac { d } => -(-p * d).exp() * d,
            JumpLaw::Exponential { mu } => -*mu / ((p + mu) * (p + mu)),
            JumpLaw::Erlang { k, mu } => {
                let k = *k;
                -(*mu / (p + mu)).powu(k) * k as f64 / (p + mu)
            }
            JumpLaw::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| -*w * r / ((p + r) * (p + r)))
                .sum(),
        })
    }

    /// Second derivative of the transform, `E[eta^2 exp(-p eta)]`.
    pub fn lt_second(&self, p: Complex64) -> Result<Complex64> {
        self.check_domain(p)?;
        Ok(match self {
            JumpLaw::Dirac { d } => (-p * d).exp() * (d * d),
            JumpLaw::Exponential { mu } => 2.0 * mu / (p + mu).powu(3),
            JumpLaw::Erlang { k, mu } => {
                let kf = *k as f64;
                (*mu / (p + mu)).powu(*k) * (kf * (kf + 1.0)) / ((p + mu) * (p + mu))
            }
            JumpLaw::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| 2.0 * w * r / (p + r).powu(3))
                .sum(),
        })
    }

    /// Draws one jump size.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::Dirac { d } => *d,
            JumpLaw::Exponential { mu } => exp_sample(rng, *mu),
            JumpLaw::Erlang { k, mu } => (0..*k).map(|_| exp_sample(rng, *mu)).sum(),
            JumpLaw::HyperExponential { weights, rates } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, r) in weights.iter().zip(rates) {
                    acc += w;
                    if u < acc {
                        return exp_sample(rng, *r);
                    }
                }
                exp_sample(rng, *rates.last().expect("validated non-empty"))
            }
        }
    }
}

/// Inverse-transform `Exp(rate)` draw.
pub(crate) fn exp_sample<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    // 1 - U lies in (0, 1], so the logarithm is finite.
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}

/// `E[exp(-p eta)]`.
pub fn jump_lt(law: &JumpLaw, p: Complex64) -> Result<Complex64> {
    law.lt(p)
}

/// `d/dp E[exp(-p eta)]`.
pub fn jump_lt_prime(law: &JumpLaw, p: Complex64) -> Result<Complex64> {
    law.lt_prime(p)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    c: f64,
    a: f64,
    lambda: f64,
    eta: JumpLaw,
}

/// Parameters `(c, a, lambda, eta)` of the process. Validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProcessParams {
    c: f64,
    a: f64,
    lambda: f64,
    eta: JumpLaw,
}

impl TryFrom<RawParams> for ProcessParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ProcessParams::new(r.c, r.a, r.lambda, r.eta)
    }
}

impl From<ProcessParams> for RawParams {
    fn from(p: ProcessParams) -> Self {
        RawParams {
            c: p.c,
            a: p.a,
            lambda: p.lambda,
            eta: p.eta,
        }
    }
}

impl ProcessParams {
    pub fn new(c: f64, a: f64, lambda: f64, eta: JumpLaw) -> Result<Self> {
        positive_finite("c", c)?;
        if !(a.is_finite() && a > 0.0 && a < 1.0) {
            return Err(invalid(format!("a must satisfy 0 < a < 1, got {a}")));
        }
        positive_finite("lambda", lambda)?;
        eta.validate()?;
        Ok(Self { c, a, lambda, eta })
    }

    /// Jump intensity.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Probability that a jump is negative.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Rate of the exponential negative jumps.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> &JumpLaw {
        &self.eta
    }

    /// Intensity of negative jumps, `a c`.
    pub fn a1(&self) -> f64 {
        self.a * self.c
    }

    /// Intensity of positive jumps, `(1 - a) c`.
    pub fn a2(&self) -> f64 {
        (1.0 - self.a) * self.c
    }

    /// Mean jump, `E[xi(1)] / c`.
    pub fn mean_jump(&self) -> f64 {
        -self.a / self.lambda + (1.0 - self.a) * self.eta.mean()
    }

    fn check_pole(&self, p: Complex64) -> Result<()> {
        if (p - self.lambda).norm() <= POLE_GUARD_REL * self.lambda {
            Err(Error::PoleAtLambda {
                p,
                lambda: self.lambda,
            })
        } else {
            Ok(())
        }
    }

    /// The Laplace exponent `k(p)`.
    pub fn laplace_exponent(&self, p: Complex64) -> Result<Complex64> {
        self.check_pole(p)?;
        let eta = self.eta.lt(p)?;
        Ok(self.a1() * p / (self.lambda - p) + self.a2() * (eta - 1.0))
    }

    /// `k'(p) = a1 lambda / (lambda - p)^2 + a2 eta'(p)`.
    pub fn laplace_exponent_prime(&self, p: Complex64) -> Result<Complex64> {
        self.check_pole(p)?;
        let d = self.lambda - p;
        Ok(self.a1() * self.lambda / (d * d) + self.a2() * self.eta.lt_prime(p)?)
    }
}

/// The Laplace exponent `k(p)` of the process.
pub fn laplace_exponent(params: &ProcessParams, p: Complex64) -> Result<Complex64> {
    params.laplace_exponent(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn p0() -> ProcessParams {
        ProcessParams::new(2.0, 0.5, 1.0, JumpLaw::Exponential { mu: 1.0 }).unwrap()
    }

    fn families() -> Vec<JumpLaw> {
        vec![
            JumpLaw::Dirac { d: 0.7 },
            JumpLaw::Exponential { mu: 1.3 },
            JumpLaw::Erlang { k: 3, mu: 2.0 },
            JumpLaw::HyperExponential {
                weights: vec![0.3, 0.7],
                rates: vec![0.5, 4.0],
            },
        ]
    }

    #[test]
    fn exponent_examples() {
        let p = p0();
        assert_eq!(p.laplace_exponent(c(0.0)).unwrap(), c(0.0));
        let k = p.laplace_exponent(c(0.5)).unwrap();
        assert!((k.re - 2.0 / 3.0).abs() < 1e-15 && k.im == 0.0);
        let x = 0.9;
        let k = p.laplace_exponent(c(x)).unwrap();
        assert!((k.re - 2.0 * x * x / (1.0 - x * x)).abs() < 1e-12);
    }

    #[test]
    fn transform_examples() {
        let e = JumpLaw::Exponential { mu: 1.0 };
        assert_eq!(e.lt(c(1.0)).unwrap(), c(0.5));
        let d = JumpLaw::Dirac { d: 2.0 };
        assert_eq!(d.lt(c(0.0)).unwrap(), c(1.0));
        let er = JumpLaw::Erlang { k: 2, mu: 3.0 };
        assert!((er.lt(c(3.0)).unwrap() - c(0.25)).norm() < 1e-15);
    }

    #[test]
    fn transform_at_zero_is_one_and_derivative_is_minus_mean() {
        for law in families() {
            assert_eq!(law.lt(c(0.0)).unwrap(), c(1.0));
            let d = law.lt_prime(c(0.0)).unwrap();
            assert!((d.re + law.mean()).abs() < 1e-13, "{law:?}");
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for law in families() {
            for i in 0..40 {
                let p = c(i as f64 * 0.25);
                let fd = (law.lt(p + h).unwrap() - law.lt(p - h).unwrap()) / (2.0 * h);
                let d = law.lt_prime(p).unwrap();
                assert!((d - fd).norm() <= 1e-6 * (1.0 + d.norm()), "{law:?} at {p}");
                let fd2 =
                    (law.lt_prime(p + h).unwrap() - law.lt_prime(p - h).unwrap()) / (2.0 * h);
                let d2 = law.lt_second(p).unwrap();
                assert!((d2 - fd2).norm() <= 1e-6 * (1.0 + d2.norm()), "{law:?} at {p}");
            }
        }
    }

    #[test]
    fn transform_is_decreasing_convex_and_bounded() {
        for law in families() {
            let vals: Vec<f64> = (0..60).map(|i| law.lt(c(i as f64 * 0.1)).unwrap().re).collect();
            for w in vals.windows(3) {
                assert!(w[1] < w[0]);
                assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-15);
            }
            for i in 0..30 {
                let p = Complex64::new(i as f64 * 0.2, (i as f64 * 1.7).sin() * 10.0);
                assert!(law.lt(p).unwrap().norm() <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn domain_errors() {
        let e = JumpLaw::Exponential { mu: 2.0 };
        assert!(matches!(e.lt(c(-2.0)), Err(Error::Domain(_))));
        assert!(matches!(e.lt(c(-3.0)), Err(Error::Domain(_))));
        let d = JumpLaw::Dirac { d: 1.0 };
        assert!(d.lt(c(-30.0)).is_ok());
    }

    #[test]
    fn pole_guard() {
        let p = p0();
        assert!(matches!(
            p.laplace_exponent(c(1.0)),
            Err(Error::PoleAtLambda { .. })
        ));
        assert!(p.laplace_exponent(c(1.0 - 1e-6)).unwrap().re > 1e5);
    }

    #[test]
    fn exponent_blows_up_at_lambda_and_dips_with_upward_drift() {
        // a1/lambda < a2 E[eta]: k is negative just right of 0.
        let p = ProcessParams::new(1.0, 0.2, 2.0, JumpLaw::Exponential { mu: 0.5 }).unwrap();
        assert!(p.laplace_exponent(c(1e-3)).unwrap().re < 0.0);
        assert!(p.laplace_exponent(c(2.0 - 1e-6)).unwrap().re > 1e4);
    }

    #[test]
    fn conjugate_symmetry() {
        for law in families() {
            let p = ProcessParams::new(1.5, 0.4, 2.0, law).unwrap();
            for i in 0..20 {
                let z = Complex64::new(0.1 * i as f64 - 0.3, 0.37 * i as f64);
                let a = p.laplace_exponent(z.conj()).unwrap();
                let b = p.laplace_exponent(z).unwrap().conj();
                assert!((a - b).norm() <= 1e-14 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn validation_messages() {
        let err = ProcessParams::new(2.0, 1.5, 1.0, JumpLaw::Exponential { mu: 1.0 }).unwrap_err();
        assert!(err.to_string().contains("0 < a < 1"));
        assert!(ProcessParams::new(0.0, 0.5, 1.0, JumpLaw::Dirac { d: 1.0 }).is_err());
        assert!(ProcessParams::new(1.0, 0.5, f64::NAN, JumpLaw::Dirac { d: 1.0 }).is_err());
        let bad = JumpLaw::HyperExponential {
            weights: vec![0.5, 0.6],
            rates: vec![1.0, 2.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let p = ProcessParams::new(
            2.0,
            0.5,
            1.0,
            JumpLaw::HyperExponential {
                weights: vec![0.25, 0.75],
                rates: vec![1.0, 3.0],
            },
        )
        .unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: ProcessParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let bad = r#"{"c":2.0,"a":1.5,"lambda":1.0,"eta":{"family":"exponential","mu":1.0}}"#;
        let err = serde_json::from_str::<ProcessParams>(bad).unwrap_err();
        assert!(err.to_string().contains("0 < a < 1"));
        let unknown = r#"{"c":2.0,"a":0.5,"lambda":1.0,"eta":{"family":"exponential","mu":1.0,"x":1}}"#;
        assert!(serde_json::from_str::<ProcessParams>(unknown).is_err());
    }

    #[test]
    fn sampler_means() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for law in families() {
            let n = 200_000;
            let m: f64 = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
            assert!((m - law.mean()).abs() < 0.02 * law.mean(), "{law:?}: {m}");
        }
    }
}
