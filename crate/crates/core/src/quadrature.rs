//! Adaptive Gauss-Kronrod quadrature on finite panels and exponentially
//! damped half-lines.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_PANELS: usize = 4000;

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

fn gk15<T: QuadValue, F: Fn(f64) -> Result<T>>(f: &F, a: f64, b: f64) -> Result<Panel<T>> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(centre - dx)? + f(centre + dx)?;
        kronrod = kronrod + sum * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + sum * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).magnitude();
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]`, split first at the sorted interior `breaks`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol |I|)`.
pub fn integrate_with_breaks<T, F>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<T>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T>,
{
    if a == b {
        return Ok(T::zero());
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges = vec![lo];
    edges.extend(breaks.iter().copied().filter(|&t| t > lo && t < hi));
    edges.push(hi);
    let mut panels = Vec::with_capacity(64);
    for w in edges.windows(2) {
        panels.push(gk15(&f, w[0], w[1])?);
    }
    loop {
        let total = panels.iter().fold(T::zero(), |acc, p| acc + p.value);
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let tol = abs_tol.max(rel_tol * total.magnitude());
        if err <= tol {
            return Ok(total * sign);
        }
        if panels.len() >= MAX_PANELS {
            if err <= 1e3 * tol {
                log::warn!("quadrature on [{lo}, {hi}] stopped at error {err:e} (tol {tol:e})");
                return Ok(total * sign);
            }
            return Err(Error::QuadratureFailure {
                a: lo,
                b: hi,
                error: err,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // Panel cannot be split further in floating point.
            panels.push(Panel { error: 0.0, ..p });
            continue;
        }
        panels.push(gk15(&f, p.a, mid)?);
        panels.push(gk15(&f, mid, p.b)?);
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<T>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T>,
{
    integrate_with_breaks(f, a, b, &[], abs_tol, rel_tol)
}

/// `∫_lower^∞ f(u) du` for an integrand with `|f(u)| <= C exp(-decay (u - lower))`.
///
/// The envelope constant is estimated from samples near `lower`; the range is
/// truncated where the envelope tail drops below `tol / 2`, and the finite part
/// is integrated adaptively to `tol / 2` on panels of width `1 / decay`.
/// Samples exceeding the declared envelope tenfold are logged as warnings.
pub fn exp_tail_quadrature<F>(f: F, lower: f64, decay: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    exp_tail_quadrature_with_breaks(f, lower, decay, tol, &[])
}

pub(crate) fn exp_tail_quadrature_with_breaks<F>(
    f: F,
    lower: f64,
    decay: f64,
    tol: f64,
    breaks: &[f64],
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tail decay rate must be > 0, got {decay}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tail tolerance must be > 0, got {tol}"
        )));
    }
    let scale = 1.0 / decay;
    let mut envelope: f64 = 0.0;
    for k in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let u = lower + k * scale;
        envelope = envelope.max(f(u)?.abs() * (k).exp());
    }
    if envelope == 0.0 {
        envelope = f64::MIN_POSITIVE;
    }
    let span = ((2.0 * envelope * scale / tol).ln().max(1.0)) * scale;
    let upper = lower + span;
    let panels = (span / scale).ceil().min(200.0) as usize;
    let mut all_breaks: Vec<f64> = (1..panels)
        .map(|i| lower + span * i as f64 / panels as f64)
        .collect();
    all_breaks.extend(breaks.iter().copied().filter(|&t| t > lower && t < upper));
    all_breaks.sort_by(f64::total_cmp);
    let checked = |u: f64| -> Result<f64> {
        let v = f(u)?;
        let bound = envelope * (-(u - lower) * decay).exp();
        if v.abs() > 10.0 * bound && v.abs() > tol {
            log::warn!(
                "tail integrand exceeds its envelope at u = {u}: |f| = {:e} > 10 x {:e}",
                v.abs(),
                bound
            );
        }
        Ok(v)
    };
    integrate_with_breaks(checked, lower, upper, &all_breaks, 0.5 * tol, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v: f64 = integrate(|x| Ok(x * x * x - 2.0 * x), 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((v - 0.0).abs() < 1e-13);
        let v: f64 = integrate(|x| Ok(x.powi(4)), -1.0, 3.0, 1e-14, 0.0).unwrap();
        assert!((v - (243.0 + 1.0) / 5.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a: f64 = integrate(|x| Ok(x.sin()), 0.0, 1.0, 1e-14, 0.0).unwrap();
        let b: f64 = integrate(|x| Ok(x.sin()), 1.0, 0.0, 1e-14, 0.0).unwrap();
        assert!((a + b).abs() < 1e-15);
        assert!((a - (1.0 - 1f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn complex_integrand() {
        let z = Complex64::new(0.3, 2.0);
        let v: Complex64 = integrate(|x| Ok((-z * x).exp()), 0.0, 3.0, 1e-14, 0.0).unwrap();
        let exact = (1.0 - (-z * 3.0).exp()) / z;
        assert!((v - exact).norm() < 1e-13);
    }

    #[test]
    fn breaks_handle_discontinuities() {
        let f = |x: f64| Ok(if x < 0.7 { 1.0 } else { 3.0 });
        let v: f64 = integrate_with_breaks(f, 0.0, 2.0, &[0.7], 1e-14, 0.0).unwrap();
        assert!((v - (0.7 + 3.0 * 1.3)).abs() < 1e-13);
    }

    #[test]
    fn tail_examples() {
        let v = exp_tail_quadrature(|u| Ok((-u).exp()), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = exp_tail_quadrature(|u| Ok((-2.0 * u).exp()), 1.0, 2.0, 1e-13).unwrap();
        assert!((v - (-2.0f64).exp() / 2.0).abs() < 1e-13);
        let v = exp_tail_quadrature(|u| Ok(u * (-u).exp()), 0.0, 0.5, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_rejects_bad_decay() {
        assert!(exp_tail_quadrature(Ok, 0.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn errors_propagate() {
        let r: Result<f64> = integrate(
            |x| {
                if x > 0.5 {
                    Err(Error::Unsupported("test"))
                } else {
                    Ok(x)
                }
            },
            0.0,
            1.0,
            1e-10,
            0.0,
        );
        assert!(r.is_err());
    }
}
