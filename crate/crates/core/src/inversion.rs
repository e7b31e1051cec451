//! Numerical Laplace inversion.
//!
//! Two inverters are provided. [`bromwich_invert`] evaluates the Bromwich
//! integral along a vertical line as a trapezoidal Fourier series whose
//! alternating tail is accelerated by Euler (binomial) summation. The line sits
//! at `Re p = sigma + A / (2x)` where `sigma` is the rightmost singularity, so
//! the aliasing error of the shifted original is of order `exp(-A)`.
//! [`gaver_stehfest`] only needs `F` on the positive real axis and is used for
//! inversion in `s`, where every evaluation builds a fresh resolvent context.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tolerances::{
    BROMWICH_ALIASING, BROMWICH_EULER_ORDER, BROMWICH_NODES, BROMWICH_REL_TOL,
    GAVER_STEHFEST_ORDER,
};

pub use crate::quadrature::exp_tail_quadrature;

/// Parameters of the Euler-accelerated Fourier-series Bromwich rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bromwich {
    /// Aliasing exponent `A`.
    pub aliasing: f64,
    /// Terms summed before Euler averaging; the check run uses twice as many.
    pub nodes: usize,
    /// Binomial order of the Euler averaging.
    pub euler_order: usize,
    /// Required relative agreement of the two runs.
    pub rel_tol: f64,
}

impl Default for Bromwich {
    fn default() -> Self {
        Self {
            aliasing: BROMWICH_ALIASING,
            nodes: BROMWICH_NODES,
            euler_order: BROMWICH_EULER_ORDER,
            rel_tol: BROMWICH_REL_TOL,
        }
    }
}

impl Bromwich {
    fn validate(&self) -> Result<()> {
        if !(self.aliasing > 0.0 && self.aliasing.is_finite()) {
            return Err(invalid(format!(
                "Bromwich aliasing exponent must be > 0, got {}",
                self.aliasing
            )));
        }
        if self.nodes < 4 {
            return Err(invalid(format!(
                "Bromwich node count must be >= 4, got {}",
                self.nodes
            )));
        }
        if self.euler_order == 0 || self.euler_order > 60 {
            return Err(invalid(format!(
                "Euler order must be in 1..=60, got {}",
                self.euler_order
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid(format!(
                "Bromwich tolerance must be > 0, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Selects a Laplace inverter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum InversionMethod {
    BromwichShifted(Bromwich),
    GaverStehfest { order: usize },
}

impl Default for InversionMethod {
    fn default() -> Self {
        InversionMethod::BromwichShifted(Bromwich::default())
    }
}

impl InversionMethod {
    /// Inverts a real-symmetric transform (`F(conj p) = conj F(p)`) at `x > 0`.
    ///
    /// Gaver-Stehfest only samples `F` on the real axis, so it needs
    /// `rightmost_singularity < ln 2 / x`; this is the caller's business.
    pub fn invert<F>(&self, f: F, x: f64, rightmost_singularity: f64) -> Result<f64>
    where
        F: Fn(Complex64) -> Result<Complex64>,
    {
        match self {
            InversionMethod::BromwichShifted(b) => bromwich_invert(f, x, rightmost_singularity, b),
            InversionMethod::GaverStehfest { order } => {
                gaver_stehfest(|p| Ok(f(Complex64::new(p, 0.0))?.re), x, *order)
            }
        }
    }
}

fn binomial_weights(m: usize) -> Vec<f64> {
    // C(m, j) / 2^m, built multiplicatively to stay in range.
    let mut w = vec![0.0; m + 1];
    w[0] = 0.5f64.powi(m as i32);
    for j in 1..=m {
        w[j] = w[j - 1] * (m + 1 - j) as f64 / j as f64;
    }
    w
}

fn euler_sum<T>(partial: &[T], start: usize, weights: &[f64]) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let mut acc = partial[start] * weights[0];
    for (j, &w) in weights.iter().enumerate().skip(1) {
        acc = acc + partial[start + j] * w;
    }
    acc
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid(format!(
            "Bromwich inversion needs a finite x > 0, got {x}"
        )));
    }
    Ok(())
}

/// Inverts a real-symmetric Laplace transform `F` at `x > 0`.
///
/// `F` must be analytic for `Re p > rightmost_singularity`. Only the upper half
/// of the contour is sampled. The Euler-averaged sums after `N` and `2N` terms
/// are compared; a disagreement beyond `rel_tol` (plus a roundoff floor derived
/// from the sampled magnitudes) is reported as [`Error::ConvergenceFailure`].
pub fn bromwich_invert<F>(f: F, x: f64, rightmost_singularity: f64, method: &Bromwich) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    method.validate()?;
    check_x(x)?;
    let alpha = rightmost_singularity + method.aliasing / (2.0 * x);
    let h = std::f64::consts::PI / x;
    let n = method.nodes;
    let m = method.euler_order;
    let total = 2 * n + m;
    let mut partial = Vec::with_capacity(total + 1);
    let mut sum = 0.0;
    let mut largest: f64 = 0.0;
    for k in 0..=total {
        let v = f(Complex64::new(alpha, k as f64 * h))?.re;
        largest = largest.max(v.abs());
        let term = if k == 0 {
            0.5 * v
        } else if k % 2 == 1 {
            -v
        } else {
            v
        };
        sum += term;
        partial.push(sum);
    }
    let weights = binomial_weights(m);
    let scale = (alpha * x).exp() / x;
    let coarse = scale * euler_sum(&partial, n, &weights);
    let fine = scale * euler_sum(&partial, 2 * n, &weights);
    finish(x, coarse, fine, method.rel_tol, scale * largest)
}

/// Inverts a complex-valued Laplace transform at `x > 0` (both halves of the
/// contour are sampled). Returns the complex original.
pub fn bromwich_invert_complex<F>(
    f: F,
    x: f64,
    rightmost_singularity: f64,
    method: &Bromwich,
) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    method.validate()?;
    check_x(x)?;
    let alpha = rightmost_singularity + method.aliasing / (2.0 * x);
    let h = std::f64::consts::PI / x;
    let n = method.nodes;
    let m = method.euler_order;
    let total = 2 * n + m;
    let mut partial = Vec::with_capacity(total + 1);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut largest: f64 = 0.0;
    for k in 0..=total {
        let v = if k == 0 {
            f(Complex64::new(alpha, 0.0))?
        } else {
            let y = k as f64 * h;
            f(Complex64::new(alpha, y))? + f(Complex64::new(alpha, -y))?
        };
        largest = largest.max(v.norm());
        let term = if k % 2 == 1 { -v } else { v } * 0.5;
        sum += term;
        partial.push(sum);
    }
    let weights = binomial_weights(m);
    let scale = (alpha * x).exp() / x;
    let coarse = euler_sum(&partial, n, &weights) * scale;
    let fine = euler_sum(&partial, 2 * n, &weights) * scale;
    let floor = 64.0 * f64::EPSILON * scale * largest;
    if (coarse - fine).norm() > method.rel_tol * fine.norm() + floor {
        return Err(Error::ConvergenceFailure {
            x,
            coarse: coarse.norm(),
            fine: fine.norm(),
        });
    }
    Ok(fine)
}

fn finish(x: f64, coarse: f64, fine: f64, rel_tol: f64, magnitude: f64) -> Result<f64> {
    let floor = 64.0 * f64::EPSILON * magnitude;
    if !fine.is_finite() || (coarse - fine).abs() > rel_tol * fine.abs() + floor {
        return Err(Error::ConvergenceFailure { x, coarse, fine });
    }
    Ok(fine)
}

/// Gaver-Stehfest weights `V_1..V_M` for an even order `M`.
pub fn gaver_stehfest_weights(order: usize) -> Result<Vec<f64>> {
    if order < 2 || order % 2 == 1 {
        return Err(invalid(format!(
            "Gaver-Stehfest order must be even and >= 2, got {order}"
        )));
    }
    let half = order / 2;
    // V_k = (-1)^(k + M/2) / (M/2)! * sum_j j^(M/2 + 1) C(2j, j) C(M/2, j) C(j, k - j),
    // an integer sum; evaluated exactly while it fits in 128 bits.
    let binom = |n: usize, r: usize| -> Option<i128> {
        let mut acc: i128 = 1;
        for i in 0..r {
            acc = acc.checked_mul((n - i) as i128)? / (i as i128 + 1);
        }
        Some(acc)
    };
    let norm: f64 = (1..=half).map(|i| i as f64).product();
    let mut weights = Vec::with_capacity(order);
    for k in 1..=order {
        let mut v: i128 = 0;
        for j in k.div_ceil(2)..=k.min(half) {
            let term = (j as i128)
                .checked_pow(half as u32 + 1)
                .and_then(|t| t.checked_mul(binom(2 * j, j)?))
                .and_then(|t| t.checked_mul(binom(half, j)?))
                .and_then(|t| t.checked_mul(binom(j, k - j)?))
                .and_then(|t| v.checked_add(t))
                .ok_or(Error::WeightOverflow(order))?;
            v = term;
        }
        let sign = if (k + half) % 2 == 0 { 1.0 } else { -1.0 };
        weights.push(sign * v as f64 / norm);
    }
    let largest = weights.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !largest.is_finite() || largest * f64::EPSILON > 1e-3 {
        return Err(Error::WeightOverflow(order));
    }
    Ok(weights)
}

/// Gaver-Stehfest inversion of a transform known on the positive real axis.
pub fn gaver_stehfest<F>(f: F, t: f64, order: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("Gaver-Stehfest needs t > 0, got {t}")));
    }
    let weights = gaver_stehfest_weights(order)?;
    let ln2t = std::f64::consts::LN_2 / t;
    let mut sum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        sum += w * f((i + 1) as f64 * ln2t)?;
    }
    Ok(ln2t * sum)
}

/// The default Gaver-Stehfest order.
pub fn default_gaver_stehfest_order() -> usize {
    GAVER_STEHFEST_ORDER
}
