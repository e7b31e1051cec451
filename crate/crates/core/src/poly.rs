//! Real polynomials and their complex roots.

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// A polynomial with real coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `p + a`.
    pub fn linear(a: f64) -> Self {
        Self::new(vec![a, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().expect("non-empty")
    }

    pub fn eval(&self, p: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * p + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| i as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(0.0)
                        + other.coeffs.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(1.0), |acc, _| acc.mul(self))
    }

    /// All complex roots, by Aberth-Ehrlich iteration followed by Newton polish.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial has non-finite coefficients"));
        }
        let lead = self.leading();
        let monic: Vec<f64> = self.coeffs.iter().map(|c| c / lead).collect();
        let monic = Poly::new(monic);
        let dmonic = monic.derivative();
        // Starting points on a circle of the Cauchy bound radius, rotated off the axes.
        let radius = 1.0
            + monic.coeffs[..n]
                .iter()
                .fold(0.0f64, |m, c| m.max(c.abs()));
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
                Complex64::from_polar(0.5 * radius, theta)
            })
            .collect();
        for _ in 0..500 {
            let mut moved: f64 = 0.0;
            for i in 0..n {
                let ratio = monic.eval(z[i]) / dmonic.eval(z[i]);
                let repulsion: Complex64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| 1.0 / (z[i] - z[j]))
                    .sum();
                let step = ratio / (1.0 - ratio * repulsion);
                if step.is_finite() {
                    z[i] -= step;
                    moved = moved.max(step.norm() / (1.0 + z[i].norm()));
                }
            }
            if moved < 1e-15 {
                break;
            }
        }
        for zi in z.iter_mut() {
            for _ in 0..3 {
                let d = dmonic.eval(*zi);
                if d.norm() == 0.0 {
                    break;
                }
                let step = monic.eval(*zi) / d;
                if !step.is_finite() {
                    break;
                }
                *zi -= step;
            }
            if zi.im.abs() < 1e-13 * (1.0 + zi.re.abs()) {
                zi.im = 0.0;
            }
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contains(roots: &[Complex64], r: Complex64) -> bool {
        roots.iter().any(|z| (z - r).norm() < 1e-12 * (1.0 + r.norm()))
    }

    #[test]
    fn arithmetic() {
        let p = Poly::linear(1.0).mul(&Poly::linear(-2.0));
        assert_eq!(p.coeffs(), &[-2.0, -1.0, 1.0]);
        assert_eq!(p.derivative().coeffs(), &[-1.0, 2.0]);
        assert_eq!(p.add(&Poly::constant(2.0)).coeffs(), &[0.0, -1.0, 1.0]);
        assert_eq!(Poly::linear(1.0).pow(3).coeffs(), &[1.0, 3.0, 3.0, 1.0]);
        assert_eq!(p.eval(Complex64::new(2.0, 0.0)), Complex64::new(0.0, 0.0));
        assert_eq!(Poly::new(vec![1.0, 0.0, 0.0]).degree(), 0);
    }

    #[test]
    fn quadratic_roots() {
        let r = Poly::new(vec![-1.0, 0.0, 3.0]).roots().unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!(contains(&r, Complex64::new(s, 0.0)));
        assert!(contains(&r, Complex64::new(-s, 0.0)));
    }

    #[test]
    fn complex_pair() {
        let r = Poly::new(vec![5.0, 2.0, 1.0]).roots().unwrap();
        assert!(contains(&r, Complex64::new(-1.0, 2.0)));
        assert!(contains(&r, Complex64::new(-1.0, -2.0)));
    }

    #[test]
    fn higher_degree() {
        let want = [-3.0, -1.5, 0.25, 0.5, 4.0];
        let p = want
            .iter()
            .fold(Poly::constant(2.0), |acc, &w| acc.mul(&Poly::linear(-w)));
        let r = p.roots().unwrap();
        for w in want {
            assert!(contains(&r, Complex64::new(w, 0.0)), "{w} not in {r:?}");
        }
    }
}
