//! Real polynomials in `s`, stored highest degree first.

use std::fmt;
use std::ops::{Add, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Leading coefficients below this fraction of the largest magnitude are trimmed.
pub const TRIM_TOLERANCE: f64 = 1e-12;

/// Relative residual accepted for a computed root.
pub const ROOT_RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    // Highest degree first; the zero polynomial is `[0.0]`.
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from coefficients ordered highest degree first.
    ///
    /// Leading coefficients smaller than `TRIM_TOLERANCE` times the largest
    /// coefficient magnitude are dropped.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if scale == 0.0 || coeffs.is_empty() {
            return Self::zero();
        }
        let first = coeffs
            .iter()
            .position(|c| c.abs() > TRIM_TOLERANCE * scale)
            .unwrap_or(coeffs.len() - 1);
        coeffs.drain(..first);
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Self::one(), |acc, r| &acc * &Self::new(vec![1.0, -r]))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficient of `s^0`.
    pub fn constant_term(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        let n = self.degree();
        if n == 0 {
            return Self::zero();
        }
        Self::new(
            self.coeffs[..n]
                .iter()
                .enumerate()
                .map(|(i, c)| c * (n - i) as f64)
                .collect::<Vec<_>>(),
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    /// Coefficients left-padded with zeros to `len` entries.
    pub fn padded(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len.saturating_sub(self.coeffs.len())];
        out.extend_from_slice(&self.coeffs);
        out
    }

    /// All `degree()` complex roots.
    ///
    /// Roots at the origin are split off exactly; the rest are the
    /// eigenvalues of the balanced companion matrix, each polished by a few
    /// guarded Newton steps on the original polynomial.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::Domain(
                "roots of the zero polynomial are undefined".into(),
            ));
        }
        let zeros_at_origin = self.coeffs.iter().rev().take_while(|&&c| c == 0.0).count();
        let reduced = &self.coeffs[..self.coeffs.len() - zeros_at_origin];
        let n = reduced.len() - 1;

        let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
        match n {
            0 => {}
            1 => roots.push(Complex64::new(-reduced[1] / reduced[0], 0.0)),
            _ => {
                let lead = reduced[0];
                let mut companion = DMatrix::<f64>::zeros(n, n);
                for j in 0..n {
                    companion[(0, j)] = -reduced[j + 1] / lead;
                }
                for i in 1..n {
                    companion[(i, i - 1)] = 1.0;
                }
                nalgebra::linalg::balancing::balance_parlett_reinsch(&mut companion);
                let schur = nalgebra::linalg::Schur::try_new(companion, f64::EPSILON, 10_000)
                    .ok_or(Error::NoConvergence)?;
                let reduced_poly = Self {
                    coeffs: reduced.to_vec(),
                };
                let deriv = reduced_poly.derivative();
                roots.extend(
                    schur
                        .complex_eigenvalues()
                        .iter()
                        .map(|&z| polish(&reduced_poly, &deriv, z)),
                );
            }
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok(roots)
    }

    /// Residual bound used to accept a root `r`.
    pub fn root_residual_bound(&self, r: Complex64) -> f64 {
        ROOT_RESIDUAL_TOLERANCE
            * self.max_abs_coeff()
            * r.norm().max(1.0).powi(self.degree() as i32)
    }
}

fn polish(p: &Polynomial, dp: &Polynomial, mut z: Complex64) -> Complex64 {
    let mut residual = p.eval_complex(z).norm();
    for _ in 0..8 {
        let slope = dp.eval_complex(z);
        if slope.norm() == 0.0 || residual == 0.0 {
            break;
        }
        let candidate = z - p.eval_complex(z) / slope;
        let candidate_residual = p.eval_complex(candidate).norm();
        if candidate_residual.is_nan() || candidate_residual >= residual {
            break;
        }
        z = candidate;
        residual = candidate_residual;
    }
    z
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let a = &self.coeffs;
        let b = &rhs.coeffs;
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        Polynomial::new(out)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let a = self.padded(len);
        let b = rhs.padded(len);
        Polynomial::new(a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let n = self.degree();
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let power = n - i;
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let mag = c.abs();
            let show_mag = power == 0 || mag != 1.0;
            if show_mag {
                write!(f, "{mag}")?;
            }
            match power {
                0 => {}
                1 if show_mag => write!(f, " s")?,
                1 => write!(f, "s")?,
                _ if show_mag => write!(f, " s^{power}")?,
                _ => write!(f, "s^{power}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec())
    }

    #[test]
    fn multiplication_examples() {
        assert_eq!(&p(&[1.0, 1.0]) * &p(&[1.0, 1.0]), p(&[1.0, 2.0, 1.0]));
        let q = p(&[2.0, -3.0, 0.5]);
        assert_eq!(&q * &Polynomial::one(), q);
        // repeated convolution of (s + 1)
        let cube = &(&p(&[1.0, 1.0]) * &p(&[1.0, 1.0])) * &p(&[1.0, 1.0]);
        assert_eq!(cube.coeffs(), &[1.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn trims_negligible_leading_coefficients() {
        let q = p(&[1e-14, 0.0, 2.0, 1.0]);
        assert_eq!(q.coeffs(), &[2.0, 1.0]);
        assert!(p(&[0.0, 0.0]).is_zero());
        assert!(p(&[]).is_zero());
        assert_eq!(p(&[0.0, 3.0]).degree(), 0);
    }

    #[test]
    fn roots_of_small_examples() {
        let r = p(&[1.0, 2.0, 1.0]).roots().unwrap();
        for z in &r {
            assert_abs_diff_eq!(z.re, -1.0, epsilon = 1e-7);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-7);
        }
        let r = p(&[1.0, 2.0, 5.0]).roots().unwrap();
        assert_abs_diff_eq!(r[0].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[0].im.abs(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1].im, -r[0].im, epsilon = 1e-12);

        let cube = p(&[1.0, 3.0, 3.0, 1.0]);
        let r = cube.roots().unwrap();
        assert_eq!(r.len(), 3);
        for z in &r {
            assert!(cube.eval_complex(*z).norm() <= cube.root_residual_bound(*z));
            assert!((z - Complex64::new(-1.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn zero_polynomial_has_no_roots() {
        assert!(matches!(Polynomial::zero().roots(), Err(Error::Domain(_))));
        assert!(Polynomial::constant(3.0).roots().unwrap().is_empty());
    }

    #[test]
    fn roots_at_origin_are_exact() {
        let r = p(&[1.0, 1.0, 0.0, 0.0]).roots().unwrap();
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
    }

    #[test]
    fn display_is_readable() {
        assert_eq!(p(&[1.0, -2.0, 0.0, 5.0]).to_string(), "s^3 - 2 s^2 + 5");
        assert_eq!(p(&[3.0, 1.0]).to_string(), "3 s + 1");
        assert_eq!(p(&[-1.0, 0.0]).to_string(), "-s");
    }

    fn coeff_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0..5.0f64, 1..=max_len)
            .prop_filter("nonzero leading", |v| v[0].abs() > 0.1)
    }

    proptest! {
        #[test]
        fn multiplication_commutes_and_has_identity(a in coeff_vec(5), b in coeff_vec(5)) {
            let (pa, pb) = (p(&a), p(&b));
            let ab = &pa * &pb;
            let ba = &pb * &pa;
            prop_assert_eq!(ab.degree(), pa.degree() + pb.degree());
            for (x, y) in ab.coeffs().iter().zip(ba.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            prop_assert_eq!(&(&pa * &Polynomial::one()), &pa);
        }

        #[test]
        fn roots_satisfy_residual_bound(a in coeff_vec(7)) {
            let pa = p(&a);
            let roots = pa.roots().unwrap();
            prop_assert_eq!(roots.len(), pa.degree());
            for r in roots {
                prop_assert!(pa.eval_complex(r).norm() <= pa.root_residual_bound(r),
                    "residual {} at {}", pa.eval_complex(r).norm(), r);
            }
        }

        #[test]
        fn roots_of_product_are_union(
            ra in prop::collection::vec(-4.0..4.0f64, 1..=3),
            rb in prop::collection::vec(-4.0..4.0f64, 1..=3),
        ) {
            // well separated roots keep the comparison meaningful
            let mut all: Vec<f64> = ra.iter().chain(&rb).copied().collect();
            all.sort_by(f64::total_cmp);
            prop_assume!(all.windows(2).all(|w| w[1] - w[0] > 0.05));
            let product = &Polynomial::from_real_roots(&ra) * &Polynomial::from_real_roots(&rb);
            let mut got: Vec<f64> = product.roots().unwrap().iter().map(|z| z.re).collect();
            got.sort_by(f64::total_cmp);
            for (g, e) in got.iter().zip(&all) {
                prop_assert!((g - e).abs() <= 1e-6, "{} vs {}", g, e);
            }
        }
    }
}
