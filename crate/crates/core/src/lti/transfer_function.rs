use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use super::polynomial::Polynomial;
use crate::error::{domain, Error, Result};

/// SISO rational transfer function `num(s)/den(s) · exp(-s·delay)`.
///
/// The denominator is normalized to be monic on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
    delay: f64,
}

/// Static gain of a system at `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcGain {
    Finite(f64),
    /// Integrating system: `den(0) = 0` while `num(0) != 0`.
    Infinite,
}

impl DcGain {
    pub fn finite(self) -> Option<f64> {
        match self {
            DcGain::Finite(g) => Some(g),
            DcGain::Infinite => None,
        }
    }
}

/// Sampled magnitude and phase of a transfer function along the imaginary axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub omegas: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Continuous phase in radians, including the delay contribution `-ω·L`.
    pub phases_rad: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: Polynomial, den: Polynomial, delay: f64) -> Result<Self> {
        if den.is_zero() {
            return domain("denominator is identically zero");
        }
        if !num.is_finite() || !den.is_finite() {
            return domain("transfer function coefficients must be finite");
        }
        if !delay.is_finite() || delay < 0.0 {
            return domain(format!("delay must be finite and >= 0, got {delay}"));
        }
        let lead = den.leading();
        Ok(Self {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
            delay,
        })
    }

    /// Convenience constructor from coefficient slices, highest degree first.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(
            Polynomial::new(num.to_vec()),
            Polynomial::new(den.to_vec()),
            0.0,
        )
    }

    pub fn gain(k: f64) -> Result<Self> {
        Self::new(Polynomial::constant(k), Polynomial::one(), 0.0)
    }

    pub fn with_delay(mut self, delay: f64) -> Result<Self> {
        if !delay.is_finite() || delay < 0.0 {
            return domain(format!("delay must be finite and >= 0, got {delay}"));
        }
        self.delay = delay;
        Ok(self)
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Order of the denominator.
    pub fn order(&self) -> usize {
        self.den.degree()
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// Series connection `self · other`; delays add.
    pub fn series(&self, other: &TransferFunction) -> TransferFunction {
        TransferFunction {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
            delay: self.delay + other.delay,
        }
        .renormalized()
    }

    /// Unity negative feedback around a delay-free loop: `L / (1 + L)`.
    pub fn feedback_unity(&self) -> Result<TransferFunction> {
        if self.delay != 0.0 {
            return domain(
                "a loop with dead time has no rational closed loop; simulate it instead",
            );
        }
        let den = &self.den + &self.num;
        if den.is_zero() {
            return Err(Error::Improper(
                "closed-loop denominator vanishes identically".into(),
            ));
        }
        let closed = TransferFunction::new(self.num.clone(), den, 0.0)?;
        if !closed.is_proper() {
            return Err(Error::Improper(format!(
                "closed loop {closed} has more zeros than poles; the controller/plant pairing is unrealizable"
            )));
        }
        Ok(closed)
    }

    pub fn dc_gain(&self) -> Result<DcGain> {
        let n0 = self.num.constant_term();
        let d0 = self.den.constant_term();
        let d_zero = d0.abs() <= 1e-14 * self.den.max_abs_coeff();
        let n_zero = self.num.is_zero() || n0.abs() <= 1e-14 * self.num.max_abs_coeff();
        match (n_zero, d_zero) {
            (true, true) => Err(Error::Indeterminate),
            (false, true) => Ok(DcGain::Infinite),
            (true, false) => Ok(DcGain::Finite(0.0)),
            (false, false) => Ok(DcGain::Finite(n0 / d0)),
        }
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.is_zero() {
            return Ok(Vec::new());
        }
        self.num.roots()
    }

    /// Evaluates `G(s)` including the delay factor.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s) * (-s * self.delay).exp()
    }

    /// `G(jω)`, or a singularity error when `jω` is (numerically) a pole.
    pub fn eval_jw(&self, omega: f64) -> Result<Complex64> {
        let s = Complex64::new(0.0, omega);
        let den = self.den.eval_complex(s);
        let scale = self.den.max_abs_coeff() * omega.abs().max(1.0).powi(self.den.degree() as i32);
        if den.norm() <= 1e-12 * scale {
            return Err(Error::Singular { omega });
        }
        Ok(self.num.eval_complex(s) / den * Complex64::from_polar(1.0, -omega * self.delay))
    }

    /// Magnitude and continuous phase at each frequency.
    ///
    /// The rational phase is taken from the principal argument of `G(jω)`
    /// and moved to the branch given by summing pole/zero angles, so the
    /// result is continuous in ω without a dense sweep.
    pub fn freq_response(&self, omegas: &[f64]) -> Result<FrequencyResponse> {
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return domain("frequencies must be finite and strictly positive");
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return domain("frequencies must be strictly increasing");
        }
        let zeros = self.zeros()?;
        let poles = self.poles()?;
        let gain_phase = if self.num.leading() * self.den.leading() < 0.0 {
            -PI
        } else {
            0.0
        };

        let mut magnitudes = Vec::with_capacity(omegas.len());
        let mut phases_rad = Vec::with_capacity(omegas.len());
        for &w in omegas {
            let jw = Complex64::new(0.0, w);
            let delay_free = self.eval_jw(w)? * Complex64::from_polar(1.0, w * self.delay);
            magnitudes.push(delay_free.norm());
            let branch = gain_phase + zeros.iter().map(|z| (jw - z).arg()).sum::<f64>()
                - poles.iter().map(|p| (jw - p).arg()).sum::<f64>();
            let principal = if self.num.is_zero() {
                0.0
            } else {
                delay_free.arg()
            };
            let turns = ((branch - principal) / (2.0 * PI)).round();
            phases_rad.push(principal + 2.0 * PI * turns - w * self.delay);
        }
        Ok(FrequencyResponse {
            omegas: omegas.to_vec(),
            magnitudes,
            phases_rad,
        })
    }

    fn renormalized(self) -> Self {
        let lead = self.den.leading();
        Self {
            num: self.num.scale(1.0 / lead),
            den: self.den.scale(1.0 / lead),
            delay: self.delay,
        }
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)?;
        if self.delay > 0.0 {
            write!(f, " * exp(-{} s)", self.delay)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
        TransferFunction::from_coeffs(num, den).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(TransferFunction::from_coeffs(&[1.0], &[0.0]).is_err());
        assert!(tf(&[1.0], &[1.0, 1.0]).with_delay(-1.0).is_err());
        let g = tf(&[2.0], &[3.0, 1.0]);
        assert_eq!(g.den().coeffs(), &[1.0, 1.0 / 3.0]);
        assert!(!tf(&[1.0, 0.0, 0.0], &[1.0, 1.0]).is_proper());
    }

    #[test]
    fn unity_feedback_examples() {
        let cl = tf(&[1.0], &[1.0, 0.0]).feedback_unity().unwrap();
        assert_eq!(cl, tf(&[1.0], &[1.0, 1.0]));

        let cl = TransferFunction::gain(1.0)
            .unwrap()
            .feedback_unity()
            .unwrap();
        assert_eq!(cl.num().coeffs(), &[0.5]);
        assert_eq!(cl.den().coeffs(), &[1.0]);

        // PI (11, 36) around 1/(s+1)
        let loop_tf = tf(&[11.0, 36.0], &[1.0, 0.0]).series(&tf(&[1.0], &[1.0, 1.0]));
        let cl = loop_tf.feedback_unity().unwrap();
        assert_eq!(cl, tf(&[11.0, 36.0], &[1.0, 12.0, 36.0]));
    }

    #[test]
    fn feedback_rejects_delay_and_improper_results() {
        let delayed = tf(&[1.0], &[1.0, 1.0]).with_delay(1.0).unwrap();
        assert!(matches!(delayed.feedback_unity(), Err(Error::Domain(_))));
        // -s^2/(s^2 + 1) closes to -s^2/1
        let improper = tf(&[-1.0, 0.0, 0.0], &[1.0, 0.0, 1.0]);
        assert!(matches!(improper.feedback_unity(), Err(Error::Improper(_))));
    }

    #[test]
    fn dc_gain_examples() {
        assert_eq!(
            tf(&[1.0], &[1.0, 1.0]).dc_gain().unwrap(),
            DcGain::Finite(1.0)
        );
        assert_eq!(
            tf(&[11.0, 36.0], &[1.0, 12.0, 36.0]).dc_gain().unwrap(),
            DcGain::Finite(1.0)
        );
        assert_eq!(tf(&[1.0], &[1.0, 0.0]).dc_gain().unwrap(), DcGain::Infinite);
        assert_eq!(
            tf(&[1.0, 0.0], &[1.0, 0.0]).dc_gain(),
            Err(Error::Indeterminate)
        );
    }

    #[test]
    fn frequency_response_examples() {
        let fr = tf(&[1.0], &[1.0, 1.0]).freq_response(&[1.0]).unwrap();
        assert_abs_diff_eq!(fr.magnitudes[0], 0.5_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(fr.phases_rad[0], -PI / 4.0, epsilon = 1e-12);

        let cube = tf(&[1.0], &[1.0, 3.0, 3.0, 1.0]);
        let fr = cube.freq_response(&[3.0_f64.sqrt()]).unwrap();
        assert_abs_diff_eq!(fr.magnitudes[0], 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(fr.phases_rad[0], -PI, epsilon = 1e-9);

        let pure_delay = TransferFunction::gain(1.0)
            .unwrap()
            .with_delay(1.0)
            .unwrap();
        let fr = pure_delay.freq_response(&[PI]).unwrap();
        assert_abs_diff_eq!(fr.magnitudes[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fr.phases_rad[0], -PI, epsilon = 1e-12);
    }

    #[test]
    fn phase_is_continuous_past_minus_pi() {
        let cube = tf(&[1.0], &[1.0, 3.0, 3.0, 1.0]);
        let omegas: Vec<f64> = (1..400).map(|i| 0.05 * i as f64).collect();
        let fr = cube.freq_response(&omegas).unwrap();
        for (w, ph) in omegas.iter().zip(&fr.phases_rad) {
            assert_abs_diff_eq!(*ph, -3.0 * w.atan(), epsilon = 1e-9);
        }
    }

    #[test]
    fn singular_frequency_is_reported() {
        let osc = tf(&[1.0], &[1.0, 0.0, 4.0]);
        assert_eq!(
            osc.freq_response(&[1.0, 2.0]).unwrap_err(),
            Error::Singular { omega: 2.0 }
        );
        assert!(osc.freq_response(&[2.0, 1.0]).is_err());
        assert!(osc.freq_response(&[0.0]).is_err());
    }
}
