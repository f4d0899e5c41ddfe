use std::fmt;

use super::polynomial::Polynomial;
use super::transfer_function::TransferFunction;
use crate::error::{domain, Result};

/// Parallel-form PID gains `Kp + Ki/s + Kd·s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const ZERO: PidGains = PidGains {
        kp: 0.0,
        ki: 0.0,
        kd: 0.0,
    };

    /// Non-negative gains. `+inf` is accepted so the type can carry upper bounds.
    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self> {
        let g = Self { kp, ki, kd };
        g.validate()?;
        Ok(g)
    }

    pub fn pi(kp: f64, ki: f64) -> Result<Self> {
        Self::new(kp, ki, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if v.is_nan() || v < 0.0 {
                return domain(format!("gain {name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.kp, self.ki, self.kd]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self {
            kp: a[0],
            ki: a[1],
            kd: a[2],
        }
    }
}

impl fmt::Display for PidGains {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Kp={} Ki={} Kd={}", self.kp, self.ki, self.kd)
    }
}

/// Controller transfer function `(Kd·s² + Kp·s + Ki)/s`.
///
/// Without integral action the common factor `s` is cancelled, so
/// `Ki = Kd = 0` gives the constant `Kp`.
pub fn pid_tf(g: &PidGains) -> Result<TransferFunction> {
    g.validate()?;
    if !(g.kp.is_finite() && g.ki.is_finite() && g.kd.is_finite()) {
        return domain("controller gains must be finite");
    }
    if g.ki == 0.0 {
        TransferFunction::new(Polynomial::new(vec![g.kd, g.kp]), Polynomial::one(), 0.0)
    } else {
        TransferFunction::new(
            Polynomial::new(vec![g.kd, g.kp, g.ki]),
            Polynomial::new(vec![1.0, 0.0]),
            0.0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controller_polynomials() {
        let c = pid_tf(&PidGains::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(c.num().coeffs(), &[1.0]);
        assert_eq!(c.den().coeffs(), &[1.0]);

        let c = pid_tf(&PidGains::pi(0.33, 0.33).unwrap()).unwrap();
        assert_eq!(c.num().coeffs(), &[0.33, 0.33]);
        assert_eq!(c.den().coeffs(), &[1.0, 0.0]);

        let c = pid_tf(&PidGains::new(6.7358, 3.9912, 3.0012).unwrap()).unwrap();
        assert_eq!(c.num().coeffs(), &[3.0012, 6.7358, 3.9912]);
        assert_eq!(c.den().coeffs(), &[1.0, 0.0]);
    }

    #[test]
    fn derivative_only_is_pure_differentiator() {
        let c = pid_tf(&PidGains::new(0.0, 0.0, 2.0).unwrap()).unwrap();
        assert_eq!(c.num().coeffs(), &[2.0, 0.0]);
        assert!(!c.is_proper());
    }

    #[test]
    fn negative_gains_are_rejected() {
        assert!(PidGains::new(-1.0, 0.0, 0.0).is_err());
        let bad = PidGains {
            kp: 1.0,
            ki: -0.1,
            kd: 0.0,
        };
        assert!(pid_tf(&bad).is_err());
        assert!(pid_tf(&PidGains::new(f64::INFINITY, 0.0, 0.0).unwrap()).is_err());
    }
}
