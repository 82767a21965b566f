//! Complex numbers with an extended exponent range.
//!
//! Amplitudes in laboratory units are products of factors like `exp(-1.5e4)`
//! and `exp(+1.5e4)`. Each factor alone leaves the `f64` range, the product
//! does not. [`ScaledComplex`] keeps `mantissa * exp(log_offset)` with
//! `|mantissa|` in `[1, e)` and an integral `log_offset`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplex {
    mantissa: Complex,
    log_offset: f64,
}

/// Multiply by `exp(shift)` without leaving the `f64` range on the way.
fn scale_by_exp(z: Complex, shift: f64) -> Complex {
    if shift.abs() < 600.0 {
        z * shift.exp()
    } else {
        let half = (0.5 * shift).exp();
        z * half * half
    }
}

impl ScaledComplex {
    pub const ZERO: ScaledComplex = ScaledComplex {
        mantissa: Complex::new(0.0, 0.0),
        log_offset: 0.0,
    };

    pub const ONE: ScaledComplex = ScaledComplex {
        mantissa: Complex::new(1.0, 0.0),
        log_offset: 0.0,
    };

    /// Build from an unnormalized pair and normalize.
    pub fn from_parts(mantissa: Complex, log_offset: f64) -> Self {
        let modulus = mantissa.norm();
        if modulus == 0.0 {
            return Self::ZERO;
        }
        if !modulus.is_finite() || !log_offset.is_finite() {
            return ScaledComplex { mantissa, log_offset };
        }
        let shift = modulus.ln().floor();
        let mut m = scale_by_exp(mantissa, -shift);
        let mut off = log_offset + shift;
        // rounding can leave |m| a hair outside [1, e)
        let n = m.norm();
        if n >= std::f64::consts::E {
            m /= std::f64::consts::E;
            off += 1.0;
        } else if n < 1.0 {
            m *= std::f64::consts::E;
            off -= 1.0;
        }
        ScaledComplex {
            mantissa: m,
            log_offset: off,
        }
    }

    pub fn from_complex(z: Complex) -> Self {
        Self::from_parts(z, 0.0)
    }

    /// `exp(w)` for any complex `w`, including real parts far outside the `f64` range.
    pub fn from_exp(w: Complex) -> Self {
        if !w.re.is_finite() || !w.im.is_finite() {
            return ScaledComplex {
                mantissa: Complex::new(f64::NAN, f64::NAN),
                log_offset: 0.0,
            };
        }
        let off = w.re.floor();
        let m = Complex::from_polar((w.re - off).exp(), w.im);
        Self::from_parts(m, off)
    }

    pub fn mantissa(&self) -> Complex {
        self.mantissa
    }

    pub fn log_offset(&self) -> f64 {
        self.log_offset
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.re == 0.0 && self.mantissa.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.mantissa.re.is_finite() && self.mantissa.im.is_finite() && self.log_offset.is_finite()
    }

    /// Plain complex value. Overflows to infinity or underflows to zero when
    /// the magnitude is outside the `f64` range.
    pub fn to_complex(&self) -> Complex {
        if self.is_zero() {
            return Complex::new(0.0, 0.0);
        }
        scale_by_exp(self.mantissa, self.log_offset)
    }

    /// `ln |z|`, `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mantissa.norm().ln() + self.log_offset
        }
    }

    pub fn abs(&self) -> f64 {
        self.ln_abs().exp()
    }

    /// `|z|^2`, computed in log space before returning to `f64`.
    pub fn norm_sqr(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            (2.0 * self.ln_abs()).exp()
        }
    }

    pub fn conj(&self) -> Self {
        ScaledComplex {
            mantissa: self.mantissa.conj(),
            log_offset: self.log_offset,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        *self * Complex::new(factor, 0.0)
    }

    /// Relative distance `|a - b| / max(|a|, |b|)`, 0 when both are zero.
    pub fn rel_diff(&self, other: &ScaledComplex) -> f64 {
        let d = (*self - *other).ln_abs();
        let m = self.ln_abs().max(other.ln_abs());
        if m == f64::NEG_INFINITY {
            0.0
        } else {
            (d - m).exp()
        }
    }
}

impl Default for ScaledComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<Complex> for ScaledComplex {
    fn from(z: Complex) -> Self {
        Self::from_complex(z)
    }
}

impl Mul for ScaledComplex {
    type Output = ScaledComplex;
    fn mul(self, rhs: ScaledComplex) -> ScaledComplex {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::from_parts(self.mantissa * rhs.mantissa, self.log_offset + rhs.log_offset)
    }
}

impl Mul<Complex> for ScaledComplex {
    type Output = ScaledComplex;
    fn mul(self, rhs: Complex) -> ScaledComplex {
        self * ScaledComplex::from_complex(rhs)
    }
}

impl Add for ScaledComplex {
    type Output = ScaledComplex;
    fn add(self, rhs: ScaledComplex) -> ScaledComplex {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.log_offset >= rhs.log_offset {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let gap = small.log_offset - big.log_offset;
        if gap < -800.0 {
            return big;
        }
        let m = big.mantissa + scale_by_exp(small.mantissa, gap);
        Self::from_parts(m, big.log_offset)
    }
}

impl Neg for ScaledComplex {
    type Output = ScaledComplex;
    fn neg(self) -> ScaledComplex {
        ScaledComplex {
            mantissa: -self.mantissa,
            log_offset: self.log_offset,
        }
    }
}

impl Sub for ScaledComplex {
    type Output = ScaledComplex;
    fn sub(self, rhs: ScaledComplex) -> ScaledComplex {
        self + (-rhs)
    }
}

impl std::iter::Sum for ScaledComplex {
    fn sum<I: Iterator<Item = ScaledComplex>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for ScaledComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} + {}i) * exp({})",
            self.mantissa.re, self.mantissa.im, self.log_offset
        )
    }
}
