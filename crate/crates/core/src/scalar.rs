//! Exact Gaussian rationals: the scalar field for all coefficient arithmetic.

use crate::error::{Error, Result};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

/// A Gaussian rational `re + i*im`, both parts exact rationals in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn zero() -> Self {
        GaussRat {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        GaussRat {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        GaussRat {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        GaussRat {
            re: BigRational::from_integer(BigInt::from(n)),
            im: BigRational::zero(),
        }
    }

    pub fn from_frac(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        GaussRat {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    pub fn from_parts(re: BigRational, im: BigRational) -> Self {
        GaussRat { re, im }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussRat {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// Squared modulus `re^2 + im^2`.
    pub fn norm(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn invert(&self) -> Result<Self> {
        let n = self.norm();
        if n.is_zero() {
            return Err(Error::NotInvertible);
        }
        Ok(GaussRat {
            re: &self.re / &n,
            im: -&self.im / &n,
        })
    }

    /// A square root within the Gaussian rationals, if one exists.
    pub fn sqrt_exact(&self) -> Result<Self> {
        if self.is_zero() {
            return Ok(GaussRat::zero());
        }
        // |z| must be rational, then x^2 = (re + |z|)/2 must be a rational square.
        let n = self.norm();
        let abs = rational_sqrt(&n).ok_or(Error::NoRationalSqrt)?;
        let two = BigRational::from_integer(BigInt::from(2));
        let x2 = (&self.re + &abs) / &two;
        if self.im.is_zero() {
            if self.re.is_negative() {
                // sqrt of a negative rational: purely imaginary
                let y2 = -self.re.clone();
                let y = rational_sqrt(&y2).ok_or(Error::NoRationalSqrt)?;
                return Ok(GaussRat {
                    re: BigRational::zero(),
                    im: y,
                });
            }
            let x = rational_sqrt(&self.re).ok_or(Error::NoRationalSqrt)?;
            return Ok(GaussRat {
                re: x,
                im: BigRational::zero(),
            });
        }
        let x = rational_sqrt(&x2).ok_or(Error::NoRationalSqrt)?;
        if x.is_zero() {
            return Err(Error::NoRationalSqrt);
        }
        let y = &self.im / (&two * &x);
        Ok(GaussRat { re: x, im: y })
    }

    pub fn pow_i64(&self, n: i64) -> Result<Self> {
        if n == 0 {
            return Ok(GaussRat::one());
        }
        let base = if n < 0 { self.invert()? } else { self.clone() };
        let mut acc = GaussRat::one();
        for _ in 0..n.unsigned_abs() {
            acc = &acc * &base;
        }
        Ok(acc)
    }
}

/// Exact square root of a nonnegative rational, if the numerator and
/// denominator are perfect squares.
fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let num = q.numer();
    let den = q.denom();
    let sn = num.sqrt();
    let sd = den.sqrt();
    if &(&sn * &sn) == num && &(&sd * &sd) == den {
        Some(BigRational::new(sn, sd))
    } else {
        None
    }
}

impl Add for &GaussRat {
    type Output = GaussRat;
    fn add(self, rhs: &GaussRat) -> GaussRat {
        GaussRat {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }
}

impl Sub for &GaussRat {
    type Output = GaussRat;
    fn sub(self, rhs: &GaussRat) -> GaussRat {
        GaussRat {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }
}

impl Mul for &GaussRat {
    type Output = GaussRat;
    fn mul(self, rhs: &GaussRat) -> GaussRat {
        GaussRat {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Neg for &GaussRat {
    type Output = GaussRat;
    fn neg(self) -> GaussRat {
        GaussRat {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

impl fmt::Debug for GaussRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for GaussRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}i", self.im)
        } else {
            write!(
                f,
                "{}{}{}i",
                self.re,
                if self.im.is_negative() { "" } else { "+" },
                self.im
            )
        }
    }
}

/// Parse a rational from a decimal-free "p/q" or "p" string.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parse_int = |t: &str| -> Result<BigInt> {
        BigInt::from_str(t.trim()).map_err(|_| Error::Malformed {
            path: "rational".into(),
            msg: format!("bad integer {t:?}"),
        })
    };
    if let Some((p, q)) = s.split_once('/') {
        let den = parse_int(q)?;
        if den.is_zero() {
            return Err(Error::Malformed {
                path: "rational".into(),
                msg: "zero denominator".into(),
            });
        }
        Ok(BigRational::new(parse_int(p)?, den))
    } else {
        Ok(BigRational::from_integer(parse_int(s)?))
    }
}

/// Render a rational as a canonical "p/q" (or "p") string.
pub fn rational_string(q: &BigRational) -> String {
    if q.denom().is_one() {
        format!("{}", q.numer())
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_ops() {
        let a = GaussRat::from_frac(2, 3);
        let b = GaussRat::i();
        let c = &a * &b;
        assert_eq!(c.im, BigRational::new(BigInt::from(2), BigInt::from(3)));
        let inv = c.invert().unwrap();
        assert!((&c * &inv).is_one());
    }

    #[test]
    fn i_squared_is_minus_one() {
        let i = GaussRat::i();
        assert_eq!(&i * &i, GaussRat::from_int(-1));
    }

    #[test]
    fn sqrt_of_gaussian() {
        // sqrt(2i) = 1 + i
        let z = &GaussRat::from_int(2) * &GaussRat::i();
        let r = z.sqrt_exact().unwrap();
        assert_eq!(&r * &r, z);
        // sqrt(-9/4) = 3/2 i
        let z = GaussRat::from_frac(-9, 4);
        let r = z.sqrt_exact().unwrap();
        assert_eq!(&r * &r, z);
        // sqrt(2) is not rational
        assert!(GaussRat::from_int(2).sqrt_exact().is_err());
    }

    #[test]
    fn parse_roundtrip() {
        let q = parse_rational("-3/7").unwrap();
        assert_eq!(rational_string(&q), "-3/7");
        assert!(parse_rational("1/0").is_err());
    }
}
