//! The coefficient-ring interface shared by plain supernumbers, the bigraded
//! bookkeeping ring of the sewing solver, and the formal-Laurent scaling mode.

use crate::error::Result;
use crate::grassmann::{Parity, Supernumber};
use crate::scalar::GaussRat;
use std::fmt;

/// A supercommutative ring with exact scalars, enough structure to serve as
/// the coefficient ring of truncated superconformal series.
///
/// Binary operations panic on Grassmann-context mismatch; the public entry
/// points validate contexts before descending into series arithmetic.
pub trait GrassRing: Clone + PartialEq + fmt::Debug + fmt::Display {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn scale(&self, r: &GaussRat) -> Self;
    fn parity(&self) -> Parity;
    /// σ(a) = a_even − a_odd.
    fn parity_flip(&self) -> Self;
    fn is_invertible(&self) -> bool;
    fn try_invert(&self) -> Result<Self>;
    /// Terminating exponential of a nilpotent element.
    fn try_exp(&self) -> Result<Self>;
    /// Terminating logarithm of 1 + nilpotent.
    fn try_log(&self) -> Result<Self>;
    /// True when the element is nilpotent by construction: its soul degree
    /// plus bookkeeping bidegree is at least one.
    fn is_nilpotent_step(&self) -> bool;
    /// A ring-level bound N such that every product of N nilpotent-step
    /// elements vanishes.
    fn nil_product_bound(&self) -> u64;

    fn from_rat(&self, r: &GaussRat) -> Self {
        self.one_like().scale(r)
    }

    fn is_even_or_zero(&self) -> bool {
        matches!(self.parity(), Parity::Even | Parity::Zero)
    }

    fn is_odd_or_zero(&self) -> bool {
        matches!(self.parity(), Parity::Odd | Parity::Zero)
    }

    fn pow_i64(&self, n: i64) -> Result<Self> {
        let base = if n < 0 {
            self.try_invert()?
        } else {
            self.clone()
        };
        let mut acc = self.one_like();
        for _ in 0..n.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// Square root of 1 + nilpotent via the terminating binomial series.
    fn sqrt_one_plus_nil(&self) -> Result<Self> {
        let u = self.sub(&self.one_like());
        if u.is_zero() {
            return Ok(self.one_like());
        }
        if !u.is_nilpotent_step() {
            return Err(crate::error::Error::NoRationalSqrt);
        }
        let mut acc = self.one_like();
        let mut pow = self.one_like();
        let mut coeff = GaussRat::one();
        for n in 0..self.nil_product_bound() as i64 {
            pow = pow.mul(&u);
            if pow.is_zero() {
                break;
            }
            // binom(1/2, n+1) = binom(1/2, n)·(1 − 2n)/(2(n+1))
            coeff = &coeff * &GaussRat::from_frac(1 - 2 * n, 2 * (n + 1));
            acc = acc.add(&pow.scale(&coeff));
        }
        Ok(acc)
    }
}

impl GrassRing for Supernumber {
    fn zero_like(&self) -> Self {
        Supernumber::zero(self.ctx())
    }
    fn one_like(&self) -> Self {
        Supernumber::one(self.ctx())
    }
    fn is_zero(&self) -> bool {
        Supernumber::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self.checked_add(rhs).expect("context mismatch")
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.checked_sub(rhs).expect("context mismatch")
    }
    fn neg(&self) -> Self {
        Supernumber::neg(self)
    }
    fn mul(&self, rhs: &Self) -> Self {
        self.checked_mul(rhs).expect("context mismatch")
    }
    fn scale(&self, r: &GaussRat) -> Self {
        Supernumber::scale(self, r)
    }
    fn parity(&self) -> Parity {
        Supernumber::parity(self)
    }
    fn parity_flip(&self) -> Self {
        Supernumber::parity_flip(self)
    }
    fn is_invertible(&self) -> bool {
        Supernumber::is_invertible(self)
    }
    fn try_invert(&self) -> Result<Self> {
        self.invert()
    }
    fn try_exp(&self) -> Result<Self> {
        self.exp()
    }
    fn try_log(&self) -> Result<Self> {
        self.log()
    }
    fn is_nilpotent_step(&self) -> bool {
        self.body().is_zero()
    }
    fn nil_product_bound(&self) -> u64 {
        self.ctx().generators() as u64 + 1
    }
}
