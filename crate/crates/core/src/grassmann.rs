//! Exact arithmetic in finite Grassmann algebras over Gaussian rationals.
//!
//! A supernumber is a sparse map from strictly increasing generator subsets
//! (stored as bitmasks) to scalars.  The empty subset carries the body; the
//! rest is the soul, which is nilpotent, so inverses, exponentials and
//! logarithms of the permitted arguments all terminate exactly.

use crate::error::{Error, Result};
use crate::scalar::GaussRat;
use std::collections::BTreeMap;
use std::fmt;

pub const MAX_GENERATORS: u32 = 64;

/// Number of generators of the Grassmann algebra; fixed for the lifetime of
/// every value built from it.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct GrassCtx {
    l: u32,
}

impl GrassCtx {
    pub fn new(l: u32) -> Self {
        assert!(
            l <= MAX_GENERATORS,
            "at most {MAX_GENERATORS} generators supported"
        );
        GrassCtx { l }
    }

    pub fn generators(&self) -> u32 {
        self.l
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
    Zero,
}

impl Parity {
    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Parity::Even | Parity::Odd | Parity::Zero)
    }
}

/// Sign of merging two disjoint ordered index sets: (-1)^inversions.
fn merge_sign(a: u64, b: u64) -> bool {
    // counts pairs (i in a, j in b) with j < i; returns true for negative sign
    let mut neg = false;
    let mut rest = a;
    while rest != 0 {
        let i = rest.trailing_zeros();
        rest &= rest - 1;
        let below = if i == 0 {
            0
        } else {
            (b & ((1u64 << i) - 1)).count_ones()
        };
        if below % 2 == 1 {
            neg = !neg;
        }
    }
    neg
}

/// Element of a finite Grassmann algebra Λ_L over the Gaussian rationals.
#[derive(Clone, PartialEq)]
pub struct Supernumber {
    ctx: GrassCtx,
    terms: BTreeMap<u64, GaussRat>,
}

impl Supernumber {
    pub fn zero(ctx: GrassCtx) -> Self {
        Supernumber {
            ctx,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(ctx: GrassCtx) -> Self {
        Supernumber::from_scalar(ctx, GaussRat::one())
    }

    pub fn i(ctx: GrassCtx) -> Self {
        Supernumber::from_scalar(ctx, GaussRat::i())
    }

    pub fn from_scalar(ctx: GrassCtx, c: GaussRat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(0u64, c);
        }
        Supernumber { ctx, terms }
    }

    pub fn from_int(ctx: GrassCtx, n: i64) -> Self {
        Supernumber::from_scalar(ctx, GaussRat::from_int(n))
    }

    pub fn from_frac(ctx: GrassCtx, n: i64, d: i64) -> Self {
        Supernumber::from_scalar(ctx, GaussRat::from_frac(n, d))
    }

    /// The generator ζ_k, 1-based.
    pub fn gen(ctx: GrassCtx, k: u32) -> Self {
        assert!(k >= 1 && k <= ctx.l, "generator index out of range");
        let mut terms = BTreeMap::new();
        terms.insert(1u64 << (k - 1), GaussRat::one());
        Supernumber { ctx, terms }
    }

    /// Build from explicit (bitmask, scalar) terms.
    pub fn from_terms(ctx: GrassCtx, list: impl IntoIterator<Item = (u64, GaussRat)>) -> Self {
        let mut s = Supernumber::zero(ctx);
        for (mask, c) in list {
            assert!(
                ctx.l == MAX_GENERATORS || mask < (1u64 << ctx.l),
                "term uses generators beyond the context"
            );
            s.add_term(mask, c);
        }
        s
    }

    pub fn ctx(&self) -> GrassCtx {
        self.ctx
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, &GaussRat)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, mask: u64) -> GaussRat {
        self.terms
            .get(&mask)
            .cloned()
            .unwrap_or_else(GaussRat::zero)
    }

    fn add_term(&mut self, mask: u64, c: GaussRat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(mask) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = &*o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    o.insert(sum);
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn body(&self) -> GaussRat {
        self.coeff(0)
    }

    pub fn soul(&self) -> Supernumber {
        let mut s = self.clone();
        s.terms.remove(&0);
        s
    }

    pub fn is_invertible(&self) -> bool {
        !self.body().is_zero()
    }

    pub fn parity(&self) -> Parity {
        if self.terms.is_empty() {
            return Parity::Zero;
        }
        let mut even = false;
        let mut odd = false;
        for mask in self.terms.keys() {
            if mask.count_ones() % 2 == 0 {
                even = true;
            } else {
                odd = true;
            }
        }
        match (even, odd) {
            (true, false) => Parity::Even,
            (false, true) => Parity::Odd,
            _ => Parity::Mixed,
        }
    }

    pub fn even_part(&self) -> Supernumber {
        Supernumber {
            ctx: self.ctx,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.count_ones() % 2 == 0)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    pub fn odd_part(&self) -> Supernumber {
        Supernumber {
            ctx: self.ctx,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.count_ones() % 2 == 1)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    /// σ(a) = a_even − a_odd; the sign picked up moving an odd variable past `a`.
    pub fn parity_flip(&self) -> Supernumber {
        Supernumber {
            ctx: self.ctx,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    if m.count_ones() % 2 == 1 {
                        (*m, -c)
                    } else {
                        (*m, c.clone())
                    }
                })
                .collect(),
        }
    }

    pub fn checked_add(&self, rhs: &Supernumber) -> Result<Supernumber> {
        if self.ctx != rhs.ctx {
            return Err(Error::ContextMismatch);
        }
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, rhs: &Supernumber) -> Result<Supernumber> {
        self.checked_add(&rhs.neg())
    }

    pub fn neg(&self) -> Supernumber {
        Supernumber {
            ctx: self.ctx,
            terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect(),
        }
    }

    pub fn checked_mul(&self, rhs: &Supernumber) -> Result<Supernumber> {
        if self.ctx != rhs.ctx {
            return Err(Error::ContextMismatch);
        }
        let mut out = Supernumber::zero(self.ctx);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                if ma & mb != 0 {
                    continue; // repeated generator squares to zero
                }
                let c = ca * cb;
                if merge_sign(*ma, *mb) {
                    out.add_term(ma | mb, -&c);
                } else {
                    out.add_term(ma | mb, c);
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, r: &GaussRat) -> Supernumber {
        if r.is_zero() {
            return Supernumber::zero(self.ctx);
        }
        Supernumber {
            ctx: self.ctx,
            terms: self.terms.iter().map(|(m, c)| (*m, c * r)).collect(),
        }
    }

    /// Exact inverse via the terminating geometric series in the soul.
    pub fn invert(&self) -> Result<Supernumber> {
        let b = self.body();
        if b.is_zero() {
            return Err(Error::NotInvertible);
        }
        let binv = b.invert()?;
        // 1/(b + s) = (1/b) Σ (-s/b)^n
        let t = self.soul().scale(&-&binv); // -s/b
        let mut acc = Supernumber::one(self.ctx);
        let mut pow = Supernumber::one(self.ctx);
        loop {
            pow = pow.checked_mul(&t)?;
            if pow.is_zero() {
                break;
            }
            acc = acc.checked_add(&pow)?;
        }
        Ok(acc.scale(&binv))
    }

    /// Exact exponential of a nilpotent (body-zero) element.
    pub fn exp(&self) -> Result<Supernumber> {
        if !self.body().is_zero() {
            return Err(Error::NotNilpotent);
        }
        let mut acc = Supernumber::one(self.ctx);
        let mut term = Supernumber::one(self.ctx);
        let mut n = 1i64;
        loop {
            term = term.checked_mul(self)?.scale(&GaussRat::from_frac(1, n));
            if term.is_zero() {
                break;
            }
            acc = acc.checked_add(&term)?;
            n += 1;
            if n > 2 * MAX_GENERATORS as i64 {
                return Err(Error::IllFoundedExponential);
            }
        }
        Ok(acc)
    }

    /// Exact logarithm of an element with body 1.
    pub fn log(&self) -> Result<Supernumber> {
        if !self.body().is_one() {
            return Err(Error::LogRequiresBodyOne);
        }
        let s = self.soul();
        let mut acc = Supernumber::zero(self.ctx);
        let mut pow = Supernumber::one(self.ctx);
        let mut n = 1i64;
        loop {
            pow = pow.checked_mul(&s)?;
            if pow.is_zero() {
                break;
            }
            let sign = if n % 2 == 1 { 1 } else { -1 };
            acc = acc.checked_add(&pow.scale(&GaussRat::from_frac(sign, n)))?;
            n += 1;
        }
        Ok(acc)
    }

    /// Square root of an invertible even element whose body has a Gaussian
    /// rational square root; the branch is fixed by `body_root`.
    pub fn sqrt_with_body(&self, body_root: &GaussRat) -> Result<Supernumber> {
        let b = self.body();
        if b.is_zero() {
            return Err(Error::NotInvertible);
        }
        if !(body_root * body_root == b) {
            return Err(Error::NoRationalSqrt);
        }
        // sqrt(b + s) = r * sqrt(1 + s/b) with the binomial series, which
        // terminates on the nilpotent s/b.
        let u = self.soul().scale(&b.invert()?);
        let mut acc = Supernumber::one(self.ctx);
        let mut pow = Supernumber::one(self.ctx);
        let mut coeff = GaussRat::one();
        let mut n = 0i64;
        loop {
            pow = pow.checked_mul(&u)?;
            if pow.is_zero() {
                break;
            }
            // binom(1/2, n+1) = binom(1/2, n) * (1/2 - n)/(n+1)
            coeff = &coeff * &GaussRat::from_frac(1 - 2 * n, 2 * (n + 1));
            acc = acc.checked_add(&pow.scale(&coeff))?;
            n += 1;
        }
        Ok(acc.scale(body_root))
    }

    /// Left partial derivative with respect to the generator ζ_k (1-based).
    pub fn partial_gen(&self, k: u32) -> Supernumber {
        assert!(k >= 1 && k <= self.ctx.l);
        let bit = 1u64 << (k - 1);
        let mut out = Supernumber::zero(self.ctx);
        for (m, c) in &self.terms {
            if m & bit == 0 {
                continue;
            }
            // sign from moving ζ_k to the front: number of generators below k in m
            let below = (m & (bit - 1)).count_ones();
            let rest = m & !bit;
            if below % 2 == 0 {
                out.add_term(rest, c.clone());
            } else {
                out.add_term(rest, -c);
            }
        }
        out
    }

    /// Restriction/extension between Λ_L and Λ_{L'}: terms referencing
    /// generators above the target are dropped.
    pub fn cast(&self, target: GrassCtx) -> Supernumber {
        let keep = if target.l == MAX_GENERATORS {
            u64::MAX
        } else {
            (1u64 << target.l) - 1
        };
        Supernumber {
            ctx: target,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| *m & !keep == 0)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    /// Extract a Gaussian rational if the value is purely scalar.
    pub fn as_scalar(&self) -> Option<GaussRat> {
        if self.terms.keys().all(|m| *m == 0) {
            Some(self.body())
        } else {
            None
        }
    }
}

impl fmt::Debug for Supernumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Supernumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *m == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "({c})")?;
                let mut rest = *m;
                while rest != 0 {
                    let i = rest.trailing_zeros();
                    rest &= rest - 1;
                    write!(f, "z{}", i + 1)?;
                }
            }
        }
        Ok(())
    }
}

// Reference-based operators panic on context mismatch; use the checked_*
// methods where the mismatch must surface as an error.
impl std::ops::Add for &Supernumber {
    type Output = Supernumber;
    fn add(self, rhs: &Supernumber) -> Supernumber {
        self.checked_add(rhs).expect("context mismatch")
    }
}

impl std::ops::Sub for &Supernumber {
    type Output = Supernumber;
    fn sub(self, rhs: &Supernumber) -> Supernumber {
        self.checked_sub(rhs).expect("context mismatch")
    }
}

impl std::ops::Mul for &Supernumber {
    type Output = Supernumber;
    fn mul(self, rhs: &Supernumber) -> Supernumber {
        self.checked_mul(rhs).expect("context mismatch")
    }
}

impl std::ops::Neg for &Supernumber {
    type Output = Supernumber;
    fn neg(self) -> Supernumber {
        Supernumber::neg(self)
    }
}
