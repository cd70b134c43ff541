//! Laurent polynomials in one formal invertible even symbol with supernumber
//! coefficients.  Used as a coefficient mode when a scaling datum (a square
//! root of a leading coefficient, or a puncture position) is kept symbolic
//! instead of being evaluated.

use crate::coeff::GrassRing;
use crate::error::{Error, Result};
use crate::grassmann::{GrassCtx, Parity, Supernumber};
use crate::scalar::GaussRat;
use std::collections::BTreeMap;
use std::fmt;

/// Σ_k c_k s^k where s is the formal symbol (think α₀^{1/2} with integer
/// powers of the half symbol, or a symbolic puncture position z).
#[derive(Clone, PartialEq)]
pub struct SymLaurent {
    ctx: GrassCtx,
    terms: BTreeMap<i64, Supernumber>,
}

impl SymLaurent {
    pub fn zero(ctx: GrassCtx) -> Self {
        SymLaurent {
            ctx,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(v: Supernumber) -> Self {
        let mut out = SymLaurent::zero(v.ctx());
        out.add_term(0, v);
        out
    }

    /// c · s^k
    pub fn monomial(k: i64, v: Supernumber) -> Self {
        let mut out = SymLaurent::zero(v.ctx());
        out.add_term(k, v);
        out
    }

    /// The symbol itself.
    pub fn symbol(ctx: GrassCtx) -> Self {
        SymLaurent::monomial(1, Supernumber::one(ctx))
    }

    pub fn ctx(&self) -> GrassCtx {
        self.ctx
    }

    pub fn coeff(&self, k: i64) -> Supernumber {
        self.terms
            .get(&k)
            .cloned()
            .unwrap_or_else(|| Supernumber::zero(self.ctx))
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &Supernumber)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    pub fn min_power(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn max_power(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    fn add_term(&mut self, k: i64, v: Supernumber) {
        if v.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(k) {
            Entry::Vacant(e) => {
                e.insert(v);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().checked_add(&v).expect("context mismatch");
                if sum.is_zero() {
                    e.remove();
                } else {
                    e.insert(sum);
                }
            }
        }
    }
}

impl GrassRing for SymLaurent {
    fn zero_like(&self) -> Self {
        SymLaurent::zero(self.ctx)
    }
    fn one_like(&self) -> Self {
        SymLaurent::constant(Supernumber::one(self.ctx))
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(*k, v.clone());
        }
        out
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }
    fn neg(&self) -> Self {
        SymLaurent {
            ctx: self.ctx,
            terms: self.terms.iter().map(|(k, v)| (*k, v.neg())).collect(),
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        let mut out = self.zero_like();
        for (ka, va) in &self.terms {
            for (kb, vb) in &rhs.terms {
                out.add_term(ka + kb, va.checked_mul(vb).expect("context mismatch"));
            }
        }
        out
    }
    fn scale(&self, r: &GaussRat) -> Self {
        if r.is_zero() {
            return self.zero_like();
        }
        SymLaurent {
            ctx: self.ctx,
            terms: self.terms.iter().map(|(k, v)| (*k, v.scale(r))).collect(),
        }
    }
    fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for v in self.terms.values() {
            match v.parity() {
                Parity::Even => even = true,
                Parity::Odd => odd = true,
                Parity::Mixed => return Parity::Mixed,
                Parity::Zero => {}
            }
        }
        match (even, odd) {
            (false, false) => Parity::Zero,
            (true, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Mixed,
        }
    }
    fn parity_flip(&self) -> Self {
        SymLaurent {
            ctx: self.ctx,
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (*k, v.parity_flip()))
                .collect(),
        }
    }
    fn is_invertible(&self) -> bool {
        // invertible within Laurent polynomials: a single invertible pivot
        // term with nilpotent companions
        self.try_invert().is_ok()
    }
    fn try_invert(&self) -> Result<Self> {
        // pivot on an invertible coefficient; all other terms must be
        // nilpotent for the geometric series to terminate
        let mut pivot: Option<(i64, Supernumber)> = None;
        for (k, c) in self.terms() {
            if c.is_invertible() {
                if pivot.is_some() {
                    return Err(Error::NotInvertible);
                }
                pivot = Some((k, c.clone()));
            } else if !c.body().is_zero() {
                return Err(Error::NotInvertible);
            }
        }
        let (k0, head) = pivot.ok_or(Error::NotInvertible)?;
        let head_inv = SymLaurent::monomial(-k0, head.invert()?);
        // u = head_mono (1 + w); the geometric series must terminate, which
        // happens exactly when the higher coefficients are soul-valued.
        let w = head_inv.mul(self).sub(&self.one_like());
        let mut acc = self.one_like();
        let mut pow = self.one_like();
        for _ in 0..=(2 * self.ctx.generators() + 2) {
            pow = pow.mul(&w).neg();
            if pow.is_zero() {
                return Ok(acc.mul(&head_inv));
            }
            acc = acc.add(&pow);
        }
        Err(Error::NotInvertible)
    }
    fn try_exp(&self) -> Result<Self> {
        let mut acc = self.one_like();
        let mut term = self.one_like();
        for n in 1..=(2 * self.ctx.generators() + 2) as i64 {
            term = term.mul(self).scale(&GaussRat::from_frac(1, n));
            if term.is_zero() {
                return Ok(acc);
            }
            acc = acc.add(&term);
        }
        Err(Error::NotNilpotent)
    }
    fn try_log(&self) -> Result<Self> {
        let w = self.sub(&self.one_like());
        let mut acc = self.zero_like();
        let mut pow = self.one_like();
        for n in 1..=(2 * self.ctx.generators() + 2) as i64 {
            pow = pow.mul(&w);
            if pow.is_zero() {
                return Ok(acc);
            }
            let sign = if n % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&pow.scale(&GaussRat::from_frac(sign, n)));
        }
        Err(Error::LogRequiresBodyOne)
    }
    fn is_nilpotent_step(&self) -> bool {
        self.terms.values().all(|v| v.body().is_zero())
    }
    fn nil_product_bound(&self) -> u64 {
        self.ctx.generators() as u64 + 1
    }
}

impl fmt::Debug for SymLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for SymLaurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "s^{k}({v})")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_inverse() {
        let ctx = GrassCtx::new(2);
        let a = SymLaurent::monomial(3, Supernumber::from_int(ctx, 2));
        let inv = a.try_invert().unwrap();
        assert_eq!(a.mul(&inv), a.one_like());
    }

    #[test]
    fn soul_corrected_inverse() {
        let ctx = GrassCtx::new(2);
        let z12 = Supernumber::gen(ctx, 1)
            .checked_mul(&Supernumber::gen(ctx, 2))
            .unwrap();
        let a = SymLaurent::monomial(-1, Supernumber::one(ctx)).add(&SymLaurent::monomial(2, z12));
        let inv = a.try_invert().unwrap();
        assert_eq!(a.mul(&inv), a.one_like());
    }

    #[test]
    fn body_tail_is_not_invertible() {
        let ctx = GrassCtx::new(2);
        let a = SymLaurent::constant(Supernumber::one(ctx))
            .add(&SymLaurent::monomial(1, Supernumber::one(ctx)));
        assert!(a.try_invert().is_err());
    }
}
