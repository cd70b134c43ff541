//! Supernumber-valued polynomials in two nilpotent bookkeeping grades.
//!
//! The grade (p, q) tracks homogeneous degree in the two coordinates' data
//! during the sewing recursion; multiplication silently discards cells beyond
//! the declared caps (a documented contract, not an error).

use crate::coeff::GrassRing;
use crate::error::{Error, Result};
use crate::grassmann::Parity;
use crate::scalar::GaussRat;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BiCaps {
    pub da: u32,
    pub db: u32,
}

impl BiCaps {
    pub fn new(da: u32, db: u32) -> Self {
        BiCaps { da, db }
    }
}

#[derive(Clone, PartialEq)]
pub struct Bigraded<V: GrassRing> {
    caps: BiCaps,
    proto: V, // a zero of the cell ring, carrying its context
    cells: BTreeMap<(u32, u32), V>,
}

impl<V: GrassRing> Bigraded<V> {
    pub fn zero(caps: BiCaps, proto_zero: V) -> Self {
        Bigraded {
            caps,
            proto: proto_zero.zero_like(),
            cells: BTreeMap::new(),
        }
    }

    pub fn from_cell(caps: BiCaps, p: u32, q: u32, v: V) -> Self {
        let mut out = Bigraded::zero(caps, v.zero_like());
        out.add_cell(p, q, v);
        out
    }

    /// Embed a plain value as the classical (0,0) cell.
    pub fn classical(caps: BiCaps, v: V) -> Self {
        Bigraded::from_cell(caps, 0, 0, v)
    }

    pub fn caps(&self) -> BiCaps {
        self.caps
    }

    pub fn proto(&self) -> &V {
        &self.proto
    }

    pub fn cell(&self, p: u32, q: u32) -> V {
        self.cells
            .get(&(p, q))
            .cloned()
            .unwrap_or_else(|| self.proto.zero_like())
    }

    pub fn cells(&self) -> impl Iterator<Item = (&(u32, u32), &V)> {
        self.cells.iter()
    }

    pub fn add_cell(&mut self, p: u32, q: u32, v: V) {
        if p > self.caps.da || q > self.caps.db || v.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.cells.entry((p, q)) {
            Entry::Vacant(e) => {
                e.insert(v);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().add(&v);
                if sum.is_zero() {
                    e.remove();
                } else {
                    e.insert(sum);
                }
            }
        }
    }

    /// Evaluate both bookkeeping nilpotents at 1: the plain-ring value.
    pub fn collapse(&self) -> V {
        let mut acc = self.proto.zero_like();
        for v in self.cells.values() {
            acc = acc.add(v);
        }
        acc
    }

    /// True when some cell on the top layer (p = da or q = db) is nonzero,
    /// i.e. the truncation may have clipped genuinely nonzero higher terms.
    pub fn touches_cap(&self) -> bool {
        self.cells
            .keys()
            .any(|&(p, q)| p == self.caps.da || q == self.caps.db)
    }

    pub fn max_total_degree(&self) -> u32 {
        self.cells.keys().map(|&(p, q)| p + q).max().unwrap_or(0)
    }

    fn compatible(&self, rhs: &Self) -> bool {
        self.caps == rhs.caps
    }
}

impl<V: GrassRing> GrassRing for Bigraded<V> {
    fn zero_like(&self) -> Self {
        Bigraded::zero(self.caps, self.proto.clone())
    }
    fn one_like(&self) -> Self {
        Bigraded::classical(self.caps, self.proto.one_like())
    }
    fn is_zero(&self) -> bool {
        self.cells.is_empty()
    }
    fn add(&self, rhs: &Self) -> Self {
        assert!(self.compatible(rhs), "bigraded caps mismatch");
        let mut out = self.clone();
        for ((p, q), v) in &rhs.cells {
            out.add_cell(*p, *q, v.clone());
        }
        out
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }
    fn neg(&self) -> Self {
        Bigraded {
            caps: self.caps,
            proto: self.proto.clone(),
            cells: self.cells.iter().map(|(k, v)| (*k, v.neg())).collect(),
        }
    }
    fn mul(&self, rhs: &Self) -> Self {
        assert!(self.compatible(rhs), "bigraded caps mismatch");
        let mut out = self.zero_like();
        for ((pa, qa), va) in &self.cells {
            for ((pb, qb), vb) in &rhs.cells {
                let (p, q) = (pa + pb, qa + qb);
                if p > self.caps.da || q > self.caps.db {
                    continue;
                }
                out.add_cell(p, q, va.mul(vb));
            }
        }
        out
    }
    fn scale(&self, r: &GaussRat) -> Self {
        if r.is_zero() {
            return self.zero_like();
        }
        Bigraded {
            caps: self.caps,
            proto: self.proto.clone(),
            cells: self.cells.iter().map(|(k, v)| (*k, v.scale(r))).collect(),
        }
    }
    fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for v in self.cells.values() {
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
        Bigraded {
            caps: self.caps,
            proto: self.proto.clone(),
            cells: self
                .cells
                .iter()
                .map(|(k, v)| (*k, v.parity_flip()))
                .collect(),
        }
    }
    fn is_invertible(&self) -> bool {
        self.cell(0, 0).is_invertible()
    }
    fn try_invert(&self) -> Result<Self> {
        let head = self.cell(0, 0);
        if !head.is_invertible() {
            return Err(Error::NotInvertible);
        }
        let head_inv = Bigraded::classical(self.caps, head.try_invert()?);
        // u = head (1 + w), w strictly positive bidegree: geometric series
        // terminates at the caps.
        let w = head_inv.mul(self).sub(&self.one_like());
        let mut acc = self.one_like();
        let mut pow = self.one_like();
        for _ in 0..(self.caps.da + self.caps.db) {
            pow = pow.mul(&w).neg();
            if pow.is_zero() {
                break;
            }
            acc = acc.add(&pow);
        }
        Ok(acc.mul(&head_inv))
    }
    fn try_exp(&self) -> Result<Self> {
        // exp(head) * exp(rest): the head must itself be nilpotent in the
        // cell ring; the rest terminates at the caps.
        let head = self.cell(0, 0);
        let head_exp = Bigraded::classical(self.caps, head.try_exp()?);
        let rest = self.sub(&Bigraded::classical(self.caps, head));
        let mut acc = self.one_like();
        let mut term = self.one_like();
        for n in 1..=(self.caps.da + self.caps.db + 1) as i64 {
            term = term.mul(&rest).scale(&GaussRat::from_frac(1, n));
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term);
        }
        Ok(acc.mul(&head_exp))
    }
    fn try_log(&self) -> Result<Self> {
        let head = self.cell(0, 0);
        let head_log = Bigraded::classical(self.caps, head.try_log()?);
        let head_inv = Bigraded::classical(self.caps, head.try_invert()?);
        let w = head_inv.mul(self).sub(&self.one_like());
        let mut acc = self.zero_like();
        let mut pow = self.one_like();
        for n in 1..=(self.caps.da + self.caps.db + 1) as i64 {
            pow = pow.mul(&w);
            if pow.is_zero() {
                break;
            }
            let sign = if n % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&pow.scale(&GaussRat::from_frac(sign, n)));
        }
        Ok(acc.add(&head_log))
    }
    fn is_nilpotent_step(&self) -> bool {
        let head = self.cell(0, 0);
        head.is_zero() || head.is_nilpotent_step()
    }
    fn nil_product_bound(&self) -> u64 {
        self.proto.nil_product_bound() + self.caps.da as u64 + self.caps.db as u64
    }
}

impl<V: GrassRing> fmt::Debug for Bigraded<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<V: GrassRing> fmt::Display for Bigraded<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cells.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((p, q), v) in &self.cells {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "eA^{p} eB^{q} [{v}]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{GrassCtx, Supernumber};

    fn proto() -> Supernumber {
        Supernumber::zero(GrassCtx::new(2))
    }

    #[test]
    fn truncation_at_caps() {
        let caps = BiCaps::new(1, 1);
        let a = Bigraded::from_cell(caps, 1, 0, Supernumber::one(GrassCtx::new(2)));
        let b = Bigraded::from_cell(caps, 1, 1, Supernumber::one(GrassCtx::new(2)));
        assert!(a.mul(&b).is_zero());
        let c = Bigraded::from_cell(caps, 0, 1, Supernumber::one(GrassCtx::new(2)));
        let ab = a.mul(&c);
        assert_eq!(ab.cell(1, 1), Supernumber::one(GrassCtx::new(2)));
    }

    #[test]
    fn inverse_roundtrip() {
        let caps = BiCaps::new(2, 2);
        let one = Bigraded::classical(caps, Supernumber::from_int(GrassCtx::new(2), 3));
        let mut u = one.clone();
        u.add_cell(1, 1, Supernumber::from_int(GrassCtx::new(2), 5));
        u.add_cell(0, 1, Supernumber::gen(GrassCtx::new(2), 1));
        let inv = u.try_invert().unwrap();
        assert_eq!(u.mul(&inv), u.one_like());
    }

    #[test]
    fn exp_log_roundtrip() {
        let caps = BiCaps::new(2, 2);
        let mut u = Bigraded::zero(caps, proto());
        u.add_cell(1, 0, Supernumber::from_int(GrassCtx::new(2), 2));
        u.add_cell(1, 1, Supernumber::from_frac(GrassCtx::new(2), 1, 3));
        let e = u.try_exp().unwrap();
        assert_eq!(e.try_log().unwrap(), u);
    }

    #[test]
    fn associativity_up_to_caps() {
        let caps = BiCaps::new(2, 1);
        let ctx = GrassCtx::new(2);
        let a = {
            let mut x = Bigraded::classical(caps, Supernumber::from_int(ctx, 2));
            x.add_cell(1, 0, Supernumber::gen(ctx, 1));
            x
        };
        let b = {
            let mut x = Bigraded::from_cell(caps, 0, 1, Supernumber::from_int(ctx, 3));
            x.add_cell(1, 0, Supernumber::one(ctx));
            x
        };
        let c = {
            let mut x = Bigraded::classical(caps, Supernumber::gen(ctx, 2));
            x.add_cell(1, 1, Supernumber::from_int(ctx, -1));
            x
        };
        assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
    }
}
