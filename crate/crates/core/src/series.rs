//! Truncated Laurent superfunctions in one even variable x and one odd
//! variable φ, with the superconformal structure operations.
//!
//! A value represents the element u = Σ c0_n x^n + Σ φ c1_n x^n of
//! R((x))[φ].  The pair view H(x,φ) = (f(x)+φξ(x), ψ(x)+φg(x)) is recovered
//! by coefficient parity: f and ψ are the even/odd parts of c0, ξ and g the
//! odd/even parts of c1.
//!
//! Windows are propagated pessimistically: an operation never reports a
//! coefficient it cannot certify.  `cert.lo == None` means every coefficient
//! below the stored band is known to vanish (and likewise for `hi`).

use crate::coeff::GrassRing;
use crate::error::{Error, Result};
use crate::scalar::GaussRat;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "window lo must not exceed hi");
        Window { lo, hi }
    }
}

/// Certified exponent band; `None` = certified out to infinity on that side.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Cert {
    pub lo: Option<i64>,
    pub hi: Option<i64>,
}

impl Cert {
    pub const ALL: Cert = Cert { lo: None, hi: None };

    pub fn band(lo: i64, hi: i64) -> Self {
        Cert {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn contains(&self, n: i64) -> bool {
        self.lo.map_or(true, |l| n >= l) && self.hi.map_or(true, |h| n <= h)
    }

    pub fn intersect(&self, other: &Cert) -> Cert {
        Cert {
            lo: match (self.lo, other.lo) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => Some(a.max(b)),
            },
            hi: match (self.hi, other.hi) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => Some(a.min(b)),
            },
        }
    }

    pub fn shift(&self, k: i64) -> Cert {
        Cert {
            lo: self.lo.map(|l| l + k),
            hi: self.hi.map(|h| h + k),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!((self.lo, self.hi), (Some(l), Some(h)) if l > h)
    }
}

/// Which end of the inner series dominates when negative powers are expanded.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExpandAt {
    /// The lowest-degree term is the large part; the tail of strictly higher
    /// degree is small.  Covers series vanishing at zero and shifts expanded
    /// around an invertible constant.
    Zero,
    /// The highest-degree term is the large part; the tail of strictly lower
    /// degree is small.  Covers series at infinity and shifts expanded in
    /// decreasing powers of the variable.
    Infinity,
}

#[derive(Clone, PartialEq)]
pub struct SuperSeries<C: GrassRing> {
    cert: Cert,
    c0: BTreeMap<i64, C>,
    c1: BTreeMap<i64, C>,
    proto: C,
}

fn map_insert<C: GrassRing>(map: &mut BTreeMap<i64, C>, n: i64, v: C) {
    if v.is_zero() {
        return;
    }
    use std::collections::btree_map::Entry;
    match map.entry(n) {
        Entry::Vacant(e) => {
            e.insert(v);
        }
        Entry::Occupied(mut e) => {
            let s = e.get().add(&v);
            if s.is_zero() {
                e.remove();
            } else {
                e.insert(s);
            }
        }
    }
}

impl<C: GrassRing> SuperSeries<C> {
    pub fn zero(proto: &C) -> Self {
        SuperSeries {
            cert: Cert::ALL,
            c0: BTreeMap::new(),
            c1: BTreeMap::new(),
            proto: proto.zero_like(),
        }
    }

    pub fn constant(v: C) -> Self {
        let mut s = SuperSeries::zero(&v);
        map_insert(&mut s.c0, 0, v);
        s
    }

    /// The identity map (x, φ) as an element: x + φ.
    pub fn identity(proto: &C) -> Self {
        let mut s = SuperSeries::zero(proto);
        map_insert(&mut s.c0, 1, proto.one_like());
        map_insert(&mut s.c1, 0, proto.one_like());
        s
    }

    /// The inversion I(x,φ) = (1/x, iφ/x) as an element: x⁻¹ + iφx⁻¹.
    pub fn inversion(proto: &C) -> Self {
        let mut s = SuperSeries::zero(proto);
        map_insert(&mut s.c0, -1, proto.one_like());
        map_insert(&mut s.c1, -1, proto.from_rat(&GaussRat::i()));
        s
    }

    /// I⁻¹(x,φ) = (1/x, −iφ/x).
    pub fn inversion_inverse(proto: &C) -> Self {
        let mut s = SuperSeries::zero(proto);
        map_insert(&mut s.c0, -1, proto.one_like());
        map_insert(&mut s.c1, -1, proto.from_rat(&GaussRat::i()).neg());
        s
    }

    /// The superconformal shift s_{(z,θ)}(x,φ) = (x−z−φθ, φ−θ).
    pub fn shift(z: &C, theta: &C) -> Self {
        let proto = z.zero_like();
        let mut s = SuperSeries::zero(&proto);
        map_insert(&mut s.c0, 1, proto.one_like());
        map_insert(&mut s.c0, 0, z.neg().sub(theta));
        map_insert(&mut s.c1, 0, proto.one_like().sub(theta));
        s
    }

    /// Inverse shift s_{(z,θ)}⁻¹(x,φ) = (x+z+φθ, φ+θ).
    pub fn shift_inverse(z: &C, theta: &C) -> Self {
        let proto = z.zero_like();
        let mut s = SuperSeries::zero(&proto);
        map_insert(&mut s.c0, 1, proto.one_like());
        map_insert(&mut s.c0, 0, z.add(theta));
        map_insert(&mut s.c1, 0, proto.one_like().add(theta));
        s
    }

    pub fn from_parts(
        c0: impl IntoIterator<Item = (i64, C)>,
        c1: impl IntoIterator<Item = (i64, C)>,
        cert: Cert,
        proto: &C,
    ) -> Self {
        let mut s = SuperSeries::zero(proto);
        s.cert = cert;
        for (n, v) in c0 {
            map_insert(&mut s.c0, n, v);
        }
        for (n, v) in c1 {
            map_insert(&mut s.c1, n, v);
        }
        s.normalize();
        s
    }

    pub fn proto(&self) -> &C {
        &self.proto
    }

    pub fn cert(&self) -> Cert {
        self.cert
    }

    pub fn is_zero(&self) -> bool {
        self.c0.is_empty() && self.c1.is_empty()
    }

    pub fn coeff0(&self, n: i64) -> C {
        self.c0
            .get(&n)
            .cloned()
            .unwrap_or_else(|| self.proto.zero_like())
    }

    pub fn coeff1(&self, n: i64) -> C {
        self.c1
            .get(&n)
            .cloned()
            .unwrap_or_else(|| self.proto.zero_like())
    }

    pub fn iter0(&self) -> impl Iterator<Item = (i64, &C)> {
        self.c0.iter().map(|(n, c)| (*n, c))
    }

    pub fn iter1(&self) -> impl Iterator<Item = (i64, &C)> {
        self.c1.iter().map(|(n, c)| (*n, c))
    }

    /// f(x): even part of the φ⁰ coefficients.
    pub fn f_coeff(&self, n: i64) -> C {
        even_part(&self.coeff0(n))
    }

    /// ψ(x): odd part of the φ⁰ coefficients.
    pub fn psi_coeff(&self, n: i64) -> C {
        odd_part(&self.coeff0(n))
    }

    /// ξ(x): odd part of the φ¹ coefficients.
    pub fn xi_coeff(&self, n: i64) -> C {
        odd_part(&self.coeff1(n))
    }

    /// g(x): even part of the φ¹ coefficients.
    pub fn g_coeff(&self, n: i64) -> C {
        even_part(&self.coeff1(n))
    }

    /// The even component H⁰ = f + φξ as an element.
    pub fn even_element(&self) -> Self {
        let mut s = SuperSeries::zero(&self.proto);
        s.cert = self.cert;
        for (n, c) in &self.c0 {
            map_insert(&mut s.c0, *n, even_part(c));
        }
        for (n, c) in &self.c1 {
            map_insert(&mut s.c1, *n, odd_part(c));
        }
        s
    }

    /// The odd component H¹ = ψ + φg as an element.
    pub fn odd_element(&self) -> Self {
        let mut s = SuperSeries::zero(&self.proto);
        s.cert = self.cert;
        for (n, c) in &self.c0 {
            map_insert(&mut s.c0, *n, odd_part(c));
        }
        for (n, c) in &self.c1 {
            map_insert(&mut s.c1, *n, even_part(c));
        }
        s
    }

    fn normalize(&mut self) {
        let cert = self.cert;
        self.c0.retain(|n, v| cert.contains(*n) && !v.is_zero());
        self.c1.retain(|n, v| cert.contains(*n) && !v.is_zero());
    }

    /// Restrict to the budget band.  Exact-side knowledge survives when no
    /// stored coefficient lies beyond the boundary.
    pub fn clamp(&self, w: Window) -> Self {
        let mut out = self.clone();
        out.cert = Cert {
            lo: match out.cert.lo {
                None if out.min_key().map_or(true, |k| k >= w.lo) => None,
                None => Some(w.lo),
                Some(l) => Some(l.max(w.lo)),
            },
            hi: match out.cert.hi {
                None if out.max_key().map_or(true, |k| k <= w.hi) => None,
                None => Some(w.hi),
                Some(h) => Some(h.min(w.hi)),
            },
        };
        out.normalize();
        out
    }

    pub fn clamp_cert(&self, cert: Cert) -> Self {
        let mut out = self.clone();
        out.cert = out.cert.intersect(&cert);
        out.normalize();
        out
    }

    /// Certified-on-all-exponents check used when a series is known, on
    /// structural grounds, to be a Laurent polynomial: callers may promote
    /// the certification after checking the structural bound.
    pub fn promote_exact(&self) -> Self {
        let mut out = self.clone();
        out.cert = Cert::ALL;
        out
    }

    fn min_key(&self) -> Option<i64> {
        let a = self.c0.keys().next();
        let b = self.c1.keys().next();
        match (a, b) {
            (None, None) => None,
            (Some(x), None) => Some(*x),
            (None, Some(y)) => Some(*y),
            (Some(x), Some(y)) => Some(*x.min(y)),
        }
    }

    fn max_key(&self) -> Option<i64> {
        let a = self.c0.keys().next_back();
        let b = self.c1.keys().next_back();
        match (a, b) {
            (None, None) => None,
            (Some(x), None) => Some(*x),
            (None, Some(y)) => Some(*y),
            (Some(x), Some(y)) => Some(*x.max(y)),
        }
    }

    /// Lower bound of the possible support; `None` when the series is
    /// exactly zero everywhere below any bound (empty + exact).
    fn support_lo(&self) -> Bound {
        if self.cert.lo.is_none() {
            match self.min_key() {
                Some(k) => Bound::At(k),
                None => Bound::Empty,
            }
        } else {
            Bound::Unbounded
        }
    }

    fn support_hi(&self) -> Bound {
        if self.cert.hi.is_none() {
            match self.max_key() {
                Some(k) => Bound::At(k),
                None => Bound::Empty,
            }
        } else {
            Bound::Unbounded
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = self.cert.intersect(&rhs.cert);
        for (n, c) in &self.c0 {
            map_insert(&mut out.c0, *n, c.clone());
        }
        for (n, c) in &rhs.c0 {
            map_insert(&mut out.c0, *n, c.clone());
        }
        for (n, c) in &self.c1 {
            map_insert(&mut out.c1, *n, c.clone());
        }
        for (n, c) in &rhs.c1 {
            map_insert(&mut out.c1, *n, c.clone());
        }
        out.normalize();
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for v in out.c0.values_mut() {
            *v = v.neg();
        }
        for v in out.c1.values_mut() {
            *v = v.neg();
        }
        out
    }

    /// Left multiplication by a coefficient: k·(P + φQ) = kP + φσ(k)Q.
    pub fn scale_coeff_left(&self, k: &C) -> Self {
        if k.is_zero() {
            let mut z = SuperSeries::zero(&self.proto);
            z.cert = Cert::ALL;
            return z;
        }
        let flipped = k.parity_flip();
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = self.cert;
        for (n, c) in &self.c0 {
            map_insert(&mut out.c0, *n, k.mul(c));
        }
        for (n, c) in &self.c1 {
            map_insert(&mut out.c1, *n, flipped.mul(c));
        }
        out
    }

    /// Right multiplication by a coefficient: (P + φQ)·k.
    pub fn scale_coeff_right(&self, k: &C) -> Self {
        if k.is_zero() {
            let mut z = SuperSeries::zero(&self.proto);
            z.cert = Cert::ALL;
            return z;
        }
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = self.cert;
        for (n, c) in &self.c0 {
            map_insert(&mut out.c0, *n, c.mul(k));
        }
        for (n, c) in &self.c1 {
            map_insert(&mut out.c1, *n, c.mul(k));
        }
        out
    }

    pub fn scale_rat(&self, r: &GaussRat) -> Self {
        self.scale_coeff_left(&self.proto.from_rat(r))
    }

    /// Multiply by the monomial c·x^k.
    pub fn mul_monomial(&self, k: i64, c: &C) -> Self {
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = self.cert.shift(k);
        for (n, v) in &self.c0 {
            map_insert(&mut out.c0, n + k, c.mul(v));
        }
        let flipped = c.parity_flip();
        for (n, v) in &self.c1 {
            map_insert(&mut out.c1, n + k, flipped.mul(v));
        }
        out.normalize();
        out
    }

    /// Left multiplication by φ: φ(P + φQ) = φP.
    pub fn mul_phi_left(&self) -> Self {
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = self.cert;
        out.c1 = self.c0.clone();
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        // (P1 + φQ1)(P2 + φQ2) = P1P2 + φ(σ(P1)Q2 + Q1P2)
        if self.is_zero() && self.cert == Cert::ALL {
            return self.clone();
        }
        if rhs.is_zero() && rhs.cert == Cert::ALL {
            return rhs.clone();
        }
        let cert = mul_cert(self, rhs);
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = cert;
        if out.cert.is_empty() {
            return out;
        }
        for (na, ca) in &self.c0 {
            for (nb, cb) in &rhs.c0 {
                map_insert(&mut out.c0, na + nb, ca.mul(cb));
            }
            let flipped = ca.parity_flip();
            for (nb, cb) in &rhs.c1 {
                map_insert(&mut out.c1, na + nb, flipped.mul(cb));
            }
        }
        for (na, ca) in &self.c1 {
            for (nb, cb) in &rhs.c0 {
                map_insert(&mut out.c1, na + nb, ca.mul(cb));
            }
        }
        out.normalize();
        out
    }

    /// ∂/∂x.
    pub fn partial_x(&self) -> Self {
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = self.cert.shift(-1);
        for (n, c) in &self.c0 {
            map_insert(&mut out.c0, n - 1, c.scale(&GaussRat::from_int(*n)));
        }
        for (n, c) in &self.c1 {
            map_insert(&mut out.c1, n - 1, c.scale(&GaussRat::from_int(*n)));
        }
        out.normalize();
        out
    }

    /// Left ∂/∂φ: ∂φ(P + φQ) = Q.
    pub fn partial_phi(&self) -> Self {
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = self.cert;
        out.c0 = self.c1.clone();
        out
    }

    /// D = ∂/∂φ + φ∂/∂x.
    pub fn d_op(&self) -> Self {
        let dphi = self.partial_phi();
        let dx = self.partial_x().mul_phi_left();
        dphi.add(&dx)
    }

    /// Substitute (x, φ) ↦ (b²x, bφ) for invertible even b.
    pub fn scale_substitution(&self, b: &C) -> Result<Self> {
        if !b.is_invertible() {
            return Err(Error::NotInvertible);
        }
        if !b.is_even_or_zero() {
            return Err(Error::ParityViolation("scaling datum must be even".into()));
        }
        let b2 = b.mul(b);
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = self.cert;
        for (n, c) in &self.c0 {
            map_insert(&mut out.c0, *n, b2.pow_i64(*n)?.mul(c));
        }
        for (n, c) in &self.c1 {
            map_insert(&mut out.c1, *n, b2.pow_i64(*n)?.mul(b).mul(c));
        }
        Ok(out)
    }

    /// Split into the nonpositive-degree part and the strictly-positive part.
    pub fn split_pm(&self) -> (Self, Self) {
        let mut minus = SuperSeries::zero(&self.proto);
        let mut plus = SuperSeries::zero(&self.proto);
        minus.cert = Cert {
            lo: self.cert.lo,
            hi: match self.cert.hi {
                Some(h) if h < 0 => Some(h),
                _ => None,
            },
        };
        plus.cert = Cert {
            lo: match self.cert.lo {
                Some(l) if l > 1 => Some(l),
                _ => None,
            },
            hi: self.cert.hi,
        };
        for (n, c) in &self.c0 {
            if *n <= 0 {
                map_insert(&mut minus.c0, *n, c.clone());
            } else {
                map_insert(&mut plus.c0, *n, c.clone());
            }
        }
        for (n, c) in &self.c1 {
            if *n <= 0 {
                map_insert(&mut minus.c1, *n, c.clone());
            } else {
                map_insert(&mut plus.c1, *n, c.clone());
            }
        }
        (minus, plus)
    }

    /// Exact inverse of the element, expanding negative powers per `mode`.
    /// `budget` bounds how far the certification is carried.
    pub fn invert_element(&self, mode: ExpandAt, budget: Window) -> Result<Self> {
        // X = F + φΞ with F even-coefficient, Ξ odd ⟹ X⁻¹ = F⁻¹ − φ F⁻² Ξ.
        if !self.is_even() {
            return Err(Error::ParityViolation(
                "only even elements can be inverted as substitution arguments".into(),
            ));
        }
        let f = SuperSeries {
            cert: self.cert,
            c0: self.c0.clone(),
            c1: BTreeMap::new(),
            proto: self.proto.clone(),
        };
        let finv = invert_plain(&f, mode, budget)?;
        let finv2 = finv.mul(&finv);
        let mut xi = SuperSeries::zero(&self.proto);
        xi.cert = self.cert;
        xi.c0 = self.c1.clone();
        let correction = finv2.mul(&xi).mul_phi_left().neg();
        Ok(finv.add(&correction))
    }

    pub fn pow_element(&self, n: i64, mode: ExpandAt, budget: Window) -> Result<Self> {
        if n == 0 {
            return Ok(SuperSeries::constant(self.proto.one_like()));
        }
        let base = if n < 0 {
            self.invert_element(mode, budget)?
        } else {
            self.clone()
        };
        let mut acc = SuperSeries::constant(self.proto.one_like());
        for _ in 0..n.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    fn is_even(&self) -> bool {
        self.c0.values().all(|c| c.is_even_or_zero())
            && self.c1.values().all(|c| c.is_odd_or_zero())
    }

    /// Composition (outer ∘ inner)(x,φ) = outer(inner⁰, inner¹).
    pub fn compose(&self, inner: &Self, mode: ExpandAt, budget: Window) -> Result<Self> {
        let x_el = inner.even_element();
        let phi_el = inner.odd_element();

        // Collect needed powers of X.
        let mut result = SuperSeries::zero(&self.proto);
        result.cert = Cert::ALL;

        let mut pow_cache: BTreeMap<i64, SuperSeries<C>> = BTreeMap::new();
        let one = SuperSeries::constant(self.proto.one_like());
        pow_cache.insert(0, one);

        let get_pow =
            |n: i64, cache: &mut BTreeMap<i64, SuperSeries<C>>| -> Result<SuperSeries<C>> {
                if let Some(p) = cache.get(&n) {
                    return Ok(p.clone());
                }
                // build from nearest cached in the right direction
                let step = if n > 0 {
                    x_el.clone()
                } else {
                    if !cache.contains_key(&-1) {
                        let inv = x_el.invert_element(mode, budget)?;
                        cache.insert(-1, inv);
                    }
                    cache.get(&-1).unwrap().clone()
                };
                let dir = if n > 0 { 1 } else { -1 };
                let mut k = n - dir;
                while !cache.contains_key(&k) {
                    k -= dir;
                }
                let mut acc = cache.get(&k).unwrap().clone();
                while k != n {
                    acc = acc.mul(&step);
                    k += dir;
                    cache.insert(k, acc.clone());
                }
                Ok(acc)
            };

        // φ⁰ monomials: c · X^n
        for (n, c) in &self.c0 {
            let p = get_pow(*n, &mut pow_cache)?;
            result = result.add(&p.scale_coeff_left(c));
        }
        // φ¹ monomials: Φ · c · X^n
        for (n, c) in &self.c1 {
            let p = get_pow(*n, &mut pow_cache)?;
            result = result.add(&phi_el.mul(&p.scale_coeff_left(c)));
        }

        // Account for the outer's own uncertified tails: an unknown outer
        // coefficient at exponent n pollutes the support of X^n.
        let outer_has_tail = self.cert.lo.is_some() || self.cert.hi.is_some();
        if outer_has_tail && !(self.is_zero() && self.cert == Cert::ALL) {
            let pollution = match mode {
                ExpandAt::Zero => {
                    // X^n has support ≥ n·v
                    let v = match x_el.support_lo() {
                        Bound::At(v) => v,
                        Bound::Empty => i64::MAX, // X = 0: no pollution from powers ≥ 1
                        Bound::Unbounded => return Err(Error::EmptyWindow),
                    };
                    let mut hi_clip: Option<i64> = None;
                    let mut clip = |b: Option<i64>| {
                        hi_clip = match (hi_clip, b) {
                            (None, x) | (x, None) => x,
                            (Some(p), Some(q)) => Some(p.min(q)),
                        }
                    };
                    if let Some(ohi) = self.cert.hi {
                        if v == i64::MAX {
                            // zero inner: unknown outer constant term n=0 still
                            // pollutes exponent 0 when 0 is uncertified
                            if !self.cert.contains(0) {
                                clip(Some(-1));
                            }
                        } else if v >= 1 {
                            clip(Some((ohi + 1) * v - 1));
                        } else if v == 0 {
                            clip(Some(-1));
                        } else {
                            return Err(Error::EmptyWindow);
                        }
                    }
                    if let Some(olo) = self.cert.lo {
                        if v == i64::MAX {
                            if !self.cert.contains(0) {
                                clip(Some(-1));
                            }
                        } else if v >= 1 {
                            return Err(Error::EmptyWindow);
                        } else if v == 0 {
                            clip(Some(-1));
                        } else {
                            clip(Some((olo - 1) * v - 1));
                        }
                    }
                    Cert {
                        lo: None,
                        hi: hi_clip,
                    }
                }
                ExpandAt::Infinity => {
                    // X^n has support ≤ n·w
                    let w = match x_el.support_hi() {
                        Bound::At(w) => w,
                        Bound::Empty => i64::MIN,
                        Bound::Unbounded => return Err(Error::EmptyWindow),
                    };
                    let mut lo_clip: Option<i64> = None;
                    let mut clip = |b: Option<i64>| {
                        lo_clip = match (lo_clip, b) {
                            (None, x) | (x, None) => x,
                            (Some(p), Some(q)) => Some(p.max(q)),
                        }
                    };
                    if let Some(ohi) = self.cert.hi {
                        if w == i64::MIN {
                            if !self.cert.contains(0) {
                                clip(Some(1));
                            }
                        } else if w <= -1 {
                            clip(Some((ohi + 1) * w + 1));
                        } else if w == 0 {
                            clip(Some(1));
                        } else {
                            return Err(Error::EmptyWindow);
                        }
                    }
                    if let Some(olo) = self.cert.lo {
                        if w == i64::MIN {
                            if !self.cert.contains(0) {
                                clip(Some(1));
                            }
                        } else if w <= -1 {
                            return Err(Error::EmptyWindow);
                        } else if w == 0 {
                            clip(Some(1));
                        } else {
                            clip(Some((olo - 1) * w + 1));
                        }
                    }
                    Cert {
                        lo: lo_clip,
                        hi: None,
                    }
                }
            };
            result.cert = result.cert.intersect(&pollution);
        }

        result = result.clamp(budget);
        if result.cert.is_empty() {
            return Err(Error::EmptyWindow);
        }
        Ok(result)
    }

    /// Compositional inverse of a series vanishing at zero with invertible
    /// linear coefficient (and invertible even φ-coefficient when an odd
    /// component is present).
    pub fn reverse(&self, budget: Window) -> Result<Self> {
        let f1 = self.f_coeff(1);
        if !f1.is_invertible() {
            return Err(Error::NotInvertible);
        }
        if !self.psi_coeff(0).is_zero() {
            return Err(Error::OddDataAtPuncture);
        }
        let f1_inv = f1.try_invert()?;
        let g0 = self.g_coeff(0);
        let has_odd = self.c1.iter().any(|(_, c)| !c.is_zero())
            || self.c0.iter().any(|(_, c)| !odd_part(c).is_zero());
        let g0_inv = if has_odd {
            if !g0.is_invertible() {
                return Err(Error::NotInvertible);
            }
            g0.try_invert()?
        } else {
            f1_inv.clone()
        };

        let id = SuperSeries::identity(&self.proto);
        // initial guess (f1⁻¹ x, g0⁻¹ φ)
        let mut guess = SuperSeries::zero(&self.proto);
        guess.cert = Cert::ALL;
        map_insert(&mut guess.c0, 1, f1_inv.clone());
        map_insert(&mut guess.c1, 0, g0_inv.clone());

        // Jacobi-style refinement: the diagonal of the linearization is
        // (f1, g0); off-diagonal couplings raise valuation or nilpotency, so
        // the residual dies off after finitely many sweeps.
        let max_iter = 4 * (budget.hi - budget.lo).unsigned_abs() + 64;
        for _ in 0..max_iter {
            let err = id
                .sub(&self.compose(&guess, ExpandAt::Zero, budget)?)
                .clamp(budget);
            if err.is_zero() {
                return Ok(guess.clamp(budget));
            }
            // route c0 errors through f1⁻¹ into guess.c0, c1 errors through
            // g0⁻¹ (even component) into guess.c1
            let even_err = err.even_element();
            let odd_err = err.odd_element();
            let mut delta = SuperSeries::zero(&self.proto);
            delta.cert = err.cert;
            for (n, c) in &even_err.c0 {
                map_insert(&mut delta.c0, *n, f1_inv.mul(c));
            }
            for (n, c) in &even_err.c1 {
                map_insert(&mut delta.c1, *n, f1_inv.mul(c));
            }
            for (n, c) in &odd_err.c0 {
                map_insert(&mut delta.c0, *n, c.mul(&g0_inv));
            }
            for (n, c) in &odd_err.c1 {
                map_insert(&mut delta.c1, *n, c.mul(&g0_inv));
            }
            guess = guess.add(&delta);
        }
        Err(Error::IllFoundedExponential)
    }

    /// Verify the superconformal condition within the certified band;
    /// `None` on success, otherwise the first offending exponent.
    pub fn superconformal_witness(&self) -> Option<(i64, String)> {
        // ξ = g ψ  and  g² = f' + ψ ψ'
        let f = self.component_f();
        let psi = self.component_psi();
        let xi = self.component_xi();
        let g = self.component_g();

        let lhs1 = xi.sub(&g.mul(&psi));
        if let Some((n, _)) = first_nonzero(&lhs1) {
            return Some((n, "xi != g*psi".into()));
        }
        let rhs = f.partial_x().add(&psi.mul(&psi.partial_x()));
        let lhs2 = g.mul(&g).sub(&rhs);
        if let Some((n, _)) = first_nonzero(&lhs2) {
            return Some((n, "g^2 != f' + psi*psi'".into()));
        }
        None
    }

    /// The four pair components as plain (φ-free) series.
    pub fn component_f(&self) -> Self {
        let mut s = SuperSeries::zero(&self.proto);
        s.cert = self.cert;
        for (n, c) in &self.c0 {
            map_insert(&mut s.c0, *n, even_part(c));
        }
        s
    }

    pub fn component_psi(&self) -> Self {
        let mut s = SuperSeries::zero(&self.proto);
        s.cert = self.cert;
        for (n, c) in &self.c0 {
            map_insert(&mut s.c0, *n, odd_part(c));
        }
        s
    }

    pub fn component_xi(&self) -> Self {
        let mut s = SuperSeries::zero(&self.proto);
        s.cert = self.cert;
        for (n, c) in &self.c1 {
            map_insert(&mut s.c0, *n, odd_part(c));
        }
        s
    }

    pub fn component_g(&self) -> Self {
        let mut s = SuperSeries::zero(&self.proto);
        s.cert = self.cert;
        for (n, c) in &self.c1 {
            map_insert(&mut s.c0, *n, even_part(c));
        }
        s
    }

    /// Rebuild the element from pair components (f, ξ, ψ, g).
    pub fn from_components(f: &Self, xi: &Self, psi: &Self, g: &Self) -> Self {
        let proto = f.proto.zero_like();
        let mut s = SuperSeries::zero(&proto);
        s.cert = f
            .cert
            .intersect(&xi.cert)
            .intersect(&psi.cert)
            .intersect(&g.cert);
        for (n, c) in &f.c0 {
            map_insert(&mut s.c0, *n, c.clone());
        }
        for (n, c) in &psi.c0 {
            map_insert(&mut s.c0, *n, c.clone());
        }
        for (n, c) in &xi.c0 {
            map_insert(&mut s.c1, *n, c.clone());
        }
        for (n, c) in &g.c0 {
            map_insert(&mut s.c1, *n, c.clone());
        }
        s.normalize();
        s
    }

    /// Square root with constant term 1 of a plain even series 1 + tail,
    /// computed out to the budget window.
    pub fn sqrt_one_plus(&self, mode: ExpandAt, budget: Window) -> Result<Self> {
        if !self.c1.is_empty() {
            return Err(Error::ParityViolation(
                "square root input must be φ-free".into(),
            ));
        }
        // constant coefficient 1 up to a nilpotent bookkeeping correction
        let r0 = self
            .coeff0(0)
            .sqrt_one_plus_nil()
            .map_err(|_| Error::SqrtConstantTerm)?;
        let two_r0_inv = r0.add(&r0).try_invert()?;
        for (n, _) in &self.c0 {
            match mode {
                ExpandAt::Zero if *n < 0 => return Err(Error::SqrtConstantTerm),
                ExpandAt::Infinity if *n > 0 => return Err(Error::SqrtConstantTerm),
                _ => {}
            }
        }
        let mut root: BTreeMap<i64, C> = BTreeMap::new();
        root.insert(0, r0.clone());
        let cert;
        match mode {
            ExpandAt::Zero => {
                let hi = match self.cert.hi {
                    Some(h) => h.min(budget.hi),
                    None => budget.hi,
                };
                cert = Cert {
                    lo: None,
                    hi: Some(hi),
                };
                for n in 1..=hi {
                    // 2 r0 s_n = u_n − Σ_{0<k<n} s_k s_{n−k}
                    let mut acc = self.coeff0(n);
                    for k in 1..n {
                        if let (Some(a), Some(b)) = (root.get(&k), root.get(&(n - k))) {
                            acc = acc.sub(&a.mul(b));
                        }
                    }
                    let v = acc.mul(&two_r0_inv);
                    if !v.is_zero() {
                        root.insert(n, v);
                    }
                }
            }
            ExpandAt::Infinity => {
                let lo = match self.cert.lo {
                    Some(l) => l.max(budget.lo),
                    None => budget.lo,
                };
                cert = Cert {
                    lo: Some(lo),
                    hi: None,
                };
                let mut n = -1i64;
                while n >= lo {
                    let mut acc = self.coeff0(n);
                    let mut k = -1i64;
                    while k > n {
                        if let (Some(a), Some(b)) = (root.get(&k), root.get(&(n - k))) {
                            acc = acc.sub(&a.mul(b));
                        }
                        k -= 1;
                    }
                    let v = acc.mul(&two_r0_inv);
                    if !v.is_zero() {
                        root.insert(n, v);
                    }
                    n -= 1;
                }
            }
        }
        let mut out = SuperSeries::zero(&self.proto);
        out.cert = cert;
        out.c0 = root;
        Ok(out)
    }

    /// Evaluate the element at a concrete point (x0, φ0).  Every stored
    /// monomial is summed; the caller is responsible for the series being a
    /// Laurent polynomial (see `promote_exact`).
    pub fn eval(&self, x0: &C, phi0: &C) -> Result<C> {
        let mut acc = self.proto.zero_like();
        let mut powers: BTreeMap<i64, C> = BTreeMap::new();
        let pow = |n: i64, powers: &mut BTreeMap<i64, C>| -> Result<C> {
            if let Some(p) = powers.get(&n) {
                return Ok(p.clone());
            }
            let p = x0.pow_i64(n)?;
            powers.insert(n, p.clone());
            Ok(p)
        };
        for (n, c) in &self.c0 {
            acc = acc.add(&c.mul(&pow(*n, &mut powers)?));
        }
        for (n, c) in &self.c1 {
            acc = acc.add(&phi0.mul(c).mul(&pow(*n, &mut powers)?));
        }
        Ok(acc)
    }

    /// Evaluate the pair (H⁰, H¹) at a point.
    pub fn eval_pair(&self, x0: &C, phi0: &C) -> Result<(C, C)> {
        Ok((
            self.even_element().eval(x0, phi0)?,
            self.odd_element().eval(x0, phi0)?,
        ))
    }

    /// Largest certified window clipped to the stored band (for reports).
    pub fn certified_window(&self, fallback: Window) -> Window {
        let lo = self.cert.lo.unwrap_or(fallback.lo);
        let hi = self.cert.hi.unwrap_or(fallback.hi);
        Window::new(lo.min(hi), hi.max(lo))
    }

    /// The unique superconformal series of the vanishing-at-zero or
    /// vanishing-at-infinity normal form with the stated coefficient tails.
    ///
    /// Zero case: f = asqrt²(x + Σ a_j x^{j+1}), ψ = asqrt Σ m_{j−1/2} x^j,
    /// even φ-coefficient asqrt.  Infinity case (asqrt fixed to 1):
    /// f = 1/x + Σ a_j x^{−j−1}, ψ = Σ m_{j−1/2} x^{−j}, iφ/x-coefficient i.
    pub fn from_data(
        asqrt: &C,
        a_tail: &BTreeMap<i64, C>,
        m_tail: &BTreeMap<i64, C>,
        at: ExpandAt,
        budget: Window,
    ) -> Result<Self> {
        let proto = asqrt.zero_like();
        for (j, c) in a_tail {
            if *j < 1 {
                return Err(Error::OddDataAtPuncture);
            }
            if !c.is_even_or_zero() {
                return Err(Error::ParityViolation(format!("a_{j} must be even")));
            }
        }
        for (j, c) in m_tail {
            if *j < 1 {
                return Err(Error::OddDataAtPuncture);
            }
            if !c.is_odd_or_zero() {
                return Err(Error::ParityViolation(format!("m_{{{j}-1/2}} must be odd")));
            }
        }
        match at {
            ExpandAt::Zero => {
                if !asqrt.is_invertible() {
                    return Err(Error::NotInvertible);
                }
                let a0 = asqrt.mul(asqrt);
                let mut f = SuperSeries::zero(&proto);
                f.cert = Cert {
                    lo: None,
                    hi: Some(budget.hi),
                };
                map_insert(&mut f.c0, 1, a0.clone());
                for (j, c) in a_tail {
                    map_insert(&mut f.c0, j + 1, a0.mul(c));
                }
                let mut psi = SuperSeries::zero(&proto);
                psi.cert = Cert {
                    lo: None,
                    hi: Some(budget.hi),
                };
                for (j, c) in m_tail {
                    map_insert(&mut psi.c0, *j, asqrt.mul(c));
                }
                // g = asqrt · sqrt(1 + (f' + ψψ' − a₀)/a₀)
                let fp = f.partial_x().add(&psi.mul(&psi.partial_x()));
                let h = fp.scale_coeff_left(&a0.try_invert()?);
                let g = h
                    .sqrt_one_plus(ExpandAt::Zero, budget)?
                    .scale_coeff_left(asqrt);
                let xi = g.mul(&psi);
                Ok(SuperSeries::from_components(&f, &xi, &psi, &g).clamp(budget))
            }
            ExpandAt::Infinity => {
                if !asqrt.sub(&proto.one_like()).is_zero() {
                    return Err(Error::Validation(
                        "infinity form requires leading coefficient 1".into(),
                    ));
                }
                let mut f = SuperSeries::zero(&proto);
                f.cert = Cert {
                    lo: Some(budget.lo),
                    hi: None,
                };
                map_insert(&mut f.c0, -1, proto.one_like());
                for (j, c) in a_tail {
                    map_insert(&mut f.c0, -j - 1, c.clone());
                }
                let mut psi = SuperSeries::zero(&proto);
                psi.cert = Cert {
                    lo: Some(budget.lo),
                    hi: None,
                };
                for (j, c) in m_tail {
                    map_insert(&mut psi.c0, -j, c.clone());
                }
                // f' + ψψ' = −x⁻²(1 + w);  g = i x⁻¹ sqrt(1 + w)
                let fp = f.partial_x().add(&psi.mul(&psi.partial_x()));
                let h = fp.mul_monomial(2, &proto.one_like()).neg();
                let g = h
                    .sqrt_one_plus(ExpandAt::Infinity, budget)?
                    .mul_monomial(-1, &proto.from_rat(&GaussRat::i()));
                let xi = g.mul(&psi);
                Ok(SuperSeries::from_components(&f, &xi, &psi, &g).clamp(budget))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Bound {
    At(i64),
    Unbounded,
    Empty,
}

fn even_part<C: GrassRing>(c: &C) -> C {
    // (c + σ(c)) / 2
    c.add(&c.parity_flip()).scale(&GaussRat::from_frac(1, 2))
}

fn odd_part<C: GrassRing>(c: &C) -> C {
    c.sub(&c.parity_flip()).scale(&GaussRat::from_frac(1, 2))
}

fn first_nonzero<C: GrassRing>(s: &SuperSeries<C>) -> Option<(i64, C)> {
    let mut best: Option<i64> = None;
    for (n, _) in s.iter0() {
        best = Some(best.map_or(n, |b| b.min(n)));
    }
    for (n, _) in s.iter1() {
        best = Some(best.map_or(n, |b| b.min(n)));
    }
    best.map(|n| (n, s.coeff0(n)))
}

fn mul_cert<C: GrassRing>(a: &SuperSeries<C>, b: &SuperSeries<C>) -> Cert {
    let apl = a.support_lo();
    let aph = a.support_hi();
    let bpl = b.support_lo();
    let bph = b.support_hi();
    if apl == Bound::Empty && a.cert == Cert::ALL {
        return Cert::ALL;
    }
    if bpl == Bound::Empty && b.cert == Cert::ALL {
        return Cert::ALL;
    }
    let mut lo: Option<i64> = None;
    let mut hi: Option<i64> = None;
    let mut bump_lo = |v: Option<i64>| {
        lo = match (lo, v) {
            (None, x) => x,
            (x, None) => x,
            (Some(p), Some(q)) => Some(p.max(q)),
        }
    };
    // a's unknown-low region: bad for n ≤ a.lo − 1 + sup(b); safe from a.lo + sup(b)
    if let Some(al) = a.cert.lo {
        match bph {
            Bound::At(s) => bump_lo(Some(al + s)),
            Bound::Empty => {}
            Bound::Unbounded => return Cert::band(1, 0), // empty
        }
    }
    if let Some(bl) = b.cert.lo {
        match aph {
            Bound::At(s) => bump_lo(Some(bl + s)),
            Bound::Empty => {}
            Bound::Unbounded => return Cert::band(1, 0),
        }
    }
    let mut bump_hi = |v: Option<i64>| {
        hi = match (hi, v) {
            (None, x) => x,
            (x, None) => x,
            (Some(p), Some(q)) => Some(p.min(q)),
        }
    };
    if let Some(ah) = a.cert.hi {
        match bpl {
            Bound::At(s) => bump_hi(Some(ah + s)),
            Bound::Empty => {}
            Bound::Unbounded => return Cert::band(1, 0),
        }
    }
    if let Some(bh) = b.cert.hi {
        match apl {
            Bound::At(s) => bump_hi(Some(bh + s)),
            Bound::Empty => {}
            Bound::Unbounded => return Cert::band(1, 0),
        }
    }
    Cert { lo, hi }
}

/// Inverse of a φ-free series with respect to multiplication.
fn invert_plain<C: GrassRing>(
    p: &SuperSeries<C>,
    mode: ExpandAt,
    budget: Window,
) -> Result<SuperSeries<C>> {
    let (v, lead) = match mode {
        ExpandAt::Zero => {
            if p.cert.lo.is_some() {
                return Err(Error::NotInvertible);
            }
            let v = p.min_key().ok_or(Error::NotInvertible)?;
            (v, p.coeff0(v))
        }
        ExpandAt::Infinity => {
            if p.cert.hi.is_some() {
                return Err(Error::NotInvertible);
            }
            let v = p.max_key().ok_or(Error::NotInvertible)?;
            (v, p.coeff0(v))
        }
    };
    if !lead.is_invertible() {
        // the extremal coefficient may be a nilpotent bookkeeping term; look
        // for an invertible pivot surrounded by nilpotent terms only, where
        // the geometric series terminates by nilpotency alone
        return invert_plain_pivot(p);
    }
    let lead_inv = lead.try_invert()?;
    // u := lead⁻¹ x^{−v} · p − 1 has support strictly on the small side
    let u = p
        .mul_monomial(-v, &lead_inv)
        .sub(&SuperSeries::constant(p.proto.one_like()));
    if u.is_zero() && u.cert == Cert::ALL {
        // pure monomial: exact inverse
        return Ok(SuperSeries::constant(p.proto.one_like()).mul_monomial(-v, &lead_inv));
    }
    // generous relative budget capturing everything that can matter after
    // the x^{-v} shift and later multiplications
    let t_budget = (budget.hi - budget.lo).abs() + 2 * v.abs() + 4;
    let mut acc = SuperSeries::constant(p.proto.one_like());
    let mut pow = SuperSeries::constant(p.proto.one_like());
    let mut terminated = false;
    loop {
        pow = pow.mul(&u).neg();
        if pow.is_zero() && pow.cert == Cert::ALL {
            terminated = true;
            break;
        }
        acc = acc.add(&pow);
        let past_budget = match mode {
            ExpandAt::Zero => pow.min_key().map_or(true, |k| k > t_budget),
            ExpandAt::Infinity => pow.max_key().map_or(true, |k| k < -t_budget),
        };
        if past_budget {
            break;
        }
    }
    if !terminated {
        let trunc = match mode {
            ExpandAt::Zero => Cert {
                lo: None,
                hi: Some(t_budget),
            },
            ExpandAt::Infinity => Cert {
                lo: Some(-t_budget),
                hi: None,
            },
        };
        acc = acc.clamp_cert(trunc);
    }
    Ok(acc.mul_monomial(-v, &lead_inv))
}

/// Inversion around an interior pivot: exactly one stored coefficient is
/// invertible and all the others are nilpotent steps.
fn invert_plain_pivot<C: GrassRing>(p: &SuperSeries<C>) -> Result<SuperSeries<C>> {
    let mut pivot: Option<(i64, C)> = None;
    for (n, c) in p.iter0() {
        if c.is_invertible() {
            if pivot.is_some() {
                return Err(Error::NotInvertible);
            }
            pivot = Some((n, c.clone()));
        } else if !c.is_nilpotent_step() {
            return Err(Error::NotInvertible);
        }
    }
    let (v, lead) = pivot.ok_or(Error::NotInvertible)?;
    let lead_inv = lead.try_invert()?;
    let u = p
        .mul_monomial(-v, &lead_inv)
        .sub(&SuperSeries::constant(p.proto.one_like()));
    let bound = p.proto.nil_product_bound();
    let mut acc = SuperSeries::constant(p.proto.one_like());
    let mut pow = SuperSeries::constant(p.proto.one_like());
    for _ in 0..=bound {
        pow = pow.mul(&u).neg();
        if pow.is_zero() {
            let mut out = acc.mul_monomial(-v, &lead_inv);
            if pow.cert != Cert::ALL {
                out = out.clamp_cert(pow.cert.shift(-v));
            }
            return Ok(out);
        }
        acc = acc.add(&pow);
    }
    Err(Error::NotInvertible)
}

impl<C: GrassRing> fmt::Debug for SuperSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<C: GrassRing> fmt::Display for SuperSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series[cert {:?}..{:?}]{{", self.cert.lo, self.cert.hi)?;
        for (n, c) in &self.c0 {
            write!(f, " ({c})x^{n}")?;
        }
        for (n, c) in &self.c1 {
            write!(f, " phi({c})x^{n}")?;
        }
        write!(f, " }}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{GrassCtx, Supernumber};

    fn ctx() -> GrassCtx {
        GrassCtx::new(4)
    }

    fn proto() -> Supernumber {
        Supernumber::zero(ctx())
    }

    fn sn(n: i64) -> Supernumber {
        Supernumber::from_int(ctx(), n)
    }

    fn win() -> Window {
        Window::new(-8, 8)
    }

    #[test]
    fn phi_squares_to_zero() {
        let phi = SuperSeries::identity(&proto()).odd_element().clamp(win());
        // φ·φ = 0 and (φx)(φx²) = 0
        assert!(phi.mul(&phi).is_zero());
        let phix = phi.mul_monomial(1, &Supernumber::one(ctx()));
        let phix2 = phi.mul_monomial(2, &Supernumber::one(ctx()));
        assert!(phix.mul(&phix2).is_zero());
    }

    #[test]
    fn identity_times_one() {
        let id = SuperSeries::identity(&proto());
        let one = SuperSeries::constant(Supernumber::one(ctx()));
        assert_eq!(id.mul(&one), id);
    }

    #[test]
    fn d_operator_basics() {
        let id = SuperSeries::identity(&proto());
        // D(x) = φ, D(φ) = 1
        let x_only = id.even_element();
        let dx = x_only.d_op();
        assert!(dx.coeff0(0).is_zero());
        assert_eq!(dx.coeff1(0), Supernumber::one(ctx()));
        let phi = id.odd_element();
        let dphi = phi.d_op();
        assert_eq!(dphi.coeff0(0), Supernumber::one(ctx()));
        // D(φ x^n) = x^n
        let phix3 = phi.mul_monomial(3, &Supernumber::one(ctx()));
        let d = phix3.d_op();
        assert_eq!(d.coeff0(3), Supernumber::one(ctx()));
        assert!(d.coeff1(2).is_zero());
    }

    #[test]
    fn d_squares_to_partial_x() {
        // D² = ∂x on a mixed element
        let mut s = SuperSeries::zero(&proto());
        s.cert = Cert::ALL;
        map_insert(&mut s.c0, 3, sn(2));
        map_insert(&mut s.c0, -2, Supernumber::gen(ctx(), 1));
        map_insert(&mut s.c1, 1, Supernumber::gen(ctx(), 2));
        map_insert(&mut s.c1, 0, sn(5));
        let dd = s.d_op().d_op();
        let dx = s.partial_x();
        assert!(dd.sub(&dx).is_zero());
    }

    #[test]
    fn taylor_shift_composition() {
        // outer = x², inner = (x+y, φ) → x² + 2yx + y²
        let y = sn(7);
        let mut outer = SuperSeries::zero(&proto());
        outer.cert = Cert::ALL;
        map_insert(&mut outer.c0, 2, Supernumber::one(ctx()));
        let inner = SuperSeries::shift_inverse(&y, &Supernumber::zero(ctx()));
        let got = outer.compose(&inner, ExpandAt::Zero, win()).unwrap();
        assert_eq!(got.coeff0(2), sn(1));
        assert_eq!(got.coeff0(1), sn(14));
        assert_eq!(got.coeff0(0), sn(49));
    }

    #[test]
    fn shift_composes_to_identity() {
        let z = sn(3);
        let th = Supernumber::gen(ctx(), 1);
        let s = SuperSeries::shift(&z, &th);
        let sinv = SuperSeries::shift_inverse(&z, &th);
        let comp = s.compose(&sinv, ExpandAt::Zero, win()).unwrap();
        let id = SuperSeries::identity(&proto()).clamp(win());
        assert!(
            comp.clamp(win()).sub(&id).is_zero(),
            "s∘s⁻¹ = id, got {comp}"
        );
        let comp2 = sinv.compose(&s, ExpandAt::Zero, win()).unwrap();
        assert!(comp2.clamp(win()).sub(&id).is_zero());
    }

    #[test]
    fn inversion_composes_to_identity() {
        let i = SuperSeries::inversion(&proto());
        let iinv = SuperSeries::inversion_inverse(&proto());
        let comp = i.compose(&iinv, ExpandAt::Zero, win()).unwrap();
        let id = SuperSeries::identity(&proto());
        assert!(
            comp.sub(&id.clamp(win())).is_zero(),
            "I∘I⁻¹ = id, got {comp}"
        );
    }

    #[test]
    fn reverse_scaling() {
        // (a²x, aφ) reversed is (a⁻²x, a⁻¹φ)
        let a = sn(2);
        let id = SuperSeries::identity(&proto());
        let h = id.scale_substitution(&a).unwrap();
        let r = h.reverse(Window::new(0, 6)).unwrap();
        assert_eq!(r.coeff0(1), Supernumber::from_frac(ctx(), 1, 4));
        assert_eq!(r.coeff1(0), Supernumber::from_frac(ctx(), 1, 2));
    }

    #[test]
    fn reverse_group_action_form() {
        // h = (x/(1−yx), φ/(1−yx)) has inverse (x/(1+yx), φ/(1+yx))
        let y = Supernumber::from_frac(ctx(), 1, 2);
        let build = |yy: &Supernumber| {
            let mut s = SuperSeries::zero(&proto());
            s.cert = Cert {
                lo: None,
                hi: Some(9),
            };
            for n in 1..=9i64 {
                map_insert(&mut s.c0, n, yy.clone().pow_i64(n - 1).unwrap());
                map_insert(&mut s.c1, n - 1, yy.clone().pow_i64(n - 1).unwrap());
            }
            s
        };
        let h = build(&y);
        assert!(h.superconformal_witness().is_none());
        let r = h.reverse(Window::new(0, 7)).unwrap();
        let expect = build(&y.neg()).clamp(Window::new(0, 7));
        assert!(r.clamp(Window::new(0, 7)).sub(&expect).is_zero(), "got {r}");
        // both orders compose to the identity
        let c1 = h.compose(&r, ExpandAt::Zero, Window::new(0, 6)).unwrap();
        let id = SuperSeries::identity(&proto()).clamp(Window::new(0, 6));
        assert!(c1.sub(&id).is_zero());
        let c2 = r.compose(&h, ExpandAt::Zero, Window::new(0, 6)).unwrap();
        assert!(c2.sub(&id).is_zero());
    }

    #[test]
    fn sqrt_oracle() {
        // sqrt(1+2x): square the output and compare
        let mut u = SuperSeries::zero(&proto());
        u.cert = Cert {
            lo: None,
            hi: Some(8),
        };
        map_insert(&mut u.c0, 0, sn(1));
        map_insert(&mut u.c0, 1, sn(2));
        let r = u.sqrt_one_plus(ExpandAt::Zero, Window::new(0, 8)).unwrap();
        assert_eq!(r.coeff0(1), sn(1));
        assert_eq!(r.coeff0(2), Supernumber::from_frac(ctx(), -1, 2));
        assert_eq!(r.coeff0(3), Supernumber::from_frac(ctx(), 1, 2));
        let sq = r.mul(&r);
        assert!(sq.sub(&u).clamp(Window::new(0, 8)).is_zero());
        // with an even Grassmann coefficient 2A₁
        let a1 = Supernumber::gen(ctx(), 1)
            .checked_mul(&Supernumber::gen(ctx(), 2))
            .unwrap()
            .checked_add(&Supernumber::from_frac(ctx(), 1, 3))
            .unwrap();
        let mut u2 = SuperSeries::zero(&proto());
        u2.cert = Cert {
            lo: None,
            hi: Some(8),
        };
        map_insert(&mut u2.c0, 0, sn(1));
        map_insert(&mut u2.c0, 1, a1.scale(&GaussRat::from_int(2)));
        let r2 = u2.sqrt_one_plus(ExpandAt::Zero, Window::new(0, 8)).unwrap();
        assert!(r2.mul(&r2).sub(&u2).clamp(Window::new(0, 8)).is_zero());
        assert_eq!(r2.coeff0(1), a1);
    }

    #[test]
    fn split_parts() {
        let mut p = SuperSeries::zero(&proto());
        p.cert = Cert::ALL;
        map_insert(&mut p.c0, 2, sn(1));
        map_insert(&mut p.c0, 0, sn(1));
        map_insert(&mut p.c0, -1, sn(1));
        let (minus, plus) = p.split_pm();
        assert_eq!(minus.coeff0(0), sn(1));
        assert_eq!(minus.coeff0(-1), sn(1));
        assert!(minus.coeff0(2).is_zero());
        assert_eq!(plus.coeff0(2), sn(1));
        assert!(plus.coeff0(0).is_zero());
        assert!(minus.add(&plus).sub(&p).is_zero());
        let z = SuperSeries::zero(&proto());
        let (zm, zp) = z.split_pm();
        assert!(zm.is_zero() && zp.is_zero());
    }

    #[test]
    fn superconformal_check_examples() {
        // (x³/3, φx) passes
        let mut h = SuperSeries::zero(&proto());
        h.cert = Cert::ALL;
        map_insert(&mut h.c0, 3, Supernumber::from_frac(ctx(), 1, 3));
        map_insert(&mut h.c1, 1, sn(1));
        assert!(h.superconformal_witness().is_none());
        // (x², φ) fails
        let mut b = SuperSeries::zero(&proto());
        b.cert = Cert::ALL;
        map_insert(&mut b.c0, 2, sn(1));
        map_insert(&mut b.c1, 0, sn(1));
        assert!(b.superconformal_witness().is_some());
        // (a²x, aφ) passes
        let a = sn(5);
        let h2 = SuperSeries::identity(&proto())
            .scale_substitution(&a)
            .unwrap();
        assert!(h2.superconformal_witness().is_none());
    }

    #[test]
    fn from_data_forms() {
        // trivial data: identity
        let one = Supernumber::one(ctx());
        let h = SuperSeries::from_data(
            &one,
            &BTreeMap::new(),
            &BTreeMap::new(),
            ExpandAt::Zero,
            Window::new(0, 8),
        )
        .unwrap();
        assert_eq!(h.coeff0(1), sn(1));
        assert_eq!(h.coeff1(0), sn(1));
        // scaling data: (a²x, aφ)
        let a = sn(3);
        let h = SuperSeries::from_data(
            &a,
            &BTreeMap::new(),
            &BTreeMap::new(),
            ExpandAt::Zero,
            Window::new(0, 8),
        )
        .unwrap();
        assert_eq!(h.coeff0(1), sn(9));
        assert_eq!(h.coeff1(0), sn(3));
        // infinity with zero tails: (1/x, iφ/x)
        let h = SuperSeries::from_data(
            &one,
            &BTreeMap::new(),
            &BTreeMap::new(),
            ExpandAt::Infinity,
            Window::new(-8, 0),
        )
        .unwrap();
        assert_eq!(h.coeff0(-1), sn(1));
        assert_eq!(h.coeff1(-1), Supernumber::i(ctx()));
        // generic data stays superconformal and factors per the normal form
        let mut at = BTreeMap::new();
        at.insert(1, Supernumber::from_frac(ctx(), 1, 2));
        let mut mt = BTreeMap::new();
        mt.insert(1, Supernumber::gen(ctx(), 1));
        mt.insert(2, Supernumber::gen(ctx(), 2));
        let h =
            SuperSeries::from_data(&sn(2), &at, &mt, ExpandAt::Zero, Window::new(0, 8)).unwrap();
        assert!(h.superconformal_witness().is_none());
        // odd part = asqrt(Σ m_j x^{j+1} + φ(1 + Σ c_j x^{j+1})) ⟹ ψ/asqrt
        // reproduces the m-tail and g/asqrt has constant term 1
        let ainv = sn(2).invert().unwrap();
        assert_eq!(ainv.checked_mul(&h.psi_coeff(1)).unwrap(), mt[&1]);
        assert_eq!(ainv.checked_mul(&h.psi_coeff(2)).unwrap(), mt[&2]);
        assert_eq!(
            ainv.checked_mul(&h.g_coeff(0)).unwrap(),
            Supernumber::one(ctx())
        );
        let hinf =
            SuperSeries::from_data(&one, &at, &mt, ExpandAt::Infinity, Window::new(-8, 0)).unwrap();
        assert!(hinf.superconformal_witness().is_none());
    }

    #[test]
    fn composition_of_superconformal_is_superconformal() {
        let mut at = BTreeMap::new();
        at.insert(1, Supernumber::from_frac(ctx(), 1, 3));
        let mut mt = BTreeMap::new();
        mt.insert(1, Supernumber::gen(ctx(), 3));
        let h1 =
            SuperSeries::from_data(&sn(1), &at, &mt, ExpandAt::Zero, Window::new(0, 9)).unwrap();
        let mut mt2 = BTreeMap::new();
        mt2.insert(2, Supernumber::gen(ctx(), 4));
        let h2 = SuperSeries::from_data(
            &sn(2),
            &BTreeMap::new(),
            &mt2,
            ExpandAt::Zero,
            Window::new(0, 9),
        )
        .unwrap();
        let comp = h1.compose(&h2, ExpandAt::Zero, Window::new(0, 7)).unwrap();
        assert!(
            comp.superconformal_witness().is_none(),
            "composition stays superconformal"
        );
        // D transforms homogeneously: Dx̃ − φ̃Dφ̃ = 0
        let even = comp.even_element();
        let odd = comp.odd_element();
        let resid = even.d_op().sub(&odd.mul(&odd.d_op()));
        assert!(resid.is_zero());
    }

    #[test]
    fn window_certification_blocks_unknown_tails() {
        // two power-series with unknown high tails: the product is certified
        // to the weaker truncation order only
        let mut a = SuperSeries::zero(&proto());
        a.cert = Cert {
            lo: None,
            hi: Some(3),
        };
        map_insert(&mut a.c0, 0, sn(1));
        map_insert(&mut a.c0, 3, sn(1));
        let mut b = SuperSeries::zero(&proto());
        b.cert = Cert {
            lo: None,
            hi: Some(2),
        };
        map_insert(&mut b.c0, 0, sn(1));
        map_insert(&mut b.c0, 2, sn(1));
        let prod = a.mul(&b);
        assert_eq!(
            prod.cert(),
            Cert {
                lo: None,
                hi: Some(2)
            }
        );
        assert_eq!(prod.coeff0(2), sn(1));
        assert!(prod.coeff0(3).is_zero(), "uncertified key must be dropped");

        // fully unknown tails on both sides of both factors certify nothing
        let mut c = SuperSeries::zero(&proto());
        c.cert = Cert::band(-2, 3);
        map_insert(&mut c.c0, -2, sn(1));
        let mut d = SuperSeries::zero(&proto());
        d.cert = Cert::band(-1, 2);
        map_insert(&mut d.c0, -1, sn(1));
        assert!(c.mul(&d).cert().is_empty());
    }
}
