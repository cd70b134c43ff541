//! The abstract N=1 Neveu-Schwarz algebra: structure constants, brackets in
//! the coefficient envelope, and verification that the superderivations
//! represent it with central charge zero.

use crate::coeff::GrassRing;
use crate::deriv::{apply_gen, Gen};
use crate::error::Result;
use crate::grassmann::Parity;
use crate::scalar::GaussRat;
use crate::series::{SuperSeries, Window};
use std::collections::BTreeMap;
use std::fmt;

/// Generator tag: L_n, G_{h2/2} (h2 odd, the doubled half-integer index), or
/// the central element.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum NsTag {
    L(i64),
    /// G with doubled index: `G2(2k-1)` is G_{k−1/2}.
    G2(i64),
    D,
}

impl NsTag {
    pub fn parity(&self) -> Parity {
        match self {
            NsTag::G2(_) => Parity::Odd,
            _ => Parity::Even,
        }
    }

    /// Doubled L(0)-weight shift of the generator in a positive-energy module.
    pub fn weight_shift2(&self) -> i64 {
        match self {
            NsTag::L(n) => -2 * n,
            NsTag::G2(h2) => -h2,
            NsTag::D => 0,
        }
    }
}

impl fmt::Display for NsTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NsTag::L(n) => write!(f, "L{n}"),
            NsTag::G2(h2) => write!(f, "G{h2}/2"),
            NsTag::D => write!(f, "d"),
        }
    }
}

/// A finite linear combination of generators with supernumber coefficients.
#[derive(Clone, PartialEq, Debug)]
pub struct NsElement<V: GrassRing> {
    terms: BTreeMap<NsTag, V>,
    proto: V,
}

impl<V: GrassRing> NsElement<V> {
    pub fn zero(proto: &V) -> Self {
        NsElement {
            terms: BTreeMap::new(),
            proto: proto.zero_like(),
        }
    }

    pub fn generator(tag: NsTag, proto: &V) -> Self {
        NsElement::term(tag, proto.one_like())
    }

    pub fn term(tag: NsTag, coeff: V) -> Self {
        let proto = coeff.zero_like();
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(tag, coeff);
        }
        NsElement { terms, proto }
    }

    pub fn coeff(&self, tag: NsTag) -> V {
        self.terms
            .get(&tag)
            .cloned()
            .unwrap_or_else(|| self.proto.zero_like())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NsTag, &V)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (t, c) in &rhs.terms {
            let cur = out
                .terms
                .remove(t)
                .unwrap_or_else(|| self.proto.zero_like());
            let s = cur.add(c);
            if !s.is_zero() {
                out.terms.insert(*t, s);
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        NsElement {
            terms: self.terms.iter().map(|(t, c)| (*t, c.neg())).collect(),
            proto: self.proto.clone(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn scale_coeff(&self, k: &V) -> Self {
        let mut out = NsElement::zero(&self.proto);
        for (t, c) in &self.terms {
            let v = k.mul(c);
            if !v.is_zero() {
                out.terms.insert(*t, v);
            }
        }
        out
    }

    /// Super-bracket extended to the coefficient envelope:
    /// [a·u, b·v] = (−1)^{η(b)η(u)} a b [u, v] for homogeneous a, b.
    pub fn bracket(&self, rhs: &Self) -> Result<Self> {
        let mut out = NsElement::zero(&self.proto);
        for (u, a) in &self.terms {
            for (v, b) in &rhs.terms {
                let base = bracket_structure(*u, *v, &self.proto);
                if base.is_zero() {
                    continue;
                }
                let mut ab = a.mul(b);
                if u.parity() == Parity::Odd && b.parity() == Parity::Odd {
                    ab = ab.neg();
                }
                out = out.add(&base.scale_coeff(&ab));
            }
        }
        Ok(out)
    }
}

/// Structure constants of the N=1 Neveu-Schwarz algebra.
pub fn bracket_structure<V: GrassRing>(u: NsTag, v: NsTag, proto: &V) -> NsElement<V> {
    let rat = |r: GaussRat| proto.from_rat(&r);
    match (u, v) {
        (NsTag::D, _) | (_, NsTag::D) => NsElement::zero(proto),
        (NsTag::L(m), NsTag::L(n)) => {
            let mut out = NsElement::term(NsTag::L(m + n), rat(GaussRat::from_int(m - n)));
            if m + n == 0 {
                // (m³ − m)/12 · d
                let c = GaussRat::from_frac(m * m * m - m, 12);
                out = out.add(&NsElement::term(NsTag::D, rat(c)));
            }
            out
        }
        (NsTag::G2(a2), NsTag::L(n)) => {
            // [G_a, L_n] = (a − n/2) G_{a+n}
            let c = GaussRat::from_frac(a2 - n, 2);
            NsElement::term(NsTag::G2(a2 + 2 * n), rat(c))
        }
        (NsTag::L(m), NsTag::G2(b2)) => {
            // [L_m, G_b] = −[G_b, L_m] = (m/2 − b) G_{m+b}
            let c = GaussRat::from_frac(m - b2, 2);
            NsElement::term(NsTag::G2(b2 + 2 * m), rat(c))
        }
        (NsTag::G2(a2), NsTag::G2(b2)) => {
            let mut out = NsElement::term(NsTag::L((a2 + b2) / 2), rat(GaussRat::from_int(2)));
            if a2 + b2 == 0 {
                // (a² − 1/4)/3 = (a2² − 1)/12
                let c = GaussRat::from_frac(a2 * a2 - 1, 12);
                out = out.add(&NsElement::term(NsTag::D, rat(c)));
            }
            out
        }
    }
}

/// Action of a generator on a series (the representation with central charge
/// zero): NsTag::D acts as zero.
pub fn series_action<C: GrassRing>(tag: NsTag, h: &SuperSeries<C>) -> SuperSeries<C> {
    match tag {
        NsTag::L(n) => apply_gen(Gen::L(n), h),
        NsTag::G2(h2) => apply_gen(Gen::G((h2 + 1) / 2), h),
        NsTag::D => SuperSeries::zero(h.proto()),
    }
}

/// Check that brackets of series actions equal the action of the abstract
/// bracket with d ↦ 0, on all monomials φ^ε x^k within the range.
pub fn verify_superderivation_rep<C: GrassRing>(
    proto: &C,
    index_range: i64,
    k_range: i64,
    window: Window,
) -> Option<String> {
    let mut tags = Vec::new();
    for n in -index_range..=index_range {
        tags.push(NsTag::L(n));
        tags.push(NsTag::G2(2 * n - 1));
    }
    let monomials: Vec<SuperSeries<C>> = (-k_range..=k_range)
        .flat_map(|k| {
            let x_mono = SuperSeries::constant(proto.one_like()).mul_monomial(k, &proto.one_like());
            let phi_mono = x_mono.mul_phi_left();
            [x_mono, phi_mono]
        })
        .collect();
    for &u in &tags {
        for &v in &tags {
            let both_odd = u.parity() == Parity::Odd && v.parity() == Parity::Odd;
            let abstract_bracket = bracket_structure(u, v, proto);
            for h in &monomials {
                // [u, v]·h = u(v(h)) − (−1)^{η(u)η(v)} v(u(h))
                let uv = series_action(u, &series_action(v, h));
                let vu = series_action(v, &series_action(u, h));
                let lhs = if both_odd { uv.add(&vu) } else { uv.sub(&vu) };
                let mut rhs = SuperSeries::zero(proto);
                for (t, c) in abstract_bracket.terms() {
                    if *t == NsTag::D {
                        continue; // central charge zero in the representation
                    }
                    rhs = rhs.add(&series_action(*t, h).scale_coeff_left(c));
                }
                let diff = lhs.sub(&rhs).clamp(window);
                if !diff.is_zero() {
                    return Some(format!("[{u},{v}] fails on monomial {h}"));
                }
            }
        }
    }
    None
}

/// Jacobi identity over all generator triples in a finite index range.
pub fn verify_jacobi<V: GrassRing>(proto: &V, index_range: i64) -> Option<String> {
    let mut tags = vec![NsTag::D];
    for n in -index_range..=index_range {
        tags.push(NsTag::L(n));
        tags.push(NsTag::G2(2 * n - 1));
    }
    let sign = |t: NsTag| if t.parity() == Parity::Odd { 1i64 } else { 0 };
    for &u in &tags {
        for &v in &tags {
            for &w in &tags {
                // (−1)^{η(u)η(w)}[[u,v],w] + cyclic = 0
                let eu = NsElement::generator(u, proto);
                let ev = NsElement::generator(v, proto);
                let ew = NsElement::generator(w, proto);
                let t1 = eu.bracket(&ev).unwrap().bracket(&ew).unwrap();
                let t2 = ev.bracket(&ew).unwrap().bracket(&eu).unwrap();
                let t3 = ew.bracket(&eu).unwrap().bracket(&ev).unwrap();
                let s1 = sign(u) * sign(w);
                let s2 = sign(v) * sign(u);
                let s3 = sign(w) * sign(v);
                let signed = |t: NsElement<V>, s: i64| if s % 2 == 1 { t.neg() } else { t };
                let total = signed(t1, s1).add(&signed(t2, s2)).add(&signed(t3, s3));
                if !total.is_zero() {
                    return Some(format!("Jacobi fails on ({u},{v},{w})"));
                }
            }
        }
    }
    None
}

/// Skew-supersymmetry [u,v] = −(−1)^{η(u)η(v)}[v,u] over a range.
pub fn verify_skew<V: GrassRing>(proto: &V, index_range: i64) -> Option<String> {
    let mut tags = vec![NsTag::D];
    for n in -index_range..=index_range {
        tags.push(NsTag::L(n));
        tags.push(NsTag::G2(2 * n - 1));
    }
    for &u in &tags {
        for &v in &tags {
            let both_odd = u.parity() == Parity::Odd && v.parity() == Parity::Odd;
            let uv = NsElement::generator(u, proto)
                .bracket(&NsElement::generator(v, proto))
                .unwrap();
            let vu = NsElement::generator(v, proto)
                .bracket(&NsElement::generator(u, proto))
                .unwrap();
            let expect = if both_odd { vu } else { vu.neg() };
            if !uv.sub(&expect).is_zero() {
                return Some(format!("skew-supersymmetry fails on ({u},{v})"));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{GrassCtx, Supernumber};

    fn proto() -> Supernumber {
        Supernumber::zero(GrassCtx::new(2))
    }

    #[test]
    fn bracket_table_examples() {
        let p = proto();
        // [L₂, L₋₂] = 4L₀ + ½d
        let b = NsElement::generator(NsTag::L(2), &p)
            .bracket(&NsElement::generator(NsTag::L(-2), &p))
            .unwrap();
        assert_eq!(
            b.coeff(NsTag::L(0)),
            Supernumber::from_int(GrassCtx::new(2), 4)
        );
        assert_eq!(
            b.coeff(NsTag::D),
            Supernumber::from_frac(GrassCtx::new(2), 1, 2)
        );
        // [G_{3/2}, G_{−3/2}] = 2L₀ + (2/3)d
        let b = NsElement::generator(NsTag::G2(3), &p)
            .bracket(&NsElement::generator(NsTag::G2(-3), &p))
            .unwrap();
        assert_eq!(
            b.coeff(NsTag::L(0)),
            Supernumber::from_int(GrassCtx::new(2), 2)
        );
        assert_eq!(
            b.coeff(NsTag::D),
            Supernumber::from_frac(GrassCtx::new(2), 2, 3)
        );
        // [G_{1/2}, G_{1/2}] = 2L₁
        let b = NsElement::generator(NsTag::G2(1), &p)
            .bracket(&NsElement::generator(NsTag::G2(1), &p))
            .unwrap();
        assert_eq!(
            b.coeff(NsTag::L(1)),
            Supernumber::from_int(GrassCtx::new(2), 2)
        );
        assert!(b.coeff(NsTag::D).is_zero());
    }

    #[test]
    fn jacobi_and_skew() {
        assert_eq!(verify_skew(&proto(), 3), None);
        assert_eq!(verify_jacobi(&proto(), 2), None);
    }

    #[test]
    fn superderivations_represent_ns_at_c_zero() {
        assert_eq!(
            verify_superderivation_rep(&proto(), 2, 3, Window::new(-8, 8)),
            None
        );
    }

    #[test]
    fn envelope_sign_rule() {
        // [a·G, b·G] with odd a, b picks up the Koszul sign
        let ctx = GrassCtx::new(2);
        let a = Supernumber::gen(ctx, 1);
        let b = Supernumber::gen(ctx, 2);
        let ag = NsElement::term(NsTag::G2(1), a.clone());
        let bg = NsElement::term(NsTag::G2(-1), b.clone());
        let br = ag.bracket(&bg).unwrap();
        // (−1)^{η(b)η(G)} ab [G_{1/2}, G_{−1/2}] = −ab·2L₀
        let expect = a.checked_mul(&b).unwrap().scale(&GaussRat::from_int(-2));
        assert_eq!(br.coeff(NsTag::L(0)), expect);
    }
}
