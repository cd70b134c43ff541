//! Verma modules for the N=1 Neveu-Schwarz algebra with positive-energy
//! truncation, exponentials of operator sums, the central-charge series Γ,
//! and the representation-level Θ-identities.

use crate::bigraded::Bigraded;
use crate::coeff::GrassRing;
use crate::error::{Error, Result};
use crate::grassmann::Parity;
use crate::nsalg::{bracket_structure, NsTag};
use crate::scalar::GaussRat;
use crate::sewing::{self, SewingInput, SewingSolution, ThetaData, ThetaKind};
use num::{Integer, Zero};
use std::collections::BTreeMap;
use std::fmt;

/// Central charge, lowest weight, and the doubled relative weight cutoff:
/// components of L(0)-weight above h + cutoff2/2 are discarded.
#[derive(Clone, Debug, PartialEq)]
pub struct VermaContext {
    pub c: GaussRat,
    pub h: GaussRat,
    pub cutoff2: i64,
}

impl VermaContext {
    pub fn new(c: GaussRat, h: GaussRat, cutoff2: i64) -> Self {
        assert!(cutoff2 >= 0);
        VermaContext { c, h, cutoff2 }
    }
}

/// PBW monomial L(−n₁)^{k₁}…·G(−a₁)G(−a₂)… acting on the lowest-weight
/// vector; L-part keyed by positive n in descending order, G-part by positive
/// doubled half-indices in descending order, each at most once.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct PbwWord {
    /// (n, power) with n ≥ 1 meaning L(−n)^power, descending in n.
    pub l: Vec<(i64, u32)>,
    /// doubled half-indices h2 ≥ 1 meaning G(−h2/2), strictly descending.
    pub g: Vec<i64>,
}

impl PbwWord {
    pub fn vacuum() -> Self {
        PbwWord {
            l: Vec::new(),
            g: Vec::new(),
        }
    }

    pub fn weight2(&self) -> i64 {
        let lw: i64 = self.l.iter().map(|(n, k)| 2 * n * (*k as i64)).sum();
        let gw: i64 = self.g.iter().sum();
        lw + gw
    }

    pub fn parity(&self) -> Parity {
        if self.g.len() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn to_tags(&self) -> Vec<NsTag> {
        let mut tags = Vec::new();
        for (n, k) in &self.l {
            for _ in 0..*k {
                tags.push(NsTag::L(-n));
            }
        }
        for h2 in &self.g {
            tags.push(NsTag::G2(-h2));
        }
        tags
    }

    fn from_tags(tags: &[NsTag]) -> Self {
        let mut l: Vec<(i64, u32)> = Vec::new();
        let mut g = Vec::new();
        for t in tags {
            match t {
                NsTag::L(n) => {
                    debug_assert!(*n <= -1);
                    if let Some(last) = l.last_mut() {
                        if last.0 == -n {
                            last.1 += 1;
                            continue;
                        }
                    }
                    l.push((-n, 1));
                }
                NsTag::G2(h2) => {
                    debug_assert!(*h2 <= -1);
                    g.push(-h2);
                }
                NsTag::D => unreachable!(),
            }
        }
        PbwWord { l, g }
    }
}

impl fmt::Display for PbwWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.l.is_empty() && self.g.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (n, k) in &self.l {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            if *k == 1 {
                write!(f, "L-{n}")?;
            } else {
                write!(f, "L-{n}^{k}")?;
            }
        }
        for h2 in &self.g {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "G-{h2}/2")?;
        }
        Ok(())
    }
}

/// Linear combination of PBW words with exact rational coefficients: the
/// result of normal-ordering a generator against a basis word.
type WordComb = BTreeMap<PbwWord, GaussRat>;

fn comb_add(acc: &mut WordComb, w: PbwWord, r: GaussRat) {
    if r.is_zero() {
        return;
    }
    use std::collections::btree_map::Entry;
    match acc.entry(w) {
        Entry::Vacant(e) => {
            e.insert(r);
        }
        Entry::Occupied(mut e) => {
            let s = &*e.get() + &r;
            if s.is_zero() {
                e.remove();
            } else {
                e.insert(s);
            }
        }
    }
}

type RewriteCache = std::collections::HashMap<(NsTag, Vec<NsTag>), WordComb>;

/// Normal-order tag·(word·1) in the Verma module M(c,h), memoized.
fn mul_tag(ctx: &VermaContext, tag: NsTag, word: &[NsTag], cache: &mut RewriteCache) -> WordComb {
    let key = (tag, word.to_vec());
    if let Some(hit) = cache.get(&key) {
        return hit.clone();
    }
    let mut out = WordComb::new();
    match tag {
        NsTag::D => {
            comb_add(&mut out, PbwWord::from_tags(word), ctx.c.clone());
            cache.insert(key, out.clone());
            return out;
        }
        NsTag::L(0) => {
            // graded action: weight h + wt2/2
            let w = PbwWord::from_tags(word);
            let wt =
                &ctx.h + &(&GaussRat::from_int(w.weight2()) * &GaussRat::from_frac(1, 2)).clone();
            comb_add(&mut out, w, wt);
            cache.insert(key, out.clone());
            return out;
        }
        _ => {}
    }
    if word.is_empty() {
        match tag {
            NsTag::L(n) if n <= -1 => {
                comb_add(&mut out, PbwWord::from_tags(&[tag]), GaussRat::one());
            }
            NsTag::G2(h2) if h2 <= -1 => {
                comb_add(&mut out, PbwWord::from_tags(&[tag]), GaussRat::one());
            }
            _ => {} // raising generators annihilate the lowest-weight vector
        }
        cache.insert(key, out.clone());
        return out;
    }
    let head = word[0];
    let rest = &word[1..];
    let ordered = match (tag, head) {
        (NsTag::L(a), NsTag::L(b)) => a <= -1 && a <= b,
        (NsTag::L(a), NsTag::G2(_)) => a <= -1,
        (NsTag::G2(_), NsTag::L(_)) => false,
        (NsTag::G2(a2), NsTag::G2(b2)) => a2 <= -1 && a2 < b2,
        _ => unreachable!(),
    };
    if ordered {
        let mut tags = Vec::with_capacity(word.len() + 1);
        tags.push(tag);
        tags.extend_from_slice(word);
        comb_add(&mut out, PbwWord::from_tags(&tags), GaussRat::one());
        cache.insert(key, out.clone());
        return out;
    }
    let both_odd = tag.parity() == Parity::Odd && head.parity() == Parity::Odd;
    if both_odd && tag == head {
        // G_a G_a = ½[G_a, G_a]
        let br = bracket_comb(ctx, tag, head, rest, cache);
        for (w, r) in br {
            comb_add(&mut out, w, &r * &GaussRat::from_frac(1, 2));
        }
        cache.insert(key, out.clone());
        return out;
    }
    // tag·head = ±head·tag + [tag, head]
    let inner = mul_tag(ctx, tag, rest, cache);
    for (w, r) in inner {
        let sub = mul_tag(ctx, head, &w.to_tags(), cache);
        let r2 = if both_odd { -&r } else { r.clone() };
        for (w2, r3) in sub {
            comb_add(&mut out, w2, &r2 * &r3);
        }
    }
    let br = bracket_comb(ctx, tag, head, rest, cache);
    for (w, r) in br {
        comb_add(&mut out, w, r);
    }
    cache.insert(key, out.clone());
    out
}

fn bracket_comb(
    ctx: &VermaContext,
    a: NsTag,
    b: NsTag,
    rest: &[NsTag],
    cache: &mut RewriteCache,
) -> WordComb {
    let proto = crate::grassmann::Supernumber::zero(crate::grassmann::GrassCtx::new(0));
    let br = bracket_structure(a, b, &proto);
    let mut out = WordComb::new();
    for (t, coeff) in br.terms() {
        let r = coeff.body();
        let sub = mul_tag(ctx, *t, rest, cache);
        for (w, r2) in sub {
            comb_add(&mut out, w, &r * &r2);
        }
    }
    out
}

/// A vector in (coefficients ⊗ M(c,h)) with the weight cutoff applied.
#[derive(Clone, PartialEq, Debug)]
pub struct VermaVector<C: GrassRing> {
    pub ctx: VermaContext,
    amps: BTreeMap<PbwWord, C>,
    proto: C,
}

impl<C: GrassRing> VermaVector<C> {
    pub fn zero(ctx: &VermaContext, proto: &C) -> Self {
        VermaVector {
            ctx: ctx.clone(),
            amps: BTreeMap::new(),
            proto: proto.zero_like(),
        }
    }

    pub fn vacuum(ctx: &VermaContext, proto: &C) -> Self {
        let mut v = VermaVector::zero(ctx, proto);
        v.add_amp(PbwWord::vacuum(), proto.one_like());
        v
    }

    pub fn amp(&self, w: &PbwWord) -> C {
        self.amps
            .get(w)
            .cloned()
            .unwrap_or_else(|| self.proto.zero_like())
    }

    pub fn amps(&self) -> impl Iterator<Item = (&PbwWord, &C)> {
        self.amps.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    fn add_amp(&mut self, w: PbwWord, v: C) {
        if v.is_zero() || w.weight2() > self.ctx.cutoff2 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.amps.entry(w) {
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

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (w, v) in &rhs.amps {
            out.add_amp(w.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        for (w, v) in &rhs.amps {
            out.add_amp(w.clone(), v.neg());
        }
        out
    }

    pub fn scale(&self, k: &C) -> Self {
        let mut out = VermaVector::zero(&self.ctx, &self.proto);
        for (w, v) in &self.amps {
            out.add_amp(w.clone(), k.mul(v));
        }
        out
    }

    pub fn scale_rat(&self, r: &GaussRat) -> Self {
        let mut out = VermaVector::zero(&self.ctx, &self.proto);
        for (w, v) in &self.amps {
            out.add_amp(w.clone(), v.scale(r));
        }
        out
    }

    /// Apply a bare generator, normal-ordering into the PBW basis.  The
    /// operator passes the coefficient with the Koszul sign when odd.
    pub fn apply(&self, tag: NsTag) -> Self {
        REWRITE_CACHE.with(|c| self.apply_cached(tag, &mut c.borrow_mut()))
    }

    fn apply_cached(&self, tag: NsTag, cache: &mut CtxCache) -> Self {
        let mut out = VermaVector::zero(&self.ctx, &self.proto);
        let odd = tag.parity() == Parity::Odd;
        let inner = cache.for_ctx(&self.ctx);
        for (w, amp) in &self.amps {
            let carried = if odd { amp.parity_flip() } else { amp.clone() };
            let comb = mul_tag(&self.ctx, tag, &w.to_tags(), inner);
            for (w2, r) in comb {
                out.add_amp(w2, carried.scale(&r));
            }
        }
        out
    }

    /// Apply a word of generators left-to-right (the leftmost acts last).
    pub fn apply_word(&self, tags: &[NsTag]) -> Self {
        let mut v = self.clone();
        for t in tags.iter().rev() {
            v = v.apply(*t);
        }
        v
    }

    /// b^{−2L(0)}: multiply the weight-(h + wt2/2) component by b^{−2h−wt2}.
    /// Requires 2h to be an integer.
    pub fn scale_2l0(&self, b: &C) -> Result<Self> {
        let two_h = &self.ctx.h * &GaussRat::from_int(2);
        if !two_h.im.is_zero() || !two_h.re.numer().is_multiple_of(two_h.re.denom()) {
            return Err(Error::FractionalWeight(format!("{}", self.ctx.h)));
        }
        let two_h_int: i64 = (two_h.re.numer() / two_h.re.denom())
            .try_into()
            .map_err(|_| Error::FractionalWeight(format!("{}", self.ctx.h)))?;
        let b_inv = b.try_invert()?;
        let mut out = VermaVector::zero(&self.ctx, &self.proto);
        for (w, amp) in &self.amps {
            let p = b_inv.pow_i64(two_h_int + w.weight2())?;
            out.add_amp(w.clone(), p.mul(amp));
        }
        Ok(out)
    }

    /// exp(2k·L(0)) for a nilpotent coefficient k.
    pub fn exp_2l0(&self, k: &C) -> Result<Self> {
        let e = k.try_exp()?;
        // component of weight h + wt2/2 picks up e^{2h + wt2}
        let two_h = &self.ctx.h * &GaussRat::from_int(2);
        if !two_h.im.is_zero() || !two_h.re.numer().is_multiple_of(two_h.re.denom()) {
            return Err(Error::FractionalWeight(format!("{}", self.ctx.h)));
        }
        let two_h_int: i64 = (two_h.re.numer() / two_h.re.denom())
            .try_into()
            .map_err(|_| Error::FractionalWeight(format!("{}", self.ctx.h)))?;
        let mut out = VermaVector::zero(&self.ctx, &self.proto);
        for (w, amp) in &self.amps {
            let p = e.pow_i64(two_h_int + w.weight2())?;
            out.add_amp(w.clone(), p.mul(amp));
        }
        Ok(out)
    }

    fn min_weight2(&self) -> Option<i64> {
        self.amps.keys().map(|w| w.weight2()).min()
    }

    fn max_weight2(&self) -> Option<i64> {
        self.amps.keys().map(|w| w.weight2()).max()
    }
}

/// Rewrite caches keyed by the (c, h) values they were built for.
struct CtxCache {
    entries: Vec<((GaussRat, GaussRat), RewriteCache)>,
}

impl CtxCache {
    fn new() -> Self {
        CtxCache {
            entries: Vec::new(),
        }
    }

    fn for_ctx(&mut self, ctx: &VermaContext) -> &mut RewriteCache {
        let key = (ctx.c.clone(), ctx.h.clone());
        if let Some(pos) = self.entries.iter().position(|(k, _)| *k == key) {
            return &mut self.entries[pos].1;
        }
        self.entries.push((key, RewriteCache::new()));
        let last = self.entries.len() - 1;
        &mut self.entries[last].1
    }
}

thread_local! {
    static REWRITE_CACHE: std::cell::RefCell<CtxCache> = std::cell::RefCell::new(CtxCache::new());
}

/// A finite operator sum Σ coeff·generator acting on Verma vectors.
#[derive(Clone, Debug)]
pub struct OpSum<C: GrassRing> {
    pub terms: Vec<(NsTag, C)>,
}

impl<C: GrassRing> OpSum<C> {
    pub fn new() -> Self {
        OpSum { terms: Vec::new() }
    }

    pub fn push(&mut self, tag: NsTag, coeff: C) -> Result<()> {
        if coeff.is_zero() {
            return Ok(());
        }
        let ok = match tag.parity() {
            Parity::Odd => coeff.is_odd_or_zero(),
            _ => coeff.is_even_or_zero(),
        };
        if !ok {
            return Err(Error::ParityViolation(format!("coefficient of {tag}")));
        }
        self.terms.push((tag, coeff));
        Ok(())
    }

    pub fn neg(&self) -> Self {
        OpSum {
            terms: self.terms.iter().map(|(t, c)| (*t, c.neg())).collect(),
        }
    }

    pub fn apply(&self, v: &VermaVector<C>) -> VermaVector<C> {
        let mut out = VermaVector::zero(&v.ctx, &v.proto);
        for (t, c) in &self.terms {
            out = out.add(&v.apply(*t).scale(c));
        }
        out
    }
}

impl<C: GrassRing> Default for OpSum<C> {
    fn default() -> Self {
        Self::new()
    }
}

/// Σ Tⁿ/n!·v with a termination check: weight-raising sums terminate at the
/// cutoff, weight-lowering sums at the positive-energy floor, mixed sums need
/// nilpotent coefficients.
pub fn exp_apply<C: GrassRing>(t: &OpSum<C>, v: &VermaVector<C>) -> Result<VermaVector<C>> {
    if t.terms.is_empty() {
        return Ok(v.clone());
    }
    let shifts: Vec<i64> = t.terms.iter().map(|(g, _)| g.weight_shift2()).collect();
    let min_shift = *shifts.iter().min().unwrap();
    let max_shift = *shifts.iter().max().unwrap();
    let all_nil = t.terms.iter().all(|(_, c)| c.is_nilpotent_step());
    let proto = &v.proto;

    let mut n_max: Option<u64> = None;
    if all_nil {
        n_max = Some(proto.nil_product_bound());
    }
    if min_shift >= 1 {
        let w0 = v.min_weight2().unwrap_or(0);
        let reach = v.ctx.cutoff2 - w0;
        let bound = if reach < 0 {
            0
        } else {
            (reach / min_shift) as u64 + 1
        };
        n_max = Some(n_max.map_or(bound, |b| b.min(bound)));
    }
    if max_shift <= -1 {
        let w1 = v.max_weight2().unwrap_or(0);
        let bound = (w1 / (-max_shift)) as u64 + 1;
        n_max = Some(n_max.map_or(bound, |b| b.min(bound)));
    }
    let n_max = n_max.ok_or(Error::IllFoundedExponential)?;

    let mut acc = v.clone();
    let mut term = v.clone();
    for n in 1..=n_max as i64 {
        term = t.apply(&term).scale_rat(&GaussRat::from_frac(1, n));
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
    }
    Ok(acc)
}

/// All PBW words of doubled weight ≤ cutoff2.
pub fn basis_words(cutoff2: i64) -> Vec<PbwWord> {
    fn l_parts(max_n: i64, budget2: i64) -> Vec<Vec<(i64, u32)>> {
        // descending in n
        let mut out = vec![Vec::new()];
        if max_n < 1 {
            return out;
        }
        for n in (1..=max_n).rev() {
            let mut next = Vec::new();
            for part in &out {
                let used: i64 = part.iter().map(|(m, k)| 2 * m * (*k as i64)).sum();
                let mut k = 0u32;
                loop {
                    let cost = used + 2 * n * (k as i64);
                    if cost > budget2 {
                        break;
                    }
                    let mut p = part.clone();
                    if k > 0 {
                        p.push((n, k));
                    }
                    next.push(p);
                    k += 1;
                }
            }
            // keep descending order: parts were built high-to-low
            out = next;
        }
        out
    }
    fn g_parts(max_h2: i64, budget2: i64) -> Vec<Vec<i64>> {
        let mut out = vec![Vec::new()];
        let mut h2 = if max_h2 % 2 == 0 { max_h2 - 1 } else { max_h2 };
        while h2 >= 1 {
            let mut next = Vec::new();
            for part in &out {
                let used: i64 = part.iter().sum();
                next.push(part.clone());
                if used + h2 <= budget2 {
                    let mut p = part.clone();
                    p.push(h2);
                    next.push(p);
                }
            }
            out = next;
            h2 -= 2;
        }
        out
    }
    let mut words = Vec::new();
    for l in l_parts(cutoff2 / 2, cutoff2) {
        let lw: i64 = l.iter().map(|(n, k)| 2 * n * (*k as i64)).sum();
        for g in g_parts(cutoff2 - lw, cutoff2 - lw) {
            let w = PbwWord { l: l.clone(), g };
            if w.weight2() <= cutoff2 {
                words.push(w);
            }
        }
    }
    words.sort();
    words.dedup();
    words
}

/// Operator sums of the sewing data and of the Ψ-solution, in the module.
pub struct SewingOps<V: GrassRing> {
    pub t_a_neg: OpSum<Bigraded<V>>,
    pub t_b_neg: OpSum<Bigraded<V>>,
    pub psi_plus: OpSum<Bigraded<V>>,
    pub psi_minus: OpSum<Bigraded<V>>,
    pub psi0: Bigraded<V>,
    pub asqrt: Bigraded<V>,
}

pub fn sewing_ops<V: GrassRing>(sol: &SewingSolution<V>) -> Result<SewingOps<V>> {
    let input = sol.input();
    let caps = input.caps.bicaps();
    let lift_a = |c: &V| Bigraded::from_cell(caps, 1, 0, c.clone());
    let lift_b = |c: &V| Bigraded::from_cell(caps, 0, 1, c.clone());
    let mut t_a_neg = OpSum::new();
    for (j, c) in &input.a {
        t_a_neg.push(NsTag::L(*j), lift_a(c).neg())?;
    }
    for (j, c) in &input.m {
        t_a_neg.push(NsTag::G2(2 * j - 1), lift_a(c).neg())?;
    }
    let mut t_b_neg = OpSum::new();
    for (j, c) in &input.b {
        t_b_neg.push(NsTag::L(-j), lift_b(c).neg())?;
    }
    for (j, c) in &input.n {
        t_b_neg.push(NsTag::G2(-(2 * j - 1)), lift_b(c).neg())?;
    }
    let mut psi_plus = OpSum::new();
    let mut psi_minus = OpSum::new();
    for (k2, c) in sol.psi.iter() {
        if *k2 == 0 {
            continue;
        }
        let tag = if k2 % 2 == 0 {
            NsTag::L(k2 / 2)
        } else {
            NsTag::G2(*k2)
        };
        if *k2 > 0 {
            psi_plus.push(tag, c.clone())?;
        } else {
            psi_minus.push(tag, c.clone())?;
        }
    }
    Ok(SewingOps {
        t_a_neg,
        t_b_neg,
        psi_plus,
        psi_minus,
        psi0: sol.psi_at(0),
        asqrt: sol.input().lifted_asqrt(),
    })
}

impl<V: GrassRing> SewingOps<V> {
    /// e^{−ΣA L − ΣM G}·asqrt^{−2L(0)}·e^{−ΣB L₋ − ΣN G₋}·v.
    pub fn apply_lhs(&self, v: &VermaVector<Bigraded<V>>) -> Result<VermaVector<Bigraded<V>>> {
        let s1 = exp_apply(&self.t_b_neg, v)?;
        let s2 = s1.scale_2l0(&self.asqrt)?;
        exp_apply(&self.t_a_neg, &s2)
    }

    /// e^{ΣΨ₋}·e^{ΣΨ₊}·e^{2Ψ₀L(0)}·asqrt^{−2L(0)}·v (no e^{Γc} factor).
    pub fn apply_rhs_bare(&self, v: &VermaVector<Bigraded<V>>) -> Result<VermaVector<Bigraded<V>>> {
        let s1 = v.scale_2l0(&self.asqrt)?;
        let s2 = s1.exp_2l0(&self.psi0)?;
        let s3 = exp_apply(&self.psi_plus, &s2)?;
        exp_apply(&self.psi_minus, &s3)
    }
}

/// Γ: the canonical central-charge series, extracted from the vacuum
/// amplitude ratio of the two operator products.
pub fn gamma<V: GrassRing>(input: &SewingInput<V>, ctx: &VermaContext) -> Result<Bigraded<V>> {
    if ctx.c.is_zero() {
        return Err(Error::ZeroCentralCharge);
    }
    let sol = sewing::solve(input)?;
    gamma_from_solution(&sol, ctx)
}

pub fn gamma_from_solution<V: GrassRing>(
    sol: &SewingSolution<V>,
    ctx: &VermaContext,
) -> Result<Bigraded<V>> {
    if ctx.c.is_zero() {
        return Err(Error::ZeroCentralCharge);
    }
    let ops = sewing_ops(sol)?;
    let proto = sol.input().proto();
    let vac = VermaVector::vacuum(ctx, &proto);
    let lhs = ops.apply_lhs(&vac)?;
    let rhs = ops.apply_rhs_bare(&vac)?;
    let l0 = lhs.amp(&PbwWord::vacuum());
    let r0 = rhs.amp(&PbwWord::vacuum());
    let ratio = l0.mul(&r0.try_invert()?);
    let log = ratio.try_log()?;
    let c_inv = ctx.c.invert()?;
    Ok(log.scale(&c_inv))
}

/// Residual of the full identity e^{Γc}·RHS = LHS on every basis word of the
/// cutoff; `None` when it vanishes identically.
pub fn gamma_residual_witness<V: GrassRing>(
    sol: &SewingSolution<V>,
    ctx: &VermaContext,
    gamma_val: &Bigraded<V>,
    basis_cutoff2: i64,
) -> Result<Option<String>> {
    let ops = sewing_ops(sol)?;
    let proto = sol.input().proto();
    let gc = gamma_val.scale(&ctx.c).try_exp()?;
    // intermediate weights climb by the raising reach before the lowering
    // half brings them back; enlarge the working cutoff accordingly
    let caps = sol.input().caps;
    let reach = 2 * (caps.da + caps.db) as i64 * caps.j_cap;
    let work_ctx = VermaContext::new(ctx.c.clone(), ctx.h.clone(), ctx.cutoff2 + reach);
    for w in basis_words(basis_cutoff2.min(ctx.cutoff2)) {
        let mut v = VermaVector::zero(&work_ctx, &proto);
        v.add_amp(w.clone(), proto.one_like());
        let lhs = ops.apply_lhs(&v)?;
        let rhs = ops.apply_rhs_bare(&v)?.scale(&gc);
        let diff = lhs.sub(&rhs);
        if !diff.is_zero() {
            let (wit, _) = diff.amps().next().unwrap();
            return Ok(Some(format!(
                "gamma identity residual applied to {w} at word {wit}"
            )));
        }
    }
    Ok(None)
}

/// Verify the representation-level Θ-identity of the given kind, applied to
/// the lowest-weight vector.
pub fn verify_theta_identity<V: GrassRing>(
    input: &SewingInput<V>,
    kind: ThetaKind,
    base_x: &V,
    base_phi: &V,
    ctx: &VermaContext,
) -> Result<Option<String>> {
    let td: ThetaData<V> = sewing::theta(input, kind, base_x, base_phi)?;
    let proto = input.proto();
    let vac = VermaVector::vacuum(ctx, &proto);

    // LHS: the explicit exponential with the displayed coefficients, with
    // generator indices truncated by the cutoff reach.
    let m_cap = ctx.cutoff2 + 2;
    let lhs_t = sewing::theta_lhs_derivation(input, kind, base_x, base_phi, m_cap)?;
    let mut lhs_ops = OpSum::new();
    for (g, c) in lhs_t.terms() {
        let tag = match g {
            crate::deriv::Gen::L(j) => NsTag::L(*j),
            crate::deriv::Gen::G(j) => NsTag::G2(2 * j - 1),
        };
        lhs_ops.push(tag, c.clone())?;
    }
    let lhs = exp_apply(&lhs_ops, &vac)?;

    // RHS: e^{shift}·e^{−ΣΘL−ΘG}·e^{−2Θ₀L(0)}·vac
    let theta0 = td.exp_theta0.try_log()?;
    let s1 = vac.exp_2l0(&theta0.neg())?;
    let mut theta_ops = OpSum::new();
    for (k2, c) in &td.theta {
        let tag = if k2 % 2 == 0 {
            NsTag::L(k2 / 2)
        } else {
            NsTag::G2(*k2)
        };
        theta_ops.push(tag, c.neg())?;
    }
    let s2 = exp_apply(&theta_ops, &s1)?;
    let shift = td.shift_derivation(input, kind, base_x, base_phi)?;
    let mut shift_ops = OpSum::new();
    for (g, c) in shift.terms() {
        let tag = match g {
            crate::deriv::Gen::L(j) => NsTag::L(*j),
            crate::deriv::Gen::G(j) => NsTag::G2(2 * j - 1),
        };
        shift_ops.push(tag, c.clone())?;
    }
    let rhs = exp_apply(&shift_ops, &s2)?;

    let diff = lhs.sub(&rhs);
    if diff.is_zero() {
        Ok(None)
    } else {
        let (w, _) = diff.amps().next().unwrap();
        Ok(Some(format!("theta identity residual at word {w}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{GrassCtx, Supernumber};
    use crate::series::Window;
    use crate::sewing::SewCaps;

    fn vctx(c: (i64, i64), h: i64, cutoff2: i64) -> VermaContext {
        VermaContext::new(
            GaussRat::from_frac(c.0, c.1),
            GaussRat::from_int(h),
            cutoff2,
        )
    }

    fn sn_proto() -> Supernumber {
        Supernumber::zero(GrassCtx::new(4))
    }

    #[test]
    fn vacuum_annihilation_and_grading() {
        let ctx = vctx((1, 2), 3, 12);
        let vac = VermaVector::vacuum(&ctx, &sn_proto());
        // L(1)·1 = 0
        assert!(vac.apply(NsTag::L(1)).is_zero());
        // L(0)·L(−1)1 = (h+1)·L(−1)1
        let v = vac.apply(NsTag::L(-1));
        let lv = v.apply(NsTag::L(0));
        let w = PbwWord {
            l: vec![(1, 1)],
            g: vec![],
        };
        assert_eq!(lv.amp(&w), Supernumber::from_int(GrassCtx::new(4), 4));
        // G(1/2)·G(−1/2)1 = 2h·1
        let gv = vac.apply(NsTag::G2(-1)).apply(NsTag::G2(1));
        assert_eq!(
            gv.amp(&PbwWord::vacuum()),
            Supernumber::from_int(GrassCtx::new(4), 6)
        );
        // d·1 = c·1
        assert_eq!(
            vac.apply(NsTag::D).amp(&PbwWord::vacuum()),
            Supernumber::from_frac(GrassCtx::new(4), 1, 2)
        );
    }

    #[test]
    fn pbw_rewriting_consistency() {
        // [L(1), L(−2)]·1 = 3L(−1)·1 (+ central term zero here)
        let ctx = vctx((3, 1), 0, 12);
        let vac = VermaVector::vacuum(&ctx, &sn_proto());
        let a = vac.apply(NsTag::L(-2)).apply(NsTag::L(1));
        let b = vac.apply(NsTag::L(1)).apply(NsTag::L(-2)); // = 0 then L(−2)… order: apply_word acts rightmost first
        let w1 = PbwWord {
            l: vec![(1, 1)],
            g: vec![],
        };
        assert_eq!(a.amp(&w1), Supernumber::from_int(GrassCtx::new(4), 3));
        assert!(b.is_zero());
        // G(3/2)·L(−2)·1 = [G(3/2), L(−2)]·1 = (3/2 + 1)·G(−1/2)·1…
        // [G_{3/2}, L_{−2}] = (3/2 − (−2)/2)G_{−1/2} = (5/2)G_{−1/2}
        let g = vac.apply(NsTag::L(-2)).apply(NsTag::G2(3));
        let wg = PbwWord {
            l: vec![],
            g: vec![1],
        };
        assert_eq!(g.amp(&wg), Supernumber::from_frac(GrassCtx::new(4), 5, 2));
    }

    #[test]
    fn verma_exp_examples() {
        let ctx = vctx((1, 2), 0, 8);
        let caps = crate::bigraded::BiCaps::new(1, 2);
        let proto = Bigraded::zero(caps, sn_proto());
        let vac: VermaVector<Bigraded<Supernumber>> = VermaVector::vacuum(&ctx, &proto);
        // exp(0)·v = v
        let t: OpSum<Bigraded<Supernumber>> = OpSum::new();
        assert_eq!(exp_apply(&t, &vac).unwrap(), vac);
        // exp(−B₁ ε_B L(−1))·1 at D_B = 2
        let b1 = Bigraded::from_cell(caps, 0, 1, Supernumber::from_int(GrassCtx::new(4), 3));
        let mut t = OpSum::new();
        t.push(NsTag::L(-1), b1.neg()).unwrap();
        let v = exp_apply(&t, &vac).unwrap();
        let w1 = PbwWord {
            l: vec![(1, 1)],
            g: vec![],
        };
        let w2 = PbwWord {
            l: vec![(1, 2)],
            g: vec![],
        };
        assert_eq!(v.amp(&w1), b1.neg());
        assert_eq!(v.amp(&w2), b1.mul(&b1).scale(&GaussRat::from_frac(1, 2)));
        // asqrt^{−2L(0)} on the weight-n component multiplies by asqrt^{−2n}
        let a = Bigraded::classical(caps, Supernumber::from_int(GrassCtx::new(4), 2));
        let scaled = v.scale_2l0(&a).unwrap();
        // h = 0: weight of L(−1)1 is 1: factor 2^{−2} = 1/4
        assert_eq!(
            scaled.amp(&w1),
            v.amp(&w1).scale(&GaussRat::from_frac(1, 4))
        );
    }

    #[test]
    fn gamma_leading_cells_and_canonicality() {
        let ctxg = GrassCtx::new(4);
        let mut input = SewingInput {
            asqrt: Supernumber::from_int(ctxg, 2),
            a: BTreeMap::new(),
            m: BTreeMap::new(),
            b: BTreeMap::new(),
            n: BTreeMap::new(),
            caps: SewCaps::new(2, 2, 2, Window::new(-8, 8)),
        };
        input.a.insert(2, Supernumber::from_int(ctxg, 1));
        input.b.insert(2, Supernumber::from_int(ctxg, 1));
        input.m.insert(2, Supernumber::gen(ctxg, 1));
        input.n.insert(2, Supernumber::gen(ctxg, 2));
        let sol = sewing::solve(&input).unwrap();
        // cutoff: h + reach: reach 2·2·2 = 8 ⟹ cutoff2 = 16
        let ctx = VermaContext::new(GaussRat::from_frac(1, 2), GaussRat::from_int(0), 12);
        let g = gamma_from_solution(&sol, &ctx).unwrap();
        // bidegree-(1,1) cell: (j³−j)/12·α₀^{−j}A_jB_j + (j²−j)/3·α₀^{−j+1/2}N M
        // at j = 2, α₀ = 4: A₂B₂-part (8−2)/12·(1/16) = 1/32;
        // NM-part (2/3)·α₀^{−3/2} = (2/3)(1/8)·ζ₂ζ₁
        let cell = g.cell(1, 1);
        let z12 = Supernumber::gen(ctxg, 2)
            .checked_mul(&Supernumber::gen(ctxg, 1))
            .unwrap();
        let expect = Supernumber::from_frac(ctxg, 1, 32)
            .checked_add(
                &z12.scale(&GaussRat::from_frac(2, 3))
                    .scale(&GaussRat::from_frac(1, 8)),
            )
            .unwrap();
        assert_eq!(cell, expect);
        // no (p,0) or (0,q) cells
        for ((p, q), v) in g.cells() {
            assert!(*p >= 1 && *q >= 1, "Γ has cell ({p},{q}) = {v}");
        }
        // canonical: independent of (c), and of h
        let ctx2 = VermaContext::new(GaussRat::from_int(3), GaussRat::from_int(0), 12);
        assert_eq!(gamma_from_solution(&sol, &ctx2).unwrap(), g);
        let ctx3 = VermaContext::new(GaussRat::from_frac(1, 2), GaussRat::from_int(1), 14);
        assert_eq!(gamma_from_solution(&sol, &ctx3).unwrap(), g);
        // residual vanishes on a basis, not just on the vacuum
        assert_eq!(gamma_residual_witness(&sol, &ctx, &g, 6).unwrap(), None);
    }

    #[test]
    fn gamma_vanishes_without_second_data() {
        let ctxg = GrassCtx::new(4);
        let mut input = SewingInput {
            asqrt: Supernumber::from_int(ctxg, 2),
            a: BTreeMap::new(),
            m: BTreeMap::new(),
            b: BTreeMap::new(),
            n: BTreeMap::new(),
            caps: SewCaps::new(2, 2, 2, Window::new(-8, 8)),
        };
        input.a.insert(1, Supernumber::from_int(ctxg, 5));
        input.m.insert(1, Supernumber::gen(ctxg, 1));
        let ctx = VermaContext::new(GaussRat::from_frac(1, 2), GaussRat::from_int(0), 12);
        let g = gamma(&input, &ctx).unwrap();
        assert!(g.is_zero(), "Γ must vanish when (B,N) = 0, got {g}");
    }

    #[test]
    fn theta_identities_in_module() {
        let ctxg = GrassCtx::new(4);
        for kind in [ThetaKind::First, ThetaKind::Second] {
            let mut input = SewingInput {
                asqrt: Supernumber::from_int(ctxg, 1),
                a: BTreeMap::new(),
                m: BTreeMap::new(),
                b: BTreeMap::new(),
                n: BTreeMap::new(),
                caps: SewCaps::new(2, 2, 2, Window::new(-10, 10)),
            };
            match kind {
                ThetaKind::First => {
                    input.a.insert(1, Supernumber::from_frac(ctxg, 1, 2));
                    input.m.insert(1, Supernumber::gen(ctxg, 1));
                }
                ThetaKind::Second => {
                    input.b.insert(1, Supernumber::from_int(ctxg, 2));
                    input.n.insert(1, Supernumber::gen(ctxg, 1));
                }
            }
            let x0 = Supernumber::from_int(ctxg, 2);
            let phi0 = Supernumber::gen(ctxg, 2);
            let ctx = VermaContext::new(GaussRat::from_frac(1, 2), GaussRat::from_int(0), 8);
            let witness = verify_theta_identity(&input, kind, &x0, &phi0, &ctx).unwrap();
            assert_eq!(witness, None, "theta identity in module ({kind:?})");
        }
    }
}
