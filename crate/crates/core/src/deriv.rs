//! The superderivations L_j(x,φ), G_{j−1/2}(x,φ), their exponential action on
//! series, and the coordinate bijections with inverses and composition laws.
//!
//! Generators act as
//!   L_j = −(x^{j+1} ∂x + ((j+1)/2) φ x^j ∂φ),
//!   G_{j−1/2} = −x^j (∂φ − φ ∂x),
//! and satisfy the Neveu-Schwarz relations with central charge zero.

use crate::coeff::GrassRing;
use crate::error::{Error, Result};
use crate::scalar::GaussRat;
use crate::series::{Cert, ExpandAt, SuperSeries, Window};
use std::collections::BTreeMap;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Gen {
    /// L_j
    L(i64),
    /// G_{j−1/2}, keyed by j (so `G(1)` is G_{1/2}, `G(0)` is G_{−1/2})
    G(i64),
}

impl Gen {
    /// Doubled weight shift of the generator action on monomials.
    pub fn shift2(&self) -> i64 {
        match self {
            Gen::L(j) => 2 * j,
            Gen::G(j) => 2 * j - 1,
        }
    }
}

/// Apply a single generator to a series.
pub fn apply_gen<C: GrassRing>(gen: Gen, h: &SuperSeries<C>) -> SuperSeries<C> {
    let proto = h.proto().clone();
    let one = proto.one_like();
    match gen {
        Gen::L(j) => {
            // −(x^{j+1} ∂x + ((j+1)/2) x^j φ∂φ)
            let t1 = h.partial_x().mul_monomial(j + 1, &one);
            let t2 = h
                .partial_phi()
                .mul_phi_left()
                .mul_monomial(j, &one)
                .scale_rat(&GaussRat::from_frac(j + 1, 2));
            t1.add(&t2).neg()
        }
        Gen::G(j) => {
            // −x^j (∂φ − φ∂x)
            let t = h.partial_phi().sub(&h.partial_x().mul_phi_left());
            t.mul_monomial(j, &one).neg()
        }
    }
}

/// Finite linear combination of L_j and G_{j−1/2} with an optional 2L₀
/// log-scale term.  The log-scale term is never exponentiated directly;
/// scaling is always performed as the substitution (x,φ) ↦ (b²x, bφ).
#[derive(Clone, Debug)]
pub struct DerivationSum<C: GrassRing> {
    terms: Vec<(Gen, C)>,
    log_scale: Option<C>,
    proto: C,
}

impl<C: GrassRing> DerivationSum<C> {
    pub fn new(proto: &C) -> Self {
        DerivationSum {
            terms: Vec::new(),
            log_scale: None,
            proto: proto.zero_like(),
        }
    }

    /// Add coefficient·generator, validating parity: L coefficients must be
    /// even, G coefficients odd.
    pub fn push(&mut self, gen: Gen, coeff: C) -> Result<()> {
        if coeff.is_zero() {
            return Ok(());
        }
        match gen {
            Gen::L(_) if !coeff.is_even_or_zero() => {
                return Err(Error::ParityViolation("L coefficient must be even".into()))
            }
            Gen::G(_) if !coeff.is_odd_or_zero() => {
                return Err(Error::ParityViolation("G coefficient must be odd".into()))
            }
            _ => {}
        }
        self.terms.push((gen, coeff));
        Ok(())
    }

    pub fn push_checked_cap(&mut self, gen: Gen, coeff: C, j_cap: i64) -> Result<()> {
        let idx = match gen {
            Gen::L(j) => j,
            Gen::G(j) => j,
        };
        if idx.abs() > j_cap {
            return Err(Error::IndexCapExceeded(idx, j_cap));
        }
        self.push(gen, coeff)
    }

    pub fn set_log_scale(&mut self, c: C) {
        self.log_scale = Some(c);
    }

    pub fn terms(&self) -> &[(Gen, C)] {
        &self.terms
    }

    pub fn neg(&self) -> Self {
        DerivationSum {
            terms: self.terms.iter().map(|(g, c)| (*g, c.neg())).collect(),
            log_scale: self.log_scale.as_ref().map(|c| c.neg()),
            proto: self.proto.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// T·h.
    pub fn apply(&self, h: &SuperSeries<C>) -> SuperSeries<C> {
        let mut acc = SuperSeries::zero(h.proto());
        for (g, c) in &self.terms {
            acc = acc.add(&apply_gen(*g, h).scale_coeff_left(c));
        }
        acc
    }
}

/// Σ Tⁿ/n! · h with a proof-of-finiteness check before iterating.
pub fn exp_apply<C: GrassRing>(
    t: &DerivationSum<C>,
    h: &SuperSeries<C>,
    budget: Window,
) -> Result<SuperSeries<C>> {
    if t.log_scale.is_some() {
        return Err(Error::IllFoundedExponential);
    }
    if t.terms.is_empty() {
        return Ok(h.clamp(budget));
    }
    let shifts: Vec<i64> = t.terms.iter().map(|(g, _)| g.shift2()).collect();
    let min_shift = *shifts.iter().min().unwrap();
    let max_shift = *shifts.iter().max().unwrap();
    let all_nil = t.terms.iter().all(|(_, c)| c.is_nilpotent_step());

    let mut n_max: Option<u64> = None;
    if all_nil {
        n_max = Some(t.proto.nil_product_bound());
    }
    if min_shift >= 1 && h.cert().lo.is_none() {
        // strictly raising on a series with exact low support
        if let Some(w0) = min_weight2(h) {
            let reach = (2 * budget.hi + 1).saturating_sub(w0);
            let bound = if reach < 0 {
                0
            } else {
                (reach / min_shift) as u64 + 1
            };
            n_max = Some(n_max.map_or(bound, |b| b.min(bound)));
        } else {
            n_max = Some(0);
        }
    }
    if max_shift <= -1 && h.cert().hi.is_none() {
        if let Some(w1) = max_weight2(h) {
            let reach = w1 - 2 * budget.lo;
            let bound = if reach < 0 {
                0
            } else {
                (reach / (-max_shift)) as u64 + 1
            };
            n_max = Some(n_max.map_or(bound, |b| b.min(bound)));
        } else {
            n_max = Some(0);
        }
    }
    let n_max = n_max.ok_or(Error::IllFoundedExponential)?;

    let mut acc = h.clone();
    let mut term = h.clone();
    for n in 1..=n_max as i64 {
        term = t.apply(&term).scale_rat(&GaussRat::from_frac(1, n));
        if term.is_zero() && term.cert() == Cert::ALL {
            break;
        }
        acc = acc.add(&term);
    }
    let acc = acc.clamp(budget);
    if acc.cert().is_empty() {
        return Err(Error::EmptyWindow);
    }
    Ok(acc)
}

fn min_weight2<C: GrassRing>(h: &SuperSeries<C>) -> Option<i64> {
    let a = h.iter0().map(|(n, _)| 2 * n).min();
    let b = h.iter1().map(|(n, _)| 2 * n + 1).min();
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(p), Some(q)) => Some(p.min(q)),
    }
}

fn max_weight2<C: GrassRing>(h: &SuperSeries<C>) -> Option<i64> {
    let a = h.iter0().map(|(n, _)| 2 * n).max();
    let b = h.iter1().map(|(n, _)| 2 * n + 1).max();
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(p), Some(q)) => Some(p.max(q)),
    }
}

/// Substitution (x,φ) ↦ (asqrt² x, asqrt φ), the action of asqrt^{−2L₀}.
pub fn scale_action<C: GrassRing>(asqrt: &C, h: &SuperSeries<C>) -> Result<SuperSeries<C>> {
    h.scale_substitution(asqrt)
}

/// Local coordinate data: a square-root datum and the exponential-coordinate
/// tails (A_j, M_{j−1/2}) keyed by j ≥ 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpCoords<C: GrassRing> {
    pub asqrt: C,
    pub a: BTreeMap<i64, C>,
    pub m: BTreeMap<i64, C>,
}

impl<C: GrassRing> ExpCoords<C> {
    pub fn identity(proto: &C) -> Self {
        ExpCoords {
            asqrt: proto.one_like(),
            a: BTreeMap::new(),
            m: BTreeMap::new(),
        }
    }

    pub fn new(asqrt: C, a: BTreeMap<i64, C>, m: BTreeMap<i64, C>) -> Result<Self> {
        if !asqrt.is_invertible() {
            return Err(Error::NotInvertible);
        }
        for (j, c) in &a {
            if *j < 1 {
                return Err(Error::IndexCapExceeded(*j, 0));
            }
            if !c.is_even_or_zero() {
                return Err(Error::ParityViolation(format!("A_{j} must be even")));
            }
        }
        for (j, c) in &m {
            if *j < 1 {
                return Err(Error::IndexCapExceeded(*j, 0));
            }
            if !c.is_odd_or_zero() {
                return Err(Error::ParityViolation(format!("M_{{{j}-1/2}} must be odd")));
            }
        }
        // canonical form: no stored zeros
        let a = a.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let m = m.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Ok(ExpCoords { asqrt, a, m })
    }

    pub fn is_identity(&self) -> bool {
        self.asqrt.sub(&self.asqrt.one_like()).is_zero()
            && self.a.values().all(|c| c.is_zero())
            && self.m.values().all(|c| c.is_zero())
    }

    pub fn proto(&self) -> C {
        self.asqrt.zero_like()
    }

    /// The derivation −Σ (A_j L_j + M_{j−1/2} G_{j−1/2}).
    pub fn neg_derivation(&self) -> Result<DerivationSum<C>> {
        let proto = self.proto();
        let mut t = DerivationSum::new(&proto);
        for (j, c) in &self.a {
            t.push(Gen::L(*j), c.neg())?;
        }
        for (j, c) in &self.m {
            t.push(Gen::G(*j), c.neg())?;
        }
        Ok(t)
    }

    /// H = exp(−Σ(A_j L_j + M G)) · asqrt^{−2L₀} · (x,φ).
    pub fn forward(&self, budget: Window) -> Result<SuperSeries<C>> {
        let base = scale_action(&self.asqrt, &SuperSeries::identity(&self.proto()))?;
        exp_apply(&self.neg_derivation()?, &base, budget)
    }

    /// The data of the compositional inverse:
    /// (asqrt⁻¹, {−asqrt^{−2j}A_j}, {−asqrt^{−2j+1}M_{j−1/2}}).
    pub fn inverse(&self) -> Result<ExpCoords<C>> {
        let inv = self.asqrt.try_invert()?;
        let mut a = BTreeMap::new();
        for (j, c) in &self.a {
            a.insert(*j, inv.pow_i64(2 * j)?.mul(c).neg());
        }
        let mut m = BTreeMap::new();
        for (j, c) in &self.m {
            m.insert(*j, inv.pow_i64(2 * j - 1)?.mul(c).neg());
        }
        Ok(ExpCoords { asqrt: inv, a, m })
    }

    /// Group law: (self) ∘ (rhs) = Ê⁻¹(Ê(rhs) ∘ Ê(self)).
    pub fn compose(&self, rhs: &ExpCoords<C>, j_cap: i64, budget: Window) -> Result<ExpCoords<C>> {
        // (√a,A,M)∘(√b,B,N) = (√a√b, (A,M)∘{√a^{2j}B_j, √a^{2j−1}N_{j−1/2}})
        let ab = self.asqrt.mul(&rhs.asqrt);
        let mut scaled = ExpCoords {
            asqrt: self.asqrt.one_like(),
            a: BTreeMap::new(),
            m: BTreeMap::new(),
        };
        for (j, c) in &rhs.a {
            scaled.a.insert(*j, self.asqrt.pow_i64(2 * j)?.mul(c));
        }
        for (j, c) in &rhs.m {
            scaled.m.insert(*j, self.asqrt.pow_i64(2 * j - 1)?.mul(c));
        }
        let left = ExpCoords {
            asqrt: self.asqrt.one_like(),
            a: self.a.clone(),
            m: self.m.clone(),
        };
        let h_left = left.forward(budget)?;
        let h_right = scaled.forward(budget)?;
        let composed = h_right.compose(&h_left, ExpandAt::Zero, budget)?;
        let mut data = e_inverse(&composed, j_cap, budget)?;
        data.asqrt = ab;
        Ok(data)
    }

    /// t·(A, M) with the same square-root datum 1.
    pub fn scaled_tails(&self, t: &C) -> ExpCoords<C> {
        ExpCoords {
            asqrt: self.asqrt.clone(),
            a: self.a.iter().map(|(j, c)| (*j, t.mul(c))).collect(),
            m: self.m.iter().map(|(j, c)| (*j, t.mul(c))).collect(),
        }
    }
}

/// Ê⁻¹: recover (asqrt, A, M) from a superconformal series vanishing at zero
/// with invertible even φ-coefficient, by the ascending triangular solve.
pub fn e_inverse<C: GrassRing>(
    h: &SuperSeries<C>,
    j_cap: i64,
    budget: Window,
) -> Result<ExpCoords<C>> {
    let asqrt = h.g_coeff(0);
    if !asqrt.is_invertible() {
        return Err(Error::NotInvertible);
    }
    if !h.psi_coeff(0).is_zero() {
        return Err(Error::OddDataAtPuncture);
    }
    let inv = asqrt.try_invert()?;
    let inv2 = inv.mul(&inv);
    // normalized data: a_j = coeff of x^{j+1} in f/asqrt², m_{j−1/2} = coeff
    // of x^j in ψ/asqrt
    let coeff_a = |j: i64| -> C { inv2.mul(&h.f_coeff(j + 1)) };
    let coeff_m = |j: i64| -> C { inv.mul(&h.psi_coeff(j)) };
    if !coeff_a(0).sub(&asqrt.one_like()).is_zero() {
        return Err(Error::Validation(
            "leading even coefficient must equal the square of the φ-coefficient".into(),
        ));
    }
    // usable weight range limited by the certified band
    let hi = match h.cert().hi {
        Some(hcert) => (hcert - 1).min(j_cap),
        None => j_cap,
    };
    let mut data = ExpCoords::identity(&h.proto().clone());
    for w2 in 1..=(2 * hi) {
        let guess = data.forward(budget)?;
        if w2 % 2 == 1 {
            // odd weight (2j−1): M_{j−1/2}
            let j = (w2 + 1) / 2;
            let cur = guess.psi_coeff(j);
            let target = coeff_m(j);
            let delta = target.sub(&cur);
            if !delta.is_zero() {
                let prev = data.m.get(&j).cloned().unwrap_or_else(|| delta.zero_like());
                data.m.insert(j, prev.add(&delta));
            }
        } else {
            let j = w2 / 2;
            let cur = guess.f_coeff(j + 1);
            let target = coeff_a(j);
            let delta = target.sub(&cur);
            if !delta.is_zero() {
                let prev = data.a.get(&j).cloned().unwrap_or_else(|| delta.zero_like());
                data.a.insert(j, prev.add(&delta));
            }
        }
    }
    data.asqrt = asqrt;
    Ok(data)
}

/// Infinity-side data (B_j, N_{j−1/2}), keyed by j ≥ 1.
#[derive(Clone, Debug, PartialEq)]
pub struct InfCoords<C: GrassRing> {
    pub b: BTreeMap<i64, C>,
    pub n: BTreeMap<i64, C>,
}

impl<C: GrassRing> InfCoords<C> {
    pub fn zero() -> Self {
        InfCoords {
            b: BTreeMap::new(),
            n: BTreeMap::new(),
        }
    }

    pub fn validated(b: BTreeMap<i64, C>, n: BTreeMap<i64, C>) -> Result<Self> {
        for (j, c) in &b {
            if *j < 1 {
                return Err(Error::IndexCapExceeded(*j, 0));
            }
            if !c.is_even_or_zero() {
                return Err(Error::ParityViolation(format!("B_{j} must be even")));
            }
        }
        for (j, c) in &n {
            if *j < 1 {
                return Err(Error::IndexCapExceeded(*j, 0));
            }
            if !c.is_odd_or_zero() {
                return Err(Error::ParityViolation(format!("N_{{{j}-1/2}} must be odd")));
            }
        }
        let b = b.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let n = n.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Ok(InfCoords { b, n })
    }

    pub fn is_zero(&self) -> bool {
        self.b.values().all(|c| c.is_zero()) && self.n.values().all(|c| c.is_zero())
    }

    /// Σ (B_j L_{−j} + N_{j−1/2} G_{−j+1/2}).
    pub fn derivation(&self, proto: &C) -> Result<DerivationSum<C>> {
        let mut t = DerivationSum::new(proto);
        for (j, c) in &self.b {
            t.push(Gen::L(-j), c.clone())?;
        }
        for (j, c) in &self.n {
            // G_{−j+1/2} = G_{(1−j)−1/2}
            t.push(Gen::G(1 - j), c.clone())?;
        }
        Ok(t)
    }

    /// H = exp(Σ(B_j L_{−j} + N G_{−j+1/2})) · (1/x, iφ/x).
    pub fn forward<Cp>(&self, proto: &C, budget: Window) -> Result<SuperSeries<C>>
    where
        Cp: GrassRing,
    {
        exp_apply(
            &self.derivation(proto)?,
            &SuperSeries::inversion(proto),
            budget,
        )
    }

    /// H⁻¹ ∘ I = exp(−Σ(B_j L_{−j} + N G_{−j+1/2})) · (x,φ).
    pub fn inverse_compose_i(&self, proto: &C, budget: Window) -> Result<SuperSeries<C>> {
        exp_apply(
            &self.derivation(proto)?.neg(),
            &SuperSeries::identity(proto),
            budget,
        )
    }

    pub fn scaled_tails(&self, t: &C) -> InfCoords<C> {
        InfCoords {
            b: self.b.iter().map(|(j, c)| (*j, t.mul(c))).collect(),
            n: self.n.iter().map(|(j, c)| (*j, t.mul(c))).collect(),
        }
    }

    /// Group law on infinity data: the sequences compose through the
    /// at-zero group law applied to the raw tails.
    pub fn compose(
        &self,
        rhs: &InfCoords<C>,
        proto: &C,
        j_cap: i64,
        budget: Window,
    ) -> Result<InfCoords<C>> {
        let lhs_coords = ExpCoords {
            asqrt: proto.one_like(),
            a: self.b.clone(),
            m: self.n.clone(),
        };
        let rhs_coords = ExpCoords {
            asqrt: proto.one_like(),
            a: rhs.b.clone(),
            m: rhs.n.clone(),
        };
        let composed = lhs_coords.compose(&rhs_coords, j_cap, budget)?;
        Ok(InfCoords {
            b: composed.a,
            n: composed.m,
        })
    }
}

/// Extract (B, N) from a series of the infinity form
/// exp(Σ(B_j L_{−j} + N G_{−j+1/2}))·(1/x, iφ/x): conjugate by I and use the
/// zero-side triangular solve on tilde-E(B, −iN).
pub fn inf_data_of_series<C: GrassRing>(
    h: &SuperSeries<C>,
    proto: &C,
    j_cap: i64,
    budget: Window,
) -> Result<InfCoords<C>> {
    // H = tilde-E(B, −iN)(1/x, iφ/x)  ⟹  H ∘ I⁻¹ = tilde-E(B, −iN)
    let at_zero = h.compose(
        &SuperSeries::inversion_inverse(proto),
        ExpandAt::Zero,
        budget,
    )?;
    let data = e_inverse(&at_zero, j_cap, budget)?;
    if !data.asqrt.sub(&proto.one_like()).is_zero() {
        return Err(Error::Validation(
            "infinity-form series must have unit leading datum".into(),
        ));
    }
    let i_rat = proto.from_rat(&GaussRat::i());
    let mut n = BTreeMap::new();
    for (j, c) in &data.m {
        // stored odd datum is −iN_{j−1/2} ⟹ N = i·datum
        n.insert(*j, i_rat.mul(c));
    }
    Ok(InfCoords { b: data.a, n })
}
