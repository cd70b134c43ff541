//! The formal sewing-equation solver: transition series, the inductive
//! construction of the two uniformizing halves, the canonical Ψ-series, the
//! Θ-series of the two special sewings, and the normal-ordering identity.

use crate::bigraded::{BiCaps, Bigraded};
use crate::coeff::GrassRing;
use crate::deriv::{self, exp_apply, scale_action, DerivationSum, ExpCoords, Gen, InfCoords};
use crate::error::{Error, Result};
use crate::scalar::GaussRat;
use crate::series::{Cert, ExpandAt, SuperSeries, Window};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SewCaps {
    pub j_cap: i64,
    pub da: u32,
    pub db: u32,
    pub window: Window,
}

impl SewCaps {
    pub fn new(j_cap: i64, da: u32, db: u32, window: Window) -> Self {
        assert!(j_cap >= 1);
        SewCaps {
            j_cap,
            da,
            db,
            window,
        }
    }

    pub fn bicaps(&self) -> BiCaps {
        BiCaps::new(self.da, self.db)
    }

    /// Band on which every cell of the solution is a Laurent polynomial.
    pub fn theory_band(&self) -> Window {
        let reach = (self.da + self.db) as i64 * self.j_cap;
        Window::new(
            (1 - reach).min(self.window.lo) - 1,
            (1 + reach).max(self.window.hi) + 1,
        )
    }
}

/// The data of the two coordinates being sewn: the first coordinate's
/// square-root datum and tails (A, M), the second coordinate's tails (B, N).
#[derive(Clone, Debug)]
pub struct SewingInput<V: GrassRing> {
    pub asqrt: V,
    pub a: BTreeMap<i64, V>,
    pub m: BTreeMap<i64, V>,
    pub b: BTreeMap<i64, V>,
    pub n: BTreeMap<i64, V>,
    pub caps: SewCaps,
}

impl<V: GrassRing> SewingInput<V> {
    pub fn validate(&self) -> Result<()> {
        if !self.asqrt.is_invertible() {
            return Err(Error::NotInvertible);
        }
        if !self.asqrt.is_even_or_zero() {
            return Err(Error::ParityViolation(
                "square-root datum must be even".into(),
            ));
        }
        for (name, map, even) in [
            ("A", &self.a, true),
            ("B", &self.b, true),
            ("M", &self.m, false),
            ("N", &self.n, false),
        ] {
            for (j, c) in map.iter() {
                if *j < 1 || *j > self.caps.j_cap {
                    return Err(Error::IndexCapExceeded(*j, self.caps.j_cap));
                }
                let ok = if even {
                    c.is_even_or_zero()
                } else {
                    c.is_odd_or_zero()
                };
                if !ok {
                    return Err(Error::ParityViolation(format!(
                        "{name}_{j} has wrong parity"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn proto_cell(&self) -> V {
        self.asqrt.zero_like()
    }

    fn lift(&self, p: u32, q: u32, v: &V) -> Bigraded<V> {
        Bigraded::from_cell(self.caps.bicaps(), p, q, v.clone())
    }

    pub fn lifted_asqrt(&self) -> Bigraded<V> {
        Bigraded::classical(self.caps.bicaps(), self.asqrt.clone())
    }

    /// The first coordinate's data, with its tails carried at bidegree (1,0).
    pub fn zero_side(&self) -> Result<ExpCoords<Bigraded<V>>> {
        ExpCoords::new(
            self.lifted_asqrt(),
            self.a
                .iter()
                .map(|(j, c)| (*j, self.lift(1, 0, c)))
                .collect(),
            self.m
                .iter()
                .map(|(j, c)| (*j, self.lift(1, 0, c)))
                .collect(),
        )
    }

    /// The second coordinate's data, with its tails at bidegree (0,1).
    pub fn inf_side(&self) -> Result<InfCoords<Bigraded<V>>> {
        InfCoords::validated(
            self.b
                .iter()
                .map(|(j, c)| (*j, self.lift(0, 1, c)))
                .collect(),
            self.n
                .iter()
                .map(|(j, c)| (*j, self.lift(0, 1, c)))
                .collect(),
        )
    }

    pub fn proto(&self) -> Bigraded<V> {
        Bigraded::zero(self.caps.bicaps(), self.proto_cell())
    }
}

/// Extract one bidegree cell of a bigraded series as a plain series.
pub fn cell_series<V: GrassRing>(h: &SuperSeries<Bigraded<V>>, p: u32, q: u32) -> SuperSeries<V> {
    let proto = h.proto().proto().zero_like();
    let c0 = h
        .iter0()
        .map(|(n, c)| (n, c.cell(p, q)))
        .filter(|(_, c)| !c.is_zero())
        .collect::<Vec<_>>();
    let c1 = h
        .iter1()
        .map(|(n, c)| (n, c.cell(p, q)))
        .filter(|(_, c)| !c.is_zero())
        .collect::<Vec<_>>();
    SuperSeries::from_parts(c0, c1, h.cert(), &proto)
}

/// Embed a plain series at a fixed bidegree.
pub fn lift_series<V: GrassRing>(
    h: &SuperSeries<V>,
    caps: BiCaps,
    p: u32,
    q: u32,
) -> SuperSeries<Bigraded<V>> {
    let proto = Bigraded::zero(caps, h.proto().zero_like());
    let c0 = h
        .iter0()
        .map(|(n, c)| (n, Bigraded::from_cell(caps, p, q, c.clone())))
        .collect::<Vec<_>>();
    let c1 = h
        .iter1()
        .map(|(n, c)| (n, Bigraded::from_cell(caps, p, q, c.clone())))
        .collect::<Vec<_>>();
    SuperSeries::from_parts(c0, c1, h.cert(), &proto)
}

/// exp(c·2L₀)·h: multiply the x^n coefficient by e^{−2nc} and the φx^n
/// coefficient by e^{−(2n+1)c}.  The coefficient c must be nilpotent.
pub fn exp_l0_action<C: GrassRing>(c: &C, h: &SuperSeries<C>) -> Result<SuperSeries<C>> {
    let e = c.try_exp()?;
    let e_inv = e.try_invert()?;
    let c0 = h
        .iter0()
        .map(|(n, v)| Ok((n, e_inv.pow_i64(2 * n)?.mul(v))))
        .collect::<Result<Vec<_>>>()?;
    let c1 = h
        .iter1()
        .map(|(n, v)| Ok((n, e_inv.pow_i64(2 * n + 1)?.mul(v))))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuperSeries::from_parts(c0, c1, h.cert(), h.proto()))
}

pub struct SewingSolution<V: GrassRing> {
    pub caps: SewCaps,
    /// F̄⁽¹⁾, superconformal with even φ-coefficient 1.
    pub f1: SuperSeries<Bigraded<V>>,
    /// F̄⁽²⁾, superconformal with even φ-coefficient asqrt⁻¹ at zero
    /// first-coordinate data.
    pub f2: SuperSeries<Bigraded<V>>,
    /// The transition series (H⁽²⁾)⁻¹ ∘ I ∘ H⁽¹⁾.
    pub transition: SuperSeries<Bigraded<V>>,
    /// h-table: bidegree → (f,ψ)-parts of F̄⁽¹⁾ beyond the base x.
    pub h_table: BTreeMap<(u32, u32), SuperSeries<V>>,
    /// k-table: bidegree → (f,ψ)-parts of F̄⁽²⁾ beyond the base α₀⁻¹x.
    pub k_table: BTreeMap<(u32, u32), SuperSeries<V>>,
    /// q-table: bidegree → (ξ,g)-parts of F̄⁽²⁾, recomputed from k by the
    /// superconformal square-root relation.
    pub q_table: BTreeMap<(u32, u32), SuperSeries<V>>,
    /// Ψ keyed by doubled half-integer index (2·j for Ψ_j).
    pub psi: BTreeMap<i64, Bigraded<V>>,
    /// Which cells were fully determined vs window-clipped.
    pub determination: Vec<(u32, u32, bool)>,
    input: SewingInput<V>,
}

/// The transition series (H⁽²⁾)⁻¹ ∘ I ∘ H⁽¹⁾ computed as the product of the
/// three exponential factors.
pub fn transition<V: GrassRing>(input: &SewingInput<V>) -> Result<SuperSeries<Bigraded<V>>> {
    input.validate()?;
    let wide = input.caps.theory_band();
    let proto = input.proto();
    let step1 = input.inf_side()?.inverse_compose_i(&proto, wide)?;
    let step2 = scale_action(&input.lifted_asqrt(), &step1)?;
    let t_a = input.zero_side()?.neg_derivation()?;
    exp_apply(&t_a, &step2, wide)
}

/// The transition computed the compositional way, for cross-checking.
pub fn transition_by_composition<V: GrassRing>(
    input: &SewingInput<V>,
) -> Result<SuperSeries<Bigraded<V>>> {
    input.validate()?;
    let wide = input.caps.theory_band();
    let proto = input.proto();
    let h1 = input.zero_side()?.forward(wide)?;
    let h2inv_i = input.inf_side()?.inverse_compose_i(&proto, wide)?;
    h2inv_i
        .promote_exact()
        .compose(&h1.promote_exact(), ExpandAt::Zero, wide)
}

fn superconformal_complete<C: GrassRing>(
    f_psi: &SuperSeries<C>,
    lead_g: &C,
    dir: ExpandAt,
    budget: Window,
) -> Result<SuperSeries<C>> {
    let f = f_psi.component_f();
    let psi = f_psi.component_psi();
    let fp = f.partial_x().add(&psi.mul(&psi.partial_x()));
    let lead_sq_inv = lead_g.mul(lead_g).try_invert()?;
    let normalized = fp.scale_coeff_left(&lead_sq_inv);
    let g = normalized
        .sqrt_one_plus(dir, budget)?
        .scale_coeff_left(lead_g);
    let xi = g.mul(&psi);
    Ok(SuperSeries::from_components(&f, &xi, &psi, &g))
}

pub fn solve<V: GrassRing>(input: &SewingInput<V>) -> Result<SewingSolution<V>> {
    input.validate()?;
    let caps = input.caps;
    let wide = caps.theory_band();
    let proto = input.proto();
    let one = proto.one_like();
    let a_lift = input.lifted_asqrt();
    let a_inv = a_lift.try_invert()?;

    let w_series = transition(input)?.promote_exact();

    // Boundary exponentials.
    // F̄¹ at zero first-coordinate data: α^{−2L₀}·exp(−T_B)·α^{2L₀}·(x,φ),
    // i.e. the scaling-conjugated second-coordinate exponential whose linear
    // part reproduces Ψ_{−j} = −α₀^{−j}B_j.
    let ident = SuperSeries::identity(&proto);
    let t_b_neg = input.inf_side()?.derivation(&proto)?.neg();
    let f1_boundary = {
        let s1 = scale_action(&a_inv, &ident)?;
        let s2 = exp_apply(&t_b_neg, &s1, wide)?;
        scale_action(&a_lift, &s2)?
    };
    // F̄² at zero second-coordinate data: α^{2L₀}·exp(+T_A)·(x,φ) = (H¹)⁻¹
    let f2_boundary = input.zero_side()?.inverse()?.forward(wide)?;

    // Unknowns are the (f,ψ)-parts; the φ-parts are recovered by the
    // superconformal completion at every stage.
    let mut f1_fp = f1_boundary
        .component_f()
        .add(&f1_boundary.component_psi())
        .promote_exact();
    let mut f2_fp = f2_boundary
        .component_f()
        .add(&f2_boundary.component_psi())
        .promote_exact();

    let mut h_table = BTreeMap::new();
    let mut k_table = BTreeMap::new();
    let mut determination = Vec::new();

    // Record the boundary cells.
    for p in 1..=caps.da {
        let k = cell_series(&f2_fp, p, 0);
        if !k.is_zero() {
            k_table.insert((p, 0), k);
        }
    }
    for q in 1..=caps.db {
        let h = cell_series(&f1_fp, 0, q);
        if !h.is_zero() {
            h_table.insert((0, q), h);
        }
    }

    let need_lo = 1 - (caps.da + caps.db) as i64 * caps.j_cap;
    let need_hi = 1 + (caps.da + caps.db) as i64 * caps.j_cap;

    for total in 2..=(caps.da + caps.db) {
        // complete F̄² superconformally with the current cells
        let f2_full =
            superconformal_complete(&f2_fp, &a_inv, ExpandAt::Zero, wide)?.promote_exact();
        let composed = f2_full.compose(&w_series, ExpandAt::Zero, wide)?;
        if !(composed.cert().contains(need_lo) && composed.cert().contains(need_hi)) {
            let p0 = 1.min(caps.da);
            return Err(Error::WindowTooSmall(p0, total - p0));
        }
        for p in 1..=caps.da.min(total.saturating_sub(1)) {
            let q = total - p;
            if q < 1 || q > caps.db {
                continue;
            }
            let r = cell_series(&composed, p, q).promote_exact();
            let (h_part, k_shifted) = r.split_pm();
            // h_{(p,q)} = (R)⁻ ;  k_{(p,q)}(α₀ x) = −(R)⁺
            let k_part = {
                // substitute x ↦ α₀⁻¹x exponent-wise and negate
                let resc = k_shifted
                    .iter0()
                    .map(|(n, c)| Ok((n, input.asqrt.pow_i64(-2 * n)?.mul(c).neg())))
                    .collect::<Result<Vec<_>>>()?;
                SuperSeries::from_parts(resc, Vec::new(), k_shifted.cert(), &input.proto_cell())
            };
            let fully = !h_part.cert().is_empty() && !k_part.cert().is_empty();
            determination.push((p, q, fully));
            if !h_part.is_zero() {
                f1_fp = f1_fp.add(&lift_series(&h_part, caps.bicaps(), p, q));
                h_table.insert((p, q), h_part);
            }
            if !k_part.is_zero() {
                f2_fp = f2_fp.add(&lift_series(&k_part, caps.bicaps(), p, q));
                k_table.insert((p, q), k_part);
            }
        }
    }

    let f1 = superconformal_complete(&f1_fp, &one, ExpandAt::Infinity, wide)?.promote_exact();
    let f2 = superconformal_complete(&f2_fp, &a_inv, ExpandAt::Zero, wide)?.promote_exact();

    let mut q_table = BTreeMap::new();
    for p in 0..=caps.da {
        for q in 0..=caps.db {
            let xi = cell_series(&f2.component_xi(), p, q);
            let g = cell_series(&f2.component_g(), p, q);
            let cell = xi.add(&g);
            if !cell.is_zero() {
                q_table.insert((p, q), cell);
            }
        }
    }

    // Ψ extraction.
    let jmax = (caps.da + caps.db) as i64 * caps.j_cap;
    let mut psi = BTreeMap::new();
    {
        // I ∘ F̄¹ ∘ I⁻¹ = tilde-E({Ψ_{−j}, −iΨ_{−j+1/2}})
        let inner = f1.compose(
            &SuperSeries::inversion_inverse(&proto),
            ExpandAt::Zero,
            wide,
        )?;
        let s =
            SuperSeries::inversion(&proto).compose(&inner.promote_exact(), ExpandAt::Zero, wide)?;
        let data = deriv::e_inverse(&s.promote_exact(), jmax, wide)?;
        if !data.asqrt.sub(&one).is_zero() {
            return Err(Error::Validation(
                "conjugated first half must have unit leading datum".into(),
            ));
        }
        let i_lift = proto.from_rat(&GaussRat::i());
        for (j, c) in &data.a {
            if !c.is_zero() {
                psi.insert(-2 * j, c.clone());
            }
        }
        for (j, c) in &data.m {
            let v = i_lift.mul(c);
            if !v.is_zero() {
                psi.insert(-(2 * j - 1), v);
            }
        }
    }
    {
        // F̄² = e^{−Ψ₀2L₀}·α^{2L₀}·exp(−Σ(Ψ_j L_j + Ψ_{j−1/2}G_{j−1/2}))·(x,φ):
        // the scaling factor sits on the left, with datum b = e^{Ψ₀}α₀^{−1/2}
        // read off the even φ-coefficient.  Strip it, then extract the tails.
        let b = f2.g_coeff(0);
        let psi0 = b.mul(&a_lift).try_log()?;
        if !psi0.is_zero() {
            psi.insert(0, psi0);
        }
        let stripped = f2.scale_substitution(&b.try_invert()?)?;
        let data = deriv::e_inverse(&stripped, jmax, wide)?;
        if !data.asqrt.sub(&one).is_zero() {
            return Err(Error::Validation(
                "second half must be unit-normalized after stripping its scaling".into(),
            ));
        }
        for (j, c) in &data.a {
            if !c.is_zero() {
                psi.insert(2 * j, c.clone());
            }
        }
        for (j, c) in &data.m {
            if !c.is_zero() {
                psi.insert(2 * j - 1, c.clone());
            }
        }
    }

    Ok(SewingSolution {
        caps,
        f1,
        f2,
        transition: w_series,
        h_table,
        k_table,
        q_table,
        psi,
        determination,
        input: input.clone(),
    })
}

impl<V: GrassRing> SewingSolution<V> {
    pub fn input(&self) -> &SewingInput<V> {
        &self.input
    }

    pub fn psi_at(&self, doubled_index: i64) -> Bigraded<V> {
        self.psi
            .get(&doubled_index)
            .cloned()
            .unwrap_or_else(|| self.input.proto())
    }

    /// The sewing-equation residual F̄⁽¹⁾ − F̄⁽²⁾ ∘ W on the user window.
    pub fn residual(&self) -> Result<SuperSeries<Bigraded<V>>> {
        let comp = self
            .f2
            .compose(&self.transition, ExpandAt::Zero, self.caps.theory_band())?;
        Ok(self.f1.sub(&comp).clamp(self.caps.window))
    }

    /// Derivation Σ(Ψ_{−j}L_{−j} + Ψ_{−j+1/2}G_{−j+1/2}) over j ≥ 1.
    pub fn psi_minus_derivation(&self) -> Result<DerivationSum<Bigraded<V>>> {
        let proto = self.input.proto();
        let mut t = DerivationSum::new(&proto);
        for (k2, c) in &self.psi {
            if *k2 >= 0 {
                continue;
            }
            if k2 % 2 == 0 {
                t.push(Gen::L(k2 / 2), c.clone())?;
            } else {
                // doubled 1−2j ↦ G_{−j+1/2} = G(1−j)
                let j = (1 - k2) / 2;
                t.push(Gen::G(1 - j), c.clone())?;
            }
        }
        Ok(t)
    }

    /// Derivation Σ(Ψ_j L_j + Ψ_{j−1/2} G_{j−1/2}) over j ≥ 1.
    pub fn psi_plus_derivation(&self) -> Result<DerivationSum<Bigraded<V>>> {
        let proto = self.input.proto();
        let mut t = DerivationSum::new(&proto);
        for (k2, c) in &self.psi {
            if *k2 <= 0 {
                continue;
            }
            if k2 % 2 == 0 {
                t.push(Gen::L(k2 / 2), c.clone())?;
            } else {
                let j = (k2 + 1) / 2;
                t.push(Gen::G(j), c.clone())?;
            }
        }
        Ok(t)
    }

    /// Apply the non-normally-ordered product
    /// exp(−ΣA L − ΣM G)·α^{−2L₀}·exp(−ΣB L₋ − ΣN G₋) to h.
    pub fn apply_lhs(&self, h: &SuperSeries<Bigraded<V>>) -> Result<SuperSeries<Bigraded<V>>> {
        let wide = self.caps.theory_band();
        let proto = self.input.proto();
        let t_b_neg = self.input.inf_side()?.derivation(&proto)?.neg();
        let t_a_neg = self.input.zero_side()?.neg_derivation()?;
        let s1 = exp_apply(&t_b_neg, h, wide)?;
        let s2 = scale_action(&self.input.lifted_asqrt(), &s1)?;
        exp_apply(&t_a_neg, &s2, wide)
    }

    /// Apply the normally-ordered product
    /// exp(ΣΨ₋L₋+…)·exp(ΣΨ₊L+…)·α^{−2L₀}·exp(Ψ₀ 2L₀) to h.
    pub fn apply_rhs(&self, h: &SuperSeries<Bigraded<V>>) -> Result<SuperSeries<Bigraded<V>>> {
        let wide = self.caps.theory_band();
        let s1 = exp_l0_action(&self.psi_at(0), h)?;
        let s2 = scale_action(&self.input.lifted_asqrt(), &s1)?;
        let s3 = exp_apply(&self.psi_plus_derivation()?, &s2, wide)?;
        exp_apply(&self.psi_minus_derivation()?, &s3, wide)
    }

    /// Exact normal-order verification on all monomials φ^ε x^k, |k| ≤ kmax.
    pub fn verify_normal_order(&self, kmax: i64) -> Result<Option<String>> {
        let proto = self.input.proto();
        for k in -kmax..=kmax {
            for eps in 0..2 {
                let parts = vec![(k, proto.one_like())];
                let mono = if eps == 0 {
                    SuperSeries::from_parts(parts, Vec::new(), Cert::ALL, &proto)
                } else {
                    SuperSeries::from_parts(Vec::new(), parts, Cert::ALL, &proto)
                };
                let lhs = self.apply_lhs(&mono)?.clamp(self.caps.window);
                let rhs = self.apply_rhs(&mono)?.clamp(self.caps.window);
                let diff = lhs.sub(&rhs);
                if !diff.is_zero() {
                    let witness = diff
                        .iter0()
                        .map(|(n, _)| n)
                        .chain(diff.iter1().map(|(n, _)| n))
                        .min()
                        .unwrap_or(0);
                    return Ok(Some(format!(
                        "normal-order residual on phi^{eps} x^{k} at exponent {witness}"
                    )));
                }
            }
        }
        Ok(None)
    }
}

/// Which of the two special-sewing Θ-series to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaKind {
    First,
    Second,
}

pub struct ThetaData<V: GrassRing> {
    /// Θ keyed by doubled index (2j for Θ_j, 2j−1 for Θ_{j−1/2}), j ≥ 1.
    pub theta: BTreeMap<i64, Bigraded<V>>,
    /// exp(Θ₀).
    pub exp_theta0: Bigraded<V>,
    /// The evaluated base image (x̃, φ̃).
    pub base_image: (Bigraded<V>, Bigraded<V>),
}

impl<V: GrassRing> ThetaData<V> {
    pub fn theta_at(&self, doubled: i64, proto: &Bigraded<V>) -> Bigraded<V> {
        self.theta
            .get(&doubled)
            .cloned()
            .unwrap_or_else(|| proto.zero_like())
    }

    /// −Σ(Θ_j L_j + Θ_{j−1/2} G_{j−1/2}).
    pub fn neg_derivation(&self, proto: &Bigraded<V>) -> Result<DerivationSum<Bigraded<V>>> {
        let mut t = DerivationSum::new(proto);
        for (k2, c) in &self.theta {
            if k2 % 2 == 0 {
                t.push(Gen::L(k2 / 2), c.neg())?;
            } else {
                t.push(Gen::G((k2 + 1) / 2), c.neg())?;
            }
        }
        Ok(t)
    }

    /// The shift derivation a·L₋₁ + b·G₋₁/₂ closing the Θ-identity.
    ///
    /// Shifting the outer variables of the composed coordinate feeds back
    /// through the odd coupling (ρ+b)φ̃, so the even coefficient picks up the
    /// cross term φ̂φ̃ (and the base scaling contributes α₀-factors for the
    /// first kind):
    ///   a = α₀((x̃ − x̂) + φ̂φ̃),  b = α₀^{1/2}(φ̃ − φ̂),
    /// where (x̂,φ̂) = (α₀⁻¹x, α₀^{−1/2}φ) for the first kind and (x,φ) for
    /// the second.
    pub fn shift_derivation(
        &self,
        input: &SewingInput<V>,
        kind: ThetaKind,
        base_x: &V,
        base_phi: &V,
    ) -> Result<DerivationSum<Bigraded<V>>> {
        let caps = input.caps;
        let proto = input.proto();
        let x0 = Bigraded::classical(caps.bicaps(), base_x.clone());
        let phi0 = Bigraded::classical(caps.bicaps(), base_phi.clone());
        let (xt, pt) = self.base_image.clone();
        let (a, b) = match kind {
            ThetaKind::First => {
                let asq = input.lifted_asqrt();
                let alpha0 = asq.mul(&asq);
                let a_inv = asq.try_invert()?;
                let xhat = a_inv.mul(&a_inv).mul(&x0);
                let phat = a_inv.mul(&phi0);
                (
                    alpha0.mul(&xt.sub(&xhat).add(&phat.mul(&pt))),
                    asq.mul(&pt.sub(&phat)),
                )
            }
            ThetaKind::Second => (xt.sub(&x0).add(&phi0.mul(&pt)), pt.sub(&phi0)),
        };
        let mut t = DerivationSum::new(&proto);
        t.push(Gen::L(-1), a)?;
        t.push(Gen::G(0), b)?;
        Ok(t)
    }
}

/// Compute the Θ-series of the special sewing: the composed local coordinate
/// s_{(x,φ)} ∘ H⁽¹⁾ ∘ s⁻¹_{(x̃,φ̃)}(α₀⁻¹w, α₀^{−1/2}ρ) for the first kind, or
/// s_{(x,φ)} ∘ I⁻¹ ∘ H⁽²⁾ ∘ s⁻¹_{(x̃,φ̃)}(w,ρ) for the second.
pub fn theta<V: GrassRing>(
    input: &SewingInput<V>,
    kind: ThetaKind,
    base_x: &V,
    base_phi: &V,
) -> Result<ThetaData<V>> {
    input.validate()?;
    if !base_x.is_invertible() {
        return Err(Error::NotInvertible);
    }
    let caps = input.caps;
    let wide = caps.theory_band();
    let proto = input.proto();
    let x0 = Bigraded::classical(caps.bicaps(), base_x.clone());
    let phi0 = Bigraded::classical(caps.bicaps(), base_phi.clone());
    let jmax = (caps.da + caps.db) as i64 * caps.j_cap + 2;

    let (series, base_image) = match kind {
        ThetaKind::Second => {
            // K = I⁻¹∘H⁽²⁾ = exp(Σ(B_j L_{−j} + N G_{−j+1/2}))·(x,φ)
            let t_b = input.inf_side()?.derivation(&proto)?;
            let k = exp_apply(&t_b, &SuperSeries::identity(&proto), wide)?.promote_exact();
            // (x̃,φ̃) = (H²)⁻¹∘I(x,φ) = exp(−T_B)·(x,φ) at the base point
            let v = exp_apply(&t_b.neg(), &SuperSeries::identity(&proto), wide)?.promote_exact();
            let (xt, pt) = v.eval_pair(&x0, &phi0)?;
            let mid = k.compose(&SuperSeries::shift_inverse(&xt, &pt), ExpandAt::Zero, wide)?;
            let s = SuperSeries::shift(&x0, &phi0).compose(
                &mid.promote_exact(),
                ExpandAt::Zero,
                wide,
            )?;
            (s.promote_exact(), (xt, pt))
        }
        ThetaKind::First => {
            let zero_side = input.zero_side()?;
            let h1 = zero_side.forward(wide)?.promote_exact();
            let h1_inv = zero_side.inverse()?.forward(wide)?.promote_exact();
            let (xt, pt) = h1_inv.eval_pair(&x0, &phi0)?;
            // inner: (w,ρ) ↦ s⁻¹_{(x̃,φ̃)}(α₀⁻¹w, α₀^{−1/2}ρ)
            let a_inv = input.lifted_asqrt().try_invert()?;
            let scaled = SuperSeries::identity(&proto).scale_substitution(&a_inv)?;
            let inner =
                SuperSeries::shift_inverse(&xt, &pt).compose(&scaled, ExpandAt::Zero, wide)?;
            let mid = h1.compose(&inner.promote_exact(), ExpandAt::Zero, wide)?;
            let s = SuperSeries::shift(&x0, &phi0).compose(
                &mid.promote_exact(),
                ExpandAt::Zero,
                wide,
            )?;
            (s.promote_exact(), (xt, pt))
        }
    };

    let data = deriv::e_inverse(&series, jmax, wide)?;
    let mut theta = BTreeMap::new();
    for (j, c) in &data.a {
        if !c.is_zero() {
            theta.insert(2 * j, c.clone());
        }
    }
    for (j, c) in &data.m {
        if !c.is_zero() {
            theta.insert(2 * j - 1, c.clone());
        }
    }
    Ok(ThetaData {
        theta,
        exp_theta0: data.asqrt,
        base_image,
    })
}

/// The explicit left-hand derivation of the Θ-identity of the given kind,
/// truncated to generator indices m ≤ m_cap.
pub fn theta_lhs_derivation<V: GrassRing>(
    input: &SewingInput<V>,
    kind: ThetaKind,
    base_x: &V,
    base_phi: &V,
    m_cap: i64,
) -> Result<DerivationSum<Bigraded<V>>> {
    let caps = input.caps;
    let proto = input.proto();
    let x0 = Bigraded::classical(caps.bicaps(), base_x.clone());
    let phi0 = Bigraded::classical(caps.bicaps(), base_phi.clone());
    let x0_inv = x0.try_invert()?;
    let mut t = DerivationSum::new(&proto);
    match kind {
        ThetaKind::Second => {
            // exp(Σ_{m≥−1}Σ_j binom(−j+1,m+1) x^{−j−m} ((B_j + 2φN_{j−1/2})L_m
            //   + (N_{j−1/2} + φ x⁻¹ ((−j−m)/2) B_j) G_{m+1/2}))
            for m in -1..=m_cap {
                for j in 1..=caps.j_cap {
                    let bc = binom_int(-j + 1, m + 1);
                    if bc.is_zero() {
                        continue;
                    }
                    let xpow = x0.pow_i64(-j - m)?;
                    let b = input
                        .b
                        .get(&j)
                        .map(|c| Bigraded::from_cell(caps.bicaps(), 0, 1, c.clone()))
                        .unwrap_or_else(|| proto.zero_like());
                    let n = input
                        .n
                        .get(&j)
                        .map(|c| Bigraded::from_cell(caps.bicaps(), 0, 1, c.clone()))
                        .unwrap_or_else(|| proto.zero_like());
                    let l_coeff = b
                        .add(&phi0.mul(&n).scale(&GaussRat::from_int(2)))
                        .mul(&xpow)
                        .scale(&bc);
                    if !l_coeff.is_zero() {
                        t.push(Gen::L(m), l_coeff)?;
                    }
                    let g_coeff = n
                        .add(
                            &phi0
                                .mul(&x0_inv)
                                .mul(&b)
                                .scale(&GaussRat::from_frac(-j - m, 2)),
                        )
                        .mul(&xpow)
                        .scale(&bc);
                    if !g_coeff.is_zero() {
                        // G_{m+1/2} = G_{(m+1)−1/2}
                        t.push(Gen::G(m + 1), g_coeff)?;
                    }
                }
            }
        }
        ThetaKind::First => {
            // −Σ_{m≥−1}Σ_j binom(j+1,m+1) α₀^{−j} x^{j−m}
            //   ((A_j + 2((j−m)/(j+1)) α₀^{1/2} x⁻¹ φ M_{j−1/2}) L_m
            //    + x⁻¹(((j−m)/(j+1)) α₀^{1/2} M_{j−1/2} + φ((j−m)/2) A_j) G_{m+1/2})
            let a_lift = input.lifted_asqrt();
            let alpha0_inv = a_lift.mul(&a_lift).try_invert()?;
            for m in -1..=m_cap {
                for j in 1..=caps.j_cap {
                    let bc = binom_int(j + 1, m + 1);
                    if bc.is_zero() {
                        continue;
                    }
                    let xpow = x0.pow_i64(j - m)?;
                    let apow = alpha0_inv.pow_i64(j)?;
                    let a = input
                        .a
                        .get(&j)
                        .map(|c| Bigraded::from_cell(caps.bicaps(), 1, 0, c.clone()))
                        .unwrap_or_else(|| proto.zero_like());
                    let mm = input
                        .m
                        .get(&j)
                        .map(|c| Bigraded::from_cell(caps.bicaps(), 1, 0, c.clone()))
                        .unwrap_or_else(|| proto.zero_like());
                    let frac = GaussRat::from_frac(j - m, j + 1);
                    let l_coeff = a
                        .add(
                            &a_lift
                                .mul(&x0_inv)
                                .mul(&phi0)
                                .mul(&mm)
                                .scale(&(&GaussRat::from_int(2) * &frac)),
                        )
                        .mul(&xpow)
                        .mul(&apow)
                        .scale(&bc)
                        .neg();
                    if !l_coeff.is_zero() {
                        t.push(Gen::L(m), l_coeff)?;
                    }
                    let g_coeff = a_lift
                        .mul(&mm)
                        .scale(&frac)
                        .add(&phi0.mul(&a).scale(&GaussRat::from_frac(j - m, 2)))
                        .mul(&x0_inv)
                        .mul(&xpow)
                        .mul(&apow)
                        .scale(&bc)
                        .neg();
                    if !g_coeff.is_zero() {
                        t.push(Gen::G(m + 1), g_coeff)?;
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Integer binomial binom(n, k) for n ∈ ℤ, k ≥ 0, as an exact rational.
pub fn binom_int(n: i64, k: i64) -> GaussRat {
    if k < 0 {
        return GaussRat::zero();
    }
    let mut num = GaussRat::one();
    for i in 0..k {
        num = &num * &GaussRat::from_int(n - i);
    }
    for i in 1..=k {
        num = &num * &GaussRat::from_frac(1, i);
    }
    num
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{GrassCtx, Supernumber};

    fn ctx() -> GrassCtx {
        GrassCtx::new(4)
    }

    fn base_input(j_cap: i64, d: u32, window: Window) -> SewingInput<Supernumber> {
        SewingInput {
            asqrt: Supernumber::one(ctx()),
            a: BTreeMap::new(),
            m: BTreeMap::new(),
            b: BTreeMap::new(),
            n: BTreeMap::new(),
            caps: SewCaps::new(j_cap, d, d, window),
        }
    }

    #[test]
    fn trivial_transition_is_identity() {
        let input = base_input(2, 2, Window::new(-6, 6));
        let w = transition(&input).unwrap();
        let id = SuperSeries::identity(&input.proto());
        assert!(w.sub(&id).clamp(input.caps.window).is_zero());
    }

    #[test]
    fn transition_routes_agree() {
        let mut input = base_input(2, 2, Window::new(-8, 8));
        input.asqrt = Supernumber::from_int(ctx(), 2);
        input.a.insert(1, Supernumber::from_frac(ctx(), 1, 2));
        input.m.insert(1, Supernumber::gen(ctx(), 1));
        input.b.insert(2, Supernumber::from_int(ctx(), 3));
        input.n.insert(2, Supernumber::gen(ctx(), 2));
        let w1 = transition(&input).unwrap();
        let w2 = transition_by_composition(&input).unwrap();
        let win = input.caps.window;
        assert!(
            w1.clamp(win).sub(&w2.clamp(win)).is_zero(),
            "operator and compositional transition must agree"
        );
    }

    #[test]
    fn boundary_solution_shapes() {
        // (B,N) = 0: F̄¹ = (x,φ), F̄² = (H¹)⁻¹
        let mut input = base_input(2, 2, Window::new(-8, 8));
        input.asqrt = Supernumber::from_int(ctx(), 3);
        input.a.insert(1, Supernumber::from_frac(ctx(), 1, 5));
        let sol = solve(&input).unwrap();
        let id = SuperSeries::identity(&input.proto());
        assert!(sol.f1.sub(&id).clamp(input.caps.window).is_zero());
        let h1_inv = input
            .zero_side()
            .unwrap()
            .inverse()
            .unwrap()
            .forward(input.caps.theory_band())
            .unwrap();
        assert!(sol.f2.sub(&h1_inv).clamp(input.caps.window).is_zero());
        // Ψ_j = −A_j exactly, Ψ₀ = 0, Ψ_{−j} = 0
        let psi2 = sol.psi_at(2).collapse();
        assert_eq!(psi2, input.a[&1].neg());
        assert!(sol.psi_at(0).is_zero());
        assert!(sol.psi_at(-2).is_zero());

        // (A,M) = 0: F̄² = (α₀⁻¹x, α₀^{−1/2}φ), Ψ_{−j} = −α₀^{−j}B_j
        let mut input = base_input(2, 2, Window::new(-8, 8));
        input.asqrt = Supernumber::from_int(ctx(), 2);
        input.b.insert(1, Supernumber::from_int(ctx(), 7));
        let sol = solve(&input).unwrap();
        let a_inv = input.lifted_asqrt().try_invert().unwrap();
        let scaled = SuperSeries::identity(&input.proto())
            .scale_substitution(&a_inv)
            .unwrap();
        assert!(sol.f2.sub(&scaled).clamp(input.caps.window).is_zero());
        // α₀ = asqrt² = 4: Ψ_{−1} = −α₀⁻¹B₁ = −7/4
        assert_eq!(
            sol.psi_at(-2).collapse(),
            Supernumber::from_frac(ctx(), -7, 4)
        );
    }

    #[test]
    fn residual_vanishes_generic() {
        let mut input = base_input(2, 2, Window::new(-9, 9));
        input.a.insert(1, Supernumber::from_frac(ctx(), 1, 2));
        input.b.insert(1, Supernumber::from_int(ctx(), 2));
        input.m.insert(1, Supernumber::gen(ctx(), 1));
        input.n.insert(1, Supernumber::gen(ctx(), 2));
        let sol = solve(&input).unwrap();
        let res = sol.residual().unwrap();
        assert!(res.is_zero(), "sewing-equation residual must vanish: {res}");
        assert_eq!(sol.f1.g_coeff(0).cell(0, 0), Supernumber::one(ctx()));
        assert!(sol.f1.superconformal_witness().is_none());
        assert!(sol.f2.superconformal_witness().is_none());
    }

    #[test]
    fn bidegree_one_one_closed_forms() {
        let mut input = base_input(3, 2, Window::new(-10, 10));
        input.asqrt = Supernumber::from_int(ctx(), 2); // α₀ = 4
        input.a.insert(1, Supernumber::from_frac(ctx(), 1, 3));
        input.a.insert(2, Supernumber::from_int(ctx(), 5));
        input.b.insert(1, Supernumber::from_int(ctx(), 2));
        input.b.insert(3, Supernumber::from_frac(ctx(), -1, 2));
        input.m.insert(1, Supernumber::gen(ctx(), 1));
        input.m.insert(2, Supernumber::gen(ctx(), 2));
        input.n.insert(1, Supernumber::gen(ctx(), 3));
        input.n.insert(2, Supernumber::gen(ctx(), 4));
        let sol = solve(&input).unwrap();
        let proto = Supernumber::zero(ctx());

        let poly = |terms: Vec<(i64, Supernumber)>| {
            SuperSeries::from_parts(terms, Vec::new(), Cert::ALL, &proto)
        };
        let g_a = poly(input.a.iter().map(|(j, c)| (j + 1, c.clone())).collect());
        let g_m = poly(input.m.iter().map(|(j, c)| (*j, c.clone())).collect());
        let g_b = poly(input.b.iter().map(|(j, c)| (-j + 1, c.clone())).collect());
        let g_n = poly(input.n.iter().map(|(j, c)| (-j + 1, c.clone())).collect());
        let alpha0 = Supernumber::from_int(ctx(), 4);
        let aihalf = Supernumber::from_frac(ctx(), 1, 2); // α₀^{−1/2}
        let ai = alpha0.invert().unwrap();
        let subst_alpha = |s: &SuperSeries<Supernumber>, inv: bool| {
            let base = if inv { ai.clone() } else { alpha0.clone() };
            let c0 = s
                .iter0()
                .map(|(n, c)| (n, base.clone().pow_i64(n).unwrap().checked_mul(c).unwrap()))
                .collect::<Vec<_>>();
            SuperSeries::from_parts(c0, Vec::new(), Cert::ALL, &proto)
        };

        // h-cell (1,1), even part:
        // α₀⁻¹(g_A ∂x g_B(α₀x) − g_B(α₀x) ∂x g_A)⁻ + 2α₀^{−1/2}(g_M g_N(α₀x))⁻
        let expected_h_even = {
            let gb_s = subst_alpha(&g_b, false);
            let t1 = g_a
                .mul(&gb_s.partial_x())
                .sub(&gb_s.mul(&g_a.partial_x()))
                .scale_coeff_left(&ai);
            let t2 = g_m
                .mul(&subst_alpha(&g_n, false))
                .scale_coeff_left(&aihalf)
                .scale_rat(&GaussRat::from_int(2));
            t1.add(&t2).split_pm().0
        };
        // h-cell (1,1), odd part:
        // α₀^{−1/2}(g_A ∂x g_N(α₀x) − ½g_N(α₀x) ∂x g_A)⁻
        //   + α₀⁻¹(½g_M ∂x g_B(α₀x) − g_B(α₀x) ∂x g_M)⁻
        let expected_h_odd = {
            let gn_s = subst_alpha(&g_n, false);
            let gb_s = subst_alpha(&g_b, false);
            let t1 = g_a
                .mul(&gn_s.partial_x())
                .sub(
                    &gn_s
                        .mul(&g_a.partial_x())
                        .scale_rat(&GaussRat::from_frac(1, 2)),
                )
                .scale_coeff_left(&aihalf);
            let t2 = g_m
                .mul(&gb_s.partial_x())
                .scale_rat(&GaussRat::from_frac(1, 2))
                .sub(&gb_s.mul(&g_m.partial_x()))
                .scale_coeff_left(&ai);
            t1.add(&t2).split_pm().0
        };
        let h11 = sol.h_table.get(&(1, 1)).cloned().unwrap();
        assert!(
            h11.component_f()
                .sub(&expected_h_even)
                .clamp(Window::new(-10, 0))
                .is_zero(),
            "even (1,1) h-cell"
        );
        assert!(
            h11.component_psi()
                .sub(&expected_h_odd)
                .clamp(Window::new(-10, 0))
                .is_zero(),
            "odd (1,1) h-cell"
        );

        // k-cell (1,1), even part.  The recursion forces
        // k(x) = −(tilde)⁺|_{x↦α₀⁻¹x}:
        // (g_B ∂x g_A(α₀⁻¹x) − g_A(α₀⁻¹x) ∂x g_B)⁺ − 2α₀^{−1/2}(g_M(α₀⁻¹x)g_N(x))⁺
        let expected_k_even = {
            let ga_s = subst_alpha(&g_a, true);
            let gm_s = subst_alpha(&g_m, true);
            let t1 = g_b.mul(&ga_s.partial_x()).sub(&ga_s.mul(&g_b.partial_x()));
            let t2 = gm_s
                .mul(&g_n)
                .scale_coeff_left(&aihalf)
                .scale_rat(&GaussRat::from_int(-2));
            t1.split_pm().1.add(&t2.split_pm().1)
        };
        let k11 = sol.k_table.get(&(1, 1)).cloned().unwrap();
        assert!(
            k11.component_f()
                .sub(&expected_k_even)
                .clamp(Window::new(1, 10))
                .is_zero(),
            "even (1,1) k-cell:\n got {}\n want {}",
            k11.component_f(),
            expected_k_even
        );

        // k-cell (1,1), odd part:
        // α₀^{1/2}(½g_N ∂x[g_A(α₀⁻¹x)] − g_A(α₀⁻¹x) ∂x g_N)⁺
        //   + (g_B ∂x[g_M(α₀⁻¹x)] − ½g_M(α₀⁻¹x) ∂x g_B)⁺
        let expected_k_odd = {
            let ga_s = subst_alpha(&g_a, true);
            let gm_s = subst_alpha(&g_m, true);
            let asq = Supernumber::from_int(ctx(), 2);
            let t1 = g_n
                .mul(&ga_s.partial_x())
                .scale_rat(&GaussRat::from_frac(1, 2))
                .sub(&ga_s.mul(&g_n.partial_x()))
                .scale_coeff_left(&asq);
            let t2 = g_b.mul(&gm_s.partial_x()).sub(
                &gm_s
                    .mul(&g_b.partial_x())
                    .scale_rat(&GaussRat::from_frac(1, 2)),
            );
            t1.add(&t2).split_pm().1
        };
        assert!(
            k11.component_psi()
                .sub(&expected_k_odd)
                .clamp(Window::new(1, 10))
                .is_zero(),
            "odd (1,1) k-cell:\n got {}\n want {}",
            k11.component_psi(),
            expected_k_odd
        );
    }

    #[test]
    fn normal_order_identity() {
        let mut input = base_input(2, 2, Window::new(-8, 8));
        input.asqrt = Supernumber::from_int(ctx(), 2);
        input.a.insert(1, Supernumber::from_frac(ctx(), 1, 2));
        input.b.insert(2, Supernumber::from_int(ctx(), 1));
        input.m.insert(2, Supernumber::gen(ctx(), 1));
        input.n.insert(1, Supernumber::gen(ctx(), 2));
        let sol = solve(&input).unwrap();
        assert_eq!(sol.verify_normal_order(3).unwrap(), None);
    }

    #[test]
    fn psi_leading_structure() {
        let mut input = base_input(2, 2, Window::new(-8, 8));
        input.a.insert(1, Supernumber::from_frac(ctx(), 1, 3));
        input.b.insert(1, Supernumber::from_int(ctx(), 2));
        input.m.insert(2, Supernumber::gen(ctx(), 1));
        input.n.insert(2, Supernumber::gen(ctx(), 2));
        let sol = solve(&input).unwrap();
        for (k2, c) in &sol.psi {
            for ((p, q), cell) in c.cells() {
                if cell.is_zero() {
                    continue;
                }
                let leading = (*k2 > 0 && *p == 1 && *q == 0) || (*k2 < 0 && *p == 0 && *q == 1);
                if !leading {
                    assert!(
                        *p >= 1 && *q >= 1,
                        "Ψ at doubled index {k2} has cell ({p},{q}) outside the leading structure"
                    );
                }
            }
        }
        assert_eq!(sol.psi_at(2).cell(1, 0), input.a[&1].neg());
        assert_eq!(sol.psi_at(-2).cell(0, 1), input.b[&1].neg());
        // odd leading parts: Ψ_{j−1/2} = −M_{j−1/2}, Ψ_{−j+1/2} = −α₀^{−j+1/2}N
        assert_eq!(sol.psi_at(3).cell(1, 0), input.m[&2].neg());
        assert_eq!(sol.psi_at(-3).cell(0, 1), input.n[&2].neg());
    }

    #[test]
    fn theta_trivial_cases() {
        let input = base_input(2, 2, Window::new(-8, 8));
        let x0 = Supernumber::from_int(ctx(), 3);
        let phi0 = Supernumber::gen(ctx(), 1);
        let td = theta(&input, ThetaKind::Second, &x0, &phi0).unwrap();
        assert!(
            td.theta.is_empty(),
            "Θ⁽²⁾ must vanish, got {:?}",
            td.theta.keys()
        );
        assert!(td.exp_theta0.sub(&input.proto().one_like()).is_zero());

        let mut input = base_input(2, 2, Window::new(-8, 8));
        input.asqrt = Supernumber::from_int(ctx(), 2);
        let td = theta(&input, ThetaKind::First, &x0, &phi0).unwrap();
        assert!(
            td.theta.is_empty(),
            "Θ⁽¹⁾ must vanish, got {:?}",
            td.theta.keys()
        );
        assert!(td.exp_theta0.sub(&input.proto().one_like()).is_zero());
    }

    #[test]
    fn theta_identity_on_series() {
        for kind in [ThetaKind::First, ThetaKind::Second] {
            let mut input = base_input(2, 1, Window::new(-8, 8));
            match kind {
                ThetaKind::First => {
                    input.asqrt = Supernumber::from_int(ctx(), 1);
                    input.a.insert(1, Supernumber::from_frac(ctx(), 1, 2));
                    input.m.insert(1, Supernumber::gen(ctx(), 1));
                }
                ThetaKind::Second => {
                    input.b.insert(1, Supernumber::from_int(ctx(), 2));
                    input.n.insert(1, Supernumber::gen(ctx(), 1));
                }
            }
            let x0 = Supernumber::from_int(ctx(), 2);
            let phi0 = Supernumber::gen(ctx(), 2);
            let td = theta(&input, kind, &x0, &phi0).unwrap();
            let proto = input.proto();
            let wide = input.caps.theory_band();
            let win = Window::new(-4, 4);

            let m_cap = wide.hi + 2;
            let lhs_t = theta_lhs_derivation(&input, kind, &x0, &phi0, m_cap).unwrap();
            let lhs = exp_apply(&lhs_t, &SuperSeries::identity(&proto), wide)
                .unwrap()
                .clamp(win);

            let theta0 = td.exp_theta0.try_log().unwrap();
            let s1 = exp_l0_action(&theta0.neg(), &SuperSeries::identity(&proto)).unwrap();
            let s2 = exp_apply(&td.neg_derivation(&proto).unwrap(), &s1, wide).unwrap();
            let shift_t = td.shift_derivation(&input, kind, &x0, &phi0).unwrap();
            let rhs = exp_apply(&shift_t, &s2, wide).unwrap().clamp(win);
            assert!(
                lhs.sub(&rhs).is_zero(),
                "theta identity ({kind:?}):\n lhs {lhs}\n rhs {rhs}"
            );
        }
    }

    #[test]
    fn transition_symmetry_gives_inverse() {
        // swapped data (A,M)↔(B,−iN), (B,N)↔(A,−iM), conjugated by I,
        // composes with the original transition to the identity.  Soul-valued
        // data over Λ₄ makes every cell beyond the caps vanish identically,
        // so collapsing the two bookkeeping grades is exact.
        let z = |k: u32| Supernumber::gen(ctx(), k);
        // caps (3,3): the only nonzero triple product of this data is M·N·B,
        // whose bookkeeping labels can align entirely on one grade; every
        // 4-factor product vanishes in Λ₄, so (3,3) is exact
        let mut input = base_input(2, 3, Window::new(-8, 8));
        input.asqrt = Supernumber::from_int(ctx(), 2);
        input.a.insert(
            1,
            z(1).checked_mul(&z(2))
                .unwrap()
                .scale(&GaussRat::from_frac(1, 2)),
        );
        input.b.insert(1, z(3).checked_mul(&z(4)).unwrap());
        input.m.insert(1, z(1));
        input.n.insert(1, z(2));

        let neg_i = -&GaussRat::i();
        fn scale_map(m: &BTreeMap<i64, Supernumber>, r: &GaussRat) -> BTreeMap<i64, Supernumber> {
            m.iter().map(|(j, c)| (*j, c.scale(r))).collect()
        }
        let swapped = SewingInput {
            asqrt: input.asqrt.clone(),
            a: input.b.clone(),
            m: scale_map(&input.n, &neg_i),
            b: input.a.clone(),
            n: scale_map(&input.m, &neg_i),
            caps: input.caps,
        };

        let wide = input.caps.theory_band();
        let w = transition(&input).unwrap().promote_exact();
        let q = transition(&swapped).unwrap().promote_exact();
        // I⁻¹ ∘ Q ∘ I
        let proto = input.proto();
        let qi = q
            .compose(&SuperSeries::inversion(&proto), ExpandAt::Zero, wide)
            .expect("qi step");
        let conj = SuperSeries::inversion_inverse(&proto)
            .compose(&qi.promote_exact(), ExpandAt::Zero, wide)
            .expect("conj step")
            .promote_exact();
        let comp = w
            .compose(&conj, ExpandAt::Zero, wide)
            .expect("final step")
            .clamp(input.caps.window);
        let id = SuperSeries::identity(&proto).clamp(input.caps.window);
        let diff = comp.sub(&id);
        // collapse the bookkeeping grades before comparing
        let mut bad = Vec::new();
        for (n, c) in diff.iter0() {
            if !c.collapse().is_zero() {
                bad.push((0, n));
            }
        }
        for (n, c) in diff.iter1() {
            if !c.collapse().is_zero() {
                bad.push((1, n));
            }
        }
        assert!(
            bad.is_empty(),
            "transition ∘ conjugated-swapped-transition = id, residual at {bad:?}"
        );
    }
}
