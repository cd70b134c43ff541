//! Deterministic invariant suites, shared by the command-line `verify`
//! subcommand and the acceptance tests.

use crate::coeff::GrassRing;
use crate::deriv::{self, exp_apply, ExpCoords, InfCoords};
use crate::error::Result;
use crate::grassmann::{GrassCtx, Supernumber};
use crate::moduli::{self, FlowKind, SkElement, TangentTag};
use crate::nsalg;
use crate::sampling;
use crate::scalar::GaussRat;
use crate::series::{ExpandAt, SuperSeries, Window};
use crate::sewing::{self, SewCaps, SewingInput, ThetaKind};
use crate::verma::{self, VermaContext};
use std::collections::BTreeMap;

pub struct Check {
    pub name: String,
    pub witness: Option<String>,
}

impl Check {
    fn of(name: &str, witness: Option<String>) -> Self {
        Check {
            name: name.into(),
            witness,
        }
    }
}

pub fn suite_names() -> Vec<&'static str> {
    vec![
        "grassmann",
        "series",
        "ns-rep",
        "e-bijection",
        "sewing",
        "gamma",
        "theta",
        "moduli",
        "tangent",
    ]
}

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "grassmann" => grassmann_suite(seed),
        "series" => series_suite(seed),
        "ns-rep" => ns_rep_suite(),
        "e-bijection" => e_bijection_suite(seed, 12),
        "sewing" => sewing_suite(seed),
        "gamma" => gamma_suite(),
        "theta" => theta_suite(),
        "moduli" => moduli_suite(seed, 4),
        "tangent" => tangent_suite(2),
        other => Err(crate::error::Error::Validation(format!(
            "unknown suite {other:?}; available: {:?}",
            suite_names()
        ))),
    }
}

pub fn grassmann_suite(seed: u64) -> Result<Vec<Check>> {
    let ctx = GrassCtx::new(4);
    let mut r = sampling::rng(seed);
    let mut checks = Vec::new();
    // supercommutativity on homogeneous elements
    let mut witness = None;
    for _ in 0..40 {
        let pa = r_bool(&mut r);
        let pb = r_bool(&mut r);
        let a = sampling::homogeneous(ctx, pa, &mut r);
        let b = sampling::homogeneous(ctx, pb, &mut r);
        let ab = a.checked_mul(&b)?;
        let ba = b.checked_mul(&a)?;
        let expect = if pa && pb { ba.neg() } else { ba };
        if !ab.sub(&expect).is_zero() {
            witness = Some(format!("ab != ±ba for a={a}, b={b}"));
            break;
        }
    }
    checks.push(Check::of("supercommutativity", witness));
    // two-sided inverses and multiplicative bodies
    let mut witness = None;
    for _ in 0..25 {
        let a =
            sampling::invertible_even(ctx, &mut r).checked_add(&sampling::odd_soul(ctx, &mut r))?;
        let inv = a.invert()?;
        if !a.checked_mul(&inv)?.sub(&Supernumber::one(ctx)).is_zero()
            || !inv.checked_mul(&a)?.sub(&Supernumber::one(ctx)).is_zero()
        {
            witness = Some(format!("inverse fails for {a}"));
            break;
        }
        let b = sampling::supernumber(ctx, &mut r);
        let body_prod = &a.body() * &b.body();
        if a.checked_mul(&b)?.body() != body_prod {
            witness = Some(format!("bodies do not multiply for {a}, {b}"));
            break;
        }
    }
    checks.push(Check::of("two-sided inverse and body morphism", witness));
    // bigraded associativity up to caps
    let mut witness = None;
    {
        use crate::bigraded::{BiCaps, Bigraded};
        for _ in 0..15 {
            let caps = BiCaps::new(2, 2);
            let rand_big = |r: &mut rand_chacha::ChaCha8Rng| {
                let mut v = Bigraded::zero(caps, Supernumber::zero(ctx));
                for p in 0..=2u32 {
                    for q in 0..=2u32 {
                        if rand::Rng::gen_bool(r, 0.4) {
                            v.add_cell(p, q, sampling::supernumber(ctx, r));
                        }
                    }
                }
                v
            };
            let a = rand_big(&mut r);
            let b = rand_big(&mut r);
            let c = rand_big(&mut r);
            if a.mul(&b).mul(&c) != a.mul(&b.mul(&c)) {
                witness = Some("bigraded associativity fails".into());
                break;
            }
        }
    }
    checks.push(Check::of("bigraded associativity up to caps", witness));
    Ok(checks)
}

fn r_bool(r: &mut rand_chacha::ChaCha8Rng) -> bool {
    rand::Rng::gen_bool(r, 0.5)
}

pub fn series_suite(seed: u64) -> Result<Vec<Check>> {
    let ctx = GrassCtx::new(4);
    let mut r = sampling::rng(seed);
    let mut checks = Vec::new();
    let win = Window::new(0, 8);
    // composition of superconformal series is superconformal, and the odd
    // derivation transforms homogeneously
    let mut witness = None;
    for _ in 0..6 {
        let c1 = sampling::exp_coords(ctx, 2, &mut r);
        let c2 = sampling::exp_coords(ctx, 2, &mut r);
        let h1 = c1.forward(Window::new(0, 9))?;
        let h2 = c2.forward(Window::new(0, 9))?;
        let comp = h1.compose(&h2, ExpandAt::Zero, win)?;
        if let Some((n, what)) = comp.superconformal_witness() {
            witness = Some(format!(
                "composition loses superconformality at {n}: {what}"
            ));
            break;
        }
        let even = comp.even_element();
        let odd = comp.odd_element();
        if !even.d_op().sub(&odd.mul(&odd.d_op())).is_zero() {
            witness = Some("homogeneous transformation of D fails".into());
            break;
        }
    }
    checks.push(Check::of("superconformal composition", witness));
    // compositional inverse both ways
    let mut witness = None;
    for _ in 0..6 {
        let c = sampling::exp_coords(ctx, 2, &mut r);
        let h = c.forward(Window::new(0, 9))?;
        let inv = h.reverse(Window::new(0, 7))?;
        let idw = SuperSeries::identity(&Supernumber::zero(ctx)).clamp(Window::new(0, 6));
        let a = h.compose(&inv, ExpandAt::Zero, Window::new(0, 6))?;
        let b = inv.compose(&h, ExpandAt::Zero, Window::new(0, 6))?;
        if !a.sub(&idw).is_zero() || !b.sub(&idw).is_zero() {
            witness = Some("two-sided compositional inverse fails".into());
            break;
        }
    }
    checks.push(Check::of("two-sided compositional inverse", witness));
    // square root oracle
    let mut witness = None;
    for _ in 0..6 {
        let mut u = SuperSeries::zero(&Supernumber::zero(ctx));
        u = u.add(&SuperSeries::constant(Supernumber::one(ctx)));
        for k in 1..=4 {
            u = u.add(
                &SuperSeries::constant(
                    sampling::even_soul(ctx, &mut r)
                        .checked_add(&Supernumber::from_scalar(ctx, sampling::small_rat(&mut r)))?,
                )
                .mul_monomial(k, &Supernumber::one(ctx)),
            );
        }
        let u = u.clamp(Window::new(0, 8));
        let root = u.sqrt_one_plus(ExpandAt::Zero, Window::new(0, 8))?;
        if !root.mul(&root).sub(&u).clamp(Window::new(0, 8)).is_zero() {
            witness = Some("square of the square root differs".into());
            break;
        }
    }
    checks.push(Check::of("square-root oracle", witness));
    Ok(checks)
}

pub fn ns_rep_suite() -> Result<Vec<Check>> {
    let proto = Supernumber::zero(GrassCtx::new(2));
    let mut checks = Vec::new();
    checks.push(Check::of(
        "superderivation representation, |m|,|n| <= 4 on monomials |k| <= 6",
        nsalg::verify_superderivation_rep(&proto, 4, 6, Window::new(-12, 12)),
    ));
    checks.push(Check::of(
        "bracket skew-supersymmetry",
        nsalg::verify_skew(&proto, 3),
    ));
    checks.push(Check::of(
        "bracket Jacobi identity",
        nsalg::verify_jacobi(&proto, 2),
    ));
    Ok(checks)
}

pub fn e_bijection_suite(seed: u64, count: usize) -> Result<Vec<Check>> {
    let ctx = GrassCtx::new(4);
    let mut r = sampling::rng(seed);
    let mut sc_witness = None;
    let mut round_witness = None;
    let mut inv_witness = None;
    let window = Window::new(-2, 8);
    for k in 0..count {
        let data = sampling::exp_coords(ctx, 3, &mut r);
        let h = data.forward(Window::new(0, 9))?;
        if let Some((n, what)) = h.clamp(window).superconformal_witness() {
            sc_witness = Some(format!("sample {k}: fails at exponent {n} ({what})"));
            break;
        }
        let back = deriv::e_inverse(&h, 3, Window::new(0, 9))?;
        if back != data {
            round_witness = Some(format!("sample {k}: data round trip differs"));
            break;
        }
        let inv = data.inverse()?;
        let hi = inv.forward(Window::new(0, 9))?;
        let idw = SuperSeries::identity(&Supernumber::zero(ctx)).clamp(Window::new(0, 6));
        let a = h.compose(&hi, ExpandAt::Zero, Window::new(0, 6))?;
        let b = hi.compose(&h, ExpandAt::Zero, Window::new(0, 6))?;
        if !a.sub(&idw).is_zero() || !b.sub(&idw).is_zero() {
            inv_witness = Some(format!("sample {k}: H∘H⁻¹ differs from the identity"));
            break;
        }
        let round = data.compose(&inv, 3, Window::new(0, 9))?;
        if !round.is_identity() {
            inv_witness = Some(format!("sample {k}: data ∘ data⁻¹ is not the identity"));
            break;
        }
    }
    Ok(vec![
        Check::of("exponential coordinates are superconformal", sc_witness),
        Check::of("coordinate round trip", round_witness),
        Check::of("inverse laws", inv_witness),
    ])
}

pub fn random_sewing_input(seed: u64, caps: SewCaps) -> SewingInput<Supernumber> {
    let ctx = GrassCtx::new(4);
    let mut r = sampling::rng(seed);
    let zc = sampling::exp_coords(ctx, caps.j_cap, &mut r);
    let inf = sampling::inf_coords(ctx, caps.j_cap, &mut r);
    SewingInput {
        asqrt: zc.asqrt,
        a: zc.a,
        m: zc.m,
        b: inf.b,
        n: inf.n,
        caps,
    }
}

pub fn sewing_suite(seed: u64) -> Result<Vec<Check>> {
    let caps = SewCaps::new(3, 2, 2, Window::new(-6, 6));
    let input = random_sewing_input(seed, caps);
    let mut checks = Vec::new();
    let sol = sewing::solve(&input)?;
    let res = sol.residual()?;
    checks.push(Check::of(
        "sewing-equation residual",
        if res.is_zero() {
            None
        } else {
            Some(format!("nonzero residual {res}"))
        },
    ));
    let w1 = sewing::transition(&input)?;
    let w2 = sewing::transition_by_composition(&input)?;
    checks.push(Check::of(
        "transition operator vs composition",
        if w1.clamp(caps.window).sub(&w2.clamp(caps.window)).is_zero() {
            None
        } else {
            Some("transition computed two ways differs".into())
        },
    ));
    checks.push(Check::of(
        "normal-order identity on monomials |k| <= 3",
        sol.verify_normal_order(3)?,
    ));
    // Ψ leading structure
    let mut witness = None;
    'outer: for (k2, c) in sol.psi.iter() {
        for ((p, q), cell) in c.cells() {
            if cell.is_zero() {
                continue;
            }
            let leading = (*k2 > 0 && *p == 1 && *q == 0) || (*k2 < 0 && *p == 0 && *q == 1);
            if !leading && !(*p >= 1 && *q >= 1) {
                witness = Some(format!(
                    "correction of the canonical series at doubled index {k2} has cell ({p},{q})"
                ));
                break 'outer;
            }
        }
    }
    checks.push(Check::of(
        "canonical series corrections live at mixed bidegrees",
        witness,
    ));
    Ok(checks)
}

pub fn gamma_suite() -> Result<Vec<Check>> {
    let ctx = GrassCtx::new(4);
    let mut checks = Vec::new();
    let caps = SewCaps::new(3, 2, 2, Window::new(-8, 8));
    let mut input = SewingInput {
        asqrt: Supernumber::from_int(ctx, 2),
        a: BTreeMap::new(),
        m: BTreeMap::new(),
        b: BTreeMap::new(),
        n: BTreeMap::new(),
        caps,
    };
    for j in 1..=3 {
        input.a.insert(j, Supernumber::from_int(ctx, 1));
        input.b.insert(j, Supernumber::from_int(ctx, 1));
    }
    input.m.insert(2, Supernumber::gen(ctx, 1));
    input.n.insert(2, Supernumber::gen(ctx, 2));
    input.m.insert(3, Supernumber::gen(ctx, 3));
    input.n.insert(3, Supernumber::gen(ctx, 4));
    let sol = sewing::solve(&input)?;
    let vctx = VermaContext::new(GaussRat::from_frac(1, 2), GaussRat::from_int(0), 12);
    let g = verma::gamma_from_solution(&sol, &vctx)?;
    // leading cells: (j³−j)/12·α₀^{−j} A_jB_j + (j²−j)/3·α₀^{−j+1/2} N M
    let mut witness = None;
    let alpha_inv = GaussRat::from_frac(1, 4);
    let asqrt_inv = GaussRat::from_frac(1, 2);
    let mut expect = Supernumber::zero(ctx);
    for j in 1..=3i64 {
        let c = &GaussRat::from_frac(j * j * j - j, 12) * &alpha_inv.pow_i64(j).unwrap();
        expect = expect.checked_add(&Supernumber::from_scalar(ctx, c))?;
    }
    for j in 2..=3i64 {
        let (mg, ng) = if j == 2 { (1, 2) } else { (3, 4) };
        let c = &GaussRat::from_frac(j * j - j, 3) * &asqrt_inv.pow_i64(2 * j - 1).unwrap();
        let nm = Supernumber::gen(ctx, ng).checked_mul(&Supernumber::gen(ctx, mg))?;
        expect = expect.checked_add(&nm.scale(&c))?;
    }
    if g.cell(1, 1) != expect {
        witness = Some(format!(
            "leading cell {} differs from {}",
            g.cell(1, 1),
            expect
        ));
    }
    for ((p, q), cell) in g.cells() {
        if (*p == 0 || *q == 0) && !cell.is_zero() {
            witness = Some(format!("one-sided cell ({p},{q}) is nonzero"));
        }
    }
    checks.push(Check::of("central-charge series leading cells", witness));
    // canonical across (c, h)
    let vctx2 = VermaContext::new(GaussRat::from_int(3), GaussRat::from_int(0), 12);
    let vctx3 = VermaContext::new(GaussRat::from_frac(1, 2), GaussRat::from_int(1), 14);
    let same = verma::gamma_from_solution(&sol, &vctx2)? == g
        && verma::gamma_from_solution(&sol, &vctx3)? == g;
    checks.push(Check::of(
        "central-charge series canonical across (c, h)",
        if same {
            None
        } else {
            Some("values differ across contexts".into())
        },
    ));
    checks.push(Check::of(
        "identity residual on a weight basis",
        verma::gamma_residual_witness(&sol, &vctx, &g, 6)?,
    ));
    Ok(checks)
}

pub fn theta_suite() -> Result<Vec<Check>> {
    let ctx = GrassCtx::new(4);
    let mut checks = Vec::new();
    for kind in [ThetaKind::First, ThetaKind::Second] {
        let caps = SewCaps::new(2, 2, 2, Window::new(-10, 10));
        let mut input = SewingInput {
            asqrt: Supernumber::one(ctx),
            a: BTreeMap::new(),
            m: BTreeMap::new(),
            b: BTreeMap::new(),
            n: BTreeMap::new(),
            caps,
        };
        match kind {
            ThetaKind::First => {
                input.a.insert(1, Supernumber::from_frac(ctx, 1, 2));
                input.a.insert(2, Supernumber::from_int(ctx, 1));
                input.m.insert(1, Supernumber::gen(ctx, 1));
            }
            ThetaKind::Second => {
                input.b.insert(1, Supernumber::from_int(ctx, 2));
                input.b.insert(2, Supernumber::from_int(ctx, 1));
                input.n.insert(1, Supernumber::gen(ctx, 1));
            }
        }
        let x0 = Supernumber::from_int(ctx, 2);
        let phi0 = Supernumber::gen(ctx, 2);
        // series level
        let td = sewing::theta(&input, kind, &x0, &phi0)?;
        let proto = input.proto();
        let wide = input.caps.theory_band();
        let win = Window::new(-4, 4);
        let lhs_t = sewing::theta_lhs_derivation(&input, kind, &x0, &phi0, wide.hi + 2)?;
        let lhs = exp_apply(&lhs_t, &SuperSeries::identity(&proto), wide)?.clamp(win);
        let theta0 = td.exp_theta0.try_log()?;
        let s1 = sewing::exp_l0_action(&theta0.neg(), &SuperSeries::identity(&proto))?;
        let s2 = exp_apply(&td.neg_derivation(&proto)?, &s1, wide)?;
        let shift_t = td.shift_derivation(&input, kind, &x0, &phi0)?;
        let rhs = exp_apply(&shift_t, &s2, wide)?.clamp(win);
        let name = match kind {
            ThetaKind::First => "first special-sewing identity on (w,ρ)",
            ThetaKind::Second => "second special-sewing identity on (w,ρ)",
        };
        checks.push(Check::of(
            name,
            if lhs.sub(&rhs).is_zero() {
                None
            } else {
                Some("operator exponential differs from the composed form".into())
            },
        ));
        // module level
        let vctx = VermaContext::new(GaussRat::from_frac(1, 2), GaussRat::from_int(0), 8);
        let name = match kind {
            ThetaKind::First => "first special-sewing identity on the lowest-weight vector",
            ThetaKind::Second => "second special-sewing identity on the lowest-weight vector",
        };
        checks.push(Check::of(
            name,
            verma::verify_theta_identity(&input, kind, &x0, &phi0, &vctx)?,
        ));
    }
    Ok(checks)
}

pub fn moduli_suite(seed: u64, instances: usize) -> Result<Vec<Check>> {
    let ctx = GrassCtx::new(4);
    let caps = SewCaps::new(2, 2, 2, Window::new(-8, 8));
    let proto = Supernumber::zero(ctx);
    let mut r = sampling::rng(seed);
    let mut checks = Vec::new();

    let rand_sk1 = |r: &mut rand_chacha::ChaCha8Rng| -> SkElement<Supernumber> {
        SkElement {
            tubes: 1,
            punctures: Vec::new(),
            coord_inf: sampling::inf_coords(ctx, caps.j_cap, r),
            coords: vec![sampling::exp_coords(ctx, caps.j_cap, r)],
            caps,
        }
    };
    let rand_sk2 = |r: &mut rand_chacha::ChaCha8Rng| -> SkElement<Supernumber> {
        let z = loop {
            let v = sampling::invertible_even(ctx, r);
            if v.is_invertible() {
                break v;
            }
        };
        SkElement {
            tubes: 2,
            punctures: vec![(z, sampling::odd_soul(ctx, r))],
            coord_inf: sampling::inf_coords(ctx, caps.j_cap, r),
            coords: vec![
                sampling::exp_coords(ctx, caps.j_cap, r),
                sampling::exp_coords(ctx, caps.j_cap, r),
            ],
            caps,
        }
    };
    let eq = sk_equal;

    // identity laws
    let mut witness = None;
    let e = SkElement::unit(&proto, caps);
    for k in 0..instances {
        let q = rand_sk1(&mut r);
        if !eq(&moduli::sew(&q, 1, &e)?, &q) || !eq(&moduli::sew(&e, 1, &q)?, &q) {
            witness = Some(format!("identity law fails on sample {k}"));
            break;
        }
    }
    checks.push(Check::of("unit element laws", witness));

    // shift sewing
    let mut witness = None;
    for k in 0..instances {
        let z = Supernumber::from_int(ctx, 4 + k as i64);
        let th = sampling::odd_soul(ctx, &mut r);
        let z0 = Supernumber::from_int(ctx, 1 + k as i64);
        let th0 = sampling::odd_soul(ctx, &mut r);
        let q1 = SkElement {
            tubes: 2,
            punctures: vec![(z.clone(), th.clone())],
            coord_inf: InfCoords::zero(),
            coords: vec![ExpCoords::identity(&proto), ExpCoords::identity(&proto)],
            caps,
        };
        let mut inf = InfCoords::zero();
        inf.b.insert(1, z0.neg());
        inf.n.insert(1, th0.neg());
        let q2 = SkElement {
            tubes: 1,
            punctures: Vec::new(),
            coord_inf: inf,
            coords: vec![ExpCoords::identity(&proto)],
            caps,
        };
        let sewn = moduli::sew(&q1, 1, &q2)?;
        let ez = z0.checked_add(&z)?.checked_add(&th0.checked_mul(&th)?)?;
        let et = th.checked_add(&th0)?;
        let expect = SkElement {
            tubes: 2,
            punctures: vec![(ez, et)],
            coord_inf: InfCoords::zero(),
            coords: vec![ExpCoords::identity(&proto), ExpCoords::identity(&proto)],
            caps,
        };
        if !eq(&sewn, &expect) {
            witness = Some(format!("shift sewing fails on sample {k}"));
            break;
        }
    }
    checks.push(Check::of("shift sewing", witness));

    // flows
    let mut witness = None;
    for k in 0..instances {
        let seedc = sampling::exp_coords(ctx, caps.j_cap, &mut r);
        let s = Supernumber::from_scalar(ctx, sampling::small_rat(&mut r));
        let t = Supernumber::from_scalar(ctx, sampling::small_rat(&mut r));
        let st = s.checked_add(&t)?;
        for kind in [FlowKind::Tail, FlowKind::Infinity] {
            let fs = moduli::flow(kind, &s, 0, &seedc, caps)?;
            let ft = moduli::flow(kind, &t, 0, &seedc, caps)?;
            let fst = moduli::flow(kind, &st, 0, &seedc, caps)?;
            if !eq(&moduli::sew(&fs, 1, &ft)?, &fst) {
                witness = Some(format!("{kind:?} flow law fails on sample {k}"));
            }
        }
        let f2 = moduli::flow(FlowKind::Scale, &proto, 2, &seedc, caps)?;
        let f1 = moduli::flow(FlowKind::Scale, &proto, 1, &seedc, caps)?;
        let f3 = moduli::flow(FlowKind::Scale, &proto, 3, &seedc, caps)?;
        if !eq(&moduli::sew(&f2, 1, &f1)?, &f3) {
            witness = Some(format!("scale flow law fails on sample {k}"));
        }
        if witness.is_some() {
            break;
        }
    }
    checks.push(Check::of("one-parameter flow laws", witness));

    // associativity patterns
    let mut witness = None;
    for k in 0..instances {
        let q1 = rand_sk2(&mut r);
        let mut q2 = rand_sk1(&mut r);
        q2.coords[0].asqrt = Supernumber::one(ctx);
        let mut q3 = rand_sk1(&mut r);
        q3.coord_inf = InfCoords::zero();
        // (iii)
        let lhs = moduli::sew(&moduli::sew(&q1, 1, &q2)?, 1, &q3)?;
        let rhs = moduli::sew(&q1, 1, &moduli::sew(&q2, 1, &q3)?)?;
        if !eq(&lhs, &rhs) {
            witness = Some(format!("pattern (iii) fails on sample {k}"));
            break;
        }
        // (i)/(ii)
        let lhs = moduli::sew(&moduli::sew(&q1, 2, &q2)?, 1, &q3)?;
        let rhs = moduli::sew(&moduli::sew(&q1, 1, &q3)?, 2, &q2)?;
        if !eq(&lhs, &rhs) {
            witness = Some(format!("patterns (i)/(ii) fail on sample {k}"));
            break;
        }
    }
    checks.push(Check::of("sewing associativity patterns", witness));

    // symmetric group action
    let mut witness = None;
    for k in 0..instances {
        let z1 = Supernumber::from_int(ctx, 3).checked_add(&sampling::even_soul(ctx, &mut r))?;
        let z2 = Supernumber::from_int(ctx, 7).checked_add(&sampling::even_soul(ctx, &mut r))?;
        let q = SkElement {
            tubes: 3,
            punctures: vec![
                (z1, sampling::odd_soul(ctx, &mut r)),
                (z2, sampling::odd_soul(ctx, &mut r)),
            ],
            coord_inf: sampling::inf_coords(ctx, caps.j_cap, &mut r),
            coords: vec![
                sampling::exp_coords(ctx, caps.j_cap, &mut r),
                sampling::exp_coords(ctx, caps.j_cap, &mut r),
                sampling::exp_coords(ctx, caps.j_cap, &mut r),
            ],
            caps,
        };
        let sigmas: [[usize; 3]; 3] = [[2, 1, 3], [1, 3, 2], [3, 1, 2]];
        'inner: for s1 in sigmas {
            for s2 in sigmas {
                let lhs = moduli::perm(&moduli::perm(&q, &s1)?, &s2)?;
                let comp: Vec<usize> = (0..3).map(|i| s1[s2[i] - 1]).collect();
                let rhs = moduli::perm(&q, &comp)?;
                if !eq(&lhs, &rhs) {
                    witness = Some(format!("action law fails on sample {k} for {s1:?},{s2:?}"));
                    break 'inner;
                }
            }
        }
        if witness.is_some() {
            break;
        }
    }
    checks.push(Check::of("symmetric-group action laws", witness));
    Ok(checks)
}

pub fn sk_equal(a: &SkElement<Supernumber>, b: &SkElement<Supernumber>) -> bool {
    if a.tubes != b.tubes || a.punctures.len() != b.punctures.len() {
        return false;
    }
    for ((za, ta), (zb, tb)) in a.punctures.iter().zip(&b.punctures) {
        if !za.sub(zb).is_zero() || !ta.sub(tb).is_zero() {
            return false;
        }
    }
    let max_j = 8;
    let zero = a
        .coords
        .first()
        .map(|c| c.asqrt.zero_like())
        .unwrap_or_else(|| {
            b.coords
                .first()
                .map(|c| c.asqrt.zero_like())
                .unwrap_or_else(|| {
                    a.punctures
                        .first()
                        .map(|(z, _)| z.zero_like())
                        .expect("context")
                })
        });
    let geta =
        |m: &BTreeMap<i64, Supernumber>, j: i64| m.get(&j).cloned().unwrap_or_else(|| zero.clone());
    for (ca, cb) in a.coords.iter().zip(&b.coords) {
        if !ca.asqrt.sub(&cb.asqrt).is_zero() {
            return false;
        }
        for j in 1..=max_j {
            if !geta(&ca.a, j).sub(&geta(&cb.a, j)).is_zero()
                || !geta(&ca.m, j).sub(&geta(&cb.m, j)).is_zero()
            {
                return false;
            }
        }
    }
    for j in 1..=max_j {
        if !geta(&a.coord_inf.b, j)
            .sub(&geta(&b.coord_inf.b, j))
            .is_zero()
            || !geta(&a.coord_inf.n, j)
                .sub(&geta(&b.coord_inf.n, j))
                .is_zero()
        {
            return false;
        }
    }
    true
}

pub fn tangent_suite(range: i64) -> Result<Vec<Check>> {
    let gc = GrassCtx::new(4);
    let caps = SewCaps::new(2 * range, 1, 1, Window::new(-6 * range, 6 * range));
    let mut tags: Vec<TangentTag> = (-range..=range).map(TangentTag::L).collect();
    tags.extend((-range..=range).map(|j| TangentTag::G2(2 * j - 1)));
    let mut witness = None;
    'outer: for &x in &tags {
        for &y in &tags {
            let got = moduli::tangent_bracket(x, y, caps, gc)?;
            let mut expect: moduli::TangentComb = BTreeMap::new();
            match (x, y) {
                (TangentTag::L(j), TangentTag::L(k)) => {
                    if j != k {
                        expect.insert(TangentTag::L(j + k), Supernumber::from_int(gc, j - k));
                    }
                }
                (TangentTag::G2(a2), TangentTag::L(n)) => {
                    expect.insert(
                        TangentTag::G2(a2 + 2 * n),
                        Supernumber::from_frac(gc, a2 - n, 2),
                    );
                }
                (TangentTag::L(m), TangentTag::G2(b2)) => {
                    expect.insert(
                        TangentTag::G2(b2 + 2 * m),
                        Supernumber::from_frac(gc, m - b2, 2),
                    );
                }
                (TangentTag::G2(a2), TangentTag::G2(b2)) => {
                    expect.insert(TangentTag::L((a2 + b2) / 2), Supernumber::from_int(gc, 2));
                }
            }
            expect.retain(|_, v| !v.is_zero());
            if got != expect {
                witness = Some(format!("[{x:?},{y:?}] = {got:?}, expected {expect:?}"));
                break 'outer;
            }
        }
    }
    Ok(vec![Check::of(
        "tangent bracket reproduces the algebra with zero central term",
        witness,
    )])
}
