//! Structural properties of exponentials of superderivations: the
//! automorphism property at truncation, its multiplier generalization, the
//! switch property for polynomial outer series, and the additive law of
//! scaled coordinate sequences.

use std::collections::BTreeMap;
use supersew::coeff::GrassRing;
use supersew::deriv::{exp_apply, DerivationSum, ExpCoords, Gen};
use supersew::grassmann::{GrassCtx, Supernumber};
use supersew::sampling;
use supersew::scalar::GaussRat;
use supersew::series::{Cert, ExpandAt, SuperSeries, Window};

fn ctx() -> GrassCtx {
    GrassCtx::new(4)
}

fn proto() -> Supernumber {
    Supernumber::zero(ctx())
}

fn random_series(r: &mut rand_chacha::ChaCha8Rng, lo: i64, hi: i64) -> SuperSeries<Supernumber> {
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    for n in lo..=hi {
        if rand::Rng::gen_bool(r, 0.5) {
            c0.push((n, sampling::supernumber(ctx(), r)));
        }
        if rand::Rng::gen_bool(r, 0.3) {
            c1.push((n, sampling::supernumber(ctx(), r)));
        }
    }
    SuperSeries::from_parts(c0, c1, Cert::ALL, &proto())
}

fn random_raising_derivation(r: &mut rand_chacha::ChaCha8Rng) -> DerivationSum<Supernumber> {
    let mut t = DerivationSum::new(&proto());
    for j in 1..=2 {
        if rand::Rng::gen_bool(r, 0.7) {
            t.push(Gen::L(j), sampling::even_soul(ctx(), r).checked_add(
                &Supernumber::from_scalar(ctx(), sampling::small_rat(r)),
            ).unwrap())
            .unwrap();
        }
        if rand::Rng::gen_bool(r, 0.7) {
            t.push(Gen::G(j), sampling::odd_soul(ctx(), r)).unwrap();
        }
    }
    t
}

/// e^T(uv) = (e^T u)(e^T v) at truncation for degree-raising T.
#[test]
fn automorphism_property_at_truncation() {
    let mut r = sampling::rng(101);
    let win = Window::new(0, 6);
    for _ in 0..8 {
        let t = random_raising_derivation(&mut r);
        let u = random_series(&mut r, 0, 3);
        let v = random_series(&mut r, 0, 3);
        let lhs = exp_apply(&t, &u.mul(&v), win).unwrap();
        let rhs = exp_apply(&t, &u, win)
            .unwrap()
            .mul(&exp_apply(&t, &v, win).unwrap());
        assert!(
            lhs.sub(&rhs).clamp(win).is_zero(),
            "automorphism property fails"
        );
    }
}

/// e^{y(a+T)}(uv) = (e^{yT}u)(e^{y(a+T)}v) = (e^{y(a+T)}u)(e^{yT}v), where a
/// acts by left multiplication; realized with a nilpotent y so that both
/// exponentials terminate exactly.
#[test]
fn automorphism_property_with_multiplier() {
    let mut r = sampling::rng(202);
    let win = Window::new(0, 6);
    let y = Supernumber::gen(ctx(), 1)
        .checked_mul(&Supernumber::gen(ctx(), 2))
        .unwrap();
    for _ in 0..6 {
        let t = random_raising_derivation(&mut r);
        // a: an even multiplier element (series of even parity terms)
        let a = {
            let mut s = SuperSeries::zero(&proto());
            for n in 0..=2 {
                s = s.add(
                    &SuperSeries::constant(sampling::even_soul(ctx(), &mut r).checked_add(
                        &Supernumber::from_scalar(ctx(), sampling::small_rat(&mut r)),
                    )
                    .unwrap())
                    .mul_monomial(n, &Supernumber::one(ctx())),
                );
            }
            s
        };
        let u = random_series(&mut r, 0, 3);
        let v = random_series(&mut r, 0, 3);

        // exp(y(a+T))·w computed term by term: (a+T)(w) = a·w + T(w), all
        // scaled by the nilpotent y
        let apply_at = |w: &SuperSeries<Supernumber>| a.mul(w).add(&t.apply(w));
        let exp_y_at = |w: &SuperSeries<Supernumber>| {
            let mut acc = w.clone();
            let mut term = w.clone();
            for n in 1..=6i64 {
                term = apply_at(&term)
                    .scale_coeff_left(&y)
                    .scale_rat(&GaussRat::from_frac(1, n));
                if term.is_zero() {
                    break;
                }
                acc = acc.add(&term);
            }
            acc
        };
        let exp_y_t = |w: &SuperSeries<Supernumber>| {
            let mut acc = w.clone();
            let mut term = w.clone();
            for n in 1..=6i64 {
                term = t
                    .apply(&term)
                    .scale_coeff_left(&y)
                    .scale_rat(&GaussRat::from_frac(1, n));
                if term.is_zero() {
                    break;
                }
                acc = acc.add(&term);
            }
            acc
        };

        let lhs = exp_y_at(&u.mul(&v)).clamp(win);
        let rhs1 = exp_y_t(&u).mul(&exp_y_at(&v)).clamp(win);
        let rhs2 = exp_y_at(&u).mul(&exp_y_t(&v)).clamp(win);
        assert!(lhs.sub(&rhs1).is_zero(), "multiplier property, first form");
        assert!(lhs.sub(&rhs2).is_zero(), "multiplier property, second form");
    }
}

/// H̄(e^T·(x,φ)) = e^T·H̄(x,φ) for polynomial H̄.
#[test]
fn switch_property() {
    let mut r = sampling::rng(303);
    let win = Window::new(-6, 8);
    for _ in 0..8 {
        let t = random_raising_derivation(&mut r);
        let h = exp_apply(&t, &SuperSeries::identity(&proto()), Window::new(0, 9)).unwrap();
        let hbar = random_series(&mut r, -1, 3);
        let lhs = hbar
            .compose(&h, ExpandAt::Zero, win)
            .unwrap();
        let rhs = exp_apply(&t, &hbar, win).unwrap();
        assert!(
            lhs.sub(&rhs).clamp(Window::new(-4, 5)).is_zero(),
            "switch property fails:\n lhs {lhs}\n rhs {rhs}"
        );
    }
}

/// (s(A,M)) ∘ (t(A,M)) = (s+t)(A,M): scaling a coordinate sequence is an
/// additive-group homomorphism into sequence composition.
#[test]
fn scaled_sequence_composition_is_additive() {
    let mut r = sampling::rng(404);
    for _ in 0..5 {
        let base = {
            let mut a = BTreeMap::new();
            let mut m = BTreeMap::new();
            for j in 1..=2 {
                a.insert(j, sampling::even_soul(ctx(), &mut r));
                m.insert(j, sampling::odd_soul(ctx(), &mut r));
            }
            ExpCoords::new(Supernumber::one(ctx()), a, m).unwrap()
        };
        let s = Supernumber::from_scalar(ctx(), sampling::small_rat(&mut r));
        let t = Supernumber::from_scalar(ctx(), sampling::small_rat(&mut r));
        let lhs = base
            .scaled_tails(&s)
            .compose(&base.scaled_tails(&t), 4, Window::new(0, 9))
            .unwrap();
        let rhs = base.scaled_tails(&s.checked_add(&t).unwrap());
        assert_eq!(lhs, rhs, "additive law for scaled sequences");
    }
}
