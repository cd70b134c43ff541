//! Seeded random generation of supernumbers and coordinate data for the
//! verification suites.

use crate::deriv::{ExpCoords, InfCoords};
use crate::grassmann::{GrassCtx, Supernumber};
use crate::scalar::GaussRat;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_rat(r: &mut ChaCha8Rng) -> GaussRat {
    let num = r.gen_range(-4i64..=4);
    let den = r.gen_range(1i64..=4);
    GaussRat::from_frac(num, den)
}

/// Random even soul element: a small combination of generator pairs.
pub fn even_soul(ctx: GrassCtx, r: &mut ChaCha8Rng) -> Supernumber {
    let l = ctx.generators();
    let mut out = Supernumber::zero(ctx);
    for _ in 0..r.gen_range(1..=2) {
        let i = r.gen_range(1..=l);
        let mut j = r.gen_range(1..=l);
        if i == j {
            j = if j == l { 1 } else { j + 1 };
        }
        let pair = Supernumber::gen(ctx, i)
            .checked_mul(&Supernumber::gen(ctx, j))
            .unwrap()
            .scale(&small_rat(r));
        out = out.checked_add(&pair).unwrap();
    }
    out
}

/// Random odd soul element.
pub fn odd_soul(ctx: GrassCtx, r: &mut ChaCha8Rng) -> Supernumber {
    let l = ctx.generators();
    let i = r.gen_range(1..=l);
    Supernumber::gen(ctx, i).scale(&small_rat(r))
}

/// Random invertible even element with rational body.
pub fn invertible_even(ctx: GrassCtx, r: &mut ChaCha8Rng) -> Supernumber {
    let body = loop {
        let q = small_rat(r);
        if !q.is_zero() {
            break q;
        }
    };
    Supernumber::from_scalar(ctx, body)
        .checked_add(&even_soul(ctx, r))
        .unwrap()
}

/// Random coordinate data (asqrt, A, M) with soul tails up to j_cap.
pub fn exp_coords(ctx: GrassCtx, j_cap: i64, r: &mut ChaCha8Rng) -> ExpCoords<Supernumber> {
    let mut a = BTreeMap::new();
    let mut m = BTreeMap::new();
    for j in 1..=j_cap {
        if r.gen_bool(0.7) {
            a.insert(j, even_soul(ctx, r));
        }
        if r.gen_bool(0.7) {
            m.insert(j, odd_soul(ctx, r));
        }
    }
    ExpCoords::new(invertible_even(ctx, r), a, m).expect("sampled data is valid")
}

/// Random infinity data with soul tails up to j_cap.
pub fn inf_coords(ctx: GrassCtx, j_cap: i64, r: &mut ChaCha8Rng) -> InfCoords<Supernumber> {
    let mut b = BTreeMap::new();
    let mut n = BTreeMap::new();
    for j in 1..=j_cap {
        if r.gen_bool(0.6) {
            b.insert(j, even_soul(ctx, r));
        }
        if r.gen_bool(0.6) {
            n.insert(j, odd_soul(ctx, r));
        }
    }
    InfCoords::validated(b, n).expect("sampled data is valid")
}

/// Random sparse supernumber of mixed parity.
pub fn supernumber(ctx: GrassCtx, r: &mut ChaCha8Rng) -> Supernumber {
    let mut out = Supernumber::from_scalar(ctx, small_rat(r));
    out = out.checked_add(&even_soul(ctx, r)).unwrap();
    if r.gen_bool(0.5) {
        out = out.checked_add(&odd_soul(ctx, r)).unwrap();
    }
    out
}

/// Random homogeneous supernumber of the requested parity.
pub fn homogeneous(ctx: GrassCtx, odd: bool, r: &mut ChaCha8Rng) -> Supernumber {
    if odd {
        let mut v = odd_soul(ctx, r);
        if r.gen_bool(0.4) {
            v = v.checked_add(&odd_soul(ctx, r)).unwrap();
        }
        v
    } else {
        let mut v = Supernumber::from_scalar(ctx, small_rat(r));
        if r.gen_bool(0.6) {
            v = v.checked_add(&even_soul(ctx, r)).unwrap();
        }
        v
    }
}
