//! JSON schemas for the file-based interfaces.  Rationals travel as
//! decimal-free "p/q" strings, half-integer indices as doubled integer keys,
//! and the imaginary part as an explicit field, so round-trips are exact.

use crate::bigraded::{BiCaps, Bigraded};
use crate::deriv::{ExpCoords, InfCoords};
use crate::error::{Error, Result};
use crate::grassmann::{GrassCtx, Supernumber};
use crate::moduli::SkElement;
use crate::scalar::{parse_rational, rational_string, GaussRat};
use crate::series::{SuperSeries, Window};
use crate::sewing::{SewCaps, SewingInput};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TermJson {
    pub indices: Vec<u32>,
    pub re: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub im: String,
}

pub type SupernumberJson = Vec<TermJson>;

pub fn supernumber_to_json(v: &Supernumber) -> SupernumberJson {
    v.terms()
        .map(|(mask, c)| {
            let mut indices = Vec::new();
            let mut rest = mask;
            while rest != 0 {
                let i = rest.trailing_zeros();
                rest &= rest - 1;
                indices.push(i + 1);
            }
            TermJson {
                indices,
                re: rational_string(&c.re),
                im: if c.im == num::BigRational::from_integer(0.into()) {
                    String::new()
                } else {
                    rational_string(&c.im)
                },
            }
        })
        .collect()
}

pub fn supernumber_from_json(ctx: GrassCtx, j: &SupernumberJson) -> Result<Supernumber> {
    let mut terms = Vec::new();
    for t in j {
        let mut mask = 0u64;
        for &i in &t.indices {
            if i < 1 || i > ctx.generators() {
                return Err(Error::Malformed {
                    path: "supernumber.indices".into(),
                    msg: format!("generator {i} outside 1..={}", ctx.generators()),
                });
            }
            if mask & (1 << (i - 1)) != 0 {
                return Err(Error::Malformed {
                    path: "supernumber.indices".into(),
                    msg: "repeated generator".into(),
                });
            }
            mask |= 1 << (i - 1);
        }
        let re = parse_rational(&t.re)?;
        let im = if t.im.is_empty() {
            num::BigRational::from_integer(0.into())
        } else {
            parse_rational(&t.im)?
        };
        terms.push((mask, GaussRat::from_parts(re, im)));
    }
    Ok(Supernumber::from_terms(ctx, terms))
}

/// {j: supernumber} with plain integer keys.
pub type SeqJson = BTreeMap<String, SupernumberJson>;

pub fn seq_to_json(m: &BTreeMap<i64, Supernumber>) -> SeqJson {
    m.iter()
        .map(|(j, v)| (j.to_string(), supernumber_to_json(v)))
        .collect()
}

pub fn seq_from_json(ctx: GrassCtx, j: &SeqJson) -> Result<BTreeMap<i64, Supernumber>> {
    let mut out = BTreeMap::new();
    for (k, v) in j {
        let idx: i64 = k.parse().map_err(|_| Error::Malformed {
            path: "sequence key".into(),
            msg: format!("bad index {k:?}"),
        })?;
        out.insert(idx, supernumber_from_json(ctx, v)?);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ExpCoordsJson {
    pub asqrt: SupernumberJson,
    #[serde(default, rename = "A")]
    pub a: SeqJson,
    /// M keyed by doubled half-integer indices (2j−1 for M_{j−1/2}).
    #[serde(default, rename = "M")]
    pub m: SeqJson,
}

pub fn expcoords_to_json(c: &ExpCoords<Supernumber>) -> ExpCoordsJson {
    ExpCoordsJson {
        asqrt: supernumber_to_json(&c.asqrt),
        a: seq_to_json(&c.a),
        m: c.m
            .iter()
            .map(|(j, v)| ((2 * j - 1).to_string(), supernumber_to_json(v)))
            .collect(),
    }
}

pub fn expcoords_from_json(ctx: GrassCtx, j: &ExpCoordsJson) -> Result<ExpCoords<Supernumber>> {
    let m_doubled = seq_from_json(ctx, &j.m)?;
    let mut m = BTreeMap::new();
    for (k2, v) in m_doubled {
        if k2 % 2 == 0 {
            return Err(Error::Malformed {
                path: "M".into(),
                msg: "keys must be doubled half-integers (odd)".into(),
            });
        }
        m.insert((k2 + 1) / 2, v);
    }
    ExpCoords::new(
        supernumber_from_json(ctx, &j.asqrt)?,
        seq_from_json(ctx, &j.a)?,
        m,
    )
}

#[derive(Serialize, Deserialize, Clone, Debug, Default)]
pub struct InfCoordsJson {
    #[serde(default, rename = "A")]
    pub b: SeqJson,
    /// N keyed by doubled half-integer indices.
    #[serde(default, rename = "M")]
    pub n: SeqJson,
}

pub fn infcoords_to_json(c: &InfCoords<Supernumber>) -> InfCoordsJson {
    InfCoordsJson {
        b: seq_to_json(&c.b),
        n: c.n
            .iter()
            .map(|(j, v)| ((2 * j - 1).to_string(), supernumber_to_json(v)))
            .collect(),
    }
}

pub fn infcoords_from_json(ctx: GrassCtx, j: &InfCoordsJson) -> Result<InfCoords<Supernumber>> {
    let n_doubled = seq_from_json(ctx, &j.n)?;
    let mut n = BTreeMap::new();
    for (k2, v) in n_doubled {
        if k2 % 2 == 0 {
            return Err(Error::Malformed {
                path: "N".into(),
                msg: "keys must be doubled half-integers (odd)".into(),
            });
        }
        n.insert((k2 + 1) / 2, v);
    }
    InfCoords::validated(seq_from_json(ctx, &j.b)?, n)
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug)]
pub struct CapsJson {
    pub j_cap: i64,
    pub d_a: u32,
    pub d_b: u32,
    pub window: [i64; 2],
    pub grassmann_generators: u32,
}

impl CapsJson {
    pub fn to_caps(self) -> (SewCaps, GrassCtx) {
        (
            SewCaps::new(
                self.j_cap,
                self.d_a,
                self.d_b,
                Window::new(self.window[0], self.window[1]),
            ),
            GrassCtx::new(self.grassmann_generators),
        )
    }

    pub fn from_caps(caps: SewCaps, ctx: GrassCtx) -> Self {
        CapsJson {
            j_cap: caps.j_cap,
            d_a: caps.da,
            d_b: caps.db,
            window: [caps.window.lo, caps.window.hi],
            grassmann_generators: ctx.generators(),
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct SewingInputJson {
    #[serde(default)]
    pub caps: Option<CapsJson>,
    pub asqrt: SupernumberJson,
    #[serde(default, rename = "A")]
    pub a: SeqJson,
    #[serde(default, rename = "M")]
    pub m: SeqJson,
    #[serde(default, rename = "B")]
    pub b: SeqJson,
    #[serde(default, rename = "N")]
    pub n: SeqJson,
}

pub fn sewing_input_from_json(
    j: &SewingInputJson,
    default_caps: CapsJson,
) -> Result<(SewingInput<Supernumber>, GrassCtx)> {
    let (caps, ctx) = j.caps.unwrap_or(default_caps).to_caps();
    let half_seq = |s: &SeqJson, name: &str| -> Result<BTreeMap<i64, Supernumber>> {
        let doubled = seq_from_json(ctx, s)?;
        let mut out = BTreeMap::new();
        for (k2, v) in doubled {
            if k2 % 2 == 0 {
                return Err(Error::Malformed {
                    path: name.into(),
                    msg: "keys must be doubled half-integers (odd)".into(),
                });
            }
            out.insert((k2 + 1) / 2, v);
        }
        Ok(out)
    };
    let input = SewingInput {
        asqrt: supernumber_from_json(ctx, &j.asqrt)?,
        a: seq_from_json(ctx, &j.a)?,
        m: half_seq(&j.m, "M")?,
        b: seq_from_json(ctx, &j.b)?,
        n: half_seq(&j.n, "N")?,
        caps,
    };
    input.validate()?;
    Ok((input, ctx))
}

/// Bigraded supernumber: cells keyed by "p,q".
pub type BigradedJson = BTreeMap<String, SupernumberJson>;

pub fn bigraded_to_json(v: &Bigraded<Supernumber>) -> BigradedJson {
    v.cells()
        .map(|((p, q), c)| (format!("{p},{q}"), supernumber_to_json(c)))
        .collect()
}

pub fn bigraded_from_json(
    ctx: GrassCtx,
    caps: BiCaps,
    j: &BigradedJson,
) -> Result<Bigraded<Supernumber>> {
    let mut out = Bigraded::zero(caps, Supernumber::zero(ctx));
    for (k, v) in j {
        let (p, q) = k.split_once(',').ok_or_else(|| Error::Malformed {
            path: "bigraded key".into(),
            msg: format!("expected \"p,q\", got {k:?}"),
        })?;
        let p: u32 = p.trim().parse().map_err(|_| Error::Malformed {
            path: "bigraded key".into(),
            msg: format!("bad degree {k:?}"),
        })?;
        let q: u32 = q.trim().parse().map_err(|_| Error::Malformed {
            path: "bigraded key".into(),
            msg: format!("bad degree {k:?}"),
        })?;
        out.add_cell(p, q, supernumber_from_json(ctx, v)?);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct SeriesJson {
    pub window: [i64; 2],
    #[serde(default)]
    pub f: SeqJson,
    #[serde(default)]
    pub xi: SeqJson,
    #[serde(default)]
    pub psi: SeqJson,
    #[serde(default)]
    pub g: SeqJson,
}

pub fn series_to_json(s: &SuperSeries<Supernumber>, fallback: Window) -> SeriesJson {
    let w = s.certified_window(fallback);
    let collect = |pick: &dyn Fn(i64) -> Supernumber| -> SeqJson {
        (w.lo..=w.hi)
            .filter_map(|n| {
                let c = pick(n);
                if c.is_zero() {
                    None
                } else {
                    Some((n.to_string(), supernumber_to_json(&c)))
                }
            })
            .collect()
    };
    SeriesJson {
        window: [w.lo, w.hi],
        f: collect(&|n| s.f_coeff(n)),
        xi: collect(&|n| s.xi_coeff(n)),
        psi: collect(&|n| s.psi_coeff(n)),
        g: collect(&|n| s.g_coeff(n)),
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct PunctureJson {
    pub z: SupernumberJson,
    pub theta: SupernumberJson,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct SkElementJson {
    pub n: usize,
    pub caps: CapsJson,
    #[serde(default)]
    pub punctures: Vec<PunctureJson>,
    pub coord_inf: InfCoordsJson,
    #[serde(default)]
    pub coords: Vec<ExpCoordsJson>,
}

pub fn sk_to_json(q: &SkElement<Supernumber>, ctx: GrassCtx) -> SkElementJson {
    SkElementJson {
        n: q.tubes,
        caps: CapsJson::from_caps(q.caps, ctx),
        punctures: q
            .punctures
            .iter()
            .map(|(z, t)| PunctureJson {
                z: supernumber_to_json(z),
                theta: supernumber_to_json(t),
            })
            .collect(),
        coord_inf: infcoords_to_json(&q.coord_inf),
        coords: q.coords.iter().map(expcoords_to_json).collect(),
    }
}

pub fn sk_from_json(j: &SkElementJson) -> Result<(SkElement<Supernumber>, GrassCtx)> {
    let (caps, ctx) = j.caps.to_caps();
    let q = SkElement {
        tubes: j.n,
        punctures: j
            .punctures
            .iter()
            .map(|p| {
                Ok((
                    supernumber_from_json(ctx, &p.z)?,
                    supernumber_from_json(ctx, &p.theta)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        coord_inf: infcoords_from_json(ctx, &j.coord_inf)?,
        coords: j
            .coords
            .iter()
            .map(|c| expcoords_from_json(ctx, c))
            .collect::<Result<Vec<_>>>()?,
        caps,
    };
    q.validate()?;
    Ok((q, ctx))
}
