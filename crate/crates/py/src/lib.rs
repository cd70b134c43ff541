//! Python bindings: supernumber arithmetic, exponential coordinates, the
//! sewing solver, the central-charge series, and the tangent bracket.
//!
//! Values cross the boundary as the same JSON structures the command-line
//! tool uses, so Python callers keep exact rationals as "p/q" strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::collections::BTreeMap;
use supersew::deriv;
use supersew::grassmann::{GrassCtx, Supernumber};
use supersew::json;
use supersew::moduli::{self, TangentTag};
use supersew::scalar::{parse_rational, GaussRat};
use supersew::series::Window;
use supersew::sewing::{self, SewCaps};
use supersew::verma::{self, VermaContext};

fn err(e: supersew::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn jerr(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_supernumber(ctx: GrassCtx, s: &str) -> PyResult<Supernumber> {
    let parsed: json::SupernumberJson = serde_json::from_str(s).map_err(jerr)?;
    json::supernumber_from_json(ctx, &parsed).map_err(err)
}

fn dump<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(jerr)
}

/// Exact arithmetic on supernumbers encoded as JSON term lists.
#[pyfunction]
fn grassmann_arith(generators: u32, op: &str, a: &str, b: &str) -> PyResult<String> {
    let ctx = GrassCtx::new(generators);
    let x = parse_supernumber(ctx, a)?;
    let y = parse_supernumber(ctx, b)?;
    let out = match op {
        "add" => x.checked_add(&y).map_err(err)?,
        "sub" => x.checked_sub(&y).map_err(err)?,
        "mul" => x.checked_mul(&y).map_err(err)?,
        other => return Err(PyValueError::new_err(format!("unknown op {other:?}"))),
    };
    dump(&json::supernumber_to_json(&out))
}

#[pyfunction]
fn grassmann_invert(generators: u32, a: &str) -> PyResult<String> {
    let ctx = GrassCtx::new(generators);
    let x = parse_supernumber(ctx, a)?;
    dump(&json::supernumber_to_json(&x.invert().map_err(err)?))
}

#[pyfunction]
fn grassmann_parity(generators: u32, a: &str) -> PyResult<String> {
    let ctx = GrassCtx::new(generators);
    let x = parse_supernumber(ctx, a)?;
    Ok(format!("{:?}", x.parity()).to_lowercase())
}

/// Round-trip of the exponential-coordinate bijection; returns the recovered
/// data so callers can assert exact equality.
#[pyfunction]
fn coordinate_roundtrip(generators: u32, coords_json: &str, j_cap: i64) -> PyResult<String> {
    let ctx = GrassCtx::new(generators);
    let parsed: json::ExpCoordsJson = serde_json::from_str(coords_json).map_err(jerr)?;
    let data = json::expcoords_from_json(ctx, &parsed).map_err(err)?;
    let h = data.forward(Window::new(0, 2 * j_cap + 3)).map_err(err)?;
    if let Some((n, what)) = h.superconformal_witness() {
        return Err(PyValueError::new_err(format!(
            "forward image not superconformal at exponent {n}: {what}"
        )));
    }
    let back = deriv::e_inverse(&h, j_cap, Window::new(0, 2 * j_cap + 3)).map_err(err)?;
    dump(&json::expcoords_to_json(&back))
}

/// Solve the sewing equation; returns the canonical series keyed by doubled
/// index together with the residual check.
#[pyfunction]
fn solve_sewing(input_json: &str) -> PyResult<String> {
    let parsed: json::SewingInputJson = serde_json::from_str(input_json).map_err(jerr)?;
    let default = json::CapsJson {
        j_cap: 2,
        d_a: 2,
        d_b: 2,
        window: [-8, 8],
        grassmann_generators: 4,
    };
    let (input, _ctx) = json::sewing_input_from_json(&parsed, default).map_err(err)?;
    let sol = sewing::solve(&input).map_err(err)?;
    let psi: BTreeMap<String, json::BigradedJson> = sol
        .psi
        .iter()
        .map(|(k2, v)| (k2.to_string(), json::bigraded_to_json(v)))
        .collect();
    let residual_zero = sol.residual().map_err(err)?.is_zero();
    dump(&serde_json::json!({
        "psi_by_doubled_index": psi,
        "residual_is_zero": residual_zero,
    }))
}

/// Central-charge series cells of the sewing, at the given (c, h) and
/// doubled weight cutoff.
#[pyfunction]
#[pyo3(signature = (input_json, c="1/2", h="0", cutoff2=None))]
fn gamma_series(input_json: &str, c: &str, h: &str, cutoff2: Option<i64>) -> PyResult<String> {
    let parsed: json::SewingInputJson = serde_json::from_str(input_json).map_err(jerr)?;
    let default = json::CapsJson {
        j_cap: 2,
        d_a: 2,
        d_b: 2,
        window: [-8, 8],
        grassmann_generators: 4,
    };
    let (input, _ctx) = json::sewing_input_from_json(&parsed, default).map_err(err)?;
    let c = GaussRat::from_parts(
        parse_rational(c).map_err(err)?,
        parse_rational("0").map_err(err)?,
    );
    let h = GaussRat::from_parts(
        parse_rational(h).map_err(err)?,
        parse_rational("0").map_err(err)?,
    );
    let cutoff2 = cutoff2.unwrap_or(2 * input.caps.db as i64 * input.caps.j_cap);
    let vctx = VermaContext::new(c, h, cutoff2);
    let g = verma::gamma(&input, &vctx).map_err(err)?;
    dump(&json::bigraded_to_json(&g))
}

/// Sew two moduli elements (JSON) at the given tube of the first.
#[pyfunction]
fn sew_elements(first_json: &str, tube: usize, second_json: &str) -> PyResult<String> {
    let f: json::SkElementJson = serde_json::from_str(first_json).map_err(jerr)?;
    let s: json::SkElementJson = serde_json::from_str(second_json).map_err(jerr)?;
    let (q1, ctx) = json::sk_from_json(&f).map_err(err)?;
    let (q2, _) = json::sk_from_json(&s).map_err(err)?;
    let out = moduli::sew(&q1, tube, &q2).map_err(err)?;
    dump(&json::sk_to_json(&out, ctx))
}

/// Tangent-space bracket of two basis tags given by doubled indices:
/// even tags (L) as [0, 2j], odd tags (G) as [1, 2j−1].
#[pyfunction]
fn tangent_bracket(
    kind_a: u8,
    idx2_a: i64,
    kind_b: u8,
    idx2_b: i64,
    j_range: i64,
) -> PyResult<String> {
    let tag = |kind: u8, idx2: i64| -> PyResult<TangentTag> {
        match kind {
            0 => {
                if idx2 % 2 != 0 {
                    return Err(PyValueError::new_err("even tags need even doubled index"));
                }
                Ok(TangentTag::L(idx2 / 2))
            }
            1 => {
                if idx2 % 2 == 0 {
                    return Err(PyValueError::new_err("odd tags need odd doubled index"));
                }
                Ok(TangentTag::G2(idx2))
            }
            _ => Err(PyValueError::new_err("kind must be 0 (L) or 1 (G)")),
        }
    };
    let x = tag(kind_a, idx2_a)?;
    let y = tag(kind_b, idx2_b)?;
    let caps = SewCaps::new(
        (2 * j_range).max(2),
        1,
        1,
        Window::new(-6 * j_range.max(1), 6 * j_range.max(1)),
    );
    let out = moduli::tangent_bracket(x, y, caps, GrassCtx::new(4)).map_err(err)?;
    let rows: Vec<serde_json::Value> = out
        .iter()
        .map(|(t, v)| {
            let (kind, idx2) = match t {
                TangentTag::L(j) => (0, 2 * j),
                TangentTag::G2(h2) => (1, *h2),
            };
            serde_json::json!({
                "kind": kind,
                "doubled_index": idx2,
                "coefficient": json::supernumber_to_json(v),
            })
        })
        .collect();
    dump(&rows)
}

#[pymodule]
fn supersew_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(grassmann_arith, m)?)?;
    m.add_function(wrap_pyfunction!(grassmann_invert, m)?)?;
    m.add_function(wrap_pyfunction!(grassmann_parity, m)?)?;
    m.add_function(wrap_pyfunction!(coordinate_roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sewing, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_series, m)?)?;
    m.add_function(wrap_pyfunction!(sew_elements, m)?)?;
    m.add_function(wrap_pyfunction!(tangent_bracket, m)?)?;
    Ok(())
}
