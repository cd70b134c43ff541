//! Command-line front end: solve sewings, extract the canonical series,
//! compute the central-charge series, dump bracket tables, and run the
//! verification suites, all through JSON files.

use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use supersew::error::Error;
use supersew::grassmann::GrassCtx;
use supersew::json::{self, CapsJson};
use supersew::nsalg::{bracket_structure, NsTag};
use supersew::scalar::{parse_rational, GaussRat};
use supersew::sewing::{self, ThetaKind};
use supersew::verify;
use supersew::verma::{self, VermaContext};
use supersew::{moduli, Result};

#[derive(Parser)]
#[command(
    name = "supersew",
    about = "Exact N=1 superconformal sewing calculator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sew the 0-th tube of the second element into tube I of the first.
    Sew {
        /// JSON file holding {"first": SkElement, "second": SkElement}
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[arg(long, short = 'i', default_value_t = 1)]
        tube: usize,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Solve the sewing equation and write the canonical series.
    Psi {
        /// JSON file with the sewing data (see the schema in the README)
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// caps override, e.g. "J=2,DA=2,DB=2,LO=-8,HI=8,L=4"
        #[arg(long)]
        caps: Option<String>,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Compute the central-charge series of a sewing.
    Gamma {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// central charge as a rational, e.g. 1/2
        #[arg(long, default_value = "1/2")]
        c: String,
        /// lowest weight as a rational
        #[arg(long, default_value = "0")]
        h: String,
        /// doubled relative weight cutoff; defaults to 2·D_B·J
        #[arg(long)]
        cutoff2: Option<i64>,
        #[arg(long)]
        caps: Option<String>,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Compute the Θ-series of the special sewings at a base point.
    Theta {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// 1 or 2
        #[arg(long, default_value_t = 2)]
        kind: u8,
        /// base even value (rational body), e.g. "2"
        #[arg(long, default_value = "2")]
        base: String,
        /// index (1-based) of the Grassmann generator used as the odd part
        /// of the base point; 0 for none
        #[arg(long, default_value_t = 0)]
        base_odd_generator: u32,
        #[arg(long)]
        caps: Option<String>,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Dump the algebra bracket table, or tangent-space brackets.
    Brackets {
        /// "algebra" or "tangent"
        #[arg(long, default_value = "algebra")]
        which: String,
        /// index range
        #[arg(long, default_value_t = 2)]
        range: i64,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Run invariant suites; nonzero exit on any failed identity.
    Verify {
        /// suite name or "all"
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 20260810)]
        seed: u64,
    },
    /// Apply a permutation of the incoming tubes.
    Perm {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// comma-separated one-based images, e.g. "2,1,3"
        #[arg(long)]
        sigma: String,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

fn parse_caps(spec: &str) -> Result<CapsJson> {
    let mut j = 2i64;
    let mut da = 2u32;
    let mut db = 2u32;
    let mut lo = -8i64;
    let mut hi = 8i64;
    let mut l = 4u32;
    for part in spec.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::Malformed {
            path: "caps".into(),
            msg: format!("expected KEY=VALUE, got {part:?}"),
        })?;
        let v = v.trim();
        match k.trim().to_ascii_uppercase().as_str() {
            "J" => j = v.parse().map_err(|_| bad_caps(part))?,
            "DA" => da = v.parse().map_err(|_| bad_caps(part))?,
            "DB" => db = v.parse().map_err(|_| bad_caps(part))?,
            "D" => {
                da = v.parse().map_err(|_| bad_caps(part))?;
                db = da;
            }
            "LO" => lo = v.parse().map_err(|_| bad_caps(part))?,
            "HI" => hi = v.parse().map_err(|_| bad_caps(part))?,
            "L" => l = v.parse().map_err(|_| bad_caps(part))?,
            _ => return Err(bad_caps(part)),
        }
    }
    if j < 1 || lo > hi {
        return Err(Error::Malformed {
            path: "caps".into(),
            msg: "caps must be positive with a nonempty window".into(),
        });
    }
    Ok(CapsJson {
        j_cap: j,
        d_a: da,
        d_b: db,
        window: [lo, hi],
        grassmann_generators: l,
    })
}

fn bad_caps(part: &str) -> Error {
    Error::Malformed {
        path: "caps".into(),
        msg: format!("bad caps entry {part:?}"),
    }
}

fn default_caps() -> Result<CapsJson> {
    match std::env::var("SUPERSEW_CAPS") {
        Ok(s) => parse_caps(&s),
        Err(_) => parse_caps("J=2,DA=2,DB=2,LO=-8,HI=8,L=4"),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Malformed {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn write_output(path: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Malformed {
            path: p.display().to_string(),
            msg: e.to_string(),
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn sewing_input_with_caps(
    path: &PathBuf,
    caps: &Option<String>,
) -> Result<(
    sewing::SewingInput<supersew::grassmann::Supernumber>,
    GrassCtx,
)> {
    let mut parsed: json::SewingInputJson = read_json(path)?;
    if let Some(spec) = caps {
        parsed.caps = Some(parse_caps(spec)?);
    }
    json::sewing_input_from_json(&parsed, default_caps()?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sew {
            input,
            tube,
            output,
        } => {
            #[derive(serde::Deserialize)]
            struct Pair {
                first: json::SkElementJson,
                second: json::SkElementJson,
            }
            let pair: Pair = read_json(&input)?;
            let (q1, ctx) = json::sk_from_json(&pair.first)?;
            let (q2, _) = json::sk_from_json(&pair.second)?;
            let sewn = moduli::sew(&q1, tube, &q2)?;
            let out = serde_json::to_value(json::sk_to_json(&sewn, ctx)).unwrap();
            write_output(&output, &out)?;
            Ok(true)
        }
        Command::Psi {
            input,
            caps,
            output,
        } => {
            let (sw_input, _ctx) = sewing_input_with_caps(&input, &caps)?;
            let sol = sewing::solve(&sw_input)?;
            let psi: BTreeMap<String, json::BigradedJson> = sol
                .psi
                .iter()
                .map(|(k2, v)| (k2.to_string(), json::bigraded_to_json(v)))
                .collect();
            let residual = sol.residual()?;
            let determination: Vec<serde_json::Value> = sol
                .determination
                .iter()
                .map(|(p, q, full)| {
                    serde_json::json!({"bidegree": [p, q], "fully_determined": full})
                })
                .collect();
            let out = serde_json::json!({
                "psi_by_doubled_index": psi,
                "residual_is_zero": residual.is_zero(),
                "determination": determination,
            });
            write_output(&output, &out)?;
            Ok(true)
        }
        Command::Gamma {
            input,
            c,
            h,
            cutoff2,
            caps,
            output,
        } => {
            let (sw_input, _ctx) = sewing_input_with_caps(&input, &caps)?;
            let c = GaussRat::from_parts(parse_rational(&c)?, parse_rational("0")?);
            let h = GaussRat::from_parts(parse_rational(&h)?, parse_rational("0")?);
            let cutoff2 = cutoff2.unwrap_or(2 * sw_input.caps.db as i64 * sw_input.caps.j_cap);
            let vctx = VermaContext::new(c, h, cutoff2);
            let sol = sewing::solve(&sw_input)?;
            let g = verma::gamma_from_solution(&sol, &vctx)?;
            let out = serde_json::json!({
                "gamma_cells": json::bigraded_to_json(&g),
            });
            write_output(&output, &out)?;
            Ok(true)
        }
        Command::Theta {
            input,
            kind,
            base,
            base_odd_generator,
            caps,
            output,
        } => {
            let (sw_input, ctx) = sewing_input_with_caps(&input, &caps)?;
            let kind = match kind {
                1 => ThetaKind::First,
                2 => ThetaKind::Second,
                k => {
                    return Err(Error::Malformed {
                        path: "kind".into(),
                        msg: format!("theta kind must be 1 or 2, got {k}"),
                    })
                }
            };
            let base_x = supersew::grassmann::Supernumber::from_scalar(
                ctx,
                GaussRat::from_parts(parse_rational(&base)?, parse_rational("0")?),
            );
            let base_phi = if base_odd_generator == 0 {
                supersew::grassmann::Supernumber::zero(ctx)
            } else {
                supersew::grassmann::Supernumber::gen(ctx, base_odd_generator)
            };
            let td = sewing::theta(&sw_input, kind, &base_x, &base_phi)?;
            let theta: BTreeMap<String, json::BigradedJson> = td
                .theta
                .iter()
                .map(|(k2, v)| (k2.to_string(), json::bigraded_to_json(v)))
                .collect();
            let out = serde_json::json!({
                "theta_by_doubled_index": theta,
                "exp_theta0": json::bigraded_to_json(&td.exp_theta0),
            });
            write_output(&output, &out)?;
            Ok(true)
        }
        Command::Brackets {
            which,
            range,
            output,
        } => {
            match which.as_str() {
                "algebra" => {
                    let proto = supersew::grassmann::Supernumber::zero(GrassCtx::new(0));
                    let mut tags = vec![NsTag::D];
                    for n in -range..=range {
                        tags.push(NsTag::L(n));
                        tags.push(NsTag::G2(2 * n - 1));
                    }
                    let mut rows = Vec::new();
                    for &u in &tags {
                        for &v in &tags {
                            let b = bracket_structure(u, v, &proto);
                            if b.is_zero() {
                                continue;
                            }
                            let terms: Vec<String> =
                                b.terms().map(|(t, c)| format!("({}) {}", c, t)).collect();
                            rows.push(serde_json::json!({
                                "lhs": format!("[{u}, {v}]"),
                                "rhs": terms.join(" + "),
                            }));
                        }
                    }
                    write_output(&output, &serde_json::json!({ "brackets": rows }))?;
                }
                "tangent" => {
                    let gc = GrassCtx::new(4);
                    let caps = sewing::SewCaps::new(
                        2 * range.max(1),
                        1,
                        1,
                        supersew::series::Window::new(-6 * range.max(1), 6 * range.max(1)),
                    );
                    let mut tags: Vec<moduli::TangentTag> =
                        (-range..=range).map(moduli::TangentTag::L).collect();
                    tags.extend((-range..=range).map(|j| moduli::TangentTag::G2(2 * j - 1)));
                    let mut rows = Vec::new();
                    for &x in &tags {
                        for &y in &tags {
                            let b = moduli::tangent_bracket(x, y, caps, gc)?;
                            if b.is_empty() {
                                continue;
                            }
                            let terms: Vec<String> =
                                b.iter().map(|(t, c)| format!("({c}) {t:?}")).collect();
                            rows.push(serde_json::json!({
                                "lhs": format!("[{x:?}, {y:?}]"),
                                "rhs": terms.join(" + "),
                            }));
                        }
                    }
                    write_output(&output, &serde_json::json!({ "brackets": rows }))?;
                }
                other => {
                    return Err(Error::Malformed {
                        path: "which".into(),
                        msg: format!("expected \"algebra\" or \"tangent\", got {other:?}"),
                    })
                }
            }
            Ok(true)
        }
        Command::Verify { suite, seed } => {
            let suites: Vec<String> = if suite == "all" {
                verify::suite_names()
                    .iter()
                    .map(|s| s.to_string())
                    .collect()
            } else {
                vec![suite]
            };
            let mut ok = true;
            for s in suites {
                let checks = verify::run_suite(&s, seed)?;
                for c in checks {
                    match c.witness {
                        None => println!("PASS [{s}] {}", c.name),
                        Some(w) => {
                            ok = false;
                            println!("FAIL [{s}] {}: {w}", c.name);
                        }
                    }
                }
            }
            Ok(ok)
        }
        Command::Perm {
            input,
            sigma,
            output,
        } => {
            let parsed: json::SkElementJson = read_json(&input)?;
            let (q, ctx) = json::sk_from_json(&parsed)?;
            let sigma: Vec<usize> = sigma
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| Error::Malformed {
                        path: "sigma".into(),
                        msg: format!("bad entry {s:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let out = moduli::perm(&q, &sigma)?;
            write_output(
                &output,
                &serde_json::to_value(json::sk_to_json(&out, ctx)).unwrap(),
            )?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
