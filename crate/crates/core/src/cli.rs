//! Command-line front end. [`run_command`] is the whole program minus process
//! I/O, so tests can drive it directly.
//!
//! Exit codes: 0 success, 1 the property fails, 2 a precondition or
//! hypothesis fails, 3 unusable input.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::anticonc::{
    atom_probability, concentration_window_prob, littlewood_offord_bound, max_atom_probability,
    scale_partition, support_size, validate_scales, within_littlewood_offord, ProbMode,
};
use crate::construct::lr_cover;
use crate::decompose::{
    decomposition1_violations, decomposition2_violations, evaluate_hypotheses, first_decomposition,
    second_decomposition,
};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::plank::{bang_inequality_holds, bang_scale, bang_signs, find_uncovered_small_norm};
use crate::refute::{attempt_refutation, attempt_refutation_with, Status};
use crate::scalar::{format_scalar, parse_scalar, to_f64, Scalar};
use crate::system::{parse_system, UnitRow};
use crate::verify::verify_essential;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DecomposeStage {
    First,
    Second,
}

#[derive(Parser, Debug)]
#[command(name = "cubecover", version, about = "Exact tools for hyperplane covers of the Boolean cube")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Input file; standard input when omitted.
    #[arg(long, global = true)]
    input: Option<String>,
    /// Seed for every randomized step; a random seed is drawn and logged when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest dimension handled by exhaustive enumeration.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide E1-E3 and the support bound for a system.
    Verify,
    /// Print the cover by x_1 + ... + x_n = n/2 and x_{2i-1} = x_{2i}.
    ConstructLr {
        #[arg(long)]
        n: usize,
    },
    /// Run the first or second decomposition and check its invariants.
    Decompose {
        #[arg(long)]
        s: usize,
        #[arg(long)]
        w: String,
        #[arg(long, value_enum, default_value = "second")]
        stage: DecomposeStage,
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Flip-ascent sign search on {"m": [[..]], "zeta": [..], "theta": [..]}.
    Bang,
    /// Randomized rounding for a small-column-norm system.
    FindUncovered,
    /// Atom probability of {"v": [..], "a": ".."}; the largest atom when "a" is absent.
    AtomProb {
        /// Sample this many vertices instead of enumerating.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Greedy scale partition of {"v": [..]}.
    Scales {
        /// Merge down to exactly this many scales.
        #[arg(long)]
        s: Option<usize>,
    },
    /// Concentration-window probability of {"v": [..]} after unit normalization.
    Window {
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Try to exhibit an uncovered vertex.
    Refute {
        #[arg(long)]
        c5: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        w: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Evaluate the decomposition and small-norm hypotheses for (n, k, S, W).
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        w: String,
        #[arg(long)]
        c4: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
    },
}

struct Output {
    code: i32,
    body: String,
}

impl Output {
    fn json(code: i32, value: &impl Serialize) -> Result<Self> {
        let body = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Malformed(format!("cannot serialize output: {e}")))?;
        Ok(Output { code, body })
    }
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv_writer();
    let bad = |e: csv::Error| Error::Malformed(e.to_string());
    w.write_record(header).map_err(bad)?;
    for row in rows {
        w.write_record(row).map_err(bad)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Malformed(e.to_string()))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

/// Parses and runs one command line. `argv` excludes the program name;
/// `stdin` is used whenever `--input` is absent.
pub fn run_command(argv: &[String], stdin: &str) -> CommandResult {
    let args = std::iter::once("cubecover".to_string()).chain(argv.iter().cloned());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    CommandResult {
                        exit_code: 0,
                        stdout: text,
                        stderr: String::new(),
                    }
                }
                _ => CommandResult {
                    exit_code: 3,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    let mut stderr = String::new();
    let seed = cli.global.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        stderr.push_str(&format!("seed: {s}\n"));
        s
    });
    let result = match cli.global.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, seed, stdin)),
            Err(e) => Err(Error::Precondition(format!("cannot start {t} threads: {e}"))),
        },
        None => dispatch(&cli, seed, stdin),
    };
    match result {
        Ok(out) => CommandResult {
            exit_code: out.code,
            stdout: out.body,
            stderr,
        },
        Err(e) => {
            stderr.push_str(&format!("error: {e}\n"));
            CommandResult {
                exit_code: e.exit_code(),
                stdout: String::new(),
                stderr,
            }
        }
    }
}

fn read_input(global: &Global, stdin: &str) -> Result<String> {
    match &global.input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::Malformed(format!("cannot read {path}: {e}"))),
        None => Ok(stdin.to_string()),
    }
}

fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(format!("invalid JSON: {e}")))
}

fn scalar_of(v: &Value, location: &str) -> Result<Scalar> {
    match v {
        Value::String(s) => parse_scalar(s, location),
        Value::Number(n) if n.is_i64() || n.is_u64() => parse_scalar(&n.to_string(), location),
        _ => Err(Error::Malformed(format!("{location}: expected a rational string"))),
    }
}

fn scalar_vec(doc: &Value, key: &str) -> Result<Vec<Scalar>> {
    let arr = doc
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Malformed(format!("missing array \"{key}\"")))?;
    arr.iter()
        .enumerate()
        .map(|(j, x)| scalar_of(x, &format!("{key} {j}")))
        .collect()
}

fn float_vec(v: &Value, location: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::Malformed(format!("{location}: expected an array")))?
        .iter()
        .map(|x| {
            x.as_f64()
                .ok_or_else(|| Error::Malformed(format!("{location}: expected numbers")))
        })
        .collect()
}

fn arg_scalar(text: &str, name: &str) -> Result<Scalar> {
    parse_scalar(text, &format!("--{name}"))
}

fn base_params(global: &Global, seed: u64) -> Params {
    let mut p = Params::default().with_seed(seed);
    if let Some(cap) = global.cap {
        p.enumeration_cap = cap;
    }
    p
}

fn dispatch(cli: &Cli, seed: u64, stdin: &str) -> Result<Output> {
    let g = &cli.global;
    let mut params = base_params(g, seed);
    match &cli.command {
        Command::Verify => {
            let system = parse_system(&read_input(g, stdin)?)?;
            let report = verify_essential(&system, &params)?;
            let code = if report.is_essential { 0 } else { 1 };
            match g.format {
                Format::Json => Output::json(code, &report),
                Format::Csv => {
                    let witness = report
                        .uncovered_witness
                        .as_ref()
                        .map(|v| v.to_string())
                        .unwrap_or_default();
                    let body = csv_table(
                        &["n", "k", "e1", "e2", "e3", "support_bound_ok", "is_essential", "uncovered_witness"],
                        &[vec![
                            report.n.to_string(),
                            report.k.to_string(),
                            report.e1.to_string(),
                            report.e2.to_string(),
                            report.e3.to_string(),
                            report.support_bound_ok.to_string(),
                            report.is_essential.to_string(),
                            witness,
                        ]],
                    )?;
                    Ok(Output { code, body })
                }
            }
        }
        Command::ConstructLr { n } => Ok(Output {
            code: 0,
            body: lr_cover(*n)?.to_json_pretty(),
        }),
        Command::Decompose { s, w, stage, gamma } => {
            let system = parse_system(&read_input(g, stdin)?)?;
            let w = arg_scalar(w, "w")?;
            if let Some(gm) = gamma {
                params.gamma = arg_scalar(gm, "gamma")?;
            }
            let (value, violations) = match stage {
                DecomposeStage::First => {
                    let d = first_decomposition(system.rows(), *s, &w, &params)?;
                    let v = decomposition1_violations(system.rows(), &d, &params)?;
                    (json!({ "stage": "first", "decomposition": d }), v)
                }
                DecomposeStage::Second => {
                    let d = second_decomposition(&system, *s, &w, &params)?;
                    let v = decomposition2_violations(&system, &d, &params)?;
                    (json!({ "stage": "second", "decomposition": d }), v)
                }
            };
            let mut value = value;
            value["valid"] = json!(violations.is_empty());
            value["violations"] = json!(violations);
            Output::json(if violations.is_empty() { 0 } else { 1 }, &value)
        }
        Command::Bang => {
            let doc = parse_json(&read_input(g, stdin)?)?;
            let m: Vec<Vec<f64>> = doc
                .get("m")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Malformed("missing matrix \"m\"".into()))?
                .iter()
                .enumerate()
                .map(|(i, r)| float_vec(r, &format!("m row {i}")))
                .collect::<Result<_>>()?;
            let k = m.len();
            let zeta = match doc.get("zeta") {
                Some(z) => float_vec(z, "zeta")?,
                None => vec![0.0; k],
            };
            let theta = match doc.get("theta") {
                Some(t) => float_vec(t, "theta")?,
                None => vec![1.0; k],
            };
            let r = bang_signs(&m, &zeta, &theta, seed, &params)?;
            let tol = params.float_tol * bang_scale(&m, &zeta, &theta);
            let holds = bang_inequality_holds(&m, &zeta, &theta, &r.signs.signs, tol);
            Output::json(
                if holds { 0 } else { 1 },
                &json!({ "signs": r.signs.signs, "flips": r.flips, "objective": r.objective, "inequality_holds": holds }),
            )
        }
        Command::FindUncovered => {
            let system = parse_system(&read_input(g, stdin)?)?;
            let rows: Vec<UnitRow> = system
                .rows()
                .iter()
                .map(|r| UnitRow::normalize(r.clone()))
                .collect::<Result<_>>()?;
            let out = find_uncovered_small_norm(&rows, system.mu(), &params)?;
            let verified = crate::cube::is_uncovered(&system, &out.vertex)?;
            Output::json(
                if verified { 0 } else { 1 },
                &json!({ "vertex": out.vertex, "attempts": out.attempts, "theta": out.theta,
                         "signs": out.signs.signs, "verified": verified }),
            )
        }
        Command::AtomProb { trials } => {
            let doc = parse_json(&read_input(g, stdin)?)?;
            let v = scalar_vec(&doc, "v")?;
            let mode = match trials {
                Some(t) => ProbMode::Sampled { trials: *t, seed },
                None => ProbMode::Exact,
            };
            let (a, prob, exact) = match doc.get("a") {
                Some(a) => {
                    let a = scalar_of(a, "a")?;
                    let p = atom_probability(&v, &a, mode, &params)?;
                    (a, p.value, p.exact)
                }
                None => {
                    let (p, a) = max_atom_probability(&v, &params)?;
                    (a, p, true)
                }
            };
            let supp = support_size(&v);
            let lo = if supp > 0 { Some(littlewood_offord_bound(&v)?) } else { None };
            let within = supp > 0 && within_littlewood_offord(&prob, supp);
            match g.format {
                Format::Json => Output::json(
                    0,
                    &json!({ "a": format_scalar(&a), "probability": format_scalar(&prob),
                             "probability_f64": to_f64(&prob), "exact": exact, "support": supp,
                             "littlewood_offord_bound": lo, "within_bound": within }),
                ),
                Format::Csv => Ok(Output {
                    code: 0,
                    body: csv_table(
                        &["a", "probability", "exact", "support", "within_bound"],
                        &[vec![
                            format_scalar(&a),
                            format_scalar(&prob),
                            exact.to_string(),
                            supp.to_string(),
                            within.to_string(),
                        ]],
                    )?,
                }),
            }
        }
        Command::Scales { s } => {
            let doc = parse_json(&read_input(g, stdin)?)?;
            let v = scalar_vec(&doc, "v")?;
            let sp = scale_partition(&v, &params.c1(), *s)?;
            let valid = validate_scales(&v, &sp)?;
            match g.format {
                Format::Json => Output::json(0, &json!({ "partition": sp, "s": sp.s(), "valid": valid })),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = sp
                        .parts
                        .iter()
                        .zip(&sp.squared_norms)
                        .enumerate()
                        .map(|(t, (part, norm))| {
                            let cols: Vec<String> = part.iter().map(usize::to_string).collect();
                            vec![t.to_string(), cols.join(" "), format_scalar(norm)]
                        })
                        .collect();
                    Ok(Output {
                        code: 0,
                        body: csv_table(&["scale", "columns", "squared_norm"], &rows)?,
                    })
                }
            }
        }
        Command::Window { trials } => {
            let doc = parse_json(&read_input(g, stdin)?)?;
            let v = UnitRow::normalize(scalar_vec(&doc, "v")?)?;
            let c0 = match doc.get("c0") {
                Some(c) => scalar_of(c, "c0")?,
                None => params.c0.clone(),
            };
            let mode = match trials {
                Some(t) => ProbMode::Sampled { trials: *t, seed },
                None => ProbMode::Exact,
            };
            let w = concentration_window_prob(&v, &c0, mode, &params)?;
            Output::json(if w.ok { 0 } else { 1 }, &w)
        }
        Command::Refute { c5, c, s, w, gamma } => {
            let system = parse_system(&read_input(g, stdin)?)?;
            if let Some(c5) = c5 {
                params.c5 = *c5;
            }
            if let Some(c) = c {
                params.w_multiplier = *c;
            }
            if let Some(gm) = gamma {
                params.gamma = arg_scalar(gm, "gamma")?;
            }
            let outcome = match (s, w) {
                (None, None) => attempt_refutation(&system, &params),
                _ => {
                    let (s0, w0) = crate::refute::pipeline_parameters(system.n(), system.k(), &params)?;
                    let s = s.unwrap_or(s0);
                    let w = match w {
                        Some(w) => arg_scalar(w, "w")?,
                        None => w0,
                    };
                    attempt_refutation_with(&system, s, &w, &params)
                }
            };
            Output::json(if outcome.status == Status::Uncovered { 0 } else { 1 }, &outcome)
        }
        Command::Bounds { n, k, s, w, c4, gamma } => {
            let w = arg_scalar(w, "w")?;
            if let Some(c4) = c4 {
                params.c4 = arg_scalar(c4, "c4")?;
            }
            if let Some(gm) = gamma {
                params.gamma = arg_scalar(gm, "gamma")?;
            }
            bounds(*n, *k, *s, &w, &params, g.format)
        }
    }
}

/// The inequalities behind the decomposition and the small-norm finder,
/// as `(name, lhs, rhs, holds)` with `holds` decided exactly where possible.
fn bounds(n: usize, k: usize, s: usize, w: &Scalar, params: &Params, format: Format) -> Result<Output> {
    if n == 0 || k == 0 || s == 0 || !num_traits::Signed::is_positive(w) {
        return Err(Error::Precondition("n, k, S and W must be positive".into()));
    }
    let h = evaluate_hypotheses(n, k, 0, s, w, params)?;
    let (nf, kf, sf, wf) = (n as f64, k as f64, s as f64, to_f64(w));
    let a = h.a;
    let gamma = to_f64(&params.gamma);
    let c4 = to_f64(&params.c4);
    // Columns of the K3 block have support <= 16k^2/n and squared norm <= 1/W.
    let small_norm = 2.0 * (16.0 * kf * kf / nf) * (1.0 / wf) * (4.0 * kf).ln();
    let rows: Vec<(&str, f64, f64, bool)> = vec![
        ("C3*k*S*W <= n/8", a, nf / 8.0, h.h1),
        ("k <= C4*(S*W)^(-2/5)*n^(3/5)", kf, c4 * (sf * wf).powf(-0.4) * nf.powf(0.6), h.h2),
        ("n/(8A)*A^gamma >= k", nf / (8.0 * a) * a.powf(gamma), kf, h.gamma_first),
        ("32*k*A^(2 gamma) <= n", 32.0 * kf * a.powf(2.0 * gamma), nf, h.gamma_second),
        ("2*alpha*beta*ln(4k) <= 1 with alpha = 16k^2/n, beta = 1/W", small_norm, 1.0, small_norm <= 1.0),
    ];
    match format {
        Format::Json => {
            let list: Vec<Value> = rows
                .iter()
                .map(|(name, l, r, ok)| json!({ "inequality": name, "lhs": l, "rhs": r, "holds": ok }))
                .collect();
            Output::json(0, &json!({ "n": n, "k": k, "s": s, "w": format_scalar(w), "bounds": list }))
        }
        Format::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(name, l, r, ok)| vec![name.to_string(), l.to_string(), r.to_string(), ok.to_string()])
                .collect();
            Ok(Output {
                code: 0,
                body: csv_table(&["inequality", "lhs", "rhs", "holds"], &table)?,
            })
        }
    }
}
