//! Command-line front end: field arithmetic, decompositions, Weyl words,
//! tree operations and the randomized verification suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 parse error,
//! 3 precision exhaustion, 4 singular input, 5 stratum/fiber errors.

use clap::{Parser, Subcommand, ValueEnum};
use std::process::ExitCode;
use tree2_core::decomp::{self, SubgroupId};
use tree2_core::error::Error;
use tree2_core::field::{FieldElement, Precision};
use tree2_core::label::ApartmentLabel;
use tree2_core::matrix::MatrixK;
use tree2_core::parse::parse_element;
use tree2_core::tree2d::{Coeff, Lattice2, Projected, TreeCtx, Vertex2};
use tree2_core::verify::{run_suites, VerifyConfig};
use tree2_core::weyl;

#[derive(Parser)]
#[command(name = "tree2", version, about = "Exact arithmetic and the stratified tree for PGL(2) over F_q((u))((t))")]
struct Cli {
    /// Size of the last residue field (a prime).
    #[arg(long, global = true, default_value_t = 2)]
    q: u32,
    /// Working t-window for truncated operations.
    #[arg(long, global = true, default_value_t = 32)]
    t_window: i64,
    /// Working u-window per level.
    #[arg(long, global = true, default_value_t = 32)]
    u_window: i64,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,
    /// Seed for randomized verification.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate, invert or reduce a field expression.
    Field {
        #[command(subcommand)]
        op: FieldOp,
    },
    /// Factor a matrix through one of the three decompositions.
    Decompose {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Multiply the factors back and check agreement below caps.
        #[arg(long)]
        verify: bool,
        /// Matrix as JSON rows of element expressions or payloads.
        matrix: String,
    },
    /// Weyl word calculus.
    Weyl {
        #[command(subcommand)]
        op: WeylOp,
    },
    /// Tree operations; vertices use the shorthand x:i,n y:n z:n x0 xinf
    /// for the standard apartment, or inline JSON payloads.
    Tree {
        #[command(subcommand)]
        op: TreeOp,
    },
    /// Run randomized property suites with the seeded generator.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

#[derive(Subcommand)]
enum FieldOp {
    /// Evaluate an expression to canonical form.
    Eval { expr: String },
    /// Invert at the working precision.
    Invert { expr: String },
    /// The rank-2 valuation.
    Valuation { expr: String },
    /// First residue (the t-level-0 slice) and last residue (constant term).
    Residue { expr: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Bruhat,
    Cartan,
    Iwasawa,
}

#[derive(Subcommand)]
enum WeylOp {
    /// Reduce a comma-separated word (e.g. "w0,w1,w2") to normal form.
    Reduce { word: String },
    /// The monomial matrix representative of a word.
    Matrix { word: String },
}

#[derive(Subcommand)]
enum TreeOp {
    /// Canonicalize a lattice: a matrix plus column coefficient ideals.
    Canon {
        /// Comma-separated coefficients from {oprime, ok, k}, e.g. "oprime,ok".
        #[arg(long, default_value = "oprime,oprime")]
        coeffs: String,
        matrix: String,
    },
    /// Gamma-valued distance between two inner vertices.
    Distance { v: String, w: String },
    /// The segmented path between two vertices.
    Path { v: String, w: String },
    /// The q+1 neighbors of an inner vertex.
    Neighbors { v: String },
    /// Projection to the rank-1 tree of K.
    Project { v: String },
    /// Apply a matrix to a vertex.
    Act { matrix: String, v: String },
    /// Vertex type in Gamma/2Gamma.
    Type { v: String },
    /// An apartment containing both vertices (its basis matrix).
    Apartment { v: String, w: String },
    /// DOT export of fiber balls joined by inner-boundary edges.
    Ball {
        #[arg(long, default_value_t = 2)]
        radius: usize,
        #[arg(long, default_value_t = 2)]
        fibers: i64,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => 2,
        Error::ZeroAtPrecision | Error::InsufficientPrecision(_) => 3,
        Error::SingularMatrix => 4,
        Error::StratumError
        | Error::FiberMismatch
        | Error::ResidueNotEnumerable
        | Error::Unsupported(_) => 5,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn parse_matrix(q: u32, input: &str) -> Result<MatrixK, Error> {
    let val: serde_json::Value =
        serde_json::from_str(input).map_err(|e| Error::Parse(format!("matrix JSON: {e}")))?;
    let rows = val
        .as_array()
        .ok_or_else(|| Error::Parse("matrix must be an array of rows".into()))?;
    let mut out: Vec<Vec<FieldElement>> = Vec::new();
    for row in rows {
        let cells = row
            .as_array()
            .ok_or_else(|| Error::Parse("row must be an array".into()))?;
        let mut r = Vec::new();
        for cell in cells {
            let e = match cell {
                serde_json::Value::String(s) => parse_element(q, s)?,
                serde_json::Value::Number(n) => parse_element(q, &n.to_string())?,
                other => serde_json::from_value::<FieldElement>(other.clone())
                    .map_err(|e| Error::Parse(format!("element payload: {e}")))?,
            };
            if e.q() != q {
                return Err(Error::MismatchedField(e.q(), q));
            }
            r.push(e);
        }
        out.push(r);
    }
    let n = out.len();
    if n == 0 || out.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("matrix must be square".into()));
    }
    Ok(MatrixK::from_rows(q, out))
}

fn parse_vertex(ctx: &TreeCtx, input: &str) -> Result<Vertex2, Error> {
    let input = input.trim();
    if input.starts_with('{') {
        return serde_json::from_str::<Vertex2>(input)
            .map_err(|e| Error::Parse(format!("vertex payload: {e}")));
    }
    let a = ctx.standard_apartment();
    let label = parse_label(input)?;
    ctx.apartment_vertex(&a, label)
}

fn parse_label(input: &str) -> Result<ApartmentLabel, Error> {
    let bad = || Error::Parse(format!("bad vertex shorthand {input:?}"));
    match input {
        "x0" => return Ok(ApartmentLabel::XZero),
        "xinf" => return Ok(ApartmentLabel::XInfty),
        _ => {}
    }
    let (head, rest) = input.split_once(':').ok_or_else(bad)?;
    match head {
        "x" => {
            let (i, n) = rest.split_once(',').ok_or_else(bad)?;
            Ok(ApartmentLabel::X {
                i: i.trim().parse().map_err(|_| bad())?,
                n: n.trim().parse().map_err(|_| bad())?,
            })
        }
        "y" => Ok(ApartmentLabel::Y {
            n: rest.trim().parse().map_err(|_| bad())?,
        }),
        "z" => Ok(ApartmentLabel::Z {
            n: rest.trim().parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn parse_coeffs(s: &str) -> Result<(Coeff, Coeff), Error> {
    let one = |x: &str| match x.trim() {
        "oprime" => Ok(Coeff::OPrime),
        "ok" => Ok(Coeff::OK),
        "k" => Ok(Coeff::K),
        other => Err(Error::Parse(format!("bad coefficient {other:?}"))),
    };
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::Parse("coeffs must be like \"oprime,ok\"".into()))?;
    Ok((one(a)?, one(b)?))
}

fn emit<T: serde::Serialize>(out: Output, text: String, value: &T) {
    match out {
        Output::Text => println!("{text}"),
        Output::Json => println!("{}", serde_json::to_string(value).unwrap()),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let prec = Precision::new(cli.t_window.max(4), cli.u_window.max(4));
    let ctx = TreeCtx::new(cli.q, prec);
    match &cli.cmd {
        Cmd::Field { op } => {
            match op {
                FieldOp::Eval { expr } => {
                    let x = parse_element(cli.q, expr)?;
                    emit(cli.output, format!("{x}"), &x);
                }
                FieldOp::Invert { expr } => {
                    let x = parse_element(cli.q, expr)?;
                    let y = x.invert(prec)?;
                    emit(cli.output, format!("{y}"), &y);
                }
                FieldOp::Valuation { expr } => {
                    let x = parse_element(cli.q, expr)?;
                    let v = x.valuation()?;
                    emit(cli.output, format!("{v}"), &v);
                }
                FieldOp::Residue { expr } => {
                    let x = parse_element(cli.q, expr)?;
                    let first = x.reduce_first_residue()?;
                    let last = x.reduce_last_residue();
                    let text = match &last {
                        Ok(c) => format!("first: {first}  last: {c}"),
                        Err(_) => format!("first: {first}  last: (not in O')"),
                    };
                    emit(cli.output, text, &(first, last.ok()));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Decompose {
            kind,
            verify,
            matrix,
        } => {
            let g = parse_matrix(cli.q, matrix)?;
            let d = match kind {
                Kind::Bruhat => decomp::bruhat(&g, prec)?,
                Kind::Cartan => decomp::cartan(&g, prec)?,
                Kind::Iwasawa => decomp::iwasawa(&g, prec)?,
            };
            if cli.output == Output::Json {
                println!("{}", serde_json::to_string(&d).unwrap());
            } else {
                println!("left:\n{}", d.left);
                println!("middle:\n{}", d.middle);
                println!("right:\n{}", d.right);
            }
            if *verify {
                if d.verify(&g) {
                    println!("verify: OK (product agrees below caps)");
                } else {
                    println!("verify: FAILED");
                    return Ok(ExitCode::from(1));
                }
                let mid_ok = match kind {
                    Kind::Bruhat => decomp::membership(&d.middle, SubgroupId::N)?,
                    Kind::Cartan => decomp::membership(&d.middle, SubgroupId::APlus)?,
                    Kind::Iwasawa => decomp::membership(&d.middle, SubgroupId::A)?,
                };
                println!(
                    "middle class: {}",
                    if mid_ok { "OK" } else { "unexpected" }
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Weyl { op } => {
            match op {
                WeylOp::Reduce { word } => {
                    let w = weyl::parse_word(word)?;
                    let nf = weyl::reduce(&w);
                    emit(cli.output, format!("{nf}"), &nf);
                }
                WeylOp::Matrix { word } => {
                    let w = weyl::parse_word(word)?;
                    let m = weyl::to_matrix(weyl::reduce(&w), cli.q);
                    emit(cli.output, format!("{m}"), &m);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Tree { op } => run_tree(cli, &ctx, op),
        Cmd::Verify { suite, trials } => {
            let cfg = VerifyConfig {
                q: cli.q,
                prec,
                seed: cli.seed,
                trials: *trials,
            };
            let reports = run_suites(suite, &cfg)?;
            let mut all_ok = true;
            for rep in &reports {
                for c in &rep.checks {
                    let status = if c.failures == 0 { "ok" } else { "FAIL" };
                    println!(
                        "[{}] {} ... {} ({} trials, {} failures)",
                        rep.suite, c.name, status, c.trials, c.failures
                    );
                    all_ok &= c.failures == 0;
                }
            }
            println!("{}", serde_json::to_string(&reports).unwrap());
            Ok(if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn run_tree(cli: &Cli, ctx: &TreeCtx, op: &TreeOp) -> Result<ExitCode, Error> {
    match op {
        TreeOp::Canon { coeffs, matrix } => {
            let m = parse_matrix(cli.q, matrix)?;
            let lat = Lattice2::new(m, parse_coeffs(coeffs)?)?;
            let v = ctx.canonicalize(&lat)?;
            emit(cli.output, format!("{v}"), &v);
        }
        TreeOp::Distance { v, w } => {
            let a = parse_vertex(ctx, v)?;
            let b = parse_vertex(ctx, w)?;
            let d = ctx.distance(&a, &b)?;
            emit(cli.output, format!("{d}"), &d);
        }
        TreeOp::Path { v, w } => {
            let a = parse_vertex(ctx, v)?;
            let b = parse_vertex(ctx, w)?;
            let p = ctx.path(&a, &b)?;
            emit(cli.output, format!("{p}"), &p);
        }
        TreeOp::Neighbors { v } => {
            let a = parse_vertex(ctx, v)?;
            let ns = ctx.neighbors(&a)?;
            let text = ns
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join("\n");
            emit(cli.output, text, &ns);
        }
        TreeOp::Project { v } => {
            let a = parse_vertex(ctx, v)?;
            let p = ctx.project(&a)?;
            let text = match &p {
                Projected::Vertex(x) => format!("{x}"),
                Projected::Boundary(b) => format!("{b}"),
            };
            emit(cli.output, text, &p);
        }
        TreeOp::Act { matrix, v } => {
            let g = parse_matrix(cli.q, matrix)?;
            let a = parse_vertex(ctx, v)?;
            let moved = ctx.act(&g, &a)?;
            emit(cli.output, format!("{moved}"), &moved);
        }
        TreeOp::Type { v } => {
            let a = parse_vertex(ctx, v)?;
            let t = ctx.vertex_type(&a)?;
            emit(cli.output, format!("({},{})", t.0, t.1), &t);
        }
        TreeOp::Apartment { v, w } => {
            let a = parse_vertex(ctx, v)?;
            let b = parse_vertex(ctx, w)?;
            let ap = ctx.apartment_containing(&a, &b)?;
            emit(cli.output, format!("{}", ap.basis), &ap);
        }
        TreeOp::Ball { radius, fibers } => {
            print!("{}", render_ball(ctx, *radius, *fibers)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// DOT export: radius-R balls in adjacent fibers joined by the
/// inner-boundary edges of the standard apartment. Inner vertices are
/// circles, inner-boundary vertices diamonds.
fn render_ball(ctx: &TreeCtx, radius: usize, fibers: i64) -> Result<String, Error> {
    use std::collections::VecDeque;
    let a = ctx.standard_apartment();
    let mut out = String::from("graph tree2 {\n  node [shape=circle];\n");
    let mut edges: Vec<(String, String)> = Vec::new();
    let name = |v: &Vertex2| format!("\"{v}\"");
    for n in 0..fibers.max(1) {
        let center = ctx.apartment_vertex(&a, ApartmentLabel::X { i: 0, n })?;
        let mut seen: Vec<Vertex2> = vec![center.clone()];
        let mut queue = VecDeque::from([(center.clone(), 0usize)]);
        while let Some((v, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            for nb in ctx.neighbors(&v)? {
                if !seen.iter().any(|s| s.same(&nb)) {
                    seen.push(nb.clone());
                    queue.push_back((nb.clone(), d + 1));
                }
                let (x, y) = (name(&v), name(&nb));
                if !edges.contains(&(y.clone(), x.clone()))
                    && !edges.contains(&(x.clone(), y.clone()))
                {
                    edges.push((x, y));
                }
            }
        }
        // the two boundary points of this fiber along the apartment
        for l in [ApartmentLabel::Y { n }, ApartmentLabel::Z { n }] {
            let b = ctx.apartment_vertex(&a, l)?;
            out.push_str(&format!("  {} [shape=diamond];\n", name(&b)));
        }
    }
    // inner-boundary edges joining adjacent fibers
    for n in 0..(fibers.max(1) - 1) {
        let y = ctx.apartment_vertex(&a, ApartmentLabel::Y { n })?;
        let z = ctx.apartment_vertex(&a, ApartmentLabel::Z { n: n + 1 })?;
        edges.push((name(&y), name(&z)));
    }
    for (x, y) in edges {
        out.push_str(&format!("  {x} -- {y};\n"));
    }
    out.push_str("}\n");
    Ok(out)
}
