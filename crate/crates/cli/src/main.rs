//! `dyadic-lambda`: norms, atoms and experiments from the command line.
//!
//! Exit status: 0 on success, 1 when a validation fails (an atom does not
//! certify, a pairing inequality is violated), 2 on usage or input errors.
//! The worker count comes from `DYADIC_LAMBDA_THREADS`.

mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dyadic_lambda::atoms::{a_alpha, atom_decompose, hp_split, validate_atom, CubeStrategy, InputTerm, SpecialBasis};
use dyadic_lambda::dyadic::{Family, ScaleWindow};
use dyadic_lambda::harness::{equivalence_experiment, fn_counterexample, pairing_check, ExperimentConfig};
use dyadic_lambda::lipnorm::{lambda_norm, theorem_a_estimate};
use dyadic_lambda::pwpoly::AlphaContext;
use dyadic_lambda::report::to_canonical_json;
use dyadic_lambda::Error;
use serde::Serialize;
use serde_json::{json, Value};

use input::{load_basis, load_function, parse_box, read_terms, Loaded};

const THREADS_ENV: &str = "DYADIC_LAMBDA_THREADS";

#[derive(Parser)]
#[command(name = "dyadic-lambda", version, about = "Lipschitz/BMO norms from dyadic grids and special-atom decompositions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the special basis p^1..p^M on [-1,1]^N and export it as JSON.
    Basis {
        /// Dimension N.
        #[arg(long)]
        dim: usize,
        /// Smoothness index alpha >= 0.
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Truncated Lambda_{alpha,J} norm of a function over the family J.
    LambdaNorm {
        #[command(flatten)]
        g: FnArgs,
        /// Grid family: D (dyadic) or D0 (dyadic plus half shifts).
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        out: Output,
    },
    /// A_alpha(g): supremum of |<g, p>| over special atoms in the window.
    Aalpha {
        #[command(flatten)]
        g: FnArgs,
        #[command(flatten)]
        basis: BasisArg,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        out: Output,
    },
    /// ||g||_{Lambda,D} + A_alpha(g), next to ||g||_{Lambda,D0}.
    TheoremA {
        #[command(flatten)]
        g: FnArgs,
        #[command(flatten)]
        basis: BasisArg,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Certify a function as an L2 p-atom on a cube (exit 1 if it is not).
    AtomValidate {
        #[command(flatten)]
        g: FnArgs,
        #[command(flatten)]
        cube: CubeArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Split an atom into 2^N dyadic atoms plus special atoms.
    AtomDecompose {
        #[command(flatten)]
        g: FnArgs,
        #[command(flatten)]
        cube: CubeArgs,
        #[command(flatten)]
        basis: BasisArg,
        /// Enclosing special cube: the fixed-scale recipe, or the cube itself when it is special.
        #[arg(long, value_enum, default_value_t = StrategyArg::Recipe)]
        strategy: StrategyArg,
        #[command(flatten)]
        out: Output,
    },
    /// Split an atomic sum into dyadic and special parts and report costs.
    HpSplit {
        /// JSON file {"terms": [{"coeff", "fn", "lo", "hi"}]}; `fn` is a
        /// function spec object or a path relative to this file.
        #[arg(long)]
        terms: PathBuf,
        /// Smoothness index alpha >= 0; the atoms are L2 p-atoms, p = N/(N+alpha).
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        basis: BasisArg,
        /// Enclosing special cube: the fixed-scale recipe, or the cube itself when it is special.
        #[arg(long, value_enum, default_value_t = StrategyArg::Recipe)]
        strategy: StrategyArg,
        #[command(flatten)]
        out: Output,
    },
    /// Check |<g, a>| <= ||g||_{Lambda,J} for an atom a on a cube of J (exit 1 if violated).
    PairCheck {
        #[command(flatten)]
        g: FnArgs,
        /// Atom: function spec or coefficient file.
        #[arg(long)]
        atom: PathBuf,
        #[command(flatten)]
        cube: CubeArgs,
        /// Grid family: D (dyadic) or D0 (dyadic plus half shifts).
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        out: Output,
    },
    /// The f_n example: special-atom upper bound against the dyadic lower bound.
    FnDemo {
        /// Index n of f_n.
        #[arg(long)]
        n: u32,
        /// Staircase depth m (at least n + 8).
        #[arg(long)]
        depth: u32,
        #[command(flatten)]
        out: Output,
    },
    /// Equivalence-ratio ensemble from a config file.
    Equivalence {
        /// ExperimentConfig JSON.
        #[arg(long)]
        config: PathBuf,
        /// json: one summary; csv: one file per alpha (suffixed when several).
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct FnArgs {
    /// Function spec JSON ({"kind": ...}) or coefficient file.
    #[arg(long = "fn")]
    path: PathBuf,
    /// Smoothness index alpha >= 0 (0 is BMO / H^1).
    #[arg(long)]
    alpha: f64,
}

#[derive(Args)]
struct BasisArg {
    /// Basis JSON from `basis`; built in process when absent.
    #[arg(long)]
    basis: Option<PathBuf>,
}

#[derive(Args)]
struct WindowArgs {
    /// Finest level (default: one below the finest cell).
    #[arg(long, allow_hyphen_values = true)]
    n_min: Option<i32>,
    /// Coarsest level (default: one above the domain).
    #[arg(long, allow_hyphen_values = true)]
    n_max: Option<i32>,
    /// Window box lower corner, comma separated (default: the domain).
    #[arg(long, allow_hyphen_values = true, requires = "box_hi")]
    box_lo: Option<String>,
    /// Window box upper corner.
    #[arg(long, allow_hyphen_values = true, requires = "box_lo")]
    box_hi: Option<String>,
}

#[derive(Args)]
struct CubeArgs {
    /// Cube lower corner, comma separated dyadic rationals.
    #[arg(long, allow_hyphen_values = true)]
    lo: String,
    /// Cube upper corner.
    #[arg(long, allow_hyphen_values = true)]
    hi: String,
}

#[derive(Args)]
struct Output {
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    #[value(name = "D", alias = "d")]
    D,
    #[value(name = "D0", alias = "d0")]
    D0,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::D => Family::D,
            FamilyArg::D0 => Family::D0,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Recipe,
    Smallest,
}

impl From<StrategyArg> for CubeStrategy {
    fn from(s: StrategyArg) -> CubeStrategy {
        match s {
            StrategyArg::Recipe => CubeStrategy::Recipe,
            StrategyArg::Smallest => CubeStrategy::Smallest,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Validation(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidAtom(_) | Error::CubeOutsideWindow { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Run = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("validation failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV}={v} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn provenance() -> Value {
    json!({
        "argv": std::env::args().collect::<Vec<_>>(),
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
    })
}

/// The report with a `provenance` block, as canonical JSON.
fn with_provenance<T: Serialize>(report: &T) -> Result<String, Failure> {
    let mut v = serde_json::to_value(report).map_err(|e| Failure::Usage(e.to_string()))?;
    match &mut v {
        Value::Object(o) => {
            o.insert("provenance".into(), provenance());
        }
        other => {
            v = json!({ "result": other.take(), "provenance": provenance() });
        }
    }
    Ok(to_canonical_json(&v)?)
}

fn emit(text: &str, out: &Output) -> Run {
    write_to(text, out.out.as_deref())
}

fn write_to(text: &str, path: Option<&Path>) -> Run {
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
    }
}

fn ctx_for(loaded: &Loaded, alpha: f64) -> Result<AlphaContext, Failure> {
    Ok(AlphaContext::new(loaded.f.dim(), alpha)?)
}

fn window_for(loaded: &Loaded, args: &WindowArgs) -> Result<ScaleWindow, Failure> {
    let mut w = loaded.window.clone().unwrap_or_else(|| dyadic_lambda::lipnorm::default_window(&loaded.f));
    if let Some(n) = args.n_min {
        w.n_min = n;
    }
    if let Some(n) = args.n_max {
        w.n_max = n;
    }
    if let (Some(lo), Some(hi)) = (&args.box_lo, &args.box_hi) {
        w.bbox = parse_box(lo, hi, "box")?;
    }
    Ok(ScaleWindow::new(w.n_min, w.n_max, w.bbox)?)
}

fn basis_for(arg: &BasisArg, ctx: &AlphaContext) -> Result<SpecialBasis, Failure> {
    match &arg.basis {
        Some(p) => {
            let b = load_basis(p)?;
            if b.ctx() != ctx {
                return Err(Failure::Usage(format!(
                    "basis: {} was built for N={}, alpha={}",
                    p.display(),
                    b.ctx().dim(),
                    b.ctx().alpha()
                )));
            }
            Ok(b)
        }
        None => Ok(SpecialBasis::build(ctx)?),
    }
}

fn run(cmd: Cmd) -> Run {
    match cmd {
        Cmd::Basis { dim, alpha, out } => {
            let ctx = AlphaContext::new(dim, alpha)?;
            let b = SpecialBasis::build(&ctx)?;
            emit(&with_provenance(&b.to_file())?, &out)
        }
        Cmd::LambdaNorm { g, family, window, out } => {
            let f = load_function(&g.path)?;
            let ctx = ctx_for(&f, g.alpha)?;
            let w = window_for(&f, &window)?;
            emit(&with_provenance(&lambda_norm(&f.f, &ctx, family.into(), &w)?)?, &out)
        }
        Cmd::Aalpha { g, basis, window, out } => {
            let f = load_function(&g.path)?;
            let ctx = ctx_for(&f, g.alpha)?;
            let b = basis_for(&basis, &ctx)?;
            let w = window_for(&f, &window)?;
            emit(&with_provenance(&a_alpha(&f.f, &b, &w)?)?, &out)
        }
        Cmd::TheoremA { g, basis, window, out } => {
            let f = load_function(&g.path)?;
            let ctx = ctx_for(&f, g.alpha)?;
            let b = basis_for(&basis, &ctx)?;
            let w = window_for(&f, &window)?;
            let est = theorem_a_estimate(&f.f, &ctx, &b, &w)?;
            let d0 = lambda_norm(&f.f, &ctx, Family::D0, &w)?;
            let ratio = if est.estimate > 0.0 { Some(d0.norm / est.estimate) } else { None };
            let mut v = serde_json::to_value(&est).map_err(|e| Failure::Usage(e.to_string()))?;
            v["lambda_d0"] = serde_json::to_value(&d0).map_err(|e| Failure::Usage(e.to_string()))?;
            v["ratio"] = json!(ratio);
            emit(&with_provenance(&v)?, &out)
        }
        Cmd::AtomValidate { g, cube, out } => {
            let f = load_function(&g.path)?;
            let ctx = ctx_for(&f, g.alpha)?;
            let q = parse_box(&cube.lo, &cube.hi, "cube")?;
            let cert = validate_atom(&f.f, &q, &ctx)?;
            emit(&with_provenance(&cert)?, &out)?;
            if cert.pass {
                Ok(())
            } else {
                Err(Failure::Validation(format!(
                    "support {}, size {} ({}), moments {}",
                    ok(cert.support_ok),
                    cert.size,
                    ok(cert.size_ok),
                    ok(cert.moments_ok)
                )))
            }
        }
        Cmd::AtomDecompose { g, cube, basis, strategy, out } => {
            let f = load_function(&g.path)?;
            let ctx = ctx_for(&f, g.alpha)?;
            let b = basis_for(&basis, &ctx)?;
            let q = parse_box(&cube.lo, &cube.hi, "cube")?;
            let dec = atom_decompose(&f.f, &q, &ctx, &b, strategy.into())?;
            emit(&with_provenance(&dec)?, &out)
        }
        Cmd::HpSplit { terms, alpha, basis, strategy, out } => {
            let raw = read_terms(&terms)?;
            let dim = raw.first().map(|t| t.f.dim()).ok_or_else(|| Failure::Usage("terms: empty".into()))?;
            let ctx = AlphaContext::new(dim, alpha)?;
            let b = basis_for(&basis, &ctx)?;
            let input: Vec<InputTerm> =
                raw.into_iter().map(|t| InputTerm { coeff: t.coeff, atom: t.f, cube: t.cube }).collect();
            emit(&with_provenance(&hp_split(&input, &ctx, &b, strategy.into())?)?, &out)
        }
        Cmd::PairCheck { g, atom, cube, family, window, out } => {
            let f = load_function(&g.path)?;
            let ctx = ctx_for(&f, g.alpha)?;
            let a = load_function(&atom)?;
            let q = parse_box(&cube.lo, &cube.hi, "cube")?;
            let cert = validate_atom(&a.f, &q, &ctx)?;
            if !cert.pass {
                return Err(Failure::Validation(format!("atom does not certify on {q} (size {})", cert.size)));
            }
            let w = window_for(&f, &window)?;
            let r = pairing_check(&f.f, &cert, family.into(), &w)?;
            emit(&with_provenance(&r)?, &out)?;
            if r.holds {
                Ok(())
            } else {
                Err(Failure::Validation(format!("|<g,a>| = {} exceeds {}", r.pairing.abs(), r.lambda_norm.norm)))
            }
        }
        Cmd::FnDemo { n, depth, out } => emit(&with_provenance(&fn_counterexample(n, depth)?)?, &out),
        Cmd::Equivalence { config, format, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config: {e}")))?;
            let reports = equivalence_experiment(&cfg)?;
            match format {
                Format::Json => {
                    emit(&with_provenance(&json!({ "config": cfg, "reports": reports }))?, &out)
                }
                Format::Csv if reports.len() == 1 => emit(&reports[0].to_csv(), &out),
                Format::Csv => {
                    for r in &reports {
                        let path = out.out.as_ref().map(|p| suffixed(p, r.alpha));
                        write_to(&r.to_csv(), path.as_deref())?;
                    }
                    Ok(())
                }
            }
        }
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILS"
    }
}

/// `ratios.csv` -> `ratios_alpha0.5.csv`.
fn suffixed(p: &Path, alpha: f64) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match p.extension() {
        Some(ext) => format!("{stem}_alpha{alpha}.{}", ext.to_string_lossy()),
        None => format!("{stem}_alpha{alpha}"),
    };
    p.with_file_name(name)
}
