//! Batch front-end for spectral operators: apply a mapping to matrices on
//! disk, differentiate along directions, run seeded verification suites, and
//! launch the Newton demo solver.
//!
//! Exit codes: `0` success (and all checks passed), `1` a verification suite
//! or solver run failed, `2` input error (bad flags, unreadable files,
//! malformed matrices, or a mapping that cannot act on the given input).
//! Input errors print a one-line diagnostic to stderr and leave stdout empty.

mod mtx;
mod problem;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spectrop::catalog;
use spectrop::decomposition::Tolerances;
use spectrop::error::Error;
use spectrop::jacobian;
use spectrop::mapping::SymmetricMapping;
use spectrop::operator;
use spectrop::solver;
use spectrop::space::SpaceSignature;
use spectrop::verify;
use std::fs;
use std::path::PathBuf;

const EXIT_OK: i32 = 0;
const EXIT_CHECK_FAILED: i32 = 1;
const EXIT_INPUT_ERROR: i32 = 2;

#[derive(Parser)]
#[command(
    name = "spectrop",
    version,
    about = "Spectral operator toolkit: apply, differentiate, verify, solve"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Apply a spectral operator to a matrix file.
    ///
    /// Square inputs that are symmetric to working precision go through the
    /// eigenvalue path; everything else through singular values.
    Apply(MapArgs),
    /// Apply the derivative G'(X)[H] with H read from --direction.
    Deriv(DirectedArgs),
    /// Apply the one-sided directional derivative G'(X; H) (singular value
    /// path only; defined at nonsmooth points too).
    Dirderiv(DirectedArgs),
    /// Run verification suites on seeded instances and write a report.
    Check(CheckArgs),
    /// Apply one seeded generalized-derivative element along --direction
    /// (singular value path only).
    Clarke(ClarkeArgs),
    /// Solve a nuclear-norm recovery problem file by semismooth Newton,
    /// printing the iteration trace.
    Solve(SolveArgs),
}

#[derive(Args)]
struct ToleranceFlags {
    /// Relative gap below which spectral values are grouped as tied.
    #[arg(long, value_name = "TOL")]
    tie_tol: Option<f64>,
    /// Absolute threshold below which a singular value counts as zero.
    #[arg(long, value_name = "TOL")]
    zero_tol: Option<f64>,
}

impl ToleranceFlags {
    fn tolerances(&self) -> Tolerances {
        let mut tols = Tolerances::default();
        if let Some(t) = self.tie_tol {
            tols.tie_tol = t;
        }
        if self.zero_tol.is_some() {
            tols.zero_tol = self.zero_tol;
        }
        tols
    }
}

#[derive(Args)]
struct MapArgs {
    /// Mapping description: name or name:key=value,..., e.g. soft:tau=0.5.
    #[arg(long, value_name = "SPEC")]
    g: String,
    /// Input matrix (Matrix Market array or coordinate format).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Output matrix path (Matrix Market array format).
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    #[command(flatten)]
    tols: ToleranceFlags,
}

#[derive(Args)]
struct DirectedArgs {
    /// Mapping description: name or name:key=value,..., e.g. soft:tau=0.5.
    #[arg(long, value_name = "SPEC")]
    g: String,
    /// Base-point matrix (Matrix Market array or coordinate format).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Direction matrix with the same shape as the input.
    #[arg(long, value_name = "PATH")]
    direction: PathBuf,
    /// Output matrix path (Matrix Market array format).
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    #[command(flatten)]
    tols: ToleranceFlags,
}

#[derive(Args)]
struct ClarkeArgs {
    /// Mapping description: name or name:key=value,..., e.g. soft:tau=0.5.
    #[arg(long, value_name = "SPEC")]
    g: String,
    /// Base-point matrix (Matrix Market array or coordinate format).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Direction matrix with the same shape as the input.
    #[arg(long, value_name = "PATH")]
    direction: PathBuf,
    /// Output matrix path (Matrix Market array format).
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    /// Seed for the sampled element.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tols: ToleranceFlags,
}

#[derive(Args)]
struct CheckArgs {
    /// Mapping description: name or name:key=value,..., e.g. soft:tau=0.5.
    #[arg(long, value_name = "SPEC")]
    g: String,
    /// Rows of the seeded rectangular test instances.
    #[arg(long)]
    m: usize,
    /// Columns of the seeded rectangular test instances (m <= n).
    #[arg(long)]
    n: usize,
    /// Seed for instance generation; fixed seed gives a byte-identical report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated suites from: frechet, dir, semismooth, invariance,
    /// lipschitz.
    #[arg(long, default_value = "frechet,dir,semismooth,invariance")]
    suite: String,
    /// Report destination; printed to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    #[command(flatten)]
    tols: ToleranceFlags,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file (JSON; see the problem-file schema in the README).
    #[arg(long, value_name = "PATH")]
    problem: PathBuf,
    /// Convergence tolerance on the residual norm, overriding the file.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for generalized-derivative sampling inside Newton steps.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional path for the recovered matrix (Matrix Market array format).
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

/// Parses and executes a command line, returning the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let rendered = e.to_string();
            let line = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("{line}");
            return EXIT_INPUT_ERROR;
        }
    };
    let outcome = match &cli.verb {
        Verb::Apply(args) => cmd_apply(args),
        Verb::Deriv(args) => cmd_deriv(args),
        Verb::Dirderiv(args) => cmd_dirderiv(args),
        Verb::Check(args) => cmd_check(args),
        Verb::Clarke(args) => cmd_clarke(args),
        Verb::Solve(args) => cmd_solve(args),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_INPUT_ERROR
        }
    }
}

type CmdResult = Result<i32, String>;

/// Square matrices that are symmetric to working precision take the
/// eigenvalue path; everything else the singular value path.
fn is_hermitian_input(x: &DMatrix<f64>) -> bool {
    x.nrows() == x.ncols() && (x - x.transpose()).norm() <= 1e-12 * (1.0 + x.norm())
}

fn rect_signature(x: &DMatrix<f64>) -> Result<SpaceSignature, String> {
    SpaceSignature::rect(x.nrows().min(x.ncols()), x.nrows().max(x.ncols()))
        .map_err(|e| e.to_string())
}

fn load_mapping(spec: &str, sig: SpaceSignature) -> Result<SymmetricMapping, String> {
    catalog::parse_g_spec(spec, sig).map_err(|e| e.to_string())
}

fn cmd_apply(args: &MapArgs) -> CmdResult {
    let x = mtx::read_matrix(&args.input)?;
    let tols = args.tols.tolerances();
    let out = if is_hermitian_input(&x) {
        let g = load_mapping(&args.g, SpaceSignature::sym(x.nrows()).map_err(|e| e.to_string())?)?;
        operator::apply_hermitian(&g, &x, &tols)
    } else {
        let g = load_mapping(&args.g, rect_signature(&x)?)?;
        operator::apply(&g, &x, &tols)
    }
    .map_err(|e| e.to_string())?;
    mtx::write_matrix(&args.output, &out)?;
    Ok(EXIT_OK)
}

fn cmd_deriv(args: &DirectedArgs) -> CmdResult {
    let x = mtx::read_matrix(&args.input)?;
    let h = mtx::read_matrix(&args.direction)?;
    let tols = args.tols.tolerances();
    let out = if is_hermitian_input(&x) {
        let g = load_mapping(&args.g, SpaceSignature::sym(x.nrows()).map_err(|e| e.to_string())?)?;
        operator::frechet_apply_mixed(&g, &[x], &[h], &tols).map(|mut v| v.remove(0))
    } else {
        let g = load_mapping(&args.g, rect_signature(&x)?)?;
        operator::frechet_apply(&g, &x, &h, &tols)
    }
    .map_err(|e| e.to_string())?;
    mtx::write_matrix(&args.output, &out)?;
    Ok(EXIT_OK)
}

fn cmd_dirderiv(args: &DirectedArgs) -> CmdResult {
    let x = mtx::read_matrix(&args.input)?;
    let h = mtx::read_matrix(&args.direction)?;
    let tols = args.tols.tolerances();
    let g = load_mapping(&args.g, rect_signature(&x)?)?;
    let out = operator::dir_derivative(&g, &x, &h, &tols).map_err(|e| e.to_string())?;
    mtx::write_matrix(&args.output, &out)?;
    Ok(EXIT_OK)
}

fn cmd_clarke(args: &ClarkeArgs) -> CmdResult {
    let x = mtx::read_matrix(&args.input)?;
    let h = mtx::read_matrix(&args.direction)?;
    let tols = args.tols.tolerances();
    let g = load_mapping(&args.g, rect_signature(&x)?)?;
    let element =
        jacobian::clarke_element(&g, &x, args.seed, None, &tols).map_err(|e| e.to_string())?;
    let out = element.apply(&h).map_err(|e| e.to_string())?;
    mtx::write_matrix(&args.output, &out)?;
    Ok(EXIT_OK)
}

fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

fn unit_gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let raw = gaussian(m, n, rng);
    let norm = raw.norm();
    raw / norm
}

fn cmd_check(args: &CheckArgs) -> CmdResult {
    if args.m == 0 || args.m > args.n {
        return Err(format!(
            "check instances need 1 <= m <= n, got m={}, n={}",
            args.m, args.n
        ));
    }
    let sig = SpaceSignature::rect(args.m, args.n).map_err(|e| e.to_string())?;
    let g = load_mapping(&args.g, sig)?;
    let tols = args.tols.tolerances();
    let surface = |e: Error| e.to_string();

    // One deterministic instance pool shared by every suite, drawn in a
    // fixed order so identical flags give a byte-identical report.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let x_general = gaussian(args.m, args.n, &mut rng);
    let h1 = unit_gaussian(args.m, args.n, &mut rng);
    let h2 = unit_gaussian(args.m, args.n, &mut rng);
    let mut x_smooth = x_general.clone();
    let mut found = false;
    for _ in 0..500 {
        if jacobian::is_smooth_point(&g, &x_smooth, &tols).map_err(surface)? {
            found = true;
            break;
        }
        x_smooth = gaussian(args.m, args.n, &mut rng);
    }
    if !found {
        return Err("no differentiable sample point found in 500 draws".into());
    }

    let mut report = String::new();
    let mut all_passed = true;
    for name in args.suite.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let section = match name {
            "frechet" => {
                let rep = verify::fd_frechet_slope(&g, &x_smooth, &h1, &verify::DEFAULT_RADII)
                    .map_err(surface)?;
                all_passed &= rep.passed;
                rep.render("frechet")
            }
            "dir" => {
                let rep = verify::dir_quotient_check(&g, &x_general, &h1, &verify::DEFAULT_RADII)
                    .map_err(surface)?;
                all_passed &= rep.passed;
                rep.render("dir")
            }
            "semismooth" => {
                let rep = verify::semismooth_slope(
                    &g,
                    &x_general,
                    &[h1.clone(), h2.clone()],
                    &verify::DEFAULT_RADII,
                    args.seed ^ 0x5E31,
                )
                .map_err(surface)?;
                all_passed &= rep.passed;
                rep.render("semismooth")
            }
            "invariance" => {
                let dev =
                    verify::invariance_check(&g, &x_general, 30, args.seed ^ 0x1447).map_err(surface)?;
                let passed = dev <= 1e-10;
                all_passed &= passed;
                format!(
                    "check = invariance\nmax_deviation = {dev:.16e}\nthreshold = 1.0000000000000000e-10\npassed = {passed}\n"
                )
            }
            "lipschitz" => {
                let est = verify::lipschitz_estimate(&g, &x_general, 200, args.seed ^ 0x11B5)
                    .map_err(surface)?;
                match g.metadata().lipschitz {
                    Some(declared) => {
                        let passed = est <= declared + 1e-8;
                        all_passed &= passed;
                        format!(
                            "check = lipschitz\nestimate = {est:.16e}\ndeclared = {declared:.16e}\npassed = {passed}\n"
                        )
                    }
                    None => format!(
                        "check = lipschitz\nestimate = {est:.16e}\ndeclared = none\npassed = true\n"
                    ),
                }
            }
            other => {
                return Err(format!(
                    "unknown suite '{other}'; valid: frechet, dir, semismooth, invariance, lipschitz"
                ))
            }
        };
        report.push_str(&section);
        report.push('\n');
    }

    match &args.report {
        Some(path) => fs::write(path, &report)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{report}"),
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let p = problem::load_problem(&args.problem)?;
    let tol = args.tol.unwrap_or(p.tol);
    match solver::newton_solve(&p.a, &p.b, &p.c, p.tau, &p.y0, tol, p.max_iter, args.seed) {
        Ok((_, x, trace)) => {
            print!("{}", trace.render());
            if let Some(path) = &args.output {
                mtx::write_matrix(path, &x)?;
            }
            Ok(EXIT_OK)
        }
        // A well-posed instance that fails to converge is a failed run, not
        // an input error.
        Err(
            e @ (Error::MaxIterExceeded(_)
            | Error::SolverFailure(_)
            | Error::SingularNewtonSystem(_)
            | Error::NoSmoothPointFound(_)),
        ) => {
            eprintln!("solve failed: {e}");
            Ok(EXIT_CHECK_FAILED)
        }
        Err(e) => Err(e.to_string()),
    }
}
