//! Command-line driver: generate test systems, solve them on an in-process
//! rank grid, and benchmark methods across rank counts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gridsolve::error::Result;
use gridsolve::io::{self, MmSymmetry};
use gridsolve::scalar::Precision;
use gridsolve_cli::{
    exit_code, parse_csv, render_csv, run_bench, run_solve, BenchConfig, Method, MatrixSpec,
    RhsSpec, SolveConfig,
};

#[derive(Parser)]
#[command(
    name = "gridsolve",
    about = "Distributed dense linear-system solvers on an in-process 2D rank grid",
    after_help = "Exit codes: 0 success, 1 i/o or usage, 2 dimension mismatch, \
                  3 singular or not-SPD, 4 iteration limit, 5 solver breakdown, \
                  6 collective misuse.\n\
                  GRIDSOLVE_DEADLOCK_TIMEOUT_S overrides the transport watchdog (seconds)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one linear system and print the solve report.
    Solve(SolveArgs),
    /// Run a method over several rank counts and emit a CSV of timings and
    /// speedups against the serial baseline.
    Bench(BenchArgs),
    /// Generate a test matrix file.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Precision {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lu,
    Chol,
    Cg,
    Gmres,
    Bicg,
    Bicgstab,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Lu => Method::Lu,
            MethodArg::Chol => Method::Chol,
            MethodArg::Cg => Method::Cg,
            MethodArg::Gmres => Method::Gmres,
            MethodArg::Bicg => Method::Bicg,
            MethodArg::Bicgstab => Method::Bicgstab,
        }
    }
}

#[derive(Args, Clone)]
struct CommonSolveArgs {
    /// Matrix spec: random_dense:n=N | spd:n=N | poisson2d:n=N | file:PATH
    #[arg(long)]
    matrix: String,

    /// Right-hand side: ones | random | file:PATH
    #[arg(long, default_value = "ones")]
    rhs: String,

    #[arg(long, value_enum)]
    method: MethodArg,

    /// Block size of the block-cyclic distribution.
    #[arg(long, default_value_t = 64)]
    nb: usize,

    /// Relative-residual target for the iterative methods.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// Iteration cap for the iterative methods (default: 10 * n).
    #[arg(long)]
    maxit: Option<usize>,

    /// GMRES restart length.
    #[arg(long, default_value_t = 30)]
    restart: usize,

    #[arg(long, value_enum, default_value = "f64")]
    precision: PrecisionArg,

    /// Compute backend: direct (in place) or staged (device-simulating).
    #[arg(long, default_value = "direct")]
    backend: String,

    /// Seed for the matrix/rhs generators.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonSolveArgs,

    /// Number of ranks to launch.
    #[arg(long, default_value_t = 1)]
    ranks: usize,

    /// Grid shape PxQ (default: most square factorization of --ranks).
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonSolveArgs,

    /// Comma-separated rank counts, e.g. 1,2,4.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    ranks_list: Vec<usize>,

    /// Runs per configuration; the median wall time is reported.
    #[arg(long, default_value_t = 3)]
    repeat: usize,

    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Matrix kind: random_dense | spd | poisson2d
    #[arg(long)]
    kind: String,

    #[arg(long)]
    n: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    #[arg(long)]
    out: PathBuf,

    /// mm (Matrix Market array) or bin (raw binary).
    #[arg(long, default_value = "mm")]
    format: String,

    #[arg(long, value_enum, default_value = "f64")]
    precision: PrecisionArg,
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (p, q) = s.split_once(['x', 'X']).ok_or_else(|| {
        gridsolve::Error::InvalidInput(format!("grid must look like 2x2, got `{s}`"))
    })?;
    let parse = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| gridsolve::Error::InvalidInput(format!("bad grid dimension `{v}`")))
    };
    Ok((parse(p)?, parse(q)?))
}

fn build_solve_config(common: &CommonSolveArgs, ranks: usize, grid: Option<&str>) -> Result<SolveConfig> {
    Ok(SolveConfig {
        matrix: common.matrix.parse::<MatrixSpec>()?,
        rhs: common.rhs.parse::<RhsSpec>()?,
        method: common.method.into(),
        ranks,
        grid: grid.map(parse_grid).transpose()?,
        nb: common.nb,
        tol: common.tol,
        max_iters: common.maxit,
        restart: common.restart,
        precision: common.precision.into(),
        backend: common.backend.clone(),
        seed: common.seed,
    })
}

fn cmd_solve(args: &SolveArgs) -> i32 {
    let cfg = match build_solve_config(&args.common, args.ranks, args.grid.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let result = run_solve(&cfg);
    match &result {
        Ok(out) => {
            println!("method: {}", out.report.method);
            println!("n: {}", out.n);
            println!("ranks: {}", cfg.ranks);
            println!("grid: {}x{}", out.grid.0, out.grid.1);
            println!("nb: {}", cfg.nb);
            println!("backend: {}", cfg.backend);
            println!("precision: {}", cfg.precision);
            println!("iterations: {}", out.report.iterations);
            println!("converged: {}", out.report.converged);
            println!("breakdown: {}", out.report.breakdown);
            println!("final_relres: {:e}", out.report.final_relres);
            println!("recomputed_relres: {:e}", out.recomputed_relres);
            println!("wall_time_s: {}", out.wall_time_s);
            println!("flops: {}", out.flops);
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}

fn cmd_bench(args: &BenchArgs) -> i32 {
    let solve = match build_solve_config(&args.common, 1, None) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cfg = BenchConfig {
        solve,
        ranks_list: args.ranks_list.clone(),
        repeat: args.repeat,
    };
    match run_bench(&cfg) {
        Ok(records) => {
            let csv = render_csv(&records);
            debug_assert!(parse_csv(&csv).is_ok());
            match &args.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, csv) {
                        eprintln!("error: {e}");
                        return 1;
                    }
                }
                None => print!("{csv}"),
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&Err(e))
        }
    }
}

fn cmd_gen(args: &GenArgs) -> i32 {
    let spec = format!("{}:n={}", args.kind, args.n);
    let run = || -> Result<()> {
        let spec: MatrixSpec = spec.parse()?;
        if matches!(spec, MatrixSpec::File { .. }) {
            return Err(gridsolve::Error::InvalidInput(
                "gen needs a generator kind, not a file".into(),
            ));
        }
        // spd and poisson2d are symmetric by construction
        let symmetry = match spec {
            MatrixSpec::RandomDense { .. } => MmSymmetry::General,
            _ => MmSymmetry::Symmetric,
        };
        match (args.format.as_str(), Precision::from(args.precision)) {
            ("mm", Precision::F64) => {
                io::write_matrix_market_file(&args.out, &spec.realize::<f64>(args.seed)?, symmetry)
            }
            ("mm", Precision::F32) => {
                io::write_matrix_market_file(&args.out, &spec.realize::<f32>(args.seed)?, symmetry)
            }
            ("bin", Precision::F64) => {
                io::write_binary_file(&args.out, &spec.realize::<f64>(args.seed)?)
            }
            ("bin", Precision::F32) => {
                io::write_binary_file(&args.out, &spec.realize::<f32>(args.seed)?)
            }
            (other, _) => Err(gridsolve::Error::InvalidInput(format!(
                "unknown format `{other}` (expected mm or bin)"
            ))),
        }
    };
    match run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    };
    ExitCode::from(code as u8)
}
