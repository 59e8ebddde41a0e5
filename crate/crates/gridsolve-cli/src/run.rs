//! The distributed solve runner: generate or load, scatter, solve on the
//! grid, gather, and report.

use std::str::FromStr;
use std::time::Instant;

use gridsolve::backend::Backend;
use gridsolve::dense::{DenseMatrix, DenseVector};
use gridsolve::direct;
use gridsolve::distgrid::{self, BlockCyclicDesc, DistMatrix, DistVector, ProcGrid};
use gridsolve::error::{Error, ErrorKind, Result};
use gridsolve::krylov::{self, DistOperator, KrylovConfig};
use gridsolve::report::SolveReport;
use gridsolve::scalar::{Precision, Scalar};
use gridsolve::transport::{launch, ReduceOp, Transport};

use crate::spec::{MatrixSpec, RhsSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lu,
    Chol,
    Cg,
    Gmres,
    Bicg,
    Bicgstab,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lu => "lu",
            Method::Chol => "chol",
            Method::Cg => "cg",
            Method::Gmres => "gmres",
            Method::Bicg => "bicg",
            Method::Bicgstab => "bicgstab",
        }
    }

    pub fn is_iterative(self) -> bool {
        !matches!(self, Method::Lu | Method::Chol)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lu" => Ok(Method::Lu),
            "chol" => Ok(Method::Chol),
            "cg" => Ok(Method::Cg),
            "gmres" => Ok(Method::Gmres),
            "bicg" => Ok(Method::Bicg),
            "bicgstab" => Ok(Method::Bicgstab),
            other => Err(Error::InvalidInput(format!(
                "unknown method `{other}` (expected lu|chol|cg|gmres|bicg|bicgstab)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub matrix: MatrixSpec,
    pub rhs: RhsSpec,
    pub method: Method,
    pub ranks: usize,
    /// Explicit grid shape; `None` picks the most square factorization.
    pub grid: Option<(usize, usize)>,
    pub nb: usize,
    pub tol: f64,
    pub max_iters: Option<usize>,
    pub restart: usize,
    pub precision: Precision,
    pub backend: String,
    pub seed: u64,
}

impl SolveConfig {
    pub fn grid_shape(&self) -> (usize, usize) {
        self.grid.unwrap_or_else(|| balanced_grid(self.ranks))
    }
}

/// Most square `p_r x p_c` factorization with `p_r <= p_c`.
pub fn balanced_grid(ranks: usize) -> (usize, usize) {
    let mut p_r = (ranks as f64).sqrt() as usize;
    while p_r > 1 && ranks % p_r != 0 {
        p_r -= 1;
    }
    (p_r.max(1), ranks / p_r.max(1))
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: SolveReport,
    pub recomputed_relres: f64,
    pub wall_time_s: f64,
    /// Total floating-point operations across all ranks for the solve phase.
    pub flops: u64,
    pub n: usize,
    pub grid: (usize, usize),
}

/// Maps every error kind (and non-converged outcomes) onto the documented
/// exit codes: 2 dimension, 3 singular/not-SPD, 4 max iterations,
/// 5 breakdown, 6 collective misuse, 1 i/o and usage.
pub fn exit_code(result: &Result<SolveOutcome>) -> i32 {
    match result {
        Ok(out) => {
            if out.report.converged {
                0
            } else if out.report.breakdown {
                5
            } else {
                4
            }
        }
        Err(e) => match e.kind() {
            ErrorKind::DimensionMismatch | ErrorKind::DescriptorMismatch => 2,
            ErrorKind::SingularPivot | ErrorKind::NotSpd => 3,
            ErrorKind::MaxIterations => 4,
            ErrorKind::Breakdown => 5,
            ErrorKind::CollectiveMisuse => 6,
            ErrorKind::IoError => 1,
        },
    }
}

pub fn run_solve(cfg: &SolveConfig) -> Result<SolveOutcome> {
    match cfg.precision {
        Precision::F64 => run_solve_typed::<f64>(cfg),
        Precision::F32 => run_solve_typed::<f32>(cfg),
    }
}

fn run_solve_typed<S: Scalar>(cfg: &SolveConfig) -> Result<SolveOutcome> {
    let a_global: DenseMatrix<S> = cfg.matrix.realize(cfg.seed)?;
    if a_global.rows() != a_global.cols() {
        return Err(Error::DimensionMismatch(format!(
            "system matrix must be square, got {}x{}",
            a_global.rows(),
            a_global.cols()
        )));
    }
    let n = a_global.rows();
    let b_global: DenseVector<S> = cfg.rhs.realize(n, cfg.seed)?;
    if b_global.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs length {} vs matrix dimension {n}",
            b_global.len()
        )));
    }
    let (p_r, p_c) = cfg.grid_shape();
    if p_r * p_c != cfg.ranks {
        return Err(Error::InvalidInput(format!(
            "grid {p_r}x{p_c} does not use {} ranks",
            cfg.ranks
        )));
    }
    Backend::select(&cfg.backend)?; // fail fast on typos before launching

    let out = launch(cfg.ranks, |t| -> Result<_> {
        let mut be = Backend::select(&cfg.backend)?;
        let grid = ProcGrid::new(t, p_r, p_c)?;
        let mdesc = BlockCyclicDesc::new(t, &grid, n, n, cfg.nb, cfg.nb)?;
        let vdesc = distgrid::vector_desc(t, &grid, n, cfg.nb)?;
        let root_a = if t.rank() == 0 { Some(&a_global) } else { None };
        let root_b = if t.rank() == 0 { Some(&b_global) } else { None };
        let mut a = distgrid::scatter_matrix(t, &mdesc, root_a)?;
        let b = distgrid::scatter_vector(t, &vdesc, root_b)?;

        t.barrier(grid.world_group())?;
        be.reset_flops();
        let start = Instant::now();
        let (x, mut report) = solve_on_grid(t, &mut be, cfg, &mut a, &b, &vdesc)?;
        t.barrier(grid.world_group())?;
        let wall = start.elapsed().as_secs_f64();

        let flops =
            t.allreduce_scalar(grid.world_group(), ReduceOp::Sum, be.flops() as f64)? as u64;
        let gathered = distgrid::gather_vector(t, &x)?;
        if report.method.is_empty() {
            report.method = cfg.method.name().to_string();
        }
        Ok((gathered, report, wall, flops))
    })?;

    let (gathered, mut report, wall, flops) = out.into_iter().next().expect("rank 0 result");
    let x = gathered.expect("rank 0 gathers the solution");
    let mut be = Backend::direct();
    let recomputed = direct::relative_residual(&mut be, &a_global, &x, &b_global)?;
    if !cfg.method.is_iterative() {
        // direct solves report the recomputed residual
        report.final_relres = recomputed;
    }
    Ok(SolveOutcome {
        report,
        recomputed_relres: recomputed,
        wall_time_s: wall,
        flops,
        n,
        grid: (p_r, p_c),
    })
}

fn solve_on_grid<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    cfg: &SolveConfig,
    a: &mut DistMatrix<S>,
    b: &DistVector<S>,
    vdesc: &BlockCyclicDesc,
) -> Result<(DistVector<S>, SolveReport)> {
    match cfg.method {
        Method::Lu => {
            let f = direct::lu_factor_dist(t, be, a)?;
            let x = direct::lu_solve_dist(t, be, &f, b)?;
            let mut report = SolveReport::new("lu");
            report.converged = true;
            Ok((x, report))
        }
        Method::Chol => {
            let f = direct::chol_factor_dist(t, be, a)?;
            let x = direct::chol_solve_dist(t, be, &f, b)?;
            let mut report = SolveReport::new("chol");
            report.converged = true;
            Ok((x, report))
        }
        iterative => {
            let kcfg = KrylovConfig {
                tol: cfg.tol,
                max_iters: cfg.max_iters,
                restart_m: cfg.restart,
                breakdown_eps: None,
            };
            let x0 = DistVector::zeros(vdesc.clone());
            let mut op = DistOperator::new(a, vdesc.clone(), t, be)?;
            match iterative {
                Method::Cg => krylov::cg(&mut op, b, &x0, &kcfg),
                Method::Gmres => krylov::gmres(&mut op, b, &x0, &kcfg),
                Method::Bicg => krylov::bicg(&mut op, b, &x0, &kcfg),
                Method::Bicgstab => krylov::bicgstab(&mut op, b, &x0, &kcfg),
                Method::Lu | Method::Chol => unreachable!(),
            }
        }
    }
}
