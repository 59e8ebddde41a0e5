//! Operator-agnosticism: the same solver loop over the serial operator and
//! the distributed operator produces matching iterate histories on every
//! grid shape, thanks to the deterministic reductions underneath.

use gridsolve::backend::Backend;
use gridsolve::dense::{DenseMatrix, DenseVector};
use gridsolve::distgrid::{self, BlockCyclicDesc, DistMatrix, DistVector, ProcGrid};
use gridsolve::krylov::{bicg, bicgstab, cg, gmres, DenseOperator, DistOperator, KrylovConfig};
use gridsolve::report::SolveReport;
use gridsolve::rng::SplitMix64;
use gridsolve::transport::launch;

const GRIDS: [(usize, usize); 5] = [(1, 1), (1, 2), (2, 1), (2, 2), (2, 4)];

fn spd_test_matrix(n: usize, seed: u64) -> DenseMatrix<f64> {
    gridsolve::gen::spd::<f64>(n, seed)
}

fn nonsym_test_matrix(n: usize, seed: u64) -> DenseMatrix<f64> {
    let mut rng = SplitMix64::new(seed);
    DenseMatrix::from_fn(n, n, |i, j| {
        let v = rng.next_f64() - 0.5;
        if i == j {
            v + n as f64
        } else {
            v
        }
    })
}

fn histories_match(serial: &SolveReport, dist: &SolveReport, label: &str) {
    assert_eq!(serial.converged, dist.converged, "{label}: convergence flags differ");
    assert_eq!(
        serial.iterations, dist.iterations,
        "{label}: iteration counts differ"
    );
    for (k, (a, b)) in serial
        .residual_history
        .iter()
        .zip(&dist.residual_history)
        .enumerate()
    {
        assert!(
            (a - b).abs() <= 1e-10 * (1.0 + a.abs()),
            "{label}: history[{k}] {a} vs {b}"
        );
    }
}

fn run_dist_solver(
    method: &str,
    a0: &DenseMatrix<f64>,
    b0: &DenseVector<f64>,
    cfg: &KrylovConfig,
    pr: usize,
    pc: usize,
) -> (DenseVector<f64>, SolveReport) {
    let n = a0.rows();
    let nb = 2;
    let out = launch(pr * pc, |t| {
        let grid = ProcGrid::new(t, pr, pc)?;
        let mdesc = BlockCyclicDesc::new(t, &grid, n, n, nb, nb)?;
        let vdesc = distgrid::vector_desc(t, &grid, n, nb)?;
        let a = DistMatrix::from_global(mdesc, a0)?;
        let b = DistVector::from_global(vdesc.clone(), b0)?;
        let x0 = DistVector::zeros(vdesc.clone());
        let mut be = Backend::direct();
        let mut op = DistOperator::new(&a, vdesc, t, &mut be)?;
        let (x, rep) = match method {
            "cg" => cg(&mut op, &b, &x0, cfg)?,
            "gmres" => gmres(&mut op, &b, &x0, cfg)?,
            "bicg" => bicg(&mut op, &b, &x0, cfg)?,
            "bicgstab" => bicgstab(&mut op, &b, &x0, cfg)?,
            other => panic!("unknown method {other}"),
        };
        let gathered = distgrid::gather_vector(t, &x)?;
        Ok((gathered, rep))
    })
    .unwrap();
    let x = out[0].0.as_ref().unwrap().clone();
    // identical report on every rank
    for (_, rep) in &out[1..] {
        assert_eq!(rep.iterations, out[0].1.iterations);
        assert_eq!(rep.converged, out[0].1.converged);
    }
    (x, out[0].1.clone())
}

#[test]
fn cg_serial_and_distributed_histories_match() {
    let n = 16;
    let a0 = spd_test_matrix(n, 81);
    let b0 = gridsolve::gen::random_rhs::<f64>(n, 82);
    let cfg = KrylovConfig::default();
    let mut be = Backend::direct();
    let mut op = DenseOperator::new(&a0, &mut be).unwrap();
    let (xs, serial) = cg(&mut op, &b0, &DenseVector::zeros(n), &cfg).unwrap();
    assert!(serial.converged);
    for (pr, pc) in GRIDS {
        let (xd, dist) = run_dist_solver("cg", &a0, &b0, &cfg, pr, pc);
        histories_match(&serial, &dist, &format!("cg {pr}x{pc}"));
        for i in 0..n {
            assert!((xs.get(i) - xd.get(i)).abs() <= 1e-10 * (1.0 + xs.get(i).abs()));
        }
    }
}

#[test]
fn gmres_serial_and_distributed_histories_match() {
    let n = 16;
    let a0 = nonsym_test_matrix(n, 83);
    let b0 = gridsolve::gen::random_rhs::<f64>(n, 84);
    let cfg = KrylovConfig::default().with_restart(5);
    let mut be = Backend::direct();
    let mut op = DenseOperator::new(&a0, &mut be).unwrap();
    let (_, serial) = gmres(&mut op, &b0, &DenseVector::zeros(n), &cfg).unwrap();
    assert!(serial.converged);
    for (pr, pc) in GRIDS {
        let (_, dist) = run_dist_solver("gmres", &a0, &b0, &cfg, pr, pc);
        histories_match(&serial, &dist, &format!("gmres {pr}x{pc}"));
    }
}

#[test]
fn bicg_serial_and_distributed_histories_match() {
    let n = 16;
    let a0 = nonsym_test_matrix(n, 85);
    let b0 = gridsolve::gen::random_rhs::<f64>(n, 86);
    let cfg = KrylovConfig::default();
    let mut be = Backend::direct();
    let mut op = DenseOperator::new(&a0, &mut be).unwrap();
    let (_, serial) = bicg(&mut op, &b0, &DenseVector::zeros(n), &cfg).unwrap();
    assert!(serial.converged);
    for (pr, pc) in GRIDS {
        let (_, dist) = run_dist_solver("bicg", &a0, &b0, &cfg, pr, pc);
        histories_match(&serial, &dist, &format!("bicg {pr}x{pc}"));
    }
}

#[test]
fn bicgstab_serial_and_distributed_histories_match() {
    let n = 16;
    let a0 = nonsym_test_matrix(n, 87);
    let b0 = gridsolve::gen::random_rhs::<f64>(n, 88);
    let cfg = KrylovConfig::default();
    let mut be = Backend::direct();
    let mut op = DenseOperator::new(&a0, &mut be).unwrap();
    let (_, serial) = bicgstab(&mut op, &b0, &DenseVector::zeros(n), &cfg).unwrap();
    assert!(serial.converged);
    for (pr, pc) in GRIDS {
        let (_, dist) = run_dist_solver("bicgstab", &a0, &b0, &cfg, pr, pc);
        histories_match(&serial, &dist, &format!("bicgstab {pr}x{pc}"));
    }
}

/// CG reaches a tight tolerance within n iterations on SPD diagonal
/// systems with well-separated eigenvalues.
#[test]
fn cg_finite_termination_on_diagonal_systems() {
    for seed in 0..5u64 {
        let mut rng = SplitMix64::new(900 + seed);
        let n = 20 + (seed as usize) * 5;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + i as f64 + rng.next_f64() * 0.25
            } else {
                0.0
            }
        });
        let b = DenseVector::from_fn(n, |_| rng.next_f64() + 0.5);
        let cfg = KrylovConfig::default().with_tol(1e-12);
        let mut be = Backend::direct();
        let mut op = DenseOperator::new(&a, &mut be).unwrap();
        let (_, rep) = cg(&mut op, &b, &DenseVector::zeros(n), &cfg).unwrap();
        assert!(rep.converged, "seed {seed}: {rep:?}");
        assert!(rep.iterations <= n, "seed {seed}: took {}", rep.iterations);
    }
}
