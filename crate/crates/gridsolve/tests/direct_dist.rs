//! Distributed factorizations against their serial counterparts, across
//! grid shapes, plus the distributed two-step solves.

use gridsolve::backend::Backend;
use gridsolve::dense::DenseMatrix;
use gridsolve::direct::{
    chol_factor_blocked, chol_factor_dist, chol_solve_dist, lu_factor_blocked, lu_factor_dist,
    lu_solve_dist, relative_residual,
};
use gridsolve::distgrid::{self, BlockCyclicDesc, DistMatrix, DistVector, ProcGrid};
use gridsolve::rng::SplitMix64;
use gridsolve::transport::launch;
use gridsolve::ErrorKind;

fn rand_matrix(seed: u64, n: usize) -> DenseMatrix<f64> {
    let mut rng = SplitMix64::new(seed);
    DenseMatrix::from_fn(n, n, |_, _| rng.next_f64() * 2.0 - 1.0)
}

const GRIDS: [(usize, usize); 5] = [(1, 1), (1, 2), (2, 1), (2, 2), (2, 4)];

#[test]
fn dist_lu_matches_serial_blocked_exactly() {
    let n = 24;
    let nb = 4;
    let a0 = rand_matrix(70, n);
    let mut be = Backend::direct();
    let mut serial = a0.clone();
    let serial_f = lu_factor_blocked(&mut be, &mut serial, nb).unwrap();

    for (pr, pc) in GRIDS {
        let out = launch(pr * pc, |t| {
            let grid = ProcGrid::new(t, pr, pc)?;
            let desc = BlockCyclicDesc::new(t, &grid, n, n, nb, nb)?;
            let mut a = DistMatrix::from_global(desc, &a0)?;
            let mut be = Backend::direct();
            let f = lu_factor_dist(t, &mut be, &mut a)?;
            let gathered = distgrid::gather_matrix(t, &f.packed)?;
            Ok((f.pivots, gathered))
        })
        .unwrap();
        let (pivots, gathered) = &out[0];
        assert_eq!(pivots, &serial_f.pivots, "grid {pr}x{pc}: pivot sequences differ");
        let gathered = gathered.as_ref().unwrap();
        // same blocked arithmetic, same operand values: bitwise equality
        assert_eq!(gathered, &serial_f.packed, "grid {pr}x{pc}: packed factors differ");
    }
}

#[test]
fn dist_lu_identity_and_singular() {
    let eye = DenseMatrix::<f64>::identity(8);
    let out = launch(4, |t| {
        let grid = ProcGrid::new(t, 2, 2)?;
        let desc = BlockCyclicDesc::new(t, &grid, 8, 8, 2, 2)?;
        let mut a = DistMatrix::from_global(desc, &eye)?;
        let mut be = Backend::direct();
        let f = lu_factor_dist(t, &mut be, &mut a)?;
        Ok(f.pivots)
    })
    .unwrap();
    assert!(out.iter().all(|p| p == &vec![0, 1, 2, 3, 4, 5, 6, 7]));

    // a zero column trips SingularPivot on every rank
    let mut singular = rand_matrix(71, 6);
    for i in 0..6 {
        singular.set(i, 2, 0.0);
    }
    let err = launch(4, |t| {
        let grid = ProcGrid::new(t, 2, 2)?;
        let desc = BlockCyclicDesc::new(t, &grid, 6, 6, 2, 2)?;
        let mut a = DistMatrix::from_global(desc, &singular)?;
        let mut be = Backend::direct();
        lu_factor_dist(t, &mut be, &mut a).map(|_| ())
    })
    .unwrap_err();
    assert_eq!(err.kind(), ErrorKind::SingularPivot);
}

#[test]
fn dist_chol_matches_serial_blocked_lower_triangle() {
    let n = 20;
    let nb = 4;
    let a0 = gridsolve::gen::spd::<f64>(n, 72);
    let mut be = Backend::direct();
    let mut serial = a0.clone();
    let serial_f = chol_factor_blocked(&mut be, &mut serial, nb).unwrap();

    for (pr, pc) in GRIDS {
        let out = launch(pr * pc, |t| {
            let grid = ProcGrid::new(t, pr, pc)?;
            let desc = BlockCyclicDesc::new(t, &grid, n, n, nb, nb)?;
            let mut a = DistMatrix::from_global(desc, &a0)?;
            let mut be = Backend::direct();
            let f = chol_factor_dist(t, &mut be, &mut a)?;
            distgrid::gather_matrix(t, &f.lower)
        })
        .unwrap();
        let gathered = out[0].as_ref().unwrap();
        for j in 0..n {
            for i in j..n {
                assert_eq!(
                    gathered.get(i, j).to_bits(),
                    serial_f.lower.get(i, j).to_bits(),
                    "grid {pr}x{pc} ({i},{j})"
                );
            }
        }
    }
}

#[test]
fn dist_chol_rejects_indefinite_everywhere() {
    let mut bad = gridsolve::gen::spd::<f64>(6, 73);
    bad.set(4, 4, -50.0);
    let err = launch(2, |t| {
        let grid = ProcGrid::new(t, 2, 1)?;
        let desc = BlockCyclicDesc::new(t, &grid, 6, 6, 2, 2)?;
        let mut a = DistMatrix::from_global(desc, &bad)?;
        let mut be = Backend::direct();
        chol_factor_dist(t, &mut be, &mut a).map(|_| ())
    })
    .unwrap_err();
    assert_eq!(err.kind(), ErrorKind::NotSpd);
}

#[test]
fn dist_lu_solve_residual_across_grids() {
    let n = 24;
    let nb = 4;
    let a0 = gridsolve::gen::shifted_random::<f64>(n, 74);
    let b0 = gridsolve::gen::random_rhs::<f64>(n, 75);
    for (pr, pc) in GRIDS {
        let out = launch(pr * pc, |t| {
            let grid = ProcGrid::new(t, pr, pc)?;
            let desc = BlockCyclicDesc::new(t, &grid, n, n, nb, nb)?;
            let vdesc = distgrid::vector_desc(t, &grid, n, nb)?;
            let mut a = DistMatrix::from_global(desc, &a0)?;
            let b = DistVector::from_global(vdesc, &b0)?;
            let mut be = Backend::direct();
            let f = lu_factor_dist(t, &mut be, &mut a)?;
            let x = lu_solve_dist(t, &mut be, &f, &b)?;
            distgrid::gather_vector(t, &x)
        })
        .unwrap();
        let x = out[0].as_ref().unwrap();
        let mut be = Backend::direct();
        let rel = relative_residual(&mut be, &a0, x, &b0).unwrap();
        assert!(rel <= 1e-12, "grid {pr}x{pc}: residual {rel}");
    }
}

#[test]
fn dist_chol_solve_residual_across_grids() {
    let n = 20;
    let nb = 4;
    let a0 = gridsolve::gen::spd::<f64>(n, 76);
    let b0 = gridsolve::gen::random_rhs::<f64>(n, 77);
    for (pr, pc) in GRIDS {
        let out = launch(pr * pc, |t| {
            let grid = ProcGrid::new(t, pr, pc)?;
            let desc = BlockCyclicDesc::new(t, &grid, n, n, nb, nb)?;
            let vdesc = distgrid::vector_desc(t, &grid, n, nb)?;
            let mut a = DistMatrix::from_global(desc, &a0)?;
            let b = DistVector::from_global(vdesc, &b0)?;
            let mut be = Backend::direct();
            let f = chol_factor_dist(t, &mut be, &mut a)?;
            let x = chol_solve_dist(t, &mut be, &f, &b)?;
            distgrid::gather_vector(t, &x)
        })
        .unwrap();
        let x = out[0].as_ref().unwrap();
        let mut be = Backend::direct();
        let rel = relative_residual(&mut be, &a0, x, &b0).unwrap();
        assert!(rel <= 1e-12, "grid {pr}x{pc}: residual {rel}");
    }
}

/// The factorizations and solves invoke their collectives in identical
/// order on every rank of each group.
#[test]
fn factorization_collective_order_audit() {
    use gridsolve::transport::TracingTransport;
    let n = 16;
    let nb = 4;
    let a0 = gridsolve::gen::shifted_random::<f64>(n, 79);
    let s0 = gridsolve::gen::spd::<f64>(n, 80);
    let b0 = gridsolve::gen::random_rhs::<f64>(n, 81);
    let out = launch(4, |t| {
        let tr = TracingTransport::new(t);
        let grid = ProcGrid::new(&tr, 2, 2)?;
        let desc = BlockCyclicDesc::new(&tr, &grid, n, n, nb, nb)?;
        let vdesc = distgrid::vector_desc(&tr, &grid, n, nb)?;
        let mut be = Backend::direct();
        let mut a = DistMatrix::from_global(desc.clone(), &a0)?;
        let b = DistVector::from_global(vdesc.clone(), &b0)?;
        let f = lu_factor_dist(&tr, &mut be, &mut a)?;
        lu_solve_dist(&tr, &mut be, &f, &b)?;
        let mut s = DistMatrix::from_global(desc, &s0)?;
        let cf = chol_factor_dist(&tr, &mut be, &mut s)?;
        chol_solve_dist(&tr, &mut be, &cf, &b)?;
        Ok(tr.events())
    })
    .unwrap();
    use std::collections::HashMap;
    let mut per_group: HashMap<u64, Vec<Vec<String>>> = HashMap::new();
    for events in &out {
        let mut mine: HashMap<u64, Vec<String>> = HashMap::new();
        for e in events {
            mine.entry(e.group)
                .or_default()
                .push(format!("{}@{:?}", e.kind, e.root));
        }
        for (g, seq) in mine {
            per_group.entry(g).or_default().push(seq);
        }
    }
    for (g, seqs) in per_group {
        for s in &seqs {
            assert_eq!(s, &seqs[0], "group {g:#x} saw inconsistent collective order");
        }
    }
}

/// The generic scalar path: f32 distributed factors also reproduce their
/// serial counterparts exactly.
#[test]
fn dist_lu_f32_matches_serial() {
    let n = 12;
    let nb = 3;
    let a0 = gridsolve::gen::shifted_random::<f32>(n, 83);
    let mut be = Backend::direct();
    let mut serial = a0.clone();
    let serial_f = lu_factor_blocked(&mut be, &mut serial, nb).unwrap();
    let out = launch(4, |t| {
        let grid = ProcGrid::new(t, 2, 2)?;
        let desc = BlockCyclicDesc::new(t, &grid, n, n, nb, nb)?;
        let mut a = DistMatrix::from_global(desc, &a0)?;
        let mut be = Backend::direct();
        let f = lu_factor_dist(t, &mut be, &mut a)?;
        let gathered = distgrid::gather_matrix(t, &f.packed)?;
        Ok((f.pivots, gathered))
    })
    .unwrap();
    assert_eq!(out[0].0, serial_f.pivots);
    assert_eq!(out[0].1.as_ref().unwrap(), &serial_f.packed);
}

/// Uneven edge: matrix dimension not a multiple of the block size or the
/// grid, so ragged last blocks flow through every code path.
#[test]
fn dist_lu_ragged_dimensions() {
    let n = 13;
    let nb = 3;
    let a0 = gridsolve::gen::shifted_random::<f64>(n, 78);
    let mut be = Backend::direct();
    let mut serial = a0.clone();
    let serial_f = lu_factor_blocked(&mut be, &mut serial, nb).unwrap();
    let out = launch(4, |t| {
        let grid = ProcGrid::new(t, 2, 2)?;
        let desc = BlockCyclicDesc::new(t, &grid, n, n, nb, nb)?;
        let mut a = DistMatrix::from_global(desc, &a0)?;
        let mut be = Backend::direct();
        let f = lu_factor_dist(t, &mut be, &mut a)?;
        let gathered = distgrid::gather_matrix(t, &f.packed)?;
        Ok((f.pivots, gathered))
    })
    .unwrap();
    assert_eq!(out[0].0, serial_f.pivots);
    assert_eq!(out[0].1.as_ref().unwrap(), &serial_f.packed);
}
