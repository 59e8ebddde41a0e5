//! Distributed BLAS building blocks over [`DistMatrix`] / [`DistVector`].
//!
//! Every operation here is collective over the full grid and invokes its
//! collectives in the same order on every rank. Reductions inherit the
//! transport's fixed fold order, so repeated runs are bitwise reproducible,
//! and on a 1x1 grid each operation degenerates to its serial kernel
//! bitwise.

use super::{check_same_grid, local_extent, DistMatrix, DistVector};
use crate::backend::Backend;
use crate::dense::DenseVector;
use crate::error::{Error, Result};
use crate::kernels;
use crate::scalar::Scalar;
use crate::transport::{wire, ReduceOp, Transport};

/// Assembles the full global vector on every rank by broadcasting each proc
/// row's (replicated) segment down the grid columns.
pub(crate) fn allgather_rows<S: Scalar, T: Transport>(
    t: &T,
    x: &DistVector<S>,
) -> Result<DenseVector<S>> {
    let desc = &x.desc;
    let grid = &desc.grid;
    let mut full = DenseVector::zeros(desc.g_rows);
    for pr in 0..grid.p_rows() {
        let payload = if grid.my_row() == pr {
            let mut buf = Vec::new();
            wire::encode_scalars(x.local.as_slice(), &mut buf);
            buf
        } else {
            Vec::new()
        };
        let root = grid.col_group().members()[pr];
        let bytes = t.broadcast(grid.col_group(), root, &payload)?;
        let seg = wire::decode_scalars::<S>(&bytes)?;
        let expect = local_extent(desc.g_rows, desc.mb, grid.p_rows(), pr);
        if seg.len() != expect {
            return Err(Error::DescriptorMismatch(format!(
                "allgather segment of {} entries, expected {expect}",
                seg.len()
            )));
        }
        for (li, &v) in seg.iter().enumerate() {
            full.set(desc.local_to_global_row_at(li, pr), v);
        }
    }
    Ok(full)
}

fn check_vector_pair<S: Scalar>(x: &DistVector<S>, y: &DistVector<S>) -> Result<()> {
    if !x.desc.same_layout(&y.desc) {
        return Err(Error::DescriptorMismatch(
            "distributed vectors have different layouts".into(),
        ));
    }
    Ok(())
}

/// y <- A * x, globally. Local gemv on the owned blocks, partial sums
/// reduced across each grid row, result re-replicated across columns by the
/// allreduce itself.
pub fn dist_matvec<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    a: &DistMatrix<S>,
    x: &DistVector<S>,
    y: &mut DistVector<S>,
) -> Result<()> {
    check_same_grid(&a.desc, &x.desc)?;
    check_same_grid(&a.desc, &y.desc)?;
    if a.desc.g_cols != x.desc.g_rows {
        return Err(Error::DescriptorMismatch(format!(
            "matvec: A is {}x{}, x has length {}",
            a.desc.g_rows, a.desc.g_cols, x.desc.g_rows
        )));
    }
    if y.desc.g_rows != a.desc.g_rows || y.desc.mb != a.desc.mb {
        return Err(Error::DescriptorMismatch(
            "matvec: output vector not conformal with A's rows".into(),
        ));
    }
    let grid = &a.desc.grid;
    let full_x = allgather_rows(t, x)?;
    // compact the globally assembled x onto this rank's local columns
    let (lr, lc) = (a.local.rows(), a.local.cols());
    let x_cols = DenseVector::from_fn(lc, |lj| full_x.get(a.desc.local_to_global_col(lj)));
    let mut partial = DenseVector::zeros(lr);
    kernels::gemv(be, S::ONE, &a.local, &x_cols, S::ZERO, &mut partial, false)?;
    let reduced = t.allreduce_vec(grid.row_group(), ReduceOp::Sum, partial.as_slice())?;
    y.local = DenseVector::from_vec(reduced);
    Ok(())
}

/// y <- A^T * x, globally. Local transposed gemv, partial sums reduced down
/// each grid column, then the column-aligned result is re-laid-out into the
/// row-distributed vector convention.
pub fn dist_matvec_transpose<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    a: &DistMatrix<S>,
    x: &DistVector<S>,
    y: &mut DistVector<S>,
) -> Result<()> {
    check_same_grid(&a.desc, &x.desc)?;
    check_same_grid(&a.desc, &y.desc)?;
    if x.desc.g_rows != a.desc.g_rows || x.desc.mb != a.desc.mb {
        return Err(Error::DescriptorMismatch(
            "transpose matvec: x not conformal with A's rows".into(),
        ));
    }
    if y.desc.g_rows != a.desc.g_cols {
        return Err(Error::DescriptorMismatch(
            "transpose matvec: output vector not conformal with A's columns".into(),
        ));
    }
    let grid = &a.desc.grid;
    let lc = a.local.cols();
    let mut partial = DenseVector::zeros(lc);
    kernels::gemv(be, S::ONE, &a.local, &x.local, S::ZERO, &mut partial, true)?;
    let z_cols = t.allreduce_vec(grid.col_group(), ReduceOp::Sum, partial.as_slice())?;

    // z_cols holds the result entries for this rank's local columns; share
    // the column-aligned segments along each grid row to rebuild the full
    // vector, then extract the row-distributed layout.
    let mut full = DenseVector::zeros(a.desc.g_cols);
    for pc in 0..grid.p_cols() {
        let payload = if grid.my_col() == pc {
            let mut buf = Vec::new();
            wire::encode_scalars(&z_cols, &mut buf);
            buf
        } else {
            Vec::new()
        };
        let root = grid.row_group().members()[pc];
        let bytes = t.broadcast(grid.row_group(), root, &payload)?;
        let seg = wire::decode_scalars::<S>(&bytes)?;
        let expect = local_extent(a.desc.g_cols, a.desc.nb, grid.p_cols(), pc);
        if seg.len() != expect {
            return Err(Error::DescriptorMismatch(format!(
                "transpose matvec segment of {} entries, expected {expect}",
                seg.len()
            )));
        }
        for (lj, &v) in seg.iter().enumerate() {
            full.set(a.desc.local_to_global_col_at(lj, pc), v);
        }
    }
    y.local = DenseVector::from_fn(y.local.len(), |li| full.get(y.desc.local_to_global_row(li)));
    Ok(())
}

/// Globally consistent inner product. Grid column 0 is the accounting owner
/// of the replicated entries, so every entry is counted exactly once; the
/// fixed-order world reduction hands the identical scalar to every rank.
pub fn dist_dot<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    x: &DistVector<S>,
    y: &DistVector<S>,
) -> Result<S> {
    check_vector_pair(x, y)?;
    let grid = &x.desc.grid;
    let local = if grid.my_col() == 0 {
        kernels::dot(be, &x.local, &y.local)?
    } else {
        S::ZERO
    };
    t.allreduce_scalar(grid.world_group(), ReduceOp::Sum, local)
}

/// Globally consistent Euclidean norm.
pub fn dist_norm2<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    x: &DistVector<S>,
) -> Result<S> {
    Ok(dist_dot(t, be, x, x)?.sqrt())
}

/// y <- alpha * x + y on the local (replicated-consistent) segments. Purely
/// local: every rank in a grid row performs the identical update.
pub fn dist_axpy<S: Scalar>(
    be: &mut Backend,
    alpha: S,
    x: &DistVector<S>,
    y: &mut DistVector<S>,
) -> Result<()> {
    check_vector_pair(x, y)?;
    kernels::axpy(be, alpha, &x.local, &mut y.local)
}

/// y <- x (local copy).
pub fn dist_copy<S: Scalar>(x: &DistVector<S>, y: &mut DistVector<S>) -> Result<()> {
    check_vector_pair(x, y)?;
    y.local = x.local.clone();
    Ok(())
}
