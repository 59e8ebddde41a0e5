//! Distributed right-looking factorizations and block-substitution solves
//! over the block-cyclic layout.
//!
//! Per panel, the owning process column factors its rows cooperatively with
//! one MaxAbsLoc reduction per pivot step, pivots are broadcast on the world
//! group, row interchanges travel point-to-point, the U block row is formed
//! by trsm after a row-group broadcast of the diagonal block, and the
//! trailing update is a local gemm after row/column broadcasts of the panel
//! and block row. Gathered factors are bitwise equal to the serial blocked
//! factorization with the same block size, pivot sequence included.

use crate::backend::Backend;
use crate::dense::{DenseMatrix, DenseVector};
use crate::distgrid::{DistMatrix, DistVector};
use crate::error::{Error, Result};
use crate::kernels::{self, Side, TriangleSpec, Uplo};
use crate::scalar::Scalar;
use crate::transport::{wire, ReduceOp, Transport};

/// Tag for pairwise row-interchange traffic.
const ROW_SWAP_TAG: u64 = u64::MAX - 2;

#[derive(Debug, Clone)]
pub struct DistLuFactors<S> {
    pub packed: DistMatrix<S>,
    pub pivots: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DistCholFactor<S> {
    pub lower: DistMatrix<S>,
}

fn check_square_desc<S: Scalar>(a: &DistMatrix<S>) -> Result<()> {
    if a.desc.g_rows != a.desc.g_cols {
        return Err(Error::DimensionMismatch(format!(
            "distributed factorization needs a square matrix, got {}x{}",
            a.desc.g_rows, a.desc.g_cols
        )));
    }
    if a.desc.mb != a.desc.nb {
        return Err(Error::DescriptorMismatch(format!(
            "distributed factorization needs square blocks, got {}x{}",
            a.desc.mb, a.desc.nb
        )));
    }
    Ok(())
}

/// Swaps global rows `r1` and `r2` restricted to global columns `[c0, c1)`.
/// Pairwise point-to-point between the owning proc rows of each grid column;
/// ranks owning neither row do nothing.
fn swap_rows_range<S: Scalar, T: Transport>(
    t: &T,
    a: &mut DistMatrix<S>,
    r1: usize,
    r2: usize,
    c0: usize,
    c1: usize,
) -> Result<()> {
    if r1 == r2 {
        return Ok(());
    }
    let desc = &a.desc;
    let grid = &desc.grid;
    let lc0 = desc.local_cols_below(c0);
    let lc1 = desc.local_cols_below(c1);
    if lc0 == lc1 {
        return Ok(());
    }
    let pr1 = (r1 / desc.mb) % grid.p_rows();
    let pr2 = (r2 / desc.mb) % grid.p_rows();
    let me_row = grid.my_row();
    if me_row != pr1 && me_row != pr2 {
        return Ok(());
    }
    let lead = a.local.lead();
    if pr1 == pr2 {
        let li1 = desc.local_row_unchecked(r1);
        let li2 = desc.local_row_unchecked(r2);
        let data = a.local.data_mut();
        for lc in lc0..lc1 {
            data.swap(li1 + lc * lead, li2 + lc * lead);
        }
        return Ok(());
    }
    let (my_global, peer_pr) = if me_row == pr1 { (r1, pr2) } else { (r2, pr1) };
    let li = desc.local_row_unchecked(my_global);
    let peer = grid.rank_at(peer_pr, grid.my_col());
    let mine: Vec<S> = (lc0..lc1).map(|lc| a.local.get(li, lc)).collect();
    let mut payload = Vec::new();
    wire::encode_scalars(&mine, &mut payload);
    t.send(peer, ROW_SWAP_TAG, &payload)?;
    let theirs = wire::decode_scalars::<S>(&t.recv(peer, ROW_SWAP_TAG)?)?;
    if theirs.len() != lc1 - lc0 {
        return Err(Error::DescriptorMismatch("row swap segment length mismatch".into()));
    }
    for (k, lc) in (lc0..lc1).enumerate() {
        a.local.set(li, lc, theirs[k]);
    }
    Ok(())
}

/// Distributed blocked LU with partial pivoting, in place on the local
/// blocks.
pub fn lu_factor_dist<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    a: &mut DistMatrix<S>,
) -> Result<DistLuFactors<S>> {
    check_square_desc(a)?;
    let desc = a.desc.clone();
    let grid = desc.grid.clone();
    let n = desc.g_rows;
    let nb = desc.mb;
    if n == 0 {
        return Ok(DistLuFactors {
            packed: a.clone(),
            pivots: Vec::new(),
        });
    }
    let mut pivots = vec![0usize; n];
    let lrows = a.local.rows();
    let lead = a.local.lead();

    let mut j0 = 0;
    while j0 < n {
        let jb = nb.min(n - j0);
        let bk = j0 / nb;
        let pc = bk % grid.p_cols();
        let pr_d = bk % grid.p_rows();
        let in_panel_col = grid.my_col() == pc;
        let lj0 = desc.local_cols_below(j0);

        // (1) cooperative panel factorization on the owning process column
        let mut singular_at: Option<usize> = None;
        if in_panel_col {
            for s in 0..jb {
                let gj = j0 + s;
                // local pivot candidate: first maximal |value| among local
                // rows with global index >= gj
                let lstart = desc.local_rows_below(gj);
                let mut cand: Option<(S, u64)> = None;
                for li in lstart..lrows {
                    let v = a.local.get(li, lj0 + s);
                    let better = match cand {
                        None => true,
                        Some((bv, _)) => v.abs() > bv.abs(),
                    };
                    if better {
                        cand = Some((v, desc.local_to_global_row(li) as u64));
                    }
                }
                let (cv, cg) = cand.unwrap_or((S::ZERO, u64::MAX));
                let (pv, pg) = t.allreduce_maxabsloc(grid.col_group(), cv, cg)?;
                if pv == S::ZERO {
                    singular_at = Some(gj);
                    break;
                }
                let pg = pg as usize;
                pivots[gj] = pg;
                swap_rows_range(t, a, gj, pg, j0, j0 + jb)?;

                // scale the column below the pivot; the reduction already
                // delivered the pivot value to every participant
                let lbelow = desc.local_rows_below(gj + 1);
                {
                    let col = &mut a.local.data_mut()[(lj0 + s) * lead..];
                    for li in lbelow..lrows {
                        col[li] /= pv;
                    }
                }
                be.add_flops((lrows - lbelow) as u64);

                // pivot row segment for the rank-1 update
                let owner_pr = (gj / nb) % grid.p_rows();
                let payload = if grid.my_row() == owner_pr {
                    let li = desc.local_row_unchecked(gj);
                    let seg: Vec<S> = (s + 1..jb).map(|sj| a.local.get(li, lj0 + sj)).collect();
                    let mut buf = Vec::new();
                    wire::encode_scalars(&seg, &mut buf);
                    buf
                } else {
                    Vec::new()
                };
                let root = grid.col_group().members()[owner_pr];
                let row_seg = wire::decode_scalars::<S>(&t.broadcast(grid.col_group(), root, &payload)?)?;
                if row_seg.len() != jb - s - 1 {
                    return Err(Error::DescriptorMismatch("panel row segment length mismatch".into()));
                }

                let lcol: Vec<S> = a.local.data()[(lj0 + s) * lead..][lbelow..lrows].to_vec();
                for (idx, &akj) in row_seg.iter().enumerate() {
                    let col = &mut a.local.data_mut()[(lj0 + s + 1 + idx) * lead..];
                    for (off, li) in (lbelow..lrows).enumerate() {
                        col[li] -= lcol[off] * akj;
                    }
                }
                be.add_flops(2 * (lrows - lbelow) as u64 * (jb - s - 1) as u64);
            }
        }

        // (2) pivot sequence (or failure) announced to the whole grid
        let root = grid.rank_at(0, pc);
        let payload = if t.rank() == root {
            let mut buf = Vec::with_capacity(1 + 8 * jb);
            match singular_at {
                Some(col) => {
                    buf.push(1);
                    buf.extend_from_slice(&(col as u64).to_le_bytes());
                }
                None => {
                    buf.push(0);
                    for k in 0..jb {
                        buf.extend_from_slice(&(pivots[j0 + k] as u64).to_le_bytes());
                    }
                }
            }
            buf
        } else {
            Vec::new()
        };
        let msg = t.broadcast(grid.world_group(), root, &payload)?;
        if msg.first() == Some(&1) {
            let col = u64::from_le_bytes(msg[1..9].try_into().unwrap()) as usize;
            return Err(Error::SingularPivot { col });
        }
        if !in_panel_col {
            for k in 0..jb {
                pivots[j0 + k] =
                    u64::from_le_bytes(msg[1 + 8 * k..9 + 8 * k].try_into().unwrap()) as usize;
            }
        }

        // (3) the same interchanges applied outside the panel columns
        for k in j0..j0 + jb {
            let p = pivots[k];
            if p != k {
                swap_rows_range(t, a, k, p, 0, j0)?;
                swap_rows_range(t, a, k, p, j0 + jb, n)?;
            }
        }

        let lc_trail = desc.local_cols_below(j0 + jb);
        let lc_end = a.local.cols();
        let lr_trail = desc.local_rows_below(j0 + jb);

        // (4) U block row: trsm with the broadcast diagonal block
        if grid.my_row() == pr_d && j0 + jb < n {
            let lr0 = desc.local_rows_below(j0);
            let payload = if in_panel_col {
                let l11 = a.local.copy_block(lr0, lj0, jb, jb);
                wire::encode_matrix(&l11)
            } else {
                Vec::new()
            };
            let root = grid.row_group().members()[pc];
            let l11 = wire::decode_matrix::<S>(&t.broadcast(grid.row_group(), root, &payload)?)?;
            if lc_end > lc_trail {
                let mut u12 = a.local.copy_block(lr0, lc_trail, jb, lc_end - lc_trail);
                kernels::trsm(be, TriangleSpec::left_lower(true), S::ONE, &l11, &mut u12)?;
                a.local.write_block(lr0, lc_trail, &u12);
            }
        }

        // (5) trailing update after row/column broadcasts of L21 and U12
        if j0 + jb < n {
            let payload = if in_panel_col {
                let l21 = a.local.copy_block(lr_trail, lj0, lrows - lr_trail, jb);
                wire::encode_matrix(&l21)
            } else {
                Vec::new()
            };
            let root = grid.row_group().members()[pc];
            let l21 = wire::decode_matrix::<S>(&t.broadcast(grid.row_group(), root, &payload)?)?;

            let payload = if grid.my_row() == pr_d {
                let lr0 = desc.local_rows_below(j0);
                let u12 = a.local.copy_block(lr0, lc_trail, jb, lc_end - lc_trail);
                wire::encode_matrix(&u12)
            } else {
                Vec::new()
            };
            let root = grid.col_group().members()[pr_d];
            let u12 = wire::decode_matrix::<S>(&t.broadcast(grid.col_group(), root, &payload)?)?;

            if l21.rows() > 0 && u12.cols() > 0 {
                let mut a22 = a.local.copy_block(lr_trail, lc_trail, l21.rows(), u12.cols());
                kernels::gemm(be, -S::ONE, &l21, &u12, S::ONE, &mut a22, false, false)?;
                a.local.write_block(lr_trail, lc_trail, &a22);
            }
        }
        j0 += jb;
    }
    Ok(DistLuFactors {
        packed: a.clone(),
        pivots,
    })
}

/// Distributed blocked lower Cholesky (no pivoting), mirroring
/// [`lu_factor_dist`]'s communication pattern.
pub fn chol_factor_dist<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    a: &mut DistMatrix<S>,
) -> Result<DistCholFactor<S>> {
    check_square_desc(a)?;
    let desc = a.desc.clone();
    let grid = desc.grid.clone();
    let n = desc.g_rows;
    let nb = desc.mb;
    let lrows = a.local.rows();

    let mut j0 = 0;
    while j0 < n {
        let jb = nb.min(n - j0);
        let bk = j0 / nb;
        let pc = bk % grid.p_cols();
        let pr_d = bk % grid.p_rows();
        let owner = grid.rank_at(pr_d, pc);
        let in_panel_col = grid.my_col() == pc;
        let lj0 = desc.local_cols_below(j0);
        let lr0_d = desc.local_rows_below_at(j0, pr_d);

        // (1) diagonal block factored by its owner, result (or failure)
        // broadcast to the whole grid
        let payload = if t.rank() == owner {
            let mut a11 = a.local.copy_block(lr0_d, lj0, jb, jb);
            match kernels::potf2(be, &mut a11) {
                Ok(()) => {
                    a.local.write_block(lr0_d, lj0, &a11);
                    let mut buf = vec![0u8];
                    buf.extend_from_slice(&wire::encode_matrix(&a11));
                    buf
                }
                Err(Error::NotSpd { col }) => {
                    let mut buf = vec![1u8];
                    buf.extend_from_slice(&((col + j0) as u64).to_le_bytes());
                    buf
                }
                Err(other) => return Err(other),
            }
        } else {
            Vec::new()
        };
        let msg = t.broadcast(grid.world_group(), owner, &payload)?;
        if msg.first() == Some(&1) {
            let col = u64::from_le_bytes(msg[1..9].try_into().unwrap()) as usize;
            return Err(Error::NotSpd { col });
        }
        let l11 = wire::decode_matrix::<S>(&msg[1..])?;

        let lr_trail = desc.local_rows_below(j0 + jb);

        // (2) panel below the diagonal: A21 <- A21 * L11^-T
        if in_panel_col && lr_trail < lrows {
            let spec = TriangleSpec {
                side: Side::Right,
                uplo: Uplo::Lower,
                unit_diag: false,
                transpose: true,
            };
            let mut a21 = a.local.copy_block(lr_trail, lj0, lrows - lr_trail, jb);
            kernels::trsm(be, spec, S::ONE, &l11, &mut a21)?;
            a.local.write_block(lr_trail, lj0, &a21);
        }

        if j0 + jb < n {
            // (3) row broadcast: every rank gets the panel rows it shares a
            // grid row with
            let payload = if in_panel_col {
                let l21 = a.local.copy_block(lr_trail, lj0, lrows - lr_trail, jb);
                wire::encode_matrix(&l21)
            } else {
                Vec::new()
            };
            let root = grid.row_group().members()[pc];
            let l21_rows =
                wire::decode_matrix::<S>(&t.broadcast(grid.row_group(), root, &payload)?)?;

            // (4) column allgather: the full panel, for the transposed
            // operand of the symmetric update
            let total_below = n - j0 - jb;
            let mut full_l21 = DenseMatrix::<S>::zeros(total_below, jb);
            for pr2 in 0..grid.p_rows() {
                let payload = if grid.my_row() == pr2 {
                    wire::encode_matrix(&l21_rows)
                } else {
                    Vec::new()
                };
                let root = grid.col_group().members()[pr2];
                let seg = wire::decode_matrix::<S>(&t.broadcast(grid.col_group(), root, &payload)?)?;
                let base = desc.local_rows_below_at(j0 + jb, pr2);
                for li in 0..seg.rows() {
                    let g = desc.local_to_global_row_at(base + li, pr2);
                    for c in 0..jb {
                        full_l21.set(g - j0 - jb, c, seg.get(li, c));
                    }
                }
            }

            // (5) trailing update, one local column block at a time,
            // mirroring the serial blocked update: the rank owning a
            // diagonal block updates its lower triangle column-wise, all
            // rows below it go through one gemm
            let lc_end = a.local.cols();
            let mut lc = desc.local_cols_below(j0 + jb);
            while lc < lc_end {
                let gc = desc.local_to_global_col(lc);
                let w = (nb - gc % nb).min(lc_end - lc);
                let own_diag = (gc / nb) % grid.p_rows() == grid.my_row();
                let rstart = desc.local_rows_below(gc);
                if own_diag {
                    for jj in 0..w {
                        let rows = l21_rows.copy_block(rstart - lr_trail + jj, 0, w - jj, jb);
                        let pivot_row = full_l21
                            .copy_block(gc - j0 - jb + jj, 0, 1, jb)
                            .transposed()
                            .into_vector();
                        let mut seg = a.local.copy_block(rstart + jj, lc + jj, w - jj, 1).into_vector();
                        kernels::gemv(be, -S::ONE, &rows, &pivot_row, S::ONE, &mut seg, false)?;
                        a.local.write_block(rstart + jj, lc + jj, &seg.to_matrix());
                    }
                }
                let below = if own_diag { rstart + w } else { rstart };
                if below < lrows {
                    let a_op = l21_rows.copy_block(below - lr_trail, 0, lrows - below, jb);
                    let b_op = full_l21.copy_block(gc - j0 - jb, 0, w, jb);
                    let mut block = a.local.copy_block(below, lc, lrows - below, w);
                    kernels::gemm(be, -S::ONE, &a_op, &b_op, S::ONE, &mut block, false, true)?;
                    a.local.write_block(below, lc, &block);
                }
                lc += w;
            }
        }
        j0 += jb;
    }
    Ok(DistCholFactor { lower: a.clone() })
}

/// Forward/backward substitution where the coefficient triangle is read as
/// stored (no transpose). Partial sums reduce across grid rows; every block
/// segment is then broadcast world-wide so each rank keeps a full copy of
/// the evolving solution.
#[allow(clippy::too_many_arguments)]
fn dist_tri_solve_no_trans<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    m: &DistMatrix<S>,
    x: &mut DenseVector<S>,
    lower: bool,
    unit: bool,
) -> Result<()> {
    let desc = &m.desc;
    let grid = &desc.grid;
    let n = desc.g_rows;
    let nb = desc.mb;
    let nblocks = n.div_ceil(nb);
    let order: Vec<usize> = if lower {
        (0..nblocks).collect()
    } else {
        (0..nblocks).rev().collect()
    };
    for bk in order {
        let j0 = bk * nb;
        let jb = nb.min(n - j0);
        let pr = bk % grid.p_rows();
        let pc_d = bk % grid.p_cols();
        let owner = grid.rank_at(pr, pc_d);
        let payload = if grid.my_row() == pr {
            // partial sums over this rank's already-solved columns
            let lr0 = desc.local_rows_below(j0);
            let (cl, cr) = if lower {
                (0, desc.local_cols_below(j0))
            } else {
                (desc.local_cols_below(j0 + jb), m.local.cols())
            };
            let q = cr - cl;
            let mut partial = DenseVector::<S>::zeros(jb);
            if q > 0 {
                let sub = m.local.copy_block(lr0, cl, jb, q);
                let xs = DenseVector::from_fn(q, |k| x.get(desc.local_to_global_col(cl + k)));
                kernels::gemv(be, S::ONE, &sub, &xs, S::ZERO, &mut partial, false)?;
            }
            let s = t.allreduce_vec(grid.row_group(), ReduceOp::Sum, partial.as_slice())?;
            if t.rank() == owner {
                // solve the diagonal block for this segment
                let lj0 = desc.local_cols_below(j0);
                let diag = m.local.copy_block(lr0, lj0, jb, jb);
                let mut rhs = DenseMatrix::from_fn(jb, 1, |i, _| x.get(j0 + i) - s[i]);
                be.add_flops(jb as u64);
                let spec = TriangleSpec {
                    side: Side::Left,
                    uplo: if lower { Uplo::Lower } else { Uplo::Upper },
                    unit_diag: unit,
                    transpose: false,
                };
                kernels::trsm(be, spec, S::ONE, &diag, &mut rhs)?;
                wire::encode_matrix(&rhs)
            } else {
                Vec::new()
            }
        } else {
            Vec::new()
        };
        let seg = wire::decode_matrix::<S>(&t.broadcast(grid.world_group(), owner, &payload)?)?;
        for i in 0..jb {
            x.set(j0 + i, seg.get(i, 0));
        }
    }
    Ok(())
}

/// Backward substitution with the transposed lower triangle (`L^T x = b`).
/// Partial sums come from column blocks, so they reduce down grid columns.
fn dist_tri_solve_lower_trans<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    m: &DistMatrix<S>,
    x: &mut DenseVector<S>,
) -> Result<()> {
    let desc = &m.desc;
    let grid = &desc.grid;
    let n = desc.g_rows;
    let nb = desc.mb;
    let nblocks = n.div_ceil(nb);
    for bk in (0..nblocks).rev() {
        let j0 = bk * nb;
        let jb = nb.min(n - j0);
        let pc = bk % grid.p_cols();
        let pr_d = bk % grid.p_rows();
        let owner = grid.rank_at(pr_d, pc);
        let payload = if grid.my_col() == pc {
            let lj0 = desc.local_cols_below(j0);
            let rl = desc.local_rows_below(j0 + jb);
            let rr = m.local.rows();
            let mut partial = DenseVector::<S>::zeros(jb);
            if rr > rl {
                let sub = m.local.copy_block(rl, lj0, rr - rl, jb);
                let xs = DenseVector::from_fn(rr - rl, |k| x.get(desc.local_to_global_row(rl + k)));
                kernels::gemv(be, S::ONE, &sub, &xs, S::ZERO, &mut partial, true)?;
            }
            let s = t.allreduce_vec(grid.col_group(), ReduceOp::Sum, partial.as_slice())?;
            if t.rank() == owner {
                let lr0 = desc.local_rows_below(j0);
                let diag = m.local.copy_block(lr0, lj0, jb, jb);
                let mut rhs = DenseMatrix::from_fn(jb, 1, |i, _| x.get(j0 + i) - s[i]);
                be.add_flops(jb as u64);
                let spec = TriangleSpec {
                    side: Side::Left,
                    uplo: Uplo::Lower,
                    unit_diag: false,
                    transpose: true,
                };
                kernels::trsm(be, spec, S::ONE, &diag, &mut rhs)?;
                wire::encode_matrix(&rhs)
            } else {
                Vec::new()
            }
        } else {
            Vec::new()
        };
        let seg = wire::decode_matrix::<S>(&t.broadcast(grid.world_group(), owner, &payload)?)?;
        for i in 0..jb {
            x.set(j0 + i, seg.get(i, 0));
        }
    }
    Ok(())
}

/// Distributed two-step LU solve: pivots applied to a replicated copy of b,
/// then block forward and backward substitution.
pub fn lu_solve_dist<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    f: &DistLuFactors<S>,
    b: &DistVector<S>,
) -> Result<DistVector<S>> {
    let desc = &f.packed.desc;
    if b.desc.g_rows != desc.g_rows || b.desc.mb != desc.mb {
        return Err(Error::DescriptorMismatch(
            "lu_solve: right-hand side not conformal with the factors".into(),
        ));
    }
    let mut x = crate::distgrid::allgather_rows(t, b)?;
    for (k, &p) in f.pivots.iter().enumerate() {
        if p != k {
            let tmp = x.get(k);
            x.set(k, x.get(p));
            x.set(p, tmp);
        }
    }
    dist_tri_solve_no_trans(t, be, &f.packed, &mut x, true, true)?;
    dist_tri_solve_no_trans(t, be, &f.packed, &mut x, false, false)?;
    DistVector::from_global(b.desc.clone(), &x)
}

/// Distributed Cholesky solve: `L y = b`, then `L^T x = y`.
pub fn chol_solve_dist<S: Scalar, T: Transport>(
    t: &T,
    be: &mut Backend,
    f: &DistCholFactor<S>,
    b: &DistVector<S>,
) -> Result<DistVector<S>> {
    let desc = &f.lower.desc;
    if b.desc.g_rows != desc.g_rows || b.desc.mb != desc.mb {
        return Err(Error::DescriptorMismatch(
            "chol_solve: right-hand side not conformal with the factor".into(),
        ));
    }
    let mut x = crate::distgrid::allgather_rows(t, b)?;
    dist_tri_solve_no_trans(t, be, &f.lower, &mut x, true, false)?;
    dist_tri_solve_lower_trans(t, be, &f.lower, &mut x)?;
    DistVector::from_global(b.desc.clone(), &x)
}
