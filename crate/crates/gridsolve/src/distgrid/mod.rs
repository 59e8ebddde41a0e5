//! Data distribution layer: 2D process grid, block-cyclic descriptors,
//! distributed containers, and the distributed BLAS building blocks.
//!
//! Matrices are dealt out block-cyclically over a `p_rows x p_cols` grid.
//! Vectors are distributed over grid rows conformally with matrix rows and
//! replicated across grid columns, which makes the distributed matvec one
//! local gemv plus a single row-group reduction, and keeps vector updates
//! purely local.

use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transport::{wire, CommGroup, RankId, ReduceOp, Transport};

mod ops;

pub use ops::{dist_axpy, dist_copy, dist_dot, dist_matvec, dist_matvec_transpose, dist_norm2};
pub(crate) use ops::allgather_rows;

/// Logical 2D mesh of ranks with row-major rank placement: rank `r` sits at
/// grid coordinates `(r / p_cols, r % p_cols)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcGrid {
    p_rows: usize,
    p_cols: usize,
    my_row: usize,
    my_col: usize,
    row_group: CommGroup,
    col_group: CommGroup,
    world_group: CommGroup,
}

impl ProcGrid {
    pub fn new<T: Transport>(t: &T, p_rows: usize, p_cols: usize) -> Result<Self> {
        if p_rows * p_cols != t.world_size() {
            return Err(Error::DescriptorMismatch(format!(
                "grid {p_rows}x{p_cols} needs {} ranks, launch has {}",
                p_rows * p_cols,
                t.world_size()
            )));
        }
        let me = t.rank();
        let my_row = me / p_cols;
        let my_col = me % p_cols;
        let row_members: Vec<RankId> = (0..p_cols).map(|c| my_row * p_cols + c).collect();
        let col_members: Vec<RankId> = (0..p_rows).map(|r| r * p_cols + my_col).collect();
        let world_members: Vec<RankId> = (0..t.world_size()).collect();
        Ok(ProcGrid {
            p_rows,
            p_cols,
            my_row,
            my_col,
            row_group: CommGroup::new(row_members, me)?,
            col_group: CommGroup::new(col_members, me)?,
            world_group: CommGroup::new(world_members, me)?,
        })
    }

    pub fn p_rows(&self) -> usize {
        self.p_rows
    }
    pub fn p_cols(&self) -> usize {
        self.p_cols
    }
    pub fn my_row(&self) -> usize {
        self.my_row
    }
    pub fn my_col(&self) -> usize {
        self.my_col
    }

    /// Ranks sharing this rank's grid row, ordered by grid column.
    pub fn row_group(&self) -> &CommGroup {
        &self.row_group
    }

    /// Ranks sharing this rank's grid column, ordered by grid row.
    pub fn col_group(&self) -> &CommGroup {
        &self.col_group
    }

    pub fn world_group(&self) -> &CommGroup {
        &self.world_group
    }

    pub fn rank_at(&self, row: usize, col: usize) -> RankId {
        debug_assert!(row < self.p_rows && col < self.p_cols);
        row * self.p_cols + col
    }

    pub fn is_root(&self) -> bool {
        self.my_row == 0 && self.my_col == 0
    }
}

/// Number of global indices a coordinate owns under block-cyclic
/// distribution with blocks of `blk` dealt from process 0.
pub fn local_extent(g: usize, blk: usize, p: usize, coord: usize) -> usize {
    assert!(blk >= 1 && coord < p, "local_extent: blk {blk}, coord {coord}, p {p}");
    let full_blocks = g / blk;
    let mut n = (full_blocks / p) * blk;
    let extra = full_blocks % p;
    if coord < extra {
        n += blk;
    } else if coord == extra {
        n += g % blk;
    }
    n
}

/// Block-cyclic distribution descriptor: global shape, block shape, and the
/// grid it is dealt over. Identical on every rank (checked collectively at
/// creation).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCyclicDesc {
    pub g_rows: usize,
    pub g_cols: usize,
    pub mb: usize,
    pub nb: usize,
    pub grid: ProcGrid,
}

impl BlockCyclicDesc {
    /// Collective constructor: every rank passes the same shape, verified by
    /// comparing against rank 0's broadcast.
    pub fn new<T: Transport>(
        t: &T,
        grid: &ProcGrid,
        g_rows: usize,
        g_cols: usize,
        mb: usize,
        nb: usize,
    ) -> Result<Self> {
        if mb == 0 || nb == 0 {
            return Err(Error::DescriptorMismatch(format!(
                "block sizes must be >= 1, got {mb}x{nb}"
            )));
        }
        let mine = [g_rows as u64, g_cols as u64, mb as u64, nb as u64];
        let mut payload = Vec::with_capacity(32);
        for v in mine {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        let theirs = t.broadcast(grid.world_group(), 0, &payload)?;
        let matches = theirs == payload;
        let all_match =
            t.allreduce_scalar(grid.world_group(), ReduceOp::Max, if matches { 0.0f64 } else { 1.0 })?;
        if all_match != 0.0 {
            return Err(Error::DescriptorMismatch(
                "ranks disagree on descriptor shape".into(),
            ));
        }
        Ok(BlockCyclicDesc {
            g_rows,
            g_cols,
            mb,
            nb,
            grid: grid.clone(),
        })
    }

    /// Grid coordinates of the rank owning global element `(i, j)`.
    pub fn owner(&self, i: usize, j: usize) -> (usize, usize) {
        debug_assert!(i < self.g_rows && j < self.g_cols);
        ((i / self.mb) % self.grid.p_rows, (j / self.nb) % self.grid.p_cols)
    }

    /// Local indices of global `(i, j)` on its owning rank.
    pub fn global_to_local(&self, i: usize, j: usize) -> Result<(usize, usize)> {
        if self.owner(i, j) != (self.grid.my_row, self.grid.my_col) {
            return Err(Error::DescriptorMismatch(format!(
                "global ({i},{j}) is owned by {:?}, not this rank {:?}",
                self.owner(i, j),
                (self.grid.my_row, self.grid.my_col)
            )));
        }
        Ok((self.local_row_unchecked(i), self.local_col_unchecked(j)))
    }

    pub(crate) fn local_row_unchecked(&self, i: usize) -> usize {
        (i / (self.mb * self.grid.p_rows)) * self.mb + i % self.mb
    }

    pub(crate) fn local_col_unchecked(&self, j: usize) -> usize {
        (j / (self.nb * self.grid.p_cols)) * self.nb + j % self.nb
    }

    /// Global row index of local row `li` on this rank.
    pub fn local_to_global_row(&self, li: usize) -> usize {
        (li / self.mb * self.grid.p_rows + self.grid.my_row) * self.mb + li % self.mb
    }

    pub fn local_to_global_col(&self, lj: usize) -> usize {
        (lj / self.nb * self.grid.p_cols + self.grid.my_col) * self.nb + lj % self.nb
    }

    /// Global row index of local row `li` as seen by proc row `coord`.
    pub fn local_to_global_row_at(&self, li: usize, coord: usize) -> usize {
        (li / self.mb * self.grid.p_rows + coord) * self.mb + li % self.mb
    }

    pub fn local_to_global_col_at(&self, lj: usize, coord: usize) -> usize {
        (lj / self.nb * self.grid.p_cols + coord) * self.nb + lj % self.nb
    }

    /// This rank's local storage shape.
    pub fn local_shape(&self) -> (usize, usize) {
        (
            local_extent(self.g_rows, self.mb, self.grid.p_rows, self.grid.my_row),
            local_extent(self.g_cols, self.nb, self.grid.p_cols, self.grid.my_col),
        )
    }

    /// Local storage shape on an arbitrary grid coordinate.
    pub fn local_shape_at(&self, row: usize, col: usize) -> (usize, usize) {
        (
            local_extent(self.g_rows, self.mb, self.grid.p_rows, row),
            local_extent(self.g_cols, self.nb, self.grid.p_cols, col),
        )
    }

    /// Number of this rank's local rows whose global index is below `g`.
    /// Because local storage is ordered by global index, this is also the
    /// local index where global row `g` (or its successor) begins.
    pub fn local_rows_below(&self, g: usize) -> usize {
        local_extent(g.min(self.g_rows), self.mb, self.grid.p_rows, self.grid.my_row)
    }

    pub fn local_cols_below(&self, g: usize) -> usize {
        local_extent(g.min(self.g_cols), self.nb, self.grid.p_cols, self.grid.my_col)
    }

    /// `local_rows_below` evaluated for an arbitrary proc row.
    pub fn local_rows_below_at(&self, g: usize, coord: usize) -> usize {
        local_extent(g.min(self.g_rows), self.mb, self.grid.p_rows, coord)
    }

    pub(crate) fn same_layout(&self, other: &BlockCyclicDesc) -> bool {
        self.g_rows == other.g_rows
            && self.g_cols == other.g_cols
            && self.mb == other.mb
            && self.nb == other.nb
            && self.grid == other.grid
    }
}

/// Block-cyclically distributed dense matrix: descriptor plus this rank's
/// local block.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix<S> {
    pub desc: BlockCyclicDesc,
    pub local: DenseMatrix<S>,
}

impl<S: Scalar> DistMatrix<S> {
    pub fn zeros(desc: BlockCyclicDesc) -> Self {
        let (lr, lc) = desc.local_shape();
        DistMatrix {
            desc,
            local: DenseMatrix::zeros(lr, lc),
        }
    }

    /// Fills the local part from a full global matrix every rank holds.
    /// Purely local (no communication).
    pub fn from_global(desc: BlockCyclicDesc, global: &DenseMatrix<S>) -> Result<Self> {
        if global.rows() != desc.g_rows || global.cols() != desc.g_cols {
            return Err(Error::DimensionMismatch(format!(
                "global matrix {}x{} vs descriptor {}x{}",
                global.rows(),
                global.cols(),
                desc.g_rows,
                desc.g_cols
            )));
        }
        let mut dist = DistMatrix::zeros(desc);
        let (lr, lc) = (dist.local.rows(), dist.local.cols());
        for lj in 0..lc {
            let gj = dist.desc.local_to_global_col(lj);
            for li in 0..lr {
                let gi = dist.desc.local_to_global_row(li);
                dist.local.set(li, lj, global.get(gi, gj));
            }
        }
        Ok(dist)
    }
}

/// Distributed vector: distributed over grid rows conformally with matrix
/// rows, replicated across grid columns. Every rank in one grid row holds an
/// identical copy of that row's entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVector<S> {
    pub desc: BlockCyclicDesc,
    pub local: DenseVector<S>,
}

/// Descriptor for a length-`n` vector blocked like matrix rows with block
/// size `mb`. Collective, like every descriptor constructor.
pub fn vector_desc<T: Transport>(
    t: &T,
    grid: &ProcGrid,
    n: usize,
    mb: usize,
) -> Result<BlockCyclicDesc> {
    BlockCyclicDesc::new(t, grid, n, 1, mb, 1)
}

impl<S: Scalar> DistVector<S> {
    pub fn zeros(desc: BlockCyclicDesc) -> Self {
        let lr = local_extent(desc.g_rows, desc.mb, desc.grid.p_rows, desc.grid.my_row);
        DistVector {
            desc,
            local: DenseVector::zeros(lr),
        }
    }

    pub fn from_global(desc: BlockCyclicDesc, global: &DenseVector<S>) -> Result<Self> {
        if global.len() != desc.g_rows {
            return Err(Error::DimensionMismatch(format!(
                "global vector length {} vs descriptor {}",
                global.len(),
                desc.g_rows
            )));
        }
        let mut dist = DistVector::zeros(desc);
        for li in 0..dist.local.len() {
            let gi = dist.desc.local_to_global_row(li);
            dist.local.set(li, global.get(gi));
        }
        Ok(dist)
    }

    pub fn global_len(&self) -> usize {
        self.desc.g_rows
    }
}

const SCATTER_TAG: u64 = u64::MAX - 1;

/// Distributes a matrix held on the root (world rank 0) into block-cyclic
/// local pieces. Collective; non-root input is ignored.
pub fn scatter_matrix<S: Scalar, T: Transport>(
    t: &T,
    desc: &BlockCyclicDesc,
    root_matrix: Option<&DenseMatrix<S>>,
) -> Result<DistMatrix<S>> {
    let grid = &desc.grid;
    let root: RankId = 0;
    // root validates its input and tells everyone the verdict
    let status = if t.rank() == root {
        match root_matrix {
            Some(m) if m.rows() == desc.g_rows && m.cols() == desc.g_cols => vec![1u8],
            _ => vec![0u8],
        }
    } else {
        Vec::new()
    };
    let status = t.broadcast(grid.world_group(), root, &status)?;
    if status != [1] {
        return Err(Error::DimensionMismatch(
            "scatter: root matrix missing or its shape disagrees with the descriptor".into(),
        ));
    }

    if t.rank() == root {
        let m = root_matrix.unwrap();
        let mut own = None;
        for pr in 0..grid.p_rows {
            for pc in 0..grid.p_cols {
                let piece = extract_local_piece(desc, m, pr, pc);
                let dest = grid.rank_at(pr, pc);
                if dest == root {
                    own = Some(piece);
                } else {
                    t.send(dest, SCATTER_TAG, &wire::encode_matrix(&piece))?;
                }
            }
        }
        Ok(DistMatrix {
            desc: desc.clone(),
            local: own.expect("root owns a piece"),
        })
    } else {
        let bytes = t.recv(root, SCATTER_TAG)?;
        let local = wire::decode_matrix::<S>(&bytes)?;
        let expect = desc.local_shape();
        if (local.rows(), local.cols()) != expect {
            return Err(Error::DescriptorMismatch(format!(
                "scatter piece {}x{} vs expected {}x{}",
                local.rows(),
                local.cols(),
                expect.0,
                expect.1
            )));
        }
        Ok(DistMatrix {
            desc: desc.clone(),
            local,
        })
    }
}

/// Reassembles the global matrix on the root (world rank 0). Collective;
/// returns `Some` on the root, `None` elsewhere.
pub fn gather_matrix<S: Scalar, T: Transport>(
    t: &T,
    a: &DistMatrix<S>,
) -> Result<Option<DenseMatrix<S>>> {
    let grid = &a.desc.grid;
    let root: RankId = 0;
    if t.rank() == root {
        let mut global = DenseMatrix::zeros(a.desc.g_rows, a.desc.g_cols);
        for pr in 0..grid.p_rows {
            for pc in 0..grid.p_cols {
                let src = grid.rank_at(pr, pc);
                let piece = if src == root {
                    a.local.clone()
                } else {
                    wire::decode_matrix::<S>(&t.recv(src, SCATTER_TAG)?)?
                };
                place_local_piece(&a.desc, &mut global, &piece, pr, pc);
            }
        }
        Ok(Some(global))
    } else {
        t.send(root, SCATTER_TAG, &wire::encode_matrix(&a.local))?;
        Ok(None)
    }
}

/// Distributes a vector from the root, replicating across grid columns.
pub fn scatter_vector<S: Scalar, T: Transport>(
    t: &T,
    desc: &BlockCyclicDesc,
    root_vector: Option<&DenseVector<S>>,
) -> Result<DistVector<S>> {
    let grid = &desc.grid;
    let root: RankId = 0;
    let payload = if t.rank() == root {
        match root_vector {
            Some(v) if v.len() == desc.g_rows => wire::encode_vector(v),
            _ => Vec::new(),
        }
    } else {
        Vec::new()
    };
    let bytes = t.broadcast(grid.world_group(), root, &payload)?;
    if bytes.is_empty() {
        return Err(Error::DimensionMismatch(
            "scatter: root vector missing or its length disagrees with the descriptor".into(),
        ));
    }
    let global = wire::decode_vector::<S>(&bytes)?;
    DistVector::from_global(desc.clone(), &global)
}

/// Gathers a distributed vector onto the root (world rank 0).
pub fn gather_vector<S: Scalar, T: Transport>(
    t: &T,
    x: &DistVector<S>,
) -> Result<Option<DenseVector<S>>> {
    let full = ops::allgather_rows(t, x)?;
    Ok(if t.rank() == 0 { Some(full) } else { None })
}

fn extract_local_piece<S: Scalar>(
    desc: &BlockCyclicDesc,
    global: &DenseMatrix<S>,
    pr: usize,
    pc: usize,
) -> DenseMatrix<S> {
    let (lr, lc) = desc.local_shape_at(pr, pc);
    DenseMatrix::from_fn(lr, lc, |li, lj| {
        let gi = desc.local_to_global_row_at(li, pr);
        let gj = desc.local_to_global_col_at(lj, pc);
        global.get(gi, gj)
    })
}

fn place_local_piece<S: Scalar>(
    desc: &BlockCyclicDesc,
    global: &mut DenseMatrix<S>,
    piece: &DenseMatrix<S>,
    pr: usize,
    pc: usize,
) {
    for lj in 0..piece.cols() {
        let gj = desc.local_to_global_col_at(lj, pc);
        for li in 0..piece.rows() {
            let gi = desc.local_to_global_row_at(li, pr);
            global.set(gi, gj, piece.get(li, lj));
        }
    }
}

pub(crate) fn check_same_grid(a: &BlockCyclicDesc, b: &BlockCyclicDesc) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::DescriptorMismatch(format!(
            "grids differ: {}x{} vs {}x{}",
            a.grid.p_rows, a.grid.p_cols, b.grid.p_rows, b.grid.p_cols
        )));
    }
    Ok(())
}
