//! Direct solvers: blocked LU with partial pivoting (delayed rank-k
//! updating), blocked Cholesky, their distributed variants, and the
//! two-step triangular-solve drivers.
//!
//! The blocked factorizations are right-looking: factor a panel, apply its
//! row interchanges across the remaining columns, form the U block row with
//! a triangular solve, then fold the k deferred rank-1 updates into a single
//! rank-k `gemm` on the trailing submatrix.

use crate::backend::Backend;
use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::kernels::{self, TriangleSpec};
use crate::scalar::Scalar;

mod dist;

pub use dist::{
    chol_factor_dist, chol_solve_dist, lu_factor_dist, lu_solve_dist, DistCholFactor,
    DistLuFactors,
};

/// Packed LU factors: L in the strict lower triangle (unit diagonal
/// implied), U in the upper triangle, plus the pivot swap sequence.
#[derive(Debug, Clone)]
pub struct LuFactors<S> {
    pub packed: DenseMatrix<S>,
    pub pivots: Vec<usize>,
}

/// Lower Cholesky factor; entries above the diagonal are unspecified.
#[derive(Debug, Clone)]
pub struct CholFactor<S> {
    pub lower: DenseMatrix<S>,
}

/// Blocked LU factorization with partial pivoting, in place.
///
/// Produces exactly the pivot sequence of the unblocked [`kernels::getf2`]
/// (identical tie rule), and is bitwise equal to it when `nb >= n`.
pub fn lu_factor_blocked<S: Scalar>(
    be: &mut Backend,
    a: &mut DenseMatrix<S>,
    nb: usize,
) -> Result<LuFactors<S>> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "lu_factor: matrix must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if nb == 0 {
        return Err(Error::DimensionMismatch("lu_factor: block size must be >= 1".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(LuFactors {
            packed: a.clone(),
            pivots: Vec::new(),
        });
    }
    let mut pivots = vec![0usize; n];
    let mut j = 0;
    while j < n {
        let jb = nb.min(n - j);
        // factor the panel on a tight copy
        let mut panel = a.copy_block(j, j, n - j, jb);
        let local_piv = kernels::getf2(be, &mut panel)?;
        for (k, &p) in local_piv.iter().enumerate() {
            pivots[j + k] = p + j;
        }
        // interchanges across the full width; the panel columns of the
        // swapped rows are rewritten by the write-back just after
        kernels::laswp(be, a, &pivots, j, j + jb)?;
        a.write_block(j, j, &panel);

        if j + jb < n {
            // U block row: solve L11 * U12 = A12
            let l11 = a.copy_block(j, j, jb, jb);
            let mut u12 = a.copy_block(j, j + jb, jb, n - j - jb);
            kernels::trsm(be, TriangleSpec::left_lower(true), S::ONE, &l11, &mut u12)?;
            a.write_block(j, j + jb, &u12);
            // trailing update: A22 -= L21 * U12
            let l21 = a.copy_block(j + jb, j, n - j - jb, jb);
            let mut a22 = a.copy_block(j + jb, j + jb, n - j - jb, n - j - jb);
            kernels::gemm(be, -S::ONE, &l21, &u12, S::ONE, &mut a22, false, false)?;
            a.write_block(j + jb, j + jb, &a22);
        }
        j += jb;
    }
    Ok(LuFactors {
        packed: a.clone(),
        pivots,
    })
}

/// Blocked lower Cholesky, in place on the lower triangle. Only the lower
/// triangle of `a` is read; the trailing updates run block column by block
/// column so only at-or-below-diagonal blocks are touched.
pub fn chol_factor_blocked<S: Scalar>(
    be: &mut Backend,
    a: &mut DenseMatrix<S>,
    nb: usize,
) -> Result<CholFactor<S>> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "chol_factor: matrix must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if nb == 0 {
        return Err(Error::DimensionMismatch("chol_factor: block size must be >= 1".into()));
    }
    let n = a.rows();
    let mut j = 0;
    while j < n {
        let jb = nb.min(n - j);
        let mut a11 = a.copy_block(j, j, jb, jb);
        kernels::potf2(be, &mut a11).map_err(|e| match e {
            Error::NotSpd { col } => Error::NotSpd { col: col + j },
            other => other,
        })?;
        a.write_block(j, j, &a11);

        if j + jb < n {
            // panel below the diagonal block: A21 <- A21 * L11^-T
            let mut a21 = a.copy_block(j + jb, j, n - j - jb, jb);
            let spec = TriangleSpec {
                side: kernels::Side::Right,
                uplo: kernels::Uplo::Lower,
                unit_diag: false,
                transpose: true,
            };
            kernels::trsm(be, spec, S::ONE, &a11, &mut a21)?;
            a.write_block(j + jb, j, &a21);

            // symmetric rank-jb update of the trailing lower triangle, one
            // block column at a time: a full gemm for the rows below each
            // diagonal block, column-wise gemv inside the diagonal block so
            // nothing above the diagonal is ever touched or counted
            let mut c = j + jb;
            while c < n {
                let w = nb.min(n - c);
                if c + w < n {
                    let below = a.copy_block(c + w, j, n - c - w, jb);
                    let cols = a.copy_block(c, j, w, jb);
                    let mut block = a.copy_block(c + w, c, n - c - w, w);
                    kernels::gemm(be, -S::ONE, &below, &cols, S::ONE, &mut block, false, true)?;
                    a.write_block(c + w, c, &block);
                }
                for jj in 0..w {
                    let rows = a.copy_block(c + jj, j, w - jj, jb);
                    let pivot_row = a.copy_block(c + jj, j, 1, jb).transposed().into_vector();
                    let mut seg = a.copy_block(c + jj, c + jj, w - jj, 1).into_vector();
                    kernels::gemv(be, -S::ONE, &rows, &pivot_row, S::ONE, &mut seg, false)?;
                    a.write_block(c + jj, c + jj, &seg.to_matrix());
                }
                c += w;
            }
        }
        j += jb;
    }
    Ok(CholFactor { lower: a.clone() })
}

/// Two-step direct solve from LU factors: apply the pivots to b, forward-
/// substitute `L y = P b`, back-substitute `U x = y`.
pub fn lu_solve<S: Scalar>(
    be: &mut Backend,
    f: &LuFactors<S>,
    b: &DenseVector<S>,
) -> Result<DenseVector<S>> {
    let n = f.packed.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "lu_solve: factor is {n}x{n}, b has length {}",
            b.len()
        )));
    }
    let mut x = b.to_matrix();
    kernels::laswp(be, &mut x, &f.pivots, 0, n)?;
    kernels::trsm(be, TriangleSpec::left_lower(true), S::ONE, &f.packed, &mut x)?;
    kernels::trsm(be, TriangleSpec::left_upper(false), S::ONE, &f.packed, &mut x)?;
    Ok(x.into_vector())
}

/// Two-step direct solve from a Cholesky factor: `L y = b`, `L^T x = y`.
pub fn chol_solve<S: Scalar>(
    be: &mut Backend,
    f: &CholFactor<S>,
    b: &DenseVector<S>,
) -> Result<DenseVector<S>> {
    let n = f.lower.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "chol_solve: factor is {n}x{n}, b has length {}",
            b.len()
        )));
    }
    let mut x = b.to_matrix();
    kernels::trsm(be, TriangleSpec::left_lower(false), S::ONE, &f.lower, &mut x)?;
    kernels::trsm(
        be,
        TriangleSpec::left_lower(false).transposed(),
        S::ONE,
        &f.lower,
        &mut x,
    )?;
    Ok(x.into_vector())
}

/// Residual `||b - A x||_2 / ||b||_2` computed straight from definitions;
/// shared by the drivers and the test oracles.
pub fn relative_residual<S: Scalar>(
    be: &mut Backend,
    a: &DenseMatrix<S>,
    x: &DenseVector<S>,
    b: &DenseVector<S>,
) -> Result<f64> {
    let mut r = b.clone();
    kernels::gemv(be, -S::ONE, a, x, S::ONE, &mut r, false)?;
    let rn = kernels::nrm2(be, &r)?.to_f64();
    let bn = kernels::nrm2(be, b)?.to_f64();
    Ok(if bn == 0.0 { rn } else { rn / bn })
}
