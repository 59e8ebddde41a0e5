//! Local single-rank kernels: the BLAS subset and unblocked factorizations
//! everything else composes.
//!
//! Every kernel routes through [`Backend::stage_execute`], so the same code
//! serves the in-place and the staged (device-simulating) execution paths.
//! Flop accounting counts multiplies and adds as separate operations;
//! divisions and square roots count one each; comparisons and swaps are free.

use crate::backend::{Backend, HostOut, LaunchLayout};
use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{dim_err, Result};
use crate::scalar::Scalar;

/// Monotone counter of floating-point operations, owned by a [`Backend`].
#[derive(Debug, Clone, Default)]
pub struct FlopCounter {
    accumulated: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        FlopCounter { accumulated: 0 }
    }

    pub fn add(&mut self, n: u64) {
        self.accumulated += n;
    }

    pub fn count(&self) -> u64 {
        self.accumulated
    }

    pub fn reset(&mut self) {
        self.accumulated = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uplo {
    Lower,
    Upper,
}

/// Which triangle of the coefficient matrix a [`trsm`] reads and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriangleSpec {
    pub side: Side,
    pub uplo: Uplo,
    pub unit_diag: bool,
    pub transpose: bool,
}

impl TriangleSpec {
    pub fn left_lower(unit_diag: bool) -> Self {
        TriangleSpec {
            side: Side::Left,
            uplo: Uplo::Lower,
            unit_diag,
            transpose: false,
        }
    }

    pub fn left_upper(unit_diag: bool) -> Self {
        TriangleSpec {
            side: Side::Left,
            uplo: Uplo::Upper,
            unit_diag,
            transpose: false,
        }
    }

    pub fn transposed(mut self) -> Self {
        self.transpose = !self.transpose;
        self
    }
}

/// y <- alpha * x + y
pub fn axpy<S: Scalar>(
    be: &mut Backend,
    alpha: S,
    x: &DenseVector<S>,
    y: &mut DenseVector<S>,
) -> Result<()> {
    if x.len() != y.len() {
        return dim_err(format!("axpy: x len {} vs y len {}", x.len(), y.len()));
    }
    let n = x.len();
    be.stage_execute(
        LaunchLayout::for_elements(n),
        n,
        &[x.as_slice()],
        &mut [HostOut {
            data: y.as_mut_slice(),
            upload: true,
        }],
        |ins, outs| {
            raw::axpy(alpha, ins[0], outs[0]);
            Ok(())
        },
    )?;
    be.add_flops(2 * n as u64);
    Ok(())
}

/// Inner product of x and y.
pub fn dot<S: Scalar>(be: &mut Backend, x: &DenseVector<S>, y: &DenseVector<S>) -> Result<S> {
    if x.len() != y.len() {
        return dim_err(format!("dot: x len {} vs y len {}", x.len(), y.len()));
    }
    let n = x.len();
    let mut result = [S::ZERO];
    be.stage_execute(
        LaunchLayout::for_elements(n),
        n,
        &[x.as_slice(), y.as_slice()],
        &mut [HostOut {
            data: &mut result,
            upload: false,
        }],
        |ins, outs| {
            outs[0][0] = raw::dot(ins[0], ins[1]);
            Ok(())
        },
    )?;
    be.add_flops(2 * n as u64);
    Ok(result[0])
}

/// Euclidean norm, computed as plain sqrt of the sum of squares (no
/// rescaling; documented limitation for f32 at extreme magnitudes).
pub fn nrm2<S: Scalar>(be: &mut Backend, x: &DenseVector<S>) -> Result<S> {
    let n = x.len();
    let mut result = [S::ZERO];
    be.stage_execute(
        LaunchLayout::for_elements(n),
        n,
        &[x.as_slice()],
        &mut [HostOut {
            data: &mut result,
            upload: false,
        }],
        |ins, outs| {
            outs[0][0] = raw::dot(ins[0], ins[0]).sqrt();
            Ok(())
        },
    )?;
    be.add_flops(2 * n as u64 + 1);
    Ok(result[0])
}

/// y <- alpha * op(A) * x + beta * y where op is identity or transpose.
pub fn gemv<S: Scalar>(
    be: &mut Backend,
    alpha: S,
    a: &DenseMatrix<S>,
    x: &DenseVector<S>,
    beta: S,
    y: &mut DenseVector<S>,
    transpose: bool,
) -> Result<()> {
    let (opm, opn) = if transpose {
        (a.cols(), a.rows())
    } else {
        (a.rows(), a.cols())
    };
    if x.len() != opn || y.len() != opm {
        return dim_err(format!(
            "gemv: op(A) {}x{} with x len {} and y len {}",
            opm,
            opn,
            x.len(),
            y.len()
        ));
    }
    let (m, n, lda) = (a.rows(), a.cols(), a.lead());
    be.stage_execute(
        LaunchLayout::for_elements(opm),
        opm,
        &[a.data(), x.as_slice()],
        &mut [HostOut {
            data: y.as_mut_slice(),
            upload: beta != S::ZERO,
        }],
        |ins, outs| {
            raw::gemv(m, n, lda, alpha, ins[0], ins[1], beta, outs[0], transpose);
            Ok(())
        },
    )?;
    let mut flops = 2 * (m as u64) * (n as u64);
    if beta != S::ZERO && beta != S::ONE {
        flops += opm as u64;
    }
    be.add_flops(flops);
    Ok(())
}

/// C <- alpha * op(A) * op(B) + beta * C
pub fn gemm<S: Scalar>(
    be: &mut Backend,
    alpha: S,
    a: &DenseMatrix<S>,
    b: &DenseMatrix<S>,
    beta: S,
    c: &mut DenseMatrix<S>,
    trans_a: bool,
    trans_b: bool,
) -> Result<()> {
    let (m, ka) = if trans_a {
        (a.cols(), a.rows())
    } else {
        (a.rows(), a.cols())
    };
    let (kb, n) = if trans_b {
        (b.cols(), b.rows())
    } else {
        (b.rows(), b.cols())
    };
    if ka != kb || c.rows() != m || c.cols() != n {
        return dim_err(format!(
            "gemm: op(A) {m}x{ka}, op(B) {kb}x{n}, C {}x{}",
            c.rows(),
            c.cols()
        ));
    }
    let (lda, ldb, ldc) = (a.lead(), b.lead(), c.lead());
    let (am, bm, cm) = (a.rows(), b.rows(), c.rows());
    be.stage_execute(
        LaunchLayout::for_elements(m * n),
        m * n,
        &[a.data(), b.data()],
        &mut [HostOut {
            data: c.data_mut(),
            upload: beta != S::ZERO,
        }],
        |ins, outs| {
            raw::gemm(
                m, n, ka, alpha, ins[0], am, lda, trans_a, ins[1], bm, ldb, trans_b, beta,
                outs[0], cm, ldc,
            );
            Ok(())
        },
    )?;
    be.add_flops(2 * m as u64 * n as u64 * ka as u64);
    Ok(())
}

/// B <- alpha * op(A)^-1 * B (Left) or alpha * B * op(A)^-1 (Right).
///
/// Only the `spec.uplo` triangle of A is read; a unit diagonal is implied
/// (and never read) when `spec.unit_diag` is set.
pub fn trsm<S: Scalar>(
    be: &mut Backend,
    spec: TriangleSpec,
    alpha: S,
    a: &DenseMatrix<S>,
    b: &mut DenseMatrix<S>,
) -> Result<()> {
    if a.rows() != a.cols() {
        return dim_err(format!("trsm: A must be square, got {}x{}", a.rows(), a.cols()));
    }
    let n = a.rows();
    let conforms = match spec.side {
        Side::Left => b.rows() == n,
        Side::Right => b.cols() == n,
    };
    if !conforms {
        return dim_err(format!(
            "trsm: A {n}x{n} does not conform to B {}x{} on that side",
            b.rows(),
            b.cols()
        ));
    }
    let (bm, bn, lda, ldb) = (b.rows(), b.cols(), a.lead(), b.lead());
    let elems = bm * bn;
    be.stage_execute(
        LaunchLayout::for_elements(elems),
        elems,
        &[a.data()],
        &mut [HostOut {
            data: b.data_mut(),
            upload: true,
        }],
        |ins, outs| raw::trsm(spec, alpha, n, ins[0], lda, bm, bn, outs[0], ldb),
    )?;
    let nrhs = match spec.side {
        Side::Left => bn,
        Side::Right => bm,
    } as u64;
    let nn = n as u64;
    let mut flops = nrhs * nn * (nn.saturating_sub(1));
    if !spec.unit_diag {
        flops += nrhs * nn;
    }
    if alpha != S::ONE {
        flops += nrhs * nn;
    }
    be.add_flops(flops);
    Ok(())
}

/// Unblocked LU factorization with partial pivoting of an `m x n` panel,
/// `m >= n`. On return the strict lower trapezoid holds L (unit diagonal
/// implied) and the upper triangle holds U; `pivots[k]` is the row index
/// (>= k) swapped with row k at step k.
pub fn getf2<S: Scalar>(be: &mut Backend, a: &mut DenseMatrix<S>) -> Result<Vec<usize>> {
    let (m, n) = (a.rows(), a.cols());
    if m < n || n == 0 {
        return dim_err(format!("getf2: panel must be m x n with m >= n >= 1, got {m}x{n}"));
    }
    let lda = a.lead();
    let mut pivots = Vec::with_capacity(n);
    be.stage_execute(
        LaunchLayout::for_elements(m * n),
        m * n,
        &[],
        &mut [HostOut {
            data: a.data_mut(),
            upload: true,
        }],
        |_, outs| raw::getf2(m, n, outs[0], lda, &mut pivots),
    )?;
    let mut flops = 0u64;
    for k in 0..n as u64 {
        let below = m as u64 - k - 1;
        flops += below + 2 * below * (n as u64 - k - 1);
    }
    be.add_flops(flops);
    Ok(pivots)
}

/// Unblocked lower Cholesky: overwrites the lower triangle of `a` with L so
/// that L * L^T equals the original matrix. Only the lower triangle is read;
/// entries above the diagonal are left untouched.
pub fn potf2<S: Scalar>(be: &mut Backend, a: &mut DenseMatrix<S>) -> Result<()> {
    if a.rows() != a.cols() {
        return dim_err(format!("potf2: matrix must be square, got {}x{}", a.rows(), a.cols()));
    }
    let n = a.rows();
    let lda = a.lead();
    be.stage_execute(
        LaunchLayout::for_elements(n * n),
        n * n,
        &[],
        &mut [HostOut {
            data: a.data_mut(),
            upload: true,
        }],
        |_, outs| raw::potf2(n, outs[0], lda),
    )?;
    let mut flops = 0u64;
    for k in 0..n as u64 {
        let below = n as u64 - k - 1;
        flops += 1 + below; // sqrt + column scale
        for j in (k + 1)..n as u64 {
            flops += 2 * (n as u64 - j);
        }
    }
    be.add_flops(flops);
    Ok(())
}

/// Applies row interchanges in order `k = first..last`: swap(row k,
/// row pivots[k]). Swaps are free in the flop accounting.
pub fn laswp<S: Scalar>(
    be: &mut Backend,
    a: &mut DenseMatrix<S>,
    pivots: &[usize],
    first: usize,
    last: usize,
) -> Result<()> {
    if last > pivots.len() || first > last {
        return dim_err(format!(
            "laswp: range {first}..{last} out of pivot list of length {}",
            pivots.len()
        ));
    }
    let rows = a.rows();
    for k in first..last {
        if k >= rows || pivots[k] >= rows {
            return dim_err(format!(
                "laswp: swap ({k}, {}) out of row range {rows}",
                pivots[k]
            ));
        }
    }
    let (m, n, lda) = (a.rows(), a.cols(), a.lead());
    let swaps: Vec<(usize, usize)> = (first..last).map(|k| (k, pivots[k])).collect();
    be.stage_execute(
        LaunchLayout::for_elements(m * n),
        m * n,
        &[],
        &mut [HostOut {
            data: a.data_mut(),
            upload: true,
        }],
        |_, outs| {
            for &(r1, r2) in &swaps {
                if r1 != r2 {
                    for j in 0..n {
                        outs[0].swap(r1 + j * lda, r2 + j * lda);
                    }
                }
            }
            Ok(())
        },
    )?;
    Ok(())
}

mod raw {
    use super::{Side, TriangleSpec, Uplo};
    use crate::error::{Error, Result};
    use crate::scalar::Scalar;

    pub fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }

    pub fn dot<S: Scalar>(x: &[S], y: &[S]) -> S {
        let mut acc = S::ZERO;
        for (&xi, &yi) in x.iter().zip(y) {
            acc += xi * yi;
        }
        acc
    }

    fn scale<S: Scalar>(beta: S, y: &mut [S]) {
        if beta == S::ZERO {
            y.fill(S::ZERO);
        } else if beta != S::ONE {
            for v in y {
                *v *= beta;
            }
        }
    }

    pub fn gemv<S: Scalar>(
        m: usize,
        n: usize,
        lda: usize,
        alpha: S,
        a: &[S],
        x: &[S],
        beta: S,
        y: &mut [S],
        transpose: bool,
    ) {
        if transpose {
            // y[j] = beta*y[j] + alpha * <A[:,j], x>
            scale(beta, &mut y[..n]);
            for j in 0..n {
                let col = &a[j * lda..j * lda + m];
                y[j] += alpha * dot(col, &x[..m]);
            }
        } else {
            scale(beta, &mut y[..m]);
            for j in 0..n {
                let s = alpha * x[j];
                let col = &a[j * lda..j * lda + m];
                for i in 0..m {
                    y[i] += s * col[i];
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn gemm<S: Scalar>(
        m: usize,
        n: usize,
        k: usize,
        alpha: S,
        a: &[S],
        a_rows: usize,
        lda: usize,
        trans_a: bool,
        b: &[S],
        b_rows: usize,
        ldb: usize,
        trans_b: bool,
        beta: S,
        c: &mut [S],
        c_rows: usize,
        ldc: usize,
    ) {
        let _ = (a_rows, b_rows, c_rows);
        for j in 0..n {
            scale(beta, &mut c[j * ldc..j * ldc + m]);
        }
        let b_at = |l: usize, j: usize| -> S {
            if trans_b {
                b[j + l * ldb]
            } else {
                b[l + j * ldb]
            }
        };
        if trans_a {
            // dot-product form: both A columns and (for !trans_b) B columns stream
            for j in 0..n {
                for i in 0..m {
                    let acol = &a[i * lda..i * lda + k];
                    let mut acc = S::ZERO;
                    if trans_b {
                        for (l, &av) in acol.iter().enumerate() {
                            acc += av * b[j + l * ldb];
                        }
                    } else {
                        acc = dot(acol, &b[j * ldb..j * ldb + k]);
                    }
                    c[i + j * ldc] += alpha * acc;
                }
            }
        } else {
            // saxpy form: C and A columns stream contiguously
            for j in 0..n {
                for l in 0..k {
                    let s = alpha * b_at(l, j);
                    let acol = &a[l * lda..l * lda + m];
                    let ccol = &mut c[j * ldc..j * ldc + m];
                    for i in 0..m {
                        ccol[i] += s * acol[i];
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn trsm<S: Scalar>(
        spec: TriangleSpec,
        alpha: S,
        n: usize,
        a: &[S],
        lda: usize,
        bm: usize,
        bn: usize,
        b: &mut [S],
        ldb: usize,
    ) -> Result<()> {
        let diag = |k: usize| -> Result<S> {
            let d = a[k + k * lda];
            if d == S::ZERO {
                Err(Error::SingularPivot { col: k })
            } else {
                Ok(d)
            }
        };
        if alpha != S::ONE {
            for j in 0..bn {
                for v in &mut b[j * ldb..j * ldb + bm] {
                    *v *= alpha;
                }
            }
        }
        match (spec.side, spec.uplo, spec.transpose) {
            (Side::Left, Uplo::Lower, false) => {
                // forward substitution, column sweep of A
                for c in 0..bn {
                    let bcol = c * ldb;
                    for k in 0..n {
                        if !spec.unit_diag {
                            b[bcol + k] /= diag(k)?;
                        }
                        let bk = b[bcol + k];
                        let acol = &a[k * lda..k * lda + n];
                        for i in k + 1..n {
                            b[bcol + i] -= acol[i] * bk;
                        }
                    }
                }
            }
            (Side::Left, Uplo::Upper, false) => {
                for c in 0..bn {
                    let bcol = c * ldb;
                    for k in (0..n).rev() {
                        if !spec.unit_diag {
                            b[bcol + k] /= diag(k)?;
                        }
                        let bk = b[bcol + k];
                        let acol = &a[k * lda..];
                        for i in 0..k {
                            b[bcol + i] -= acol[i] * bk;
                        }
                    }
                }
            }
            (Side::Left, Uplo::Lower, true) => {
                // L^T x = b: back substitution using columns of L
                for c in 0..bn {
                    let bcol = c * ldb;
                    for k in (0..n).rev() {
                        let acol = &a[k * lda..k * lda + n];
                        let mut s = b[bcol + k];
                        for i in k + 1..n {
                            s -= acol[i] * b[bcol + i];
                        }
                        b[bcol + k] = if spec.unit_diag { s } else { s / diag(k)? };
                    }
                }
            }
            (Side::Left, Uplo::Upper, true) => {
                // U^T x = b: forward substitution using columns of U
                for c in 0..bn {
                    let bcol = c * ldb;
                    for k in 0..n {
                        let acol = &a[k * lda..];
                        let mut s = b[bcol + k];
                        for i in 0..k {
                            s -= acol[i] * b[bcol + i];
                        }
                        b[bcol + k] = if spec.unit_diag { s } else { s / diag(k)? };
                    }
                }
            }
            (Side::Right, Uplo::Lower, false) => {
                // X L = B: solve columns right to left
                for j in (0..n).rev() {
                    for k in j + 1..n {
                        let l_kj = a[k + j * lda];
                        if l_kj != S::ZERO {
                            for i in 0..bm {
                                let xv = b[i + k * ldb];
                                b[i + j * ldb] -= xv * l_kj;
                            }
                        }
                    }
                    if !spec.unit_diag {
                        let d = diag(j)?;
                        for i in 0..bm {
                            b[i + j * ldb] /= d;
                        }
                    }
                }
            }
            (Side::Right, Uplo::Lower, true) => {
                // X L^T = B: solve columns left to right
                for j in 0..n {
                    for k in 0..j {
                        let l_jk = a[j + k * lda];
                        if l_jk != S::ZERO {
                            for i in 0..bm {
                                let xv = b[i + k * ldb];
                                b[i + j * ldb] -= xv * l_jk;
                            }
                        }
                    }
                    if !spec.unit_diag {
                        let d = diag(j)?;
                        for i in 0..bm {
                            b[i + j * ldb] /= d;
                        }
                    }
                }
            }
            (Side::Right, Uplo::Upper, false) => {
                // X U = B: solve columns left to right
                for j in 0..n {
                    for k in 0..j {
                        let u_kj = a[k + j * lda];
                        if u_kj != S::ZERO {
                            for i in 0..bm {
                                let xv = b[i + k * ldb];
                                b[i + j * ldb] -= xv * u_kj;
                            }
                        }
                    }
                    if !spec.unit_diag {
                        let d = diag(j)?;
                        for i in 0..bm {
                            b[i + j * ldb] /= d;
                        }
                    }
                }
            }
            (Side::Right, Uplo::Upper, true) => {
                // X U^T = B: solve columns right to left
                for j in (0..n).rev() {
                    for k in j + 1..n {
                        let u_jk = a[j + k * lda];
                        if u_jk != S::ZERO {
                            for i in 0..bm {
                                let xv = b[i + k * ldb];
                                b[i + j * ldb] -= xv * u_jk;
                            }
                        }
                    }
                    if !spec.unit_diag {
                        let d = diag(j)?;
                        for i in 0..bm {
                            b[i + j * ldb] /= d;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn getf2<S: Scalar>(
        m: usize,
        n: usize,
        a: &mut [S],
        lda: usize,
        pivots: &mut Vec<usize>,
    ) -> Result<()> {
        for k in 0..n {
            // pivot: smallest row index among maximal |value|
            let mut p = k;
            let mut best = a[k + k * lda].abs();
            for i in k + 1..m {
                let v = a[i + k * lda].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == S::ZERO {
                return Err(Error::SingularPivot { col: k });
            }
            pivots.push(p);
            if p != k {
                for j in 0..n {
                    a.swap(k + j * lda, p + j * lda);
                }
            }
            let d = a[k + k * lda];
            for i in k + 1..m {
                a[i + k * lda] /= d;
            }
            for j in k + 1..n {
                let akj = a[k + j * lda];
                let (lcol, ucol) = (k * lda, j * lda);
                for i in k + 1..m {
                    let lik = a[i + lcol];
                    a[i + ucol] -= lik * akj;
                }
            }
        }
        Ok(())
    }

    pub fn potf2<S: Scalar>(n: usize, a: &mut [S], lda: usize) -> Result<()> {
        for k in 0..n {
            let d = a[k + k * lda];
            if d <= S::ZERO {
                return Err(Error::NotSpd { col: k });
            }
            let d = d.sqrt();
            a[k + k * lda] = d;
            for i in k + 1..n {
                a[i + k * lda] /= d;
            }
            for j in k + 1..n {
                let ajk = a[j + k * lda];
                for i in j..n {
                    let lik = a[i + k * lda];
                    a[i + j * lda] -= lik * ajk;
                }
            }
        }
        Ok(())
    }
}
