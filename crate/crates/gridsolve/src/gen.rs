//! Seeded test-problem generators.

use crate::backend::Backend;
use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::kernels;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

/// Dense matrix with entries uniform in `[0, 1)`.
pub fn random_dense<S: Scalar>(n: usize, seed: u64) -> DenseMatrix<S> {
    let mut rng = SplitMix64::new(seed);
    DenseMatrix::from_fn(n, n, |_, _| S::from_f64(rng.next_f64()))
}

/// Symmetric positive definite matrix `M^T M + n I` with M uniform in
/// `[0, 1)`.
pub fn spd<S: Scalar>(n: usize, seed: u64) -> DenseMatrix<S> {
    let m = random_dense::<S>(n, seed);
    let mut a = DenseMatrix::zeros(n, n);
    let mut be = Backend::direct();
    kernels::gemm(&mut be, S::ONE, &m, &m, S::ZERO, &mut a, true, false)
        .expect("square gemm cannot mismatch");
    let shift = S::from_f64(n as f64);
    for i in 0..n {
        a.set(i, i, a.get(i, i) + shift);
    }
    a
}

/// Standard 5-point stencil for the Laplacian on a k x k interior grid,
/// densified. `n` must be a perfect square (`n = k * k`).
pub fn poisson2d<S: Scalar>(n: usize) -> Result<DenseMatrix<S>> {
    let k = (n as f64).sqrt().round() as usize;
    if k * k != n {
        return Err(Error::InvalidInput(format!(
            "poisson2d needs a perfect-square dimension, got {n}"
        )));
    }
    let four = S::from_f64(4.0);
    let neg = S::from_f64(-1.0);
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            four
        } else if (i == j + 1 && i % k != 0) || (j == i + 1 && j % k != 0) || i == j + k || j == i + k
        {
            neg
        } else {
            S::ZERO
        }
    }))
}

/// Right-hand-side vector with entries uniform in `[0, 1)`.
pub fn random_rhs<S: Scalar>(n: usize, seed: u64) -> DenseVector<S> {
    let mut rng = SplitMix64::new(seed);
    DenseVector::from_fn(n, |_| S::from_f64(rng.next_f64()))
}

/// A random matrix made comfortably well-conditioned by a diagonal shift,
/// for direct-solve residual checks.
pub fn shifted_random<S: Scalar>(n: usize, seed: u64) -> DenseMatrix<S> {
    let mut a = random_dense::<S>(n, seed);
    let shift = S::from_f64(n as f64);
    for i in 0..n {
        a.set(i, i, a.get(i, i) + shift);
    }
    a
}
