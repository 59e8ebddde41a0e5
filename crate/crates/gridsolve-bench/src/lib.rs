//! Shared fixtures for the criterion benches.

use gridsolve::dense::{DenseMatrix, DenseVector};
use gridsolve::rng::SplitMix64;

pub fn square_matrix(n: usize, seed: u64) -> DenseMatrix<f64> {
    let mut rng = SplitMix64::new(seed);
    DenseMatrix::from_fn(n, n, |_, _| rng.next_f64() * 2.0 - 1.0)
}

pub fn vector(n: usize, seed: u64) -> DenseVector<f64> {
    let mut rng = SplitMix64::new(seed);
    DenseVector::from_fn(n, |_| rng.next_f64() * 2.0 - 1.0)
}
