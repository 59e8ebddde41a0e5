//! Distributed dense linear-system solvers over a 2D logical process grid.
//!
//! The crate is layered the way the solvers compose:
//!
//! - [`kernels`] — local BLAS-subset kernels and unblocked factorizations,
//!   all executed through a pluggable [`backend`] (in-place or staged
//!   device-simulation).
//! - [`transport`] — message-passing contract between ranks with an
//!   in-process reference implementation and deterministic reductions.
//! - [`distgrid`] — 2D process grid, block-cyclic descriptors, distributed
//!   matrix/vector containers, and the distributed BLAS building blocks.
//! - [`direct`] — blocked LU with partial pivoting and blocked Cholesky,
//!   serial and distributed, plus the triangular-solve drivers.
//! - [`krylov`] — CG, restarted GMRES, BiCG, and BiCGSTAB over an abstract
//!   operator, so the same solver loop runs serial or distributed.
//! - [`io`] / [`gen`] — Matrix Market and raw binary file formats, and the
//!   seeded test-matrix generators.

pub mod backend;
pub mod dense;
pub mod direct;
pub mod distgrid;
pub mod error;
pub mod gen;
pub mod io;
pub mod kernels;
pub mod krylov;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod transport;

pub use backend::{Backend, BackendKind, LaunchLayout, TransferLog};
pub use dense::{DenseMatrix, DenseVector};
pub use error::{Error, ErrorKind, Result};
pub use report::SolveReport;
pub use scalar::{machine_epsilon, Precision, Scalar};
