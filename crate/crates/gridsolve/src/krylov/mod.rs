//! Nonstationary Krylov solvers — CG, restarted GMRES, BiCG, BiCGSTAB —
//! over an abstract operator, so the identical solver loop runs on a serial
//! matrix or a distributed one.

use crate::backend::Backend;
use crate::dense::{DenseMatrix, DenseVector};
use crate::distgrid::{self, BlockCyclicDesc, DistMatrix, DistVector};
use crate::error::{Error, Result};
use crate::kernels;
use crate::scalar::Scalar;
use crate::transport::Transport;

mod solvers;

pub use solvers::{bicg, bicgstab, cg, gmres};

/// The operator and vector-space contract the solvers run against.
///
/// `apply` is the matrix-vector product; `apply_transpose` is required only
/// by BiCG. The vector operations live here too so that serial and
/// distributed vectors flow through the same solver code, with all
/// cross-rank effects confined to the operator's own collectives.
pub trait LinearOperator<S: Scalar> {
    type Vector: Clone;

    fn dim(&self) -> usize;

    /// y <- A x
    fn apply(&mut self, x: &Self::Vector, y: &mut Self::Vector) -> Result<()>;

    /// y <- A^T x
    fn apply_transpose(&mut self, _x: &Self::Vector, _y: &mut Self::Vector) -> Result<()> {
        Err(Error::InvalidInput(
            "this operator does not provide a transpose apply".into(),
        ))
    }

    fn supports_transpose(&self) -> bool {
        false
    }

    fn dot(&mut self, x: &Self::Vector, y: &Self::Vector) -> Result<S>;

    fn norm(&mut self, x: &Self::Vector) -> Result<S>;

    /// y <- alpha x + y
    fn axpy(&mut self, alpha: S, x: &Self::Vector, y: &mut Self::Vector) -> Result<()>;

    fn zeros(&mut self) -> Self::Vector;

    /// y <- alpha x, built from the zero vector so all arithmetic stays in
    /// the kernel layer.
    fn scaled(&mut self, alpha: S, x: &Self::Vector) -> Result<Self::Vector> {
        let mut y = self.zeros();
        self.axpy(alpha, x, &mut y)?;
        Ok(y)
    }
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct KrylovConfig {
    /// Relative-residual target, `||r|| / ||b||`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 * dim`.
    pub max_iters: Option<usize>,
    /// Arnoldi depth between GMRES restarts.
    pub restart_m: usize,
    /// Breakdown threshold as a multiple of the natural magnitude of the
    /// guarded quantity; `None` means `100 * machine epsilon` of the scalar.
    pub breakdown_eps: Option<f64>,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            tol: 1e-8,
            max_iters: None,
            restart_m: 30,
            breakdown_eps: None,
        }
    }
}

impl KrylovConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = Some(max_iters);
        self
    }

    pub fn with_restart(mut self, m: usize) -> Self {
        self.restart_m = m;
        self
    }

    pub(crate) fn max_iters_for(&self, n: usize) -> usize {
        self.max_iters.unwrap_or(10 * n.max(1))
    }

    pub(crate) fn breakdown_for<S: Scalar>(&self) -> f64 {
        self.breakdown_eps
            .unwrap_or(100.0 * crate::scalar::machine_epsilon(S::PRECISION))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        if self.restart_m == 0 {
            return Err(Error::InvalidInput("restart length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Serial dense operator: gemv through the backend.
pub struct DenseOperator<'a, S: Scalar> {
    a: &'a DenseMatrix<S>,
    be: &'a mut Backend,
}

impl<'a, S: Scalar> DenseOperator<'a, S> {
    pub fn new(a: &'a DenseMatrix<S>, be: &'a mut Backend) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch(format!(
                "operator matrix must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        Ok(DenseOperator { a, be })
    }
}

impl<S: Scalar> LinearOperator<S> for DenseOperator<'_, S> {
    type Vector = DenseVector<S>;

    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn apply(&mut self, x: &DenseVector<S>, y: &mut DenseVector<S>) -> Result<()> {
        kernels::gemv(self.be, S::ONE, self.a, x, S::ZERO, y, false)
    }

    fn apply_transpose(&mut self, x: &DenseVector<S>, y: &mut DenseVector<S>) -> Result<()> {
        kernels::gemv(self.be, S::ONE, self.a, x, S::ZERO, y, true)
    }

    fn supports_transpose(&self) -> bool {
        true
    }

    fn dot(&mut self, x: &DenseVector<S>, y: &DenseVector<S>) -> Result<S> {
        kernels::dot(self.be, x, y)
    }

    fn norm(&mut self, x: &DenseVector<S>) -> Result<S> {
        kernels::nrm2(self.be, x)
    }

    fn axpy(&mut self, alpha: S, x: &DenseVector<S>, y: &mut DenseVector<S>) -> Result<()> {
        kernels::axpy(self.be, alpha, x, y)
    }

    fn zeros(&mut self) -> DenseVector<S> {
        DenseVector::zeros(self.a.rows())
    }
}

/// Distributed operator over a block-cyclic matrix. Every grid rank runs the
/// identical solver loop; the collectives inside the distributed matvec and
/// dot keep the ranks in lockstep.
pub struct DistOperator<'a, S: Scalar, T: Transport> {
    a: &'a DistMatrix<S>,
    vec_desc: BlockCyclicDesc,
    t: &'a T,
    be: &'a mut Backend,
}

impl<'a, S: Scalar, T: Transport> DistOperator<'a, S, T> {
    /// `vec_desc` is the layout solver vectors use (see
    /// [`distgrid::vector_desc`]); it must be row-conformal with `a`.
    pub fn new(
        a: &'a DistMatrix<S>,
        vec_desc: BlockCyclicDesc,
        t: &'a T,
        be: &'a mut Backend,
    ) -> Result<Self> {
        if a.desc.g_rows != a.desc.g_cols {
            return Err(Error::DimensionMismatch(format!(
                "operator matrix must be square, got {}x{}",
                a.desc.g_rows, a.desc.g_cols
            )));
        }
        if vec_desc.g_rows != a.desc.g_rows || vec_desc.mb != a.desc.mb {
            return Err(Error::DescriptorMismatch(
                "vector descriptor not row-conformal with the operator".into(),
            ));
        }
        Ok(DistOperator { a, vec_desc, t, be })
    }
}

impl<S: Scalar, T: Transport> LinearOperator<S> for DistOperator<'_, S, T> {
    type Vector = DistVector<S>;

    fn dim(&self) -> usize {
        self.a.desc.g_rows
    }

    fn apply(&mut self, x: &DistVector<S>, y: &mut DistVector<S>) -> Result<()> {
        distgrid::dist_matvec(self.t, self.be, self.a, x, y)
    }

    fn apply_transpose(&mut self, x: &DistVector<S>, y: &mut DistVector<S>) -> Result<()> {
        distgrid::dist_matvec_transpose(self.t, self.be, self.a, x, y)
    }

    fn supports_transpose(&self) -> bool {
        true
    }

    fn dot(&mut self, x: &DistVector<S>, y: &DistVector<S>) -> Result<S> {
        distgrid::dist_dot(self.t, self.be, x, y)
    }

    fn norm(&mut self, x: &DistVector<S>) -> Result<S> {
        distgrid::dist_norm2(self.t, self.be, x)
    }

    fn axpy(&mut self, alpha: S, x: &DistVector<S>, y: &mut DistVector<S>) -> Result<()> {
        distgrid::dist_axpy(self.be, alpha, x, y)
    }

    fn zeros(&mut self) -> DistVector<S> {
        DistVector::zeros(self.vec_desc.clone())
    }
}

/// Transpose-consistency probe: checks `<A x, y> == <x, A^T y>` on seeded
/// random vectors. Test instrumentation.
pub struct OperatorProbe {
    pub seed: u64,
    pub trials: usize,
}

impl Default for OperatorProbe {
    fn default() -> Self {
        OperatorProbe { seed: 1, trials: 4 }
    }
}

impl OperatorProbe {
    /// Largest observed `|<Ax,y> - <x,A^T y>|` normalised by
    /// `||A x|| * ||y||` over the trials.
    pub fn transpose_defect<S, O>(&self, op: &mut O) -> Result<f64>
    where
        S: Scalar,
        O: LinearOperator<S, Vector = DenseVector<S>>,
    {
        let n = op.dim();
        let mut rng = crate::rng::SplitMix64::new(self.seed);
        let mut worst = 0.0f64;
        for _ in 0..self.trials {
            let x = DenseVector::from_fn(n, |_| S::from_f64(rng.next_f64() * 2.0 - 1.0));
            let y = DenseVector::from_fn(n, |_| S::from_f64(rng.next_f64() * 2.0 - 1.0));
            let mut ax = op.zeros();
            op.apply(&x, &mut ax)?;
            let mut aty = op.zeros();
            op.apply_transpose(&y, &mut aty)?;
            let lhs = op.dot(&ax, &y)?.to_f64();
            let rhs = op.dot(&x, &aty)?.to_f64();
            let scale = op.norm(&ax)?.to_f64() * op.norm(&y)?.to_f64();
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
        Ok(worst)
    }
}
