//! Solver outcome reporting.

/// Outcome of a solver run: convergence status plus the per-iteration
/// residual trail.
///
/// `residual_history` holds one relative residual per iteration; restarted
/// GMRES appends per inner iteration, BiCGSTAB per half step. On converged
/// runs `final_relres` is the recurrence residual the stopping test accepted
/// (`<= tol`); an independently recomputed `||b - Ax|| / ||b||` agrees with it
/// to within the usual recurrence drift.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
    pub breakdown: bool,
    pub final_relres: f64,
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn new(method: &str) -> Self {
        SolveReport {
            method: method.to_string(),
            iterations: 0,
            converged: false,
            breakdown: false,
            final_relres: f64::NAN,
            residual_history: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, relres: f64) {
        self.residual_history.push(relres);
        self.iterations = self.residual_history.len();
        self.final_relres = relres;
    }
}
