use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Bound on the OPT1 KKT residual.
    pub grad_tol: f64,
    /// Bound on the OPT2 marginal mismatch (sup norm).
    pub marginal_tol: f64,
    /// Bound on `|Σ_s R_sj log P(s)|` for a kernel-constrained point to count as feasible.
    pub constraint_tol: f64,
    /// Iteration cap for each inner solver.
    pub max_iters: usize,
    /// Step scale for the mirror-descent strategy.
    pub damping: f64,
    /// Extra randomly perturbed starts for the kernel-constrained solver.
    pub restarts: usize,
    pub rng_seed: u64,
    /// Registered name of the OPT1 strategy.
    pub opt1: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grad_tol: 1e-12,
            marginal_tol: 1e-12,
            constraint_tol: 1e-9,
            max_iters: 2000,
            damping: 1.0,
            restarts: 2,
            rng_seed: 0,
            opt1: "barrier-newton".to_string(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("marginal_tol", self.marginal_tol),
            ("constraint_tol", self.constraint_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}
