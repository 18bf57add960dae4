//! Value lower bounds for a single decomposition: the two-stage convex
//! procedure, the kernel-constrained variant, and plain certification of a
//! given distribution.

mod config;
mod kernel_constrained;
mod model;
mod opt1;
mod opt2;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use config::SolverConfig;
pub use kernel_constrained::algorithm_b;
pub use model::OrbitModel;
pub use opt1::{solve_orbits, BarrierNewton, MirrorDescent, Opt1Registry, Opt1Solution, Opt1Strategy};
pub use opt2::{entropy_upper_bound, gamma_bound, opt2_best_effort, solve_opt2, GammaBound, Opt2Solution};

use crate::distribution::{entropy_of, marginal_values, psi, Distribution, MarginalVector};
use crate::error::{Error, Result};
use crate::kernel::kernel_basis;
use crate::support::{Support, SymmetryGroup};

/// A support with its symmetry group and per-triple log values.
#[derive(Clone, Debug)]
pub struct ValueProblem {
    pub support: Arc<Support>,
    pub group: SymmetryGroup,
    pub logvals: Vec<f64>,
}

impl ValueProblem {
    pub fn new(support: Arc<Support>, group: SymmetryGroup, logvals: Vec<f64>) -> Result<Self> {
        if logvals.len() != support.len() || group.degree() != support.len() {
            return Err(Error::SupportMismatch);
        }
        Ok(ValueProblem {
            support,
            group,
            logvals,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BoundOutcome {
    pub algorithm: String,
    /// Certified lower bound on the log value.
    pub log_bound: f64,
    pub p_hat: Distribution,
    pub q_hat: Distribution,
    /// The distribution whose `Ψ − Γ` equals `log_bound`.
    pub witness: Distribution,
    pub gamma_value: f64,
    pub kkt_residual: f64,
    pub feasible: bool,
}

/// `Ψ(P) − Γ(P)` for an arbitrary distribution.
pub fn certify(support: &Arc<Support>, p: &Distribution, logvals: &[f64], cfg: &SolverConfig) -> Result<BoundOutcome> {
    if p.support() != support {
        return Err(Error::SupportMismatch);
    }
    let psi_value = psi(p, logvals)?;
    let g = gamma_bound(support, p.weights(), cfg);
    Ok(BoundOutcome {
        algorithm: "certify".into(),
        log_bound: psi_value - g.gamma,
        p_hat: p.clone(),
        q_hat: Distribution::normalized(support.clone(), g.max_entropy.weights)?,
        witness: p.clone(),
        gamma_value: g.gamma,
        kkt_residual: f64::NAN,
        feasible: true,
    })
}

pub fn gamma(support: &Support, p: &Distribution, cfg: &SolverConfig) -> Result<f64> {
    if p.support().as_ref() != support {
        return Err(Error::SupportMismatch);
    }
    Ok(gamma_bound(support, p.weights(), cfg).gamma)
}

/// OPT1: the `G`-invariant maximizer of Ψ.
pub fn solve_opt1(
    support: &Arc<Support>,
    group: &SymmetryGroup,
    logvals: &[f64],
    cfg: &SolverConfig,
) -> Result<Distribution> {
    cfg.validate()?;
    let model = OrbitModel::new(support.clone(), group, logvals)?;
    let sol = solve_orbits(&model, cfg)?;
    model.distribution(&sol.orbit_masses)
}

/// OPT2 with marginal vectors as produced by [`crate::distribution::marginal`].
pub fn solve_opt2_marginals(support: &Arc<Support>, targets: &[MarginalVector; 3], cfg: &SolverConfig) -> Result<Distribution> {
    for (axis, t) in targets.iter().enumerate() {
        if t.axis != axis || t.symbols != support.alphabet(axis) {
            return Err(Error::SupportMismatch);
        }
    }
    let values = [0, 1, 2].map(|axis| targets[axis].values.clone());
    let sol = solve_opt2(support, &values, cfg)?;
    Distribution::normalized(support.clone(), sol.weights)
}

/// Γ of a distribution that is itself of max-entropy form with multipliers `lambda`.
fn gamma_at_dual(support: &Support, weights: &[f64], lambda: &[Vec<f64>; 3]) -> f64 {
    let own = [0, 1, 2].map(|axis| marginal_values(support, weights, axis));
    (entropy_upper_bound(support, &own, lambda) - entropy_of(weights)).max(0.0)
}

/// OPT1 followed by OPT2 on the optimizer's marginals; the bound is `Ψ(Q̂)`
/// (less the numerically certified, essentially zero, `Γ(Q̂)`).
pub fn algorithm_a(problem: &ValueProblem, cfg: &SolverConfig) -> Result<BoundOutcome> {
    cfg.validate()?;
    let model = OrbitModel::new(problem.support.clone(), &problem.group, &problem.logvals)?;
    let (p_orbits, kkt) = match solve_orbits(&model, cfg) {
        Ok(sol) => (sol.orbit_masses, sol.kkt_residual),
        Err(Error::Opt1NoConvergence { best, residual, .. }) => (model.compress(&best), residual),
        Err(e) => return Err(e),
    };
    let p_hat = model.distribution(&p_orbits)?;
    finish_a(problem, p_hat, kkt, cfg)
}

fn finish_a(problem: &ValueProblem, p_hat: Distribution, kkt: f64, cfg: &SolverConfig) -> Result<BoundOutcome> {
    let support = &problem.support;
    let targets = [0, 1, 2].map(|axis| marginal_values(support, p_hat.weights(), axis));
    let sol = opt2_best_effort(support, &targets, cfg);
    let q_hat = Distribution::normalized(support.clone(), sol.weights.clone())?;
    let gamma_value = gamma_at_dual(support, q_hat.weights(), &sol.lambda);
    let log_bound = psi(&q_hat, &problem.logvals)? - gamma_value;
    Ok(BoundOutcome {
        algorithm: "A".into(),
        log_bound,
        p_hat,
        witness: q_hat.clone(),
        q_hat,
        gamma_value,
        kkt_residual: kkt,
        feasible: true,
    })
}

pub trait ValueAlgorithm: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, problem: &ValueProblem, cfg: &SolverConfig, warm_starts: &[Distribution]) -> Result<BoundOutcome>;
}

pub struct AlgorithmA;

impl ValueAlgorithm for AlgorithmA {
    fn name(&self) -> &'static str {
        "A"
    }

    fn run(&self, problem: &ValueProblem, cfg: &SolverConfig, _warm_starts: &[Distribution]) -> Result<BoundOutcome> {
        algorithm_a(problem, cfg)
    }
}

pub struct AlgorithmB;

impl ValueAlgorithm for AlgorithmB {
    fn name(&self) -> &'static str {
        "B"
    }

    fn run(&self, problem: &ValueProblem, cfg: &SolverConfig, warm_starts: &[Distribution]) -> Result<BoundOutcome> {
        let kernel = kernel_basis(&problem.support, &problem.group);
        algorithm_b(problem, &kernel, cfg, warm_starts)
    }
}

#[derive(Clone)]
pub struct AlgorithmRegistry {
    algorithms: BTreeMap<&'static str, Arc<dyn ValueAlgorithm>>,
}

impl Default for AlgorithmRegistry {
    fn default() -> Self {
        let mut r = AlgorithmRegistry {
            algorithms: BTreeMap::new(),
        };
        r.register(Arc::new(AlgorithmA));
        r.register(Arc::new(AlgorithmB));
        r
    }
}

impl AlgorithmRegistry {
    pub fn register(&mut self, a: Arc<dyn ValueAlgorithm>) {
        self.algorithms.insert(a.name(), a);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ValueAlgorithm>> {
        self.algorithms.get(name).cloned().ok_or_else(|| Error::UnknownName {
            kind: "value algorithm",
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.algorithms.keys().copied().collect()
    }
}
