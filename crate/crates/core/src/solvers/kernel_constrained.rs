//! Ψ-maximization restricted to distributions whose log lies orthogonal to
//! every kernel column.
//!
//! Writing `y_o = log p_o`, the constraints `Σ_s R_sj log P(s) = 0` say that
//! `y` is orthogonal to the columns `c_o R_oj`. They also annihilate the
//! all-ones vector, so the feasible positive distributions are exactly
//! `p = softmax(N z)` where the columns of `N` span the orthogonal
//! complement of those columns and of the ones vector. The problem becomes an
//! unconstrained (non-concave) maximization over `z`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SolverConfig;
use super::model::OrbitModel;
use super::{algorithm_a, certify, BoundOutcome, ValueProblem};
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::kernel::KernelBasis;

struct Reparam<'a> {
    model: &'a OrbitModel,
    /// n × k with orthonormal columns.
    basis: DMatrix<f64>,
}

impl<'a> Reparam<'a> {
    fn new(model: &'a OrbitModel, kernel: &KernelBasis) -> Result<Self> {
        let n = model.len();
        if kernel.invariant_dim() != n {
            return Err(Error::SupportMismatch);
        }
        let columns = kernel.orbit_columns_f64();
        let mut span: Vec<DVector<f64>> = Vec::new();
        let push = |v: DVector<f64>, span: &mut Vec<DVector<f64>>| {
            let mut v = v;
            for _ in 0..2 {
                for u in span.iter() {
                    let d = u.dot(&v);
                    v -= u * d;
                }
            }
            let norm = v.norm();
            if norm > 1e-10 {
                span.push(v / norm);
            }
        };
        push(DVector::from_element(n, 1.0), &mut span);
        for col in &columns {
            let v = DVector::from_iterator(n, (0..n).map(|o| model.sizes()[o] * col[o]));
            push(v, &mut span);
        }
        let mut projector = DMatrix::<f64>::identity(n, n);
        for u in &span {
            projector -= u * u.transpose();
        }
        let eig = SymmetricEigen::new(projector);
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let basis = DMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
        Ok(Reparam { model, basis })
    }

    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn masses(&self, z: &DVector<f64>) -> Vec<f64> {
        let y = &self.basis * z;
        let top = y.max();
        let mut p: Vec<f64> = y.iter().map(|v| (v - top).exp()).collect();
        self.model.normalize(&mut p);
        p
    }

    fn value(&self, z: &DVector<f64>) -> f64 {
        self.model.psi(&self.masses(z))
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let p = self.masses(z);
        let marg = self.model.marginals(&p);
        let mut g = self.model.gradient(&marg);
        for (o, x) in g.iter_mut().enumerate() {
            if p[o] <= 0.0 {
                *x = 0.0;
            }
        }
        let mean: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        let dy = DVector::from_iterator(
            p.len(),
            (0..p.len()).map(|o| if p[o] > 0.0 { p[o] * (g[o] - self.model.sizes()[o] * mean) } else { 0.0 }),
        );
        self.basis.transpose() * dy
    }

    fn project(&self, p: &[f64]) -> DVector<f64> {
        let y = DVector::from_iterator(p.len(), p.iter().map(|&x| x.max(1e-300).ln().max(-690.0)));
        self.basis.transpose() * y
    }

    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let k = self.dim();
        let mut h = DMatrix::<f64>::zeros(k, k);
        for j in 0..k {
            let step = 1e-5 * (1.0 + z[j].abs());
            let mut plus = z.clone();
            plus[j] += step;
            let mut minus = z.clone();
            minus[j] -= step;
            let d = (self.gradient(&plus) - self.gradient(&minus)) / (2.0 * step);
            h.set_column(j, &d);
        }
        (&h + h.transpose()) * 0.5
    }

    /// Modified Newton ascent from `z`.
    fn maximize(&self, mut z: DVector<f64>, cfg: &SolverConfig) -> (DVector<f64>, f64) {
        let mut value = self.value(&z);
        let mut grad = self.gradient(&z);
        let mut flat = 0;
        for _ in 0..cfg.max_iters.min(400) {
            if grad.amax() <= 1e-14 {
                break;
            }
            let h = self.hessian(&z);
            let eig = SymmetricEigen::new(h);
            let top = eig.eigenvalues.amax().max(1e-300);
            let mut step = DVector::<f64>::zeros(self.dim());
            for i in 0..self.dim() {
                let v = eig.eigenvectors.column(i);
                let denom = eig.eigenvalues[i].abs().max(1e-10 * top).max(1e-14);
                step += v * (v.dot(&grad) / denom);
            }
            let norm = step.norm();
            if norm > 20.0 {
                step *= 20.0 / norm;
            }
            let slope = grad.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial = &z + &step * t;
                let v = self.value(&trial);
                if v >= value + 1e-4 * t * slope || (v >= value && t < 1e-6) {
                    let gain = v - value;
                    z = trial;
                    value = v;
                    accepted = true;
                    if gain <= 1e-15 * (1.0 + value.abs()) {
                        flat += 1;
                    } else {
                        flat = 0;
                    }
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            grad = self.gradient(&z);
            if flat >= 3 {
                break;
            }
        }
        (z, value)
    }
}

fn constraint_violation(model: &OrbitModel, kernel: &KernelBasis, p: &[f64]) -> f64 {
    let columns = kernel.orbit_columns_f64();
    let mut worst: f64 = 0.0;
    for col in &columns {
        let mut s = 0.0;
        for (o, &r) in col.iter().enumerate() {
            if r != 0.0 {
                if p[o] <= 0.0 {
                    return f64::INFINITY;
                }
                s += model.sizes()[o] * r * p[o].ln();
            }
        }
        worst = worst.max(s.abs());
    }
    worst
}

/// Kernel-constrained maximization. The emitted bound is always
/// `Ψ(P̃) − Γ(P̃)` for the best point found; `feasible` reports whether that
/// point satisfies the log constraints to `constraint_tol`.
pub fn algorithm_b(
    problem: &ValueProblem,
    kernel: &KernelBasis,
    cfg: &SolverConfig,
    warm_starts: &[Distribution],
) -> Result<BoundOutcome> {
    let baseline = algorithm_a(problem, cfg)?;
    if kernel.chi() == 0 {
        return Ok(baseline);
    }
    let model = OrbitModel::new(problem.support.clone(), &problem.group, &problem.logvals)?;
    let reparam = Reparam::new(&model, kernel)?;

    let mut starts = vec![reparam.project(&model.compress(baseline.q_hat.weights()))];
    for w in warm_starts {
        if w.support() != &problem.support {
            return Err(Error::SupportMismatch);
        }
        starts.push(reparam.project(&model.compress(w.weights())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for _ in 0..cfg.restarts {
        let base = &starts[0];
        let z = DVector::from_iterator(reparam.dim(), base.iter().map(|x| x + rng.gen_range(-1.0..1.0)));
        starts.push(z);
    }

    let mut best: Option<(BoundOutcome, f64)> = None;
    for z0 in starts {
        let (z, _) = reparam.maximize(z0, cfg);
        let p = reparam.masses(&z);
        let grad_norm = reparam.gradient(&z).amax();
        let dist = model.distribution(&p)?;
        let mut outcome = certify(&problem.support, &dist, &problem.logvals, cfg)?;
        outcome.algorithm = "B".into();
        outcome.kkt_residual = grad_norm;
        outcome.feasible = constraint_violation(&model, kernel, &model.compress(dist.weights())) <= cfg.constraint_tol;
        let better = match &best {
            None => true,
            Some((b, _)) => outcome.log_bound > b.log_bound,
        };
        if better {
            best = Some((outcome, grad_norm));
        }
    }
    let (mut outcome, _) = best.expect("at least one start");
    if outcome.log_bound < baseline.log_bound {
        // the convex baseline is itself a feasible point of the constrained problem
        let mut fallback = certify(&problem.support, &baseline.q_hat, &problem.logvals, cfg)?;
        fallback.algorithm = "B".into();
        fallback.kkt_residual = f64::NAN;
        fallback.feasible = constraint_violation(&model, kernel, &model.compress(baseline.q_hat.weights())) <= cfg.constraint_tol;
        if fallback.log_bound > outcome.log_bound {
            outcome = fallback;
        }
    }
    Ok(outcome)
}
