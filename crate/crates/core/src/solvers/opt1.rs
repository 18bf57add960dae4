//! Maximization of Ψ over `G`-invariant distributions.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::config::SolverConfig;
use super::model::OrbitModel;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Opt1Solution {
    /// Orbit masses (per member), `Σ c_o p_o = 1`.
    pub orbit_masses: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

pub trait Opt1Strategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &OrbitModel, start: &[f64], cfg: &SolverConfig) -> Result<Opt1Solution>;
}

#[derive(Clone)]
pub struct Opt1Registry {
    strategies: BTreeMap<&'static str, Arc<dyn Opt1Strategy>>,
}

impl Default for Opt1Registry {
    fn default() -> Self {
        let mut r = Opt1Registry {
            strategies: BTreeMap::new(),
        };
        r.register(Arc::new(BarrierNewton));
        r.register(Arc::new(MirrorDescent));
        r
    }
}

impl Opt1Registry {
    pub fn register(&mut self, s: Arc<dyn Opt1Strategy>) {
        self.strategies.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Opt1Strategy>> {
        self.strategies.get(name).cloned().ok_or_else(|| Error::UnknownName {
            kind: "OPT1 strategy",
            name: name.to_string(),
            available: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }
}

/// Runs the configured strategy from the uniform start.
pub fn solve_orbits(model: &OrbitModel, cfg: &SolverConfig) -> Result<Opt1Solution> {
    let strategy = Opt1Registry::default().get(&cfg.opt1)?;
    strategy.solve(model, &model.uniform(), cfg)
}

fn single_orbit(model: &OrbitModel) -> Opt1Solution {
    Opt1Solution {
        orbit_masses: vec![1.0 / model.sizes()[0]],
        kkt_residual: 0.0,
        iterations: 0,
    }
}

/// Zeroes orbits the optimum pushes to the boundary, as long as no marginal
/// symbol loses all of its mass.
fn purify(model: &OrbitModel, p: &mut [f64], cfg: &SolverConfig) {
    let marg = model.marginals(p);
    let g = model.gradient(&marg);
    let mean: f64 = p.iter().zip(&g).map(|(x, y)| x * y).sum();
    let mut candidate = p.to_vec();
    for o in 0..p.len() {
        let dev = g[o] / model.sizes()[o] - mean;
        if dev < -1e-3 && p[o] * dev.abs() <= cfg.grad_tol {
            candidate[o] = 0.0;
        }
    }
    let after = model.marginals(&candidate);
    let lost_symbol = (0..3).any(|axis| after[axis].iter().zip(&marg[axis]).any(|(a, b)| *a <= 0.0 && *b > 0.0));
    if !lost_symbol {
        model.normalize(&mut candidate);
        p.copy_from_slice(&candidate);
    }
}

fn finish(model: &OrbitModel, mut p: Vec<f64>, iterations: usize, cfg: &SolverConfig) -> Result<Opt1Solution> {
    purify(model, &mut p, cfg);
    polish(model, &mut p, cfg);
    let kkt_residual = model.kkt_residual(&model.expand(&p));
    if kkt_residual <= cfg.grad_tol {
        Ok(Opt1Solution {
            orbit_masses: p,
            kkt_residual,
            iterations,
        })
    } else {
        Err(Error::Opt1NoConvergence {
            best: Box::new(model.expand(&p)),
            residual: kkt_residual,
            iters: iterations,
        })
    }
}

/// Primal log-barrier interior point method with Newton centering steps.
pub struct BarrierNewton;

impl BarrierNewton {
    fn barrier_value(model: &OrbitModel, p: &[f64], mu: f64) -> f64 {
        if p.iter().any(|&x| x <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let b: f64 = p.iter().zip(model.sizes()).map(|(x, c)| c * x.ln()).sum();
        model.psi(p) + mu * b
    }

    /// Newton direction in scaled coordinates `u = Δp / p`; returns `(u, decrement²)`.
    fn direction(model: &OrbitModel, p: &[f64], mu: f64) -> Option<(Vec<f64>, f64)> {
        let n = p.len();
        let c = model.sizes();
        let marg = model.marginals(p);
        let grad = model.gradient(&marg);
        let mut k = scaled_curvature(model, p, &marg);
        for o in 0..n {
            k[(o, o)] += mu * c[o];
        }
        let g = DVector::from_iterator(n, (0..n).map(|o| p[o] * (grad[o] + mu * c[o] / p[o])));
        let cs = DVector::from_iterator(n, (0..n).map(|o| p[o] * c[o]));
        let chol = k.clone().cholesky().or_else(|| {
            let jitter = 1e-14 * k.diagonal().max();
            (k + DMatrix::identity(n, n) * jitter).cholesky()
        })?;
        let kg = chol.solve(&g);
        let kc = chol.solve(&cs);
        let nu = cs.dot(&kg) / cs.dot(&kc);
        let u = kg - kc * nu;
        let dec = g.dot(&u);
        Some((u.iter().copied().collect(), dec))
    }
}

/// `D K D` where `K` is the negated Hessian of the marginal-entropy part of Ψ
/// and `D = diag(p)`. Rows of zero-mass orbits vanish.
fn scaled_curvature(model: &OrbitModel, p: &[f64], marg: &[Vec<f64>; 3]) -> DMatrix<f64> {
    let n = p.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for axis in 0..3 {
        let mut by_symbol: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.symbol_count(axis)];
        for (o, row) in model.incidence(axis).iter().enumerate() {
            for &(a, mult) in row {
                by_symbol[a].push((o, mult * p[o]));
            }
        }
        for (a, list) in by_symbol.iter().enumerate() {
            if list.is_empty() || marg[axis][a] <= 0.0 {
                continue;
            }
            let scale = 1.0 / (3.0 * marg[axis][a]);
            for &(i, vi) in list {
                for &(j, vj) in list {
                    k[(i, j)] += scale * vi * vj;
                }
            }
        }
    }
    k
}

/// Newton iterations on the face spanned by the positive orbits, with a
/// pseudo-inverse so that directions along which Ψ is flat are left alone.
/// Orbits driven through zero are dropped. The merit is the KKT residual,
/// since near the optimum Ψ itself no longer moves in floating point.
fn polish(model: &OrbitModel, p: &mut Vec<f64>, cfg: &SolverConfig) {
    let residual = |q: &[f64]| model.kkt_residual(&model.expand(q));
    let mut best = residual(p);
    let c = model.sizes();
    for _ in 0..40 {
        if best <= 1e-3 * cfg.grad_tol {
            break;
        }
        let active: Vec<usize> = (0..p.len()).filter(|&o| p[o] > 0.0).collect();
        let m = active.len();
        if m <= 1 {
            break;
        }
        let marg = model.marginals(p);
        let grad = model.gradient(&marg);
        let full = scaled_curvature(model, p, &marg);
        let k = DMatrix::from_fn(m, m, |i, j| full[(active[i], active[j])]);
        let g = DVector::from_iterator(m, active.iter().map(|&o| p[o] * grad[o]));
        let cs = DVector::from_iterator(m, active.iter().map(|&o| p[o] * c[o]));
        let cs = &cs / cs.norm();
        let proj = DMatrix::<f64>::identity(m, m) - &cs * cs.transpose();
        let eig = SymmetricEigen::new(&proj * k * &proj);
        let pg = &proj * g;
        let top = eig.eigenvalues.amax();
        if !(top > 0.0) {
            break;
        }
        let mut u = DVector::<f64>::zeros(m);
        for i in 0..m {
            let lambda = eig.eigenvalues[i];
            if lambda > 1e-11 * top {
                let v = eig.eigenvectors.column(i);
                u += v * (v.dot(&pg) / lambda);
            }
        }
        let mut improved = false;
        let mut alpha = 1.0;
        for _ in 0..30 {
            let mut trial = p.clone();
            for (i, &o) in active.iter().enumerate() {
                trial[o] = (p[o] * (1.0 + alpha * u[i])).max(0.0);
            }
            model.normalize(&mut trial);
            let r = residual(&trial);
            if r < best {
                best = r;
                *p = trial;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
}

impl Opt1Strategy for BarrierNewton {
    fn name(&self) -> &'static str {
        "barrier-newton"
    }

    fn solve(&self, model: &OrbitModel, start: &[f64], cfg: &SolverConfig) -> Result<Opt1Solution> {
        if model.len() == 1 {
            return Ok(single_orbit(model));
        }
        let mut p: Vec<f64> = start.iter().map(|&x| x.max(1e-12)).collect();
        model.normalize(&mut p);
        let total = model.support().len() as f64;
        let mu_final = 1e-2 * cfg.grad_tol / total;
        let mut mu = 1.0;
        let mut iterations = 0;
        loop {
            let last_stage = mu <= mu_final;
            let center_tol = if last_stage { 1e-26 } else { 1e-2 * mu };
            let mut stalls = 0;
            loop {
                if iterations >= cfg.max_iters {
                    return finish(model, p, iterations, cfg);
                }
                iterations += 1;
                let Some((u, dec)) = Self::direction(model, &p, mu) else {
                    break;
                };
                if !(dec > center_tol) {
                    break;
                }
                let mut alpha: f64 = 1.0;
                for &x in &u {
                    if x < 0.0 {
                        alpha = alpha.min(-0.99 / x);
                    }
                }
                let f0 = Self::barrier_value(model, &p, mu);
                let slack = 1e-15 * (1.0 + f0.abs());
                let mut accepted = false;
                for _ in 0..60 {
                    let trial: Vec<f64> = p.iter().zip(&u).map(|(x, d)| x * (1.0 + alpha * d)).collect();
                    let f1 = Self::barrier_value(model, &trial, mu);
                    if f1 >= f0 + 1e-4 * alpha * dec - slack {
                        p = trial;
                        model.normalize(&mut p);
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if !accepted || dec < 1e-30 {
                    stalls += 1;
                    if stalls >= 3 || last_stage {
                        break;
                    }
                }
            }
            if last_stage {
                break;
            }
            mu = (mu * 0.1).max(mu_final);
        }
        finish(model, p, iterations, cfg)
    }
}

/// Entropic mirror ascent (exponentiated gradient) with backtracking.
pub struct MirrorDescent;

impl Opt1Strategy for MirrorDescent {
    fn name(&self) -> &'static str {
        "mirror-descent"
    }

    fn solve(&self, model: &OrbitModel, start: &[f64], cfg: &SolverConfig) -> Result<Opt1Solution> {
        if model.len() == 1 {
            return Ok(single_orbit(model));
        }
        let c = model.sizes();
        let mut p: Vec<f64> = start.iter().map(|&x| x.max(1e-300)).collect();
        model.normalize(&mut p);
        let mut eta = cfg.damping;
        let mut value = model.psi(&p);
        for iteration in 1..=cfg.max_iters {
            let marg = model.marginals(&p);
            let g = model.gradient(&marg);
            let per: Vec<f64> = g.iter().zip(c).map(|(x, k)| x / k).collect();
            let mean: f64 = p.iter().zip(&g).map(|(x, y)| x * y).sum();
            if model.kkt_residual(&model.expand(&p)) <= cfg.grad_tol {
                return finish(model, p, iteration, cfg);
            }
            let mut improved = false;
            for _ in 0..60 {
                let mut trial: Vec<f64> = p
                    .iter()
                    .zip(&per)
                    .map(|(x, y)| x * (eta * (y - mean)).exp())
                    .collect();
                model.normalize(&mut trial);
                let v = model.psi(&trial);
                if v >= value - 1e-15 * (1.0 + value.abs()) {
                    improved = v > value;
                    p = trial;
                    value = v;
                    eta = (eta * 1.5).min(1e6);
                    break;
                }
                eta *= 0.5;
            }
            if !improved && eta < 1e-12 {
                return finish(model, p, iteration, cfg);
            }
        }
        finish(model, p, cfg.max_iters, cfg)
    }
}
