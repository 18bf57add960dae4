//! Maximum-entropy distribution with prescribed marginals, and the
//! entropy gap Γ bounded through the dual.
//!
//! The optimum has the form `Q(s) = exp(λ₁(s₁) + λ₂(s₂) + λ₃(s₃))` on the
//! triples whose three target marginals are all positive. For any `λ` the
//! dual value `Σ_s Q_λ(s) − 1 − Σ_ℓ Σ_a m_ℓ(a) λ_ℓ(a)` bounds the maximum
//! entropy from above, so Γ computed from it never underestimates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::config::SolverConfig;
use crate::distribution::{entropy_of, marginal_values};
use crate::error::{Error, Result};
use crate::support::Support;

#[derive(Clone, Debug)]
pub struct Opt2Solution {
    pub weights: Vec<f64>,
    /// Dual variables per axis, aligned with the alphabets (`-∞` on zero-mass symbols).
    pub lambda: [Vec<f64>; 3],
    pub mismatch: f64,
    /// Certified upper bound on the maximum entropy.
    pub entropy_bound: f64,
    pub iterations: usize,
}

struct Dual<'a> {
    targets: &'a [Vec<f64>; 3],
    /// Allowed triples as flat variable indices per axis.
    rows: Vec<[usize; 3]>,
    allowed: Vec<usize>,
    /// Flat variable index -> (axis, symbol).
    vars: Vec<(usize, usize)>,
    m: Vec<f64>,
}

impl<'a> Dual<'a> {
    fn new(support: &Support, targets: &'a [Vec<f64>; 3]) -> Self {
        let mut flat = [0, 1, 2].map(|axis| vec![usize::MAX; targets[axis].len()]);
        let mut vars = Vec::new();
        let mut m = Vec::new();
        for axis in 0..3 {
            for (a, &t) in targets[axis].iter().enumerate() {
                if t > 0.0 {
                    flat[axis][a] = vars.len();
                    vars.push((axis, a));
                    m.push(t);
                }
            }
        }
        let mut rows = Vec::new();
        let mut allowed = Vec::new();
        for s in 0..support.len() {
            let idx = [0, 1, 2].map(|axis| flat[axis][support.symbol(s, axis)]);
            if idx.iter().all(|&i| i != usize::MAX) {
                rows.push(idx);
                allowed.push(s);
            }
        }
        Dual {
            targets,
            rows,
            allowed,
            vars,
            m,
        }
    }

    fn q(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| (x[r[0]] + x[r[1]] + x[r[2]]).exp()).collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let q: f64 = self.q(x).iter().sum();
        q - 1.0 - self.m.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    fn marginals(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.vars.len()];
        for (r, &v) in self.rows.iter().zip(q) {
            for &i in r {
                out[i] += v;
            }
        }
        out
    }

    /// Sup-norm mismatch against every target symbol, including zero-mass ones.
    fn mismatch(&self, q: &[f64]) -> f64 {
        let got = self.marginals(q);
        let mut worst = got.iter().zip(&self.m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if self.rows.is_empty() {
            worst = worst.max(self.m.iter().cloned().fold(0.0, f64::max));
        }
        worst
    }

    fn ipf_sweep(&self, x: &mut [f64]) {
        for axis in 0..3 {
            let q = self.q(x);
            let got = self.marginals(&q);
            for (i, &(ax, _)) in self.vars.iter().enumerate() {
                if ax == axis && got[i] > 0.0 {
                    x[i] += (self.m[i] / got[i]).ln();
                }
            }
        }
    }

    /// Diagonally scaled Newton step using a pseudo-inverse of the Hessian.
    fn newton_step(&self, x: &[f64]) -> Vec<f64> {
        let n = self.vars.len();
        let q = self.q(x);
        let grad: Vec<f64> = self.marginals(&q).iter().zip(&self.m).map(|(a, b)| a - b).collect();
        let mut h = DMatrix::<f64>::zeros(n, n);
        for (r, &v) in self.rows.iter().zip(&q) {
            for &i in r {
                for &j in r {
                    h[(i, j)] += v;
                }
            }
        }
        let d: Vec<f64> = (0..n).map(|i| 1.0 / h[(i, i)].max(1e-300).sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] *= d[i] * d[j];
            }
        }
        let g = DVector::from_iterator(n, (0..n).map(|i| grad[i] * d[i]));
        let eig = SymmetricEigen::new(h);
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mut step = DVector::<f64>::zeros(n);
        for k in 0..n {
            let ev = eig.eigenvalues[k];
            if ev > 1e-13 * top {
                let v = eig.eigenvectors.column(k);
                step -= v * (v.dot(&g) / ev);
            }
        }
        (0..n).map(|i| step[i] * d[i]).collect()
    }

    fn lambda(&self, x: &[f64]) -> [Vec<f64>; 3] {
        let mut out = [0, 1, 2].map(|axis| vec![f64::NEG_INFINITY; self.targets[axis].len()]);
        for (i, &(axis, a)) in self.vars.iter().enumerate() {
            out[axis][a] = x[i];
        }
        out
    }
}

/// Max-entropy distribution on `support` with the given marginals.
///
/// On failure the error carries the best iterate; [`entropy_upper_bound`]
/// remains usable either way.
pub fn solve_opt2(support: &Support, targets: &[Vec<f64>; 3], cfg: &SolverConfig) -> Result<Opt2Solution> {
    let sol = opt2_best_effort(support, targets, cfg);
    if sol.mismatch <= cfg.marginal_tol {
        Ok(sol)
    } else {
        Err(Error::Opt2NoConvergence {
            best: Box::new(sol.weights),
            mismatch: sol.mismatch,
            iters: sol.iterations,
        })
    }
}

/// Same as [`solve_opt2`] but always returns the best iterate found.
pub fn opt2_best_effort(support: &Support, targets: &[Vec<f64>; 3], cfg: &SolverConfig) -> Opt2Solution {
    for axis in 0..3 {
        assert_eq!(targets[axis].len(), support.alphabet(axis).len(), "target length mismatch");
    }
    let dual = Dual::new(support, targets);
    let mut x: Vec<f64> = dual
        .vars
        .iter()
        .zip(&dual.m)
        .map(|(&(axis, _), &t)| if axis == 0 { t.ln() } else { 0.0 })
        .collect();
    let mut iterations = 0;
    if !dual.rows.is_empty() {
        for _ in 0..30 {
            dual.ipf_sweep(&mut x);
            iterations += 1;
        }
        let mut value = dual.value(&x);
        let mut best = (dual.mismatch(&dual.q(&x)), x.clone());
        let mut stalls = 0;
        while iterations < cfg.max_iters {
            iterations += 1;
            let step = dual.newton_step(&x);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
                let v = dual.value(&trial);
                if v.is_finite() && v <= value + 1e-15 * value.abs().max(1.0) {
                    moved = v < value;
                    x = trial;
                    value = v;
                    break;
                }
                t *= 0.5;
            }
            let mis = dual.mismatch(&dual.q(&x));
            if mis < best.0 {
                best = (mis, x.clone());
                stalls = 0;
            } else {
                stalls += 1;
            }
            if best.0 <= 1e-2 * cfg.marginal_tol || stalls >= 8 || (!moved && stalls >= 3) {
                break;
            }
        }
        x = best.1;
    }
    // normalize exactly: shift axis-0 multipliers by −log Z
    let q = dual.q(&x);
    let z: f64 = q.iter().sum();
    if z > 0.0 {
        let shift = z.ln();
        for (i, &(axis, _)) in dual.vars.iter().enumerate() {
            if axis == 0 {
                x[i] -= shift;
            }
        }
    }
    let q = dual.q(&x);
    let mut weights = vec![0.0; support.len()];
    for (&s, &v) in dual.allowed.iter().zip(&q) {
        weights[s] = v;
    }
    Opt2Solution {
        mismatch: dual.mismatch(&q),
        entropy_bound: dual.value(&x),
        lambda: dual.lambda(&x),
        weights,
        iterations,
    }
}

/// Upper bound on the maximum entropy with marginals `targets`, given any
/// dual point `lambda` (non-finite entries mark zero-mass symbols).
pub fn entropy_upper_bound(support: &Support, targets: &[Vec<f64>; 3], lambda: &[Vec<f64>; 3]) -> f64 {
    let mut total = 0.0;
    for s in 0..support.len() {
        let sym = [0, 1, 2].map(|axis| support.symbol(s, axis));
        if (0..3).all(|axis| targets[axis][sym[axis]] > 0.0) {
            total += (0..3).map(|axis| lambda[axis][sym[axis]]).sum::<f64>().exp();
        }
    }
    let mut lin = 0.0;
    for axis in 0..3 {
        for (a, &m) in targets[axis].iter().enumerate() {
            if m > 0.0 {
                lin += m * lambda[axis][a];
            }
        }
    }
    total - 1.0 - lin
}

/// Γ_S(P) with the maximum entropy replaced by its dual upper bound, clamped at 0.
#[derive(Clone, Debug)]
pub struct GammaBound {
    pub gamma: f64,
    pub max_entropy: Opt2Solution,
}

pub fn gamma_bound(support: &Support, weights: &[f64], cfg: &SolverConfig) -> GammaBound {
    let targets = [0, 1, 2].map(|axis| marginal_values(support, weights, axis));
    let sol = opt2_best_effort(support, &targets, cfg);
    let upper = entropy_upper_bound(support, &targets, &sol.lambda);
    GammaBound {
        gamma: (upper - entropy_of(weights)).max(0.0),
        max_entropy: sol,
    }
}
