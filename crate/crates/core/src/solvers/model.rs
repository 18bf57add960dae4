//! Orbit-space view of Ψ shared by the OPT1 strategies and the
//! kernel-constrained solver.
//!
//! A `G`-invariant distribution is stored as one mass `p_o` per orbit
//! (the mass of each member), so `Σ_o c_o p_o = 1` with `c_o = |o|`.

use crate::distribution::{entropy_of, Distribution};
use crate::error::{Error, Result};
use crate::support::{orbits, OrbitIndex, Support, SymmetryGroup};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct OrbitModel {
    support: Arc<Support>,
    index: OrbitIndex,
    logvals: Vec<f64>,
    sizes: Vec<f64>,
    /// Per-element log value of each orbit.
    weights: Vec<f64>,
    /// `incid[ℓ][o]`: (symbol index, multiplicity) pairs of orbit `o` on axis `ℓ`.
    incid: [Vec<Vec<(usize, f64)>>; 3],
    nsym: [usize; 3],
}

impl OrbitModel {
    /// Builds the model; `logvals` must be constant on orbits.
    pub fn new(support: Arc<Support>, group: &SymmetryGroup, logvals: &[f64]) -> Result<Self> {
        if logvals.len() != support.len() {
            return Err(Error::SupportMismatch);
        }
        if let Some(i) = logvals.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingValue(support.triple(i)));
        }
        let index = orbits(&support, group);
        let n = index.orbit_count();
        let mut sizes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut incid: [Vec<Vec<(usize, f64)>>; 3] = Default::default();
        for members in index.all_members() {
            let w = logvals[members[0]];
            for &m in members {
                if (logvals[m] - w).abs() > 1e-12 * (1.0 + w.abs()) {
                    return Err(Error::InvalidConfig(format!(
                        "log values are not invariant under the symmetry group ({} vs {})",
                        support.triple(members[0]),
                        support.triple(m)
                    )));
                }
            }
            sizes.push(members.len() as f64);
            weights.push(w);
            for (axis, list) in incid.iter_mut().enumerate() {
                let mut row: Vec<(usize, f64)> = Vec::new();
                for &m in members {
                    let a = support.symbol(m, axis);
                    match row.iter_mut().find(|(s, _)| *s == a) {
                        Some(e) => e.1 += 1.0,
                        None => row.push((a, 1.0)),
                    }
                }
                row.sort_by_key(|e| e.0);
                list.push(row);
            }
        }
        let nsym = [0, 1, 2].map(|axis| support.alphabet(axis).len());
        Ok(OrbitModel {
            support,
            index,
            logvals: logvals.to_vec(),
            sizes,
            weights,
            incid,
            nsym,
        })
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn orbit_index(&self) -> &OrbitIndex {
        &self.index
    }

    pub fn logvals(&self) -> &[f64] {
        &self.logvals
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn orbit_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn incidence(&self, axis: usize) -> &[Vec<(usize, f64)>] {
        &self.incid[axis]
    }

    pub fn symbol_count(&self, axis: usize) -> usize {
        self.nsym[axis]
    }

    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.support.len() as f64; self.len()]
    }

    pub fn marginals(&self, p: &[f64]) -> [Vec<f64>; 3] {
        let mut out = [0, 1, 2].map(|axis| vec![0.0; self.nsym[axis]]);
        for (axis, m) in out.iter_mut().enumerate() {
            for (o, row) in self.incid[axis].iter().enumerate() {
                for &(a, k) in row {
                    m[a] += k * p[o];
                }
            }
        }
        out
    }

    pub fn psi(&self, p: &[f64]) -> f64 {
        let marg = self.marginals(p);
        self.psi_with(p, &marg)
    }

    pub fn psi_with(&self, p: &[f64], marg: &[Vec<f64>; 3]) -> f64 {
        let h: f64 = marg.iter().map(|m| entropy_of(m)).sum::<f64>() / 3.0;
        let lin: f64 = (0..self.len())
            .filter(|&o| p[o] > 0.0)
            .map(|o| self.sizes[o] * self.weights[o] * p[o])
            .sum();
        h + lin
    }

    /// `∂Ψ/∂p_o`. Infinite where an orbit touches a zero marginal.
    pub fn gradient(&self, marg: &[Vec<f64>; 3]) -> Vec<f64> {
        let logs = marg.clone().map(|m| m.into_iter().map(|x| 1.0 + x.ln()).collect::<Vec<_>>());
        (0..self.len())
            .map(|o| {
                let mut g = self.sizes[o] * self.weights[o];
                for (axis, l) in logs.iter().enumerate() {
                    for &(a, k) in &self.incid[axis][o] {
                        g -= k * l[a] / 3.0;
                    }
                }
                g
            })
            .collect()
    }

    /// Per-triple stationarity residual of the simplex-constrained problem:
    /// `max_s max(P(s)·|dev_s|, dev_s⁺)` with `dev_s = g_s − Σ_t P(t) g_t`.
    pub fn kkt_residual(&self, weights: &[f64]) -> f64 {
        let s = &self.support;
        let marg = [0, 1, 2].map(|axis| crate::distribution::marginal_values(s, weights, axis));
        let g: Vec<f64> = (0..s.len())
            .map(|i| {
                self.logvals[i] - (0..3).map(|axis| 1.0 + marg[axis][s.symbol(i, axis)].ln()).sum::<f64>() / 3.0
            })
            .collect();
        let mean: f64 = weights.iter().zip(&g).filter(|(w, _)| **w > 0.0).map(|(w, x)| w * x).sum();
        weights
            .iter()
            .zip(&g)
            .map(|(&w, &x)| {
                let dev = x - mean;
                if w > 0.0 {
                    (w * dev.abs()).max(dev.max(0.0))
                } else {
                    dev.max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn expand(&self, p: &[f64]) -> Vec<f64> {
        (0..self.support.len()).map(|i| p[self.index.orbit_of(i)]).collect()
    }

    /// Orbit means of full-support weights.
    pub fn compress(&self, weights: &[f64]) -> Vec<f64> {
        self.index
            .all_members()
            .iter()
            .map(|m| m.iter().map(|&i| weights[i]).sum::<f64>() / m.len() as f64)
            .collect()
    }

    /// Rescales orbit masses so that `Σ c_o p_o = 1`.
    pub fn normalize(&self, p: &mut [f64]) {
        let total: f64 = p.iter().zip(&self.sizes).map(|(x, c)| x * c).sum();
        p.iter_mut().for_each(|x| *x /= total);
    }

    pub fn distribution(&self, p: &[f64]) -> Result<Distribution> {
        Distribution::normalized(self.support.clone(), self.expand(p))
    }
}
