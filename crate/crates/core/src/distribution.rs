//! Probability distributions on supports and the quantities built from them.
//!
//! All logarithms are natural. Zero-mass entries contribute exactly zero to
//! every entropy sum (they are skipped, never evaluated as a limit).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::support::{orbits, Support, SymmetryGroup};

/// Default tolerance for normalization and marginal agreement.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Distribution {
    support: Arc<Support>,
    weights: Vec<f64>,
}

impl Distribution {
    /// Weights aligned with the support's canonical order; must already sum to 1.
    pub fn new(support: Arc<Support>, weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(support, weights, DEFAULT_TOL)
    }

    pub fn with_tolerance(support: Arc<Support>, weights: Vec<f64>, tol: f64) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for a support of {} triples",
                weights.len(),
                support.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weight {} on {} is not a non-negative number",
                weights[i],
                support.triple(i)
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total:.17} (tolerance {tol:e})"
            )));
        }
        Ok(Distribution { support, weights })
    }

    /// Rescales non-negative weights to sum to one.
    pub fn normalized(support: Arc<Support>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::with_tolerance(support, weights, 1e-9)
    }

    pub fn uniform(support: Arc<Support>) -> Self {
        let n = support.len();
        Distribution {
            support,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(support: Arc<Support>, index: usize) -> Self {
        let mut weights = vec![0.0; support.len()];
        weights[index] = 1.0;
        Distribution { support, weights }
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_of(&self, t: &crate::support::Triple) -> Option<f64> {
        self.support.index_of(t).map(|i| self.weights[i])
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    /// Convex combination `λ·self + (1−λ)·other`.
    pub fn mix(&self, other: &Distribution, lambda: f64) -> Result<Distribution> {
        if self.support != other.support {
            return Err(Error::SupportMismatch);
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Ok(Distribution {
            support: self.support.clone(),
            weights,
        })
    }
}

/// The marginal `P_ℓ` along one axis, aligned with the support's alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalVector {
    pub axis: usize,
    pub symbols: Vec<i64>,
    pub values: Vec<f64>,
}

impl MarginalVector {
    pub fn get(&self, symbol: i64) -> Option<f64> {
        self.symbols.binary_search(&symbol).ok().map(|i| self.values[i])
    }
}

/// Marginal sums of `weights` along `axis`.
pub fn marginal_values(support: &Support, weights: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; support.alphabet(axis).len()];
    for (i, w) in weights.iter().enumerate() {
        out[support.symbol(i, axis)] += w;
    }
    out
}

pub fn marginal(p: &Distribution, axis: usize) -> MarginalVector {
    MarginalVector {
        axis,
        symbols: p.support.alphabet(axis).to_vec(),
        values: marginal_values(&p.support, &p.weights, axis),
    }
}

/// `−Σ x log x` over the positive entries.
pub fn entropy_of(values: &[f64]) -> f64 {
    -values.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

pub fn entropy(p: &Distribution) -> f64 {
    entropy_of(&p.weights)
}

/// `Σ_ℓ H(P_ℓ) / 3`.
pub fn marginal_entropy_term(support: &Support, weights: &[f64]) -> f64 {
    (0..3).map(|axis| entropy_of(&marginal_values(support, weights, axis))).sum::<f64>() / 3.0
}

/// Whether all three marginals agree entrywise within `tol`.
pub fn compatible(p: &Distribution, q: &Distribution, tol: f64) -> Result<bool> {
    if p.support != q.support {
        return Err(Error::SupportMismatch);
    }
    Ok((0..3).all(|axis| {
        marginal_values(&p.support, &p.weights, axis)
            .iter()
            .zip(marginal_values(&q.support, &q.weights, axis))
            .all(|(a, b)| (a - b).abs() <= tol)
    }))
}

/// Orbit average of `p` under `group`.
pub fn symmetrize(p: &Distribution, group: &SymmetryGroup) -> Distribution {
    let index = orbits(&p.support, group);
    let mut weights = vec![0.0; p.weights.len()];
    for members in index.all_members() {
        let mean = members.iter().map(|&i| p.weights[i]).sum::<f64>() / members.len() as f64;
        for &i in members {
            weights[i] = mean;
        }
    }
    Distribution {
        support: p.support.clone(),
        weights,
    }
}

/// `Ψ(P) = Σ_ℓ H(P_ℓ)/3 + Σ_s P(s)·logvals(s)`.
///
/// `logvals` is aligned with the support; a non-finite entry counts as a
/// missing value and is an error only where `P` has positive mass.
pub fn psi(p: &Distribution, logvals: &[f64]) -> Result<f64> {
    psi_weights(&p.support, &p.weights, logvals)
}

pub fn psi_weights(support: &Support, weights: &[f64], logvals: &[f64]) -> Result<f64> {
    if logvals.len() != support.len() {
        return Err(Error::SupportMismatch);
    }
    let mut linear = 0.0;
    for (i, (&w, &v)) in weights.iter().zip(logvals).enumerate() {
        if w > 0.0 {
            if !v.is_finite() {
                return Err(Error::MissingValue(support.triple(i)));
            }
            linear += w * v;
        }
    }
    Ok(marginal_entropy_term(support, weights) + linear)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::support::{induced_group, make_support, CoordinateGroup, Triple};

    fn cw_base() -> Arc<Support> {
        Arc::new(
            make_support([
                Triple::new(2, 0, 0),
                Triple::new(1, 1, 0),
                Triple::new(1, 0, 1),
                Triple::new(0, 2, 0),
                Triple::new(0, 1, 1),
                Triple::new(0, 0, 2),
            ])
            .unwrap(),
        )
    }

    fn by_triple(s: &Arc<Support>, pairs: &[(Triple, f64)]) -> Distribution {
        let mut w = vec![0.0; s.len()];
        for (t, x) in pairs {
            w[s.index_of(t).unwrap()] = *x;
        }
        Distribution::new(s.clone(), w).unwrap()
    }

    #[test]
    fn cw_marginal_matches_closed_form() {
        let s = cw_base();
        let a = [0.05, 0.1, 0.15, 0.2, 0.22, 0.28];
        let p = by_triple(
            &s,
            &[
                (Triple::new(2, 0, 0), a[0]),
                (Triple::new(1, 1, 0), a[1]),
                (Triple::new(1, 0, 1), a[2]),
                (Triple::new(0, 2, 0), a[3]),
                (Triple::new(0, 1, 1), a[4]),
                (Triple::new(0, 0, 2), a[5]),
            ],
        );
        let m = marginal(&p, 0);
        assert!((m.get(2).unwrap() - a[0]).abs() < 1e-15);
        assert!((m.get(1).unwrap() - (a[1] + a[2])).abs() < 1e-15);
        assert!((m.get(0).unwrap() - (a[3] + a[4] + a[5])).abs() < 1e-15);
    }

    #[test]
    fn point_mass_marginal() {
        let s = cw_base();
        let p = Distribution::point_mass(s.clone(), s.index_of(&Triple::new(2, 0, 0)).unwrap());
        let m = marginal(&p, 1);
        assert_eq!(m.get(0), Some(1.0));
        assert_eq!(m.get(1), Some(0.0));
    }

    #[test]
    fn uniform_asym_marginal() {
        let s = Arc::new(make_support([Triple::new(2, 0, 0), Triple::new(1, 1, 0), Triple::new(1, 0, 1)]).unwrap());
        let m = marginal(&Distribution::uniform(s), 0);
        assert!((m.get(2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.get(1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_examples() {
        let s = cw_base();
        assert!((entropy(&Distribution::uniform(s.clone())) - 6f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&Distribution::point_mass(s.clone(), 0)), 0.0);
        let coin = by_triple(&s, &[(Triple::new(2, 0, 0), 0.5), (Triple::new(0, 0, 2), 0.5)]);
        assert!((entropy(&coin) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn compatibility() {
        let s = cw_base();
        let p = Distribution::uniform(s.clone());
        assert!(compatible(&p, &p, 1e-12).unwrap());
        let a = Distribution::point_mass(s.clone(), 0);
        let b = Distribution::point_mass(s.clone(), 1);
        assert!(!compatible(&a, &b, 1e-12).unwrap());
        let other = Arc::new(make_support([Triple::new(1, 1, 1)]).unwrap());
        assert!(matches!(
            compatible(&p, &Distribution::uniform(other), 1e-12),
            Err(Error::SupportMismatch)
        ));
    }

    #[test]
    fn symmetrize_point_mass_spreads_over_orbit() {
        let mut v = Vec::new();
        for a in 0..=4 {
            for b in 0..=4 - a {
                v.push(Triple::new(a, b, 4 - a - b));
            }
        }
        let s = Arc::new(make_support(v).unwrap());
        let g = induced_group(&s, &CoordinateGroup::full()).unwrap();
        let p = Distribution::point_mass(s.clone(), s.index_of(&Triple::new(3, 1, 0)).unwrap());
        let q = symmetrize(&p, &g);
        for t in CoordinateGroup::full().orbit_of(&Triple::new(3, 1, 0)) {
            assert!((q.weight_of(&t).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        }
        let again = symmetrize(&q, &g);
        assert_eq!(again.weights(), q.weights());
        let triv = symmetrize(&p, &SymmetryGroup::trivial(&s));
        assert_eq!(triv.weights(), p.weights());
    }

    #[test]
    fn psi_point_mass_is_log_value() {
        let s = cw_base();
        let p = Distribution::point_mass(s.clone(), 2);
        let mut lv = vec![f64::NAN; s.len()];
        lv[2] = 1.75;
        assert_eq!(psi(&p, &lv).unwrap(), 1.75);
        assert!(matches!(psi(&Distribution::uniform(s), &lv), Err(Error::MissingValue(_))));
    }

    #[test]
    fn psi_cw_base_hand_chosen_point() {
        // a2 = a3 = a5 = 0.3173, q = 6, rho = 2.38719
        let s = cw_base();
        let a = 0.3173;
        let b = (1.0 - 3.0 * a) / 3.0;
        let p = by_triple(
            &s,
            &[
                (Triple::new(2, 0, 0), b),
                (Triple::new(0, 2, 0), b),
                (Triple::new(0, 0, 2), b),
                (Triple::new(1, 1, 0), a),
                (Triple::new(1, 0, 1), a),
                (Triple::new(0, 1, 1), a),
            ],
        );
        let rho = 2.38719;
        let lv: Vec<f64> = s
            .triples()
            .iter()
            .map(|t| if t.0.contains(&2) { 0.0 } else { rho / 3.0 * 6f64.ln() })
            .collect();
        assert!(psi(&p, &lv).unwrap() > 8.00000017f64.ln());
    }
}
