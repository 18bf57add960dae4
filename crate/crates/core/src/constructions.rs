//! Starting tensors: their base supports and values, border ranks, symmetry,
//! and closed-form values of boundary components of their powers.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::support::{make_support, CoordinateGroup, Support, Triple};

pub trait Construction: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    fn q(&self) -> u32;
    fn base_support(&self) -> Support;
    /// Log lower bound on the value of the base component `t`.
    fn base_log_value(&self, t: &Triple, rho: f64) -> Result<f64>;
    /// Border rank of the base tensor.
    fn border_rank(&self) -> u64;
    fn log_border_rank(&self) -> f64 {
        (self.border_rank() as f64).ln()
    }
    /// Coordinate permutations under which component values are invariant.
    fn symmetry(&self) -> CoordinateGroup;
    /// Closed-form log value of component `t` of the `2^r`-th power when `t`
    /// is a boundary component, `None` otherwise.
    fn boundary_log_value(&self, r: u32, t: &Triple, rho: f64) -> Result<Option<f64>>;
}

/// Exact `2^r! / (e! · ((b−e)/2)! · (2^r − (b+e)/2)!) · q^e` summed over `e ≡ b (mod 2)`, `e ≤ b`.
pub fn cw_boundary_count(r: u32, b: u64, q: u32) -> Result<BigUint> {
    let n = 1u64 << r;
    if b > n {
        return Err(Error::OutOfRange {
            what: "boundary index b",
            value: b as i64,
        });
    }
    let fact = factorials(n);
    let qb = BigUint::from(q);
    let mut total = BigUint::zero();
    let mut e = b % 2;
    while e <= b {
        let j = (b - e) / 2;
        let i = n - (b + e) / 2;
        let term = &fact[n as usize] / (&fact[e as usize] * &fact[j as usize] * &fact[i as usize]) * qb.pow(e as u32);
        total += term;
        e += 2;
    }
    Ok(total)
}

pub fn cw_boundary_value(r: u32, b: u64, q: u32, rho: f64) -> Result<f64> {
    Ok(rho / 3.0 * big_ln(&cw_boundary_count(r, b, q)?))
}

/// Exact `C(2^r, b) · q^b`.
pub fn asym_boundary_count(r: u32, b: u64, q: u32) -> Result<BigUint> {
    let n = 1u64 << r;
    if b > n {
        return Err(Error::OutOfRange {
            what: "boundary index b",
            value: b as i64,
        });
    }
    let fact = factorials(n);
    Ok(&fact[n as usize] / (&fact[b as usize] * &fact[(n - b) as usize]) * BigUint::from(q).pow(b as u32))
}

pub fn asym_boundary_value(r: u32, b: u64, q: u32, rho: f64) -> Result<f64> {
    Ok(rho / 3.0 * big_ln(&asym_boundary_count(r, b, q)?))
}

fn factorials(n: u64) -> Vec<BigUint> {
    let mut f = vec![BigUint::one()];
    for k in 1..=n {
        let next = &f[(k - 1) as usize] * BigUint::from(k);
        f.push(next);
    }
    f
}

/// Natural log of a big integer without overflowing `f64`.
pub fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("fits");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn check_q(q: u32) -> Result<()> {
    if q < 1 {
        return Err(Error::OutOfRange {
            what: "q",
            value: q as i64,
        });
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(2.0..=3.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("rho must lie in [2, 3], got {rho}")));
    }
    Ok(())
}

/// The Coppersmith–Winograd construction: fully symmetric, border rank `q + 2`.
#[derive(Clone, Debug)]
pub struct CoppersmithWinograd {
    q: u32,
}

impl CoppersmithWinograd {
    pub fn new(q: u32) -> Result<Self> {
        check_q(q)?;
        Ok(CoppersmithWinograd { q })
    }
}

impl Construction for CoppersmithWinograd {
    fn name(&self) -> &'static str {
        "cw"
    }

    fn q(&self) -> u32 {
        self.q
    }

    fn base_support(&self) -> Support {
        make_support([
            Triple::new(2, 0, 0),
            Triple::new(0, 2, 0),
            Triple::new(0, 0, 2),
            Triple::new(1, 1, 0),
            Triple::new(1, 0, 1),
            Triple::new(0, 1, 1),
        ])
        .expect("base support is valid")
    }

    fn base_log_value(&self, t: &Triple, rho: f64) -> Result<f64> {
        self.boundary_log_value(0, t, rho)?.ok_or(Error::Unreachable(*t))
    }

    fn border_rank(&self) -> u64 {
        self.q as u64 + 2
    }

    fn symmetry(&self) -> CoordinateGroup {
        CoordinateGroup::full()
    }

    /// A component is on the boundary when one coordinate is zero; its value
    /// depends only on the smaller of the two others.
    fn boundary_log_value(&self, r: u32, t: &Triple, rho: f64) -> Result<Option<f64>> {
        check_rho(rho)?;
        let n = 1i64 << r;
        if t.sum() != 2 * n || t.0.iter().any(|&x| x < 0) {
            return Err(Error::Unreachable(*t));
        }
        let Some(zero) = t.0.iter().position(|&x| x == 0) else {
            return Ok(None);
        };
        let others: Vec<i64> = (0..3).filter(|&i| i != zero).map(|i| t.0[i]).collect();
        let b = others[0].min(others[1]);
        cw_boundary_value(r, b as u64, self.q, rho).map(Some)
    }
}

/// Asymmetric construction with border rank `q + 1`, symmetric in the last two coordinates.
#[derive(Clone, Debug)]
pub struct Asymmetric {
    q: u32,
}

impl Asymmetric {
    pub fn new(q: u32) -> Result<Self> {
        check_q(q)?;
        Ok(Asymmetric { q })
    }
}

impl Construction for Asymmetric {
    fn name(&self) -> &'static str {
        "asym"
    }

    fn q(&self) -> u32 {
        self.q
    }

    fn base_support(&self) -> Support {
        make_support([Triple::new(2, 0, 0), Triple::new(1, 1, 0), Triple::new(1, 0, 1)]).expect("base support is valid")
    }

    fn base_log_value(&self, t: &Triple, rho: f64) -> Result<f64> {
        self.boundary_log_value(0, t, rho)?.ok_or(Error::Unreachable(*t))
    }

    fn border_rank(&self) -> u64 {
        self.q as u64 + 1
    }

    fn symmetry(&self) -> CoordinateGroup {
        CoordinateGroup::swap_last_two()
    }

    /// Boundary components have a zero second or third coordinate.
    fn boundary_log_value(&self, r: u32, t: &Triple, rho: f64) -> Result<Option<f64>> {
        check_rho(rho)?;
        let n = 1i64 << r;
        let [a, b, c] = t.0;
        if t.sum() != 2 * n || a < n || a > 2 * n || !(0..=n).contains(&b) || !(0..=n).contains(&c) {
            return Err(Error::Unreachable(*t));
        }
        if b == 0 {
            asym_boundary_value(r, c as u64, self.q, rho).map(Some)
        } else if c == 0 {
            asym_boundary_value(r, b as u64, self.q, rho).map(Some)
        } else {
            Ok(None)
        }
    }
}

pub fn cw_construction(q: u32) -> Result<Arc<dyn Construction>> {
    Ok(Arc::new(CoppersmithWinograd::new(q)?))
}

pub fn asym_construction(q: u32) -> Result<Arc<dyn Construction>> {
    Ok(Arc::new(Asymmetric::new(q)?))
}

type Factory = fn(u32) -> Result<Arc<dyn Construction>>;

/// Constructions selectable by name.
#[derive(Clone)]
pub struct ConstructionRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl Default for ConstructionRegistry {
    fn default() -> Self {
        let mut r = ConstructionRegistry {
            factories: BTreeMap::new(),
        };
        r.register("cw", cw_construction);
        r.register("asym", asym_construction);
        r.register("cw_asym", asym_construction);
        r
    }
}

impl ConstructionRegistry {
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn build(&self, name: &str, q: u32) -> Result<Arc<dyn Construction>> {
        let f = self.factories.get(name).ok_or_else(|| Error::UnknownName {
            kind: "construction",
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        f(q)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cw_base_values() {
        let c = CoppersmithWinograd::new(6).unwrap();
        let rho = 2.5;
        assert_eq!(c.base_log_value(&Triple::new(0, 2, 0), rho).unwrap(), 0.0);
        let v = c.base_log_value(&Triple::new(0, 1, 1), rho).unwrap();
        assert!((v - rho / 3.0 * 6f64.ln()).abs() < 1e-15);
        assert_eq!(c.border_rank(), 8);
        assert!((CoppersmithWinograd::new(5).unwrap().log_border_rank() - 7f64.ln()).abs() < 1e-15);
        let at3 = c.base_log_value(&Triple::new(1, 1, 0), 3.0).unwrap();
        assert!((at3 - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn asym_base_values() {
        let c = Asymmetric::new(4).unwrap();
        let rho = 2.46;
        assert_eq!(c.base_log_value(&Triple::new(2, 0, 0), rho).unwrap(), 0.0);
        for t in [Triple::new(1, 1, 0), Triple::new(1, 0, 1)] {
            assert!((c.base_log_value(&t, rho).unwrap() - rho / 3.0 * 4f64.ln()).abs() < 1e-15);
        }
        assert!((Asymmetric::new(3).unwrap().log_border_rank() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn invalid_q() {
        assert!(CoppersmithWinograd::new(0).is_err());
        assert!(Asymmetric::new(0).is_err());
    }

    #[test]
    fn cw_boundary_closed_forms() {
        for q in [1u32, 5, 6] {
            assert_eq!(cw_boundary_count(1, 2, q).unwrap(), BigUint::from(q * q + 2));
            assert_eq!(cw_boundary_count(1, 1, q).unwrap(), BigUint::from(2 * q));
        }
        assert_eq!(cw_boundary_value(0, 0, 5, 2.4).unwrap(), 0.0);
        assert!(cw_boundary_count(2, 5, 5).is_err());
        let v = cw_boundary_value(3, 4, 5, 2.3728642).unwrap();
        assert!((v.exp() / 5040.7184 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn asym_boundary_closed_forms() {
        let v = asym_boundary_value(1, 1, 3, 2.5).unwrap();
        assert!((v - 2.5 / 3.0 * 6f64.ln()).abs() < 1e-14);
        assert_eq!(asym_boundary_value(4, 0, 3, 2.5).unwrap(), 0.0);
        let v = asym_boundary_value(3, 4, 3, 2.44278).unwrap();
        assert!((v.exp() / 1138.656007 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn boundary_classification() {
        let cw = CoppersmithWinograd::new(5).unwrap();
        assert!(cw.boundary_log_value(2, &Triple::new(3, 3, 2), 2.4).unwrap().is_none());
        let a = cw.boundary_log_value(2, &Triple::new(6, 0, 2), 2.4).unwrap().unwrap();
        let b = cw.boundary_log_value(2, &Triple::new(0, 2, 6), 2.4).unwrap().unwrap();
        assert_eq!(a, b);
        let asym = Asymmetric::new(3).unwrap();
        assert!(asym.boundary_log_value(2, &Triple::new(4, 2, 2), 2.4).unwrap().is_none());
        assert!(asym.boundary_log_value(2, &Triple::new(6, 0, 2), 2.4).unwrap().is_some());
        assert!(asym.boundary_log_value(2, &Triple::new(2, 4, 2), 2.4).is_err());
    }

    #[test]
    fn big_log_of_huge_integer() {
        let x = BigUint::from(3u32).pow(2000);
        assert!((big_ln(&x) - 2000.0 * 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn registry_lookup() {
        let reg = ConstructionRegistry::default();
        assert_eq!(reg.build("cw", 5).unwrap().border_rank(), 7);
        assert_eq!(reg.build("asym", 3).unwrap().border_rank(), 4);
        assert!(matches!(reg.build("strassen", 1), Err(Error::UnknownName { .. })));
    }
}
