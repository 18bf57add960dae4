//! From value bounds to exponent bounds: threshold tests, bisection over ρ,
//! sweeps, and self-contained certificates that can be re-checked from scratch.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constructions::{Construction, ConstructionRegistry};
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::format::{floats, reals, Real};
use crate::power::{
    analyze_power, assemble_level, component_log_values, component_support, interior_representatives, power_supports, AnalysisConfig,
    PowerAnalysis, ValueTable,
};
use crate::solvers::{certify, BoundOutcome, SolverConfig};
use crate::support::{make_support, Support, Triple};

/// Default slack subtracted from a log bound before it is compared with the threshold.
pub const SAFETY_MARGIN: f64 = 1e-9;

pub const SCHEMA: u32 = 1;

/// Exponent `m = 2^r` for a power given as `m`.
pub fn level_of_power(power: u32) -> Result<u32> {
    if power == 0 || !power.is_power_of_two() || power > 64 {
        return Err(Error::OutOfRange {
            what: "power (must be 1, 2, 4, ..., 64)",
            value: power as i64,
        });
    }
    Ok(power.trailing_zeros())
}

/// Certified log lower bound on `V_ρ(t^{⊗2^r})`.
pub fn value_bound(construction: &dyn Construction, r: u32, rho: f64, cfg: &AnalysisConfig) -> Result<f64> {
    Ok(analyze_power(construction, r, rho, cfg)?.global.log_bound)
}

/// `log_bound − 2^r log R̲`.
pub fn log_margin(a: &PowerAnalysis) -> f64 {
    a.global.log_bound - a.threshold_log
}

pub fn certifies(a: &PowerAnalysis, safety: f64) -> bool {
    log_margin(a) - safety > 0.0
}

/// `V − R̲^m` computed without cancellation.
pub fn margin_linear(log_bound: f64, threshold: f64) -> f64 {
    threshold.exp() * (log_bound - threshold).exp_m1()
}

#[derive(Clone, Debug)]
pub struct OmegaConfig {
    pub rho_tol: f64,
    pub safety: f64,
    /// Optional `(lo, hi)` bracket; `hi` must certify and `lo` must not, or
    /// the search silently widens to `[2, 3]`.
    pub bracket: Option<(f64, f64)>,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        OmegaConfig {
            rho_tol: 1e-7,
            safety: SAFETY_MARGIN,
            bracket: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OmegaResult {
    /// Smallest certifying grid point found.
    pub rho_star: f64,
    /// Reported bound `ρ* + rho_tol`.
    pub omega_bound: f64,
    pub analysis: PowerAnalysis,
    /// Every `(ρ, log margin)` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
    /// Set when the evaluations contradicted monotonicity and a grid scan was used.
    pub non_monotone: bool,
}

struct Search<'a> {
    construction: &'a dyn Construction,
    r: u32,
    cfg: &'a AnalysisConfig,
    ocfg: &'a OmegaConfig,
    evaluations: Vec<(f64, f64)>,
    found: BTreeMap<i64, PowerAnalysis>,
    outcomes: BTreeMap<i64, bool>,
}

impl Search<'_> {
    fn rho(&self, idx: i64) -> f64 {
        2.0 + idx as f64 * self.ocfg.rho_tol
    }

    fn eval(&mut self, idx: i64) -> Result<bool> {
        if let Some(&ok) = self.outcomes.get(&idx) {
            return Ok(ok);
        }
        let rho = self.rho(idx).min(3.0);
        let a = analyze_power(self.construction, self.r, rho, self.cfg)?;
        let margin = log_margin(&a);
        self.evaluations.push((rho, margin));
        let ok = certifies(&a, self.ocfg.safety);
        if ok {
            self.found.insert(idx, a);
        }
        self.outcomes.insert(idx, ok);
        Ok(ok)
    }

    fn monotone(&self) -> bool {
        let first_ok = self.outcomes.iter().find(|(_, &ok)| ok).map(|(&i, _)| i);
        match first_ok {
            Some(i) => self.outcomes.range(i..).all(|(_, &ok)| ok),
            None => true,
        }
    }
}

/// Smallest `ρ` on the grid `2 + k·rho_tol` whose bound clears the threshold.
pub fn omega_upper(construction: &dyn Construction, r: u32, cfg: &AnalysisConfig, ocfg: &OmegaConfig) -> Result<OmegaResult> {
    if !(ocfg.rho_tol > 0.0 && ocfg.rho_tol <= 0.5) {
        return Err(Error::InvalidConfig(format!("rho_tol must lie in (0, 0.5], got {}", ocfg.rho_tol)));
    }
    let mut s = Search {
        construction,
        r,
        cfg,
        ocfg,
        evaluations: Vec::new(),
        found: BTreeMap::new(),
        outcomes: BTreeMap::new(),
    };
    let top = (1.0 / ocfg.rho_tol).ceil() as i64;
    let index = |rho: f64| ((rho - 2.0) / ocfg.rho_tol).round() as i64;
    let (mut lo, mut hi) = (0, top);
    if let Some((a, b)) = ocfg.bracket {
        let (a, b) = (index(a).clamp(0, top), index(b).clamp(0, top));
        if a < b && s.eval(b)? && !s.eval(a)? {
            lo = a;
            hi = b;
        }
    }
    if hi == top && !s.eval(top)? {
        let margin = s.evaluations.last().map(|e| e.1).unwrap_or(f64::NAN);
        return Err(Error::NonCertifying { margin });
    }
    if lo == 0 && s.eval(0)? {
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if s.eval(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut non_monotone = !s.monotone();
    if hi > 0 && !non_monotone {
        // the grid point just below must fail; anything else means the bound is not monotone there
        non_monotone = s.eval(hi - 1)?;
    }
    if non_monotone {
        let span = (hi - lo).max(64);
        let start = (hi - span).max(0);
        let step = (span / 64).max(1);
        let mut idx = start;
        while idx < hi {
            if s.eval(idx)? {
                hi = idx;
                break;
            }
            idx += step;
        }
    }
    let analysis = s.found.remove(&hi).expect("certifying evaluation recorded");
    let rho_star = analysis.rho;
    Ok(OmegaResult {
        rho_star,
        omega_bound: rho_star + ocfg.rho_tol,
        analysis,
        evaluations: s.evaluations,
        non_monotone,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub log_bound: f64,
    pub threshold: f64,
    pub margin_linear: f64,
}

impl SweepRow {
    pub fn from_analysis(a: &PowerAnalysis) -> Self {
        SweepRow {
            rho: a.rho,
            log_bound: a.global.log_bound,
            threshold: a.threshold_log,
            margin_linear: margin_linear(a.global.log_bound, a.threshold_log),
        }
    }
}

pub fn sweep(construction: &dyn Construction, r: u32, rhos: &[f64], cfg: &AnalysisConfig) -> Result<Vec<SweepRow>> {
    rhos.iter()
        .map(|&rho| analyze_power(construction, r, rho, cfg).map(|a| SweepRow::from_analysis(&a)))
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rho,log_bound,threshold,margin_linear\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6e}\n",
            Real(r.rho),
            Real(r.log_bound),
            Real(r.threshold),
            r.margin_linear
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertComponent {
    pub level: u32,
    pub abc: Triple,
    pub support: Vec<Triple>,
    pub distribution: Vec<Real>,
    pub log_value: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertGlobal {
    pub distribution: Vec<Real>,
    pub log_value: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub schema: u32,
    pub construction: String,
    pub q: u32,
    pub power: u32,
    pub rho: Real,
    pub components: Vec<CertComponent>,
    pub global: CertGlobal,
    pub threshold_log: Real,
    pub omega_claim: Option<Real>,
    /// Safety slack used in the threshold comparison.
    pub margin: Real,
    pub config: SolverConfig,
    pub seed: u64,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl BoundCertificate {
    pub fn from_analysis(a: &PowerAnalysis, safety: f64) -> Self {
        Self::with_global(a, &a.global, safety)
    }

    /// A certificate whose global distribution comes from elsewhere (for instance a replayed table).
    pub fn with_global(a: &PowerAnalysis, global: &BoundOutcome, safety: f64) -> Self {
        let components = a
            .components()
            .map(|c| CertComponent {
                level: c.level,
                abc: c.target,
                support: c.support.triples().to_vec(),
                distribution: reals(c.witness.weights()),
                log_value: Real(c.log_value),
            })
            .collect();
        let certified = global.log_bound - a.threshold_log - safety > 0.0;
        let mut metadata = BTreeMap::new();
        metadata.insert("generator".to_string(), format!("laserbound {}", env!("CARGO_PKG_VERSION")));
        metadata.insert("policy".to_string(), a.policy.label());
        metadata.insert("global_algorithm".to_string(), global.algorithm.clone());
        BoundCertificate {
            schema: SCHEMA,
            construction: a.construction.clone(),
            q: a.q,
            power: 1 << a.level,
            rho: Real(a.rho),
            components,
            global: CertGlobal {
                distribution: reals(global.witness.weights()),
                log_value: Real(global.log_bound),
            },
            threshold_log: Real(a.threshold_log),
            omega_claim: certified.then_some(Real(a.rho)),
            margin: Real(safety),
            config: a.solver_config().clone(),
            seed: a.solver_config().rng_seed,
            metadata,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cert: BoundCertificate = serde_json::from_str(text)?;
        if cert.schema != SCHEMA {
            return Err(Error::Certificate(format!("unsupported schema {}", cert.schema)));
        }
        Ok(cert)
    }
}

#[derive(Clone, Debug)]
pub struct ComponentCheck {
    pub level: u32,
    pub abc: Triple,
    pub claimed: f64,
    pub recomputed: f64,
}

impl ComponentCheck {
    /// Recomputed minus claimed log value.
    pub fn residual(&self) -> f64 {
        self.recomputed - self.claimed
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub components: Vec<ComponentCheck>,
    pub claimed_log: f64,
    pub recomputed_log: f64,
    pub threshold_log: f64,
    /// `recomputed_log − threshold_log`.
    pub log_margin: f64,
    pub certifying: bool,
    /// The claim holds: either no claim was made, or the recomputed bound supports it.
    pub verified: bool,
    pub notes: Vec<String>,
}

fn checked_distribution(support: Arc<Support>, weights: &[Real], what: &str) -> Result<Distribution> {
    if weights.len() != support.len() {
        return Err(Error::Certificate(format!("{what}: {} masses for {} triples", weights.len(), support.len())));
    }
    Distribution::with_tolerance(support, floats(weights), 1e-9).map_err(|e| Error::Certificate(format!("{what}: {e}")))
}

/// Rebuilds every level from the stored distributions alone and re-checks the claim.
pub fn verify_certificate(cert: &BoundCertificate, cfg: &SolverConfig) -> Result<VerifyReport> {
    if cert.schema != SCHEMA {
        return Err(Error::Certificate(format!("unsupported schema {}", cert.schema)));
    }
    let construction = ConstructionRegistry::default().build(&cert.construction, cert.q)?;
    let r = level_of_power(cert.power)?;
    let rho = cert.rho.get();
    if !(2.0..=3.0).contains(&rho) {
        return Err(Error::Certificate(format!("rho {rho} outside [2, 3]")));
    }
    let supports = power_supports(construction.as_ref(), r)?;
    let mut stored: BTreeMap<(u32, Triple), &CertComponent> = BTreeMap::new();
    for c in &cert.components {
        if stored.insert((c.level, c.abc), c).is_some() {
            return Err(Error::Certificate(format!("duplicate component {} at level {}", c.abc, c.level)));
        }
    }
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut table = ValueTable::base(construction.as_ref(), rho)?;
    for k in 1..=r {
        let support = &supports[k as usize];
        let mut solved = BTreeMap::new();
        for t in interior_representatives(construction.as_ref(), support, k, rho)? {
            let c = stored
                .remove(&(k, t))
                .ok_or_else(|| Error::Certificate(format!("missing component {t} at level {k}")))?;
            let problem = component_support(table.support(), t)?;
            let listed = make_support(c.support.iter().copied())?;
            if listed != *problem.support {
                return Err(Error::Certificate(format!("component {t} at level {k}: support does not match the regenerated one")));
            }
            let p = checked_distribution(problem.support.clone(), &c.distribution, &format!("component {t} at level {k}"))?;
            let logvals = component_log_values(&table, &problem)?;
            let recomputed = certify(&problem.support, &p, &logvals, cfg)?.log_bound;
            checks.push(ComponentCheck {
                level: k,
                abc: t,
                claimed: c.log_value.get(),
                recomputed,
            });
            solved.insert(t, recomputed);
        }
        table = assemble_level(construction.as_ref(), support, rho, k, &solved)?;
    }
    for (level, abc) in stored.keys() {
        notes.push(format!("ignored extra component {abc} at level {level}"));
    }
    let p = checked_distribution(table.support().clone(), &cert.global.distribution, "global distribution")?;
    let recomputed_log = certify(table.support(), &p, table.log_values(), cfg)?.log_bound;
    let threshold_log = (1u64 << r) as f64 * construction.log_border_rank();
    if (threshold_log - cert.threshold_log.get()).abs() > 1e-12 * threshold_log.abs().max(1.0) {
        notes.push(format!(
            "stored threshold {} differs from recomputed {}",
            cert.threshold_log, threshold_log
        ));
    }
    let safety = cert.margin.get().max(0.0);
    let log_margin = recomputed_log - threshold_log;
    let certifying = log_margin - safety > 0.0;
    let verified = match cert.omega_claim {
        None => true,
        Some(claim) => certifying && claim.get() >= rho,
    };
    if cert.omega_claim.is_some() && !certifying {
        notes.push("recomputed bound does not clear the threshold".into());
    }
    Ok(VerifyReport {
        components: checks,
        claimed_log: cert.global.log_value.get(),
        recomputed_log,
        threshold_log,
        log_margin,
        certifying,
        verified,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::cw_construction;

    #[test]
    fn power_levels() {
        assert_eq!(level_of_power(1).unwrap(), 0);
        assert_eq!(level_of_power(32).unwrap(), 5);
        assert!(level_of_power(3).is_err());
        assert!(level_of_power(0).is_err());
    }

    #[test]
    fn margin_linear_matches_difference() {
        let m = margin_linear(64f64.ln() + 1e-7, 64f64.ln());
        assert!((m - 64.0 * 1e-7).abs() < 1e-12);
    }

    #[test]
    fn base_certificate_round_trips_and_verifies() {
        let cw = cw_construction(6).unwrap();
        let a = analyze_power(cw.as_ref(), 0, 2.38719, &AnalysisConfig::default()).unwrap();
        let cert = BoundCertificate::from_analysis(&a, SAFETY_MARGIN);
        assert!(cert.omega_claim.is_some());
        let text = cert.to_json().unwrap();
        let back = BoundCertificate::from_json(&text).unwrap();
        assert_eq!(back, cert);
        assert_eq!(back.to_json().unwrap(), text);
        let report = verify_certificate(&back, &SolverConfig::default()).unwrap();
        assert!(report.verified);
    }
}
