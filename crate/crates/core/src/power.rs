//! Recursive analysis of the powers `t^{⊗2^r}`: product supports, component
//! problems, and the level-by-level driver.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::Construction;
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::format::{floats, reals, Real};
use crate::solvers::{certify, AlgorithmRegistry, BoundOutcome, SolverConfig, ValueProblem};
use crate::support::{induced_group, make_support, mirror_group, Support, SymmetryGroup, Triple};

/// Per-triple log lower bounds on the component values at one level.
#[derive(Clone, Debug)]
pub struct ValueTable {
    pub rho: f64,
    pub level: u32,
    support: Arc<Support>,
    log_values: Vec<f64>,
}

impl ValueTable {
    pub fn new(rho: f64, level: u32, support: Arc<Support>, log_values: Vec<f64>) -> Result<Self> {
        if log_values.len() != support.len() {
            return Err(Error::SupportMismatch);
        }
        if let Some(i) = log_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingValue(support.triple(i)));
        }
        Ok(ValueTable {
            rho,
            level,
            support,
            log_values,
        })
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn get(&self, t: &Triple) -> Option<f64> {
        self.support.index_of(t).map(|i| self.log_values[i])
    }

    /// Base-level table of a construction.
    pub fn base(construction: &dyn Construction, rho: f64) -> Result<Self> {
        let support = Arc::new(construction.base_support());
        let values = support
            .triples()
            .iter()
            .map(|t| construction.base_log_value(t, rho))
            .collect::<Result<Vec<_>>>()?;
        ValueTable::new(rho, 0, support, values)
    }
}

/// `{s + s' | s ∈ a, s' ∈ b}`.
pub fn product_support(a: &Support, b: &Support) -> Result<Support> {
    a.require_tight()?;
    b.require_tight()?;
    let mut out = Vec::with_capacity(a.len() * b.len());
    for s in a.triples() {
        for t in b.triples() {
            out.push(s.add(t));
        }
    }
    make_support(out)
}

/// Supports of `t^{⊗2^k}` for `k = 0..=r`.
pub fn power_supports(construction: &dyn Construction, r: u32) -> Result<Vec<Arc<Support>>> {
    let mut out = vec![Arc::new(construction.base_support())];
    for _ in 0..r {
        let prev = out.last().expect("non-empty");
        out.push(Arc::new(product_support(prev, prev)?));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ComponentProblem {
    pub target: Triple,
    pub support: Arc<Support>,
    pub group: SymmetryGroup,
}

/// `{s ∈ prev | target − s ∈ prev}` with the mirror symmetry `s ↦ target − s`.
pub fn component_support(prev: &Support, target: Triple) -> Result<ComponentProblem> {
    let triples: Vec<Triple> = prev
        .triples()
        .iter()
        .filter(|s| prev.contains(&target.sub(s)))
        .copied()
        .collect();
    if triples.is_empty() {
        return Err(Error::Unreachable(target));
    }
    let support = make_support(triples)?;
    let group = mirror_group(&support, &target)?;
    Ok(ComponentProblem {
        target,
        support: Arc::new(support),
        group,
    })
}

/// `prev(s) + prev(target − s)` for every triple of the component support.
pub fn component_log_values(prev: &ValueTable, problem: &ComponentProblem) -> Result<Vec<f64>> {
    problem
        .support
        .triples()
        .iter()
        .map(|s| {
            let mirror = problem.target.sub(s);
            match (prev.get(s), prev.get(&mirror)) {
                (Some(a), Some(b)) => Ok(a + b),
                (None, _) => Err(Error::MissingValue(*s)),
                (_, None) => Err(Error::MissingValue(mirror)),
            }
        })
        .collect()
}

/// Which value algorithm runs at each level (for components and the global problem).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelPolicy {
    Uniform(String),
    /// The kernel-constrained algorithm up to and including `through`, the convex one above.
    Hybrid { through: u32 },
}

impl LevelPolicy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(LevelPolicy::Hybrid { through: 3 }),
            other => {
                AlgorithmRegistry::default().get(other)?;
                Ok(LevelPolicy::Uniform(other.to_string()))
            }
        }
    }

    pub fn algorithm_for(&self, level: u32) -> &str {
        match self {
            LevelPolicy::Uniform(name) => name,
            LevelPolicy::Hybrid { through } => {
                if level <= *through {
                    "B"
                } else {
                    "A"
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            LevelPolicy::Uniform(name) => name.clone(),
            LevelPolicy::Hybrid { through } if *through == 3 => "hybrid".into(),
            LevelPolicy::Hybrid { through } => format!("hybrid{through}"),
        }
    }

    /// Algorithm names for levels `1..=level`, e.g. `"BBA"`.
    pub fn signature(&self, level: u32) -> String {
        (1..=level).map(|k| self.algorithm_for(k).to_string()).collect()
    }
}

/// Warm starts keyed by level and, for components, by target.
#[derive(Clone, Debug, Default)]
pub struct WarmStarts {
    pub global: BTreeMap<u32, Vec<Vec<(Triple, f64)>>>,
    pub components: BTreeMap<(u32, Triple), Vec<Vec<(Triple, f64)>>>,
}

impl WarmStarts {
    fn materialize(list: Option<&Vec<Vec<(Triple, f64)>>>, support: &Arc<Support>) -> Result<Vec<Distribution>> {
        let mut out = Vec::new();
        for entries in list.into_iter().flatten() {
            let mut w = vec![0.0; support.len()];
            for (t, x) in entries {
                let i = support.index_of(t).ok_or(Error::SupportMismatch)?;
                w[i] = *x;
            }
            out.push(Distribution::normalized(support.clone(), w)?);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub solver: SolverConfig,
    pub policy: LevelPolicy,
    pub warm_starts: WarmStarts,
    /// Directory for per-level cached results.
    pub cache_dir: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            solver: SolverConfig::default(),
            policy: LevelPolicy::Uniform("A".into()),
            warm_starts: WarmStarts::default(),
            cache_dir: None,
        }
    }
}

/// Solved interior component (one per coordinate-symmetry orbit).
#[derive(Clone, Debug)]
pub struct ComponentRecord {
    pub level: u32,
    pub target: Triple,
    pub support: Arc<Support>,
    pub witness: Distribution,
    pub log_value: f64,
    pub algorithm: String,
    pub feasible: bool,
}

/// Everything computed at one level: the value table and its solved components.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub table: ValueTable,
    pub components: Vec<ComponentRecord>,
}

#[derive(Clone, Debug)]
pub struct PowerAnalysis {
    pub construction: String,
    pub q: u32,
    pub rho: f64,
    pub level: u32,
    pub policy: LevelPolicy,
    pub levels: Vec<LevelResult>,
    pub global: BoundOutcome,
    pub threshold_log: f64,
    pub solver: SolverConfig,
}

impl PowerAnalysis {
    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn table(&self) -> &ValueTable {
        &self.levels[self.level as usize].table
    }

    pub fn components(&self) -> impl Iterator<Item = &ComponentRecord> {
        self.levels.iter().flat_map(|l| l.components.iter())
    }
}

/// Solves one interior component.
pub fn solve_component(
    prev: &ValueTable,
    prev_support: &Support,
    target: Triple,
    algorithm: &str,
    cfg: &AnalysisConfig,
) -> Result<ComponentRecord> {
    let level = prev.level + 1;
    let problem = component_support(prev_support, target)?;
    let logvals = component_log_values(prev, &problem)?;
    let warm = WarmStarts::materialize(cfg.warm_starts.components.get(&(level, target)), &problem.support)?;
    let vp = ValueProblem::new(problem.support.clone(), problem.group.clone(), logvals.clone())?;
    let outcome = AlgorithmRegistry::default()
        .get(algorithm)?
        .run(&vp, &cfg.solver, &warm)
        .or_else(|_| {
            // any distribution certifies some bound; fall back to the uniform one
            let mut o = certify(&problem.support, &Distribution::uniform(problem.support.clone()), &logvals, &cfg.solver)?;
            o.algorithm = "fallback".into();
            Ok::<_, Error>(o)
        })?;
    Ok(ComponentRecord {
        level,
        target,
        support: problem.support,
        witness: outcome.witness,
        log_value: outcome.log_bound,
        algorithm: outcome.algorithm,
        feasible: outcome.feasible,
    })
}

/// Builds the table of level `prev.level + 1` from solved representatives.
pub fn assemble_level(
    construction: &dyn Construction,
    support: &Arc<Support>,
    rho: f64,
    level: u32,
    solved: &BTreeMap<Triple, f64>,
) -> Result<ValueTable> {
    let sym = construction.symmetry();
    let values = support
        .triples()
        .iter()
        .map(|t| match construction.boundary_log_value(level, t, rho)? {
            Some(v) => Ok(v),
            None => solved.get(&sym.representative(t)).copied().ok_or(Error::MissingValue(*t)),
        })
        .collect::<Result<Vec<_>>>()?;
    ValueTable::new(rho, level, support.clone(), values)
}

/// Interior component representatives of a level, one per coordinate-symmetry orbit.
pub fn interior_representatives(construction: &dyn Construction, support: &Support, level: u32, rho: f64) -> Result<Vec<Triple>> {
    let sym = construction.symmetry();
    let mut reps = Vec::new();
    for t in support.triples() {
        if construction.boundary_log_value(level, t, rho)?.is_none() && sym.representative(t) == *t {
            reps.push(*t);
        }
    }
    Ok(reps)
}

fn compute_level(
    construction: &dyn Construction,
    prev: &ValueTable,
    support: &Arc<Support>,
    cfg: &AnalysisConfig,
) -> Result<LevelResult> {
    let level = prev.level + 1;
    let algorithm = cfg.policy.algorithm_for(level);
    let reps = interior_representatives(construction, support, level, prev.rho)?;
    let prev_support = prev.support().clone();
    let components = reps
        .par_iter()
        .map(|&t| solve_component(prev, &prev_support, t, algorithm, cfg))
        .collect::<Result<Vec<_>>>()?;
    let solved: BTreeMap<Triple, f64> = components.iter().map(|c| (c.target, c.log_value)).collect();
    let table = assemble_level(construction, support, prev.rho, level, &solved)?;
    Ok(LevelResult { table, components })
}

/// Global bound at the top level of a set of tables.
pub fn solve_global(
    construction: &dyn Construction,
    table: &ValueTable,
    algorithm: &str,
    solver: &SolverConfig,
    warm: &[Distribution],
) -> Result<BoundOutcome> {
    let support = table.support().clone();
    let group = induced_group(&support, &construction.symmetry())?;
    let vp = ValueProblem::new(support, group, table.log_values().to_vec())?;
    AlgorithmRegistry::default().get(algorithm)?.run(&vp, solver, warm)
}

/// Full recursive analysis of `t^{⊗2^r}` at `rho`.
pub fn analyze_power(construction: &dyn Construction, r: u32, rho: f64, cfg: &AnalysisConfig) -> Result<PowerAnalysis> {
    cfg.solver.validate()?;
    if !(2.0..=3.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("rho must lie in [2, 3], got {rho}")));
    }
    if r > 6 {
        return Err(Error::OutOfRange {
            what: "level r",
            value: r as i64,
        });
    }
    let supports = power_supports(construction, r)?;
    let mut levels = vec![LevelResult {
        table: ValueTable::base(construction, rho)?,
        components: Vec::new(),
    }];
    for k in 1..=r {
        let cached = match &cfg.cache_dir {
            Some(dir) => crate::cache::load_level(dir, construction, rho, k, &cfg.policy, &supports)?,
            None => None,
        };
        let result = match cached {
            Some(level) => level,
            None => {
                let prev = &levels.last().expect("non-empty").table;
                let level = compute_level(construction, prev, &supports[k as usize], cfg)?;
                if let Some(dir) = &cfg.cache_dir {
                    crate::cache::store_level(dir, construction, rho, &cfg.policy, &level)?;
                }
                level
            }
        };
        levels.push(result);
    }
    let top = &levels[r as usize].table;
    let warm = WarmStarts::materialize(cfg.warm_starts.global.get(&r), top.support())?;
    let global = solve_global(construction, top, cfg.policy.algorithm_for(r), &cfg.solver, &warm)?;
    Ok(PowerAnalysis {
        construction: construction.name().to_string(),
        q: construction.q(),
        rho,
        level: r,
        policy: cfg.policy.clone(),
        levels,
        global,
        threshold_log: (1u64 << r) as f64 * construction.log_border_rank(),
        solver: cfg.solver.clone(),
    })
}

/// Serializable form of a level result (used by the cache).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelFile {
    pub construction: String,
    pub q: u32,
    pub rho: Real,
    pub level: u32,
    pub signature: String,
    pub values: Vec<(Triple, Real)>,
    pub components: Vec<ComponentFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentFile {
    pub abc: Triple,
    pub support: Vec<Triple>,
    pub distribution: Vec<Real>,
    pub log_value: Real,
    pub algorithm: String,
    pub feasible: bool,
}

impl ComponentFile {
    pub fn from_record(c: &ComponentRecord) -> Self {
        ComponentFile {
            abc: c.target,
            support: c.support.triples().to_vec(),
            distribution: reals(c.witness.weights()),
            log_value: Real(c.log_value),
            algorithm: c.algorithm.clone(),
            feasible: c.feasible,
        }
    }

    pub fn to_record(&self, level: u32) -> Result<ComponentRecord> {
        let support = Arc::new(make_support(self.support.iter().copied())?);
        let witness = Distribution::with_tolerance(support.clone(), floats(&self.distribution), 1e-9)?;
        Ok(ComponentRecord {
            level,
            target: self.abc,
            support,
            witness,
            log_value: self.log_value.0,
            algorithm: self.algorithm.clone(),
            feasible: self.feasible,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{asym_construction, cw_construction};

    #[test]
    fn cw_square_support() {
        let cw = cw_construction(6).unwrap();
        let s = power_supports(cw.as_ref(), 1).unwrap();
        assert_eq!(s[1].len(), 15);
        assert_eq!(s[1].degree(), Some(4));
    }

    #[test]
    fn asym_square_support() {
        let u = asym_construction(3).unwrap();
        let s = power_supports(u.as_ref(), 1).unwrap();
        let expected: Vec<Triple> = (2..=4)
            .flat_map(|a| (0..=2).map(move |b| Triple::new(a, b, 4 - a - b)))
            .filter(|t| (0..=2).contains(&t.0[2]))
            .collect();
        assert_eq!(s[1].triples(), make_support(expected).unwrap().triples());
    }

    #[test]
    fn identity_product() {
        let cw = cw_construction(6).unwrap();
        let base = cw.base_support();
        let unit = make_support([Triple::new(0, 0, 0)]).unwrap();
        assert_eq!(product_support(&base, &unit).unwrap(), base);
    }

    #[test]
    fn component_supports() {
        let cw = cw_construction(6).unwrap();
        let p = component_support(&cw.base_support(), Triple::new(2, 1, 1)).unwrap();
        let expected = make_support([
            Triple::new(2, 0, 0),
            Triple::new(1, 1, 0),
            Triple::new(1, 0, 1),
            Triple::new(0, 1, 1),
        ])
        .unwrap();
        assert_eq!(*p.support, expected);
        let u = asym_construction(3).unwrap();
        let p = component_support(&u.base_support(), Triple::new(2, 1, 1)).unwrap();
        assert_eq!(p.support.triples(), &[Triple::new(1, 0, 1), Triple::new(1, 1, 0)]);
        let corner = component_support(&cw.base_support(), Triple::new(4, 0, 0)).unwrap();
        assert_eq!(corner.support.triples(), &[Triple::new(2, 0, 0)]);
        assert!(matches!(
            component_support(&cw.base_support(), Triple::new(5, 0, 0)),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn component_values_are_mirror_sums() {
        let cw = cw_construction(6).unwrap();
        let rho = 2.4;
        let base = ValueTable::base(cw.as_ref(), rho).unwrap();
        let p = component_support(base.support(), Triple::new(2, 1, 1)).unwrap();
        let v = component_log_values(&base, &p).unwrap();
        let lq = rho / 3.0 * 6f64.ln();
        let at = |t: Triple| v[p.support.index_of(&t).unwrap()];
        assert!((at(Triple::new(1, 1, 0)) - 2.0 * lq).abs() < 1e-15);
        assert!((at(Triple::new(2, 0, 0)) - lq).abs() < 1e-15);
        let corner = component_support(base.support(), Triple::new(2, 2, 0)).unwrap();
        let cv = component_log_values(&base, &corner).unwrap();
        let i = corner.support.index_of(&Triple::new(1, 1, 0)).unwrap();
        assert!((cv[i] - 2.0 * lq).abs() < 1e-15);
    }

    #[test]
    fn policies() {
        let h = LevelPolicy::parse("hybrid").unwrap();
        assert_eq!(h.signature(5), "BBBAA");
        assert_eq!(LevelPolicy::parse("A").unwrap().signature(2), "AA");
        assert!(LevelPolicy::parse("C").is_err());
    }
}
