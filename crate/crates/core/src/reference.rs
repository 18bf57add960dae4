//! Published component tables bundled with the crate. They serve as warm
//! starts and as replay inputs; the optimizer never reads them as targets.
//!
//! Each row lists one representative per coordinate-symmetry orbit; the
//! per-triple masses apply to every member of the orbit.

use std::sync::Arc;

use serde::Deserialize;

use crate::constructions::{Construction, ConstructionRegistry};
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::format::Real;
use crate::omega::BoundCertificate;
use crate::power::{analyze_power, power_supports, AnalysisConfig, PowerAnalysis, ValueTable};
use crate::solvers::{certify, BoundOutcome, SolverConfig};
use crate::support::{Support, Triple};

const BUNDLED: [(&str, &str); 4] = [
    ("cw-q5-power4", include_str!("../data/cw-q5-power4.json")),
    ("cw-q5-power8", include_str!("../data/cw-q5-power8.json")),
    ("asym-q3-power4", include_str!("../data/asym-q3-power4.json")),
    ("asym-q3-power8", include_str!("../data/asym-q3-power8.json")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    PHat,
    QHat,
    PTilde,
}

impl Column {
    fn key(self) -> &'static str {
        match self {
            Column::PHat => "p_hat",
            Column::QHat => "q_hat",
            Column::PTilde => "p_tilde",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct ReferenceRow {
    pub abc: Triple,
    pub d: Option<usize>,
    pub chi: Option<usize>,
    pub value: Real,
    #[serde(default)]
    pub p_hat: Option<Real>,
    #[serde(default)]
    pub q_hat: Option<Real>,
    #[serde(default)]
    pub p_tilde: Option<Real>,
}

impl ReferenceRow {
    pub fn mass(&self, column: Column) -> Option<f64> {
        match column {
            Column::PHat => self.p_hat,
            Column::QHat => self.q_hat,
            Column::PTilde => self.p_tilde,
        }
        .map(Real::get)
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct ReferenceTable {
    pub name: String,
    pub construction: String,
    pub q: u32,
    pub rho: Real,
    pub power: u32,
    pub algorithm: String,
    pub global_value: Option<Real>,
    pub rows: Vec<ReferenceRow>,
}

pub fn names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn load(name: &str) -> Result<ReferenceTable> {
    let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name).ok_or_else(|| Error::UnknownName {
        kind: "reference table",
        name: name.to_string(),
        available: names().join(", "),
    })?;
    Ok(serde_json::from_str(text)?)
}

/// A bundled table by name, or a table file in the same format.
pub fn load_any(name_or_path: &str) -> Result<ReferenceTable> {
    if names().contains(&name_or_path) {
        return load(name_or_path);
    }
    let text = std::fs::read_to_string(name_or_path)?;
    Ok(serde_json::from_str(&text)?)
}

impl ReferenceTable {
    pub fn level(&self) -> Result<u32> {
        if !self.power.is_power_of_two() {
            return Err(Error::OutOfRange {
                what: "power",
                value: self.power as i64,
            });
        }
        Ok(self.power.trailing_zeros())
    }

    pub fn build_construction(&self) -> Result<Arc<dyn Construction>> {
        ConstructionRegistry::default().build(&self.construction, self.q)
    }

    pub fn support(&self) -> Result<Arc<Support>> {
        let c = self.build_construction()?;
        let level = self.level()?;
        Ok(power_supports(c.as_ref(), level)?.swap_remove(level as usize))
    }

    fn spread(&self, column: Option<Column>) -> Result<(Arc<Support>, Vec<f64>)> {
        let construction = self.build_construction()?;
        let sym = construction.symmetry();
        let support = self.support()?;
        let mut out = vec![f64::NAN; support.len()];
        for row in &self.rows {
            let x = match column {
                Some(c) => row.mass(c).ok_or_else(|| Error::Certificate(format!("{} has no {} column", self.name, c.key())))?,
                None => row.value.get().ln(),
            };
            for t in sym.orbit_of(&row.abc) {
                let i = support.index_of(&t).ok_or(Error::Unreachable(t))?;
                out[i] = x;
            }
        }
        if let Some(i) = out.iter().position(|x| x.is_nan()) {
            return Err(Error::MissingValue(support.triple(i)));
        }
        Ok((support, out))
    }

    /// The listed distribution on the full support, renormalized (the printed
    /// masses are rounded).
    pub fn distribution(&self, column: Column) -> Result<Distribution> {
        let (support, w) = self.spread(Some(column))?;
        Distribution::normalized(support, w)
    }

    /// The listed component values as a table at `rho`.
    pub fn value_table(&self) -> Result<ValueTable> {
        let (support, lv) = self.spread(None)?;
        ValueTable::new(self.rho.get(), self.level()?, support, lv)
    }

    /// `(triple, mass)` entries suitable as a warm start.
    pub fn warm_start(&self, column: Column) -> Result<Vec<(Triple, f64)>> {
        let d = self.distribution(column)?;
        Ok(d.support().triples().iter().copied().zip(d.weights().iter().copied()).collect())
    }

    /// The column that holds the distribution the table's bound was computed from.
    pub fn global_column(&self) -> Column {
        if self.rows.iter().all(|r| r.p_tilde.is_some()) {
            Column::PTilde
        } else {
            Column::QHat
        }
    }

    /// Certifies the listed distribution against the listed component values.
    pub fn replay(&self, column: Column, cfg: &SolverConfig) -> Result<BoundOutcome> {
        let table = self.value_table()?;
        let p = self.distribution(column)?;
        certify(table.support(), &p, table.log_values(), cfg)
    }

    /// Certifies the listed distribution against another set of component values.
    pub fn replay_against(&self, column: Column, table: &ValueTable, cfg: &SolverConfig) -> Result<BoundOutcome> {
        let p = self.distribution(column)?;
        if p.support() != table.support() {
            return Err(Error::SupportMismatch);
        }
        certify(table.support(), &p, table.log_values(), cfg)
    }
}

/// Solves every component afresh at the table's `ρ` with `cfg`, then
/// certifies the listed global distribution against the recomputed values.
/// The resulting certificate depends on the table only through that distribution.
pub fn replay_certificate(table: &ReferenceTable, cfg: &AnalysisConfig, safety: f64) -> Result<(PowerAnalysis, BoundCertificate)> {
    let construction = table.build_construction()?;
    let analysis = analyze_power(construction.as_ref(), table.level()?, table.rho.get(), cfg)?;
    let mut global = table.replay_against(table.global_column(), analysis.table(), &cfg.solver)?;
    global.algorithm = format!("replay:{}", table.name);
    let cert = BoundCertificate::with_global(&analysis, &global, safety);
    Ok((analysis, cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_tables_parse() {
        for name in names() {
            let t = load(name).unwrap();
            assert!(!t.rows.is_empty());
            t.value_table().unwrap();
        }
    }

    #[test]
    fn power8_replay_certifies() {
        let t = load("cw-q5-power8").unwrap();
        let out = t.replay(Column::PTilde, &SolverConfig::default()).unwrap();
        assert!(out.log_bound.exp() > 5764802.8 * (1.0 - 1e-5), "{}", out.log_bound.exp());
    }
}
