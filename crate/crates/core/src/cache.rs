//! On-disk cache of per-level results, keyed by construction, `q`, `ρ`, level
//! and the algorithm used at each level up to it.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::constructions::Construction;
use crate::error::{Error, Result};
use crate::format::{write_atomic, Real};
use crate::power::{ComponentFile, LevelFile, LevelPolicy, LevelResult, ValueTable};
use crate::support::Support;

pub fn level_path(dir: &Path, construction: &str, q: u32, rho: f64, level: u32, signature: &str) -> PathBuf {
    dir.join(format!("{construction}-q{q}-r{level}-rho{}-{signature}.json", Real(rho)))
}

pub fn store_level(dir: &Path, construction: &dyn Construction, rho: f64, policy: &LevelPolicy, level: &LevelResult) -> Result<()> {
    let k = level.table.level;
    let file = LevelFile {
        construction: construction.name().to_string(),
        q: construction.q(),
        rho: Real(rho),
        level: k,
        signature: policy.signature(k),
        values: level
            .table
            .support()
            .triples()
            .iter()
            .zip(level.table.log_values())
            .map(|(t, v)| (*t, Real(*v)))
            .collect(),
        components: level.components.iter().map(ComponentFile::from_record).collect(),
    };
    let path = level_path(dir, &file.construction, file.q, rho, k, &file.signature);
    write_atomic(&path, serde_json::to_string(&file)?.as_bytes())?;
    Ok(())
}

pub fn load_level(
    dir: &Path,
    construction: &dyn Construction,
    rho: f64,
    level: u32,
    policy: &LevelPolicy,
    supports: &[Arc<Support>],
) -> Result<Option<LevelResult>> {
    let path = level_path(dir, construction.name(), construction.q(), rho, level, &policy.signature(level));
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let file: LevelFile = serde_json::from_str(&text)?;
    let support = supports.get(level as usize).ok_or(Error::SupportMismatch)?;
    if file.values.len() != support.len() || file.values.iter().zip(support.triples()).any(|((t, _), s)| t != s) {
        return Err(Error::Certificate(format!("cache file {} does not match the level support", path.display())));
    }
    let table = ValueTable::new(rho, level, support.clone(), file.values.iter().map(|(_, v)| v.0).collect())?;
    let components = file
        .components
        .iter()
        .map(|c| c.to_record(level))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(LevelResult { table, components }))
}
