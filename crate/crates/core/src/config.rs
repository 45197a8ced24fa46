//! Run configuration: a TOML document with per-module sections, overridable
//! by dotted keys such as `solver.tol` or `opt.max-iters`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ResourceBudget};
use crate::optimizer::{self, OptimizerConfig};
use crate::steady::SolverOptions;

/// Environment variable naming the root directory for outputs.
pub const OUTPUT_ROOT_ENV: &str = "POPSIZE_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct DomainSpec {
    /// One extent for an interval, two for a box.
    pub extents: Vec<f64>,
    /// Cells per axis; chosen from μ when absent.
    pub cells: Option<Vec<usize>>,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec { extents: vec![1.0], cells: None }
    }
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    /// Grid for a run at diffusivity `mu`. In 1D the default is about
    /// `1000 / mu` cells; in 2D it is 32 cells per unit length.
    pub fn grid(&self, mu: f64) -> Result<Grid> {
        let cells = match &self.cells {
            Some(c) => c.clone(),
            None if self.dim() == 1 => vec![optimizer::default_cells(mu)],
            None => self.extents.iter().map(|e| ((32.0 * e).round() as usize).max(8)).collect(),
        };
        match (self.extents.as_slice(), cells.as_slice()) {
            ([a], [n]) => Grid::interval(*a, *n),
            ([a, b], [nx, ny]) => Grid::rectangle(*a, *b, *nx, *ny),
            _ => Err(Error::Config(format!(
                "domain needs 1 or 2 extents with as many cell counts, got {:?} and {:?}",
                self.extents, cells
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    /// Relative width in log μ at which golden-section refinement stops.
    pub golden_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { min: 1e-3, max: 1.0, points: 40, golden_tol: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<String>,
    pub seed: u64,
    /// Output directory; relative paths are resolved against the output root.
    pub output: Option<PathBuf>,
    pub domain: DomainSpec,
    pub budget: ResourceBudget,
    /// Single diffusivity for `solve`, `optimize`, `eigen`.
    pub mu: f64,
    /// Diffusivities for experiments that visit several.
    pub mu_list: Option<Vec<f64>>,
    pub sweep: SweepConfig,
    pub expansion_order: usize,
    pub solver: SolverOptions,
    pub opt: OptimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            seed: 1,
            output: None,
            domain: DomainSpec::default(),
            budget: ResourceBudget { m0: 0.4, kappa: 1.0 },
            mu: 1.0,
            mu_list: None,
            sweep: SweepConfig::default(),
            expansion_order: crate::asymptotics::DEFAULT_ORDER,
            solver: SolverOptions::default(),
            opt: OptimizerConfig::default(),
        }
    }
}

/// Parses a command-line value as a TOML literal, falling back to a string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::Config(format!("malformed key `{key}`")));
        }
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("`{part}` in `{key}` is not a section"))),
        };
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Self::with_overrides(s, &[])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Parses `base` and applies `(dotted key, value)` overrides on top.
    pub fn with_overrides(base: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = base.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, parse_value(v))?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        self.opt.validate()?;
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if let Some(l) = &self.mu_list {
            if l.is_empty() || l.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                return Err(Error::Config("mu-list entries must be positive".into()));
            }
        }
        if !(self.sweep.min > 0.0 && self.sweep.max > self.sweep.min && self.sweep.points >= 3) {
            return Err(Error::Config("sweep needs 0 < min < max and at least 3 points".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::Config("solver.tol must be positive".into()));
        }
        if self.expansion_order == 0 {
            return Err(Error::Config("expansion-order must be at least 1".into()));
        }
        if !(1..=2).contains(&self.domain.dim()) || self.domain.extents.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("domain extents must be 1 or 2 positive lengths".into()));
        }
        Ok(())
    }

    /// Optimizer settings carrying this run's solver options and seed.
    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig { solver: self.solver.clone(), seed: self.seed, ..self.opt.clone() }
    }

    /// Where outputs go: `output` if absolute, otherwise joined to `root`
    /// (itself defaulting to `$POPSIZE_OUT` or `out`).
    pub fn output_dir(&self, root: Option<&Path>, default_name: &str) -> PathBuf {
        let root = root
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        match &self.output {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => root.join(p),
            None => root.join(default_name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let s = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&s).unwrap(), cfg);
    }

    #[test]
    fn overrides_apply_to_nested_keys() {
        let base = "mu = 2.0\n[solver]\ntol = 1e-9\n";
        let cfg = RunConfig::with_overrides(
            base,
            &[
                ("solver.tol".into(), "1e-12".into()),
                ("opt.max-iters".into(), "17".into()),
                ("domain.cells".into(), "[128]".into()),
                ("experiment".into(), "regime-gallery".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.mu, 2.0);
        assert_eq!(cfg.solver.tol, 1e-12);
        assert_eq!(cfg.opt.max_iters, 17);
        assert_eq!(cfg.domain.grid(1.0).unwrap().cells(0), 128);
        assert_eq!(cfg.experiment.as_deref(), Some("regime-gallery"));
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_documents_are_rejected() {
        assert!(RunConfig::from_toml_str("mu = -1.0").is_err());
        assert!(RunConfig::from_toml_str("[budget]\nm0 = 2.0\nkappa = 1.0").is_err());
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::with_overrides("", &[("mu.x".into(), "1".into())]).is_err());
    }

    #[test]
    fn default_grid_follows_mu() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.domain.grid(0.5).unwrap().cells(0), 2000);
        let boxed = DomainSpec { extents: vec![1.0, 2.0], cells: None };
        let g = boxed.grid(1.0).unwrap();
        assert_eq!((g.cells(0), g.cells(1)), (32, 64));
    }
}
