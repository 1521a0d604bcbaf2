//! Experiment configuration: one JSON document, every field but the
//! workload optional. Command-line flags override file values and the
//! `GRANULYZER_SEED` environment variable overrides the file seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Thresholds;
use crate::simulator::ScheduleMode;
use crate::topology::DEFAULT_EDGE_BUDGET;
use crate::workloads::{preset, WorkloadOverrides, WorkloadSpec};

pub const SEED_ENV: &str = "GRANULYZER_SEED";
pub const DEFAULT_RANKS: &str = "4:256:x2";
pub const DEFAULT_PHASES: u32 = 8;
pub const DEFAULT_SEED: u64 = 42;

/// A preset name or a complete inline workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorkloadRef {
    Preset(String),
    Inline(Box<WorkloadSpec>),
}

/// Rank list as explicit values or a range expression such as `4:256:x2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RanksField {
    List(Vec<u32>),
    Expr(String),
}

impl RanksField {
    pub fn resolve(&self) -> Result<Vec<u32>> {
        match self {
            RanksField::List(v) => Ok(v.clone()),
            RanksField::Expr(s) => parse_ranks(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub samples_csv: Option<PathBuf>,
    pub traces_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub curve_csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub workload: WorkloadRef,
    #[serde(default)]
    pub overrides: WorkloadOverrides,
    #[serde(default)]
    pub ranks: Option<RanksField>,
    #[serde(default)]
    pub phases: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub modes: Option<Vec<ScheduleMode>>,
    #[serde(default)]
    pub output: OutputPaths,
    /// Static imbalance penalty; estimated from simulation when absent.
    #[serde(default)]
    pub penalty: Option<f64>,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    #[serde(default)]
    pub edge_budget: Option<u64>,
    /// Upper end of the crossover search range; defaults to the largest rank.
    #[serde(default)]
    pub range_hi: Option<u32>,
}

/// Fully defaulted configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub workload: WorkloadSpec,
    pub ranks: Vec<u32>,
    pub phases: u32,
    pub seed: u64,
    pub modes: Vec<ScheduleMode>,
    pub output: OutputPaths,
    pub penalty: Option<f64>,
    pub thresholds: Thresholds,
    pub edge_budget: u64,
    pub range_hi: u32,
}

impl ExperimentConfig {
    pub fn for_workload(name: &str) -> Self {
        ExperimentConfig {
            workload: WorkloadRef::Preset(name.to_string()),
            overrides: WorkloadOverrides::default(),
            ranks: None,
            phases: None,
            seed: None,
            modes: None,
            output: OutputPaths::default(),
            penalty: None,
            thresholds: None,
            edge_budget: None,
            range_hi: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Resolve defaults, reading the seed override from the environment.
    pub fn resolve(&self) -> Result<Resolved> {
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| {
                Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))
            })?),
            Err(_) => None,
        };
        self.resolve_with_seed(env_seed)
    }

    pub fn resolve_with_seed(&self, env_seed: Option<u64>) -> Result<Resolved> {
        let mut workload = match &self.workload {
            WorkloadRef::Preset(name) => preset(name)?,
            WorkloadRef::Inline(spec) => (**spec).clone(),
        };
        workload.apply(&self.overrides);
        workload.validate()?;

        let ranks = match &self.ranks {
            Some(r) => r.resolve()?,
            None => parse_ranks(DEFAULT_RANKS)?,
        };
        crate::simulator::validate_ranks(&ranks).map_err(|e| Error::Config(e.to_string()))?;

        let phases = self.phases.unwrap_or(DEFAULT_PHASES);
        if phases == 0 {
            return Err(Error::Config("phases must be positive".into()));
        }
        let modes = self
            .modes
            .clone()
            .unwrap_or_else(|| vec![ScheduleMode::Dynamic]);
        if modes.is_empty() {
            return Err(Error::Config("modes must not be empty".into()));
        }
        if let Some(p) = self.penalty {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::Config(format!("penalty {p} must be >= 1")));
            }
        }
        let thresholds = self.thresholds.unwrap_or_default();
        if !(thresholds.beneficial > thresholds.detrimental && thresholds.detrimental >= 0.0) {
            return Err(Error::Config(
                "thresholds need beneficial > detrimental >= 0".into(),
            ));
        }
        let range_hi = self
            .range_hi
            .unwrap_or(*ranks.last().expect("validated non-empty"));
        Ok(Resolved {
            workload,
            phases,
            seed: env_seed.or(self.seed).unwrap_or(DEFAULT_SEED),
            modes,
            output: self.output.clone(),
            penalty: self.penalty,
            thresholds,
            edge_budget: self.edge_budget.unwrap_or(DEFAULT_EDGE_BUDGET),
            range_hi,
            ranks,
        })
    }
}

/// Parse `a:b:xF` (geometric), `a:b:+S` or `a:b` (arithmetic), or a
/// comma-separated list.
pub fn parse_ranks(expr: &str) -> Result<Vec<u32>> {
    let bad = || Error::Config(format!("invalid rank expression `{expr}`"));
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| bad());
    let expr = expr.trim();
    if expr.contains(':') {
        let parts: Vec<&str> = expr.split(':').collect();
        let (lo, hi, step) = match parts.as_slice() {
            [lo, hi] => (num(lo)?, num(hi)?, "+1"),
            [lo, hi, step] => (num(lo)?, num(hi)?, step.trim()),
            _ => return Err(bad()),
        };
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        let mut out = Vec::new();
        let mut p = lo;
        if let Some(f) = step.strip_prefix('x') {
            let f = num(f)?;
            if f < 2 {
                return Err(bad());
            }
            while p <= hi {
                out.push(p);
                p = match p.checked_mul(f) {
                    Some(v) => v,
                    None => break,
                };
            }
        } else {
            let s = num(step.strip_prefix('+').unwrap_or(step))?;
            if s == 0 {
                return Err(bad());
            }
            while p <= hi {
                out.push(p);
                p = match p.checked_add(s) {
                    Some(v) => v,
                    None => break,
                };
            }
        }
        Ok(out)
    } else {
        expr.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect()
    }
}
