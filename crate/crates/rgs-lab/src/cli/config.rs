//! Experiment configuration: a single JSON document drives `gen` and `run`.
//!
//! Unknown keys are rejected everywhere, so typos fail loudly instead of
//! silently running a default. A minimal config:
//!
//! ```json
//! {
//!   "experiment_id": "demo",
//!   "matrix": { "kind": "gaussian", "m": 12, "n": 8, "seed": 7 },
//!   "rhs": "gaussian_inconsistent",
//!   "method": "rgs",
//!   "max_iters": 500,
//!   "trials": 8,
//!   "master_seed": 42,
//!   "k_grid": { "every": 50 },
//!   "quantities": [
//!     { "quantity": "direction_projection", "ell": "r" },
//!     { "quantity": "sq_error" }
//!   ]
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Quantity;
use crate::solvers::Method;
use crate::testgen::{MatrixKind, MatrixSpec, RhsMode};

use super::{usage, CliError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Identifier copied into every CSV row; also a safe file-name fragment.
    pub experiment_id: String,
    pub matrix: MatrixSpec,
    pub rhs: RhsMode,
    pub method: Method,
    pub max_iters: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub k_grid: KGridSpec,
    pub quantities: Vec<QuantityRequest>,
}

fn default_trials() -> usize {
    1
}

/// Which iterations to record: either every `n` steps or an explicit list.
/// `0` and `max_iters` are always included.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KGridSpec {
    Every { every: usize },
    List(Vec<usize>),
}

impl Default for KGridSpec {
    fn default() -> Self {
        KGridSpec::Every { every: 10 }
    }
}

impl KGridSpec {
    /// Resolves to an explicit sorted grid over `0..=max_iters`.
    pub fn resolve(&self, max_iters: usize) -> Result<Vec<usize>, CliError> {
        let mut grid = match self {
            KGridSpec::Every { every } => {
                if *every == 0 {
                    return Err(usage("k_grid.every must be positive"));
                }
                (0..=max_iters).step_by(*every).collect::<Vec<_>>()
            }
            KGridSpec::List(ks) => {
                if ks.is_empty() {
                    return Err(usage("k_grid list must not be empty"));
                }
                if let Some(&big) = ks.iter().find(|&&k| k > max_iters) {
                    return Err(usage(format!(
                        "k_grid entry {big} exceeds max_iters = {max_iters}"
                    )));
                }
                ks.clone()
            }
        };
        grid.push(0);
        grid.push(max_iters);
        grid.sort_unstable();
        grid.dedup();
        Ok(grid)
    }
}

/// A singular index: a concrete 1-based integer, or `"r"` for the rank.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EllSpec {
    Index(usize),
    Symbol(String),
}

impl EllSpec {
    pub fn resolve(&self, rank: usize) -> Result<usize, CliError> {
        match self {
            EllSpec::Index(l) => Ok(*l),
            EllSpec::Symbol(s) if s == "r" => Ok(rank),
            EllSpec::Symbol(s) => Err(usage(format!(
                "ell must be a positive integer or \"r\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityRequest {
    pub quantity: Quantity,
    #[serde(default)]
    pub ell: Option<EllSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        let id_ok = !self.experiment_id.is_empty()
            && self
                .experiment_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !id_ok {
            return Err(usage(
                "experiment_id must be non-empty and use only ASCII letters, digits, '_' or '-'",
            ));
        }
        if self.trials == 0 {
            return Err(usage("trials must be positive"));
        }
        if self.quantities.is_empty() {
            return Err(usage("quantities must not be empty"));
        }
        Ok(())
    }

    /// The full-size matrix kinds are heavyweight and opt-in.
    pub fn needs_full(&self) -> bool {
        matches!(self.matrix.kind, MatrixKind::PaperA1 | MatrixKind::PaperA2)
    }
}
