//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::densela::{from_rows, Matrix};
use crate::error::{Error, Result};
use crate::flowsim::FlowKind;
use crate::netgraph::GraphSpec;
use crate::partition::{Scheme, SylvesterProblem};

/// Environment variable that overrides the configured random seed.
pub const SEED_ENV: &str = "SYLFLOW_SEED";

pub const DEFAULT_CONVERGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub partition: Scheme,
    /// Column groups (1-based) for the `grouped` partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
    pub graph: GraphSpec,
    /// One inner graph per cluster, clustering only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_graphs: Option<Vec<GraphSpec>>,
    pub flow: FlowKind,
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<f64>,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default = "default_converge_tol")]
    pub converge_tol: f64,
}

fn default_converge_tol() -> f64 {
    DEFAULT_CONVERGE_TOL
}

/// Inline matrices, or a path to a JSON file holding `{"a", "b", "c"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    Inline(InlineProblem),
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl InlineProblem {
    pub fn from_problem(p: &SylvesterProblem) -> Self {
        let rows = |m: &Matrix| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        Self { a: rows(p.a()), b: rows(p.b()), c: rows(p.c()) }
    }

    pub fn build(&self) -> Result<SylvesterProblem> {
        let named = |name: &str, rows: &[Vec<f64>]| {
            from_rows(rows).map_err(|e| Error::Config(format!("problem.{name}: {e}")))
        };
        SylvesterProblem::new(named("a", &self.a)?, named("b", &self.b)?, named("c", &self.c)?)
            .map_err(|e| Error::Config(format!("problem: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default)]
    pub kind: InitKind,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Zero,
    Random,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let ProblemSource::File { path: p } = &cfg.problem {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.problem = ProblemSource::File { path: dir.join(p) };
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn problem(&self) -> Result<SylvesterProblem> {
        match &self.problem {
            ProblemSource::Inline(p) => p.build(),
            ProblemSource::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let inline: InlineProblem = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                inline.build()
            }
        }
    }

    /// The configured seed unless `SYLFLOW_SEED` holds a valid override.
    pub fn effective_seed(&self) -> Result<u64> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(self.init.seed),
        }
    }
}
