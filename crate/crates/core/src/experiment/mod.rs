//! Study drivers behind the command-line tool: configuration, the
//! relaxation and weak-strong sweeps, single runs, the check suites and the
//! rate fits.

pub mod checks;
pub mod config;
pub mod fit;
pub mod studies;

use serde::{Deserialize, Serialize};

pub use checks::{run_checks, ChecksReport};
pub use config::{Mode, NuKind, NuPolicy, Profile, StudyConfig};
pub use fit::{rate_fit, relaxation_model, RateFit};
pub use studies::{
    run_gradient_flow, run_relaxation_study, run_single, run_weakstrong_study, RelaxationReport, RunStatus,
    SingleRunReport, WeakStrongReport,
};

use crate::error::Result;

/// One asserted quantity and its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Criterion {
    pub fn new(name: &str, value: f64, threshold: f64, pass: bool) -> Criterion {
        Criterion {
            name: name.into(),
            value,
            threshold,
            pass,
        }
    }
}

/// Sweep manifest: resolved config, code version and per-run status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: StudyConfig,
    pub complete: bool,
    /// Index into `runs` of the first failed run.
    pub failure_point: Option<usize>,
    /// First error message, if any run or the shared gradient flow failed.
    pub failure: Option<String>,
    pub runs: Vec<studies::RunSummary>,
}

impl Manifest {
    pub fn new(cfg: &StudyConfig, report: &RelaxationReport) -> Result<Manifest> {
        Ok(Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            complete: report.complete && !report.runs.is_empty(),
            failure_point: report
                .runs
                .iter()
                .position(|r| matches!(r.status, RunStatus::Failed { .. })),
            failure: report.runs.iter().find_map(|r| match &r.status {
                RunStatus::Failed { error } => Some(format!("epsilon = {}: {error}", r.epsilon)),
                _ => None,
            }),
            runs: report.runs.clone(),
        })
    }
}
