use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::{nonmonotone_threshold, LameMode, Params, StudyRange};
use crate::error::{NskError, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Relaxation,
    Weakstrong,
    Checks,
    SingleRun,
    GradientFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuKind {
    Zero,
    Fixed,
    Scaled,
}

/// `zero`: ν = 0; `fixed`: ν = value; `scaled`: ν = value·ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuPolicy {
    pub kind: NuKind,
    #[serde(default)]
    pub value: f64,
}

impl NuPolicy {
    pub fn zero() -> NuPolicy {
        NuPolicy {
            kind: NuKind::Zero,
            value: 0.0,
        }
    }

    pub fn fixed(value: f64) -> NuPolicy {
        NuPolicy {
            kind: NuKind::Fixed,
            value,
        }
    }

    pub fn nu(&self, epsilon: f64) -> f64 {
        match self.kind {
            NuKind::Zero => 0.0,
            NuKind::Fixed => self.value,
            NuKind::Scaled => self.value * epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 256,
            length: 2.0 * PI,
        }
    }
}

/// One Fourier term `sin·sin(2πkx/L) + cos·cos(2πkx/L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mode1d {
    pub k: u32,
    pub sin: f64,
    pub cos: f64,
}

impl Default for Mode1d {
    fn default() -> Self {
        Mode1d {
            k: 1,
            sin: 0.0,
            cos: 0.0,
        }
    }
}

/// A trigonometric polynomial `mean + Σ modes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    pub mean: f64,
    pub modes: Vec<Mode1d>,
}

impl Default for Profile {
    fn default() -> Self {
        Profile {
            mean: 0.0,
            modes: Vec::new(),
        }
    }
}

impl Profile {
    pub fn density_default() -> Profile {
        Profile {
            mean: 1.0,
            modes: vec![
                Mode1d {
                    k: 1,
                    sin: 0.2,
                    cos: 0.0,
                },
                Mode1d {
                    k: 2,
                    sin: 0.0,
                    cos: 0.1,
                },
            ],
        }
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Field {
        let w = 2.0 * PI / grid.length();
        Field::from_fn(grid, |x| {
            self.mean
                + self
                    .modes
                    .iter()
                    .map(|m| {
                        let a = w * m.k as f64 * x;
                        m.sin * a.sin() + m.cos * a.cos()
                    })
                    .sum::<f64>()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    pub delta: f64,
    pub mode_number: u32,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation {
            delta: 1e-3,
            mode_number: 1,
        }
    }
}

/// Pointwise-inequality and constitutive-identity suite settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSpec {
    pub samples: usize,
    pub grid_points: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    /// `(γ, s)` pairs.
    pub cases: Vec<(f64, f64)>,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        ChecksSpec {
            samples: 100_000,
            grid_points: 2000,
            box_lo: 0.5,
            box_hi: 2.0,
            cases: vec![(2.0, -1.0), (2.0, 0.0), (3.0, 2.0), (3.0, 3.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub mode: Mode,
    pub params: Params,
    /// Amplitude of the bump as a multiple of the non-monotonicity
    /// threshold; overrides `params.bump.amplitude` when set.
    pub bump_factor: Option<f64>,
    pub grid: GridSpec,
    pub epsilon_list: Vec<f64>,
    pub nu_policy: NuPolicy,
    pub t_end: f64,
    pub sample_every: f64,
    pub c_cfl: f64,
    /// Step fraction of the second run in the weak-strong twin comparison.
    pub twin_c_cfl: f64,
    pub initial_density: Profile,
    pub initial_momentum: Profile,
    pub perturbation: Perturbation,
    pub checks: ChecksSpec,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub write_snapshots: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let mut params = Params {
            rho_floor: 0.1,
            ..Params::default()
        };
        params.bump.center = 1.0;
        params.bump.halfwidth = 0.5;
        StudyConfig {
            mode: Mode::Relaxation,
            params,
            bump_factor: None,
            grid: GridSpec::default(),
            epsilon_list: vec![0.2, 0.1, 0.05],
            nu_policy: NuPolicy::zero(),
            t_end: 0.5,
            sample_every: 0.01,
            c_cfl: 0.3,
            twin_c_cfl: 0.15,
            initial_density: Profile::density_default(),
            initial_momentum: Profile::default(),
            perturbation: Perturbation::default(),
            checks: ChecksSpec::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            write_snapshots: false,
        }
    }
}

impl StudyConfig {
    /// Weak-strong defaults: unscaled system, no friction, matched Lamé
    /// coefficients.
    pub fn weakstrong_default() -> StudyConfig {
        let mut cfg = StudyConfig {
            mode: Mode::Weakstrong,
            grid: GridSpec {
                n: 128,
                ..GridSpec::default()
            },
            t_end: 1.0,
            sample_every: 0.02,
            initial_momentum: Profile {
                mean: 0.0,
                modes: vec![Mode1d {
                    k: 1,
                    sin: 0.0,
                    cos: 0.1,
                }],
            },
            bump_factor: Some(1.5),
            ..StudyConfig::default()
        };
        cfg.params.epsilon = 1.0;
        cfg.params.friction = false;
        cfg.params.nu = 0.1;
        cfg.params.lame_mode = LameMode::BdMatched;
        cfg
    }

    /// Parse TOML (default) or JSON (by `.json` extension).
    pub fn load(path: &Path) -> Result<StudyConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NskError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        StudyConfig::parse(&text, is_json).map_err(|e| match e {
            NskError::Config(m) => NskError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, json: bool) -> Result<StudyConfig> {
        if json {
            serde_json::from_str(text).map_err(|e| NskError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| NskError::Config(e.to_string()))
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| NskError::Config(e.to_string()))
    }

    /// Params with the grid length and bump factor applied.
    pub fn resolved_params(&self) -> Params {
        let mut p = self.params.clone();
        p.domain_length = self.grid.length;
        if let Some(f) = self.bump_factor {
            let mut probe = p.clone();
            probe.bump.amplitude = 0.0;
            p.bump.amplitude = f * nonmonotone_threshold(&probe);
        }
        p
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.grid.n, self.grid.length)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NskError::Config(m));
        let p = self.resolved_params();
        let range = match self.mode {
            Mode::Relaxation => StudyRange::Relaxation,
            Mode::Weakstrong => StudyRange::WeakStrong,
            _ => StudyRange::Any,
        };
        p.validate(range)?;
        Grid::new(self.grid.n, self.grid.length)?;
        if !(self.t_end > 0.0) || !(self.sample_every > 0.0) {
            return bad("t_end and sample_every must be positive".into());
        }
        if !(self.c_cfl > 0.0 && self.c_cfl <= 1.0) || !(self.twin_c_cfl > 0.0 && self.twin_c_cfl <= 1.0) {
            return bad("c_cfl and twin_c_cfl must lie in (0, 1]".into());
        }
        if self.nu_policy.value < 0.0 {
            return bad("nu_policy.value must be non-negative".into());
        }
        match self.mode {
            Mode::Relaxation => {
                if self.epsilon_list.len() < 2 {
                    return bad("epsilon_list needs at least 2 entries for a rate fit".into());
                }
                if self.epsilon_list.windows(2).any(|w| !(w[1] < w[0])) || self.epsilon_list.iter().any(|e| !(*e > 0.0)) {
                    return bad("epsilon_list must be positive and strictly decreasing".into());
                }
            }
            Mode::Weakstrong => {
                if !(self.perturbation.delta > 0.0) {
                    return bad("perturbation.delta must be positive in weakstrong mode".into());
                }
                if p.lame_mode != LameMode::BdMatched {
                    return bad("weakstrong mode requires lame_mode = \"bd_matched\"".into());
                }
                if !(p.nu > 0.0) {
                    return bad("weakstrong mode requires nu > 0".into());
                }
                if p.friction || p.epsilon != 1.0 {
                    return bad("weakstrong mode runs the unscaled system: epsilon = 1, friction = false".into());
                }
            }
            Mode::Checks => {
                let c = &self.checks;
                if c.samples < 10_000 {
                    return bad("checks.samples must be at least 10^4".into());
                }
                if !(c.box_lo > 0.0 && c.box_hi >= c.box_lo) {
                    return bad("checks box must satisfy 0 < box_lo ≤ box_hi".into());
                }
            }
            Mode::SingleRun | Mode::GradientFlow => {}
        }
        Ok(())
    }
}
