use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsk_core::experiment::studies::{read_sweep_csv, relaxation_criteria};
use nsk_core::experiment::{
    run_checks, run_gradient_flow, run_relaxation_study, run_single, run_weakstrong_study, Mode, NuPolicy,
    RunStatus, StudyConfig,
};
use nsk_core::io::write_json;
use nsk_core::{NskError, Result};

#[derive(Parser)]
#[command(name = "nsk", version, about = "Relaxation and weak-strong studies for the NSK system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single relaxation run, or a gradient-flow run with --gradient-flow.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gradient_flow: bool,
    },
    /// Well-prepared relaxation sweep over ε.
    Relax {
        #[command(flatten)]
        common: Common,
        /// Also write plot_data.csv with one row per (ε, t, Ψ_γ).
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Weak-strong twin and perturbed runs.
    Wsu {
        #[command(flatten)]
        common: Common,
    },
    /// Constitutive identity and pointwise inequality suites.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Re-fit the rates of a saved sweep directory.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML or JSON study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid points.
    #[arg(short = 'n', long = "n")]
    n: Option<usize>,
    /// Comma-separated ε list.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Fixed viscosity ν (0 selects the zero policy).
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self, mode: Mode) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::load(path)?,
            None if mode == Mode::Weakstrong => StudyConfig::weakstrong_default(),
            None => StudyConfig::default(),
        };
        cfg.mode = match (mode, cfg.mode) {
            (Mode::SingleRun, Mode::GradientFlow) => Mode::GradientFlow,
            (m, _) => m,
        };
        if let Some(n) = self.n {
            cfg.grid.n = n;
        }
        if let Some(list) = &self.epsilon {
            if mode == Mode::Relaxation {
                cfg.epsilon_list = list.clone();
            } else if let [eps] = list[..] {
                cfg.params.epsilon = eps;
            } else {
                return Err(NskError::Config("--epsilon takes a single value outside `relax`".into()));
            }
        }
        if let Some(nu) = self.nu {
            cfg.params.nu = nu;
            cfg.nu_policy = if nu == 0.0 { NuPolicy::zero() } else { NuPolicy::fixed(nu) };
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn refit(input: &Path, output: Option<&Path>) -> Result<bool> {
    let rows = read_sweep_csv(&input.join("sweep.csv"))?;
    let (sup_fit, final_fit, criteria) = relaxation_criteria(&rows)?;
    let pass = criteria.iter().all(|c| c.pass);
    let doc = serde_json::json!({
        "slope": sup_fit.slope,
        "sup_psi": sup_fit,
        "psi_final": final_fit,
        "criteria": criteria,
        "pass": pass,
    });
    let dir = output.unwrap_or(input);
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("rate_fit.json"), &doc)?;
    print_json(&doc)?;
    Ok(pass)
}

/// `None` when a sweep was aborted by a failed run.
fn execute(cmd: Command) -> Result<Option<bool>> {
    match cmd {
        Command::Run { common, gradient_flow } => {
            let mut cfg = common.resolve(Mode::SingleRun)?;
            if gradient_flow {
                cfg.mode = Mode::GradientFlow;
            }
            let out = cfg.output_dir.clone();
            let report = match cfg.mode {
                Mode::GradientFlow => run_gradient_flow(&cfg, Some(&out))?,
                _ => run_single(&cfg, Some(&out))?,
            };
            print_json(&report.criteria)?;
            Ok(Some(report.pass))
        }
        Command::Relax { common, emit_plot_data } => {
            let cfg = common.resolve(Mode::Relaxation)?;
            let report = run_relaxation_study(&cfg, Some(&cfg.output_dir), emit_plot_data)?;
            print_json(&report.criteria)?;
            if let Some((eps, e)) = report.runs.iter().find_map(|r| match &r.status {
                RunStatus::Failed { error } => Some((r.epsilon, error.clone())),
                _ => None,
            }) {
                eprintln!("nsk: solver failure: sweep aborted at epsilon = {eps}: {e}");
                return Ok(None);
            }
            Ok(Some(report.pass))
        }
        Command::Wsu { common } => {
            let cfg = common.resolve(Mode::Weakstrong)?;
            let report = run_weakstrong_study(&cfg, Some(&cfg.output_dir))?;
            print_json(&report.criteria)?;
            Ok(Some(report.pass))
        }
        Command::Check { common } => {
            let cfg = common.resolve(Mode::Checks)?;
            let report = run_checks(&cfg, Some(&cfg.output_dir))?;
            let failed: Vec<_> = report
                .constitutive
                .identities
                .iter()
                .filter(|i| !i.pass)
                .map(|i| format!("{} (γ = {}, s = {}): {:e}", i.name, i.gamma, i.s, i.max_residual))
                .chain(
                    report
                        .pointwise
                        .iter()
                        .filter(|p| !p.report.pass)
                        .map(|p| format!("pointwise (γ = {}, s = {})", p.gamma, p.s)),
                )
                .collect();
            print_json(&serde_json::json!({ "pass": report.pass, "failed": failed }))?;
            Ok(Some(report.pass))
        }
        Command::Fit { input, output } => refit(&input, output.as_deref()).map(Some),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Some(true)) => ExitCode::SUCCESS,
        Ok(Some(false)) => ExitCode::from(1),
        Ok(None) => ExitCode::from(2),
        Err(e) => {
            let kind = if e.is_solver_failure() { "solver failure" } else { "error" };
            eprintln!("nsk: {kind}: {e}");
            ExitCode::from(2)
        }
    }
}
