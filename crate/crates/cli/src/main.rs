use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use acns::ac::{simulate_from_velocity, AcParams, Trajectory};
use acns::harness::{convergence_metrics, emit_report, parse_config, run_sweep, EnergySummary, SweepConfig};
use acns::init::initial_velocity;
use acns::ns::simulate_ns;
use acns::snapshot::{read_trajectory, write_trajectory};
use acns::spacetime::extend_trajectory;
use acns::spacetime::monitors::{
    forcing_term_norm, energy_bound_suite, modal_residual_check, nonlinear_term_norm, pressure_estimate_suite,
    velocity_estimate_suite,
};
use acns::suitability::{balance_reports, energy_terms, refinement_tolerance, term_deviation};

/// Artificial compressibility approximation of incompressible Navier-Stokes:
/// simulations, ε-sweeps, space-time norms and local energy checks.
#[derive(Parser)]
#[command(name = "acns", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write it to disk.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ac")]
        solver: Solver,
        /// ε of the run; defaults to the last entry of eps_list.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Full ε-sweep with report files.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Monitor suites and the modal identity check of one relaxed trajectory.
    Norms {
        #[command(flatten)]
        common: Common,
        /// Stored relaxed trajectory; simulated from the config when absent.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Local energy balance of a trajectory against the bump suite.
    Suitability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Incompressible reference trajectory for the term comparison.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Convergence metrics of a relaxed trajectory against a reference.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Ac,
    Ns,
}

/// `--config` plus targeted overrides shared by every subcommand.
#[derive(Args)]
struct Common {
    /// JSON sweep configuration; without it a 2D, n = 32 default is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "dt-rec")]
    dt_rec: Option<f64>,
    /// Comma-separated, strictly decreasing.
    #[arg(long = "eps-list", value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; ACNS_WORKERS takes precedence.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(p) => parse_config(p).with_context(|| format!("reading {}", p.display()))?,
            None => SweepConfig::minimal(self.dim.unwrap_or(2), self.n.unwrap_or(32)),
        };
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.nu {
            cfg.nu = v;
        }
        if let Some(v) = self.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.dt_rec {
            cfg.dt_rec = v;
        }
        if let Some(v) = &self.eps_list {
            cfg.eps_list = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn pick_eps(cfg: &SweepConfig, eps: Option<f64>) -> f64 {
    eps.unwrap_or_else(|| *cfg.eps_list.last().expect("validated non-empty"))
}

fn params(cfg: &SweepConfig, eps: f64) -> AcParams {
    if cfg.nonlinear {
        AcParams::new(eps, cfg.nu)
    } else {
        AcParams::linear(eps, cfg.nu)
    }
}

fn relaxed_run(cfg: &SweepConfig, stored: Option<&Path>, eps: f64) -> Result<Arc<Trajectory>> {
    Ok(Arc::new(match stored {
        Some(dir) => read_trajectory(dir).with_context(|| format!("reading {}", dir.display()))?,
        None => {
            let u0 = initial_velocity(&cfg.init, &cfg.grid()?)?;
            simulate_from_velocity(&u0, &params(cfg, eps), cfg.t_end, cfg.dt, cfg.dt_rec)?
        }
    }))
}

fn reference_run(cfg: &SweepConfig, stored: Option<&Path>) -> Result<Trajectory> {
    Ok(match stored {
        Some(dir) => read_trajectory(dir).with_context(|| format!("reading {}", dir.display()))?,
        None => {
            let u0 = initial_velocity(&cfg.init, &cfg.grid()?)?;
            simulate_ns(&u0, cfg.nu, cfg.t_end, cfg.dt, cfg.dt_rec)?
        }
    })
}

fn print(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common, solver, eps } => {
            let cfg = common.load()?;
            let u0 = initial_velocity(&cfg.init, &cfg.grid()?)?;
            let (traj, passed) = match solver {
                Solver::Ac => {
                    let eps = pick_eps(&cfg, eps);
                    let p = params(&cfg, eps);
                    let fine = simulate_from_velocity(&u0, &p, cfg.t_end, cfg.dt, cfg.dt_rec)?;
                    let coarse = cfg
                        .monitors
                        .refinement
                        .then(|| simulate_from_velocity(&u0, &p, cfg.t_end, 2.0 * cfg.dt, 2.0 * cfg.dt_rec))
                        .transpose()?;
                    let energy = EnergySummary::of(&fine, coarse.as_ref());
                    print(&json!({ "solver": "ac", "eps": eps, "energy": energy }));
                    let ok = energy.passes();
                    (fine, ok)
                }
                Solver::Ns => {
                    let traj = simulate_ns(&u0, cfg.nu, cfg.t_end, cfg.dt, cfg.dt_rec)?;
                    let energy = EnergySummary::of(&traj, None);
                    print(&json!({ "solver": "ns", "energy": energy }));
                    let ok = energy.passes();
                    (traj, ok)
                }
            };
            let dir = cfg.output_dir.join("trajectory");
            write_trajectory(&dir, &traj)?;
            eprintln!("trajectory written to {}", dir.display());
            Ok(passed)
        }
        Command::Sweep { common } => {
            let cfg = common.load()?;
            let outcome = run_sweep(&cfg)?;
            let manifest = emit_report(&outcome, &cfg.output_dir)?;
            for c in &outcome.checks {
                println!("{:<20} {}  {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
            }
            eprintln!("{} files written to {}", manifest.files.len(), cfg.output_dir.display());
            Ok(outcome.all_passed())
        }
        Command::Norms { common, trajectory, eps } => {
            let cfg = common.load()?;
            let traj = relaxed_run(&cfg, trajectory.as_deref(), pick_eps(&cfg, eps))?;
            let u0 = traj.samples.first().context("empty trajectory")?.u.clone();
            let ext = extend_trajectory(&traj, &u0)?;
            let idx = &cfg.indices;
            let mut monitors = vec![nonlinear_term_norm(&ext, idx)?, forcing_term_norm(&ext, idx)?];
            monitors.extend(velocity_estimate_suite(&ext, idx)?);
            monitors.extend(pressure_estimate_suite(&ext, idx)?);
            monitors.extend(energy_bound_suite(&ext)?);
            let modal = modal_residual_check(&ext, cfg.modal_band)?;
            print(&json!({ "eps": traj.eps, "monitors": monitors, "modal": modal }));
            Ok(traj.nonlinear || modal.relative <= 1e-6)
        }
        Command::Suitability { common, trajectory, reference, eps } => {
            let cfg = common.load()?;
            let traj = relaxed_run(&cfg, trajectory.as_deref(), pick_eps(&cfg, eps))?;
            let bumps = cfg.bumps.build(&traj.grid, traj.t_end())?;
            let reports = balance_reports(&traj, &bumps, cfg.quadrature)?;
            let deviations = match &reference {
                Some(dir) => {
                    let r = read_trajectory(dir)?;
                    let rt = energy_terms(&r, &bumps, cfg.quadrature)?;
                    Some(reports.iter().zip(&rt).map(|((_, id), t)| term_deviation(&id.terms, t)).collect::<Vec<_>>())
                }
                None => None,
            };
            let mut ok = true;
            let rows: Vec<_> = reports
                .iter()
                .map(|(ineq, ident)| {
                    let tol = refinement_tolerance(ident.slack, None);
                    ok &= ineq.slack >= -tol;
                    json!({ "inequality": ineq, "identity": ident, "tol": tol })
                })
                .collect();
            print(&json!({ "eps": traj.eps, "bumps": rows, "term_deviation": deviations }));
            Ok(ok)
        }
        Command::Compare { common, trajectory, reference, eps } => {
            let cfg = common.load()?;
            let traj = relaxed_run(&cfg, trajectory.as_deref(), pick_eps(&cfg, eps))?;
            let reference = reference_run(&cfg, reference.as_deref())?;
            let row = convergence_metrics(&traj, &reference, &cfg.indices)?;
            print(&json!(row));
            if !row.as_pairs().iter().all(|(_, v)| v.is_finite()) {
                bail!("non-finite metric");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
