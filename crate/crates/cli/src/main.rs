use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use fvw::adjoint::JacobianFault;
use fvw::experiments::output::{
    write_convergence_csv, write_flowfield_csv, write_json, write_sweep_csv, write_trajectory_csv,
    write_yaw_resolution_csv,
};
use fvw::experiments::{
    convergence, gradcheck, parse_grid, run_empc, sample_flowfield, set_threads, simulate, sweep_induction, sweep_yaw,
    yaw_resolution, ExperimentConfig, Preset, ResolvedExperiment,
};
use fvw::model::snapshot::{Snapshot, SnapshotHeader};
use fvw::{FvwError, StateVector, WakeModel};

#[derive(Parser, Debug)]
#[command(
    name = "fvw",
    version,
    about = "Free-vortex wake simulation, adjoint gradients and economic MPC"
)]
struct Cli {
    /// Experiment configuration (JSON). Defaults to the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset to use when no configuration file is given, or to override its preset.
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and flow fields.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PresetArg {
    #[value(name = "2d")]
    TwoD,
    #[value(name = "3d")]
    ThreeD,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FaultArg {
    Circulation,
    Shed,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady powers against the upstream induction.
    SweepInduction {
        /// `start:stop:count` or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Steady powers against the upstream yaw in degrees.
    SweepYaw {
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Normalised steady powers over time step, core size and resolution.
    Convergence {
        /// Also tabulate total power against yaw for every ring resolution.
        #[arg(long)]
        yaw_resolution: bool,
        #[arg(long, allow_hyphen_values = true)]
        yaw_grid: Option<String>,
    },
    /// Adjoint gradient against finite differences on tiny configurations.
    Gradcheck {
        /// Corrupt the adjoint Jacobian (the check must then fail).
        #[arg(long, value_enum)]
        fault: Option<FaultArg>,
    },
    /// Receding-horizon economic control run.
    Empc {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Sample the velocity of a stored state on a regular grid.
    Flowfield {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Constant-control simulation after spin-up.
    Simulate {
        #[arg(long)]
        steps: Option<usize>,
    },
}

enum Failure {
    Config(FvwError),
    Numerical(FvwError),
    Verification(String),
}

impl From<FvwError> for Failure {
    fn from(e: FvwError) -> Self {
        match e {
            FvwError::NonFinite { .. }
            | FvwError::InductionDomain(_)
            | FvwError::DegenerateKernel(_)
            | FvwError::Analysis(_) => Failure::Numerical(e),
            FvwError::Verification(m) => Failure::Verification(m),
            _ => Failure::Config(e),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, FvwError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = cli.preset {
        cfg.preset = match p {
            PresetArg::TwoD => Preset::TwoD,
            PresetArg::ThreeD => Preset::ThreeD,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn grid_or(text: &Option<String>, default: &[f64]) -> Result<Vec<f64>, FvwError> {
    match text {
        Some(t) => parse_grid(t),
        None => Ok(default.to_vec()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        set_threads(n)?;
    }
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Empc { steps, iterations } => {
            cfg.empc.steps = steps.or(cfg.empc.steps);
            cfg.empc.iterations = iterations.or(cfg.empc.iterations);
        }
        Command::Simulate { steps } => cfg.empc.steps = steps.or(cfg.empc.steps),
        _ => {}
    }
    let exp = cfg.resolve()?;
    let out = exp.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| FvwError::io(&out, e))?;
    write_json(&out.join("config.json"), &cfg)?;

    match cli.command {
        Command::SweepInduction { grid } => {
            let grid = grid_or(&grid, &exp.sweep.induction_grid)?;
            let sweep = sweep_induction(&exp, &grid)?;
            write_sweep_csv(&out.join("sweep_induction.csv"), &sweep)?;
            let best = sweep.argmax_total();
            println!(
                "argmax P_0 at a = {:.3}; argmax P_total at a = {:.3}; gain over a = 0.33: {:.2}%",
                sweep.argmax_turbine(0).value,
                best.value,
                100.0 * sweep.gain_over(0.33)
            );
        }
        Command::SweepYaw { grid } => {
            let grid = grid_or(&grid, &exp.sweep.yaw_grid_deg)?;
            let sweep = sweep_yaw(&exp, &grid)?;
            write_sweep_csv(&out.join("sweep_yaw.csv"), &sweep)?;
            let best = sweep.argmax_total();
            println!(
                "max P_total = {:.5} at psi = {} deg; gain over psi = 0: {:.2}%",
                best.total,
                best.value,
                100.0 * sweep.gain_over(0.0)
            );
        }
        Command::Convergence {
            yaw_resolution: with_yaw,
            yaw_grid,
        } => {
            let rows = convergence(&exp)?;
            write_convergence_csv(&out.join("convergence.csv"), &rows)?;
            for r in &rows {
                println!(
                    "h = {:<5} sigma = {:<5} n_r = {:<3} n_e = {:<3} pbar_0 = {:.4} pbar_1 = {:.4}",
                    r.time_step, r.core_size, r.rings, r.elements_per_ring, r.p0_normalized, r.p1_normalized
                );
            }
            if with_yaw {
                let grid = grid_or(&yaw_grid, &[0.0, 10.0, 20.0, 30.0, 40.0])?;
                let rows = yaw_resolution(&exp, &grid)?;
                write_yaw_resolution_csv(&out.join("yaw_resolution.csv"), &rows)?;
            }
        }
        Command::Gradcheck { fault } => {
            let fault = fault.map(|f| match f {
                FaultArg::Circulation => JacobianFault::DropCirculationCoupling,
                FaultArg::Shed => JacobianFault::DropShedCoupling,
            });
            let report = gradcheck(exp.seed, fault)?;
            write_json(&out.join("gradcheck.json"), &report)?;
            for c in &report.cases {
                println!(
                    "{}: N_h = {}, max relative error {:.3e} (absolute {:.3e}) -> {}",
                    c.name,
                    c.horizon,
                    c.max_relative_error,
                    c.max_absolute_error,
                    if c.passed { "pass" } else { "FAIL" }
                );
            }
            if !report.passed() {
                return Err(Failure::Verification(format!(
                    "adjoint gradient deviates from finite differences beyond {:e}",
                    report.tolerance
                )));
            }
        }
        Command::Empc { .. } => run_empc_command(&exp, &out)?,
        Command::Flowfield { snapshot } => {
            let snap = Snapshot::read(&snapshot)?;
            let model = WakeModel::new(snap.header.config.clone())?;
            let field = sample_flowfield(&model, &snap.state, &exp.flowfield);
            let path = out.join("flowfield.csv");
            write_flowfield_csv(&path, &field)?;
            println!("wrote {}", path.display());
        }
        Command::Simulate { .. } => {
            let traj = simulate(&exp)?;
            write_trajectory_csv(&out.join("trajectory.csv"), &traj.rows)?;
            write_snapshot(&out.join("final.fvws"), &exp, exp.empc.steps, &traj.final_state)?;
            let last = traj.rows.last().map(|r| r.outputs.clone()).unwrap_or_default();
            println!("final powers {last:?}");
        }
    }
    Ok(())
}

fn write_snapshot(path: &Path, exp: &ResolvedExperiment, step: usize, state: &StateVector) -> Result<(), FvwError> {
    Snapshot {
        header: SnapshotHeader {
            config: exp.model.clone(),
            step,
        },
        state: state.clone(),
    }
    .write(path)
}

fn run_empc_command(exp: &ResolvedExperiment, out: &Path) -> Result<(), Failure> {
    let report = run_empc(exp, |row| {
        info!(
            "step {:>4}  t = {:6.2}  m = {:?}  P = {:?}  J = {:.6}",
            row.step, row.time, row.controls, row.outputs, row.objective
        )
    })?;
    let traj = &report.trajectory;
    write_trajectory_csv(&out.join("trajectory.csv"), &traj.rows)?;
    write_json(&out.join("summary.json"), &report.summary)?;
    let model = WakeModel::new(exp.model.clone())?;
    for (k, state) in &traj.snapshots {
        write_snapshot(&out.join(format!("snapshot_{k:05}.fvws")), exp, *k, state)?;
        let field = sample_flowfield(&model, state, &exp.flowfield);
        write_flowfield_csv(&out.join(format!("flowfield_{k:05}.csv")), &field)?;
    }
    write_snapshot(&out.join("final.fvws"), exp, exp.empc.steps, &traj.final_state)?;
    let field = sample_flowfield(&model, &traj.final_state, &exp.flowfield);
    write_flowfield_csv(&out.join("flowfield_final.csv"), &field)?;
    if traj.diagnostics.degenerate_pairs > 0 {
        warn!(
            "{} degenerate kernel evaluations were skipped",
            traj.diagnostics.degenerate_pairs
        );
    }
    let s = &report.summary;
    println!(
        "mean power {:.5} vs {} {:.5} ({:+.2}%), mean induction {:.4}, dominant frequency {:?}, final yaw {:.2} deg",
        s.mean_power,
        s.baseline,
        s.baseline_power,
        s.gain_percent,
        s.mean_induction,
        s.dominant_frequency,
        s.final_yaw_deg
    );
    Ok(())
}
