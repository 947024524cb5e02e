//! Front end for the time-marching emulator: run scenarios to disk, verify
//! the numerics against dense oracles, and benchmark scaling.

mod artifacts;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{CliError, Overrides};

#[derive(Parser)]
#[command(
    name = "qmarch",
    version,
    about = "Emulated quantum time marching for the advection-diffusion equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// March a scenario and write snapshot, probability, and summary artifacts
    Run(RunArgs),
    /// Cross-check the fast paths against dense oracles, one line per invariant
    Verify(VerifyArgs),
    /// Wall-time and matvec scaling over grid sizes
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name: taylor-green or heat-1d
    #[arg(long)]
    scenario: Option<String>,
    /// Flat key-value JSON config; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid points per dimension (a power of two)
    #[arg(long)]
    nx: Option<usize>,
    /// Marching steps
    #[arg(long)]
    nt: Option<usize>,
    /// Peak advection number v dt / dx
    #[arg(long)]
    ra: Option<f64>,
    /// Diffusion number D dt / dx^2
    #[arg(long)]
    rh: Option<f64>,
    /// Spatial dimensions, validated against the scenario
    #[arg(long)]
    dims: Option<usize>,
    /// Boundary kinds, one or comma-separated per dimension:
    /// periodic, neumann, dirichlet
    #[arg(long)]
    bc: Option<String>,
    /// Solvers to march: quantum, classical, or both
    #[arg(long)]
    mode: Option<String>,
    /// Snapshot times as fractions of the march, comma-separated
    #[arg(long)]
    snapshots: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Krylov exponential accuracy per step
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for the finite-shot emulation
    #[arg(long)]
    seed: Option<u64>,
    /// "off" or a cohort size for finite-shot post-selection
    #[arg(long)]
    shots: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Seed for the randomized checks
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated grid sizes
    #[arg(long, default_value = "8,16,32")]
    sizes: String,
    /// Quantum steps to time per size
    #[arg(long, default_value_t = 5)]
    steps: usize,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let flags = Overrides {
        scenario: args.scenario,
        nx: args.nx,
        nt: args.nt,
        ra: args.ra,
        rh: args.rh,
        dims: args.dims,
        bc: args.bc,
        mode: args.mode,
        snapshots: args.snapshots,
        out: args.out,
        tol: args.tol,
        seed: args.seed,
        shots: args.shots,
    };
    let plan = config::resolve(args.config.as_deref(), &flags)?;
    let started = Instant::now();
    let result = qmarch::scenarios::run_experiment(&plan.scenario, &plan.opts)?;
    let wall_time_s = started.elapsed().as_secs_f64();
    artifacts::write_all(&plan, &result, wall_time_s)?;

    let mut line = format!(
        "{}: {} steps, {} snapshots -> {}",
        result.scenario_name,
        result.report.steps_run,
        result.snapshots.len(),
        plan.out.display()
    );
    if plan.opts.mode.runs_quantum() {
        line.push_str(&format!(
            ", cumulative p = {:.6}",
            result.report.ledger.final_cumulative()
        ));
    }
    if let Some(shots) = &result.report.shots {
        line.push_str(&format!(", empirical p = {:.6}", shots.empirical_cumulative()));
    }
    if let Some(mse) = result.snapshots.last().and_then(|s| s.mse_percent) {
        line.push_str(&format!(", final mse = {mse:.4}%"));
    }
    println!("{line}");
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let checks = qmarch::verify::run_all(args.seed)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    for check in &checks {
        println!("{check}");
    }
    if failed == 0 {
        println!("all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(CliError::Run(format!("{failed} of {} checks failed", checks.len())))
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|token| {
            token
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad grid size {token:?}")))
        })
        .collect::<Result<_, _>>()?;
    if args.steps == 0 {
        return Err(CliError::Usage("bench needs at least one step".into()));
    }
    println!(
        "{:>6} {:>9} {:>7} {:>14} {:>12} {:>10}",
        "nx", "points", "qubits", "steps(fixed T)", "matvec/step", "s/step"
    );
    for nx in sizes {
        let scenario = qmarch::scenarios::taylor_green(nx, 0.1, 0.1)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let mut opts = qmarch::scenarios::ExperimentOptions::new(args.steps);
        opts.mode = qmarch::lcu::RunMode::Quantum;
        opts.snapshot_fracs = Vec::new();
        let started = Instant::now();
        let result = qmarch::scenarios::run_experiment(&scenario, &opts)?;
        let elapsed = started.elapsed().as_secs_f64();
        println!(
            "{:>6} {:>9} {:>7} {:>14} {:>12.1} {:>10.6}",
            nx,
            scenario.grid.total_points(),
            result.qubits.total(),
            scenario.default_steps,
            result.report.matvec_count as f64 / args.steps as f64,
            elapsed / args.steps as f64
        );
    }
    Ok(())
}
