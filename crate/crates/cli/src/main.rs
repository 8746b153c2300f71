use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corridor_planner::PlannerMode;
use tighten_cli::config::{
    load_config, BboxConfig, CliError, ConservatismConfig, ContoursConfig, ScenarioSpec,
};
use tighten_cli::commands;

#[derive(Parser)]
#[command(
    name = "tighten",
    version,
    about = "Collision-probability bounds, tightened keep-out boxes, and closed-loop planner batches"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Probability grids for both analytic bounds and a Monte-Carlo oracle
    Contours(CommonArgs),
    /// Transformed-box dimensions over a correlation / aspect-ratio sweep
    Conservatism(CommonArgs),
    /// Threshold-tightened keep-out boxes across an uncertainty schedule
    Bbox(CommonArgs),
    /// Seeded closed-loop batches, one output set per planner mode
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// Override the seed baked into the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for grids and batches; results do not depend on it
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Planner mode (direct-pa, direct-us1, direct-us2, convex-pa,
    /// convex-us); repeat the flag for a matched-seed comparison
    #[arg(long = "mode", value_name = "MODE")]
    modes: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.cmd {
        Cmd::Contours(a) | Cmd::Conservatism(a) | Cmd::Bbox(a) => a,
        Cmd::Simulate(a) => &a.common,
    };
    setup_workers(common.workers)?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", common.out.display())))?;
    match &cli.cmd {
        Cmd::Contours(a) => {
            let cfg: ContoursConfig = load_config(&a.config)?;
            let seed = a.seed.unwrap_or(cfg.mc_seed);
            commands::contours::run(&cfg, &a.out, seed)
        }
        Cmd::Conservatism(a) => {
            let cfg: ConservatismConfig = load_config(&a.config)?;
            commands::conservatism::run(&cfg, &a.out)
        }
        Cmd::Bbox(a) => {
            let cfg: BboxConfig = load_config(&a.config)?;
            commands::bbox::run(&cfg, &a.out)
        }
        Cmd::Simulate(a) => {
            let cfg: ScenarioSpec = load_config(&a.common.config)?;
            let modes = parse_modes(&a.modes)?;
            commands::simulate::run(&cfg, &modes, &a.common.out, a.common.seed)
        }
    }
}

/// Defaults to the corridor planner with the mixed shear pairing; rejects
/// repeats so a comparison never silently runs one batch twice.
fn parse_modes(raw: &[String]) -> Result<Vec<PlannerMode>, CliError> {
    if raw.is_empty() {
        return Ok(vec![PlannerMode::ConvexUs]);
    }
    let mut modes = Vec::new();
    for r in raw {
        let mode = PlannerMode::parse(r).map_err(CliError::Config)?;
        if modes.contains(&mode) {
            return Err(CliError::Config(format!("mode '{r}' given more than once")));
        }
        modes.push(mode);
    }
    Ok(modes)
}

#[cfg(feature = "parallel")]
fn setup_workers(workers: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn setup_workers(workers: Option<usize>) -> Result<(), CliError> {
    // Sequential build: the flag is accepted but there is no pool to size.
    let _ = workers;
    Ok(())
}
