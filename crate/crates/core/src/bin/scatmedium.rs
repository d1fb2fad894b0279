use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use scatmedium::io::{run_scenario_file, Mode, Overrides, Scenario, Stage};
use scatmedium::Error;

/// Wave fields in media of many small scatterers.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Capacitance and polarizability tensors of one body.
    Polarizability(Common),
    /// Acoustic or EM field, discrete or continuum.
    Solve(Common),
    /// Seed-averaged discrete field against the continuum limit.
    Compare(Common),
    /// Solve and write only the plot data.
    Emit(Common),
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_numerical() { 2 } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, stage, accepts): (_, _, fn(Mode) -> bool) = match &cli.command {
        Command::Polarizability(c) => (c, Stage::All, |m| m == Mode::Polarizability),
        Command::Solve(c) => (c, Stage::All, Mode::is_solve),
        Command::Compare(c) => (c, Stage::All, |m| m == Mode::Compare),
        Command::Emit(c) => (c, Stage::PlotsOnly, Mode::is_solve),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    let mode = match Scenario::load(&common.config) {
        Ok(s) => s.mode,
        Err(e) => return fail(&e),
    };
    if !accepts(mode) {
        eprintln!("error: scenario mode {} does not fit this subcommand", mode.name());
        return ExitCode::from(1);
    }
    let overrides = Overrides {
        seed: common.seed,
        out: common.out.clone(),
    };
    match run_scenario_file(&common.config, &overrides, stage) {
        Ok(summary) => {
            print!("{}", summary.table());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
