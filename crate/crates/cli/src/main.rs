//! `carpet`: runs magic-carpet experiments from a JSON config and/or flags,
//! writing CSV tables and a JSON summary per run.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use carpet_core::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::Params;

#[derive(Parser)]
#[command(name = "carpet", version, about = "Magic-carpet experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Run {
    /// JSON file with any of the parameters below; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

#[derive(Subcommand)]
enum Command {
    /// Cell graph with its slots
    Build(Run),
    /// Ball counts around the origin of a blowup
    Balls(Run),
    /// Recurrence of simple random walks on a blowup
    Walk(Run),
    /// Effective resistance to the boundary ring
    Resistance(Run),
    /// Glued or Dirichlet spectrum, cached
    Spectrum(Run),
    /// Near-boundary mass of Dirichlet eigenfunctions
    DirichletScan(Run),
    /// Diagonal heat-kernel slopes and off-diagonal profiles
    Heat(Run),
    /// Wave propagator from one cell
    Wave(Run),
    /// Poisson kernel of a boundary cell
    Poisson(Run),
    /// Tiles glued eigenvectors one level up and checks them
    Tile(Run),
    /// Averages fine eigenvectors down and matches them to coarse eigenspaces
    Refine(Run),
    /// Spectral projections of a point mass across levels
    Resolution(Run),
    /// Weyl ratios over all sequences from an alphabet, with prefix grouping
    WeylSweep(Run),
}

type Handler = fn(&Ctx) -> Result<()>;

fn dispatch(command: Command) -> Result<()> {
    let (name, run, f): (&'static str, Run, Handler) = match command {
        Command::Build(r) => ("build", r, commands::build),
        Command::Balls(r) => ("balls", r, commands::balls),
        Command::Walk(r) => ("walk", r, commands::walk),
        Command::Resistance(r) => ("resistance", r, commands::resistance),
        Command::Spectrum(r) => ("spectrum", r, commands::spectrum),
        Command::DirichletScan(r) => ("dirichlet-scan", r, commands::dirichlet_scan),
        Command::Heat(r) => ("heat", r, commands::heat),
        Command::Wave(r) => ("wave", r, commands::wave),
        Command::Poisson(r) => ("poisson", r, commands::poisson),
        Command::Tile(r) => ("tile", r, commands::tile_cmd),
        Command::Refine(r) => ("refine", r, commands::refine),
        Command::Resolution(r) => ("resolution", r, commands::resolution),
        Command::WeylSweep(r) => ("weyl-sweep", r, commands::weyl_sweep),
    };
    let base = match &run.config {
        Some(path) => Params::load(path)?,
        None => Params::default(),
    };
    let ctx = Ctx::new(name, base.overlay(&run.params)?)?;
    f(&ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
