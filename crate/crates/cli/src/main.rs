mod complexity;
mod eval;
mod phantoms;
mod train;
mod util;
mod views;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Multi-view 3D cardiac occupancy reconstruction: phantom cohort, view extraction,
/// training, evaluation and complexity accounting.
#[derive(Parser)]
#[command(name = "cardiorecon", version)]
struct Cli {
    /// Default root for outputs when a command gets no explicit `--out`.
    #[arg(long, global = true, env = "CARDIORECON_OUT", default_value = "cardiorecon-out")]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a cohort of synthetic heart phantoms and their manifest.
    Phantoms(phantoms::Args),
    /// Extract standard views and voxel ground truth for every manifest case.
    Views(views::Args),
    /// Train a reconstruction network on a manifest.
    Train(train::Args),
    /// Evaluate a trained run on its test split, optionally against a reference run.
    Eval(eval::Args),
    /// Parameter and MAC counts for a range of view counts.
    Complexity(complexity::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Phantoms(a) => phantoms::run(a, &cli.out_root),
        Command::Views(a) => views::run(a),
        Command::Train(a) => train::run(a, &cli.out_root),
        Command::Eval(a) => eval::run(a, &cli.out_root),
        Command::Complexity(a) => complexity::run(a, &cli.out_root),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
