//! `fracid`: reconstruct fractional orders and kernel exponents from noisy
//! boundary observations.
//!
//! Exit codes: 0 success, 2 input or runtime error, 3 verification failure.

mod args;
mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use commands::Status;
use manifest::{Run, RunManifest};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fracid", version, about = "Order and kernel reconstruction for time-fractional problems")]
struct Cli {
    /// Worker threads for grid evaluation; defaults to the number of logical cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the built-in scenarios or dump one as JSON.
    Scenarios(commands::ScenariosCmd),
    /// Write a noisy observation of a scenario.
    Synth(commands::SynthCmd),
    /// Tikhonov fit of an observation for one regularization parameter.
    Fit(commands::FitCmd),
    /// Full reconstruction with quasi-optimal parameter selection.
    Reconstruct(commands::ReconstructCmd),
    /// Reproduce a table of reconstructed parameters.
    Table(commands::TableCmd),
    /// Constants ledger and validity horizons.
    Bounds(commands::BoundsCmd),
    /// Run a verification suite; exits with 3 when a check fails.
    Verify(commands::VerifyCmd),
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Scenarios(_) => "scenarios",
            Command::Synth(_) => "synth",
            Command::Fit(_) => "fit",
            Command::Reconstruct(_) => "reconstruct",
            Command::Table(_) => "table",
            Command::Bounds(_) => "bounds",
            Command::Verify(_) => "verify",
            Command::Replay { .. } => "replay",
        }
    }
}

const EXIT_INPUT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

fn run(args: Vec<String>) -> ExitCode {
    let cli = match Cli::try_parse_from(std::iter::once("fracid".to_string()).chain(args.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Command::Replay { manifest } = &cli.command {
        return match RunManifest::read(manifest) {
            Ok(m) if m.command == "replay" => {
                eprintln!("error: a manifest cannot replay another replay");
                ExitCode::from(EXIT_INPUT)
            }
            Ok(m) => run(m.args),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INPUT)
            }
        };
    }
    let mut ctx = Run::new(cli.command.name(), &args);
    let outcome = match &cli.command {
        Command::Scenarios(c) => commands::scenarios(c, &mut ctx),
        Command::Synth(c) => commands::synth(c, &mut ctx),
        Command::Fit(c) => commands::fit(c, &mut ctx),
        Command::Reconstruct(c) => commands::reconstruct(c, &mut ctx),
        Command::Table(c) => commands::table(c, &mut ctx),
        Command::Bounds(c) => commands::bounds(c, &mut ctx),
        Command::Verify(c) => commands::verify(c, &mut ctx),
        Command::Replay { .. } => unreachable!("handled above"),
    }
    .and_then(|status| ctx.finish().map(|_| status));
    match outcome {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn main() -> ExitCode {
    run(std::env::args().skip(1).collect())
}
