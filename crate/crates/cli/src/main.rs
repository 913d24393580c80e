//! `eqnet`: build, verify, train and inspect permutation-equivariant nets.
//!
//! Exit codes: 0 success, 1 a verified property failed, 2 usage or parse
//! error, 3 runtime abort.

mod commands;
mod failure;
mod inputs;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Outcome;
use inputs::{ModeArg, NetChoice};

#[derive(Parser)]
#[command(name = "eqnet", version, about = "Permutation-equivariant networks with exact weight tying")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct NetArgs {
    /// Group file: {"degree": n, "generators": [[images...], ...]}
    #[arg(long)]
    group: Option<PathBuf>,
    /// Network spec file
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl NetArgs {
    fn choice(&self) -> NetChoice {
        NetChoice {
            group: self.group.clone(),
            net: self.net.clone(),
            mode: self.mode,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build and initialize a network; writes its checkpoint and a summary.
    Build(NetArgs),
    /// Run the property suite on a group.
    Verify {
        #[arg(long)]
        group: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test fixture: break one weight tie before checking.
        #[arg(long, hide = true)]
        corrupt_tying: bool,
    },
    /// Train a network on a built-in target.
    Train {
        #[command(flatten)]
        net: NetArgs,
        /// Training experiment file
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Also train a dense net of the same widths for comparison.
        #[arg(long)]
        untied_baseline: bool,
    },
    /// Write the sharing pattern between two actions of a group.
    ExportPattern {
        #[arg(long)]
        group: PathBuf,
        /// natural | star | tensor:<order> | union:<copies>
        #[arg(long, default_value = "natural")]
        input: String,
        #[arg(long, default_value = "natural")]
        output: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Width and depth of a network against the mode's bounds.
    ReportBounds(NetArgs),
    /// Free parameters of a network against the tying bound.
    CountParams(NetArgs),
}

fn run(cli: Cli) -> Outcome<ExitCode> {
    match cli.command {
        Command::Build(a) => commands::build(&a.choice(), a.seed, a.out.as_deref()),
        Command::Verify {
            group,
            seed,
            out,
            corrupt_tying,
        } => commands::verify(&group, seed, corrupt_tying, out.as_deref()),
        Command::Train {
            net,
            train,
            epochs,
            untied_baseline,
        } => {
            let Some(out) = net.out.clone() else {
                return Err(failure::Failure::usage("train needs --out"));
            };
            commands::train_cmd(&commands::TrainArgs {
                choice: net.choice(),
                train,
                out,
                seed: net.seed,
                epochs,
                untied_baseline,
            })
        }
        Command::ExportPattern {
            group,
            input,
            output,
            out,
        } => commands::export_pattern(&group, &input, &output, &out),
        Command::ReportBounds(a) => commands::report_bounds_cmd(&a.choice(), a.out.as_deref()),
        Command::CountParams(a) => commands::count_params(&a.choice(), a.out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
