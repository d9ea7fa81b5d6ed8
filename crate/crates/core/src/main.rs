use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ebe_core::cli::{output_dir, run, RunOptions, Subcommand};

/// Elemental Bloch equation toolkit.
#[derive(Parser, Debug)]
#[command(name = "ebe", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,

    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Seed for random draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        subcommand: args.subcommand,
        config: args.config,
        seed: args.seed,
        out: output_dir(args.out.as_deref()),
    };
    match run(&opts) {
        Ok(art) => {
            for w in &art.warnings {
                eprintln!("warning: {w}");
            }
            for n in &art.notes {
                println!("{n}");
            }
            for (name, _) in &art.files {
                println!("wrote {}", opts.out.join(name).display());
            }
            match art.failure {
                None => ExitCode::SUCCESS,
                Some(msg) => {
                    let err = ebe_core::cli::CliError::Numerical(vec![msg]);
                    eprintln!("{}", err.record(Some(opts.subcommand)));
                    ExitCode::from(err.exit_code() as u8)
                }
            }
        }
        Err(e) => {
            eprintln!("{}", e.record(Some(opts.subcommand)));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
