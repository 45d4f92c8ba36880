//! `houp`: run universal portfolio experiments and the exact verifier.
//!
//! Exit status: 0 on success, 1 when a verification fails, 2 on usage or
//! input errors.

mod args;
mod output;
mod run;
mod verify;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("HOUP_THREADS") {
        let threads: usize = value
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("HOUP_THREADS must be a positive integer, got `{value}`"))?;
        if threads == 0 {
            anyhow::bail!("HOUP_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run(args) => run::cmd_run(&args),
        Command::Permute(args) => run::cmd_permute(&args),
        Command::Verify(args) => verify::cmd_verify(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
