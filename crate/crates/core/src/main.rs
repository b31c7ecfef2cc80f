use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plap::harness::SuiteHooks;
use plap::run::{self, RunOutcome};

#[derive(Parser)]
#[command(
    name = "plap",
    version,
    about = "Nonlocal p-Laplacian evolution on graphon-generated graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Run the invariant suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Negative control: corrupt kernel symmetry inside the suite.
        #[arg(long, hide = true)]
        asymmetrize_kernel: bool,
    },
    /// List the kernel catalog.
    Kernels,
}

fn report(result: plap::Result<RunOutcome>) -> ExitCode {
    match result {
        Ok(out) => {
            println!("artifacts written to {}", out.output_dir.display());
            for f in &out.gate_failures {
                eprintln!("FAILED: {f}");
            }
            if out.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => report(run::run(&config)),
        Command::Verify {
            seed,
            asymmetrize_kernel,
        } => report(run::verify_with(seed, SuiteHooks { asymmetrize_kernel })),
        Command::Kernels => {
            print!("{}", run::list_kernels());
            ExitCode::SUCCESS
        }
    }
}
