use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use m2hs_cli::{run, thread_count, CliError, Command, THREADS_ENV};

#[derive(Parser)]
#[command(name = "m2hs", version, about = "Weak magnetic flow lab for the two-component Hunter-Saxton system")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Weak-flow trajectory: states.csv, conservation.csv, summary.json.
    Simulate { config: PathBuf },
    /// Blow-up sites and margins over blowup.s_values: blowup.csv.
    Blowup { config: PathBuf },
    /// Invariant suite: validation.json.
    Validate { config: PathBuf },
}

fn init_threads() -> Result<(), CliError> {
    let value = std::env::var(THREADS_ENV).ok();
    if let Some(k) = thread_count(value.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, path) = match cli.command {
        Sub::Simulate { config } => (Command::Simulate, config),
        Sub::Blowup { config } => (Command::Blowup, config),
        Sub::Validate { config } => (Command::Validate, config),
    };
    let result = init_threads().and_then(|_| run(command, &path));
    match result {
        Ok(w) => {
            println!("wrote {}: {}", w.files.join(", "), w.note);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("m2hs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
