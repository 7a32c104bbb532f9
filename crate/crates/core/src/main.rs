use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cbilab::cli::{list_presets, run_config, summary_lines};

#[derive(Parser)]
#[command(name = "cbilab", about = "Simulation and limit-theorem checks for CBI processes and extremal shot noise")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Print the mechanism preset catalogue.
    ListPresets,
    /// Print the version.
    Version,
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("CBILAB_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("CBILAB_THREADS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err("CBILAB_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match args.command {
        Command::Version => {
            println!("cbilab {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::ListPresets => {
            print!("{}", list_presets());
            ExitCode::SUCCESS
        }
        Command::Run { config } => {
            if let Err(e) = init_threads() {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            match run_config(&config) {
                Ok(outcome) => {
                    for line in summary_lines(&outcome.table) {
                        println!("{line}");
                    }
                    for note in &outcome.table.notes {
                        println!("note: {note}");
                    }
                    println!("verdict: {}", if outcome.verdict { "PASS" } else { "FAIL" });
                    ExitCode::from(if outcome.verdict { 0 } else { 2 })
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
