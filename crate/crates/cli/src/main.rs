use std::path::PathBuf;
use std::process::ExitCode;

use bellman_grid_cli::{run, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bellman-grid", version, about = "Run bellman-grid experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report, tables and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads, 0 for one per core.
        #[arg(long, env = "BELLMAN_GRID_THREADS", default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        seed,
        threads,
        quiet,
    } = cli.command;
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&config, &RunOptions { out, seed }) {
        Ok(outcome) => {
            if !quiet {
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
                if outcome.exit_code() != 0 {
                    println!("assumptions unmet; see report.json");
                }
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
