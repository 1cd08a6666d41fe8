use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riccati_core::verify::VerifyOptions;
use riccati_si::error::CliResult;
use riccati_si::runner;

#[derive(Parser)]
#[command(name = "riccati-si", version, about = "Low-rank CARE solvers and solver comparison")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs one configuration. Exit 0 converged, 2 max_iter, 3 breakdown, 1 config error.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the directory of the config file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs two or more configurations on the same problem and writes merged.csv and verdict.json.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Runs a self-check suite (identities, oracle, bound). Exit 4 on any failed check.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        instances: usize,
        /// Writes the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt_t: bool,
    },
    /// Writes the configured problem as A.mtx, B.mtx, C.mtx (and E.mtx).
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cmd: Command) -> CliResult<u8> {
    match cmd {
        Command::Run { config, out } => runner::cmd_run(&config, out.as_deref()),
        Command::Compare { configs, out } => runner::cmd_compare(&configs, &out),
        Command::Verify { suite, seed, instances, out, corrupt_t } => {
            runner::cmd_verify(&suite, &VerifyOptions { seed, instances, corrupt_t }, out.as_deref())
        }
        Command::Generate { config, out } => runner::cmd_generate(&config, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
