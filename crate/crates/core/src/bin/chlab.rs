use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chlab::check;
use chlab::config::{load_config, Parsed};
use chlab::runner::{self, RunOptions};
use chlab::Error;

#[derive(Parser)]
#[command(name = "chlab", version, about = "Coupled Cahn-Hilliard / Cahn-Hilliard-Oono lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration and write diagnostics, snapshots and a checkpoint.
    Run {
        config: PathBuf,
        /// Treat unknown configuration keys as errors.
        #[arg(long)]
        strict: bool,
        /// Stop after this many steps, leaving a checkpoint.
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Evolve to `t_end`, then solve the stationary problem from there.
    Steady {
        config: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Continue a run from its checkpoint.
    Resume {
        checkpoint: PathBuf,
        /// Run to this time instead of the configured end time.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Run the built-in verification suite.
    Check,
}

fn load(path: &PathBuf, strict: bool) -> chlab::Result<Parsed> {
    let parsed = load_config(path, strict)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed)
}

fn execute(command: Command) -> chlab::Result<bool> {
    let mut stdout = std::io::stdout().lock();
    match command {
        Command::Run { config, strict, max_steps } => {
            let cfg = load(&config, strict)?.config;
            let summary = runner::cmd_run(&cfg, &RunOptions { max_steps, t_end: None }, &mut stdout)?;
            writeln!(stdout, "{}", summary.to_json())?;
        }
        Command::Steady { config, strict } => {
            let cfg = load(&config, strict)?.config;
            let summary = runner::cmd_steady(&cfg, &mut stdout)?;
            writeln!(stdout, "{}", summary.to_json())?;
        }
        Command::Resume { checkpoint, t_end, max_steps } => {
            let summary = runner::cmd_resume(&checkpoint, &RunOptions { max_steps, t_end }, &mut stdout)?;
            writeln!(stdout, "{}", summary.to_json())?;
        }
        Command::Check => {
            let results = check::run_checks();
            write!(stdout, "{}", check::format_table(&results))?;
            let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
            if !failed.is_empty() {
                let names: Vec<String> = failed.iter().map(|r| format!("{}: {}", r.suite, r.name)).collect();
                let summary = serde_json::json!({ "status": "error", "kind": "CheckFailed", "failed": names });
                eprintln!("{summary}");
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => fail(&err),
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("{}", runner::failure_json(err));
    ExitCode::from(runner::exit_code(err) as u8)
}
