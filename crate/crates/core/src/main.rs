use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sylflow::cli::{cmd_rate_sweep, cmd_solve, parse_k_values, write_sweep_csv};
use sylflow::config::ExperimentConfig;
use sylflow::verify::run_fixture;
use sylflow::{Error, Result};

/// Distributed network flows for AX + XB = C.
#[derive(Parser)]
#[command(name = "sylflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one experiment and write its trajectory CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Theoretical and measured rates over a list of gains.
    RateSweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated, ascending, positive.
        #[arg(long)]
        k_values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named reproduction scenario (example1 .. example5).
    Verify {
        #[arg(long)]
        fixture: String,
    },
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mut w = open_out(&out)?;
            let summary = cmd_solve(&cfg, &mut w)?;
            drop(w);
            eprintln!("{summary}");
        }
        Command::RateSweep { config, k_values, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ks = parse_k_values(&k_values)?;
            let rows = cmd_rate_sweep(&cfg, &ks)?;
            write_sweep_csv(&rows, &mut open_out(&out)?)?;
        }
        Command::Verify { fixture } => {
            let report = run_fixture(&fixture)?;
            print!("{report}");
            report.into_result()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
