//! `qs3`: builds or loads a 3-quasi-Sasakian manifold, checks its curvature
//! identities at sampled points and writes a JSON report.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qs3_core::report::{self, RunConfig};
use qs3_core::Error;

#[derive(Parser)]
#[command(name = "qs3", version, about = "Curvature identity checks for 3-quasi-Sasakian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check and write the JSON report.
    Check(RunArgs),
    /// Classify by horizontal sectional curvature.
    Classify(RunArgs),
    /// List catalog manifolds with their dimension, rank and c.
    List {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Catalog name (see `qs3 list`) or path to a manifold spec file.
    #[arg(long)]
    manifold: String,
    /// Sample points.
    #[arg(long, default_value_t = 16)]
    points: usize,
    /// Random argument tuples per identity and point.
    #[arg(long, default_value_t = 8)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Normalized residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Skip the finite-difference comparison.
    #[arg(long)]
    no_fd: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            manifold: self.manifold.clone(),
            points: self.points,
            trials: self.trials,
            seed: self.seed,
            tol: self.tol,
            fd_check: !self.no_fd,
        }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(Error::Io)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Check(args) => {
            let config = args.config();
            eprintln!("qs3: checking {} at {} points, {} trials, seed {}", config.manifold, config.points, config.trials, config.seed);
            let r = report::run_suite(&config)?;
            emit(args.out.as_ref(), &r.to_json())?;
            let failed: Vec<String> = r
                .failures()
                .map(|c| match c.alpha {
                    Some(a) => format!("{}[{}]", c.id.code(), a + 1),
                    None => c.id.code().to_string(),
                })
                .collect();
            if let Some(Err(e)) = &r.classification {
                eprintln!("qs3: classification failed: {e}");
            }
            if r.pass() {
                eprintln!("qs3: all {} checks passed", r.checks.len());
                Ok(0)
            } else {
                eprintln!("qs3: {} checks failed: {}", failed.len(), failed.join(", "));
                Ok(1)
            }
        }
        Command::Classify(args) => {
            let config = args.config();
            eprintln!("qs3: classifying {} at {} points, {} directions", config.manifold, config.points, config.trials);
            let r = report::cmd_classify(&config)?;
            eprintln!("qs3: {}: {}", r.manifold, r.classification.verdict);
            emit(args.out.as_ref(), &r.to_json())?;
            Ok(0)
        }
        Command::List { json } => {
            let entries = report::cmd_list();
            let text = if json { report::list_json(&entries) } else { report::format_list(&entries) };
            emit(None, &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qs3: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
