//! `suffaudit` binary: audit orchestration plus simulator, d-separation, and
//! ethics-scoring subcommands. All failures exit 1 with a message on stderr;
//! `audit` additionally maps verdicts to exit codes (0 fair, 2 unfair,
//! 3 indeterminate).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use suffaudit_cli::{run_audit, run_dsep, run_ethics, run_simulate};

#[derive(Parser)]
#[command(
    name = "suffaudit",
    version,
    about = "Causal policy-fairness audits over declared graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the audit described by a JSON config; writes the report JSON and
    /// prints a summary.
    Audit {
        /// Path to the audit config (relative paths inside it resolve
        /// against its directory).
        #[arg(long)]
        config: PathBuf,
    },
    /// Draw rows from a structural model file and write them as CSV.
    Simulate {
        /// Path to the model file.
        #[arg(long)]
        model: PathBuf,
        /// Number of rows to draw.
        #[arg(long)]
        n: usize,
        /// RNG seed; identical seeds reproduce identical rows.
        #[arg(long)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Interventions as NODE=0 or NODE=1 (repeatable).
        #[arg(long = "do", value_name = "NODE=VALUE")]
        interventions: Vec<String>,
    },
    /// Answer a d-separation query against a graph file.
    Dsep {
        /// Path to the graph file.
        #[arg(long)]
        graph: PathBuf,
        /// First node set (comma-separated).
        #[arg(long)]
        x: String,
        /// Second node set (comma-separated).
        #[arg(long)]
        y: String,
        /// Conditioning set (comma-separated, may be empty or omitted).
        #[arg(long, default_value = "")]
        z: String,
    },
    /// Score an allocation file under a distributive theory.
    Ethics {
        /// Allocation file: JSON array/object or CSV with population,goods.
        #[arg(long)]
        alloc: PathBuf,
        /// maximization, egalitarian, prioritarian, or sufficientarian.
        #[arg(long)]
        theory: String,
        /// Sufficiency threshold (sufficientarian only).
        #[arg(long)]
        threshold: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Audit { config } => {
            let outcome = run_audit(&config)?;
            print!("{}", outcome.summary);
            println!("report written to {}", outcome.output_path.display());
            Ok(outcome.exit_code as u8)
        }
        Command::Simulate {
            model,
            n,
            seed,
            out,
            interventions,
        } => {
            println!("{}", run_simulate(&model, n, seed, &out, &interventions)?);
            Ok(0)
        }
        Command::Dsep { graph, x, y, z } => {
            let separated = run_dsep(&graph, &x, &y, &z)?;
            let given = if z.trim().is_empty() {
                "the empty set".to_string()
            } else {
                format!("{{{z}}}")
            };
            if separated {
                println!("{x} and {y} are d-separated given {given}");
            } else {
                println!("{x} and {y} are d-connected given {given}");
            }
            Ok(0)
        }
        Command::Ethics {
            alloc,
            theory,
            threshold,
        } => {
            println!("{}", run_ethics(&alloc, &theory, threshold)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // Clap's own usage errors exit 2 by default, which would collide with
    // the audit's "unfair" exit code; map every failure to 1 instead.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
