use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vlasov_cli::{execute, exit, parse_config, presets, Command};

/// Particle simulation and diagnostics of relativistic Vlasov systems.
#[derive(Parser)]
#[command(name = "vlasov", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve the ensemble and write snapshots and the energy ledger.
    Simulate(RunArgs),
    /// Run the Picard iteration on a sample ensemble.
    Picard(RunArgs),
    /// Residual, Casimir, energy and bound diagnostics of a simulated run.
    Diagnose(RunArgs),
    /// Check admissibility of the initial data.
    Validate(RunArgs),
    /// Print a preset config.
    Preset {
        /// One of the preset names; `list` prints them all.
        name: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn run(cmd: Command, args: RunArgs) -> ExitCode {
    if let Some(k) = args.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return code(exit::INVALID);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return code(exit::INVALID);
        }
    }
    let mut config = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return code(e.exit_code());
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("vlasov-run"));
    match execute(cmd, config, &out) {
        Ok(m) => {
            for c in m.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} = {} (limit {:?})", c.name, c.value, c.limit);
            }
            eprintln!(
                "{} -> {}: {:?} (exit {})",
                m.command,
                out.display(),
                m.state,
                m.exit_code
            );
            code(m.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            code(exit::CHECK_FAILED)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                code(exit::INVALID)
            } else {
                code(exit::OK)
            };
        }
    };
    match cli.command {
        Sub::Simulate(a) => run(Command::Simulate, a),
        Sub::Picard(a) => run(Command::Picard, a),
        Sub::Diagnose(a) => run(Command::Diagnose, a),
        Sub::Validate(a) => run(Command::Validate, a),
        Sub::Preset { name } => {
            let mut out = std::io::stdout().lock();
            if name == "list" {
                for n in presets::PRESET_NAMES {
                    let _ = writeln!(out, "{n}");
                }
                return code(exit::OK);
            }
            match presets::preset(&name) {
                Some(c) => {
                    let _ = writeln!(out, "{}", c.emit());
                    code(exit::OK)
                }
                None => {
                    eprintln!("error: unknown preset {name:?}");
                    code(exit::INVALID)
                }
            }
        }
    }
}
