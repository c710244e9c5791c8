use clap::{Parser, Subcommand};
use mfg_cli::commands::{cmd_check, cmd_oracle, cmd_refine, cmd_solve};
use mfg_cli::refine::parse_levels;
use std::path::PathBuf;
use std::process::ExitCode;

/// Finite difference solver for a forward-backward mean field games system
/// on the 2-D torus.
#[derive(Parser)]
#[command(name = "mfg", version, about)]
struct Cli {
    /// Root directory for run artifacts (config output dirs are relative
    /// to this).
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the coupled system; writes a field dump, diagnostics and the
    /// outer-iteration history.
    Solve { config: PathBuf },
    /// Solve at nested resolutions and tabulate Cauchy differences.
    Refine {
        config: PathBuf,
        /// Comma-separated levels, e.g. 8x8,16x16,32x32.
        #[arg(long)]
        levels: String,
    },
    /// Recompute residuals and diagnostics from a field dump.
    Check { dump: PathBuf, config: PathBuf },
    /// Compare the modular solver against the dense space-time oracle.
    Oracle { config: PathBuf },
}

/// `MFG_THREADS` caps data-parallel kernel threads (ignored when the
/// `parallel` feature is disabled).
fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Ok(text) = std::env::var("MFG_THREADS") {
        match text.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring MFG_THREADS={text:?} (want a positive integer)"),
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Solve { config } => cmd_solve(config, &cli.output_dir),
        Command::Refine { config, levels } => match parse_levels(levels) {
            Ok(levels) => cmd_refine(config, &levels, &cli.output_dir),
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Check { dump, config } => cmd_check(dump, config, &cli.output_dir),
        Command::Oracle { config } => cmd_oracle(config),
    };
    ExitCode::from(code as u8)
}
