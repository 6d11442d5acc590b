//! Scenario-driven front end: load a config (file or builtin), run its
//! experiment blocks, and emit CSV/JSON reports.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 numerical
//! error (with a machine-readable `<block>.error.json` next to the other
//! outputs).

mod config;
mod describe;
mod ops;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{build, parse, ScenarioContext};
use ops::OpError;

#[derive(Parser)]
#[command(
    name = "cocycle-lab",
    version,
    about = "Numerical laboratory for linear cocycles over partially hyperbolic skew-products"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config (a TOML path or a builtin name from `list`).
    Run {
        config: String,
        /// Output directory; one report file per experiment block.
        #[arg(long)]
        out: PathBuf,
        /// Rayon thread count (falls back to COCYCLE_LAB_THREADS).
        #[arg(long)]
        threads: Option<usize>,
        /// Replace every block seed with this value.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// List the builtin scenarios.
    List,
    /// Document an operation and its parameters.
    Describe { op: String },
    /// Print a builtin scenario config.
    Show { name: String },
}

const BUILTINS: &[(&str, &str)] = &[
    (
        "constant-diagonal",
        include_str!("../scenarios/constant-diagonal.toml"),
    ),
    (
        "bump-simple-d2",
        include_str!("../scenarios/bump-simple-d2.toml"),
    ),
    (
        "bump-simple-d3",
        include_str!("../scenarios/bump-simple-d3.toml"),
    ),
    (
        "pinching-resonance-fail",
        include_str!("../scenarios/pinching-resonance-fail.toml"),
    ),
    (
        "bunching-fail",
        include_str!("../scenarios/bunching-fail.toml"),
    ),
    (
        "ustate-dirac",
        include_str!("../scenarios/ustate-dirac.toml"),
    ),
];

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for (name, text) in BUILTINS {
                let desc = parse(text).map(|c| c.description).unwrap_or_default();
                println!("{name}: {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Describe { op } => match describe::describe(&op) {
            Some(doc) => {
                print!("{doc}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("unknown operation '{op}'");
                ExitCode::from(2)
            }
        },
        Command::Show { name } => match BUILTINS.iter().find(|(n, _)| *n == name) {
            Some((_, text)) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("unknown builtin scenario '{name}'");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            out,
            threads,
            seed_override,
        } => run_command(&config, &out, threads, seed_override),
    }
}

fn run_command(
    config_arg: &str,
    out_dir: &Path,
    threads: Option<usize>,
    seed_override: Option<u64>,
) -> ExitCode {
    let thread_count = threads.or_else(|| {
        std::env::var("COCYCLE_LAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = thread_count {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }

    let text = match BUILTINS.iter().find(|(n, _)| *n == config_arg) {
        Some((_, text)) => text.to_string(),
        None => match std::fs::read_to_string(config_arg) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read config '{config_arg}': {e}");
                return ExitCode::from(2);
            }
        },
    };
    let parsed = match parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let mut ctx = match build(parsed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed_override {
        for block in &mut ctx.config.experiments {
            block.seed = s;
        }
    }
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("cannot create output directory: {e}");
        return ExitCode::from(2);
    }

    match run_blocks(&ctx, out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

/// Runs all blocks (independent, hence in parallel), writing each report
/// atomically. Unknown ops are validation errors (2); numerical failures
/// produce an error JSON and exit code 3.
fn run_blocks(ctx: &ScenarioContext, out_dir: &Path) -> Result<(), u8> {
    let results: Vec<(String, Result<(), u8>)> = ctx
        .config
        .experiments
        .par_iter()
        .map(|block| {
            let status = match ops::run_block(ctx, block) {
                Ok(outputs) => {
                    let mut ok = Ok(());
                    for (ext, contents) in outputs {
                        let path = out_dir.join(format!("{}.{ext}", block.name));
                        if let Err(e) = write_atomic(&path, &contents) {
                            eprintln!("cannot write {}: {e}", path.display());
                            ok = Err(2);
                        }
                    }
                    ok
                }
                Err(OpError::UnknownOp(op)) => {
                    eprintln!("block '{}': unknown operation '{op}'", block.name);
                    Err(2)
                }
                Err(OpError::MissingInput { op, what }) => {
                    eprintln!("block '{}': operation '{op}' requires {what}", block.name);
                    Err(2)
                }
                Err(OpError::Numerical(e)) => {
                    let payload = serde_json::json!({
                        "block": block.name,
                        "op": block.op,
                        "error": e.to_string(),
                    });
                    let path = out_dir.join(format!("{}.error.json", block.name));
                    let _ = write_atomic(&path, &format!("{payload:#}\n"));
                    eprintln!("block '{}': {e}", block.name);
                    Err(3)
                }
            };
            (block.name.clone(), status)
        })
        .collect();

    let mut worst: Option<u8> = None;
    for (_, status) in results {
        if let Err(code) = status {
            worst = Some(worst.map_or(code, |w| w.max(code)));
        }
    }
    match worst {
        None => Ok(()),
        Some(code) => Err(code),
    }
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}
