use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use viscous_mather_cli::{run, RunConfig, RunError, Subcommand};

/// Viscous Aubry-Mather and mean-field game solvers on the flat torus.
#[derive(Parser)]
#[command(name = "viscous-mather", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out/<subcommand>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `solver.seed`; part of the config hash.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &Args) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        RunError::Config(viscous_mather_cli::ConfigError {
            line: None,
            key: None,
            message: format!("cannot read {}: {e}", args.config.display()),
        })
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot set up {k} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = load(&args).and_then(|cfg| {
        let dir = args
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(args.subcommand.name()));
        run(args.subcommand, &cfg, &dir, rayon::current_num_threads())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
