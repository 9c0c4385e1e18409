use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use faddeev_cli::config::load_config;
use faddeev_cli::run::{run, Subcommand};
use faddeev_cli::CliError;

/// Three-body bound states and atom-dimer scattering from the Faddeev
/// equations in configuration space.
#[derive(Debug, Parser)]
#[command(name = "faddeev", version)]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    command: Subcommand,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long, env = "FADDEEV_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Random seed; overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let name = args.command.name();
    let result = (|| -> Result<Vec<PathBuf>, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
        let (mut cfg, warnings) = load_config(&args.config)?;
        for w in warnings {
            log::warn!("{w}");
        }
        if let Some(seed) = args.seed {
            cfg.solver.seed = seed;
        }
        if let Some(out) = &args.out {
            cfg.output_dir = out.clone();
        }
        let out = cfg.output_dir.clone();
        run(args.command, &cfg, &out)
    })();
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record(name));
            ExitCode::from(e.exit_code())
        }
    }
}
