use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use nobind_cli::{emit, execute, exit, parse_config, Command, Format};

#[derive(Debug, Parser)]
#[command(name = "nobind", version, about = "Certified no-binding thresholds for polaron-type models")]
struct Args {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted (overrides `output.path`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads, 0 for one per core.
    #[arg(long, env = "NOBIND_THREADS", default_value_t = 0)]
    threads: usize,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: Args) -> u8 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            error!("cannot read {}: {e}", args.config.display());
            return exit::USAGE;
        }
    };
    let mut config = match parse_config(&text, Some(args.command)) {
        Ok(c) => c,
        Err(e) => {
            error!("{}: {e}", args.config.display());
            return exit::USAGE;
        }
    };
    if let Some(seed) = args.seed {
        config.set_seed(seed);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
        error!("thread pool: {e}");
        return exit::USAGE;
    }

    let report = match execute(&config) {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return exit::NUMERIC;
        }
    };
    let format = args.format.unwrap_or(config.output.format);
    let path = args.out.or_else(|| config.output.path.as_ref().map(PathBuf::from));
    if let Err(e) = emit(&report, &config, format, path.as_deref()) {
        error!("cannot write report: {e}");
        return exit::USAGE;
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        error!("check {} failed: residual {} > {} ({})", c.name, c.residual, c.tolerance, c.detail);
    }
    if report.passed() {
        exit::SUCCESS
    } else {
        exit::CHECK_FAILED
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ExitCode::from(run(Args::parse()))
}
