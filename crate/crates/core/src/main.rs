use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fracspde::cli::{self, Study, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
use fracspde::config::RunConfig;
use fracspde::Result;

#[derive(Parser)]
#[command(
    name = "fracspde",
    version,
    about = "Space-time fractional stochastic heat equation laboratory"
)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override `ensemble.base_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every derived constant.
    Constants,
    /// Tabulate the kernel and check its identities.
    Kernel,
    /// Simulate the ensemble and write binary ensemble files.
    Simulate,
    /// Check Monte Carlo estimates against the envelopes.
    Verify {
        #[arg(value_enum, default_value = "all")]
        which: Which,
        /// Use this ensemble file instead of simulating (moments and tails).
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Moments,
    Tails,
    Converge,
    All,
}

fn run(args: &Args) -> Result<i32> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| fracspde::Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = args.seed {
        cfg.ensemble.base_seed = seed;
    }
    let out = args.out.as_deref();
    match &args.command {
        Command::Constants => {
            cli::cmd_constants(&cfg, out)?;
            Ok(EXIT_PASS)
        }
        Command::Kernel => {
            let checks = cli::cmd_kernel(&cfg, out)?;
            Ok(if checks.iter().all(|c| c.pass) {
                EXIT_PASS
            } else {
                EXIT_FAIL
            })
        }
        Command::Simulate => {
            let dir = out.unwrap_or_else(|| std::path::Path::new("."));
            for f in cli::cmd_simulate(&cfg, dir)? {
                log::info!("wrote {}", f.display());
            }
            Ok(EXIT_PASS)
        }
        Command::Verify { which, ensemble } => {
            let study = match which {
                Which::Moments => Study::Moments,
                Which::Tails => Study::Tails,
                Which::Converge => Study::Converge,
                Which::All => Study::All,
            };
            let reports = cli::cmd_verify(&cfg, study, out, ensemble.as_deref())?;
            Ok(cli::verify_exit_code(&reports))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let code = match pool.install(|| run(&args)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
