//! `aggmin`: simulate, verify and analyze interaction-energy minimizers.

mod commands;
mod output;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "aggmin", version, about = "Interaction-energy minimizers: flows, Cantor states, concavity witnesses, diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration file
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// RNG seed, overriding the config
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// output directory
    #[arg(long, value_name = "DIR", default_value = "aggmin-out")]
    pub out: PathBuf,
    /// residual tolerance for the verification gate
    #[arg(long, value_name = "REAL")]
    pub tolerance: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Particle gradient flow; writes trajectory and energy CSVs and a scatter plot
    Simulate {
        #[command(flatten)]
        common: Common,
        /// particle count, overriding the config
        #[arg(long)]
        n: Option<usize>,
        /// final time, overriding the config
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Exact steadiness and margins of the level-k Cantor state
    Cantor {
        #[command(flatten)]
        common: Common,
        m: f64,
        alpha: f64,
        k: usize,
        /// JSON array of probe points off the support
        #[arg(long, value_name = "PATH")]
        probes: Option<PathBuf>,
    },
    /// Negative Fourier windows and concavity witnesses at the given sizes
    Flic {
        #[command(flatten)]
        common: Common,
        /// witness sizes delta
        #[arg(default_values_t = vec![1.0, 0.25])]
        deltas: Vec<f64>,
    },
    /// Fractal and steadiness diagnostics of a particle snapshot CSV
    Analyze {
        #[command(flatten)]
        common: Common,
        snapshot: PathBuf,
    },
}

fn threads_from_env() -> Result<(), commands::CliError> {
    if let Ok(v) = std::env::var("AGGMIN_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| commands::CliError::Usage(format!("AGGMIN_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(commands::CliError::Usage("AGGMIN_THREADS must be positive".into()));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = threads_from_env().and_then(|_| match cli.command {
        Command::Simulate { common, n, t_final } => commands::simulate(&common, n, t_final),
        Command::Cantor { common, m, alpha, k, probes } => commands::cantor(&common, m, alpha, k, probes.as_deref()),
        Command::Flic { common, deltas } => commands::flic(&common, &deltas),
        Command::Analyze { common, snapshot } => commands::analyze(&common, &snapshot),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aggmin: {e}");
            ExitCode::from(e.code())
        }
    }
}
