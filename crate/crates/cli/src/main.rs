mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ssmooth", version, about = "Kernel regression for singular and mixed regressors")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "SSMOOTH_JOBS")]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON sidecar mapping column names to roles and kinds.
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct BandwidthArgs {
    /// `cv`, `adaptive`, `masspoint`, or a comma-separated vector.
    #[arg(long, default_value = "cv")]
    pub bandwidth: String,
    #[arg(long, default_value_t = 30)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 30)]
    pub restarts: usize,
    /// Adaptive sensitivity to the pilot density.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Duplicate share that marks a mass point.
    #[arg(long, default_value_t = 0.01)]
    pub min_frac: f64,
    /// Lower continuous search bound as a fraction of the upper one.
    #[arg(long)]
    pub floor_ratio: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit at query points.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        bw: BandwidthArgs,
        /// Query CSV with the regressor columns of the schema.
        #[arg(long)]
        at: PathBuf,
        /// Confidence level for the pointwise interval.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Cross-validated bandwidth.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        bw: BandwidthArgs,
        /// Drop this share of extreme scalar values from the criterion.
        #[arg(long)]
        trim: Option<f64>,
    },
    /// Monte Carlo experiment from a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Log-log rate regression of RMSE on n.
    Rate {
        /// CSV with columns `n`, `rmse` and optionally `point`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Effect on the treated.
    Catt {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        bw: BandwidthArgs,
        /// Binary code column holding the treatment.
        #[arg(long)]
        treatment: String,
    },
    /// Small-cube diagnostics at a point.
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated query coordinates.
        #[arg(long)]
        at: String,
        /// Comma-separated cuboid half-widths.
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Comma-separated scale multipliers for the regularity fit.
        #[arg(long, default_value = "1,0.5,0.25,0.125,0.0625")]
        ladder: String,
        /// Kernel for the moment checks.
        #[arg(long, default_value = "epanechnikov")]
        kernel: String,
        /// Moment power.
        #[arg(long, default_value_t = 1)]
        power: u32,
    },
}

/// Finished run: exit 0, or 2 when some points were skipped.
pub struct Outcome {
    pub partial: bool,
    pub warnings: Vec<String>,
    pub config_digest: String,
    pub seed: u64,
    pub details: serde_json::Value,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs.filter(|&j| j > 0) {
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let name = commands::name(&cli.command);
    let result = pool.install(|| commands::run(cli.command, cli.seed, &cli.out));
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let m = manifest::RunManifest {
                command: name.to_string(),
                config_digest: outcome.config_digest,
                seed: outcome.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                wall_time_s: started.elapsed().as_secs_f64(),
                warnings: outcome.warnings,
                details: outcome.details,
            };
            if let Err(e) = m.write(&cli.out) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            ExitCode::from(if outcome.partial { 2 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
