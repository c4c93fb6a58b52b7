use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use prism_cli::commands::{self, MANIFEST_FILE};
use prism_cli::output::{parse_results_csv, results_csv};
use prism_cli::{ExperimentConfig, Method, Overrides};

#[derive(Parser)]
#[command(name = "prism", version, about = "Mixing-matrix estimation experiments (VCA, SISA, LISA)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed [default: 0; for `fit`, the manifest's seed].
    #[arg(long, env = "PRISM_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long = "snr-db", value_name = "F", allow_negative_numbers = true)]
    snr_db: Option<f64>,
    /// Proposal draws per observation.
    #[arg(long, value_name = "M")]
    samples: Option<usize>,
    /// EM iterations.
    #[arg(long, value_name = "T")]
    iters: Option<usize>,
    /// Iteration at which LISA takes over.
    #[arg(long = "switch", value_name = "T_S")]
    switch: Option<usize>,
}

impl Common {
    fn resolve(&self, method: Option<Method>) -> Result<ExperimentConfig> {
        let overrides = Overrides {
            out: self.out.clone(),
            method,
            snr_db: self.snr_db,
            samples: self.samples,
            iters: self.iters,
            switch: self.switch,
        };
        ExperimentConfig::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset, its true H and a manifest.
    Generate(#[command(flatten)] Common),
    /// Fit a generated dataset and report the permutation MSE.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Manifest written by `generate` (or its directory).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Lisa)]
        method: Method,
    },
    /// Run method x SNR x N x seed and write results, summary and plot data.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Concurrent cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Permutation MSE between two matrix files, or re-check a results CSV.
    Eval {
        #[arg(long, value_name = "PATH", required_unless_present = "results")]
        truth: Option<PathBuf>,
        #[arg(long, value_name = "PATH", requires = "truth")]
        estimate: Option<PathBuf>,
        /// Results CSV to re-parse and print.
        #[arg(long, value_name = "PATH", conflicts_with = "truth")]
        results: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(common) => {
            let config = common.resolve(None)?;
            let m = commands::generate(&config, common.seed.unwrap_or(0))?;
            println!(
                "wrote {} (N = {}, d = {}, k = {}, SNR = {} dB, sigma2 = {})",
                config.output_dir.join(MANIFEST_FILE).display(),
                m.n_obs,
                m.d,
                m.k,
                m.snr_db,
                m.sigma2
            );
        }
        Command::Fit { common, data, method } => {
            let config = common.resolve(Some(method))?;
            let manifest = if data.is_dir() { data.join(MANIFEST_FILE) } else { data };
            let report = commands::fit(&manifest, method, &config, common.seed)?;
            eprintln!(
                "estimate {} trajectory {}",
                report.estimate_path.display(),
                report.trajectory_path.display()
            );
            print!("{}", results_csv(&[report.metric]));
        }
        Command::Sweep { common, method, jobs } => {
            let config = common.resolve(method)?;
            let report = commands::sweep(&config, common.seed.unwrap_or(0), jobs)?;
            eprintln!(
                "{} cells ok, {} failed; results in {}",
                report.records.len(),
                report.failures.len(),
                report.output_dir.display()
            );
            for f in &report.failures {
                eprintln!("failed: {} seed {} snr {} N {}: {}", f.method, f.seed, f.snr_db, f.n_samples, f.error);
            }
        }
        Command::Eval { truth, estimate, results } => {
            if let Some(path) = results {
                let text = std::fs::read_to_string(&path)?;
                print!("{}", results_csv(&parse_results_csv(&text)?));
            } else {
                let truth = truth.expect("clap requires --truth");
                let Some(estimate) = estimate else {
                    anyhow::bail!("--estimate is required with --truth");
                };
                let r = commands::eval(&truth, &estimate)?;
                println!("mse,permutation");
                let perm: Vec<String> = r.permutation.iter().map(|p| p.to_string()).collect();
                println!("{},{}", r.mse, perm.join(" "));
            }
        }
    }
    Ok(())
}
