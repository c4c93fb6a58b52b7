//! The `generate`, `fit`, `sweep` and `eval` subcommands.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use prism_core::{
    format_matrix, permutation_mse, read_matrix, write_trajectory_csv, Dataset, DirichletParams, MetricRecord,
    MixingMatrix, NoiseModel,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::experiment::{fit_method, make_problem, CellSeeds};
use crate::output::{failures_csv, gnuplot_dat, results_csv, summarize, summary_csv, write_atomic, Failure};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Everything needed to refit a generated dataset. Paths are relative to
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(with = "u64_text")]
    pub master_seed: u64,
    #[serde(with = "u64_text")]
    pub replicate: u64,
    pub d: usize,
    pub k: usize,
    pub n_obs: usize,
    pub snr_db: f64,
    pub sigma2: f64,
    pub alpha: Vec<f64>,
    pub truth: PathBuf,
    pub data: PathBuf,
    pub latents: PathBuf,
}

// TOML integers are signed 64-bit, so seeds are stored as decimal strings.
mod u64_text {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn seeds(&self) -> CellSeeds {
        CellSeeds::new(self.master_seed, self.replicate, self.n_obs, self.snr_db)
    }
}

fn read_matrix_file(path: &Path) -> Result<nalgebra::DMatrix<f64>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_matrix(BufReader::new(f)).with_context(|| format!("in {}", path.display()))
}

pub fn read_mixing_matrix(path: &Path) -> Result<MixingMatrix> {
    Ok(MixingMatrix::new(read_matrix_file(path)?).with_context(|| format!("in {}", path.display()))?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Writes the first cell of the config (first replicate, SNR and `N`).
pub fn generate(config: &ExperimentConfig, master_seed: u64) -> Result<Manifest> {
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    let prior = config.prior()?;
    let replicate = config.seeds[0];
    let snr_db = config.snr_db[0];
    let n_obs = config.n_values()[0];
    let seeds = CellSeeds::new(master_seed, replicate, n_obs, snr_db);
    let p = make_problem(config.d, config.k, &prior, n_obs, snr_db, seeds)?;
    let manifest = Manifest {
        master_seed,
        replicate,
        d: config.d,
        k: config.k,
        n_obs,
        snr_db,
        sigma2: p.noise.sigma2(),
        alpha: prior.alpha().iter().copied().collect(),
        truth: "h_true.txt".into(),
        data: "data.txt".into(),
        latents: "latents.txt".into(),
    };
    write_atomic(&dir.join(&manifest.truth), format_matrix(p.truth.as_matrix()).as_bytes())?;
    write_atomic(&dir.join(&manifest.data), format_matrix(p.data.observations()).as_bytes())?;
    let latents = p.data.latents().expect("generated data carries latents");
    write_atomic(&dir.join(&manifest.latents), format_matrix(latents).as_bytes())?;
    write_atomic(&dir.join(MANIFEST_FILE), toml::to_string(&manifest)?.as_bytes())?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub estimate_path: PathBuf,
    pub trajectory_path: PathBuf,
    pub metric: MetricRecord,
}

/// Fits the dataset behind `manifest_path` and scores it against the stored truth.
///
/// The EM section of `config` supplies the iteration counts; `seed`
/// replaces the manifest's master seed for the VCA start and E-step draws.
pub fn fit(
    manifest_path: &Path,
    method: Method,
    config: &ExperimentConfig,
    seed: Option<u64>,
) -> Result<FitReport> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let obs = read_matrix_file(&base.join(&manifest.data))?;
    if obs.ncols() != manifest.d || obs.nrows() != manifest.n_obs {
        bail!(
            "dataset is {} x {}, manifest says {} x {}",
            obs.nrows(),
            obs.ncols(),
            manifest.n_obs,
            manifest.d
        );
    }
    let truth = read_mixing_matrix(&base.join(&manifest.truth))?;
    let data = Dataset::new(obs)?;
    let prior = DirichletParams::from_slice(&manifest.alpha)?;
    let noise = NoiseModel::new(manifest.sigma2)?;
    let seeds = match seed {
        Some(s) => CellSeeds::new(s, manifest.replicate, manifest.n_obs, manifest.snr_db),
        None => manifest.seeds(),
    };
    let em = config.em_config(method, seeds.em)?;
    let fitted = fit_method(&data, &prior, noise, method, &em, seeds.init)
        .with_context(|| format!("fitting {method}"))?;

    let dir = &config.output_dir;
    ensure_dir(dir)?;
    let estimate_path = dir.join(format!("h_{method}.txt"));
    let trajectory_path = dir.join(format!("trajectory_{method}.csv"));
    write_atomic(&estimate_path, format_matrix(fitted.estimate.as_matrix()).as_bytes())?;
    let records = fitted.em.as_ref().map(|s| s.records.as_slice()).unwrap_or(&[]);
    let mut traj = Vec::new();
    write_trajectory_csv(&mut traj, records)?;
    write_atomic(&trajectory_path, &traj)?;

    let m_samples = if fitted.em.is_some() { em.samples_per_obs } else { 0 };
    let metric = permutation_mse(&truth, &fitted.estimate)?.with_context(
        method.label(),
        manifest.replicate,
        manifest.snr_db,
        manifest.n_obs,
        m_samples,
    );
    Ok(FitReport {
        estimate_path,
        trajectory_path,
        metric,
    })
}

/// One sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub replicate: u64,
    pub snr_db: f64,
    pub n_obs: usize,
}

/// Cartesian product in the order SNR, N, replicate, method.
pub fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &snr_db in &config.snr_db {
        for n_obs in config.n_values() {
            for &replicate in &config.seeds {
                for &method in &config.methods {
                    out.push(Cell {
                        method,
                        replicate,
                        snr_db,
                        n_obs,
                    });
                }
            }
        }
    }
    out
}

pub fn run_cell(config: &ExperimentConfig, prior: &DirichletParams, master_seed: u64, cell: Cell) -> Result<MetricRecord> {
    let seeds = CellSeeds::new(master_seed, cell.replicate, cell.n_obs, cell.snr_db);
    let p = make_problem(config.d, config.k, prior, cell.n_obs, cell.snr_db, seeds)?;
    let em = config.em_config(cell.method, seeds.em)?;
    let fitted = fit_method(&p.data, prior, p.noise, cell.method, &em, seeds.init)?;
    let m_samples = if fitted.em.is_some() { em.samples_per_obs } else { 0 };
    Ok(permutation_mse(&p.truth, &fitted.estimate)?.with_context(
        cell.method.label(),
        cell.replicate,
        cell.snr_db,
        cell.n_obs,
        m_samples,
    ))
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<MetricRecord>,
    pub failures: Vec<Failure>,
    pub output_dir: PathBuf,
}

/// Runs every cell on a pool of `jobs` threads and writes `results.csv`,
/// `summary.csv`, `failures.csv` and `results.dat` into the output directory.
///
/// A failing cell is recorded in `failures.csv` and the sweep goes on.
pub fn sweep(config: &ExperimentConfig, master_seed: u64, jobs: usize) -> Result<SweepReport> {
    let prior = config.prior()?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    let cells = cells(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building the worker pool")?;
    let outcomes: Vec<(Cell, Result<MetricRecord>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&c| (c, run_cell(config, &prior, master_seed, c)))
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (cell, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push(Failure {
                method: cell.method.label().to_string(),
                seed: cell.replicate,
                snr_db: cell.snr_db,
                n_samples: cell.n_obs,
                m_samples: if cell.method == Method::Vca { 0 } else { config.em.samples },
                error: format!("{e:#}"),
            }),
        }
    }
    let summary = summarize(&records);
    write_atomic(&dir.join("results.csv"), results_csv(&records).as_bytes())?;
    write_atomic(&dir.join("summary.csv"), summary_csv(&summary).as_bytes())?;
    write_atomic(&dir.join("failures.csv"), failures_csv(&failures).as_bytes())?;
    write_atomic(&dir.join("results.dat"), gnuplot_dat(&summary, config.snr_db.len() > 1).as_bytes())?;
    Ok(SweepReport {
        records,
        failures,
        output_dir: dir.clone(),
    })
}

/// Permutation MSE between two matrix files.
pub fn eval(truth: &Path, estimate: &Path) -> Result<MetricRecord> {
    let t = read_mixing_matrix(truth)?;
    let e = read_mixing_matrix(estimate)?;
    Ok(permutation_mse(&t, &e)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_order_is_fixed() {
        let config = ExperimentConfig {
            snr_db: vec![0.0, 10.0],
            seeds: vec![5, 6],
            methods: vec![Method::Vca, Method::Lisa],
            ..ExperimentConfig::default()
        };
        let c = cells(&config);
        assert_eq!(c.len(), 8);
        assert_eq!((c[0].snr_db, c[0].replicate, c[0].method), (0.0, 5, Method::Vca));
        assert_eq!((c[1].snr_db, c[1].replicate, c[1].method), (0.0, 5, Method::Lisa));
        assert_eq!((c[2].snr_db, c[2].replicate), (0.0, 6));
        assert_eq!(c[4].snr_db, 10.0);
    }

    #[test]
    fn manifest_toml_is_lossless() {
        let m = Manifest {
            master_seed: u64::MAX,
            replicate: 3,
            d: 5,
            k: 3,
            n_obs: 10,
            snr_db: -2.5,
            sigma2: 0.1 + 0.2,
            alpha: vec![1.0 / 3.0, 2.0, 0.5],
            truth: "h.txt".into(),
            data: "y.txt".into(),
            latents: "z.txt".into(),
        };
        let back: Manifest = toml::from_str(&toml::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
