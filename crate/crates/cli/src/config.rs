//! Experiment configuration files.
//!
//! Configs are TOML with the keys below. Every key has a default, so an
//! empty file is a valid (desk-scale) experiment.
//!
//! ```toml
//! d = 10
//! k = 4
//! n_obs = 1000              # N for cells that do not sweep N
//! sample_counts = [1000]    # N values to sweep; defaults to [n_obs]
//! snr_db = [20.0]
//! methods = ["vca", "sisa", "lisa"]
//! seeds = [0, 1, 2]         # replicate indices; defaults to 0..10
//! alpha = 1.0               # symmetric, or a list of k concentrations
//! output_dir = "out"
//!
//! [em]
//! iterations = 100
//! switch = 50               # LISA takes over at this iteration
//! samples = 500             # proposal draws per observation (M)
//! ridge = 1e-10
//! early_stop = 1e-8         # optional relative change in H
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use prism_core::{DirichletParams, EmConfig, EstepBackend};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vca,
    Sisa,
    Lisa,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Vca => "vca",
            Method::Sisa => "sisa",
            Method::Lisa => "lisa",
        }
    }

    /// E-step schedule for the EM methods; `None` for VCA.
    pub fn backend(self) -> Option<EstepBackend> {
        match self {
            Method::Vca => None,
            Method::Sisa => Some(EstepBackend::Sisa),
            Method::Lisa => Some(EstepBackend::SisaThenLisa),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vca" => Ok(Method::Vca),
            "sisa" => Ok(Method::Sisa),
            "lisa" => Ok(Method::Lisa),
            other => bail!("unknown method `{other}` (expected vca, sisa or lisa)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Symmetric(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSection {
    pub iterations: usize,
    pub switch: usize,
    pub samples: usize,
    pub ridge: f64,
    pub early_stop: Option<f64>,
}

impl Default for EmSection {
    fn default() -> Self {
        let em = EmConfig::default();
        Self {
            iterations: em.total_iterations,
            switch: em.switch_iteration,
            samples: em.samples_per_obs,
            ridge: em.ridge,
            early_stop: em.early_stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    pub n_obs: usize,
    pub sample_counts: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub alpha: AlphaSpec,
    pub output_dir: PathBuf,
    pub em: EmSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 10,
            k: 4,
            n_obs: 1000,
            sample_counts: Vec::new(),
            snr_db: vec![20.0],
            methods: vec![Method::Vca, Method::Sisa, Method::Lisa],
            seeds: (0..10).collect(),
            alpha: AlphaSpec::Symmetric(1.0),
            output_dir: PathBuf::from("out"),
            em: EmSection::default(),
        }
    }
}

/// Command-line values that replace the corresponding config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub method: Option<Method>,
    pub snr_db: Option<f64>,
    pub samples: Option<usize>,
    pub iters: Option<usize>,
    pub switch: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Loads `path` if given, else the defaults, then applies the overrides.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(m) = o.method {
            self.methods = vec![m];
        }
        if let Some(s) = o.snr_db {
            self.snr_db = vec![s];
        }
        if let Some(m) = o.samples {
            self.em.samples = m;
        }
        if let Some(t) = o.iters {
            self.em.iterations = t;
        }
        if let Some(t) = o.switch {
            self.em.switch = t;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.n_obs == 0 {
            bail!("d, k and n_obs must be positive");
        }
        if self.k < 2 || self.d < self.k {
            bail!("need d >= k >= 2, got d = {}, k = {}", self.d, self.k);
        }
        if self.methods.is_empty() {
            bail!("methods must not be empty");
        }
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        if self.snr_db.is_empty() {
            bail!("snr_db must not be empty");
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            bail!("snr_db values must be finite");
        }
        if let Some(&n) = self.sample_counts.iter().find(|&&n| n < self.k) {
            bail!("sample count {n} is smaller than k = {}", self.k);
        }
        if self.n_obs < self.k {
            bail!("n_obs = {} is smaller than k = {}", self.n_obs, self.k);
        }
        self.prior()?;
        self.em_config(Method::Lisa, 0)?;
        Ok(())
    }

    pub fn prior(&self) -> Result<DirichletParams> {
        let p = match &self.alpha {
            AlphaSpec::Symmetric(a) => DirichletParams::symmetric(self.k, *a)?,
            AlphaSpec::Vector(v) => {
                if v.len() != self.k {
                    bail!("alpha has {} entries but k = {}", v.len(), self.k);
                }
                DirichletParams::from_slice(v)?
            }
        };
        Ok(p)
    }

    /// N values of the sweep.
    pub fn n_values(&self) -> Vec<usize> {
        if self.sample_counts.is_empty() {
            vec![self.n_obs]
        } else {
            self.sample_counts.clone()
        }
    }

    /// EM settings for `method`; `None` backend (VCA) maps to SISA but is unused.
    pub fn em_config(&self, method: Method, seed: u64) -> Result<EmConfig> {
        let config = EmConfig {
            total_iterations: self.em.iterations,
            switch_iteration: self.em.switch,
            samples_per_obs: self.em.samples,
            backend: method.backend().unwrap_or(EstepBackend::Sisa),
            ridge: self.em.ridge,
            early_stop: self.em.early_stop,
            seed,
            ..EmConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}
