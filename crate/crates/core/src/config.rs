//! JSON run configuration shared by every CLI subcommand. The schema is
//! documented in `docs/CONFIG.md`; unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::density::BoundConfig;
use crate::error::{Error, Result};
use crate::gaussmix::{random_mixture, GaussianMixture};
use crate::generate::SamplerConfig;
use crate::mc::{seeded, substream, Points};
use crate::process::DiffusionSpec;
use crate::train::TrainConfig;

/// Where the data law comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MixtureSource {
    /// Explicit mixture parameters.
    Mixture(GaussianMixture),
    /// Equal-weight mixture with means uniform on a hypercube.
    Random {
        dim: usize,
        components: usize,
        side: f64,
        variance: f64,
        seed: u64,
    },
}

fn d_n_train() -> usize {
    8192
}
fn d_n_probe() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: MixtureSource,
    #[serde(default = "d_n_train")]
    pub n_train: usize,
    /// Held-out samples for probes and final neural-entropy curves.
    #[serde(default = "d_n_probe")]
    pub n_probe: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: MixtureSource::Random {
                dim: 6,
                components: 5,
                side: 4.0,
                variance: 1.0,
                seed: 0,
            },
            n_train: d_n_train(),
            n_probe: d_n_probe(),
        }
    }
}

impl DataConfig {
    pub fn mixture(&self) -> Result<GaussianMixture> {
        match &self.source {
            MixtureSource::Mixture(g) => Ok(g.clone()),
            MixtureSource::Random {
                dim,
                components,
                side,
                variance,
                seed,
            } => random_mixture(*dim, *components, *side, *variance, &mut seeded(*seed)),
        }
    }
}

fn d_grid() -> usize {
    crate::thermo::DEFAULT_GRID_POINTS
}
fn d_curve_samples() -> usize {
    crate::thermo::DEFAULT_PROBE_SAMPLES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default = "d_grid")]
    pub grid_points: usize,
    /// Samples per grid point.
    #[serde(default = "d_curve_samples")]
    pub samples: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            grid_points: d_grid(),
            samples: d_curve_samples(),
        }
    }
}

fn d_ells() -> Vec<f64> {
    vec![0.1, 0.05, 0.025, 0.0125]
}
fn d_start_mean() -> f64 {
    2.0
}
fn d_start_var() -> f64 {
    0.25
}
fn d_walkers() -> usize {
    1000
}
fn d_report_every() -> usize {
    50
}
fn d_lattice_process() -> DiffusionSpec {
    DiffusionSpec::vpx(0.5f64.sqrt()).with_constant_beta(2.0).with_horizon(5.0)
}

/// 1-D lattice experiment: a constant-σ process discretized with
/// `Δs = ℓ²/σ²` at each spacing in `ells`, started from a discretized
/// Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default = "d_lattice_process")]
    pub process: DiffusionSpec,
    #[serde(default = "d_ells")]
    pub ells: Vec<f64>,
    #[serde(default = "d_start_mean")]
    pub start_mean: f64,
    #[serde(default = "d_start_var")]
    pub start_var: f64,
    #[serde(default = "d_walkers")]
    pub walkers: usize,
    /// Running endpoint KL is evaluated every this many steps (when within
    /// the endpoint budget); 0 disables it.
    #[serde(default = "d_report_every")]
    pub report_every: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn d_kl_every() -> usize {
    20
}
fn d_sweep() -> Vec<usize> {
    vec![10, 100, 1000, 8192]
}
fn d_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "DiffusionSpec::vp")]
    pub process: DiffusionSpec,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub density: BoundConfig,
    #[serde(default)]
    pub curve: CurveConfig,
    /// KL upper-bound evaluation interval during `transport`; 0 = final only.
    #[serde(default = "d_kl_every")]
    pub kl_every: usize,
    #[serde(default = "d_sweep")]
    pub sweep_n: Vec<usize>,
    /// Number of points drawn by `sample`.
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default)]
    pub lattice: LatticeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        self.process.validate().map_err(cfg)?;
        self.train.validate()?;
        self.sampler.validate()?;
        self.density.validate()?;
        let g = self.data.mixture().map_err(cfg)?;
        if self.data.n_train == 0 || self.data.n_probe == 0 {
            return Err(Error::Config("n_train and n_probe must be positive".into()));
        }
        if self.curve.grid_points < 2 || self.curve.samples < 2 {
            return Err(Error::Config("curve needs ≥ 2 grid points and ≥ 2 samples".into()));
        }
        if self.sweep_n.iter().any(|n| *n == 0) {
            return Err(Error::Config("sweep_n entries must be positive".into()));
        }
        if g.dim() == 0 {
            return Err(Error::Config("data dimension must be positive".into()));
        }
        self.lattice.process.validate().map_err(cfg)?;
        if self.lattice.ells.is_empty() || self.lattice.ells.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Config("lattice.ells must be positive".into()));
        }
        if !(self.lattice.start_var > 0.0) {
            return Err(Error::Config("lattice.start_var must be positive".into()));
        }
        Ok(())
    }

    /// Training set and held-out probe set, on dedicated substreams.
    pub fn draw_data(&self) -> Result<(GaussianMixture, Points, Points)> {
        let g = self.data.mixture()?;
        let train = g.sample(self.data.n_train, &mut substream(self.seed, 10));
        let probe = g.sample(self.data.n_probe, &mut substream(self.seed, 11));
        Ok((g, train, probe))
    }
}

/// Fourier frequency scale for the mixture presets. Their data spans about
/// six units per axis; unit-scale frequencies resolve ~0.4-unit wiggles and
/// generalise poorly from 8192 points.
pub const MIXTURE_FOURIER_SCALE: f64 = 0.15;

/// Names of the shipped presets.
pub const PRESETS: [&str; 10] = [
    "gm_vp_d3",
    "gm_vp_d6",
    "gm_vp_d9",
    "gm_vpx_d3",
    "gm_vpx_d6",
    "gm_vpx_d9",
    "gm_sl_d3",
    "gm_sl_d6",
    "gm_sl_d9",
    "lattice_ou",
];

/// Builds a preset by name: `gm_{vp,vpx,sl}_d{3,6,9}` or `lattice_ou`.
pub fn preset(name: &str) -> Result<RunConfig> {
    let mut c = RunConfig {
        name: name.into(),
        ..RunConfig::default()
    };
    if name == "lattice_ou" {
        return Ok(c);
    }
    let bad = || Error::Config(format!("unknown preset {name}"));
    let rest = name.strip_prefix("gm_").ok_or_else(bad)?;
    let (kind, dim) = rest.split_once("_d").ok_or_else(bad)?;
    let dim: usize = dim.parse().map_err(|_| bad())?;
    if ![3, 6, 9].contains(&dim) {
        return Err(bad());
    }
    c.process = match kind {
        "vp" => DiffusionSpec::vp(),
        "vpx" => DiffusionSpec::vpx(0.1),
        "sl" => DiffusionSpec::sl(0.1),
        _ => return Err(bad()),
    };
    c.data.source = MixtureSource::Random {
        dim,
        components: 5,
        side: 4.0,
        variance: 1.0,
        seed: 0,
    };
    c.train.net.fourier_scale = MIXTURE_FOURIER_SCALE;
    Ok(c)
}
