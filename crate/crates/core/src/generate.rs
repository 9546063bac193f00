//! Generative integrators: the reverse SDE with drift `b₊ + σ²ε` and the
//! probability-flow ODE with velocity `(σ²/2)ε`, both run backwards over
//! the forward-time window `[s_lo, s_hi]`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::mc::{fill_standard_normal, substream, Points, SimRng, SHARD};
use crate::model::EpsModel;
use crate::process::DiffusionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    EulerMaruyama,
    Heun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitLaw {
    /// The quasi-invariant distribution `N(0, qid_std² I)`.
    #[serde(rename = "QID")]
    Qid,
    /// `N(0, (μ(T)²·data_var + Σ(T)²) I)`.
    KernelGaussian,
}

fn d_steps() -> usize {
    500
}
fn d_scheme() -> Scheme {
    Scheme::EulerMaruyama
}
fn d_init() -> InitLaw {
    InitLaw::Qid
}
fn d_data_var() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "d_steps")]
    pub steps: usize,
    /// Heun applies to the ODE only; the SDE always uses Euler–Maruyama.
    #[serde(default = "d_scheme")]
    pub scheme: Scheme,
    #[serde(default = "d_init")]
    pub init: InitLaw,
    /// Per-coordinate data variance for `KernelGaussian`.
    #[serde(default = "d_data_var")]
    pub data_var: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: d_steps(),
            scheme: d_scheme(),
            init: d_init(),
            data_var: d_data_var(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config("sampler needs at least 2 steps".into()));
        }
        if !(self.data_var >= 0.0 && self.data_var.is_finite()) {
            return Err(Error::Config("data_var must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Forward times visited by the sampler, from `s_hi` down to `s_lo`.
pub fn reverse_grid(spec: &DiffusionSpec, steps: usize) -> Vec<f64> {
    let (lo, hi) = (spec.s_lo, spec.s_hi());
    (0..=steps)
        .map(|j| if j == steps { lo } else { hi - (hi - lo) * j as f64 / steps as f64 })
        .collect()
}

/// Standard deviation of the initial law.
pub fn init_std(spec: &DiffusionSpec, cfg: &SamplerConfig) -> f64 {
    match cfg.init {
        InitLaw::Qid => spec.qid_std(),
        InitLaw::KernelGaussian => {
            let k = spec.kernel_at(spec.s_hi());
            (k.mu * k.mu * cfg.data_var + k.sigma_big * k.sigma_big).sqrt()
        }
    }
}

/// Draws `n` points from the configured initial law.
pub fn initial_points(dim: usize, n: usize, spec: &DiffusionSpec, cfg: &SamplerConfig, rng: &mut SimRng) -> Points {
    let sd = init_std(spec, cfg);
    let mut data = vec![0.0; n * dim];
    fill_standard_normal(rng, &mut data);
    data.iter_mut().for_each(|v| *v *= sd);
    Points::new(dim, data)
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { step })
    }
}

/// Euler–Maruyama for `dX = (b₊(X, s) + σ²(s)ε(X, s))dt + σ(s)dB` with
/// `s = T − t`, on rows `x` (row-major, `model.dim()` wide). `normals`
/// supplies one standard normal per coordinate per step, so callers can
/// couple paths across step sizes.
pub fn integrate_sde(
    model: &dyn EpsModel,
    spec: &DiffusionSpec,
    steps: usize,
    x: &mut [f64],
    normals: &mut dyn FnMut(usize, &mut [f64]),
) -> Result<()> {
    let d = model.dim();
    let n = x.len() / d;
    let grid = reverse_grid(spec, steps);
    let mut eps = vec![0.0; x.len()];
    let mut z = vec![0.0; x.len()];
    for step in 0..steps {
        let (s, h) = (grid[step], grid[step] - grid[step + 1]);
        model.eval_batch(x, &vec![s; n], &mut eps)?;
        normals(step, &mut z);
        let (f, sig2) = (spec.drift_rate(s), spec.sigma_sq(s));
        let noise = (sig2 * h).sqrt();
        for ((xi, e), zi) in x.iter_mut().zip(&eps).zip(&z) {
            *xi += (f * *xi + sig2 * e) * h + noise * zi;
        }
        check_finite(x, step)?;
    }
    Ok(())
}

/// Probability-flow ODE `dX/dt = (σ²(s)/2)ε(X, s)`, `s = T − t`.
pub fn integrate_ode(model: &dyn EpsModel, spec: &DiffusionSpec, steps: usize, scheme: Scheme, x: &mut [f64]) -> Result<()> {
    let d = model.dim();
    let n = x.len() / d;
    let grid = reverse_grid(spec, steps);
    let mut k1 = vec![0.0; x.len()];
    let mut k2 = vec![0.0; x.len()];
    let mut pred = vec![0.0; x.len()];
    for step in 0..steps {
        let (s0, s1) = (grid[step], grid[step + 1]);
        let h = s0 - s1;
        model.eval_batch(x, &vec![s0; n], &mut k1)?;
        let w0 = 0.5 * spec.sigma_sq(s0);
        match scheme {
            Scheme::EulerMaruyama => {
                for (xi, e) in x.iter_mut().zip(&k1) {
                    *xi += h * w0 * e;
                }
            }
            Scheme::Heun => {
                for ((p, xi), e) in pred.iter_mut().zip(x.iter()).zip(&k1) {
                    *p = xi + h * w0 * e;
                }
                check_finite(&pred, step)?;
                model.eval_batch(&pred, &vec![s1; n], &mut k2)?;
                let w1 = 0.5 * spec.sigma_sq(s1);
                for ((xi, a), b) in x.iter_mut().zip(&k1).zip(&k2) {
                    *xi += 0.5 * h * (w0 * a + w1 * b);
                }
            }
        }
        check_finite(x, step)?;
    }
    Ok(())
}

/// Reverse SDE started from the given points; shard `i` draws its noise from
/// substream `i` of a seed taken from `rng`.
pub fn reverse_sde_from(
    model: &dyn EpsModel,
    spec: &DiffusionSpec,
    steps: usize,
    mut x0: Points,
    rng: &mut SimRng,
) -> Result<Points> {
    let d = model.dim();
    if x0.dim != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.dim });
    }
    let base: u64 = rng.random();
    x0.data
        .par_chunks_mut(SHARD * d)
        .enumerate()
        .try_for_each(|(i, part)| {
            let mut r = substream(base, i as u64);
            integrate_sde(model, spec, steps, part, &mut |_, z| fill_standard_normal(&mut r, z))
        })?;
    Ok(x0)
}

pub fn reverse_sde_sample(model: &dyn EpsModel, spec: &DiffusionSpec, cfg: &SamplerConfig, n: usize, rng: &mut SimRng) -> Result<Points> {
    cfg.validate()?;
    let x0 = initial_points(model.dim(), n, spec, cfg, rng);
    reverse_sde_from(model, spec, cfg.steps, x0, rng)
}

/// PF-ODE started from the given points. Deterministic in `x0`.
pub fn pf_ode_from(model: &dyn EpsModel, spec: &DiffusionSpec, steps: usize, scheme: Scheme, mut x0: Points) -> Result<Points> {
    let d = model.dim();
    if x0.dim != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.dim });
    }
    x0.data
        .par_chunks_mut(SHARD * d)
        .try_for_each(|part| integrate_ode(model, spec, steps, scheme, part))?;
    Ok(x0)
}

pub fn pf_ode_sample(model: &dyn EpsModel, spec: &DiffusionSpec, cfg: &SamplerConfig, n: usize, rng: &mut SimRng) -> Result<Points> {
    cfg.validate()?;
    let x0 = initial_points(model.dim(), n, spec, cfg, rng);
    pf_ode_from(model, spec, cfg.steps, cfg.scheme, x0)
}

/// Samples as CSV, one row per point, preceded by `#`-prefixed header lines.
pub fn write_samples_csv<W: Write>(points: &Points, header: &str, mut w: W) -> Result<()> {
    for line in header.lines() {
        writeln!(w, "# {line}")?;
    }
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wr.write_record((0..points.dim).map(|c| format!("x{c}"))).map_err(io)?;
    for row in points.rows() {
        wr.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}
