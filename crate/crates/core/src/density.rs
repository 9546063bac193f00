//! Monte-Carlo lower bound on the model log density and the KL-to-truth and
//! cross-entropy diagnostics built on it.
//!
//! For a point `x`, with `y = μ(s)x + Σ(s)z`, `k = −z/Σ(s)` and
//! `s ~ U(s_lo, s_hi)`:
//!
//! `log p_θ(x) ≥ terminal(x) − L·E[(σ²/2)‖∇log p_eq(y) + ε_θ(y,s)‖² − (b₊(y,s) + σ²ε_θ(y,s))·k]`
//!
//! where `L = s_hi − s_lo`. The terminal term is the QID entropy stand-in
//! `−S_G[p_eq]` by default, or the exact conditional `E[log p_eq(y_{s_hi}) | x]`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::gaussmix::GaussianMixture;
use crate::mc::{fill_standard_normal, substream, MCEstimate, Points, SimRng};
use crate::model::EpsModel;
use crate::process::DiffusionSpec;

pub const KL_LABEL: &str = "KL upper-bound estimate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalTerm {
    /// `−S_G[P₀]` replaced by minus the QID entropy, independent of `x`.
    QidEntropy,
    /// `E[log p_eq(μ(s_hi)x + Σ(s_hi)z)]`, in closed form.
    Conditional,
}

fn d_n_s() -> usize {
    100
}
fn d_n_eps() -> usize {
    100
}
fn d_n_x() -> usize {
    512
}
fn d_terminal() -> TerminalTerm {
    TerminalTerm::QidEntropy
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    /// Times per point; each gets `n_eps` noise draws.
    #[serde(default = "d_n_s")]
    pub n_s: usize,
    #[serde(default = "d_n_eps")]
    pub n_eps: usize,
    #[serde(default = "d_n_x")]
    pub n_x: usize,
    #[serde(default = "d_terminal")]
    pub terminal: TerminalTerm,
}

impl Default for BoundConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl BoundConfig {
    pub fn n_path(&self) -> usize {
        self.n_s * self.n_eps
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s < 2 || self.n_eps == 0 || self.n_x == 0 {
            return Err(Error::Config("density bound needs n_s ≥ 2, n_eps ≥ 1 and n_x ≥ 1".into()));
        }
        Ok(())
    }
}

pub fn terminal_term(x: &[f64], spec: &DiffusionSpec, term: TerminalTerm) -> f64 {
    let d = x.len();
    match term {
        TerminalTerm::QidEntropy => -spec.qid_entropy(d),
        TerminalTerm::Conditional => {
            let k = spec.kernel_at(spec.s_hi());
            let q2 = spec.qid_std().powi(2);
            let x2: f64 = x.iter().map(|v| v * v).sum();
            -0.5 * d as f64 * (2.0 * std::f64::consts::PI * q2).ln()
                - (k.mu * k.mu * x2 + d as f64 * k.sigma_big * k.sigma_big) / (2.0 * q2)
        }
    }
}

/// Lower bound on `log p_θ(x)` from `cfg.n_path()` paths.
pub fn logp_lower_bound(x: &[f64], model: &dyn EpsModel, spec: &DiffusionSpec, cfg: &BoundConfig, rng: &mut SimRng) -> Result<MCEstimate> {
    cfg.validate()?;
    let d = model.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { row: 0 });
    }
    let n = cfg.n_path();
    let (lo, len) = (spec.s_lo, spec.window());
    let mut ss = Vec::with_capacity(n);
    for _ in 0..cfg.n_s {
        let s = lo + len * rng.random::<f64>();
        ss.extend(std::iter::repeat_n(s, cfg.n_eps));
    }
    let mut z = vec![0.0; n * d];
    fill_standard_normal(rng, &mut z);
    let mut ys = vec![0.0; n * d];
    for (i, &s) in ss.iter().enumerate() {
        let k = spec.kernel_params(s)?;
        for c in 0..d {
            ys[i * d + c] = k.mu * x[c] + k.sigma_big * z[i * d + c];
        }
    }
    let mut eps = vec![0.0; n * d];
    model.eval_batch(&ys, &ss, &mut eps)?;
    let inv_q = 1.0 / spec.qid_std().powi(2);
    let base = terminal_term(x, spec, cfg.terminal);
    let terms: Vec<f64> = (0..n)
        .map(|i| {
            let s = ss[i];
            let (sig2, f, sb) = (spec.sigma_sq(s), spec.drift_rate(s), spec.kernel_at(s).sigma_big);
            let (mut sq, mut dot) = (0.0, 0.0);
            for c in 0..d {
                let j = i * d + c;
                let (y, e) = (ys[j], eps[j]);
                sq += (e - y * inv_q).powi(2);
                dot += (f * y + sig2 * e) * (-z[j] / sb);
            }
            base - len * (0.5 * sig2 * sq - dot)
        })
        .collect();
    // Paths sharing a time are correlated: the error comes from group means.
    let groups: Vec<f64> = terms.chunks_exact(cfg.n_eps).map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let mut est = MCEstimate::from_samples(&groups);
    est.n = n;
    if !est.value.is_finite() {
        return Err(Error::NonFiniteMonteCarlo { count: terms.iter().filter(|v| !v.is_finite()).count() });
    }
    Ok(est)
}

/// Bounds for many points; point `i` uses substream `i` of a seed drawn
/// from `rng`.
pub fn logp_lower_bounds(xs: &Points, model: &dyn EpsModel, spec: &DiffusionSpec, cfg: &BoundConfig, rng: &mut SimRng) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    let base: u64 = rng.random();
    (0..xs.len())
        .into_par_iter()
        .map(|i| logp_lower_bound(xs.row(i), model, spec, cfg, &mut substream(base, i as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub label: String,
    /// `E[log p_d] − E[bound]`, an upper bound on `KL(p_d ‖ p_θ)` up to noise.
    pub kl: MCEstimate,
    /// `−E[bound]`
    pub cross_entropy: MCEstimate,
    pub terminal: TerminalTerm,
    pub n_path: usize,
    pub points: Points,
    pub per_point: Vec<MCEstimate>,
}

impl DensityReport {
    /// Per-point CSV: `x_index, logp_bound, std_err`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wr.write_record(["x_index", "logp_bound", "std_err"]).map_err(io)?;
        for (i, e) in self.per_point.iter().enumerate() {
            wr.write_record([i.to_string(), e.value.to_string(), e.std_err.to_string()]).map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Summary without the per-point data.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "kl": self.kl,
            "cross_entropy": self.cross_entropy,
            "terminal": self.terminal,
            "n_x": self.per_point.len(),
            "n_path": self.n_path,
        })
    }
}

/// KL upper-bound estimate and cross-entropy against the analytic `p_d`,
/// from `cfg.n_x` fresh samples.
pub fn kl_and_cross_entropy(
    p_d: &GaussianMixture,
    model: &dyn EpsModel,
    spec: &DiffusionSpec,
    cfg: &BoundConfig,
    rng: &mut SimRng,
) -> Result<DensityReport> {
    cfg.validate()?;
    if p_d.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: p_d.dim(),
            got: model.dim(),
        });
    }
    let points = p_d.sample(cfg.n_x, rng);
    let per_point = logp_lower_bounds(&points, model, spec, cfg, rng)?;
    let gaps: Vec<f64> = points
        .rows()
        .zip(&per_point)
        .map(|(x, b)| p_d.log_density(x) - b.value)
        .collect();
    let neg: Vec<f64> = per_point.iter().map(|b| -b.value).collect();
    Ok(DensityReport {
        label: KL_LABEL.into(),
        kl: MCEstimate::from_samples(&gaps),
        cross_entropy: MCEstimate::from_samples(&neg),
        terminal: cfg.terminal,
        n_path: cfg.n_path(),
        points,
        per_point,
    })
}
