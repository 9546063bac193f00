//! Entropy estimators: entropy-production curves (ideal, neural,
//! score-matching), the KL-difference identity, the H-theorem curve, the
//! score-matching identity, the thermodynamic uncertainty bound and the
//! free-energy gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::gaussmix::{gibbs_entropy_mc, kl_mc, GaussianMixture};
use crate::mc::{fill_standard_normal, mc_batched, substream, MCEstimate, Moments, Points, SimRng};
use crate::model::{EpsModel, ExactEps};
use crate::process::{DiffusionSpec, ProcessKind};
use rand::Rng;

pub const DEFAULT_GRID_POINTS: usize = 500;
pub const DEFAULT_PROBE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    IdealTot,
    Neural,
    ScoreMatch,
}

impl std::fmt::Display for CurveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurveKind::IdealTot => "IdealTot",
            CurveKind::Neural => "Neural",
            CurveKind::ScoreMatch => "ScoreMatch",
        })
    }
}

/// Rate and trapezoidal cumulative entropy on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub kind: CurveKind,
    pub s_grid: Vec<f64>,
    pub rate: Vec<f64>,
    pub rate_stderr: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub cumulative_stderr: Vec<f64>,
    /// Trapezoid error bound `Σ h³/12 · max|rate″|` from second differences.
    pub quadrature_error: f64,
    /// `rate(s_lo)·s_lo`: estimate of the part of `[0, s_lo]` left out.
    pub clipped_head: f64,
    /// `rate(s_hi)·(T − s_hi)`: estimate of the part of `[s_hi, T]` left out.
    pub clipped_tail: f64,
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Uniform grid on the process window `[s_lo, s_hi]`.
pub fn spec_grid(spec: &DiffusionSpec, n: usize) -> Vec<f64> {
    uniform_grid(spec.s_lo, spec.s_hi(), n)
}

fn trapezoid_weights_step(h: f64) -> f64 {
    0.5 * h
}

impl EntropyCurve {
    /// Builds the curve from independent per-point rate estimates.
    pub fn from_rates(kind: CurveKind, s_grid: Vec<f64>, rates: &[MCEstimate], spec: &DiffusionSpec) -> Self {
        let n = s_grid.len();
        let rate: Vec<f64> = rates.iter().map(|r| r.value).collect();
        let se: Vec<f64> = rates.iter().map(|r| r.std_err).collect();
        let mut cumulative = vec![0.0; n];
        let mut cum_se = vec![0.0; n];
        let mut var = 0.0;
        let mut w_last = 0.0;
        for i in 0..n - 1 {
            let h = s_grid[i + 1] - s_grid[i];
            cumulative[i + 1] = cumulative[i] + 0.5 * h * (rate[i] + rate[i + 1]);
            let half = trapezoid_weights_step(h);
            let w_new = w_last + half;
            var += (w_new * w_new - w_last * w_last) * se[i] * se[i] + half * half * se[i + 1] * se[i + 1];
            w_last = half;
            cum_se[i + 1] = var.max(0.0).sqrt();
        }
        Self::assemble(kind, s_grid, rate, se, cumulative, cum_se, spec)
    }

    fn assemble(
        kind: CurveKind,
        s_grid: Vec<f64>,
        rate: Vec<f64>,
        rate_stderr: Vec<f64>,
        cumulative: Vec<f64>,
        cumulative_stderr: Vec<f64>,
        spec: &DiffusionSpec,
    ) -> Self {
        let n = s_grid.len();
        let mut max_d2: f64 = 0.0;
        for i in 1..n.saturating_sub(1) {
            let (h0, h1) = (s_grid[i] - s_grid[i - 1], s_grid[i + 1] - s_grid[i]);
            let d2 = 2.0 * ((rate[i + 1] - rate[i]) / h1 - (rate[i] - rate[i - 1]) / h0) / (h0 + h1);
            max_d2 = max_d2.max(d2.abs());
        }
        let quadrature_error: f64 = s_grid
            .windows(2)
            .map(|w| (w[1] - w[0]).powi(3) / 12.0)
            .sum::<f64>()
            * max_d2;
        let clipped_head = rate[0].abs() * s_grid[0];
        let clipped_tail = rate[n - 1].abs() * (spec.horizon - s_grid[n - 1]).max(0.0);
        Self {
            kind,
            s_grid,
            rate,
            rate_stderr,
            cumulative,
            cumulative_stderr,
            quadrature_error,
            clipped_head,
            clipped_tail,
        }
    }

    pub fn total(&self) -> MCEstimate {
        MCEstimate {
            value: *self.cumulative.last().unwrap(),
            std_err: *self.cumulative_stderr.last().unwrap(),
            n: self.s_grid.len(),
        }
    }

    /// Systematic allowance: quadrature bound plus both clipped ends.
    pub fn systematic_error(&self) -> f64 {
        self.quadrature_error + self.clipped_head + self.clipped_tail
    }

    /// Indices `i` where `cumulative[i+1] < cumulative[i] − k·stderr`.
    pub fn monotonicity_violations(&self, k: f64) -> Vec<usize> {
        (0..self.cumulative.len() - 1)
            .filter(|&i| {
                let tol = k * self.cumulative_stderr[i].max(self.cumulative_stderr[i + 1]);
                self.cumulative[i + 1] < self.cumulative[i] - tol
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wr.write_record(["s", "rate", "rate_stderr", "cumulative", "cumulative_stderr", "kind"])
            .map_err(io)?;
        let kind = self.kind.to_string();
        for i in 0..self.s_grid.len() {
            wr.write_record([
                self.s_grid[i].to_string(),
                self.rate[i].to_string(),
                self.rate_stderr[i].to_string(),
                self.cumulative[i].to_string(),
                self.cumulative_stderr[i].to_string(),
                kind.clone(),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Per-sample rate terms at time `s` for noised points `ys`:
/// `(σ²/2)‖ε‖²` (ideal/neural) or `(σ²/2)‖qid_score + ε‖²` (score matching).
pub fn rate_terms(model: &dyn EpsModel, kind: CurveKind, spec: &DiffusionSpec, s: f64, ys: &[f64]) -> Result<Vec<f64>> {
    let d = model.dim();
    let n = ys.len() / d;
    let mut eps = vec![0.0; ys.len()];
    model.eval_batch(ys, &vec![s; n], &mut eps)?;
    let half_sigma_sq = 0.5 * spec.sigma_sq(s);
    let inv = 1.0 / spec.qid_std().powi(2);
    Ok(ys
        .chunks_exact(d)
        .zip(eps.chunks_exact(d))
        .map(|(y, e)| {
            let sq: f64 = match kind {
                CurveKind::ScoreMatch => y.iter().zip(e).map(|(a, b)| (b - a * inv).powi(2)).sum(),
                _ => e.iter().map(|v| v * v).sum(),
            };
            half_sigma_sq * sq
        })
        .collect())
}

/// `y = μ(s)·y_d + Σ(s)·ε` for row-major buffers.
pub fn noised(spec: &DiffusionSpec, s: f64, y_d: &[f64], eps: &[f64]) -> Vec<f64> {
    let k = spec.kernel_at(s);
    y_d.iter().zip(eps).map(|(y, e)| k.mu * y + k.sigma_big * e).collect()
}

fn draw_noised(p_d: &GaussianMixture, spec: &DiffusionSpec, s: f64, n: usize, rng: &mut SimRng) -> Vec<f64> {
    let d = p_d.dim();
    let mut y_d = vec![0.0; n * d];
    for row in y_d.chunks_exact_mut(d) {
        p_d.sample_into(rng, row);
    }
    let mut eps = vec![0.0; n * d];
    fill_standard_normal(rng, &mut eps);
    noised(spec, s, &y_d, &eps)
}

fn estimate(xs: &[f64]) -> Result<MCEstimate> {
    let mut m = Moments::default();
    xs.iter().for_each(|&x| m.push(x));
    if m.non_finite > 0 {
        return Err(Error::NonFiniteMonteCarlo { count: m.non_finite });
    }
    Ok(m.estimate())
}

/// `(σ²/2) E‖∇log p_eq − ∇log p(·, s)‖²` with exact scores.
pub fn ideal_rate(s: f64, p_d: &GaussianMixture, spec: &DiffusionSpec, n: usize, rng: &mut SimRng) -> Result<MCEstimate> {
    spec.kernel_params(s)?;
    let exact = ExactEps::new(p_d.clone(), *spec);
    let ys = draw_noised(p_d, spec, s, n, rng);
    estimate(&rate_terms(&exact, CurveKind::IdealTot, spec, s, &ys)?)
}

/// Entropy curve with fresh, independent samples from `p_d` at every grid
/// point. `IdealTot` ignores `model`; `ScoreMatch` falls back to exact
/// scores when `model` is `None`; `Neural` requires a model.
pub fn entropy_curve(
    kind: CurveKind,
    p_d: &GaussianMixture,
    spec: &DiffusionSpec,
    model: Option<&dyn EpsModel>,
    grid: &[f64],
    n: usize,
    rng: &mut SimRng,
) -> Result<EntropyCurve> {
    let exact = ExactEps::new(p_d.clone(), *spec);
    let m: &dyn EpsModel = match (kind, model) {
        (CurveKind::IdealTot, _) | (CurveKind::ScoreMatch, None) => &exact,
        (_, Some(m)) => m,
        (CurveKind::Neural, None) => {
            return Err(Error::Config("a neural entropy curve needs a model".into()));
        }
    };
    if m.dim() != p_d.dim() {
        return Err(Error::DimensionMismatch {
            expected: p_d.dim(),
            got: m.dim(),
        });
    }
    for &s in grid {
        spec.kernel_params(s)?;
    }
    let base: u64 = rng.random();
    let rates = grid
        .par_iter()
        .enumerate()
        .map(|(j, &s)| {
            let mut r = substream(base, j as u64);
            let ys = draw_noised(p_d, spec, s, n, &mut r);
            estimate(&rate_terms(m, kind, spec, s, &ys)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyCurve::from_rates(kind, grid.to_vec(), &rates, spec))
}

/// Entropy curve with common random numbers: the same `(y_d, ε)` rows are
/// used at every grid point. Cumulative errors come from the per-sample
/// integrals, so they account for the correlation between grid points.
pub fn entropy_curve_on(
    kind: CurveKind,
    model: &dyn EpsModel,
    spec: &DiffusionSpec,
    grid: &[f64],
    y_d: &Points,
    eps: &[f64],
) -> Result<EntropyCurve> {
    if y_d.dim != model.dim() || eps.len() != y_d.data.len() {
        return Err(Error::DimensionMismatch {
            expected: y_d.data.len(),
            got: eps.len(),
        });
    }
    let n = y_d.len();
    let per_point = grid
        .par_iter()
        .map(|&s| {
            spec.kernel_params(s)?;
            rate_terms(model, kind, spec, s, &noised(spec, s, &y_d.data, eps))
        })
        .collect::<Result<Vec<_>>>()?;
    let rates = per_point.iter().map(|v| estimate(v)).collect::<Result<Vec<_>>>()?;
    let mut running = vec![0.0; n];
    let mut cumulative = vec![0.0; grid.len()];
    let mut cum_se = vec![0.0; grid.len()];
    for j in 0..grid.len() - 1 {
        let h = grid[j + 1] - grid[j];
        for (acc, (a, b)) in running.iter_mut().zip(per_point[j].iter().zip(&per_point[j + 1])) {
            *acc += 0.5 * h * (a + b);
        }
        let e = estimate(&running)?;
        cumulative[j + 1] = e.value;
        cum_se[j + 1] = e.std_err;
    }
    let rate = rates.iter().map(|r| r.value).collect();
    let se = rates.iter().map(|r| r.std_err).collect();
    Ok(EntropyCurve::assemble(kind, grid.to_vec(), rate, se, cumulative, cum_se, spec))
}

/// Total entropy as `KL(p_d ‖ p_eq) − KL(P₀ ‖ p_eq)` with `P₀ = p(·, s_hi)`.
pub fn stot_via_kl_identity(p_d: &GaussianMixture, spec: &DiffusionSpec, n: usize, rng: &mut SimRng) -> Result<MCEstimate> {
    let p0 = p_d.pushforward(spec.s_hi(), spec)?;
    let a = kl_to_qid(p_d, spec, n, rng)?;
    let b = kl_to_qid(&p0, spec, n, rng)?;
    Ok(a.minus(&b))
}

/// `KL(p ‖ p_eq)` by Monte Carlo with exact log densities.
pub fn kl_to_qid(p: &GaussianMixture, spec: &DiffusionSpec, n: usize, rng: &mut SimRng) -> Result<MCEstimate> {
    let d = p.dim();
    kl_mc(
        |x| p.log_density(x),
        |x| spec.qid_log_density(x),
        |r| {
            let mut x = vec![0.0; d];
            p.sample_into(r, &mut x);
            x
        },
        n,
        rng,
    )
}

/// `KL(p(·, s) ‖ p_eq)` on `grid` with common random numbers.
pub fn kl_to_qid_curve(p_d: &GaussianMixture, spec: &DiffusionSpec, grid: &[f64], n: usize, rng: &mut SimRng) -> Result<Vec<MCEstimate>> {
    let d = p_d.dim();
    let mut y_d = vec![0.0; n * d];
    for row in y_d.chunks_exact_mut(d) {
        p_d.sample_into(rng, row);
    }
    let mut eps = vec![0.0; n * d];
    fill_standard_normal(rng, &mut eps);
    grid.par_iter()
        .map(|&s| {
            let k = spec.kernel_params(s)?;
            let v = k.sigma_big * k.sigma_big;
            let ys = noised(spec, s, &y_d, &eps);
            let terms: Vec<f64> = ys
                .chunks_exact(d)
                .map(|y| p_d.eval_affine(y, k.mu, v, None) - spec.qid_log_density(y))
                .collect();
            estimate(&terms)
        })
        .collect()
}

/// Consecutive pairs where the KL curve rises by more than `k` standard
/// errors.
pub fn h_theorem_violations(curve: &[MCEstimate], k: f64) -> Vec<usize> {
    (0..curve.len().saturating_sub(1))
        .filter(|&i| {
            let tol = k * curve[i].std_err.max(curve[i + 1].std_err);
            curve[i + 1].value > curve[i].value + tol
        })
        .collect()
}

/// `−∫_{s_lo}^{s_hi} ∇·b₊ ds` in `dim` dimensions, closed form.
pub fn divergence_integral(spec: &DiffusionSpec, dim: usize) -> f64 {
    let (lo, hi) = (spec.s_lo, spec.s_hi());
    let d = dim as f64;
    match spec.kind {
        ProcessKind::VP | ProcessKind::VPx => 0.5 * d * (spec.beta_integral(hi) - spec.beta_integral(lo)),
        ProcessKind::SL => d * ((1.0 - lo) / (1.0 - hi)).ln(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmReport {
    /// `∫(σ²/2)E‖s‖²` over the window.
    pub s_sm: MCEstimate,
    pub curve: EntropyCurve,
    /// `S_G[p(·, s_hi)] − S_G[p(·, s_lo)]` from independent Gibbs-entropy
    /// Monte Carlo.
    pub gibbs_diff: MCEstimate,
    /// Same difference from the path integral `∫E[(σ²/2)‖∇log p‖² + ∇·b₊]`.
    pub gibbs_path_integral: MCEstimate,
    /// `−∫∇·b₊`, i.e. `(D/2)∫β` for VP.
    pub divergence_term: f64,
    /// `|S_sm − (gibbs_diff + divergence_term)|`
    pub identity_gap: f64,
    pub gap_stderr: f64,
}

/// Score-matching entropy and its Gibbs-entropy identity. `model` gives
/// `s = qid_score + ε`; `None` uses exact scores.
pub fn sm_entropy_and_identity(
    p_d: &GaussianMixture,
    spec: &DiffusionSpec,
    model: Option<&dyn EpsModel>,
    grid: &[f64],
    n: usize,
    rng: &mut SimRng,
) -> Result<SmReport> {
    let curve = entropy_curve(CurveKind::ScoreMatch, p_d, spec, model, grid, n, rng)?;
    let s_sm = curve.total();
    let hi = gibbs_entropy_mc(&p_d.pushforward(spec.s_hi(), spec)?, n, rng)?;
    let lo = gibbs_entropy_mc(&p_d.pushforward(spec.s_lo, spec)?, n, rng)?;
    let gibbs_diff = hi.minus(&lo);
    let div = divergence_integral(spec, p_d.dim());
    let identity_gap = (s_sm.value - gibbs_diff.value - div).abs();
    let gap_stderr = s_sm.std_err.hypot(gibbs_diff.std_err);
    Ok(SmReport {
        s_sm,
        gibbs_path_integral: s_sm.shifted(-div),
        curve,
        gibbs_diff,
        divergence_term: div,
        identity_gap,
        gap_stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurCheck {
    pub satisfied: bool,
    /// `S_tot·σ²T − ½W₂²`
    pub slack: f64,
}

/// `S_tot · σ²T ≥ ½ W₂²`, allowing three standard errors of `S_tot`.
pub fn tur_check(stot: f64, sigma_sq_t: f64, w2_sq: f64, stot_err: f64) -> TurCheck {
    let slack = stot * sigma_sq_t - 0.5 * w2_sq;
    TurCheck {
        satisfied: slack >= -3.0 * stot_err * sigma_sq_t,
        slack,
    }
}

fn require_static(spec: &DiffusionSpec) -> Result<()> {
    if !spec.is_constant_beta() {
        return Err(Error::InvalidSpec(
            "free energy needs time-independent drift and diffusion (constant-β VP/VPx)".into(),
        ));
    }
    Ok(())
}

/// `β·F[p] = E_p[βU] − S_G[p]` with `βU = |x|²/(2κ²)`, per-sample.
fn reduced_free_energy(p: &GaussianMixture, spec: &DiffusionSpec, n: usize, rng: &mut SimRng) -> Result<MCEstimate> {
    let d = p.dim();
    let inv = 0.5 / spec.qid_std().powi(2);
    let m = mc_batched(n, rng, |r, count| {
        let mut x = vec![0.0; d];
        (0..count)
            .map(|_| {
                p.sample_into(r, &mut x);
                inv * x.iter().map(|v| v * v).sum::<f64>() + p.log_density(&x)
            })
            .collect()
    });
    if m.non_finite > 0 {
        return Err(Error::NonFiniteMonteCarlo { count: m.non_finite });
    }
    Ok(m.estimate())
}

/// `β(F[p_a] − F[p_b])` for a static process.
pub fn free_energy_difference(
    p_a: &GaussianMixture,
    p_b: &GaussianMixture,
    spec: &DiffusionSpec,
    n: usize,
    rng: &mut SimRng,
) -> Result<MCEstimate> {
    require_static(spec)?;
    let a = reduced_free_energy(p_a, spec, n, rng)?;
    let b = reduced_free_energy(p_b, spec, n, rng)?;
    Ok(a.minus(&b))
}

/// `β(F[p_d] − F[p_eq])`; the equilibrium term is exact,
/// `βF[p_eq] = −(D/2) log(2πκ²)`.
pub fn free_energy_gap(p_d: &GaussianMixture, spec: &DiffusionSpec, n: usize, rng: &mut SimRng) -> Result<MCEstimate> {
    require_static(spec)?;
    let a = reduced_free_energy(p_d, spec, n, rng)?;
    let d = p_d.dim() as f64;
    let eq = -0.5 * d * (2.0 * std::f64::consts::PI * spec.qid_std().powi(2)).ln();
    Ok(a.shifted(-eq))
}
