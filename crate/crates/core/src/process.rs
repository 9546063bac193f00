//! Forward noising processes (VP, VPx, SL), their Gaussian perturbation
//! kernels and quasi-invariant distributions.
//!
//! All three processes have a drift that is linear in the state,
//! `b₊(x, s) = f(s) x`, and an isotropic diffusion coefficient `σ(s)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_S_LO: f64 = 1e-5;
pub const DEFAULT_BETA_MIN: f64 = 0.1;
pub const DEFAULT_BETA_MAX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessKind {
    VP,
    VPx,
    SL,
}

impl std::fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProcessKind::VP => "VP",
            ProcessKind::VPx => "VPx",
            ProcessKind::SL => "SL",
        };
        f.write_str(s)
    }
}

/// One forward process. `beta_min == beta_max` gives a constant schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    pub kind: ProcessKind,
    #[serde(default = "default_beta_min")]
    pub beta_min: f64,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "default_s_lo")]
    pub s_lo: f64,
    /// Upper cutoff; `None` in a config means the process default.
    #[serde(default)]
    pub s_hi: Option<f64>,
}

fn default_beta_min() -> f64 {
    DEFAULT_BETA_MIN
}
fn default_beta_max() -> f64 {
    DEFAULT_BETA_MAX
}
fn one() -> f64 {
    1.0
}
fn default_sigma0() -> f64 {
    0.1
}
fn default_s_lo() -> f64 {
    DEFAULT_S_LO
}

/// Closed-form kernel `p(y_s | y_d) = N(mu·y_d, sigma_big²·I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub mu: f64,
    pub sigma_big: f64,
}

/// A data point pushed through the kernel together with the noise that did it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisedSample {
    pub y_s: Vec<f64>,
    pub y_d: Vec<f64>,
    pub s: f64,
    pub eps: Vec<f64>,
    pub kernel_score: Vec<f64>,
}

impl DiffusionSpec {
    pub fn vp() -> Self {
        Self {
            kind: ProcessKind::VP,
            beta_min: DEFAULT_BETA_MIN,
            beta_max: DEFAULT_BETA_MAX,
            kappa: 1.0,
            sigma0: default_sigma0(),
            horizon: 1.0,
            s_lo: DEFAULT_S_LO,
            s_hi: None,
        }
    }

    pub fn vpx(kappa: f64) -> Self {
        Self {
            kind: ProcessKind::VPx,
            kappa,
            ..Self::vp()
        }
    }

    pub fn sl(sigma0: f64) -> Self {
        Self {
            kind: ProcessKind::SL,
            sigma0,
            ..Self::vp()
        }
    }

    pub fn with_constant_beta(mut self, beta: f64) -> Self {
        self.beta_min = beta;
        self.beta_max = beta;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        let finite = [
            self.beta_min,
            self.beta_max,
            self.kappa,
            self.sigma0,
            self.horizon,
            self.s_lo,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if self.horizon <= 0.0 {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.s_lo <= 0.0 || self.s_lo >= self.s_hi() {
            return bad(format!(
                "need 0 < s_lo < s_hi, got s_lo = {}, s_hi = {}",
                self.s_lo,
                self.s_hi()
            ));
        }
        match self.kind {
            ProcessKind::VP | ProcessKind::VPx => {
                if self.beta_min <= 0.0 || self.beta_max <= 0.0 {
                    return bad("beta(s) must be positive on [0, T]".into());
                }
                if self.kind == ProcessKind::VPx && self.kappa <= 0.0 {
                    return bad(format!("kappa must be positive, got {}", self.kappa));
                }
                if let Some(hi) = self.s_hi {
                    if (hi - self.horizon).abs() > 1e-12 {
                        return bad(format!("VP/VPx require s_hi = horizon, got {hi}"));
                    }
                }
            }
            ProcessKind::SL => {
                if self.sigma0 <= 0.0 {
                    return bad(format!("sigma0 must be positive, got {}", self.sigma0));
                }
                if (self.horizon - 1.0).abs() > 1e-12 {
                    return bad("SL is defined on T = 1".into());
                }
                if self.s_hi() >= self.horizon {
                    return bad("SL requires s_hi < horizon".into());
                }
            }
        }
        Ok(())
    }

    /// Upper time cutoff: `horizon` for VP/VPx, `1 - 1e-5` for SL unless set.
    pub fn s_hi(&self) -> f64 {
        match (self.s_hi, self.kind) {
            (Some(v), _) => v,
            (None, ProcessKind::SL) => self.horizon - DEFAULT_S_LO,
            (None, _) => self.horizon,
        }
    }

    /// Length of the cut-off time window `[s_lo, s_hi]`.
    pub fn window(&self) -> f64 {
        self.s_hi() - self.s_lo
    }

    /// Standard deviation of the quasi-invariant Gaussian.
    pub fn qid_std(&self) -> f64 {
        match self.kind {
            ProcessKind::VP => 1.0,
            ProcessKind::VPx => self.kappa,
            ProcessKind::SL => self.sigma0,
        }
    }

    pub fn is_constant_beta(&self) -> bool {
        self.kind != ProcessKind::SL && self.beta_min == self.beta_max
    }

    /// Linear schedule `beta(s)`.
    pub fn beta(&self, s: f64) -> f64 {
        self.beta_min + (self.beta_max - self.beta_min) * s / self.horizon
    }

    /// `∫₀ˢ beta`, closed form.
    pub fn beta_integral(&self, s: f64) -> f64 {
        self.beta_min * s + 0.5 * (self.beta_max - self.beta_min) * s * s / self.horizon
    }

    fn check_time(&self, s: f64) -> Result<()> {
        if self.kind == ProcessKind::SL && s >= 1.0 {
            return Err(Error::Singularity { s });
        }
        if !(0.0..=self.s_hi()).contains(&s) {
            return Err(Error::TimeOutOfRange {
                s,
                lo: 0.0,
                hi: self.s_hi(),
            });
        }
        Ok(())
    }

    /// Drift rate `f(s)` with `b₊(x, s) = f(s)·x`. Unchecked.
    pub fn drift_rate(&self, s: f64) -> f64 {
        match self.kind {
            ProcessKind::VP | ProcessKind::VPx => -0.5 * self.beta(s),
            ProcessKind::SL => -1.0 / (1.0 - s),
        }
    }

    /// `σ(s)²`. Unchecked.
    pub fn sigma_sq(&self, s: f64) -> f64 {
        match self.kind {
            ProcessKind::VP => self.beta(s),
            ProcessKind::VPx => self.kappa * self.kappa * self.beta(s),
            ProcessKind::SL => 2.0 * self.sigma0 * self.sigma0 / (1.0 - s),
        }
    }

    /// `∇·b₊` in `dim` dimensions.
    pub fn drift_divergence(&self, s: f64, dim: usize) -> f64 {
        self.drift_rate(s) * dim as f64
    }

    pub fn drift_and_diffusion(&self, x: &[f64], s: f64) -> Result<(Vec<f64>, f64)> {
        self.check_time(s)?;
        let f = self.drift_rate(s);
        Ok((x.iter().map(|v| f * v).collect(), self.sigma_sq(s).sqrt()))
    }

    /// Unchecked kernel parameters.
    pub fn kernel_at(&self, s: f64) -> KernelParams {
        match self.kind {
            ProcessKind::VP | ProcessKind::VPx => {
                let b = self.beta_integral(s);
                let k = self.qid_std();
                KernelParams {
                    mu: (-0.5 * b).exp(),
                    sigma_big: k * (-(-b).exp_m1()).max(0.0).sqrt(),
                }
            }
            ProcessKind::SL => {
                let m = 1.0 - s;
                KernelParams {
                    mu: m,
                    sigma_big: self.sigma0 * (s * (2.0 - s)).max(0.0).sqrt(),
                }
            }
        }
    }

    pub fn kernel_params(&self, s: f64) -> Result<KernelParams> {
        self.check_time(s)?;
        Ok(self.kernel_at(s))
    }

    /// `y_s = mu(s)·y_d + Σ(s)·noise`, with the kernel score `-noise / Σ(s)`.
    pub fn perturb(&self, y_d: &[f64], s: f64, noise: &[f64]) -> Result<NoisedSample> {
        if y_d.len() != noise.len() {
            return Err(Error::DimensionMismatch {
                expected: y_d.len(),
                got: noise.len(),
            });
        }
        let k = self.kernel_params(s)?;
        if k.sigma_big <= 0.0 {
            return Err(Error::ZeroKernelWidth { s });
        }
        let y_s = y_d
            .iter()
            .zip(noise)
            .map(|(y, e)| k.mu * y + k.sigma_big * e)
            .collect();
        Ok(NoisedSample {
            y_s,
            y_d: y_d.to_vec(),
            s,
            eps: noise.to_vec(),
            kernel_score: noise.iter().map(|e| -e / k.sigma_big).collect(),
        })
    }

    /// Score of the quasi-invariant distribution, written into `out`.
    pub fn qid_score_into(&self, x: &[f64], out: &mut [f64]) {
        let inv = 1.0 / (self.qid_std() * self.qid_std());
        for (o, v) in out.iter_mut().zip(x) {
            *o = -v * inv;
        }
    }

    /// Log density of the quasi-invariant distribution `N(0, qid_std²·I)`.
    pub fn qid_log_density(&self, x: &[f64]) -> f64 {
        let v = self.qid_std() * self.qid_std();
        let r2: f64 = x.iter().map(|a| a * a).sum();
        -0.5 * r2 / v - 0.5 * x.len() as f64 * (2.0 * PI * v).ln()
    }

    /// Gibbs entropy of the quasi-invariant Gaussian in `dim` dimensions.
    pub fn qid_entropy(&self, dim: usize) -> f64 {
        let v = self.qid_std() * self.qid_std();
        0.5 * dim as f64 * (2.0 * PI * std::f64::consts::E * v).ln()
    }

    /// Quasi-invariant log density and score. The result does not depend on
    /// `s` for any of the three processes.
    pub fn qid(&self, x: &[f64], s: f64) -> Result<(f64, Vec<f64>)> {
        self.check_time(s)?;
        let mut score = vec![0.0; x.len()];
        self.qid_score_into(x, &mut score);
        Ok((self.qid_log_density(x), score))
    }

    /// Loss weighting `Λ(s) = 2Σ(s)²/σ(s)²`.
    pub fn lambda_ho(&self, s: f64) -> f64 {
        let k = self.kernel_at(s);
        2.0 * k.sigma_big * k.sigma_big / self.sigma_sq(s)
    }

    /// Kernel composition from `s1` to `s2 >= s1`: returns `(m, v)` such that
    /// `y_{s2} | y_{s1} ~ N(m·y_{s1}, v·I)`.
    pub fn transition(&self, s1: f64, s2: f64) -> (f64, f64) {
        let a = self.kernel_at(s1);
        let b = self.kernel_at(s2);
        let m = b.mu / a.mu;
        let v = b.sigma_big * b.sigma_big - m * m * a.sigma_big * a.sigma_big;
        (m, v.max(0.0))
    }
}
