//! Anything that can play the role of `ε(y, s)`: trained networks, the exact
//! optimum for an analytic data law, or zero.

use crate::error::Result;
use crate::gaussmix::GaussianMixture;
use crate::net::{Network, Real};
use crate::process::DiffusionSpec;

pub trait EpsModel: Sync {
    fn dim(&self) -> usize;

    /// Evaluates `ε(y_i, s_i)` for `ss.len()` row-major points.
    fn eval_batch(&self, ys: &[f64], ss: &[f64], out: &mut [f64]) -> Result<()>;
}

/// `ε ≡ 0`: the untrained entropy-matching model.
#[derive(Debug, Clone, Copy)]
pub struct ZeroEps {
    pub dim: usize,
}

impl EpsModel for ZeroEps {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_batch(&self, _: &[f64], _: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }
}

/// `ε*(y, s) = ∇log p(y, s) − ∇log p_eq(y)` for an analytic data law.
#[derive(Debug, Clone)]
pub struct ExactEps {
    pub p_d: GaussianMixture,
    pub spec: DiffusionSpec,
}

impl ExactEps {
    pub fn new(p_d: GaussianMixture, spec: DiffusionSpec) -> Self {
        Self { p_d, spec }
    }

    /// Exact score `∇log p(y, s)` into `out`.
    pub fn score_into(&self, y: &[f64], s: f64, out: &mut [f64]) -> f64 {
        let k = self.spec.kernel_at(s);
        self.p_d.eval_affine(y, k.mu, k.sigma_big * k.sigma_big, Some(out))
    }
}

impl EpsModel for ExactEps {
    fn dim(&self) -> usize {
        self.p_d.dim()
    }

    fn eval_batch(&self, ys: &[f64], ss: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let inv = 1.0 / self.spec.qid_std().powi(2);
        for ((y, s), o) in ys.chunks_exact(d).zip(ss).zip(out.chunks_exact_mut(d)) {
            self.score_into(y, *s, o);
            for (ov, yv) in o.iter_mut().zip(y) {
                *ov += yv * inv;
            }
        }
        Ok(())
    }
}

const EVAL_CHUNK: usize = 2048;

impl<T: Real> EpsModel for Network<T> {
    fn dim(&self) -> usize {
        Network::dim(self)
    }

    fn eval_batch(&self, ys: &[f64], ss: &[f64], out: &mut [f64]) -> Result<()> {
        let d = Network::dim(self);
        for (k, s_chunk) in ss.chunks(EVAL_CHUNK).enumerate() {
            let lo = k * EVAL_CHUNK * d;
            let hi = lo + s_chunk.len() * d;
            let y = self.forward(&ys[lo..hi], s_chunk)?;
            for (o, v) in out[lo..hi].iter_mut().zip(&y) {
                *o = v.as_f64();
            }
        }
        Ok(())
    }
}

impl<M: EpsModel + ?Sized> EpsModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval_batch(&self, ys: &[f64], ss: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval_batch(ys, ss, out)
    }
}
