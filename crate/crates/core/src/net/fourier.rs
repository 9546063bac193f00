use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::mc::{standard_normal, SimRng};

/// Frozen random Fourier features `[cos 2πBx, sin 2πBx]` of the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierEmbedding {
    /// `F×D`, row-major.
    pub freq: Vec<f64>,
    pub features: usize,
    pub dim: usize,
    pub scale: f64,
}

impl FourierEmbedding {
    pub fn new(dim: usize, features: usize, scale: f64, rng: &mut SimRng) -> Self {
        let freq = (0..features * dim)
            .map(|_| scale * standard_normal(rng))
            .collect();
        Self {
            freq,
            features,
            dim,
            scale,
        }
    }

    pub fn out_dim(&self) -> usize {
        2 * self.features
    }

    /// Phases `2π·Bx` (length `F`).
    pub fn phases_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.freq.chunks_exact(self.dim)) {
            *o = TAU * row.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        }
    }

    /// Writes `2F` features of `x` into `out`.
    pub fn embed_into(&self, x: &[f64], out: &mut [f64]) {
        let f = self.features;
        self.phases_into(x, &mut out[..f]);
        for j in 0..f {
            let (s, c) = out[j].sin_cos();
            out[j] = c;
            out[f + j] = s;
        }
    }
}
