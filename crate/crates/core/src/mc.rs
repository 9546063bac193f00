//! Monte-Carlo plumbing: seeded substreams, running moments and sharded
//! estimators whose reduction order is fixed, so results do not depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type SimRng = ChaCha8Rng;

/// Samples drawn per shard. Shard boundaries are part of the determinism
/// contract: changing this changes every seeded estimate.
pub const SHARD: usize = 2048;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream `index` derived from `base`.
pub fn substream(base: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}

/// Row-major collection of points in `dim` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0, "ragged point buffer");
        Self { dim, data }
    }

    pub fn zeros(dim: usize, n: usize) -> Self {
        Self::new(dim, vec![0.0; dim * n])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(1, Vec::len);
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(dim, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Per-coordinate sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Per-coordinate unbiased sample variance.
    pub fn variance(&self) -> Vec<f64> {
        let m = self.mean();
        let mut v = vec![0.0; self.dim];
        for r in self.rows() {
            for ((a, b), mu) in v.iter_mut().zip(r).zip(&m) {
                *a += (b - mu) * (b - mu);
            }
        }
        let n = (self.len().max(2) - 1) as f64;
        v.iter_mut().for_each(|a| *a /= n);
        v
    }
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n: usize,
}

impl std::fmt::Display for MCEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.6} ± {:.6} (n = {})", self.value, self.std_err, self.n)
    }
}

impl MCEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        m.estimate()
    }

    /// Difference of two independent estimates.
    pub fn minus(&self, other: &MCEstimate) -> MCEstimate {
        MCEstimate {
            value: self.value - other.value,
            std_err: self.std_err.hypot(other.std_err),
            n: self.n.min(other.n),
        }
    }

    pub fn plus(&self, other: &MCEstimate) -> MCEstimate {
        MCEstimate {
            value: self.value + other.value,
            std_err: self.std_err.hypot(other.std_err),
            n: self.n.min(other.n),
        }
    }

    pub fn scaled(&self, k: f64) -> MCEstimate {
        MCEstimate {
            value: self.value * k,
            std_err: self.std_err * k.abs(),
            n: self.n,
        }
    }

    pub fn shifted(&self, c: f64) -> MCEstimate {
        MCEstimate {
            value: self.value + c,
            ..*self
        }
    }

    /// |value - target| <= k * std_err + slack
    pub fn agrees_with(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.value - target).abs() <= k * self.std_err + slack
    }
}

/// Welford accumulator; non-finite inputs are counted and excluded.
#[derive(Debug, Default, Clone, Copy)]
pub struct Moments {
    pub n: usize,
    mean: f64,
    m2: f64,
    pub non_finite: usize,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        if !x.is_finite() {
            self.non_finite += 1;
            return;
        }
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, o: &Moments) {
        self.non_finite += o.non_finite;
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            let nf = self.non_finite;
            *self = *o;
            self.non_finite = nf;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64;
        self.n = n;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> MCEstimate {
        let se = if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        };
        MCEstimate {
            value: self.mean,
            std_err: se,
            n: self.n,
        }
    }
}

/// Sharded batch estimator. `shard(rng, count)` returns `count` per-sample
/// values; shards run in parallel on substreams of a base seed drawn from
/// `rng` and are merged in shard order.
pub fn mc_batched<F>(n: usize, rng: &mut SimRng, shard: F) -> Moments
where
    F: Fn(&mut SimRng, usize) -> Vec<f64> + Sync,
{
    let base: u64 = rng.random();
    let shards = n.div_ceil(SHARD);
    let parts: Vec<Moments> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let mut r = substream(base, k as u64);
            let count = SHARD.min(n - k * SHARD);
            let mut m = Moments::default();
            for v in shard(&mut r, count) {
                m.push(v);
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Per-sample version of [`mc_batched`].
pub fn mc_mean<F>(n: usize, rng: &mut SimRng, f: F) -> Moments
where
    F: Fn(&mut SimRng) -> f64 + Sync,
{
    mc_batched(n, rng, |r, count| (0..count).map(|_| f(r)).collect())
}

pub fn standard_normal(rng: &mut SimRng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

pub fn fill_standard_normal(rng: &mut SimRng, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(rand_distr::StandardNormal);
    }
}
