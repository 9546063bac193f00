use serde::{Deserialize, Serialize};

use super::fourier::FourierEmbedding;
use super::real::{matmul, matmul_nt, matmul_tn, Real};
use crate::error::{Error, Result};
use crate::mc::{standard_normal, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// Tanh-form Gaussian error linear unit.
    Gelu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub fourier_features: usize,
    pub fourier_scale: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            fourier_features: 128,
            fourier_scale: 1.0,
            hidden: vec![512, 256],
            activation: Activation::Gelu,
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/π)
const GELU_A: f64 = 0.044_715;

#[inline]
fn gelu_tanh<T: Real>(z: T) -> T {
    (T::of(GELU_C) * (z + T::of(GELU_A) * z * z * z)).tanh_fast()
}

#[inline]
fn gelu_from<T: Real>(z: T, t: T) -> T {
    T::of(0.5) * z * (T::one() + t)
}

#[inline]
fn gelu_grad<T: Real>(z: T, t: T) -> T {
    let half = T::of(0.5);
    half * (T::one() + t)
        + half * z * (T::one() - t * t) * T::of(GELU_C) * (T::one() + T::of(3.0 * GELU_A) * z * z)
}

/// Intermediate values of a batched forward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    pub n: usize,
    /// Input to each layer (`n × width[l]`).
    acts: Vec<Vec<T>>,
    /// Pre-activations and their GELU tanh factors for hidden layers.
    pre: Vec<Vec<T>>,
    tanh: Vec<Vec<T>>,
    pub out: Vec<T>,
}

/// Fourier-feature MLP `ε_θ(x, s)` with parameters stored flat, layer by
/// layer as `W` (`in × out`, row-major) followed by `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real> {
    pub emb: FourierEmbedding,
    /// `[2F + 1, hidden…, D]`
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub horizon: f64,
    pub params: Vec<T>,
}

impl<T: Real> Network<T> {
    /// Hidden layers get `N(0, 1/fan_in)` weights; the output layer is zero.
    pub fn new(dim: usize, cfg: &NetConfig, horizon: f64, rng: &mut SimRng) -> Self {
        let emb = FourierEmbedding::new(dim, cfg.fourier_features, cfg.fourier_scale, rng);
        let mut widths = vec![emb.out_dim() + 1];
        widths.extend(&cfg.hidden);
        widths.push(dim);
        let mut params = Vec::with_capacity(n_params(&widths));
        let last = widths.len() - 2;
        for (l, w) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let sd = (1.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(if l == last {
                    T::zero()
                } else {
                    T::of(sd * standard_normal(rng))
                });
            }
            params.extend(std::iter::repeat_n(T::zero(), fan_out));
        }
        Self {
            emb,
            widths,
            activation: cfg.activation,
            horizon,
            params,
        }
    }

    pub fn from_parts(
        emb: FourierEmbedding,
        widths: Vec<usize>,
        activation: Activation,
        horizon: f64,
        params: Vec<T>,
    ) -> Result<Self> {
        if widths.len() < 2 || widths[0] != emb.out_dim() + 1 || *widths.last().unwrap() != emb.dim {
            return Err(Error::Config(format!(
                "layer widths {widths:?} do not fit a {}-feature embedding of dimension {}",
                emb.features, emb.dim
            )));
        }
        if params.len() != n_params(&widths) {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                n_params(&widths),
                params.len()
            )));
        }
        Ok(Self {
            emb,
            widths,
            activation,
            horizon,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.emb.dim
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// `(offset of W, fan_in, fan_out)` for layer `l`; `b` follows `W`.
    fn layout(&self, l: usize) -> (usize, usize, usize) {
        let off: usize = self.widths[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        (off, self.widths[l], self.widths[l + 1])
    }

    pub fn layer(&self, l: usize) -> (&[T], &[T]) {
        let (o, i, n) = self.layout(l);
        (&self.params[o..o + i * n], &self.params[o + i * n..o + i * n + n])
    }

    /// Re-draws every weight (including the output layer) as
    /// `N(0, scale²/fan_in)` and biases as `N(0, scale²)`.
    pub fn randomize(&mut self, scale: f64, rng: &mut SimRng) {
        for l in 0..self.n_layers() {
            let (o, i, n) = self.layout(l);
            let sd = scale / (i as f64).sqrt();
            for p in &mut self.params[o..o + i * n] {
                *p = T::of(sd * standard_normal(rng));
            }
            for p in &mut self.params[o + i * n..o + i * n + n] {
                *p = T::of(scale * standard_normal(rng));
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            emb: self.emb.clone(),
            widths: self.widths.clone(),
            activation: self.activation,
            horizon: self.horizon,
            params: self.params.iter().map(|p| U::of(p.as_f64())).collect(),
        }
    }

    /// Network inputs `[emb(x); s/T]` for a batch, row-major `n × (2F+1)`.
    pub fn build_inputs(&self, xs: &[f64], ss: &[f64]) -> Result<Vec<T>> {
        let d = self.dim();
        let w = self.widths[0];
        if xs.len() != ss.len() * d {
            return Err(Error::DimensionMismatch {
                expected: ss.len() * d,
                got: xs.len(),
            });
        }
        let mut out = vec![T::zero(); ss.len() * w];
        let f = self.emb.features;
        let mut phase = vec![0.0; f];
        for (i, (x, s)) in xs.chunks_exact(d).zip(ss).enumerate() {
            if !s.is_finite() || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput { row: i });
            }
            self.emb.phases_into(x, &mut phase);
            let row = &mut out[i * w..(i + 1) * w];
            // Trig in the working precision; f32 sin_cos is much cheaper.
            for (j, z) in phase.iter().enumerate() {
                let (sn, cs) = T::of(*z).sin_cos();
                row[j] = cs;
                row[f + j] = sn;
            }
            row[w - 1] = T::of(s / self.horizon);
        }
        Ok(out)
    }

    fn apply_activation(&self, z: &mut [T]) {
        if self.activation == Activation::Gelu {
            for v in z.iter_mut() {
                *v = gelu_from(*v, gelu_tanh(*v));
            }
        }
    }

    fn affine(&self, l: usize, input: &[T], n: usize) -> Vec<T> {
        let (w, b) = self.layer(l);
        let (fi, fo) = (self.widths[l], self.widths[l + 1]);
        let mut z = Vec::with_capacity(n * fo);
        for _ in 0..n {
            z.extend_from_slice(b);
        }
        matmul(n, fi, fo, input, w, &mut z, true);
        z
    }

    /// Forward pass on prepared inputs (`n` rows).
    pub fn forward_inputs(&self, input: &[T], n: usize) -> Vec<T> {
        let mut a = self.affine(0, input, n);
        for l in 1..self.n_layers() {
            self.apply_activation(&mut a);
            a = self.affine(l, &a, n);
        }
        a
    }

    pub fn forward(&self, xs: &[f64], ss: &[f64]) -> Result<Vec<T>> {
        let input = self.build_inputs(xs, ss)?;
        Ok(self.forward_inputs(&input, ss.len()))
    }

    pub fn forward_one(&self, x: &[f64], s: f64) -> Result<Vec<f64>> {
        Ok(self.forward(x, &[s])?.iter().map(|v| v.as_f64()).collect())
    }

    pub fn forward_cached(&self, input: Vec<T>, n: usize) -> Cache<T> {
        let hidden = self.n_layers() - 1;
        let mut cache = Cache {
            n,
            acts: Vec::with_capacity(self.n_layers()),
            pre: Vec::with_capacity(hidden),
            tanh: Vec::with_capacity(hidden),
            out: Vec::new(),
        };
        cache.acts.push(input);
        for l in 0..self.n_layers() {
            let z = self.affine(l, cache.acts.last().unwrap(), n);
            if l == hidden {
                cache.out = z;
            } else {
                let (a, t) = match self.activation {
                    Activation::Gelu => {
                        let mut a = vec![T::zero(); z.len()];
                        let mut t = vec![T::zero(); z.len()];
                        for ((ai, ti), &v) in a.iter_mut().zip(t.iter_mut()).zip(&z) {
                            *ti = gelu_tanh(v);
                            *ai = gelu_from(v, *ti);
                        }
                        (a, t)
                    }
                    Activation::Identity => (z.clone(), Vec::new()),
                };
                cache.pre.push(z);
                cache.tanh.push(t);
                cache.acts.push(a);
            }
        }
        cache
    }

    /// Parameter gradient of `Σ_i ⟨d_out_i, out_i⟩`.
    pub fn backward(&self, cache: &Cache<T>, d_out: &[T]) -> Vec<T> {
        let n = cache.n;
        let mut grads = vec![T::zero(); self.params.len()];
        let mut dz = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (o, fi, fo) = self.layout(l);
            let a = &cache.acts[l];
            let (gw, gb) = grads[o..o + fi * fo + fo].split_at_mut(fi * fo);
            matmul_tn(fi, n, fo, a, &dz, gw, false);
            for row in dz.chunks_exact(fo) {
                for (g, v) in gb.iter_mut().zip(row) {
                    *g = *g + *v;
                }
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut da = vec![T::zero(); n * fi];
                matmul_nt(n, fo, fi, &dz, w, &mut da, false);
                if self.activation == Activation::Gelu {
                    let (z, t) = (&cache.pre[l - 1], &cache.tanh[l - 1]);
                    for ((d, &zv), &tv) in da.iter_mut().zip(z).zip(t) {
                        *d = *d * gelu_grad(zv, tv);
                    }
                }
                dz = da;
            }
        }
        grads
    }

    /// Mean loss over the batch and its parameter gradient. `per_sample(i,
    /// out_i, d_out_i)` returns the loss of sample `i` and writes its
    /// gradient with respect to the network output.
    pub fn loss_and_grad<F>(&self, xs: &[f64], ss: &[f64], mut per_sample: F) -> Result<(f64, Vec<T>)>
    where
        F: FnMut(usize, &[T], &mut [T]) -> f64,
    {
        let n = ss.len();
        let d = self.dim();
        let input = self.build_inputs(xs, ss)?;
        let cache = self.forward_cached(input, n);
        let mut d_out = vec![T::zero(); n * d];
        let mut total = 0.0;
        let inv = T::of(1.0 / n as f64);
        for i in 0..n {
            let g = &mut d_out[i * d..(i + 1) * d];
            let l = per_sample(i, &cache.out[i * d..(i + 1) * d], g);
            if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss { index: i });
            }
            total += l;
            g.iter_mut().for_each(|v| *v = *v * inv);
        }
        let grads = self.backward(&cache, &d_out);
        Ok((total / n as f64, grads))
    }
}

pub fn n_params(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::seeded;

    fn tiny(activation: Activation) -> Network<f64> {
        let cfg = NetConfig {
            fourier_features: 1,
            fourier_scale: 0.5,
            hidden: vec![1],
            activation,
        };
        let mut rng = seeded(17);
        let mut net = Network::<f64>::new(2, &cfg, 1.0, &mut rng);
        net.randomize(1.0, &mut rng);
        net
    }

    fn batch(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = seeded(seed);
        let xs = (0..2 * n).map(|_| standard_normal(&mut rng)).collect();
        let ss = (0..n).map(|i| 0.1 + 0.2 * i as f64).collect();
        (xs, ss)
    }

    /// Smooth per-sample loss `½‖out - t‖²` with `t` depending on the row.
    fn half_sq(i: usize, out: &[f64], g: &mut [f64]) -> f64 {
        let mut l = 0.0;
        for (k, (o, gv)) in out.iter().zip(g.iter_mut()).enumerate() {
            let r = o - 0.3 * (i + k) as f64;
            *gv = r;
            l += 0.5 * r * r;
        }
        l
    }

    #[test]
    fn fresh_network_outputs_zero() {
        let net = Network::<f64>::new(3, &NetConfig::default(), 1.0, &mut seeded(0));
        assert_eq!(net.widths, vec![257, 512, 256, 3]);
        let (xs, ss) = (vec![1.0, -2.0, 0.5, 3.0, 0.0, 0.1], vec![0.2, 0.9]);
        assert!(net.forward(&xs, &ss).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_network_is_a_matrix_product() {
        let cfg = NetConfig {
            fourier_features: 2,
            fourier_scale: 1.0,
            hidden: vec![],
            activation: Activation::Identity,
        };
        let mut rng = seeded(1);
        let mut net = Network::<f64>::new(2, &cfg, 2.0, &mut rng);
        net.randomize(1.0, &mut rng);
        let (x, s) = ([0.4, -0.7], 1.0);
        let inp = net.build_inputs(&x, &[s]).unwrap();
        assert_eq!(inp[4], 0.5);
        let (w, b) = net.layer(0);
        let out = net.forward_one(&x, s).unwrap();
        for j in 0..2 {
            let e: f64 = (0..5).map(|i| inp[i] * w[i * 2 + j]).sum::<f64>() + b[j];
            assert!((out[j] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_network_gradient_closed_form() {
        let cfg = NetConfig {
            fourier_features: 2,
            fourier_scale: 1.0,
            hidden: vec![],
            activation: Activation::Identity,
        };
        let mut rng = seeded(2);
        let mut net = Network::<f64>::new(2, &cfg, 1.0, &mut rng);
        net.randomize(1.0, &mut rng);
        let (xs, ss) = batch(3, 4);
        // L = mean ½‖out‖²: ∂L/∂W = mean inputᵀ·out, ∂L/∂b = mean out.
        let (_, g) = net
            .loss_and_grad(&xs, &ss, |_, o, d| {
                d.copy_from_slice(o);
                0.5 * o.iter().map(|v| v * v).sum::<f64>()
            })
            .unwrap();
        let inp = net.build_inputs(&xs, &ss).unwrap();
        let out = net.forward(&xs, &ss).unwrap();
        for i in 0..5 {
            for j in 0..2 {
                let e: f64 = (0..3).map(|r| inp[r * 5 + i] * out[r * 2 + j]).sum::<f64>() / 3.0;
                assert!((g[i * 2 + j] - e).abs() < 1e-14);
            }
        }
        for j in 0..2 {
            let e: f64 = (0..3).map(|r| out[r * 2 + j]).sum::<f64>() / 3.0;
            assert!((g[10 + j] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn batching_has_no_cross_talk() {
        let net = tiny(Activation::Gelu);
        let (xs, ss) = batch(5, 3);
        let all = net.forward(&xs, &ss).unwrap();
        for i in 0..5 {
            let one = net.forward_one(&xs[2 * i..2 * i + 2], ss[i]).unwrap();
            assert_eq!(&all[2 * i..2 * i + 2], &one[..]);
        }
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let net = tiny(Activation::Gelu);
        let (xs, ss) = batch(4, 5);
        let (l, g) = net.loss_and_grad(&xs, &ss, |_, _, _| 3.0).unwrap();
        assert_eq!(l, 3.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eight_parameter_gradient_matches_central_differences() {
        let net = tiny(Activation::Gelu);
        assert_eq!(net.n_params(), 8);
        let (xs, ss) = batch(4, 6);
        let (_, g) = net.loss_and_grad(&xs, &ss, half_sq).unwrap();
        let h = 1e-4;
        let mut max_rel: f64 = 0.0;
        for p in 0..8 {
            let mut a = net.clone();
            let mut b = net.clone();
            a.params[p] += h;
            b.params[p] -= h;
            let la = a.loss_and_grad(&xs, &ss, half_sq).unwrap().0;
            let lb = b.loss_and_grad(&xs, &ss, half_sq).unwrap().0;
            let fd = (la - lb) / (2.0 * h);
            max_rel = max_rel.max((fd - g[p]).abs() / g[p].abs().max(1e-3));
        }
        assert!(max_rel < 1e-5, "{max_rel}");
    }

    #[test]
    fn directional_derivatives_match() {
        let cfg = NetConfig {
            fourier_features: 4,
            fourier_scale: 0.7,
            hidden: vec![6, 5],
            activation: Activation::Gelu,
        };
        let mut rng = seeded(8);
        let mut net = Network::<f64>::new(2, &cfg, 1.0, &mut rng);
        net.randomize(1.0, &mut rng);
        let (xs, ss) = batch(7, 9);
        let (_, g) = net.loss_and_grad(&xs, &ss, half_sq).unwrap();
        let h = 1e-4;
        for _ in 0..100 {
            let mut dir: Vec<f64> = (0..net.n_params()).map(|_| standard_normal(&mut rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|v| *v /= norm);
            let shift = |sgn: f64| {
                let mut n = net.clone();
                for (p, d) in n.params.iter_mut().zip(&dir) {
                    *p += sgn * h * d;
                }
                n.loss_and_grad(&xs, &ss, half_sq).unwrap().0
            };
            let fd = (shift(1.0) - shift(-1.0)) / (2.0 * h);
            let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() / an.abs().max(1e-3) < 1e-5, "{fd} vs {an}");
        }
    }

    #[test]
    fn non_finite_input_and_loss_are_reported() {
        let net = tiny(Activation::Gelu);
        let err = net.forward(&[0.0, 0.0, f64::NAN, 1.0], &[0.1, 0.2]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteInput { row: 1 }));
        let (xs, ss) = batch(3, 1);
        let err = net
            .loss_and_grad(&xs, &ss, |i, _, _| if i == 2 { f64::INFINITY } else { 0.0 })
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { index: 2 }));
    }

    /// Empirical Lipschitz constant in `x` over random probe pairs.
    #[test]
    fn lipschitz_constant_is_finite() {
        let mut rng = seeded(10);
        let mut net = Network::<f64>::new(3, &NetConfig::default(), 1.0, &mut rng);
        net.randomize(1.0, &mut rng);
        let mut c: f64 = 0.0;
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
            let y: Vec<f64> = x.iter().map(|v| v + 1e-3 * standard_normal(&mut rng)).collect();
            let fx = net.forward_one(&x, 0.5).unwrap();
            let fy = net.forward_one(&y, 0.5).unwrap();
            let num: f64 = fx.iter().zip(&fy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            c = c.max(num / den);
        }
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn f32_tracks_f64() {
        let mut rng = seeded(11);
        let mut net = Network::<f64>::new(2, &NetConfig::default(), 1.0, &mut rng);
        net.randomize(1.0, &mut rng);
        let (xs, ss) = batch(16, 12);
        let a = net.forward(&xs, &ss).unwrap();
        let b = net.cast::<f32>().forward(&xs, &ss).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - *v as f64).abs() < 1e-3 * u.abs().max(1.0));
        }
    }
}
