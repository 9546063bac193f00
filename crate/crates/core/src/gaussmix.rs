//! Isotropic Gaussian mixtures with exact densities, scores and forward
//! pushforwards, plus Monte-Carlo divergence and entropy estimators.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mc::{fill_standard_normal, mc_batched, Points, SimRng};
pub use crate::mc::MCEstimate;
use crate::process::DiffusionSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureRaw {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

/// `Σ_r w_r N(x̄_r, c_r² I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRaw", into = "MixtureRaw")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
    /// `log w_r - (D/2) log(2π c_r²)`
    log_norm: Vec<f64>,
}

impl TryFrom<MixtureRaw> for GaussianMixture {
    type Error = Error;
    fn try_from(r: MixtureRaw) -> Result<Self> {
        GaussianMixture::new(r.weights, r.means, r.variances)
    }
}

impl From<GaussianMixture> for MixtureRaw {
    fn from(g: GaussianMixture) -> Self {
        MixtureRaw {
            weights: g.weights,
            means: g.means,
            variances: g.variances,
        }
    }
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidMixture(m.to_string()));
        let k = weights.len();
        if k == 0 {
            return bad("no components");
        }
        if means.len() != k || variances.len() != k {
            return bad("weights, means and variances differ in length");
        }
        let d = means[0].len();
        if d == 0 || means.iter().any(|m| m.len() != d) {
            return bad("means must share a positive dimension");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and nonnegative");
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("weights must sum to 1");
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("variances must be positive");
        }
        if means.iter().flatten().any(|m| !m.is_finite()) {
            return bad("means must be finite");
        }
        let log_norm = weights
            .iter()
            .zip(&variances)
            .map(|(w, v)| w.ln() - 0.5 * d as f64 * (2.0 * PI * v).ln())
            .collect();
        Ok(Self {
            weights,
            means,
            variances,
            log_norm,
        })
    }

    /// Single isotropic Gaussian `N(mean, var·I)`.
    pub fn gaussian(mean: Vec<f64>, var: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![var])
    }

    /// `N(0, var·I)` in `dim` dimensions.
    pub fn centered(dim: usize, var: f64) -> Result<Self> {
        Self::gaussian(vec![0.0; dim], var)
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Log density; writes the score into `score` when given.
    pub fn eval(&self, x: &[f64], score: Option<&mut [f64]>) -> f64 {
        self.eval_impl(x, 1.0, 0.0, score)
    }

    /// Log density and score of the law of `m·X + sqrt(v)·Z` (see
    /// [`GaussianMixture::affine`]) without building it.
    pub fn eval_affine(&self, x: &[f64], m: f64, v: f64, score: Option<&mut [f64]>) -> f64 {
        self.eval_impl(x, m, v, score)
    }

    fn eval_impl(&self, x: &[f64], m: f64, v: f64, score: Option<&mut [f64]>) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let identity = m == 1.0 && v == 0.0;
        let half_d = 0.5 * self.dim() as f64;
        let k = self.n_components();
        let mut stack = [0.0f64; 16];
        let mut heap;
        let lt: &mut [f64] = if k <= stack.len() {
            &mut stack[..k]
        } else {
            heap = vec![0.0; k];
            &mut heap
        };
        let mut var_stack = [0.0f64; 16];
        let mut var_heap;
        let vars: &mut [f64] = if k <= var_stack.len() {
            &mut var_stack[..k]
        } else {
            var_heap = vec![0.0; k];
            &mut var_heap
        };
        let mut max = f64::NEG_INFINITY;
        for r in 0..k {
            let d2: f64 = x
                .iter()
                .zip(&self.means[r])
                .map(|(a, c)| (a - m * c) * (a - m * c))
                .sum();
            let (var, norm) = if identity {
                (self.variances[r], self.log_norm[r])
            } else {
                let var = m * m * self.variances[r] + v;
                (var, self.weights[r].ln() - half_d * (2.0 * PI * var).ln())
            };
            vars[r] = var;
            lt[r] = norm - 0.5 * d2 / var;
            max = max.max(lt[r]);
        }
        let mut z = 0.0;
        for v in lt.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        if let Some(out) = score {
            out.iter_mut().for_each(|o| *o = 0.0);
            for r in 0..k {
                let g = lt[r] / z / vars[r];
                if g == 0.0 {
                    continue;
                }
                for ((o, a), c) in out.iter_mut().zip(x).zip(&self.means[r]) {
                    *o += g * (m * c - a);
                }
            }
        }
        max + z.ln()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }

    pub fn log_density_and_score(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut s = vec![0.0; x.len()];
        let l = self.eval(x, Some(&mut s));
        (l, s)
    }

    /// Draw a component index by weight.
    pub fn pick(&self, rng: &mut SimRng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (r, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return r;
            }
        }
        // Rounding can leave u just above the cumulative total.
        self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    pub fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        let r = self.pick(rng);
        fill_standard_normal(rng, out);
        let c = self.variances[r].sqrt();
        for (o, m) in out.iter_mut().zip(&self.means[r]) {
            *o = m + c * *o;
        }
    }

    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Points {
        let mut p = Points::zeros(self.dim(), n);
        for row in p.data.chunks_exact_mut(self.dim()) {
            self.sample_into(rng, row);
        }
        p
    }

    /// Exact marginal `p(·, s)` of the forward process started at `self`.
    pub fn pushforward(&self, s: f64, spec: &DiffusionSpec) -> Result<Self> {
        let k = spec.kernel_params(s)?;
        Ok(self.affine(k.mu, k.sigma_big * k.sigma_big))
    }

    /// Law of `m·X + sqrt(v)·Z` for `X ~ self`, `Z` standard normal.
    pub fn affine(&self, m: f64, v: f64) -> Self {
        let means = self
            .means
            .iter()
            .map(|x| x.iter().map(|a| m * a).collect())
            .collect();
        let variances = self.variances.iter().map(|c| m * m * c + v).collect();
        Self::new(self.weights.clone(), means, variances).expect("affine image of a valid mixture")
    }

    /// Mixture mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (w, x) in self.weights.iter().zip(&self.means) {
            for (a, b) in m.iter_mut().zip(x) {
                *a += w * b;
            }
        }
        m
    }

    /// Per-coordinate variance averaged over coordinates.
    pub fn mean_coordinate_variance(&self) -> f64 {
        let mu = self.mean();
        let mut acc = 0.0;
        for ((w, x), c) in self.weights.iter().zip(&self.means).zip(&self.variances) {
            let d2: f64 = x.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum();
            acc += w * (c + d2 / self.dim() as f64);
        }
        acc
    }
}

/// `E_p[log p - log q]` by Monte Carlo. Any non-finite log ratio is an error.
pub fn kl_mc<P, Q, S>(p_log: P, q_log: Q, sampler: S, n: usize, rng: &mut SimRng) -> Result<MCEstimate>
where
    P: Fn(&[f64]) -> f64 + Sync,
    Q: Fn(&[f64]) -> f64 + Sync,
    S: Fn(&mut SimRng) -> Vec<f64> + Sync,
{
    let m = mc_batched(n, rng, |r, count| {
        (0..count)
            .map(|_| {
                let x = sampler(r);
                p_log(&x) - q_log(&x)
            })
            .collect()
    });
    if m.non_finite > 0 {
        return Err(Error::NonFiniteMonteCarlo {
            count: m.non_finite,
        });
    }
    Ok(m.estimate())
}

/// `KL(p ‖ q)` between two mixtures with `p` sampled exactly.
pub fn kl_mixtures(p: &GaussianMixture, q: &GaussianMixture, n: usize, rng: &mut SimRng) -> Result<MCEstimate> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let d = p.dim();
    kl_mc(
        |x| p.log_density(x),
        |x| q.log_density(x),
        |r| {
            let mut x = vec![0.0; d];
            p.sample_into(r, &mut x);
            x
        },
        n,
        rng,
    )
}

/// `-E[log p]` for `p = gm`.
pub fn gibbs_entropy_mc(gm: &GaussianMixture, n: usize, rng: &mut SimRng) -> Result<MCEstimate> {
    let d = gm.dim();
    let m = mc_batched(n, rng, |r, count| {
        let mut x = vec![0.0; d];
        (0..count)
            .map(|_| {
                gm.sample_into(r, &mut x);
                -gm.log_density(&x)
            })
            .collect()
    });
    if m.non_finite > 0 {
        return Err(Error::NonFiniteMonteCarlo {
            count: m.non_finite,
        });
    }
    Ok(m.estimate())
}

/// Closed-form differential entropy of `N(·, var·I)` in `dim` dimensions.
pub fn gaussian_entropy(dim: usize, var: f64) -> f64 {
    0.5 * dim as f64 * (2.0 * PI * std::f64::consts::E * var).ln()
}

/// Closed-form `KL(N(m1, v1 I) ‖ N(m2, v2 I))`.
pub fn gaussian_kl(m1: &[f64], v1: f64, m2: &[f64], v2: f64) -> f64 {
    let d = m1.len() as f64;
    let dm2: f64 = m1.iter().zip(m2).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * (d * (v1 / v2 - 1.0 + (v2 / v1).ln()) + dm2 / v2)
}

/// Squared 2-Wasserstein distance between isotropic Gaussians.
pub fn w2_isotropic_gaussians(g1: (&[f64], f64), g2: (&[f64], f64), dim: usize) -> f64 {
    let dm2: f64 = g1.0.iter().zip(g2.0).map(|(a, b)| (a - b) * (a - b)).sum();
    dm2 + dim as f64 * (g1.1.sqrt() - g2.1.sqrt()).powi(2)
}

/// Equal-weight mixture with means uniform on `[-side/2, side/2]^D`.
pub fn random_mixture(dim: usize, k: usize, side: f64, var: f64, rng: &mut SimRng) -> Result<GaussianMixture> {
    if !(side > 0.0) {
        return Err(Error::InvalidMixture(format!("side must be positive, got {side}")));
    }
    if k == 0 {
        return Err(Error::InvalidMixture("no components".into()));
    }
    let means = (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| side * (rng.random::<f64>() - 0.5))
                .collect()
        })
        .collect();
    GaussianMixture::new(vec![1.0 / k as f64; k], means, vec![var; k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{seeded, standard_normal};

    #[test]
    fn score_vanishes_at_mode_and_by_symmetry() {
        let g = GaussianMixture::gaussian(vec![1.5, -0.5], 0.3).unwrap();
        let (_, s) = g.log_density_and_score(&[1.5, -0.5]);
        assert!(s.iter().all(|v| v.abs() < 1e-15));
        let g = GaussianMixture::new(vec![0.5, 0.5], vec![vec![2.0], vec![-2.0]], vec![1.0, 1.0])
            .unwrap();
        let (_, s) = g.log_density_and_score(&[0.0]);
        assert!(s[0].abs() < 1e-15);
    }

    #[test]
    fn standard_normal_log_density() {
        let g = GaussianMixture::centered(1, 1.0).unwrap();
        assert!((g.log_density(&[0.0]) + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        assert!((g.log_density(&[0.0]) + 0.91894).abs() < 1e-5);
    }

    #[test]
    fn far_tail_is_finite() {
        let g = GaussianMixture::new(vec![0.5, 0.5], vec![vec![0.0], vec![1.0]], vec![1e-4, 1e-4])
            .unwrap();
        let (l, s) = g.log_density_and_score(&[50.0]);
        assert!(l.is_finite() && s[0].is_finite());
        // Far right, the component at 1 dominates.
        assert!((s[0] - (1.0 - 50.0) / 1e-4).abs() < 1e-6);
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut rng = seeded(3);
        let g = random_mixture(4, 5, 4.0, 0.7, &mut rng).unwrap();
        let h = 1e-5;
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| 2.0 * standard_normal(&mut rng)).collect();
            let (_, s) = g.log_density_and_score(&x);
            for d in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[d] += h;
                xm[d] -= h;
                let fd = (g.log_density(&xp) - g.log_density(&xm)) / (2.0 * h);
                let err = (fd - s[d]).abs() / s[d].abs().max(1.0);
                assert!(err < 1e-5, "{err}");
            }
        }
    }

    #[test]
    fn sampling_moments_and_degenerate_weights() {
        let g = GaussianMixture::gaussian(vec![1.0, -3.0], 4.0).unwrap();
        let n = 100_000;
        let pts = g.sample(n, &mut seeded(9));
        let (m, v) = (pts.mean(), pts.variance());
        for d in 0..2 {
            let se = (4.0 / n as f64).sqrt();
            assert!((m[d] - g.means()[0][d]).abs() < 3.0 * se);
            assert!((v[d] - 4.0).abs() < 3.0 * 4.0 * (2.0 / n as f64).sqrt());
        }
        let g = GaussianMixture::new(vec![1.0, 0.0], vec![vec![0.0], vec![100.0]], vec![1.0, 1.0])
            .unwrap();
        let pts = g.sample(10_000, &mut seeded(1));
        assert!(pts.data.iter().all(|x| x.abs() < 10.0));
    }

    #[test]
    fn sampling_is_reproducible() {
        let g = random_mixture(3, 4, 4.0, 1.0, &mut seeded(2)).unwrap();
        let a = g.sample(500, &mut seeded(42));
        let b = g.sample(500, &mut seeded(42));
        assert_eq!(a.data, b.data);
        let m1 = random_mixture(6, 5, 4.0, 1.0, &mut seeded(8)).unwrap();
        let m2 = random_mixture(6, 5, 4.0, 1.0, &mut seeded(8)).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn random_mixture_shape() {
        let g = random_mixture(6, 5, 4.0, 1.0, &mut seeded(0)).unwrap();
        assert_eq!((g.dim(), g.n_components()), (6, 5));
        assert!(g.means().iter().flatten().all(|m| m.abs() <= 2.0));
        assert!(g.weights().iter().all(|w| *w == 0.2));
        let one = random_mixture(2, 1, 4.0, 1.0, &mut seeded(0)).unwrap();
        assert_eq!(one.n_components(), 1);
        assert!(random_mixture(2, 1, 0.0, 1.0, &mut seeded(0)).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let spec = DiffusionSpec::vp().with_constant_beta(2.0);
        let g = GaussianMixture::gaussian(vec![2.0], 1.0).unwrap();
        assert_eq!(g.pushforward(0.0, &spec).unwrap(), g);
        for s in [0.1, 0.5, 1.0] {
            let p = g.pushforward(s, &spec).unwrap();
            assert!((p.means()[0][0] - 2.0 * (-s as f64).exp()).abs() < 1e-14);
            assert!((p.variances()[0] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eval_affine_matches_materialised_mixture() {
        let g = random_mixture(3, 4, 4.0, 0.6, &mut seeded(21)).unwrap();
        let a = g.affine(0.7, 0.3);
        let x = [0.2, -1.0, 0.8];
        let (la, sa) = a.log_density_and_score(&x);
        let mut sb = [0.0; 3];
        let lb = g.eval_affine(&x, 0.7, 0.3, Some(&mut sb));
        assert!((la - lb).abs() < 1e-13);
        assert!(sa.iter().zip(&sb).all(|(u, v)| (u - v).abs() < 1e-13));
    }

    /// `p(·, s2)` equals the kernel from `s1` to `s2` applied to `p(·, s1)`.
    #[test]
    fn pushforward_semigroup() {
        let g = random_mixture(3, 4, 4.0, 0.5, &mut seeded(4)).unwrap();
        for spec in [DiffusionSpec::vp(), DiffusionSpec::vpx(0.1)] {
            for (s1, s2) in [(0.1, 0.4), (0.3, 1.0), (0.0, 0.7)] {
                let (m, v) = spec.transition(s1, s2);
                let two = g.pushforward(s1, &spec).unwrap().affine(m, v);
                let direct = g.pushforward(s2, &spec).unwrap();
                for r in 0..4 {
                    assert!((two.variances()[r] - direct.variances()[r]).abs() < 1e-12);
                    for d in 0..3 {
                        assert!((two.means()[r][d] - direct.means()[r][d]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    /// Histogram of kernel-noised samples against the pushforward CDF.
    #[test]
    fn pushforward_matches_perturbed_samples() {
        let spec = DiffusionSpec::vp();
        let g = GaussianMixture::new(vec![0.3, 0.7], vec![vec![-2.0], vec![1.5]], vec![0.2, 0.5])
            .unwrap();
        let s = 0.2;
        let p = g.pushforward(s, &spec).unwrap();
        let mut rng = seeded(12);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| {
                let mut y = [0.0];
                g.sample_into(&mut rng, &mut y);
                let e = [standard_normal(&mut rng)];
                spec.perturb(&y, s, &e).unwrap().y_s[0]
            })
            .collect();
        xs.sort_by(f64::total_cmp);
        // Kolmogorov-Smirnov against a numerically integrated CDF.
        let h = 1e-3;
        let lo = xs[0] - 1.0;
        let mut cdf = 0.0;
        let mut x = lo;
        let mut ks: f64 = 0.0;
        let mut prev = p.log_density(&[x]).exp();
        for (i, xi) in xs.iter().enumerate() {
            while x + h <= *xi {
                let next = p.log_density(&[x + h]).exp();
                cdf += 0.5 * h * (prev + next);
                prev = next;
                x += h;
            }
            let emp = (i + 1) as f64 / n as f64;
            ks = ks.max((emp - cdf).abs());
        }
        // 1% critical value is 1.63/sqrt(n); allow the quadrature lag of one cell.
        assert!(ks < 1.63 / (n as f64).sqrt() + 2e-3, "{ks}");
    }

    #[test]
    fn kl_examples() {
        let n = 100_000;
        let std = GaussianMixture::centered(1, 1.0).unwrap();
        let e = kl_mixtures(&std, &std, n, &mut seeded(1)).unwrap();
        assert_eq!(e.value, 0.0);
        let p = GaussianMixture::gaussian(vec![2.0], 1.0).unwrap();
        let e = kl_mixtures(&p, &std, n, &mut seeded(2)).unwrap();
        assert!(e.agrees_with(2.0, 3.0, 0.0), "{e:?}");
        assert_eq!(gaussian_kl(&[2.0], 1.0, &[0.0], 1.0), 2.0);
        let q = GaussianMixture::centered(1, 4.0).unwrap();
        let e = kl_mixtures(&std, &q, n, &mut seeded(3)).unwrap();
        let truth = 2f64.ln() - 3.0 / 8.0;
        assert!((gaussian_kl(&[0.0], 1.0, &[0.0], 4.0) - truth).abs() < 1e-15);
        assert!(e.agrees_with(truth, 3.0, 0.0), "{e:?}");
    }

    #[test]
    fn kl_is_unbiased_over_seeds() {
        let p = GaussianMixture::gaussian(vec![0.5, -1.0], 0.6).unwrap();
        let q = GaussianMixture::gaussian(vec![0.0, 0.0], 1.3).unwrap();
        let truth = gaussian_kl(&[0.5, -1.0], 0.6, &[0.0, 0.0], 1.3);
        let hits = (0..100)
            .filter(|k| {
                kl_mixtures(&p, &q, 4000, &mut seeded(1000 + k))
                    .unwrap()
                    .agrees_with(truth, 3.0, 0.0)
            })
            .count();
        assert!(hits >= 95, "{hits}");
    }

    #[test]
    fn kl_fails_loudly_on_non_finite() {
        let r = kl_mc(
            |_| 0.0,
            |x| if x[0] > 0.0 { f64::NEG_INFINITY } else { 0.0 },
            |r| vec![standard_normal(r)],
            1000,
            &mut seeded(0),
        );
        assert!(matches!(r, Err(Error::NonFiniteMonteCarlo { .. })));
    }

    #[test]
    fn gibbs_entropy_examples() {
        let n = 100_000;
        let e = gibbs_entropy_mc(&GaussianMixture::centered(1, 1.0).unwrap(), n, &mut seeded(5))
            .unwrap();
        assert!(e.agrees_with(1.41894, 3.0, 1e-5), "{e:?}");
        let e4 = gibbs_entropy_mc(&GaussianMixture::centered(1, 4.0).unwrap(), n, &mut seeded(5))
            .unwrap();
        // Same seed: the two estimates differ by exactly log 2 up to rounding.
        assert!((e4.value - e.value - 2f64.ln()).abs() < 1e-10);
        let e = gibbs_entropy_mc(&GaussianMixture::centered(3, 0.25).unwrap(), n, &mut seeded(6))
            .unwrap();
        assert!(e.agrees_with(gaussian_entropy(3, 0.25), 3.0, 0.0));
    }

    #[test]
    fn w2_examples() {
        assert_eq!(w2_isotropic_gaussians((&[1.0], 2.0), (&[1.0], 2.0), 1), 0.0);
        assert_eq!(w2_isotropic_gaussians((&[2.0], 1.0), (&[0.0], 1.0), 1), 4.0);
        assert!((w2_isotropic_gaussians((&[0.0], 1.0), (&[0.0], 0.01), 1) - 0.81).abs() < 1e-15);
    }

    #[test]
    fn validation_and_json() {
        assert!(GaussianMixture::new(vec![0.5, 0.4], vec![vec![0.0], vec![1.0]], vec![1.0, 1.0])
            .is_err());
        assert!(GaussianMixture::new(vec![1.0], vec![vec![0.0]], vec![0.0]).is_err());
        assert!(GaussianMixture::new(vec![1.0], vec![vec![f64::NAN]], vec![1.0]).is_err());
        let g = random_mixture(2, 3, 4.0, 1.0, &mut seeded(1)).unwrap();
        let js = serde_json::to_string(&g).unwrap();
        assert!(js.contains("weights") && js.contains("variances") && !js.contains("log_norm"));
        let back: GaussianMixture = serde_json::from_str(&js).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<GaussianMixture>(
            r#"{"weights":[1.0],"means":[[0.0]],"variances":[-1.0]}"#
        )
        .is_err());
    }
}
