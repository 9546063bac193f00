//! Denoising entropy-matching and score-matching objectives and the Adam
//! training loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::mc::{fill_standard_normal, substream, Points, SimRng};
use crate::net::{Adam, AdamConfig, Checkpoint, NetConfig, Network, Real};
use crate::process::{DiffusionSpec, NoisedSample};
use crate::thermo::{entropy_curve_on, uniform_grid, CurveKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    EntropyMatching,
    ScoreMatching,
}

/// Time weighting `Λ(s)`: `Lambda1` is 1, `LambdaHo` is `2Σ²/σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    Lambda1,
    LambdaHo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

fn d_epochs() -> usize {
    200
}
fn d_batch() -> usize {
    256
}
fn d_lr() -> f64 {
    1e-3
}
fn d_k() -> usize {
    10
}
fn d_precision() -> Precision {
    Precision::F32
}
fn d_probe_points() -> usize {
    50
}
fn d_probe_samples() -> usize {
    40
}
fn d_divergence() -> f64 {
    1e6
}
fn d_objective() -> Objective {
    Objective::EntropyMatching
}
fn d_weighting() -> Weighting {
    Weighting::LambdaHo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_objective")]
    pub objective: Objective,
    #[serde(default = "d_weighting")]
    pub weighting: Weighting,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// Data points per minibatch; each one is expanded into
    /// `time_samples_per_datum` `(s, ε)` draws.
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_k")]
    pub time_samples_per_datum: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_precision")]
    pub precision: Precision,
    #[serde(default)]
    pub net: NetConfig,
    /// Grid points of the per-epoch neural-entropy probe.
    #[serde(default = "d_probe_points")]
    pub probe_points: usize,
    /// Held-out samples used by the probe (at most the probe set size).
    #[serde(default = "d_probe_samples")]
    pub probe_samples: usize,
    /// Checkpoint every this many epochs; 0 disables periodic checkpoints.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "d_divergence")]
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.time_samples_per_datum == 0 {
            return bad("time_samples_per_datum must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.probe_points < 2 {
            return bad("probe_points must be at least 2");
        }
        if !(self.divergence_threshold > 0.0) {
            return bad("divergence_threshold must be positive");
        }
        Ok(())
    }

    fn weight(&self, spec: &DiffusionSpec, s: f64) -> f64 {
        let half_sigma_sq = 0.5 * spec.sigma_sq(s);
        match self.weighting {
            Weighting::Lambda1 => half_sigma_sq,
            Weighting::LambdaHo => spec.lambda_ho(s) * half_sigma_sq,
        }
    }
}

/// `qid_score(y_s) + ε_out − kernel_score`.
pub fn em_residual(noised: &NoisedSample, eps_out: &[f64], spec: &DiffusionSpec) -> Vec<f64> {
    let mut r = vec![0.0; eps_out.len()];
    spec.qid_score_into(&noised.y_s, &mut r);
    for ((ri, e), k) in r.iter_mut().zip(eps_out).zip(&noised.kernel_score) {
        *ri += e - k;
    }
    r
}

/// `s_out − kernel_score`.
pub fn sm_residual(noised: &NoisedSample, s_out: &[f64]) -> Vec<f64> {
    s_out.iter().zip(&noised.kernel_score).map(|(a, k)| a - k).collect()
}

/// Training draws for one minibatch: `k` stratified times per datum with
/// their Gaussian noise, in row-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub dim: usize,
    pub k: usize,
    /// Batch rows repeated `k` times each: datum `i` owns rows `i·k..(i+1)·k`.
    pub y_s: Vec<f64>,
    pub s: Vec<f64>,
    /// Kernel score `−ε/Σ(s)` per row.
    pub kernel_score: Vec<f64>,
}

impl Draws {
    pub fn rows(&self) -> usize {
        self.s.len()
    }
}

pub fn draw(batch: &Points, spec: &DiffusionSpec, k: usize, rng: &mut SimRng) -> Result<Draws> {
    let d = batch.dim;
    let (lo, len) = (spec.s_lo, spec.window());
    let rows = batch.len() * k;
    let mut s = Vec::with_capacity(rows);
    for _ in 0..batch.len() {
        for j in 0..k {
            let u: f64 = rng.random();
            s.push(lo + len * (j as f64 + u) / k as f64);
        }
    }
    let mut eps = vec![0.0; rows * d];
    fill_standard_normal(rng, &mut eps);
    let mut y_s = vec![0.0; rows * d];
    let mut kernel_score = vec![0.0; rows * d];
    for r in 0..rows {
        let kp = spec.kernel_params(s[r])?;
        if kp.sigma_big <= 0.0 {
            return Err(Error::ZeroKernelWidth { s: s[r] });
        }
        let y = batch.row(r / k);
        for c in 0..d {
            let e = eps[r * d + c];
            y_s[r * d + c] = kp.mu * y[c] + kp.sigma_big * e;
            kernel_score[r * d + c] = -e / kp.sigma_big;
        }
    }
    Ok(Draws {
        dim: d,
        k,
        y_s,
        s,
        kernel_score,
    })
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Window-scaled mean of `Λ(s)(σ²/2)‖residual‖²` over the draws, with its
/// parameter gradient. The loss is reduced in sorted order so it does not
/// depend on the order of the batch.
pub fn loss_on_draws<T: Real>(
    net: &Network<T>,
    draws: &Draws,
    spec: &DiffusionSpec,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<T>)> {
    let d = draws.dim;
    let len = spec.window();
    let inv_q = 1.0 / spec.qid_std().powi(2);
    let em = cfg.objective == Objective::EntropyMatching;
    let mut terms = Vec::with_capacity(draws.rows());
    let (_, grads) = net.loss_and_grad(&draws.y_s, &draws.s, |i, out, g| {
        let w = len * cfg.weight(spec, draws.s[i]);
        let mut sq = 0.0;
        for c in 0..d {
            let j = i * d + c;
            let base = if em { -draws.y_s[j] * inv_q } else { 0.0 };
            let r = base + out[c].as_f64() - draws.kernel_score[j];
            sq += r * r;
            g[c] = T::of(2.0 * w * r);
        }
        terms.push(w * sq);
        w * sq
    })?;
    Ok((sorted_sum(terms) / draws.rows() as f64, grads))
}

/// Draws `(s, ε)` for `batch` and evaluates the objective.
pub fn batch_loss<T: Real>(
    net: &Network<T>,
    batch: &Points,
    spec: &DiffusionSpec,
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> Result<(f64, Vec<T>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let draws = draw(batch, spec, cfg.time_samples_per_datum, rng)?;
    loss_on_draws(net, &draws, spec, cfg).map_err(|e| match e {
        Error::NonFiniteLoss { index } => Error::NonFiniteTraining {
            datum: index / draws.k,
            s: draws.s[index],
        },
        e => e,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Neural entropy `S_NN(T)` on the held-out probe.
    pub s_nn_t: f64,
    pub s_nn_t_stderr: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub network: Network<f64>,
    pub log: Vec<EpochRecord>,
}

/// Writes the per-epoch log as CSV. Wallclock time is kept out of this file
/// so that reruns are byte-identical; it goes in the run manifest.
pub fn write_log_csv<W: Write>(log: &[EpochRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wr.write_record(["epoch", "loss", "s_nn_t", "s_nn_t_stderr"]).map_err(io)?;
    for r in log {
        wr.write_record([
            r.epoch.to_string(),
            r.loss.to_string(),
            r.s_nn_t.to_string(),
            r.s_nn_t_stderr.to_string(),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

/// Everything `fit` needs besides the data and configuration.
pub struct FitOptions<'a> {
    /// Held-out samples from the data law for the per-epoch probe.
    pub probe: &'a Points,
    /// Where periodic and divergence checkpoints go.
    pub checkpoint_dir: Option<PathBuf>,
    /// Called after every epoch with the record and the current network.
    pub on_epoch: Option<&'a mut dyn FnMut(&EpochRecord, &Network<f64>) -> Result<()>>,
}

/// Shuffled-minibatch Adam on the configured objective. Deterministic given
/// `cfg.seed`: initialization, training draws and probe noise each use
/// their own substream.
pub fn fit(data: &Points, spec: &DiffusionSpec, cfg: &TrainConfig, opts: FitOptions<'_>) -> Result<FitResult> {
    cfg.validate()?;
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::Config("no training data".into()));
    }
    if let Some(row) = data.rows().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteInput { row });
    }
    if opts.probe.dim != data.dim || opts.probe.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: data.dim,
            got: opts.probe.dim,
        });
    }
    match cfg.precision {
        Precision::F32 => fit_impl::<f32>(data, spec, cfg, opts),
        Precision::F64 => fit_impl::<f64>(data, spec, cfg, opts),
    }
}

struct Probe {
    grid: Vec<f64>,
    y: Points,
    eps: Vec<f64>,
}

impl Probe {
    fn new(probe: &Points, spec: &DiffusionSpec, cfg: &TrainConfig) -> Self {
        let m = cfg.probe_samples.min(probe.len()).max(1);
        let y = Points::new(probe.dim, probe.data[..m * probe.dim].to_vec());
        let mut eps = vec![0.0; y.data.len()];
        fill_standard_normal(&mut substream(cfg.seed, 2), &mut eps);
        Self {
            grid: uniform_grid(spec.s_lo, spec.s_hi(), cfg.probe_points),
            y,
            eps,
        }
    }

    fn measure<T: Real>(&self, net: &Network<T>, spec: &DiffusionSpec) -> Result<(f64, f64)> {
        let c = entropy_curve_on(CurveKind::Neural, net, spec, &self.grid, &self.y, &self.eps)?;
        let t = c.total();
        Ok((t.value, t.std_err))
    }
}

fn fit_impl<T: Real>(data: &Points, spec: &DiffusionSpec, cfg: &TrainConfig, mut opts: FitOptions<'_>) -> Result<FitResult> {
    let mut net = Network::<T>::new(data.dim, &cfg.net, spec.horizon, &mut substream(cfg.seed, 0));
    let mut adam = Adam::<T>::new(
        net.n_params(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut rng = substream(cfg.seed, 1);
    let probe = Probe::new(opts.probe, spec, cfg);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut batch = Points::zeros(data.dim, 0);
    let save = |net: &Network<T>, adam: &Adam<T>, rng: &SimRng, epoch: usize, name: &str| -> Result<()> {
        if let Some(dir) = &opts.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            Checkpoint::capture(net, Some(adam), Some(rng), epoch).save(&dir.join(name))?;
        }
        Ok(())
    };
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            batch.data.clear();
            for &i in chunk {
                batch.data.extend_from_slice(data.row(i));
            }
            let (loss, grads) = batch_loss(&net, &batch, spec, cfg, &mut rng).map_err(|e| match e {
                Error::NonFiniteTraining { datum, s } => Error::NonFiniteTraining { datum: chunk[datum], s },
                e => e,
            })?;
            if loss > cfg.divergence_threshold {
                save(&net, &adam, &rng, epoch, "diverged.json")?;
                return Err(Error::Diverged { epoch, loss });
            }
            adam.step(&mut net.params, &grads);
            losses.push(loss * chunk.len() as f64);
        }
        let loss = losses.iter().sum::<f64>() / data.len() as f64;
        let (s_nn_t, s_nn_t_stderr) = probe.measure(&net, spec)?;
        let rec = EpochRecord {
            epoch,
            loss,
            s_nn_t,
            s_nn_t_stderr,
        };
        if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
            save(&net, &adam, &rng, epoch, &format!("epoch_{epoch:04}.json"))?;
        }
        if let Some(cb) = opts.on_epoch.as_mut() {
            cb(&rec, &net.cast::<f64>())?;
        }
        log.push(rec);
    }
    save(&net, &adam, &rng, cfg.epochs, "final.json")?;
    Ok(FitResult {
        network: net.cast::<f64>(),
        log,
    })
}

/// Untrained network output for a zero-step run.
pub fn initial_network(dim: usize, spec: &DiffusionSpec, cfg: &TrainConfig) -> Network<f64> {
    Network::new(dim, &cfg.net, spec.horizon, &mut substream(cfg.seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussmix::GaussianMixture;
    use crate::mc::{seeded, MCEstimate};
    use crate::thermo::{entropy_curve, spec_grid};

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 32,
            precision: Precision::F64,
            net: NetConfig {
                fourier_features: 8,
                fourier_scale: 1.0,
                hidden: vec![16, 16],
                ..NetConfig::default()
            },
            probe_points: 10,
            probe_samples: 20,
            ..TrainConfig::default()
        }
    }

    fn noised(spec: &DiffusionSpec, y: &[f64], s: f64, e: &[f64]) -> NoisedSample {
        spec.perturb(y, s, e).unwrap()
    }

    #[test]
    fn residual_examples() {
        let spec = DiffusionSpec::vp();
        let n = noised(&spec, &[0.5, -1.0], 0.4, &[0.3, 1.2]);
        let mut qid = vec![0.0; 2];
        spec.qid_score_into(&n.y_s, &mut qid);
        let opt: Vec<f64> = n.kernel_score.iter().zip(&qid).map(|(k, q)| k - q).collect();
        assert!(em_residual(&n, &opt, &spec).iter().all(|r| r.abs() < 1e-15));
        // ε_out = 0, VP: r = −y_s + ε/Σ.
        let sig = spec.kernel_at(0.4).sigma_big;
        let r = em_residual(&n, &[0.0, 0.0], &spec);
        for c in 0..2 {
            assert!((r[c] - (-n.y_s[c] + n.eps[c] / sig)).abs() < 1e-12);
        }
    }

    #[test]
    fn em_and_sm_residuals_coincide() {
        for spec in [DiffusionSpec::vp(), DiffusionSpec::vpx(0.1), DiffusionSpec::sl(0.1)] {
            let n = noised(&spec, &[1.0, 2.0, -0.5], 0.3, &[0.1, -0.7, 2.0]);
            let eps_out = [0.2, -3.0, 5.0];
            let mut s_out = vec![0.0; 3];
            spec.qid_score_into(&n.y_s, &mut s_out);
            s_out.iter_mut().zip(eps_out).for_each(|(a, e)| *a += e);
            let a = em_residual(&n, &eps_out, &spec);
            let b = sm_residual(&n, &s_out);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12 * x.abs().max(1.0), "{spec:?}");
            }
        }
    }

    #[test]
    fn lambda_ho_integrand_is_finite_near_zero() {
        let spec = DiffusionSpec::vp();
        let cfg = TrainConfig {
            weighting: Weighting::LambdaHo,
            ..small_cfg()
        };
        let net = initial_network(2, &spec, &cfg);
        let batch = Points::new(2, vec![0.3, -0.2]);
        let mut draws = draw(&batch, &spec, 1, &mut seeded(0)).unwrap();
        draws.s[0] = spec.s_lo;
        let kp = spec.kernel_at(spec.s_lo);
        let eps = [1.0, -2.0];
        for c in 0..2 {
            draws.y_s[c] = kp.mu * batch.data[c] + kp.sigma_big * eps[c];
            draws.kernel_score[c] = -eps[c] / kp.sigma_big;
        }
        let (loss, _) = loss_on_draws(&net, &draws, &spec, &cfg).unwrap();
        // Σ²‖qid − ks‖² ≈ ‖ε‖² at the lower cutoff.
        assert!((loss / spec.window() - 5.0).abs() < 0.01, "{loss}");
    }

    #[test]
    fn loss_is_permutation_invariant() {
        let spec = DiffusionSpec::vpx(0.5);
        let cfg = small_cfg();
        let mut net = initial_network(3, &spec, &cfg);
        net.randomize(0.3, &mut seeded(1));
        let batch = GaussianMixture::centered(3, 2.0).unwrap().sample(16, &mut seeded(2));
        let draws = draw(&batch, &spec, 4, &mut seeded(3)).unwrap();
        let (a, _) = loss_on_draws(&net, &draws, &spec, &cfg).unwrap();
        let mut perm: Vec<usize> = (0..draws.rows()).collect();
        perm.shuffle(&mut seeded(4));
        let mut p = draws.clone();
        for (new, &old) in perm.iter().enumerate() {
            p.s[new] = draws.s[old];
            p.y_s[new * 3..new * 3 + 3].copy_from_slice(&draws.y_s[old * 3..old * 3 + 3]);
            p.kernel_score[new * 3..new * 3 + 3].copy_from_slice(&draws.kernel_score[old * 3..old * 3 + 3]);
        }
        let (b, _) = loss_on_draws(&net, &p, &spec, &cfg).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn stationary_data_gives_zero_mean_gradient() {
        let spec = DiffusionSpec::vp();
        let cfg = small_cfg();
        let net = initial_network(1, &spec, &cfg);
        let p = GaussianMixture::centered(1, 1.0).unwrap();
        let mut rng = seeded(5);
        let reps = 400;
        let grads: Vec<Vec<f64>> = (0..reps)
            .map(|_| batch_loss(&net, &p.sample(32, &mut rng), &spec, &cfg, &mut rng).unwrap().1)
            .collect();
        let np = grads[0].len();
        let (mut norm_sq, mut var_sum) = (0.0, 0.0);
        for j in 0..np {
            let col: Vec<f64> = grads.iter().map(|g| g[j]).collect();
            let e = MCEstimate::from_samples(&col);
            norm_sq += e.value * e.value;
            var_sum += e.std_err * e.std_err;
        }
        assert!(norm_sq.sqrt() < 3.0 * var_sum.sqrt(), "{} {}", norm_sq.sqrt(), var_sum.sqrt());
    }

    #[test]
    fn loss_variance_halves_when_k_doubles() {
        let spec = DiffusionSpec::vp();
        let cfg = small_cfg();
        let net = initial_network(1, &spec, &cfg);
        let batch = GaussianMixture::centered(1, 1.0).unwrap().sample(16, &mut seeded(6));
        let var_for = |k: usize| {
            let c = TrainConfig {
                time_samples_per_datum: k,
                ..cfg.clone()
            };
            let xs: Vec<f64> = (0..1000)
                .map(|seed| batch_loss(&net, &batch, &spec, &c, &mut seeded(1000 + seed)).unwrap().0)
                .collect();
            let e = MCEstimate::from_samples(&xs);
            e.std_err * e.std_err * xs.len() as f64
        };
        let ratio = var_for(10) / var_for(20);
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn lambda_one_zero_net_loss_bounds_total_entropy() {
        let spec = DiffusionSpec::vp().with_constant_beta(2.0);
        let cfg = TrainConfig {
            weighting: Weighting::Lambda1,
            ..small_cfg()
        };
        let p = GaussianMixture::gaussian(vec![2.0], 1.0).unwrap();
        let net = initial_network(1, &spec, &cfg);
        let mut rng = seeded(7);
        let losses: Vec<f64> = (0..200)
            .map(|_| batch_loss(&net, &p.sample(64, &mut rng), &spec, &cfg, &mut rng).unwrap().0)
            .collect();
        let loss = MCEstimate::from_samples(&losses);
        let curve = entropy_curve(CurveKind::IdealTot, &p, &spec, None, &spec_grid(&spec, 200), 200, &mut rng).unwrap();
        let stot = curve.total();
        assert!(loss.value >= stot.value - 3.0 * loss.std_err.hypot(stot.std_err));
    }

    #[test]
    fn fit_is_deterministic_and_starts_from_zero_entropy() {
        let spec = DiffusionSpec::vp();
        let cfg = small_cfg();
        let p = GaussianMixture::gaussian(vec![1.5, -1.0], 0.5).unwrap();
        let data = p.sample(128, &mut seeded(8));
        let probe = p.sample(20, &mut seeded(9));
        let net0 = initial_network(2, &spec, &cfg);
        let (s0, _) = Probe::new(&probe, &spec, &cfg).measure(&net0, &spec).unwrap();
        assert_eq!(s0, 0.0);
        let run = || {
            fit(
                &data,
                &spec,
                &cfg,
                FitOptions {
                    probe: &probe,
                    checkpoint_dir: None,
                    on_epoch: None,
                },
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.log, b.log);
        assert_eq!(a.network.params, b.network.params);
        assert!(a.log.last().unwrap().s_nn_t > 0.0);
    }

    #[test]
    fn divergence_aborts_with_checkpoint() {
        let spec = DiffusionSpec::vp();
        let cfg = TrainConfig {
            divergence_threshold: 1e-9,
            ..small_cfg()
        };
        let p = GaussianMixture::gaussian(vec![3.0], 1.0).unwrap();
        let data = p.sample(64, &mut seeded(10));
        let dir = tempfile::tempdir().unwrap();
        let err = fit(
            &data,
            &spec,
            &cfg,
            FitOptions {
                probe: &data,
                checkpoint_dir: Some(dir.path().to_path_buf()),
                on_epoch: None,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1, .. }));
        assert!(dir.path().join("diverged.json").exists());
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let spec = DiffusionSpec::vp();
        let data = Points::new(1, vec![0.0, f64::NAN]);
        let err = fit(
            &data,
            &spec,
            &small_cfg(),
            FitOptions {
                probe: &data,
                checkpoint_dir: None,
                on_epoch: None,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteInput { row: 1 }));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for c in [
            TrainConfig {
                epochs: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                time_samples_per_datum: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(c.validate().is_err());
        }
        let c: TrainConfig = serde_json::from_str(r#"{"weighting":"Lambda1","precision":"f64"}"#).unwrap();
        assert_eq!(c.weighting, Weighting::Lambda1);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"bogus":1}"#).is_err());
    }
}
