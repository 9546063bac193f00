//! Experiment pipelines behind the `entroflux` subcommands. Each pipeline
//! reads a [`RunConfig`], writes CSV/JSON artifacts into an output directory
//! and finishes with a `manifest.json` describing the run.

use rayon::prelude::*;
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{LatticeConfig, RunConfig};
use crate::density::{kl_and_cross_entropy, BoundConfig, DensityReport};
use crate::error::{Error, Result};
use crate::gaussmix::{gaussian_kl, GaussianMixture};
use crate::generate::{pf_ode_sample, reverse_sde_sample, write_samples_csv};
use crate::lattice::{
    covering, discretized_gaussian, endpoint_kl_and_shannon, jump_probs_from_drift, site_coordinates,
    stationary_distribution, stot_streaming, LatticeState, LatticeTrajectory, MAX_ENDPOINT_SITES, MAX_ENDPOINT_STEPS,
};
use crate::mc::{substream, MCEstimate, Points};
use crate::model::{EpsModel, ExactEps, ZeroEps};
use crate::net::{Checkpoint, Network};
use crate::process::{DiffusionSpec, ProcessKind};
use crate::thermo::{entropy_curve, spec_grid, stot_via_kl_identity, CurveKind, EntropyCurve};
use crate::train::{fit, write_log_csv, EpochRecord, FitOptions, TrainConfig};

/// `git describe` of the build, captured by the build script.
pub const GIT_DESCRIBE: &str = env!("ENTROFLUX_GIT_DESCRIBE");

/// Output directory bookkeeping and the run manifest.
pub struct RunDir {
    dir: PathBuf,
    command: String,
    started: Instant,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    git_describe: &'a str,
    seed: u64,
    threads: usize,
    wallclock_seconds: f64,
    outputs: &'a [String],
    config: &'a RunConfig,
}

impl RunDir {
    pub fn create(dir: &Path, command: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Opens `name` for writing and records it as an output.
    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.outputs.push(name.into());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.outputs.push(name.into());
        std::fs::write(self.dir.join(name), text + "\n")?;
        Ok(())
    }

    pub fn finish(self, cfg: &RunConfig) -> Result<PathBuf> {
        let m = Manifest {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            git_describe: GIT_DESCRIBE,
            seed: cfg.seed,
            threads: rayon::current_num_threads(),
            wallclock_seconds: self.started.elapsed().as_secs_f64(),
            outputs: &self.outputs,
            config: cfg,
        };
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(path)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

// ---------------------------------------------------------------- lattice

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeLevel {
    pub ell: f64,
    pub dt: f64,
    pub sites: usize,
    pub steps: usize,
    pub stot: f64,
    pub continuum: f64,
    pub abs_err: f64,
    /// Endpoint KL and related measures when within the endpoint budget.
    pub kl_endpoint: Option<f64>,
    pub bits_per_walker: Option<f64>,
    pub log_sum_holds: Option<bool>,
    /// Total entropy of a run started from the lattice equilibrium.
    pub stationary_stot: f64,
    /// `(step, s, cumulative S_tot, running endpoint KL)`
    pub series: Vec<(usize, f64, f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSummary {
    pub levels: Vec<LatticeLevel>,
    /// `log₂(err_first / err_last) / (levels − 1)`
    pub observed_order: f64,
}

/// Closed-form total entropy of the matched continuum process started from
/// `N(mean, var)`: `KL(start ‖ p_eq) − KL(end ‖ p_eq)`.
pub fn continuum_stot(spec: &DiffusionSpec, mean: f64, var: f64) -> f64 {
    let k = spec.kernel_at(spec.horizon);
    let q2 = spec.qid_std().powi(2);
    let end_var = k.mu * k.mu * var + k.sigma_big * k.sigma_big;
    gaussian_kl(&[mean], var, &[0.0], q2) - gaussian_kl(&[k.mu * mean], end_var, &[0.0], q2)
}

fn lattice_level(cfg: &LatticeConfig, ell: f64) -> Result<LatticeLevel> {
    let spec = cfg.process;
    if spec.kind == ProcessKind::SL || !spec.is_constant_beta() {
        return Err(Error::Config("the lattice needs a constant-σ process (VP/VPx with constant β)".into()));
    }
    let sig2 = spec.sigma_sq(0.0);
    let f = spec.drift_rate(0.0);
    let dt = ell * ell / sig2;
    let w = cfg.start_var.sqrt().max(spec.qid_std());
    let (lo, hi) = (cfg.start_mean.min(0.0) - 8.0 * w, cfg.start_mean.max(0.0) + 8.0 * w);
    let (x_min, n) = covering(lo, hi, ell);
    let xs = site_coordinates(x_min, ell, n);
    let q = jump_probs_from_drift(|x, _| f * x, ell, dt, &xs, 0.0).map_err(|e| Error::Config(e.to_string()))?;
    let p0 = discretized_gaussian(x_min, ell, n, cfg.start_mean, cfg.start_var);
    let state = LatticeState::new(ell, dt, x_min, p0, q.clone(), cfg.walkers)?;
    let steps = (spec.horizon / dt).round() as usize;
    let p_eq = stationary_distribution(&q)?;
    let (stationary_stot, _) = stot_streaming(&LatticeState::new(ell, dt, x_min, p_eq.clone(), q, cfg.walkers)?, steps, |_, _| {})?;
    let continuum = continuum_stot(&spec, cfg.start_mean, cfg.start_var);

    let mut series = vec![(0, 0.0, 0.0, None)];
    let in_budget = n <= MAX_ENDPOINT_SITES && steps <= MAX_ENDPOINT_STEPS;
    let (stot, endpoint) = if in_budget {
        let traj = LatticeTrajectory::simulate(&state, steps);
        let mut total = 0.0;
        for k in 0..steps {
            total += crate::lattice::step_entropy(&traj.states[k], &traj.states[k + 1], &traj.spec.q_right, k)?;
            let step = k + 1;
            let running = if cfg.report_every > 0 && (step % cfg.report_every == 0 || step == steps) {
                let sub = LatticeTrajectory {
                    spec: traj.spec.clone(),
                    states: traj.states[..=step].to_vec(),
                };
                Some(endpoint_kl_and_shannon(&sub, &p_eq)?.kl_endpoint)
            } else {
                None
            };
            series.push((step, step as f64 * dt, total, running));
        }
        (total, Some(endpoint_kl_and_shannon(&traj, &p_eq)?))
    } else {
        let (total, _) = stot_streaming(&state, steps, |step, c| series.push((step, step as f64 * dt, c, None)))?;
        (total, None)
    };
    Ok(LatticeLevel {
        ell,
        dt,
        sites: n,
        steps,
        stot,
        continuum,
        abs_err: (stot - continuum).abs(),
        kl_endpoint: endpoint.map(|r| r.kl_endpoint),
        bits_per_walker: endpoint.map(|r| r.bits_per_walker),
        log_sum_holds: endpoint.map(|r| r.log_sum_holds()),
        stationary_stot,
        series,
    })
}

/// Discrete total entropy at every spacing in `cfg.ells` against the
/// continuum value. Levels run in parallel.
pub fn lattice_experiment(cfg: &LatticeConfig) -> Result<LatticeSummary> {
    let levels = cfg.ells.par_iter().map(|&ell| lattice_level(cfg, ell)).collect::<Result<Vec<_>>>()?;
    let observed_order = if levels.len() > 1 {
        (levels[0].abs_err / levels[levels.len() - 1].abs_err).log2() / (levels.len() - 1) as f64
    } else {
        f64::NAN
    };
    Ok(LatticeSummary { levels, observed_order })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run_lattice(cfg: &RunConfig, out: &Path) -> Result<LatticeSummary> {
    let mut run = RunDir::create(out, "lattice")?;
    let summary = lattice_experiment(&cfg.lattice)?;
    for (i, lv) in summary.levels.iter().enumerate() {
        let mut wr = csv::Writer::from_writer(run.file(&format!("lattice_level{i}.csv"))?);
        wr.write_record(["step", "s", "stot_cumulative", "kl_endpoint_running"]).map_err(csv_err)?;
        for (step, s, c, k) in &lv.series {
            wr.write_record([step.to_string(), s.to_string(), c.to_string(), opt(*k)]).map_err(csv_err)?;
        }
        wr.flush()?;
    }
    let mut wr = csv::Writer::from_writer(run.file("convergence.csv")?);
    wr.write_record([
        "ell",
        "sites",
        "steps",
        "stot",
        "continuum",
        "abs_err",
        "observed_order",
        "kl_endpoint",
        "bits_per_walker",
        "log_sum_holds",
        "stationary_stot",
    ])
    .map_err(csv_err)?;
    for (i, lv) in summary.levels.iter().enumerate() {
        let order = if i == 0 {
            String::new()
        } else {
            (summary.levels[i - 1].abs_err / lv.abs_err).log2().to_string()
        };
        wr.write_record([
            lv.ell.to_string(),
            lv.sites.to_string(),
            lv.steps.to_string(),
            lv.stot.to_string(),
            lv.continuum.to_string(),
            lv.abs_err.to_string(),
            order,
            opt(lv.kl_endpoint),
            opt(lv.bits_per_walker),
            lv.log_sum_holds.map(|b| b.to_string()).unwrap_or_default(),
            lv.stationary_stot.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    run.finish(cfg)?;
    Ok(summary)
}

// ---------------------------------------------------------------- models

/// Which `ε` model a subcommand evaluates.
#[derive(Debug, Clone)]
pub enum ModelChoice {
    Checkpoint(PathBuf),
    /// The exact optimum for the configured data law.
    Exact,
    Zero,
}

pub enum LoadedModel {
    Net(Network<f64>),
    Exact(ExactEps),
    Zero(ZeroEps),
}

impl LoadedModel {
    pub fn as_model(&self) -> &dyn EpsModel {
        match self {
            LoadedModel::Net(n) => n,
            LoadedModel::Exact(e) => e,
            LoadedModel::Zero(z) => z,
        }
    }
}

pub fn load_model(choice: &ModelChoice, p_d: &GaussianMixture, spec: &DiffusionSpec) -> Result<LoadedModel> {
    Ok(match choice {
        ModelChoice::Checkpoint(path) => {
            let net: Network<f64> = Checkpoint::load(path)?.network()?;
            if net.dim() != p_d.dim() {
                return Err(Error::DimensionMismatch {
                    expected: p_d.dim(),
                    got: net.dim(),
                });
            }
            LoadedModel::Net(net)
        }
        ModelChoice::Exact => LoadedModel::Exact(ExactEps::new(p_d.clone(), *spec)),
        ModelChoice::Zero => LoadedModel::Zero(ZeroEps { dim: p_d.dim() }),
    })
}

fn write_curve(run: &mut RunDir, name: &str, c: &EntropyCurve) -> Result<()> {
    c.write_csv(run.file(name)?)
}

// ---------------------------------------------------------------- transport

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlPoint {
    pub epoch: usize,
    pub kl: MCEstimate,
    pub cross_entropy: MCEstimate,
}

#[derive(Debug, Clone)]
pub struct TransportOutcome {
    pub log: Vec<EpochRecord>,
    pub kl_history: Vec<KlPoint>,
    pub ideal: EntropyCurve,
    pub neural: EntropyCurve,
    pub final_density: DensityReport,
    pub network: Network<f64>,
}

/// Trains on the configured mixture, tracks the KL upper-bound estimate every
/// `kl_every` epochs and evaluates final ideal and neural entropy curves.
/// Artifacts go to `out` when given.
pub fn transport(cfg: &RunConfig, out: Option<&Path>) -> Result<TransportOutcome> {
    let mut run = out.map(|d| RunDir::create(d, "transport")).transpose()?;
    let spec = cfg.process;
    let (p_d, train, probe) = cfg.draw_data()?;
    let tcfg = TrainConfig {
        seed: cfg.train.seed ^ cfg.seed,
        ..cfg.train.clone()
    };
    let mut kl_history = Vec::new();
    let mut kl_err = None;
    let mut on_epoch = |rec: &EpochRecord, net: &Network<f64>| -> Result<()> {
        if cfg.kl_every > 0 && rec.epoch % cfg.kl_every == 0 {
            let r = kl_and_cross_entropy(&p_d, net, &spec, &cfg.density, &mut substream(cfg.seed, 20 + rec.epoch as u64));
            match r {
                Ok(r) => kl_history.push(KlPoint {
                    epoch: rec.epoch,
                    kl: r.kl,
                    cross_entropy: r.cross_entropy,
                }),
                Err(e) => kl_err = Some(e),
            }
        }
        Ok(())
    };
    let fitted = fit(
        &train,
        &spec,
        &tcfg,
        FitOptions {
            probe: &probe,
            checkpoint_dir: run.as_ref().map(|r| r.path("checkpoints")),
            on_epoch: Some(&mut on_epoch),
        },
    )?;
    if let Some(e) = kl_err {
        return Err(e);
    }
    let grid = spec_grid(&spec, cfg.curve.grid_points);
    let ideal = entropy_curve(CurveKind::IdealTot, &p_d, &spec, None, &grid, cfg.curve.samples, &mut substream(cfg.seed, 12))?;
    let neural = entropy_curve(
        CurveKind::Neural,
        &p_d,
        &spec,
        Some(&fitted.network),
        &grid,
        cfg.curve.samples,
        &mut substream(cfg.seed, 13),
    )?;
    let final_density = kl_and_cross_entropy(&p_d, &fitted.network, &spec, &cfg.density, &mut substream(cfg.seed, 14))?;
    if let Some(run) = run.as_mut() {
        write_log_csv(&fitted.log, run.file("training_log.csv")?)?;
        write_curve(run, "ideal_curve.csv", &ideal)?;
        write_curve(run, "neural_curve.csv", &neural)?;
        let mut wr = csv::Writer::from_writer(run.file("kl_over_epochs.csv")?);
        wr.write_record(["epoch", "kl_upper_bound", "kl_stderr", "cross_entropy", "cross_entropy_stderr"])
            .map_err(csv_err)?;
        for k in &kl_history {
            wr.write_record([
                k.epoch.to_string(),
                k.kl.value.to_string(),
                k.kl.std_err.to_string(),
                k.cross_entropy.value.to_string(),
                k.cross_entropy.std_err.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wr.flush()?;
        final_density.write_csv(run.file("density.csv")?)?;
        run.json(
            "kl_summary.json",
            &serde_json::json!({
                "density": final_density.summary(),
                "ideal_stot": ideal.total(),
                "neural_stot": neural.total(),
                "epochs": tcfg.epochs,
            }),
        )?;
    }
    if let Some(run) = run {
        run.finish(cfg)?;
    }
    Ok(TransportOutcome {
        log: fitted.log,
        kl_history,
        ideal,
        neural,
        final_density,
        network: fitted.network,
    })
}

// ---------------------------------------------------------------- sweep-n

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub s_nn: MCEstimate,
    pub ideal: MCEstimate,
}

/// Final neural entropy as a function of training-set size. Each size uses
/// the first `n` points of one seeded draw.
pub fn sweep_n(cfg: &RunConfig, ns: &[usize], out: &Path) -> Result<Vec<SweepRow>> {
    let mut run = RunDir::create(out, "sweep-n")?;
    let spec = cfg.process;
    let max_n = ns.iter().copied().max().unwrap_or(0);
    let big = RunConfig {
        data: crate::config::DataConfig {
            n_train: max_n.max(1),
            ..cfg.data.clone()
        },
        ..cfg.clone()
    };
    let (p_d, pool, probe) = big.draw_data()?;
    let grid = spec_grid(&spec, cfg.curve.grid_points);
    let ideal = entropy_curve(CurveKind::IdealTot, &p_d, &spec, None, &grid, cfg.curve.samples, &mut substream(cfg.seed, 12))?.total();
    let tcfg = TrainConfig {
        seed: cfg.train.seed ^ cfg.seed,
        ..cfg.train.clone()
    };
    let mut rows = Vec::new();
    for &n in ns {
        let data = Points::new(pool.dim, pool.data[..n * pool.dim].to_vec());
        let fitted = fit(
            &data,
            &spec,
            &tcfg,
            FitOptions {
                probe: &probe,
                checkpoint_dir: None,
                on_epoch: None,
            },
        )?;
        let neural = entropy_curve(
            CurveKind::Neural,
            &p_d,
            &spec,
            Some(&fitted.network),
            &grid,
            cfg.curve.samples,
            &mut substream(cfg.seed, 13),
        )?;
        rows.push(SweepRow {
            n,
            s_nn: neural.total(),
            ideal,
        });
    }
    let mut wr = csv::Writer::from_writer(run.file("sweep_n.csv")?);
    wr.write_record(["n", "s_nn_t", "s_nn_t_stderr", "ideal_stot", "ideal_stot_stderr"]).map_err(csv_err)?;
    for r in &rows {
        wr.write_record([
            r.n.to_string(),
            r.s_nn.value.to_string(),
            r.s_nn.std_err.to_string(),
            r.ideal.value.to_string(),
            r.ideal.std_err.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    run.finish(cfg)?;
    Ok(rows)
}

// ---------------------------------------------------------------- curves, sampling, density

/// Ideal and score-matching curves (exact scores), the KL-identity total,
/// and a neural curve when a checkpoint is given.
pub fn run_entropy_curve(cfg: &RunConfig, checkpoint: Option<&Path>, out: &Path) -> Result<()> {
    let mut run = RunDir::create(out, "entropy-curve")?;
    let spec = cfg.process;
    let p_d = cfg.data.mixture()?;
    let grid = spec_grid(&spec, cfg.curve.grid_points);
    let n = cfg.curve.samples;
    let ideal = entropy_curve(CurveKind::IdealTot, &p_d, &spec, None, &grid, n, &mut substream(cfg.seed, 12))?;
    write_curve(&mut run, "ideal_curve.csv", &ideal)?;
    let sm = entropy_curve(CurveKind::ScoreMatch, &p_d, &spec, None, &grid, n, &mut substream(cfg.seed, 15))?;
    write_curve(&mut run, "score_matching_curve.csv", &sm)?;
    let mut summary = serde_json::json!({
        "ideal_stot": ideal.total(),
        "ideal_systematic": ideal.systematic_error(),
        "score_matching_stot": sm.total(),
        "kl_identity_stot": stot_via_kl_identity(&p_d, &spec, n * 100, &mut substream(cfg.seed, 16))?,
    });
    if let Some(path) = checkpoint {
        let m = load_model(&ModelChoice::Checkpoint(path.to_path_buf()), &p_d, &spec)?;
        let neural = entropy_curve(CurveKind::Neural, &p_d, &spec, Some(m.as_model()), &grid, n, &mut substream(cfg.seed, 13))?;
        write_curve(&mut run, "neural_curve.csv", &neural)?;
        summary["neural_stot"] = serde_json::to_value(neural.total())?;
    }
    run.json("curve_summary.json", &summary)?;
    run.finish(cfg)?;
    Ok(())
}

/// Draws `cfg.samples` points with the reverse SDE, or the PF-ODE when `ode`.
pub fn run_sample(cfg: &RunConfig, model: &ModelChoice, ode: bool, out: &Path) -> Result<Points> {
    let mut run = RunDir::create(out, "sample")?;
    let spec = cfg.process;
    let p_d = cfg.data.mixture()?;
    let m = load_model(model, &p_d, &spec)?;
    let mut rng = substream(cfg.seed, 30);
    let pts = if ode {
        pf_ode_sample(m.as_model(), &spec, &cfg.sampler, cfg.samples, &mut rng)?
    } else {
        reverse_sde_sample(m.as_model(), &spec, &cfg.sampler, cfg.samples, &mut rng)?
    };
    let header = serde_json::json!({
        "method": if ode { "pf_ode" } else { "reverse_sde" },
        "sampler": cfg.sampler,
        "process": spec,
        "seed": cfg.seed,
    });
    write_samples_csv(&pts, &header.to_string(), run.file("samples.csv")?)?;
    run.finish(cfg)?;
    Ok(pts)
}

pub fn run_density(cfg: &RunConfig, model: &ModelChoice, bound: Option<BoundConfig>, out: &Path) -> Result<DensityReport> {
    let mut run = RunDir::create(out, "density")?;
    let spec = cfg.process;
    let p_d = cfg.data.mixture()?;
    let m = load_model(model, &p_d, &spec)?;
    let bcfg = bound.unwrap_or(cfg.density);
    let rep = kl_and_cross_entropy(&p_d, m.as_model(), &spec, &bcfg, &mut substream(cfg.seed, 40))?;
    rep.write_csv(run.file("density.csv")?)?;
    run.json("density_summary.json", &rep.summary())?;
    run.finish(cfg)?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuum_stot_examples() {
        let spec = DiffusionSpec::vpx(0.5f64.sqrt()).with_constant_beta(2.0).with_horizon(50.0);
        // Long horizon: S_tot → KL(N(2, 0.25) ‖ N(0, 0.5)).
        let want = gaussian_kl(&[2.0], 0.25, &[0.0], 0.5);
        assert!((continuum_stot(&spec, 2.0, 0.25) - want).abs() < 1e-12);
        assert!(continuum_stot(&spec, 0.0, 0.5).abs() < 1e-15);
    }

    #[test]
    fn lattice_levels_and_stationary_runs() {
        let cfg = LatticeConfig {
            ells: vec![0.1, 0.05],
            ..LatticeConfig::default()
        };
        let s = lattice_experiment(&cfg).unwrap();
        assert_eq!(s.levels.len(), 2);
        for lv in &s.levels {
            assert!(lv.stationary_stot.abs() < 1e-10);
            assert_eq!(lv.log_sum_holds, Some(true));
            assert_eq!(lv.series.len(), lv.steps + 1);
        }
        assert!(s.levels[1].abs_err < s.levels[0].abs_err);
    }

    #[test]
    fn lattice_rejects_time_dependent_sigma() {
        let cfg = LatticeConfig {
            process: DiffusionSpec::vp(),
            ..LatticeConfig::default()
        };
        assert!(matches!(lattice_experiment(&cfg), Err(Error::Config(_))));
    }
}
