//! One-dimensional lattice random walk: master-equation evolution, exact
//! reversal kernels, discrete total entropy and endpoint-kernel divergences.
//!
//! The lattice is finite with reflecting walls. A jump that would leave the
//! lattice is rejected and the walker stays put, so the edge sites carry a
//! "stay" probability in both the forward and the reversed kernel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ENDPOINT_SITES: usize = 512;
pub const MAX_ENDPOINT_STEPS: usize = 4096;

/// Relative rounding allowance when comparing `stot` and `kl_endpoint`. For
/// a time-homogeneous chain in detailed balance the two agree exactly in
/// real arithmetic, so only summation-order rounding separates them.
pub const LOG_SUM_RTOL: f64 = 1e-12;

/// Walker system at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub ell: f64,
    pub dt: f64,
    pub x_min: f64,
    pub p: Vec<f64>,
    pub q_right: Vec<f64>,
    pub walkers: usize,
}

impl LatticeState {
    pub fn new(ell: f64, dt: f64, x_min: f64, p: Vec<f64>, q_right: Vec<f64>, walkers: usize) -> Result<Self> {
        if !(ell > 0.0 && dt > 0.0) {
            return Err(Error::Lattice(format!("need ell, dt > 0, got {ell}, {dt}")));
        }
        if p.len() < 2 || p.len() != q_right.len() {
            return Err(Error::Lattice(format!(
                "occupancy has {} sites, jump probabilities {}",
                p.len(),
                q_right.len()
            )));
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Lattice("occupancy must be finite and nonnegative".into()));
        }
        let mass: f64 = p.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::Lattice(format!("occupancy sums to {mass}")));
        }
        check_probs(&q_right, x_min, ell)?;
        if walkers == 0 {
            return Err(Error::Lattice("walker count must be positive".into()));
        }
        Ok(Self {
            ell,
            dt,
            x_min,
            p,
            q_right,
            walkers,
        })
    }

    pub fn sites(&self) -> usize {
        self.p.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.ell
    }

    /// `σ² = ℓ²/Δs` of the matched continuum process.
    pub fn sigma_sq(&self) -> f64 {
        self.ell * self.ell / self.dt
    }

    pub fn step_forward(&self) -> Vec<f64> {
        step_occupancy(&self.p, &self.q_right)
    }
}

fn check_probs(q_right: &[f64], x_min: f64, ell: f64) -> Result<()> {
    for (i, q) in q_right.iter().enumerate() {
        if !(0.0..=1.0).contains(q) {
            return Err(Error::JumpProbability {
                site: i,
                x: x_min + i as f64 * ell,
                q: *q,
            });
        }
    }
    Ok(())
}

/// Site coordinates `x_min + iℓ`.
pub fn site_coordinates(x_min: f64, ell: f64, sites: usize) -> Vec<f64> {
    (0..sites).map(|i| x_min + i as f64 * ell).collect()
}

/// Lattice covering `[lo, hi]` with spacing `ell`: returns `(x_min, sites)`.
/// The grid is anchored so that `x = 0` is a site.
pub fn covering(lo: f64, hi: f64, ell: f64) -> (f64, usize) {
    let i0 = (lo / ell).floor();
    let i1 = (hi / ell).ceil();
    (i0 * ell, (i1 - i0) as usize + 1)
}

/// `q_R = ½ + (Δs/2ℓ) b₊(x, s)` at every site.
pub fn jump_probs_from_drift<F>(b_plus: F, ell: f64, dt: f64, xs: &[f64], s: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64,
{
    let q: Vec<f64> = xs.iter().map(|&x| 0.5 + dt / (2.0 * ell) * b_plus(x, s)).collect();
    for (i, v) in q.iter().enumerate() {
        if !(v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::JumpProbability {
                site: i,
                x: xs[i],
                q: *v,
            });
        }
    }
    Ok(q)
}

/// One master-equation step with reject-and-stay walls.
pub fn step_occupancy(p: &[f64], q_right: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let right = q_right[i] * p[i];
        let left = (1.0 - q_right[i]) * p[i];
        if i + 1 < n {
            out[i + 1] += right;
        } else {
            out[i] += right;
        }
        if i > 0 {
            out[i - 1] += left;
        } else {
            out[i] += left;
        }
    }
    out
}

/// Reversed one-step kernel at each site of the later state.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseProbs {
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub stay: Vec<f64>,
}

/// Playback probabilities: the fraction of `p_after(x)` that goes back to
/// each neighbour it came from. Empty sites get all-zero entries.
pub fn reverse_probs(p_before: &[f64], p_after: &[f64], q_right: &[f64]) -> Result<ReverseProbs> {
    let n = p_before.len();
    let mut r = ReverseProbs {
        right: vec![0.0; n],
        left: vec![0.0; n],
        stay: vec![0.0; n],
    };
    for x in 0..n {
        let from_left = if x > 0 { q_right[x - 1] * p_before[x - 1] } else { 0.0 };
        let from_right = if x + 1 < n {
            (1.0 - q_right[x + 1]) * p_before[x + 1]
        } else {
            0.0
        };
        let stayed = if x == 0 {
            (1.0 - q_right[0]) * p_before[0]
        } else if x + 1 == n {
            q_right[x] * p_before[x]
        } else {
            0.0
        };
        let pa = p_after[x];
        if pa <= 0.0 {
            let flux = from_left + from_right + stayed;
            if flux > 0.0 {
                return Err(Error::ReverseInconsistency { site: x, flux });
            }
            continue;
        }
        r.left[x] = from_left / pa;
        r.right[x] = from_right / pa;
        r.stay[x] = stayed / pa;
    }
    Ok(r)
}

/// Reverse master equation: moves `p_after` one step back in forward time.
pub fn reverse_step(p_after: &[f64], rev: &ReverseProbs) -> Vec<f64> {
    let n = p_after.len();
    let mut out = vec![0.0; n];
    for x in 0..n {
        let m = p_after[x];
        out[x] += rev.stay[x] * m;
        if x + 1 < n {
            out[x + 1] += rev.right[x] * m;
        }
        if x > 0 {
            out[x - 1] += rev.left[x] * m;
        }
    }
    out
}

fn kl_term(h: f64, g: f64, step: usize, site: usize) -> Result<f64> {
    if h <= 0.0 {
        Ok(0.0)
    } else if g <= 0.0 {
        Err(Error::LogOfZero { step, site })
    } else {
        Ok(h * (h / g).ln())
    }
}

/// Entropy produced by one forward step, `Σ_x p_after(x) KL(h*(·|x) ‖ g(·|x))`.
/// `step` is only used in error messages.
pub fn step_entropy(p_before: &[f64], p_after: &[f64], q_right: &[f64], step: usize) -> Result<f64> {
    let rev = reverse_probs(p_before, p_after, q_right)?;
    let n = p_after.len();
    let mut total = 0.0;
    for x in 0..n {
        if p_after[x] <= 0.0 {
            continue;
        }
        let (gr, gl) = (q_right[x], 1.0 - q_right[x]);
        let g_stay = if x == 0 {
            gl
        } else if x + 1 == n {
            gr
        } else {
            0.0
        };
        let g_right = if x + 1 < n { gr } else { 0.0 };
        let g_left = if x > 0 { gl } else { 0.0 };
        let t = kl_term(rev.right[x], g_right, step, x)?
            + kl_term(rev.left[x], g_left, step, x)?
            + kl_term(rev.stay[x], g_stay, step, x)?;
        total += p_after[x] * t;
    }
    Ok(total)
}

/// Recorded evolution `p(·, 0), p(·, Δs), …, p(·, T)` under fixed jump
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeTrajectory {
    pub spec: LatticeState,
    pub states: Vec<Vec<f64>>,
}

impl LatticeTrajectory {
    pub fn simulate(state: &LatticeState, steps: usize) -> Self {
        let mut states = Vec::with_capacity(steps + 1);
        states.push(state.p.clone());
        for k in 0..steps {
            let next = step_occupancy(&states[k], &state.q_right);
            states.push(next);
        }
        Self {
            spec: state.clone(),
            states,
        }
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// Discrete total entropy of a recorded trajectory.
pub fn stot_discrete(traj: &LatticeTrajectory) -> Result<f64> {
    let q = &traj.spec.q_right;
    let mut total = 0.0;
    for (k, w) in traj.states.windows(2).enumerate() {
        total += step_entropy(&w[0], &w[1], q, k)?;
    }
    Ok(total)
}

/// Same sum as [`stot_discrete`] without storing the states. `observe` is
/// called after every step with `(step, cumulative)`. Returns the total and
/// the terminal occupancy.
pub fn stot_streaming<F>(state: &LatticeState, steps: usize, mut observe: F) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(usize, f64),
{
    let mut p = state.p.clone();
    let mut total = 0.0;
    for k in 0..steps {
        let next = step_occupancy(&p, &state.q_right);
        total += step_entropy(&p, &next, &state.q_right, k)?;
        p = next;
        observe(k + 1, total);
    }
    Ok((total, p))
}

/// Equilibrium occupancy by detailed balance,
/// `p(x+ℓ)/p(x) = q_R(x)/q_L(x+ℓ)`.
pub fn stationary_distribution(q_right: &[f64]) -> Result<Vec<f64>> {
    let n = q_right.len();
    if n < 2 {
        return Err(Error::Lattice("need at least two sites".into()));
    }
    check_probs(q_right, 0.0, 1.0)?;
    let mut logp = vec![0.0; n];
    for i in 0..n - 1 {
        let (qr, ql) = (q_right[i], 1.0 - q_right[i + 1]);
        if qr <= 0.0 || ql <= 0.0 {
            return Err(Error::NonConfining(format!(
                "sites {i} and {} are not connected in both directions",
                i + 1
            )));
        }
        logp[i + 1] = logp[i] + (qr / ql).ln();
    }
    if logp[n - 1] > logp[n - 2] || logp[0] > logp[1] {
        return Err(Error::NonConfining(
            "equilibrium occupancy grows into a wall".into(),
        ));
    }
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    Ok(p)
}

/// Endpoint divergence and derived information measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    /// `KL(h* ‖ g)` between the endpoint kernels, weighted by the reverse
    /// starting occupancy.
    pub kl_endpoint: f64,
    pub bits_per_walker: f64,
    pub stot: f64,
    /// `log₂ 𝒫[P_d] ≈ -M · kl_endpoint / ln 2` for the state's walker count.
    pub log2_probability: f64,
    /// `KL(p(·,T) ‖ p_eq)`: how far the recorded terminal state is from the
    /// supplied equilibrium.
    pub terminal_kl_to_eq: f64,
}

impl EndpointReport {
    pub fn log_sum_holds(&self) -> bool {
        self.stot >= self.kl_endpoint - LOG_SUM_RTOL * self.stot.abs().max(1.0)
    }
}

/// Builds `h*(x_T|x_0)` and `g(x_T|x_0)` by exact propagation of one row per
/// starting site through every reversed step. Weights are the recorded
/// terminal occupancy, which makes `kl_endpoint ≤ stot` an exact consequence
/// of the log-sum inequality.
pub fn endpoint_kl_and_shannon(traj: &LatticeTrajectory, p_eq: &[f64]) -> Result<EndpointReport> {
    let n = traj.spec.sites();
    let steps = traj.steps();
    if n > MAX_ENDPOINT_SITES || steps > MAX_ENDPOINT_STEPS {
        return Err(Error::Budget {
            sites: n,
            steps,
            max_sites: MAX_ENDPOINT_SITES,
            max_steps: MAX_ENDPOINT_STEPS,
        });
    }
    if p_eq.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p_eq.len(),
        });
    }
    let q = &traj.spec.q_right;
    let stot = stot_discrete(traj)?;
    // Reverse time t = 0 is the last forward step.
    let revs = (0..steps)
        .rev()
        .map(|k| reverse_probs(&traj.states[k], &traj.states[k + 1], q))
        .collect::<Result<Vec<_>>>()?;
    let w = traj.terminal();

    let rows: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|x0| {
            if w[x0] <= 0.0 {
                return Ok(0.0);
            }
            let mut h = vec![0.0; n];
            let mut g = vec![0.0; n];
            h[x0] = 1.0;
            g[x0] = 1.0;
            for rev in &revs {
                h = reverse_step(&h, rev);
                g = step_occupancy(&g, q);
            }
            let mut acc = 0.0;
            for xt in 0..n {
                acc += kl_term(h[xt], g[xt], steps, xt)?;
            }
            Ok(w[x0] * acc)
        })
        .collect();
    let mut kl = 0.0;
    for r in rows {
        kl += r?;
    }
    let mut terminal_kl = 0.0;
    for (a, b) in w.iter().zip(p_eq) {
        terminal_kl += kl_term(*a, *b, steps, 0)?;
    }
    let ln2 = std::f64::consts::LN_2;
    let rep = EndpointReport {
        kl_endpoint: kl,
        bits_per_walker: kl / ln2,
        stot,
        log2_probability: -(traj.spec.walkers as f64) * kl / ln2,
        terminal_kl_to_eq: terminal_kl,
    };
    if !rep.log_sum_holds() {
        return Err(Error::Lattice(format!(
            "log-sum inequality violated: stot {stot} < kl_endpoint {kl}"
        )));
    }
    Ok(rep)
}

/// Gaussian `N(mean, var)` sampled on the sites and renormalised.
pub fn discretized_gaussian(x_min: f64, ell: f64, sites: usize, mean: f64, var: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..sites)
        .map(|i| {
            let x = x_min + i as f64 * ell;
            (-(x - mean) * (x - mean) / (2.0 * var)).exp()
        })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// L1 distance.
pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussmix::gaussian_kl;

    /// OU lattice `b₊ = -x`, `σ² = 1`, started at `N(2, 0.25)`.
    fn ou(ell: f64) -> LatticeState {
        let dt = ell * ell;
        let (x_min, n) = covering(2.0 - 8.0 * 0.5f64.sqrt(), 2.0 + 8.0 * 0.5f64.sqrt(), ell);
        let xs = site_coordinates(x_min, ell, n);
        let q = jump_probs_from_drift(|x, _| -x, ell, dt, &xs, 0.0).unwrap();
        let p = discretized_gaussian(x_min, ell, n, 2.0, 0.25);
        LatticeState::new(ell, dt, x_min, p, q, 1000).unwrap()
    }

    #[test]
    fn jump_probability_examples() {
        let q = jump_probs_from_drift(|_, _| 0.0, 0.1, 0.01, &[0.0, 1.0, 2.0], 0.0).unwrap();
        assert!(q.iter().all(|v| *v == 0.5));
        let q = jump_probs_from_drift(|_, _| 1.0, 0.1, 0.01, &[0.0], 0.0).unwrap();
        assert!((q[0] - 0.55).abs() < 1e-15);
        let s = ou(0.1);
        assert!((s.sigma_sq() - 1.0).abs() < 1e-12);
        let err = jump_probs_from_drift(|x, _| -x, 0.1, 0.01, &[0.0, 30.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::JumpProbability { site: 1, .. }));
    }

    #[test]
    fn unbiased_step_splits_a_delta() {
        let mut p = vec![0.0; 5];
        p[2] = 1.0;
        let out = step_occupancy(&p, &[0.5; 5]);
        assert_eq!(out, vec![0.0, 0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn mass_is_conserved() {
        let s = ou(0.1);
        let mut p = s.p.clone();
        for _ in 0..10_000 {
            p = step_occupancy(&p, &s.q_right);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_distribution_is_fixed() {
        let s = ou(0.05);
        let peq = stationary_distribution(&s.q_right).unwrap();
        assert!(l1(&step_occupancy(&peq, &s.q_right), &peq) < 1e-10);
        let uniform = stationary_distribution(&[0.5; 7]).unwrap();
        assert!(uniform.iter().all(|v| (v - 1.0 / 7.0).abs() < 1e-15));
        assert!(l1(&step_occupancy(&uniform, &[0.5; 7]), &uniform) < 1e-15);
    }

    #[test]
    fn stationary_distribution_approaches_continuum() {
        let mut prev = f64::INFINITY;
        for ell in [0.1, 0.05, 0.025] {
            let s = ou(ell);
            let peq = stationary_distribution(&s.q_right).unwrap();
            let target = discretized_gaussian(s.x_min, ell, s.sites(), 0.0, 0.5);
            let d = l1(&peq, &target);
            assert!(d < prev, "{d} !< {prev}");
            prev = d;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn non_confining_drift_is_rejected() {
        let q = vec![0.6; 10];
        assert!(matches!(
            stationary_distribution(&q),
            Err(Error::NonConfining(_))
        ));
    }

    #[test]
    fn detailed_balance_reverse_equals_forward() {
        let s = ou(0.1);
        let peq = stationary_distribution(&s.q_right).unwrap();
        let after = step_occupancy(&peq, &s.q_right);
        let rev = reverse_probs(&peq, &after, &s.q_right).unwrap();
        let n = s.sites();
        for x in 1..n - 1 {
            assert!((rev.right[x] - s.q_right[x]).abs() < 1e-9);
            assert!((rev.left[x] - (1.0 - s.q_right[x])).abs() < 1e-9);
        }
        assert!(step_entropy(&peq, &after, &s.q_right, 0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn reversal_is_exact_and_normalised() {
        let s = ou(0.1);
        let traj = LatticeTrajectory::simulate(&s, 300);
        let mut p = traj.terminal().to_vec();
        for k in (0..traj.steps()).rev() {
            let rev = reverse_probs(&traj.states[k], &traj.states[k + 1], &s.q_right).unwrap();
            for x in 0..s.sites() {
                if traj.states[k + 1][x] > 0.0 {
                    let t = rev.right[x] + rev.left[x] + rev.stay[x];
                    assert!((t - 1.0).abs() < 1e-12);
                }
            }
            p = reverse_step(&p, &rev);
            assert!(l1(&p, &traj.states[k]) < 1e-10, "step {k}");
        }
    }

    #[test]
    fn stationary_start_produces_no_entropy() {
        let s = ou(0.1);
        let peq = stationary_distribution(&s.q_right).unwrap();
        let st = LatticeState { p: peq.clone(), ..s };
        let traj = LatticeTrajectory::simulate(&st, 500);
        assert!(stot_discrete(&traj).unwrap().abs() < 1e-10);
        let rep = endpoint_kl_and_shannon(&traj, &peq).unwrap();
        assert!(rep.kl_endpoint.abs() < 1e-10 && rep.stot.abs() < 1e-10);
    }

    #[test]
    fn streaming_matches_recorded() {
        let s = ou(0.1);
        let traj = LatticeTrajectory::simulate(&s, 400);
        let (a, p) = stot_streaming(&s, 400, |_, _| {}).unwrap();
        assert_eq!(a, stot_discrete(&traj).unwrap());
        assert_eq!(p, traj.terminal());
    }

    #[test]
    fn log_sum_inequality_holds() {
        for (ell, t) in [(0.05, 0.5), (0.1, 0.5), (0.1, 3.0)] {
            let s = ou(ell);
            let steps = (t / s.dt).round() as usize;
            let traj = LatticeTrajectory::simulate(&s, steps);
            let peq = stationary_distribution(&s.q_right).unwrap();
            let rep = endpoint_kl_and_shannon(&traj, &peq).unwrap();
            assert!(rep.kl_endpoint >= 0.0);
            assert!(rep.log_sum_holds(), "{rep:?}");
            assert!((rep.bits_per_walker - rep.kl_endpoint / 2f64.ln()).abs() < 1e-15);
            assert!((rep.log2_probability + 1000.0 * rep.bits_per_walker).abs() < 1e-9);
        }
    }

    #[test]
    fn endpoint_budget_is_enforced() {
        let s = LatticeState::new(0.1, 0.01, 0.0, {
            let mut p = vec![0.0; 600];
            p[300] = 1.0;
            p
        }, vec![0.5; 600], 10)
        .unwrap();
        let traj = LatticeTrajectory::simulate(&s, 2);
        assert!(matches!(
            endpoint_kl_and_shannon(&traj, &s.p),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn entropy_saturates_after_equilibration() {
        let s = ou(0.1);
        let n = (6.0 / s.dt) as usize;
        let (a, _) = stot_streaming(&s, n, |_, _| {}).unwrap();
        let (b, _) = stot_streaming(&s, 2 * n, |_, _| {}).unwrap();
        assert!((b - a).abs() < 1e-3);
    }

    /// Discrete total entropy against the Gaussian KL identity of the matched
    /// continuum OU process.
    #[test]
    fn converges_to_continuum() {
        let t: f64 = 5.0;
        let m = 2.0 * (-t).exp();
        let v = 0.5 + (0.25 - 0.5) * (-2.0 * t).exp();
        let exact = gaussian_kl(&[2.0], 0.25, &[0.0], 0.5) - gaussian_kl(&[m], v, &[0.0], 0.5);
        let mut errs = Vec::new();
        for ell in [0.1, 0.05, 0.025, 0.0125] {
            let s = ou(ell);
            let steps = (t / s.dt).round() as usize;
            let (stot, _) = stot_streaming(&s, steps, |_, _| {}).unwrap();
            errs.push((stot - exact).abs());
        }
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
        let order = (errs[0] / errs[3]).log2() / 3.0;
        assert!(order >= 0.8, "{errs:?} order {order}");
    }
}
