//! Property-based checks of identities that must hold for any parameters.

use proptest::prelude::*;

use entroflux::config::{preset, RunConfig, PRESETS};
use entroflux::gaussmix::{gaussian_kl, random_mixture};
use entroflux::lattice::{
    covering, discretized_gaussian, jump_probs_from_drift, site_coordinates, stationary_distribution, step_entropy,
    stot_discrete, LatticeState, LatticeTrajectory,
};
use entroflux::mc::seeded;
use entroflux::net::{Checkpoint, NetConfig, Network};
use entroflux::thermo::{entropy_curve, spec_grid, CurveKind};
use entroflux::{DiffusionSpec, GaussianMixture};

fn kl_discrete(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every step produces nonnegative entropy and the total equals the drop
    /// in KL to the lattice equilibrium.
    #[test]
    fn lattice_total_entropy_is_kl_drop(mean in -2.0f64..2.0, var in 0.05f64..1.5, rate in 0.3f64..1.5, steps in 1usize..300) {
        let ell = 0.1;
        let dt = ell * ell;
        let (x_min, n) = covering(-5.0, 5.0, ell);
        let xs = site_coordinates(x_min, ell, n);
        let q = jump_probs_from_drift(|x, _| -rate * x, ell, dt, &xs, 0.0).unwrap();
        let p_eq = stationary_distribution(&q).unwrap();
        let st = LatticeState::new(ell, dt, x_min, discretized_gaussian(x_min, ell, n, mean, var), q.clone(), 10).unwrap();
        let traj = LatticeTrajectory::simulate(&st, steps);
        for k in 0..steps {
            prop_assert!(step_entropy(&traj.states[k], &traj.states[k + 1], &q, k).unwrap() >= -1e-15);
        }
        let total = stot_discrete(&traj).unwrap();
        let drop = kl_discrete(&traj.states[0], &p_eq) - kl_discrete(traj.terminal(), &p_eq);
        prop_assert!((total - drop).abs() < 1e-9 * drop.abs().max(1.0), "{} vs {}", total, drop);
    }

    /// For a Gaussian start under constant-β VP the ideal total entropy is
    /// `KL(p_d ‖ p_eq) − KL(P₀ ‖ p_eq)` in closed form.
    #[test]
    fn gaussian_ideal_entropy_matches_closed_form(m in -3.0f64..3.0, v in 0.2f64..3.0, beta in 0.5f64..4.0) {
        let spec = DiffusionSpec::vp().with_constant_beta(beta).with_horizon(1.0);
        let p = GaussianMixture::gaussian(vec![m], v).unwrap();
        let c = entropy_curve(CurveKind::IdealTot, &p, &spec, None, &spec_grid(&spec, 400), 400, &mut seeded(7)).unwrap();
        let k = spec.kernel_at(spec.s_hi());
        let end_var = k.mu * k.mu * v + k.sigma_big * k.sigma_big;
        let want = gaussian_kl(&[m], v, &[0.0], 1.0) - gaussian_kl(&[k.mu * m], end_var, &[0.0], 1.0);
        let got = c.total();
        prop_assert!((got.value - want).abs() <= 4.0 * got.std_err + 2.0 * c.systematic_error() + 1e-6 * want.abs().max(1.0),
            "{:?} vs {} (sys {})", got, want, c.systematic_error());
    }

    /// Checkpoints restore the exact parameters.
    #[test]
    fn checkpoint_round_trip_is_exact(seed in any::<u64>(), dim in 1usize..5) {
        let cfg = NetConfig { fourier_features: 4, hidden: vec![8, 6], ..NetConfig::default() };
        let mut rng = seeded(seed);
        let mut net = Network::<f64>::new(dim, &cfg, 1.0, &mut rng);
        net.randomize(0.7, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        Checkpoint::capture(&net, None, None, 3).save(&path).unwrap();
        let back: Network<f64> = Checkpoint::load(&path).unwrap().network().unwrap();
        prop_assert_eq!(back.params, net.params);
    }

    /// Configs with explicit mixtures survive a JSON round trip.
    #[test]
    fn config_round_trip(seed in any::<u64>(), dim in 1usize..7, k in 1usize..6) {
        let g = random_mixture(dim, k, 4.0, 0.7, &mut seeded(seed)).unwrap();
        let mut c = RunConfig { seed, ..RunConfig::default() };
        c.data.source = entroflux::config::MixtureSource::Mixture(g);
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn every_preset_builds_a_valid_config() {
    for name in PRESETS {
        preset(name).unwrap().validate().unwrap();
    }
}
