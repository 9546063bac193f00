//! `S_tot ≥ KL(p_d ‖ P_b)`, where `P_b` is the law reached by running the
//! reverse dynamics with `ε ≡ 0` (drift `b₊` only, no learned correction)
//! from `P₀`. `P_b` is estimated by a Gaussian KDE of the generated samples.

use entroflux::generate::reverse_sde_from;
use entroflux::mc::seeded;
use entroflux::model::ZeroEps;
use entroflux::thermo::stot_via_kl_identity;
use entroflux::{DiffusionSpec, GaussianMixture};

fn kde_log_density(samples: &[f64], h: f64, x: f64) -> f64 {
    let norm = -(samples.len() as f64).ln() - 0.5 * (2.0 * std::f64::consts::PI * h * h).ln();
    let terms: Vec<f64> = samples.iter().map(|s| -0.5 * ((x - s) / h).powi(2)).collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    norm + m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[test]
fn total_entropy_bounds_the_zero_model_divergence() {
    let spec = DiffusionSpec::vp().with_constant_beta(2.0).with_horizon(0.3);
    let p_d = GaussianMixture::gaussian(vec![2.0], 1.0).unwrap();
    let stot = stot_via_kl_identity(&p_d, &spec, 100_000, &mut seeded(1)).unwrap();

    let p0 = p_d.pushforward(spec.s_hi(), &spec).unwrap();
    let x0 = p0.sample(4000, &mut seeded(2));
    let gen = reverse_sde_from(&ZeroEps { dim: 1 }, &spec, 300, x0, &mut seeded(3)).unwrap();
    let n = gen.data.len() as f64;
    let mean = gen.data.iter().sum::<f64>() / n;
    let sd = (gen.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let h = 1.06 * sd * n.powf(-0.2);

    let xs = p_d.sample(4000, &mut seeded(4));
    let kl = xs.data.iter().map(|&x| p_d.log_density(&[x]) - kde_log_density(&gen.data, h, x)).sum::<f64>()
        / xs.data.len() as f64;
    assert!(kl > 0.0, "{kl}");
    assert!(stot.value - 3.0 * stot.std_err > kl, "S_tot {stot:?} vs KL {kl}");
}
