use mfbm::model::{fgn_autocovariance, kernel_k, replicate_seed, spectral_density, FgnGenerator, MixedFbmSimulator};
use mfbm::spectral::{alpha, fisher_information, grad_log_spectrum};
use mfbm::{NoiseLevel, QuadConfig, Theta};
use proptest::prelude::*;

fn th(h: f64, s: f64) -> Theta {
    Theta::new(h, s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fgn_sums_to_fbm_variance(h in 0.76f64..0.99, dt in 0.01f64..2.0, n in 1usize..200) {
        // Var(Σ increments) = (n dt)^{2H}.
        let mut total = n as f64 * fgn_autocovariance(h, dt, 0);
        for k in 1..n {
            total += 2.0 * (n - k) as f64 * fgn_autocovariance(h, dt, k);
        }
        let exact = (n as f64 * dt).powf(2.0 * h);
        prop_assert!((total - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn kernel_is_even(h in 0.76f64..0.99, s in 0.1f64..5.0, tau in 1e-3f64..50.0) {
        let t = th(h, s);
        prop_assert_eq!(kernel_k(&t, tau).unwrap(), kernel_k(&t, -tau).unwrap());
    }

    #[test]
    fn alpha_is_odd(h in 0.76f64..0.99, s in 0.1f64..5.0, e in 0.01f64..10.0, tau in 1e-3f64..1e3) {
        let (t, eps) = (th(h, s), NoiseLevel::new(e).unwrap());
        let a = alpha(&t, eps, tau).unwrap();
        let b = alpha(&t, eps, -tau).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn spectrum_is_even_and_positive(h in 0.76f64..0.99, s in 0.1f64..5.0, e in 0.01f64..10.0, lam in 1e-4f64..1e4) {
        let (t, eps) = (th(h, s), NoiseLevel::new(e).unwrap());
        let f = spectral_density(&t, eps, lam).unwrap();
        prop_assert!(f > e);
        prop_assert_eq!(f, spectral_density(&t, eps, -lam).unwrap());
    }

    #[test]
    fn sigma_gradient_bounded_by_reciprocal(h in 0.76f64..0.99, s in 0.1f64..5.0, e in 0.01f64..10.0, lam in 1e-4f64..1e4) {
        let g = grad_log_spectrum(&th(h, s), NoiseLevel::new(e).unwrap(), lam).unwrap();
        prop_assert!(g[1] > 0.0 && g[1] < 1.0 / s);
    }

    #[test]
    fn replicate_seeds_are_stable(master in any::<u64>(), r in 0u64..1000) {
        prop_assert_eq!(replicate_seed(master, r), replicate_seed(master, r));
        prop_assert_ne!(replicate_seed(master, r), replicate_seed(master, r + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    // Scaling (σ², ε) by c leaves I_HH fixed and divides I_Hσ by c, I_σσ by c².
    #[test]
    fn fisher_scale_covariance(h in 0.78f64..0.95, c in 0.25f64..4.0) {
        let q = QuadConfig::default();
        let a = fisher_information(&th(h, 1.0), NoiseLevel::new(1.0).unwrap(), &q).unwrap();
        let b = fisher_information(&th(h, c), NoiseLevel::new(c).unwrap(), &q).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
        prop_assert!(rel(b.entries[0][0], a.entries[0][0]) < 1e-7);
        prop_assert!(rel(b.entries[0][1] * c, a.entries[0][1]) < 1e-7);
        prop_assert!(rel(b.entries[1][1] * c * c, a.entries[1][1]) < 1e-7);
    }
}

#[test]
fn simulated_covariance_matches_model() {
    let (t, eps) = (th(0.85, 1.5), NoiseLevel::new(0.5).unwrap());
    let (n, dt) = (64, 0.125);
    let sim = MixedFbmSimulator::new(t, eps, n, dt).unwrap();
    let reps = 4000;
    let (a, b) = (24, 64);
    let mut prod = Vec::with_capacity(reps);
    for i in 0..reps {
        let p = sim.path(replicate_seed(99, i as u64));
        prod.push(p.values[a] * p.values[b]);
    }
    let m = prod.iter().sum::<f64>() / reps as f64;
    let sd = (prod.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let (s, u) = (a as f64 * dt, b as f64 * dt);
    let hh = 2.0 * t.hurst();
    let exact = 0.5 * t.sigma2() * (s.powf(hh) + u.powf(hh) - (u - s).powf(hh)) + eps.value() * s;
    assert!((m - exact).abs() < 4.0 * sd / (reps as f64).sqrt(), "{m} vs {exact}");
}

#[test]
fn circulant_and_cholesky_share_second_moments() {
    let (h, n, dt) = (0.9, 32, 0.25);
    let circ = FgnGenerator::circulant(h, n, dt).unwrap();
    let chol = FgnGenerator::cholesky(h, n, dt).unwrap();
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let reps = 6000;
    for g in [&circ, &chol] {
        let (mut v0, mut v5) = (0.0, 0.0);
        for _ in 0..reps {
            let x = g.sample(&mut rng);
            v0 += x[3] * x[3];
            v5 += x[3] * x[8];
        }
        v0 /= reps as f64;
        v5 /= reps as f64;
        let g0 = fgn_autocovariance(h, dt, 0);
        let g5 = fgn_autocovariance(h, dt, 5);
        assert!((v0 - g0).abs() < 4.0 * g0 * (2.0 / reps as f64).sqrt());
        assert!((v5 - g5).abs() < 4.0 * g0 / (reps as f64).sqrt() * 1.5);
    }
}
