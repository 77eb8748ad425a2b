use mfbm::likelihood::{
    exact_information, increment_autocovariance, loglik, loglik_increments, mle, rho_variance_exact,
    rho_variance_spectral, Backend,
};
use mfbm::model::replicate_seed;
use mfbm::toeplitz::{levinson_solve, toeplitz_matvec};
use mfbm::{simulate_mixed_fbm, NoiseLevel, Theta};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn th(h: f64, s: f64) -> Theta {
    Theta::new(h, s).unwrap()
}

fn ne(e: f64) -> NoiseLevel {
    NoiseLevel::new(e).unwrap()
}

fn dense(acov: &[f64]) -> DMatrix<f64> {
    let n = acov.len();
    DMatrix::from_fn(n, n, |i, j| acov[i.abs_diff(j)])
}

#[test]
fn exact_information_matches_dense_trace() {
    let (t, eps, dt, n) = (th(0.85, 1.2), ne(0.8), 0.25, 24);
    let info = exact_information(&t, eps, dt, n).unwrap();
    let sigma = dense(&increment_autocovariance(&t, eps.value(), dt, n));
    let inv = sigma.clone().try_inverse().unwrap();
    let dh = 1e-5;
    let up = dense(&increment_autocovariance(&t.offset(dh, 0.0).unwrap(), eps.value(), dt, n));
    let down = dense(&increment_autocovariance(&t.offset(-dh, 0.0).unwrap(), eps.value(), dt, n));
    let d_h = (up - down) / (2.0 * dh);
    let d_s = (sigma - DMatrix::identity(n, n) * eps.value() * dt) / t.sigma2();
    let a = &inv * d_h;
    let b = &inv * d_s;
    let oracle = [
        0.5 * (&a * &a).trace(),
        0.5 * (&a * &b).trace(),
        0.5 * (&b * &b).trace(),
    ];
    let got = [info.entries[0][0], info.entries[0][1], info.entries[1][1]];
    for (g, o) in got.iter().zip(&oracle) {
        assert!((g - o).abs() < 1e-6 * o.abs(), "{g} vs {o}");
    }
}

#[test]
fn exact_loglik_matches_dense_density() {
    let (t, eps, dt) = (th(0.8, 0.7), ne(1.5), 0.5);
    let path = simulate_mixed_fbm(t, eps, 20, dt, 11).unwrap();
    let x = path.increments();
    let sigma = dense(&increment_autocovariance(&t, eps.value(), dt, x.len()));
    let chol = sigma.clone().cholesky().unwrap();
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let xv = nalgebra::DVector::from_column_slice(&x);
    let quad = xv.dot(&chol.solve(&xv));
    let oracle = -0.5 * (x.len() as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
    let got = loglik_increments(&x, dt, &t, eps).unwrap().value;
    assert!((got - oracle).abs() < 1e-9 * oracle.abs());
}

#[test]
fn rho_variance_time_and_frequency_agree() {
    let (t, eps, dt) = (th(0.85, 1.0), ne(1.0), 0.125);
    let w: Vec<f64> = (0..40).map(|i| (-(i as f64) * 0.05).exp()).collect();
    let a = rho_variance_exact(&w, &t, eps, dt);
    let b = rho_variance_spectral(&w, &t, eps, dt).unwrap();
    assert!((a - b).abs() < 1e-6 * a, "{a} vs {b}");
}

#[test]
fn loglik_peaks_near_truth_on_average() {
    let (t, eps) = (th(0.85, 1.0), ne(1.0));
    let mut wins = 0;
    for i in 0..20 {
        let p = simulate_mixed_fbm(t, eps, 512, 0.125, replicate_seed(3, i)).unwrap();
        let at = loglik(&p, &t, Backend::DiscreteExact).unwrap().value;
        let far = loglik(&p, &th(0.97, 1.0), Backend::DiscreteExact).unwrap().value;
        wins += (at > far) as usize;
    }
    assert!(wins >= 15, "{wins} of 20");
}

#[test]
fn mle_recovers_parameters_on_long_path() {
    let (t, eps) = (th(0.85, 1.0), ne(1.0));
    let p = simulate_mixed_fbm(t, eps, 4096, 0.125, 17).unwrap();
    let m = mle(&p, &th(0.8, 2.0), Backend::DiscreteExact).unwrap();
    assert!(m.converged);
    assert!((m.theta_hat.hurst() - 0.85).abs() < 0.08, "{:?}", m.theta_hat);
    assert!(m.loglik >= loglik(&p, &t, Backend::DiscreteExact).unwrap().value - 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn levinson_inverts_toeplitz(h in 0.76f64..0.99, e in 0.05f64..3.0, n in 2usize..60, seed in any::<u64>()) {
        let acov = increment_autocovariance(&th(h, 1.0), e, 0.2, n);
        let x: Vec<f64> = (0..n as u64).map(|i| (replicate_seed(seed, i) >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect();
        let b = toeplitz_matvec(&acov, &x);
        let y = levinson_solve(&acov, &b).unwrap();
        for (a, c) in x.iter().zip(&y) {
            prop_assert!((a - c).abs() < 1e-8);
        }
    }
}

#[test]
fn backends_agree_better_on_finer_grids() {
    // Mean relative gap between the two backends' log-likelihood differences
    // for H 0.85 → 0.83 on the unit horizon.
    let (t0, t1, eps) = (th(0.85, 1.0), th(0.83, 1.0), ne(1.0));
    let gap = |n: usize| {
        let mut total = 0.0;
        for i in 0..20 {
            let p = simulate_mixed_fbm(t0, eps, n, 1.0 / n as f64, replicate_seed(31, i)).unwrap();
            let d = |b: Backend| loglik(&p, &t1, b).unwrap().value - loglik(&p, &t0, b).unwrap().value;
            let (a, e) = (d(Backend::Innovation), d(Backend::DiscreteExact));
            total += (a - e).abs() / e.abs();
        }
        total / 20.0
    };
    let (coarse, fine) = (gap(64), gap(4096));
    assert!(fine < coarse, "{coarse} vs {fine}");
}
