use mfbm::model::{replicate_seed, MixedFbmSimulator};
use mfbm::wavelet::{
    c_constant, energy_parts, estimate_single, max_level, select_level, Known, UnitWindow, Wavelet,
    WaveletEstimator,
};
use mfbm::{NoiseLevel, Theta};
use proptest::prelude::*;

fn th(h: f64, s: f64) -> Theta {
    Theta::new(h, s).unwrap()
}

#[test]
fn pure_noise_energy_is_unbiased_after_correction() {
    let w = Wavelet::daubechies4(12).unwrap();
    let n = 1 << 14;
    let sim = MixedFbmSimulator::new(th(0.85, 1.0), NoiseLevel::new(1.0).unwrap(), n, 1.0 / n as f64).unwrap();
    let zero = vec![0.0; n];
    for j in [4, 7] {
        let v: Vec<f64> = (0..300)
            .map(|i| {
                let (_, b) = sim.components(replicate_seed(8, i));
                let p = energy_parts(&w, &zero, &b, j).unwrap();
                p[2] - p[3]
            })
            .collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        assert!(m.abs() < 4.0 * sd / (v.len() as f64).sqrt(), "level {j}: {m} ± {sd}");
    }
}

#[test]
fn noiseless_hurst_is_accurate() {
    let est = WaveletEstimator::daubechies4().unwrap();
    let n = 1 << 16;
    let eps = (-20f64).exp2();
    let sim = MixedFbmSimulator::new(th(0.85, 1.0), NoiseLevel::new(eps).unwrap(), n, 1.0 / n as f64).unwrap();
    let mut hs = Vec::new();
    for i in 0..10 {
        let r = est.estimate_joint(&sim.path(replicate_seed(21, i))).unwrap();
        hs.push(r.h_hat);
    }
    let m = hs.iter().sum::<f64>() / hs.len() as f64;
    assert!((m - 0.85).abs() < 0.05, "{hs:?}");
}

#[test]
fn estimates_are_scale_equivariant() {
    let est = WaveletEstimator::daubechies4().unwrap();
    let (t, e) = (th(0.85, 1.0), 1e-3);
    let n = 1 << 14;
    let path = MixedFbmSimulator::new(t, NoiseLevel::new(e).unwrap(), n, 1.0 / n as f64).unwrap().path(4);
    let c = 3.0;
    let inc = path.increments();
    let scaled: Vec<f64> = inc.iter().map(|v| c * v).collect();
    let a = est.estimate_window(&UnitWindow::new(&inc, e, 1.0).unwrap()).unwrap();
    let b = est.estimate_window(&UnitWindow::new(&scaled, c * c * e, 1.0).unwrap()).unwrap();
    assert_eq!(a.selected_level, b.selected_level);
    assert!((a.h_hat - b.h_hat).abs() < 1e-10);
    assert!((b.sigma2_hat / (c * c * a.sigma2_hat) - 1.0).abs() < 1e-10);
}

#[test]
fn known_hurst_variance_estimate_is_close() {
    let est = WaveletEstimator::daubechies4().unwrap();
    let n = 1 << 16;
    let sim = MixedFbmSimulator::new(th(0.85, 2.0), NoiseLevel::new(1e-4).unwrap(), n, 1.0 / n as f64).unwrap();
    let v: Vec<f64> = (0..20)
        .map(|i| estimate_single(&est, &sim.path(replicate_seed(2, i)), Known::Hurst(0.85)).unwrap())
        .collect();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    assert!((m / 2.0 - 1.0).abs() < 0.2, "{m}");
}

#[test]
fn c_constant_is_monotone_on_grid() {
    let w = Wavelet::daubechies4(12).unwrap();
    let c: Vec<f64> = [0.78, 0.85, 0.92, 0.98].iter().map(|h| c_constant(&w, *h).unwrap()).collect();
    assert!(c.windows(2).all(|p| p[1] < p[0]), "{c:?}");
    assert!((c[1] - 0.238602).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn level_cap_falls_with_noise(e in 1e-8f64..0.5, f in 1.0f64..16.0) {
        prop_assert!(max_level(e * f) <= max_level(e));
    }

    #[test]
    fn selection_is_monotone_in_noise(h in 0.76f64..0.99, e in 1e-6f64..1e-2, f in 1.0f64..64.0) {
        // Noiseless energy profile 2^{j(2−2H)}: more noise never selects a finer level.
        let energies: Vec<(u32, f64)> = (3..20).map(|j| (j, (j as f64 * (2.0 - 2.0 * h)).exp2() * 0.1)).collect();
        let a = select_level(&energies, e, 3);
        let b = select_level(&energies, e * f, 3);
        prop_assert!(b.level <= a.level);
    }
}
