//! Parameters, covariance kernels and exact simulation of the mixed
//! fractional Brownian motion `σ B^H + √ε B`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Model parameter `(H, σ²)` restricted to `3/4 < H < 1`, `σ² > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    hurst: f64,
    sigma2: f64,
}

impl Theta {
    pub fn new(hurst: f64, sigma2: f64) -> Result<Self> {
        if !(hurst > 0.75 && hurst < 1.0) {
            return Err(Error::Domain(format!("hurst {hurst} outside (3/4, 1)")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!("sigma2 {sigma2} must be positive")));
        }
        Ok(Self { hurst, sigma2 })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Scaling exponent `1/(2H-1)` of the small-noise analysis.
    pub fn gamma_exponent(&self) -> f64 {
        1.0 / (2.0 * self.hurst - 1.0)
    }

    /// Shift by `(dh, ds)`, failing if the result leaves the parameter box.
    pub fn offset(&self, dh: f64, ds: f64) -> Result<Self> {
        Self::new(self.hurst + dh, self.sigma2 + ds)
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.hurst, self.sigma2]
    }
}

/// Intensity `ε > 0` of the additive Brownian noise.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Domain(format!("noise level {eps} must be positive")));
        }
        Ok(Self(eps))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// `a_H = Γ(2H+1) sin(πH)`, the constant of the fractional-noise spectrum.
pub fn a_constant(hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!("hurst {hurst} outside (0, 1)")));
    }
    Ok(gamma(2.0 * hurst + 1.0) * (PI * hurst).sin())
}

/// Covariance density `K_θ(τ) = σ² H(2H−1)|τ|^{2H−2}` of the fractional noise.
pub fn kernel_k(theta: &Theta, tau: f64) -> Result<f64> {
    if tau == 0.0 {
        return Err(Error::Singular("tau = 0"));
    }
    let h = theta.hurst;
    Ok(theta.sigma2 * h * (2.0 * h - 1.0) * tau.abs().powf(2.0 * h - 2.0))
}

/// Spectral density of the observed increments, `ε + σ² a_H |λ|^{1−2H}`.
pub fn spectral_density(theta: &Theta, eps: NoiseLevel, lambda: f64) -> Result<f64> {
    spectral_density_raw(theta, eps.value(), lambda)
}

/// As [`spectral_density`] but admits `eps = 0` (pure fractional noise).
pub fn spectral_density_raw(theta: &Theta, eps: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(Error::Singular("lambda = 0"));
    }
    let h = theta.hurst;
    Ok(eps + theta.sigma2 * a_constant(h)? * lambda.abs().powf(1.0 - 2.0 * h))
}

/// Covariance of standard fBm, `½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::Domain(format!("negative time ({s}, {t})")));
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!("hurst {hurst} outside (0, 1)")));
    }
    let p = 2.0 * hurst;
    Ok(0.5 * (t.powf(p) + s.powf(p) - (t - s).abs().powf(p)))
}

/// Autocovariance at `lag` of fBm increments over steps of length `dt`.
pub fn fgn_autocovariance(hurst: f64, dt: f64, lag: usize) -> f64 {
    let p = 2.0 * hurst;
    let k = lag as f64;
    let core = if lag == 0 {
        1.0
    } else {
        0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).powf(p))
    };
    core * dt.powf(p)
}

/// Derive the seed of replicate `r` from a master seed.
///
/// ChaCha streams make every replicate reproducible on its own, independent
/// of which worker evaluates it.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replicate);
    rng.next_u64()
}

/// How the fractional increments of a path were generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationMethod {
    Circulant,
    /// Circulant embedding had negative eigenvalues; dense Cholesky used.
    CholeskyFallback,
}

/// A gridded realisation of `σ B^H_t + √ε B_t`, `t = k·dt`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub dt: f64,
    pub values: Vec<f64>,
    pub theta: Theta,
    pub eps: NoiseLevel,
    pub seed: u64,
    pub method: SimulationMethod,
}

impl SamplePath {
    /// Build a path from observed values (generating metadata optional).
    pub fn from_values(
        dt: f64,
        values: Vec<f64>,
        theta: Theta,
        eps: NoiseLevel,
        seed: u64,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt {dt} must be positive")));
        }
        if values.len() < 3 {
            return Err(Error::Domain("a path needs at least two steps".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::Domain("a path must start at zero".into()));
        }
        Ok(Self {
            dt,
            values,
            theta,
            eps,
            seed,
            method: SimulationMethod::Circulant,
        })
    }

    /// Number of steps `n`.
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// Horizon `T = n·dt`.
    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Multiply every value by `c`, keeping the metadata.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }
}

enum FgnFactor {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky(DMatrix<f64>),
}

/// Exact generator of `n` unit-variance-scale fGn increments over step `dt`.
pub struct FgnGenerator {
    n: usize,
    factor: FgnFactor,
}

impl FgnGenerator {
    /// Circulant embedding; fails if the embedding spectrum is negative.
    pub fn circulant(hurst: f64, n: usize, dt: f64) -> Result<Self> {
        let half = n.next_power_of_two().max(2);
        let m = 2 * half;
        let mut c = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..=half {
            let g = fgn_autocovariance(hurst, dt, k);
            c[k] = Complex64::new(g, 0.0);
            if k > 0 && k < half {
                c[m - k] = Complex64::new(g, 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut c);
        let max = c.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let min = c.iter().map(|z| z.re).fold(f64::MAX, f64::min);
        if min < -1e-10 * max {
            return Err(Error::Embedding { min_eig: min });
        }
        let sqrt_eig = c
            .iter()
            .map(|z| (z.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Self {
            n,
            factor: FgnFactor::Circulant { sqrt_eig, fft },
        })
    }

    /// Dense Cholesky factor of the exact increment covariance.
    pub fn cholesky(hurst: f64, n: usize, dt: f64) -> Result<Self> {
        let cov = DMatrix::from_fn(n, n, |i, j| fgn_autocovariance(hurst, dt, i.abs_diff(j)));
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("fGn covariance".into()))?;
        Ok(Self {
            n,
            factor: FgnFactor::Cholesky(chol.l()),
        })
    }

    /// Circulant embedding with the Cholesky fallback.
    pub fn new(hurst: f64, n: usize, dt: f64) -> Result<(Self, SimulationMethod)> {
        match Self::circulant(hurst, n, dt) {
            Ok(g) => Ok((g, SimulationMethod::Circulant)),
            Err(Error::Embedding { .. }) => {
                Ok((Self::cholesky(hurst, n, dt)?, SimulationMethod::CholeskyFallback))
            }
            Err(e) => Err(e),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Draw one vector of fGn increments.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.factor {
            FgnFactor::Circulant { sqrt_eig, fft } => {
                let mut w: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * a, s * b)
                    })
                    .collect();
                fft.process(&mut w);
                w.iter().take(self.n).map(|z| z.re).collect()
            }
            FgnFactor::Cholesky(l) => {
                let z = nalgebra::DVector::from_fn(self.n, |_, _| rng.sample(StandardNormal));
                (l * z).iter().copied().collect()
            }
        }
    }
}

/// Reusable simulator for many replicates sharing `(θ, ε, n, dt)`.
pub struct MixedFbmSimulator {
    theta: Theta,
    eps: NoiseLevel,
    dt: f64,
    fgn: FgnGenerator,
    method: SimulationMethod,
}

impl MixedFbmSimulator {
    pub fn new(theta: Theta, eps: NoiseLevel, n: usize, dt: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("need n >= 2 steps, got {n}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("dt {dt} must be positive")));
        }
        let (fgn, method) = FgnGenerator::new(theta.hurst(), n, dt)?;
        Ok(Self {
            theta,
            eps,
            dt,
            fgn,
            method,
        })
    }

    pub fn method(&self) -> SimulationMethod {
        self.method
    }

    /// Increments of the fractional and Brownian components, drawn from `seed`.
    pub fn components(&self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frac = self.fgn.sample(&mut rng);
        let s = (self.eps.value() * self.dt).sqrt();
        let noise = (0..self.fgn.len())
            .map(|_| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (frac, noise)
    }

    pub fn path(&self, seed: u64) -> SamplePath {
        let (frac, noise) = self.components(seed);
        let sigma = self.theta.sigma2().sqrt();
        let mut values = Vec::with_capacity(frac.len() + 1);
        let mut x = 0.0;
        values.push(x);
        for (f, w) in frac.iter().zip(&noise) {
            x += sigma * f + w;
            values.push(x);
        }
        SamplePath {
            dt: self.dt,
            values,
            theta: self.theta,
            eps: self.eps,
            seed,
            method: self.method,
        }
    }
}

/// Simulate one path of the mixed fBm on `n` steps of size `dt`.
pub fn simulate_mixed_fbm(
    theta: Theta,
    eps: NoiseLevel,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<SamplePath> {
    Ok(MixedFbmSimulator::new(theta, eps, n, dt)?.path(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(h: f64, s: f64) -> Theta {
        Theta::new(h, s).unwrap()
    }

    #[test]
    fn a_constant_values() {
        assert!((a_constant(0.5).unwrap() - 1.0).abs() < 1e-14);
        // Γ(2.5) sin(3π/4) = (3√π/4)(√2/2)
        let oracle = 0.75 * PI.sqrt() * std::f64::consts::FRAC_1_SQRT_2;
        assert!((a_constant(0.75).unwrap() - oracle).abs() < 1e-13);
        assert!((oracle - 0.93999).abs() < 1e-5);
        let a9 = a_constant(0.9).unwrap();
        assert!(a9 > 0.0 && a9 < 2.0 * oracle);
        assert!(a_constant(1.0).is_err());
        assert!(a_constant(0.0).is_err());
    }

    #[test]
    fn kernel_values_and_singularity() {
        let t = th(0.75 + 1e-12, 1.0);
        assert!((kernel_k(&t, 1.0).unwrap() - 0.375).abs() < 1e-10);
        let t = th(0.8, 2.0);
        let oracle = 2.0 * 0.8 * 0.6 * 0.5f64.powf(-0.4);
        assert!((kernel_k(&t, 0.5).unwrap() - oracle).abs() < 1e-14);
        assert!((oracle - 1.267).abs() < 1e-3);
        assert_eq!(kernel_k(&t, -2.0).unwrap(), kernel_k(&t, 2.0).unwrap());
        assert_eq!(kernel_k(&t, 0.0), Err(Error::Singular("tau = 0")));
        assert!(kernel_k(&t, 0.3).unwrap() > kernel_k(&t, 0.4).unwrap());
    }

    #[test]
    fn spectral_density_properties() {
        let t = th(0.75 + 1e-12, 1.0);
        let v = spectral_density_raw(&t, 0.0, 1.0).unwrap();
        assert!((v - a_constant(0.75).unwrap()).abs() < 1e-9);
        let t = th(0.85, 1.3);
        let e = NoiseLevel::new(0.4).unwrap();
        for lam in [1e-3, 0.5, 3.0, 1e6] {
            assert!(spectral_density(&t, e, lam).unwrap() >= 0.4);
        }
        assert_eq!(
            spectral_density(&t, e, -3.0).unwrap(),
            spectral_density(&t, e, 3.0).unwrap()
        );
        assert!(spectral_density(&t, e, 0.0).is_err());
        assert!((spectral_density(&t, e, 1e12).unwrap() - 0.4) < 1e-6);
    }

    #[test]
    fn fbm_covariance_values() {
        assert!((fbm_covariance(0.8, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(0.5, 1.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
        let oracle = 0.5 * (2f64.powf(1.5) + 1.0 - 1.0);
        assert!((fbm_covariance(0.75, 1.0, 2.0).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(
            fbm_covariance(0.7, 0.3, 2.0).unwrap(),
            fbm_covariance(0.7, 2.0, 0.3).unwrap()
        );
        assert!(fbm_covariance(0.7, -1.0, 2.0).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(Theta::new(0.75, 1.0).is_err());
        assert!(Theta::new(1.0, 1.0).is_err());
        assert!(Theta::new(0.8, 0.0).is_err());
        assert!(NoiseLevel::new(0.0).is_err());
        assert!(simulate_mixed_fbm(th(0.8, 1.0), NoiseLevel::new(1.0).unwrap(), 1, 0.1, 0).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let e = NoiseLevel::new(0.3).unwrap();
        let a = simulate_mixed_fbm(th(0.85, 1.0), e, 100, 0.01, 42).unwrap();
        let b = simulate_mixed_fbm(th(0.85, 1.0), e, 100, 0.01, 42).unwrap();
        let c = simulate_mixed_fbm(th(0.85, 1.0), e, 100, 0.01, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a.values.len(), 101);
        assert_eq!(a.method, SimulationMethod::Circulant);
    }

    #[test]
    fn cholesky_generator_matches_covariance_shape() {
        let g = FgnGenerator::cholesky(0.8, 4, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(g.sample(&mut rng).len(), 4);
    }

    #[test]
    fn replicate_seeds_are_distinct_and_stable() {
        let s: Vec<u64> = (0..50).map(|r| replicate_seed(7, r)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 50);
        assert_eq!(s[13], replicate_seed(7, 13));
        assert_ne!(replicate_seed(8, 13), s[13]);
    }
}
