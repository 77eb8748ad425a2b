//! Innovation process, the continuous-time and exact discrete
//! log-likelihoods, maximum likelihood, empirical information and the
//! Monte Carlo LAN experiment.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fredholm::{interpolate_midpoint, kernel_weights, solve_g, GFamily};
use crate::model::{
    a_constant, fgn_autocovariance, replicate_seed, MixedFbmSimulator, NoiseLevel, SamplePath,
    Theta,
};
use crate::quad::Adaptive;
use crate::spectral::{FisherMatrix, RateSchedule, Scaling};
use crate::toeplitz::{toeplitz_matvec, DurbinFactor};

/// Which likelihood functional is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Discretised Radon–Nikodym density built from `ρ_t`.
    Innovation,
    /// Exact Gaussian density of the sampled increments.
    DiscreteExact,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Innovation => "innovation",
            Backend::DiscreteExact => "discrete-exact",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "innovation" => Ok(Backend::Innovation),
            "discrete-exact" | "exact" => Ok(Backend::DiscreteExact),
            other => Err(Error::Domain(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikResult {
    pub value: f64,
    pub backend: Backend,
    /// Innovation: plug-back residual of the longest-horizon solve.
    /// Discrete: smallest prediction variance relative to the marginal one.
    pub diagnostic: f64,
}

/// `ρ_{t_k}` for `t_k = k·dt`, `k = 0..=n`, from a precomputed family.
///
/// Increment `m` covers `[m dt, (m+1) dt]`; its midpoint sits at lag
/// `(k − m − ½) dt` from `t_k`, which is collocation node `k − 1 − m`.
pub fn rho_on_grid(family: &GFamily, increments: &[f64]) -> Vec<f64> {
    let n = increments.len().min(family.len());
    let mut rho = Vec::with_capacity(n + 1);
    rho.push(0.0);
    for k in 1..=n {
        let g = family.values(k);
        let v: f64 = (0..k).map(|m| g[k - 1 - m] * increments[m]).sum();
        rho.push(v);
    }
    rho
}

/// `ρ_t(X, θ) = ∫₀ᵗ g(t, t − s; θ) dX_s` at the requested times.
pub fn innovation_rho(path: &SamplePath, theta: &Theta, grid_t: &[f64]) -> Result<Vec<f64>> {
    let dt = path.dt;
    let inc = path.increments();
    let horizon = path.horizon();
    let mut family: Option<GFamily> = None;
    let mut out = Vec::with_capacity(grid_t.len());
    for &t in grid_t {
        if !(0.0..=horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
        }
        let k = (t / dt).round() as usize;
        if t == 0.0 || k == 0 && t < 0.5 * dt {
            out.push(0.0);
            continue;
        }
        if ((t / dt) - k as f64).abs() < 1e-9 {
            let fam = match &family {
                Some(f) => f,
                None => family.insert(GFamily::new(theta, path.eps, dt, path.steps())?),
            };
            let g = fam.values(k);
            out.push((0..k).map(|m| g[k - 1 - m] * inc[m]).sum());
        } else {
            let steps = (t / dt).floor() as usize;
            let sol = solve_g(theta, path.eps, t, steps.max(16))?;
            let v = (0..steps)
                .map(|m| sol.interpolate(t - (m as f64 + 0.5) * dt) * inc[m])
                .sum();
            out.push(v);
        }
    }
    Ok(out)
}

/// `(1/ε)∫ρ dX − (1/2ε)∫ρ² dt` with forward sums and the trapezoid rule.
pub fn innovation_functional(rho: &[f64], increments: &[f64], dt: f64, eps: f64) -> f64 {
    let n = increments.len();
    let ito: f64 = (0..n).map(|k| rho[k] * increments[k]).sum();
    let sq: f64 = (0..n).map(|k| 0.5 * (rho[k] * rho[k] + rho[k + 1] * rho[k + 1])).sum::<f64>() * dt;
    (ito - 0.5 * sq) / eps
}

pub fn loglik_innovation(path: &SamplePath, theta: &Theta) -> Result<LogLikResult> {
    let family = GFamily::new(theta, path.eps, path.dt, path.steps())?;
    let inc = path.increments();
    let rho = rho_on_grid(&family, &inc);
    Ok(LogLikResult {
        value: innovation_functional(&rho, &inc, path.dt, path.eps.value()),
        backend: Backend::Innovation,
        diagnostic: family_residual(&family)?,
    })
}

fn family_residual(family: &GFamily) -> Result<f64> {
    let n = family.len();
    let mut col = kernel_weights(&family.theta, family.cell, n);
    col[0] += family.eps.value();
    let x = family.values(n);
    let ax = toeplitz_matvec(&col, x);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, a) in ax.iter().enumerate() {
        let b = crate::model::kernel_k(&family.theta, (i as f64 + 0.5) * family.cell)?;
        worst = worst.max((a - b).abs());
        scale = scale.max(b.abs());
    }
    Ok(worst / scale)
}

/// Autocovariance of the increments `σ²·fGn + ε·dt·δ`.
pub fn increment_autocovariance(theta: &Theta, eps: f64, dt: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let f = theta.sigma2() * fgn_autocovariance(theta.hurst(), dt, k);
            if k == 0 {
                f + eps * dt
            } else {
                f
            }
        })
        .collect()
}

/// Exact Gaussian likelihood of `n` increments, factorised once and reusable
/// across paths.
#[derive(Debug, Clone)]
pub struct ExactLikelihood {
    factor: DurbinFactor,
}

impl ExactLikelihood {
    pub fn new(theta: &Theta, eps: NoiseLevel, dt: f64, n: usize) -> Result<Self> {
        let acov = increment_autocovariance(theta, eps.value(), dt, n);
        Ok(Self {
            factor: DurbinFactor::new(&acov)?,
        })
    }

    pub fn evaluate(&self, increments: &[f64]) -> Result<LogLikResult> {
        let v = self.factor.variances();
        Ok(LogLikResult {
            value: self.factor.log_density(increments)?,
            backend: Backend::DiscreteExact,
            diagnostic: v.iter().fold(f64::INFINITY, |m, x| m.min(*x)) / v[0],
        })
    }
}

/// Fisher information of `n` sampled increments,
/// `½ tr(Σ⁻¹ ∂ᵢΣ Σ⁻¹ ∂ⱼΣ)`, for the coordinates `(H, σ²)`.
///
/// With `Σ⁻¹ = LᵀD⁻¹L` from the Durbin factor, each `∂ᵢΣ` is whitened to
/// `Wᵢ = D^{−1/2} L ∂ᵢΣ Lᵀ D^{−1/2}` and the trace becomes `Σ Wᵢ∘Wⱼ`. Cost is `O(n³)`.
pub fn exact_information(theta: &Theta, eps: NoiseLevel, dt: f64, n: usize) -> Result<FisherMatrix> {
    let factor = DurbinFactor::new(&increment_autocovariance(theta, eps.value(), dt, n))?;
    let dh = 1e-6;
    let up = increment_autocovariance(&theta.offset(dh, 0.0)?, eps.value(), dt, n);
    let down = increment_autocovariance(&theta.offset(-dh, 0.0)?, eps.value(), dt, n);
    let d_h: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * dh)).collect();
    let d_s: Vec<f64> = (0..n).map(|k| fgn_autocovariance(theta.hurst(), dt, k)).collect();
    let scale: Vec<f64> = factor.variances().iter().map(|v| v.sqrt().recip()).collect();
    let whiten = |col: &[f64]| -> Vec<Vec<f64>> {
        let left: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let c: Vec<f64> = (0..n).map(|i| col[i.abs_diff(j)]).collect();
                factor.innovations(&c)
            })
            .collect();
        // `left[j]` is column j of L·A; rows of L·A·Lᵀ are innovations of its rows.
        (0..n)
            .into_par_iter()
            .map(|i| {
                let row: Vec<f64> = (0..n).map(|j| left[j][i]).collect();
                factor
                    .innovations(&row)
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * scale[i] * scale[j])
                    .collect()
            })
            .collect()
    };
    let wh = whiten(&d_h);
    let ws = whiten(&d_s);
    let dot = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .sum::<f64>()
            * 0.5
    };
    FisherMatrix::new(
        [[dot(&wh, &wh), dot(&wh, &ws)], [dot(&wh, &ws), dot(&ws, &ws)]],
        0.0,
    )
}

/// Log-density of the increment vector under `(θ, ε)` on steps of `dt`.
pub fn loglik_increments(increments: &[f64], dt: f64, theta: &Theta, eps: NoiseLevel) -> Result<LogLikResult> {
    ExactLikelihood::new(theta, eps, dt, increments.len())?.evaluate(increments)
}

pub fn loglik_discrete_exact(path: &SamplePath, theta: &Theta) -> Result<LogLikResult> {
    loglik_increments(&path.increments(), path.dt, theta, path.eps)
}

pub fn loglik(path: &SamplePath, theta: &Theta, backend: Backend) -> Result<LogLikResult> {
    match backend {
        Backend::Innovation => loglik_innovation(path, theta),
        Backend::DiscreteExact => loglik_discrete_exact(path, theta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleResult {
    pub theta_hat: Theta,
    pub loglik: f64,
    pub n_evals: usize,
    pub converged: bool,
    /// `Ĥ` ended within `1e-4` of an edge of `(3/4, 1)`.
    pub boundary_hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    pub max_evals: usize,
    /// Simplex diameter in the unconstrained coordinates.
    pub tol: f64,
    pub initial_step: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            tol: 1e-6,
            initial_step: 0.3,
        }
    }
}

fn to_free(theta: &Theta) -> [f64; 2] {
    let u = (theta.hurst() - 0.75) / 0.25;
    [(u / (1.0 - u)).ln(), theta.sigma2().ln()]
}

fn from_free(x: &[f64; 2]) -> Result<Theta> {
    let u = 1.0 / (1.0 + (-x[0]).exp());
    Theta::new(0.75 + 0.25 * u, x[1].exp())
}

/// Minimise `f` by Nelder–Mead from `x0`; returns `(x, f(x), evals, converged)`.
pub fn nelder_mead(
    f: impl Fn(&[f64; 2]) -> f64,
    x0: [f64; 2],
    step: f64,
    tol: f64,
    max_evals: usize,
) -> ([f64; 2], f64, usize, bool) {
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64; 2]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut pts = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut vals = [eval(&pts[0]), eval(&pts[1]), eval(&pts[2])];
    loop {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = [pts[idx[0]], pts[idx[1]], pts[idx[2]]];
        vals = [vals[idx[0]], vals[idx[1]], vals[idx[2]]];
        let diam = (1..3)
            .map(|i| (pts[i][0] - pts[0][0]).hypot(pts[i][1] - pts[0][1]))
            .fold(0.0f64, f64::max);
        if diam < tol {
            return (pts[0], vals[0], evals.get(), true);
        }
        if evals.get() >= max_evals {
            return (pts[0], vals[0], evals.get(), false);
        }
        let c = [0.5 * (pts[0][0] + pts[1][0]), 0.5 * (pts[0][1] + pts[1][1])];
        let along = |t: f64| [c[0] + t * (pts[2][0] - c[0]), c[1] + t * (pts[2][1] - c[1])];
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[2] = xe;
                vals[2] = fe;
            } else {
                pts[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = xr;
            vals[2] = fr;
        } else {
            let (xc, fc) = if fr < vals[2] {
                let x = along(-0.5);
                (x, eval(&x))
            } else {
                let x = along(0.5);
                (x, eval(&x))
            };
            if fc < vals[2].min(fr) {
                pts[2] = xc;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    pts[i] = [
                        pts[0][0] + 0.5 * (pts[i][0] - pts[0][0]),
                        pts[0][1] + 0.5 * (pts[i][1] - pts[0][1]),
                    ];
                    vals[i] = eval(&pts[i]);
                }
            }
        }
    }
}

/// Maximum likelihood over `(logit((H − ¾)/¼), log σ²)`.
pub fn mle(path: &SamplePath, init: &Theta, backend: Backend) -> Result<MleResult> {
    mle_with(path, init, backend, &MleConfig::default())
}

pub fn mle_with(path: &SamplePath, init: &Theta, backend: Backend, cfg: &MleConfig) -> Result<MleResult> {
    let inc = path.increments();
    let objective = |x: &[f64; 2]| -> f64 {
        let Ok(theta) = from_free(x) else { return f64::INFINITY };
        let v = match backend {
            Backend::DiscreteExact => loglik_increments(&inc, path.dt, &theta, path.eps).map(|r| r.value),
            Backend::Innovation => loglik_innovation(path, &theta).map(|r| r.value),
        };
        v.map(|v| -v).unwrap_or(f64::INFINITY)
    };
    let (x, fx, evals, converged) =
        nelder_mead(objective, to_free(init), cfg.initial_step, cfg.tol, cfg.max_evals);
    if !converged {
        return Err(Error::OptimizerNonConvergence(evals));
    }
    let theta_hat = from_free(&x)?;
    let h = theta_hat.hurst();
    Ok(MleResult {
        theta_hat,
        loglik: -fx,
        n_evals: evals,
        converged,
        boundary_hit: h - 0.75 < 1e-4 || 1.0 - h < 1e-4,
    })
}

/// Replicate-averaged `(1/εT)∫₀ᵀ ∇ρ_t ∇ᵀρ_t dt` with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalInfo {
    pub mean: [[f64; 2]; 2],
    pub stderr: [[f64; 2]; 2],
    pub replicates: usize,
    /// Per-replicate `(I₁₁, I₁₂, I₂₂)` in replicate order.
    pub samples: Vec<[f64; 3]>,
}

impl EmpiricalInfo {
    pub fn as_fisher(&self) -> Result<FisherMatrix> {
        let e = self.stderr;
        FisherMatrix::new(self.mean, e[0][0].max(e[0][1]).max(e[1][1]))
    }
}

/// Configuration of the empirical-information experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalInfoConfig {
    pub dt: f64,
    pub fd_step: f64,
}

impl Default for EmpiricalInfoConfig {
    fn default() -> Self {
        Self {
            dt: 0.125,
            fd_step: 1e-4,
        }
    }
}

pub fn empirical_information(
    theta0: &Theta,
    eps: NoiseLevel,
    horizon: f64,
    replicates: usize,
    master_seed: u64,
) -> Result<EmpiricalInfo> {
    empirical_information_with(theta0, eps, horizon, replicates, master_seed, &EmpiricalInfoConfig::default())
}

pub fn empirical_information_with(
    theta0: &Theta,
    eps: NoiseLevel,
    horizon: f64,
    replicates: usize,
    master_seed: u64,
    cfg: &EmpiricalInfoConfig,
) -> Result<EmpiricalInfo> {
    if replicates < 2 {
        return Err(Error::Domain("need at least two replicates".into()));
    }
    let n = (horizon / cfg.dt).round() as usize;
    let dh = cfg.fd_step;
    let ds = cfg.fd_step * theta0.sigma2();
    let fams = [
        GFamily::new(&theta0.offset(dh, 0.0)?, eps, cfg.dt, n)?,
        GFamily::new(&theta0.offset(-dh, 0.0)?, eps, cfg.dt, n)?,
        GFamily::new(&theta0.offset(0.0, ds)?, eps, cfg.dt, n)?,
        GFamily::new(&theta0.offset(0.0, -ds)?, eps, cfg.dt, n)?,
    ];
    let sim = MixedFbmSimulator::new(*theta0, eps, n, cfg.dt)?;
    let t = n as f64 * cfg.dt;
    let samples: Vec<[f64; 3]> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let path = sim.path(replicate_seed(master_seed, r as u64));
            let inc = path.increments();
            let rho: Vec<Vec<f64>> = fams.iter().map(|f| rho_on_grid(f, &inc)).collect();
            let mut acc = [0.0; 3];
            for k in 0..=n {
                let gh = (rho[0][k] - rho[1][k]) / (2.0 * dh);
                let gs = (rho[2][k] - rho[3][k]) / (2.0 * ds);
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc[0] += w * gh * gh;
                acc[1] += w * gh * gs;
                acc[2] += w * gs * gs;
            }
            acc.map(|a| a * cfg.dt / (eps.value() * t))
        })
        .collect();
    let (mean, se) = mean_and_se(&samples);
    Ok(EmpiricalInfo {
        mean: [[mean[0], mean[1]], [mean[1], mean[2]]],
        stderr: [[se[0], se[1]], [se[1], se[2]]],
        replicates,
        samples,
    })
}

fn mean_and_se<const N: usize>(samples: &[[f64; N]]) -> ([f64; N], [f64; N]) {
    let n = samples.len() as f64;
    let mut mean = [0.0; N];
    for s in samples {
        for k in 0..N {
            mean[k] += s[k] / n;
        }
    }
    let mut var = [0.0; N];
    for s in samples {
        for k in 0..N {
            var[k] += (s[k] - mean[k]).powi(2) / (n - 1.0);
        }
    }
    (mean, var.map(|v| (v / n).sqrt()))
}

/// Sample of log-likelihood ratios `log L(θ₀ + φu) − log L(θ₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LanSample {
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    /// Standard error of the sample variance from the fourth central moment.
    pub se_variance: f64,
    /// Jarque–Bera statistic.
    pub jarque_bera: f64,
    pub theta_alt: Theta,
}

/// Sampling design shared by the LAN replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanDesign {
    pub eps: NoiseLevel,
    pub horizon: f64,
    pub dt: f64,
}

pub fn lan_experiment(
    theta0: &Theta,
    u: [f64; 2],
    schedule: &RateSchedule,
    design: &LanDesign,
    replicates: usize,
    master_seed: u64,
) -> Result<LanSample> {
    let shift = match schedule.scaling {
        Scaling::Matrix(phi) => [
            phi[(0, 0)] * u[0] + phi[(0, 1)] * u[1],
            phi[(1, 0)] * u[0] + phi[(1, 1)] * u[1],
        ],
        Scaling::Scalar(s) => {
            if schedule.rates[0].is_nan() {
                [0.0, s * u[1]]
            } else {
                [s * u[0], 0.0]
            }
        }
    };
    let theta_alt = theta0.offset(shift[0], shift[1])?;
    let n = (design.horizon / design.dt).round() as usize;
    let base = ExactLikelihood::new(theta0, design.eps, design.dt, n)?;
    let alt = ExactLikelihood::new(&theta_alt, design.eps, design.dt, n)?;
    let sim = MixedFbmSimulator::new(*theta0, design.eps, n, design.dt)?;
    let seeds: Vec<u64> = (0..replicates as u64).map(|r| replicate_seed(master_seed, r)).collect();
    let ratios = seeds
        .par_iter()
        .map(|&s| {
            let inc = sim.path(s).increments();
            Ok(alt.evaluate(&inc)?.value - base.evaluate(&inc)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / m;
    let c2 = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / m;
    let c3 = ratios.iter().map(|r| (r - mean).powi(3)).sum::<f64>() / m;
    let c4 = ratios.iter().map(|r| (r - mean).powi(4)).sum::<f64>() / m;
    let variance = c2 * m / (m - 1.0);
    let skew = c3 / c2.powf(1.5);
    let kurt = c4 / (c2 * c2);
    Ok(LanSample {
        mean,
        variance,
        se_mean: (variance / m).sqrt(),
        se_variance: ((c4 - c2 * c2) / m).max(0.0).sqrt(),
        jarque_bera: m / 6.0 * (skew * skew + 0.25 * (kurt - 3.0).powi(2)),
        ratios,
        seeds,
        theta_alt,
    })
}

/// `Var Σ gᵢ ΔXᵢ` as the exact quadratic form in the increment covariance.
pub fn rho_variance_exact(weights: &[f64], theta: &Theta, eps: NoiseLevel, dt: f64) -> f64 {
    let acov = increment_autocovariance(theta, eps.value(), dt, weights.len());
    let y = toeplitz_matvec(&acov, weights);
    y.iter().zip(weights).map(|(a, b)| a * b).sum()
}

/// The same variance as `(1/2π)∫|ĝ(λ)|² (ε + K̂(λ)) dλ` for the
/// piecewise-constant `g` on cells of width `dt`.
///
/// The white part integrates to `ε dt Σgᵢ²` exactly; the fractional part is
/// integrated numerically over `(0, L]` with the period-averaged tail
/// `Σgᵢ² σ²a_H L^{−2H}/(πH)` beyond `L`.
pub fn rho_variance_spectral(weights: &[f64], theta: &Theta, eps: NoiseLevel, dt: f64) -> Result<f64> {
    let h = theta.hurst();
    let sa = theta.sigma2() * a_constant(h)?;
    let sum_sq: f64 = weights.iter().map(|g| g * g).sum();
    let transfer = |lam: f64| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, g) in weights.iter().enumerate() {
            let ph = lam * dt * i as f64;
            re += g * ph.cos();
            im -= g * ph.sin();
        }
        let cell = if lam * dt < 1e-8 { dt } else { 2.0 * (0.5 * lam * dt).sin() / lam };
        (re * re + im * im) * cell * cell
    };
    let lmax = 400.0 / dt;
    let n = weights.len() as f64;
    let panels = ((lmax * n * dt / PI).ceil() as usize).max(64);
    let q = Adaptive::new(1e-10, 0.0, 40 * panels);
    // λ^{1−2H} is integrable at 0; map λ = v^{1/(2−2H)} to remove it.
    let p = 1.0 / (2.0 - 2.0 * h);
    let vmax = lmax.powf(1.0 / p);
    let head = q.integrate(
        |v: f64| {
            if v == 0.0 {
                return [0.0];
            }
            let lam = v.powf(p);
            let jac = p * v.powf(p - 1.0);
            [transfer(lam) * sa * lam.powf(1.0 - 2.0 * h) * jac]
        },
        0.0,
        vmax,
        panels,
    )?;
    let tail = sum_sq * sa * lmax.powf(-2.0 * h) / (PI * h);
    Ok(eps.value() * dt * sum_sq + head.value[0] / PI + tail)
}

/// Weights `g(t, t − s)` on the path cells for a horizon `t = k·dt`
/// computed on a finer or coarser collocation grid, by interpolation.
pub fn cell_weights(values: &[f64], cell: f64, k: usize, dt: f64) -> Vec<f64> {
    let t = k as f64 * dt;
    (0..k)
        .map(|m| interpolate_midpoint(values, cell, t - (m as f64 + 0.5) * dt))
        .collect()
}
