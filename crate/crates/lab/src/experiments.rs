//! The experiments behind the command-line subcommands.

use std::f64::consts::PI;
use std::str::FromStr;

use mfbm::fredholm::{
    gradient_scaling_check, hessian_scaling_check, pde_identity_check, probe_t_min, scaling_check,
    solve_g_with, FredholmConfig, OperatorA, PqConfig,
};
use mfbm::likelihood::{
    empirical_information_with, exact_information, lan_experiment, mle_with, Backend,
    EmpiricalInfoConfig, LanDesign, MleConfig,
};
use mfbm::model::{replicate_seed, MixedFbmSimulator};
use mfbm::spectral::{
    alpha, alpha_at_zero, crossover_scale, extrapolate_to_zero, fisher_information,
    fisher_information_sampled, grad_log_spectrum, h_at_zero, inverse_sqrt, lambda_complex,
    rate_schedule, x_canonical, Regime, RateSchedule, Scaling,
};
use mfbm::wavelet::{c_constant, energy_parts, UnitWindow, Wavelet, WaveletEstimator};
use mfbm::{Error, NoiseLevel, QuadConfig, Result, Theta};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{check_monotone, Config, ConfigError};
use crate::fit::fit_rate;
use crate::output::{num, Check, Plot, Report};

/// Available experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    Simulate,
    Fisher,
    SolveG,
    IdentitySuite,
    Estimate,
    Lan,
    RateSmallnoise,
    RateLargetime,
    EmpiricalInfo,
    EnergyLaw,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Fisher => "fisher",
            Self::SolveG => "solve-g",
            Self::IdentitySuite => "identity-suite",
            Self::Estimate => "estimate",
            Self::Lan => "lan",
            Self::RateSmallnoise => "rate-smallnoise",
            Self::RateLargetime => "rate-largetime",
            Self::EmpiricalInfo => "empirical-info",
            Self::EnergyLaw => "energy-law",
        }
    }
}

/// Typed view of a [`Config`].
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub replicates: usize,
    pub workers: usize,
    pub theta: Theta,
    pub eps: NoiseLevel,
    pub eps_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub samples: usize,
    pub quad: QuadConfig,
    pub fredholm: FredholmConfig,
    pub pq: PqConfig,
    pub backend: Backend,
    pub fd_step: f64,
    pub mle: MleConfig,
    pub lan_replicates: usize,
    pub lan_u: [f64; 2],
    pub lan_horizon: f64,
    pub j_lower: u32,
    pub cascade_levels: u32,
    pub energy_level: u32,
    pub hurst_grid: Vec<f64>,
}

fn invalid(e: Error) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

impl Settings {
    pub fn from_config(c: &Config) -> std::result::Result<Self, ConfigError> {
        let theta = Theta::new(c.get("theta.hurst")?, c.get("theta.sigma2")?).map_err(invalid)?;
        let eps = NoiseLevel::new(c.get("eps")?).map_err(invalid)?;
        let eps_grid = c.list("eps_grid")?;
        let t_grid = c.list("t_grid")?;
        let hurst_grid = c.list("fisher.hurst_grid")?;
        check_monotone("eps_grid", &eps_grid)?;
        check_monotone("t_grid", &t_grid)?;
        check_monotone("fisher.hurst_grid", &hurst_grid)?;
        if eps_grid.iter().chain(&t_grid).any(|v| !(*v > 0.0)) {
            return Err(ConfigError::Invalid("grids must be positive".into()));
        }
        let replicates: usize = c.get("replicates")?;
        let lan_replicates: usize = c.get("lan.replicates")?;
        if replicates < 1 || lan_replicates < 1 {
            return Err(ConfigError::Invalid("replicates must be at least 1".into()));
        }
        let u = c.list("lan.u")?;
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if u.len() != 2 || !(norm > 0.0) {
            return Err(ConfigError::Invalid("lan.u must be two numbers, not both zero".into()));
        }
        let family: String = c.get("wav.family")?;
        if family != "daubechies4" {
            return Err(ConfigError::Invalid(format!("unsupported wavelet family `{family}`")));
        }
        let backend = Backend::from_str(c.raw("lik.backend")).map_err(invalid)?;
        let dt: f64 = c.get("dt")?;
        let horizon: f64 = c.get("horizon")?;
        let lan_horizon: f64 = c.get("lan.horizon")?;
        if !(dt > 0.0 && horizon > 0.0 && lan_horizon > 0.0) {
            return Err(ConfigError::Invalid("dt and horizons must be positive".into()));
        }
        Ok(Self {
            seed: c.get("seed")?,
            replicates,
            workers: c.get("workers")?,
            theta,
            eps,
            eps_grid,
            t_grid,
            horizon,
            dt,
            samples: c.get("samples")?,
            quad: QuadConfig {
                rel_tol: c.get("quad.rel_tol")?,
                max_panels: c.get("quad.max_panels")?,
                tail_cut: c.get("quad.tail_cut")?,
            },
            fredholm: FredholmConfig {
                n_nodes: c.get("fredholm.n_nodes")?,
                residual_tol: c.get("fredholm.residual_tol")?,
            },
            pq: PqConfig {
                max_iter: c.get("pq.max_iter")?,
                fp_tol: c.get("pq.fp_tol")?,
                ..PqConfig::default()
            },
            backend,
            fd_step: c.get("lik.fd_step")?,
            mle: MleConfig {
                max_evals: c.get("mle.max_evals")?,
                ..MleConfig::default()
            },
            lan_replicates,
            lan_u: [u[0] / norm, u[1] / norm],
            lan_horizon,
            j_lower: c.get("wav.j_lower")?,
            cascade_levels: c.get("wav.cascade_levels")?,
            energy_level: c.get("energy.level")?,
            hurst_grid,
        })
    }

    fn estimator(&self) -> Result<WaveletEstimator> {
        WaveletEstimator::new(Wavelet::daubechies4(self.cascade_levels)?, self.j_lower)
    }

    fn steps(&self, horizon: f64) -> Result<usize> {
        let n = (horizon / self.dt).round() as usize;
        if n < 2 {
            return Err(Error::Domain(format!("horizon {horizon} gives fewer than 2 steps")));
        }
        Ok(n)
    }
}

pub fn run_experiment(exp: Experiment, s: &Settings) -> Result<Report> {
    match exp {
        Experiment::Simulate => simulate(s),
        Experiment::Fisher => fisher_table(s),
        Experiment::SolveG => solve_g_table(s),
        Experiment::IdentitySuite => identity_suite(s),
        Experiment::Estimate => estimate(s),
        Experiment::Lan => lan(s),
        Experiment::RateSmallnoise => rate_smallnoise(s),
        Experiment::RateLargetime => rate_largetime(s),
        Experiment::EmpiricalInfo => empirical_info(s),
        Experiment::EnergyLaw => energy_law(s),
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

fn rmse(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

fn simulate(s: &Settings) -> Result<Report> {
    let n = s.steps(s.horizon)?;
    let sim = MixedFbmSimulator::new(s.theta, s.eps, n, s.dt)?;
    let mut r = Report::new("simulate", &["replicate", "seed", "step", "time", "value"]);
    let paths: Vec<_> = (0..s.replicates as u64)
        .into_par_iter()
        .map(|i| sim.path(replicate_seed(s.seed, i)))
        .collect();
    let mut terminal = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        for (k, v) in p.values.iter().enumerate() {
            r.push_row(vec![
                i.to_string(),
                p.seed.to_string(),
                k.to_string(),
                num(k as f64 * s.dt),
                num(*v),
            ]);
        }
        terminal.push(p.values[n] * p.values[n]);
    }
    let t = n as f64 * s.dt;
    let var = s.theta.sigma2() * t.powf(2.0 * s.theta.hurst()) + s.eps.value() * t;
    let (m, se) = mean_se(&terminal);
    r.summary.push(format!("method: {:?}", sim.method()));
    r.summary.push(format!("E X_T^2: {m} (se {se}), theory {var}"));
    if terminal.len() >= 2 {
        r.check(Check::new(
            "terminal-variance",
            (m - var).abs() <= 4.0 * se,
            format!("{m:.6} vs {var:.6}, {:.2} SE", (m - var) / se),
        ));
    }
    Ok(r)
}

fn fisher_table(s: &Settings) -> Result<Report> {
    let mut r = Report::new(
        "fisher",
        &["replicate", "seed", "hurst", "sigma2", "eps", "i_hh", "i_hs", "i_ss", "quad_error", "schur_hurst"],
    );
    let mut grid = Vec::new();
    for &h in &s.hurst_grid {
        for &e in &s.eps_grid {
            grid.push((h, e));
        }
    }
    let rows: Vec<Result<(f64, f64, mfbm::spectral::FisherMatrix)>> = grid
        .par_iter()
        .map(|&(h, e)| {
            let th = Theta::new(h, s.theta.sigma2())?;
            Ok((h, e, fisher_information(&th, NoiseLevel::new(e)?, &s.quad)?))
        })
        .collect();
    let mut all_pd = true;
    for (i, row) in rows.into_iter().enumerate() {
        let (h, e, f) = row?;
        all_pd &= f.cholesky().is_ok();
        r.push_row(vec![
            i.to_string(),
            s.seed.to_string(),
            num(h),
            num(s.theta.sigma2()),
            num(e),
            num(f.entries[0][0]),
            num(f.entries[0][1]),
            num(f.entries[1][1]),
            num(f.quad_error),
            num(f.schur_hurst()),
        ]);
    }
    r.check(Check::new("positive-definite", all_pd, format!("{} grid points", grid.len())));
    Ok(r)
}

fn solve_g_table(s: &Settings) -> Result<Report> {
    let sol = solve_g_with(&s.theta, s.eps, s.horizon, &s.fredholm)?;
    let mut r = Report::new("solve-g", &["replicate", "seed", "node", "g"]);
    for (i, (x, g)) in sol.nodes.iter().zip(&sol.values).enumerate() {
        r.push_row(vec![i.to_string(), s.seed.to_string(), num(*x), num(*g)]);
    }
    r.summary.push(format!("t = {}, nodes = {}", sol.t, sol.nodes.len()));
    r.summary.push(format!("condition estimate: {:e}", sol.condition));
    r.check(Check::new(
        "plug-back-residual",
        sol.residual <= s.fredholm.residual_tol,
        format!("{:e} (tolerance {:e})", sol.residual, s.fredholm.residual_tol),
    ));
    Ok(r)
}

/// Twenty test points off the real axis, so both `z` and `−z` avoid the cut.
pub fn identity_grid() -> Vec<Complex64> {
    let radii = [0.01, 0.3, 1.0, 7.0, 60.0];
    let angles = [0.35, 1.2, 2.0, 2.8];
    let mut out = Vec::new();
    for r in radii {
        for a in angles {
            out.push(Complex64::from_polar(r, a));
        }
    }
    out
}

fn identity_suite(s: &Settings) -> Result<Report> {
    let mut r = Report::new("identity-suite", &["replicate", "seed", "check", "value", "tolerance", "pass"]);
    let add = |r: &mut Report, name: &str, value: f64, tol: f64, pass: bool, detail: String| {
        let i = r.rows.len();
        r.push_row(vec![
            i.to_string(),
            s.seed.to_string(),
            name.to_string(),
            num(value),
            num(tol),
            pass.to_string(),
        ]);
        r.check(Check::new(name, pass, detail));
    };

    // Factorisation identity ε X_c(z) X_c(−z) = Λ(z).
    let mut worst: f64 = 0.0;
    for (h, sig) in [(0.8, 1.0), (0.9, 2.0)] {
        let th = Theta::new(h, sig)?;
        for e in [0.5, 1.0] {
            let eps = NoiseLevel::new(e)?;
            for z in identity_grid() {
                let lhs = x_canonical(&th, eps, z)? * x_canonical(&th, eps, -z)? * e;
                let rhs = lambda_complex(&th, eps, z)?;
                worst = worst.max(((lhs - rhs) / rhs).norm());
            }
        }
    }
    add(&mut r, "xxl-identity", worst, 1e-4, worst < 1e-4, format!("max relative error {worst:.3e} over 80 points"));

    // Boundary limits.
    let mut worst_alpha: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    let mut worst_inf: f64 = 0.0;
    for (h, sig, e) in [(0.8, 1.0, 1.0), (0.9, 2.0, 0.5), (s.theta.hurst(), s.theta.sigma2(), s.eps.value())] {
        let th = Theta::new(h, sig)?;
        let eps = NoiseLevel::new(e)?;
        let tau = 1e-9 * crossover_scale(&th, eps)?;
        let a0 = extrapolate_to_zero(|t| alpha(&th, eps, t), tau, 2.0 * h - 1.0)?;
        worst_alpha = worst_alpha.max((a0 - PI * (h - 0.5)).abs());
        worst_alpha = worst_alpha.max((alpha_at_zero(&th) - PI * (h - 0.5)).abs());
        worst_h = worst_h.max((h_at_zero(&th, eps)? - (PI * (h - 0.5)).sin()).abs());
        for a in [0.5, 1.5, 2.5, 3.0] {
            let z = Complex64::from_polar(1e6, a);
            worst_inf = worst_inf.max((x_canonical(&th, eps, z)? - 1.0).norm());
        }
    }
    add(&mut r, "alpha-at-zero", worst_alpha, 1e-6, worst_alpha < 1e-6, format!("max |α(0+) − π(H−½)| = {worst_alpha:.3e}"));
    add(&mut r, "h-at-zero", worst_h, 1e-6, worst_h < 1e-6, format!("max |h(0+) − sin π(H−½)| = {worst_h:.3e}"));
    add(&mut r, "xc-at-infinity", worst_inf, 1e-3, worst_inf < 1e-3, format!("max |X_c(z) − 1| at |z| = 1e6: {worst_inf:.3e}"));

    // Fredholm suite.
    let t = 8.0;
    let sol = solve_g_with(&s.theta, s.eps, t, &s.fredholm)?;
    add(
        &mut r,
        "fredholm-residual",
        sol.residual,
        s.fredholm.residual_tol,
        sol.residual <= s.fredholm.residual_tol,
        format!("plug-back residual {:.3e} at t = {t}, {} nodes", sol.residual, sol.nodes.len()),
    );
    let eps_half = NoiseLevel::new(0.5)?;
    let s1 = scaling_check(&s.theta, eps_half, t, 256)?;
    add(&mut r, "scaling-s1", s1, 1e-3, s1 < 1e-3, format!("relative error {s1:.3e} at 256 nodes"));
    let s2 = gradient_scaling_check(&s.theta, eps_half, t, 128, 1e-3)?;
    add(&mut r, "scaling-s2", s2, 1e-3, s2 < 1e-3, format!("relative error {s2:.3e} at 128 nodes"));
    let s3 = hessian_scaling_check(&s.theta, eps_half, t, 128, 1e-3)?;
    add(&mut r, "scaling-s3", s3, 1e-3, s3 < 1e-3, format!("relative error {s3:.3e} at 128 nodes"));

    let levels = [(64usize, 1e-3), (128, 5e-4), (256, 2.5e-4), (512, 1.25e-4)];
    let defects: Vec<f64> = levels
        .par_iter()
        .map(|&(n, step)| pde_identity_check(&s.theta, 1.0, n, step))
        .collect::<Result<_>>()?;
    let decreasing = defects.windows(2).all(|w| w[1] < w[0]);
    let order = (defects[defects.len() - 2] / defects[defects.len() - 1]).log2();
    add(
        &mut r,
        "pde-identity",
        order,
        1.0,
        decreasing && order >= 1.0,
        format!(
            "defects {} ; observed order {order:.2}",
            defects.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    );

    let (t_min, norm_min) = probe_t_min(&s.theta, s.eps, 0.95, 1024.0, &s.pq)?;
    let op = OperatorA::new(&s.theta, s.eps, t_min, &s.pq)?;
    let norms: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|m| op.retimed(t_min * m).operator_norm())
        .collect();
    let max_norm = norms.iter().fold(0.0f64, |a, b| a.max(*b));
    add(
        &mut r,
        "contraction",
        max_norm,
        1.0,
        max_norm < 1.0,
        format!("T_min = {t_min} (norm {norm_min:.4}); max norm over [T_min, 16 T_min] = {max_norm:.4}"),
    );

    // Spectral gradient against central differences.
    let worst_grad = gradient_points(s.seed)?;
    add(&mut r, "gradient", worst_grad, 1e-5, worst_grad < 1e-5, format!("max relative error {worst_grad:.3e} at 10 points"));
    Ok(r)
}

/// Worst relative error of `∇ log f` against central differences at ten
/// pseudo-random `(θ, ε, λ)` points drawn from `seed`.
pub fn gradient_points(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..10u64 {
        let u = |k: u64| (replicate_seed(seed, 10 * i + k) >> 11) as f64 / (1u64 << 53) as f64;
        let h = 0.76 + 0.22 * u(0);
        let sig = 0.2 + 3.0 * u(1);
        let e = 10f64.powf(-3.0 + 4.0 * u(2));
        let lam = 10f64.powf(-4.0 + 8.0 * u(3));
        let th = Theta::new(h, sig)?;
        let eps = NoiseLevel::new(e)?;
        let g = grad_log_spectrum(&th, eps, lam)?;
        let logf = |hh: f64, ss: f64| -> Result<f64> {
            Ok(mfbm::model::spectral_density_raw(&Theta::new(hh, ss)?, e, lam)?.ln())
        };
        let dh = 1e-6;
        let ds = 1e-6 * sig;
        let fd = [
            (logf(h + dh, sig)? - logf(h - dh, sig)?) / (2.0 * dh),
            (logf(h, sig + ds)? - logf(h, sig - ds)?) / (2.0 * ds),
        ];
        for k in 0..2 {
            worst = worst.max((g[k] - fd[k]).abs() / g[k].abs().max(1e-12));
        }
    }
    Ok(worst)
}

fn estimate(s: &Settings) -> Result<Report> {
    let est = s.estimator()?;
    let n = s.samples;
    let dt = s.horizon / n as f64;
    let sim = MixedFbmSimulator::new(s.theta, s.eps, n, dt)?;
    let mut r = Report::new(
        "estimate",
        &["replicate", "seed", "h_hat", "sigma2_hat", "level", "degraded", "fallback", "status"],
    );
    let out: Vec<(u64, Result<mfbm::wavelet::EstimateReport>)> = (0..s.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let seed = replicate_seed(s.seed, i);
            (seed, est.estimate_joint(&sim.path(seed)))
        })
        .collect();
    for (i, (seed, res)) in out.iter().enumerate() {
        let row = match res {
            Ok(e) => vec![
                i.to_string(),
                seed.to_string(),
                num(e.h_hat),
                num(e.sigma2_hat),
                e.selected_level.to_string(),
                e.diagnostics.degraded_selection.to_string(),
                e.diagnostics.fallback.to_string(),
                "ok".into(),
            ],
            Err(err) => vec![
                i.to_string(),
                seed.to_string(),
                "NaN".into(),
                "NaN".into(),
                "0".into(),
                "true".into(),
                "true".into(),
                format!("\"{err}\""),
            ],
        };
        r.push_row(row);
    }
    let ok: Vec<&mfbm::wavelet::EstimateReport> = out.iter().filter_map(|(_, e)| e.as_ref().ok()).collect();
    if !ok.is_empty() {
        let hs: Vec<f64> = ok.iter().map(|e| e.h_hat).collect();
        let ss: Vec<f64> = ok.iter().map(|e| e.sigma2_hat).collect();
        r.summary.push(format!("mean H_hat {:?}, mean sigma2_hat {:?}", mean_se(&hs), mean_se(&ss)));
    }
    r.summary.push(format!("{} of {} replicates failed", out.len() - ok.len(), out.len()));
    Ok(r)
}

fn empirical_info(s: &Settings) -> Result<Report> {
    let cfg = EmpiricalInfoConfig {
        dt: s.dt,
        fd_step: s.fd_step,
    };
    let emp = empirical_information_with(&s.theta, s.eps, s.horizon, s.replicates, s.seed, &cfg)?;
    let whittle = fisher_information(&s.theta, s.eps, &s.quad)?;
    let sampled = fisher_information_sampled(&s.theta, s.eps, s.dt, &s.quad)?;
    let mut r = Report::new("empirical-info", &["replicate", "seed", "i_hh", "i_hs", "i_ss"]);
    for (i, v) in emp.samples.iter().enumerate() {
        r.push_row(vec![
            i.to_string(),
            replicate_seed(s.seed, i as u64).to_string(),
            num(v[0]),
            num(v[1]),
            num(v[2]),
        ]);
    }
    let mut within = true;
    let mut parts = Vec::new();
    for (a, b, name) in [(0, 0, "HH"), (0, 1, "Hs"), (1, 1, "ss")] {
        let z = (emp.mean[a][b] - whittle.entries[a][b]) / emp.stderr[a][b];
        within &= z.abs() <= 4.0;
        parts.push(format!(
            "{name}: {:.4} ± {:.4} vs {:.4} ({z:+.1} SE)",
            emp.mean[a][b], emp.stderr[a][b], whittle.entries[a][b]
        ));
    }
    r.summary.push(format!("whittle information: {:?}", whittle.entries));
    r.summary.push(format!("sampled-spectrum information at dt = {}: {:?}", s.dt, sampled.entries));
    r.summary.push(format!("empirical mean: {:?}", emp.mean));
    r.summary.push(format!("empirical stderr: {:?}", emp.stderr));
    r.check(Check::new("whittle-agreement", within, parts.join("; ")));
    Ok(r)
}

/// Symmetric scaling `φ = (T·I)^{−1/2}` wrapped as a large-time schedule.
fn schedule_from_information(info: mfbm::spectral::FisherMatrix, eps: NoiseLevel, horizon: f64) -> Result<RateSchedule> {
    let phi = inverse_sqrt(&(info.matrix() * horizon))?;
    Ok(RateSchedule {
        regime: Regime::LargeTime { eps, horizon },
        scaling: Scaling::Matrix(phi),
        log_factor: 1.0,
        rates: [horizon.sqrt(); 2],
        information: info,
        upper_scaling: None,
    })
}

fn lan_checks(r: &mut Report, prefix: &str, sample: &mfbm::likelihood::LanSample) {
    let zm = (sample.mean + 0.5) / sample.se_mean;
    let zv = (sample.variance - 1.0) / sample.se_variance;
    r.check(Check::new(
        format!("{prefix}mean"),
        zm.abs() <= 3.0,
        format!("{:.4} ± {:.4} vs −0.5 ({zm:+.2} SE)", sample.mean, sample.se_mean),
    ));
    r.check(Check::new(
        format!("{prefix}variance"),
        zv.abs() <= 3.0,
        format!("{:.4} ± {:.4} vs 1 ({zv:+.2} SE)", sample.variance, sample.se_variance),
    ));
}

fn lan(s: &Settings) -> Result<Report> {
    let design = LanDesign {
        eps: s.eps,
        horizon: s.lan_horizon,
        dt: s.dt,
    };
    let schedule = rate_schedule(
        Regime::LargeTime {
            eps: s.eps,
            horizon: s.lan_horizon,
        },
        &s.theta,
        &s.quad,
    )?;
    let main = lan_experiment(&s.theta, s.lan_u, &schedule, &design, s.lan_replicates, s.seed)?;
    let n = s.steps(s.lan_horizon)?;
    let exact = exact_information(&s.theta, s.eps, s.dt, n)?;
    let per_time = exact.entries.map(|row| row.map(|v| v / s.lan_horizon));
    let sched_n = schedule_from_information(mfbm::spectral::FisherMatrix::new(per_time, 0.0)?, s.eps, s.lan_horizon)?;
    let supp = lan_experiment(&s.theta, s.lan_u, &sched_n, &design, s.lan_replicates, s.seed)?;

    let mut r = Report::new("lan", &["replicate", "seed", "log_lr", "log_lr_exact_info"]);
    for i in 0..main.ratios.len() {
        r.push_row(vec![
            i.to_string(),
            main.seeds[i].to_string(),
            num(main.ratios[i]),
            num(supp.ratios[i]),
        ]);
    }
    r.summary.push(format!("u = {:?}, horizon = {}, dt = {}", s.lan_u, s.lan_horizon, s.dt));
    r.summary.push(format!("θ₀ + φu (Whittle φ) = {:?}", main.theta_alt.as_array()));
    r.summary.push(format!("θ₀ + φu (finite-sample φ) = {:?}", supp.theta_alt.as_array()));
    r.summary.push(format!("finite-sample information per unit time: {per_time:?}"));
    r.summary.push(format!("Jarque–Bera: {:.3} (Whittle φ), {:.3} (finite-sample φ)", main.jarque_bera, supp.jarque_bera));
    lan_checks(&mut r, "lan-", &main);
    lan_checks(&mut r, "lan-finite-sample-", &supp);
    Ok(r)
}

/// Per-level energies of noiseless and pure-noise paths.
fn energy_law(s: &Settings) -> Result<Report> {
    let est = s.estimator()?;
    let j = s.energy_level;
    let n = s.samples;
    let unit = NoiseLevel::new(1.0)?;
    let sim = MixedFbmSimulator::new(s.theta, unit, n, 1.0 / n as f64)?;
    let sigma = s.theta.sigma2().sqrt();
    let rows: Vec<(u64, [f64; 3])> = (0..s.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let seed = replicate_seed(s.seed, i);
            let (f, b) = sim.components(seed);
            let f: Vec<f64> = f.iter().map(|v| sigma * v).collect();
            let a = energy_parts(&est.wavelet, &f, &b, j)?;
            let c = energy_parts(&est.wavelet, &f, &b, j + 1)?;
            Ok((seed, [a[0], c[0], a[2] - a[3]]))
        })
        .collect::<Result<_>>()?;
    let mut r = Report::new("energy-law", &["replicate", "seed", "q_j", "q_j1", "ratio", "q_noise"]);
    for (i, (seed, v)) in rows.iter().enumerate() {
        r.push_row(vec![
            i.to_string(),
            seed.to_string(),
            num(v[0]),
            num(v[1]),
            num(v[1] / v[0]),
            num(v[2]),
        ]);
    }
    let h = s.theta.hurst();
    let target = (2.0 - 2.0 * h).exp2();
    let ratios: Vec<f64> = rows.iter().map(|(_, v)| v[1] / v[0]).collect();
    let (rm, rse) = mean_se(&ratios);
    let z = (rm - target) / rse;
    r.check(Check::new(
        "ratio-mean",
        z.abs() <= 4.0,
        format!("mean Q_{}/Q_{j} = {rm:.5} ± {rse:.5} vs {target:.5} ({z:+.2} SE)", j + 1),
    ));
    let noise: Vec<f64> = rows.iter().map(|(_, v)| v[2]).collect();
    let (nm, nse) = mean_se(&noise);
    r.check(Check::new(
        "noise-mean",
        (nm / nse).abs() <= 4.0,
        format!("pure-noise Q̂_{j} mean {nm:.4} ± {nse:.4} ({:+.2} SE)", nm / nse),
    ));

    // Ratio of means with a delta-method standard error.
    let qa: Vec<f64> = rows.iter().map(|(_, v)| v[0]).collect();
    let qb: Vec<f64> = rows.iter().map(|(_, v)| v[1]).collect();
    let (ma, _) = mean_se(&qa);
    let (mb, _) = mean_se(&qb);
    let ratio = mb / ma;
    let lin: Vec<f64> = qa.iter().zip(&qb).map(|(a, b)| (b - ratio * a) / ma).collect();
    let (_, lse) = mean_se(&lin);
    let zr = (ratio - target) / lse;
    r.check(Check::new(
        "ratio-of-means",
        zr.abs() <= 4.0,
        format!("E Q_{}/E Q_{j} = {ratio:.5} ± {lse:.5} ({zr:+.2} SE)", j + 1),
    ));
    let c = c_constant(&est.wavelet, h)?;
    let scale = (j as f64 * (2.0 - 2.0 * h)).exp2();
    let scaled: Vec<f64> = qa.iter().map(|q| q / scale).collect();
    let (sm, sse) = mean_se(&scaled);
    let expect = 0.5 * s.theta.sigma2() * c;
    let zs = (sm - expect) / sse;
    r.check(Check::new(
        "energy-scaling",
        zs.abs() <= 4.0,
        format!("E Q_{j}/2^(j(2−2H)) = {sm:.5} ± {sse:.5} vs σ²c_H/2 = {expect:.5} ({zs:+.2} SE)"),
    ));
    Ok(r)
}

#[derive(Debug, Clone, Copy)]
struct SmallNoiseRow {
    h_hat: f64,
    sigma2_hat: f64,
    level: u32,
    h_tilde: f64,
    sigma2_tilde: f64,
    degraded: bool,
    ok: bool,
}

fn rate_smallnoise(s: &Settings) -> Result<Report> {
    let est = s.estimator()?;
    let n = s.samples;
    let unit = NoiseLevel::new(1.0)?;
    let sim = MixedFbmSimulator::new(s.theta, unit, n, 1.0 / n as f64)?;
    let sigma = s.theta.sigma2().sqrt();
    let (h0, s0) = (s.theta.hurst(), s.theta.sigma2());
    let per_rep: Vec<(u64, Vec<SmallNoiseRow>)> = (0..s.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let seed = replicate_seed(s.seed, i);
            let (f, b) = sim.components(seed);
            let rows = s
                .eps_grid
                .iter()
                .map(|&e| {
                    let x: Vec<f64> = f.iter().zip(&b).map(|(a, z)| sigma * a + e.sqrt() * z).collect();
                    let win = UnitWindow::new(&x, e, 1.0)?;
                    let fail = SmallNoiseRow {
                        h_hat: f64::NAN,
                        sigma2_hat: f64::NAN,
                        level: 0,
                        h_tilde: f64::NAN,
                        sigma2_tilde: f64::NAN,
                        degraded: true,
                        ok: false,
                    };
                    let Ok(rep) = est.estimate_window(&win) else {
                        return Ok(fail);
                    };
                    let h_tilde = est.hurst_known_sigma(&rep, s0, 1.0).unwrap_or(f64::NAN);
                    let sigma2_tilde = est.sigma2_known_h(&win, h0).map(|v| v.0).unwrap_or(f64::NAN);
                    Ok(SmallNoiseRow {
                        h_hat: rep.h_hat,
                        sigma2_hat: rep.sigma2_hat,
                        level: rep.selected_level,
                        h_tilde,
                        sigma2_tilde,
                        degraded: rep.diagnostics.degraded_selection,
                        ok: true,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((seed, rows))
        })
        .collect::<Result<_>>()?;

    let mut r = Report::new(
        "rate-smallnoise",
        &["replicate", "seed", "eps", "h_hat", "sigma2_hat", "level", "h_tilde", "sigma2_tilde", "degraded", "status"],
    );
    for (i, (seed, rows)) in per_rep.iter().enumerate() {
        for (k, row) in rows.iter().enumerate() {
            r.push_row(vec![
                i.to_string(),
                seed.to_string(),
                num(s.eps_grid[k]),
                num(row.h_hat),
                num(row.sigma2_hat),
                row.level.to_string(),
                num(row.h_tilde),
                num(row.sigma2_tilde),
                row.degraded.to_string(),
                if row.ok { "ok".into() } else { "failed".into() },
            ]);
        }
    }
    let rate = 1.0 / (4.0 * h0 - 2.0);
    let (lo, hi) = (0.75 * rate, 1.25 * rate);
    let mut pts_h = Vec::new();
    let mut pts_s = Vec::new();
    let mut ratio_tilde = Vec::new();
    for (k, &e) in s.eps_grid.iter().enumerate() {
        let ok: Vec<&SmallNoiseRow> = per_rep.iter().map(|(_, v)| &v[k]).filter(|x| x.ok).collect();
        let failed = per_rep.len() - ok.len();
        let log_inv = (1.0 / e).ln();
        let eh: Vec<f64> = ok.iter().map(|x| x.h_hat - h0).collect();
        let es: Vec<f64> = ok.iter().map(|x| x.sigma2_hat - s0).collect();
        let et: Vec<f64> = ok.iter().map(|x| x.h_tilde - h0).filter(|v| v.is_finite()).collect();
        let ev: Vec<f64> = ok.iter().map(|x| x.sigma2_tilde - s0).filter(|v| v.is_finite()).collect();
        let mut levels: Vec<u32> = ok.iter().map(|x| x.level).collect();
        levels.sort_unstable();
        let (rh, rs, rt, rv) = (rmse(&eh), rmse(&es), rmse(&et), rmse(&ev));
        r.summary.push(format!(
            "eps {e:e}: RMSE(H_hat) {rh:.5}, RMSE(sigma2_hat) {rs:.5e}, RMSE(H_tilde) {rt:.5}, RMSE(sigma2_tilde) {rv:.5}, median J* {}, failed {failed}",
            levels.get(levels.len() / 2).copied().unwrap_or(0)
        ));
        pts_h.push((e, rh));
        pts_s.push((e, rs / log_inv));
        ratio_tilde.push(rt * log_inv / rh);
    }
    r.summary.push(format!(
        "RMSE(H_tilde)·log(1/eps)/RMSE(H_hat): {}",
        ratio_tilde.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")
    ));
    let fh = fit_rate(&pts_h)?;
    let fs = fit_rate(&pts_s)?;
    r.check(Check::new(
        "hurst-rate",
        fh.slope > lo && fh.slope < hi,
        format!("slope {:.4} ± {:.4}, band ({lo:.4}, {hi:.4})", fh.slope, fh.stderr),
    ));
    r.check(Check::new(
        "sigma2-rate",
        fs.slope > lo && fs.slope < hi,
        format!("slope {:.4} ± {:.4} on RMSE/log(1/eps), band ({lo:.4}, {hi:.4})", fs.slope, fs.stderr),
    ));
    r.plots.push(Plot {
        file: "rate_hurst.svg".into(),
        title: "RMSE(Ĥ) vs ε".into(),
        x_label: "ln ε".into(),
        y_label: "ln RMSE".into(),
        fit: fh,
    });
    r.plots.push(Plot {
        file: "rate_sigma2.svg".into(),
        title: "RMSE(σ̂²)/ln(1/ε) vs ε".into(),
        x_label: "ln ε".into(),
        y_label: "ln RMSE/ln(1/ε)".into(),
        fit: fs,
    });
    Ok(r)
}

fn rate_largetime(s: &Settings) -> Result<Report> {
    let jobs: Vec<(usize, u64)> = (0..s.t_grid.len())
        .flat_map(|k| (0..s.replicates as u64).map(move |i| (k, i)))
        .collect();
    let sims: Vec<MixedFbmSimulator> = s
        .t_grid
        .iter()
        .map(|&t| MixedFbmSimulator::new(s.theta, s.eps, s.steps(t)?, s.dt))
        .collect::<Result<_>>()?;
    let out: Vec<(u64, Result<mfbm::likelihood::MleResult>)> = jobs
        .par_iter()
        .map(|&(k, i)| {
            let seed = replicate_seed(replicate_seed(s.seed, 1_000_003 + k as u64), i);
            let path = sims[k].path(seed);
            (seed, mle_with(&path, &s.theta, s.backend, &s.mle))
        })
        .collect();
    let mut r = Report::new(
        "rate-largetime",
        &["replicate", "seed", "horizon", "h_hat", "sigma2_hat", "n_evals", "converged", "boundary_hit", "status"],
    );
    let mut errors = vec![Vec::new(); s.t_grid.len()];
    for ((k, i), (seed, res)) in jobs.iter().zip(&out) {
        let row = match res {
            Ok(m) => {
                errors[*k].push(m.theta_hat.hurst() - s.theta.hurst());
                vec![
                    i.to_string(),
                    seed.to_string(),
                    num(s.t_grid[*k]),
                    num(m.theta_hat.hurst()),
                    num(m.theta_hat.sigma2()),
                    m.n_evals.to_string(),
                    m.converged.to_string(),
                    m.boundary_hit.to_string(),
                    "ok".into(),
                ]
            }
            Err(e) => vec![
                i.to_string(),
                seed.to_string(),
                num(s.t_grid[*k]),
                "NaN".into(),
                "NaN".into(),
                "0".into(),
                "false".into(),
                "false".into(),
                format!("\"{e}\""),
            ],
        };
        r.push_row(row);
    }
    let mut pts = Vec::new();
    let mut bound = Vec::new();
    for (k, t) in s.t_grid.iter().enumerate() {
        let e = rmse(&errors[k]);
        // Cramér–Rao bound for H from the information of the sampled increments.
        let info = exact_information(&s.theta, s.eps, s.dt, s.steps(*t)?)?.entries;
        let cr = (info[1][1] / (info[0][0] * info[1][1] - info[0][1] * info[0][1])).sqrt();
        let hits = out
            .iter()
            .zip(&jobs)
            .filter(|((_, m), (kk, _))| *kk == k && m.as_ref().is_ok_and(|m| m.boundary_hit))
            .count();
        r.summary.push(format!(
            "T {t}: RMSE(H_mle) {e:.5}, sqrt(T)·RMSE {:.4}, Cramér–Rao sd {cr:.5}, boundary hits {hits}, failed {}",
            e * t.sqrt(),
            s.replicates - errors[k].len()
        ));
        pts.push((*t, e));
        bound.push((*t, cr));
    }
    let f = fit_rate(&pts)?;
    let fb = fit_rate(&bound)?;
    r.summary.push(format!("Cramér–Rao sd slope over the grid: {:.4}", fb.slope));
    r.check(Check::new(
        "largetime-rate",
        (f.slope + 0.5).abs() <= 0.15,
        format!("slope {:.4} ± {:.4}, band (−0.65, −0.35)", f.slope, f.stderr),
    ));
    let (t_last, e_last) = pts[pts.len() - 1];
    let cr_last = bound[bound.len() - 1].1;
    let tol = 3.0 / (2.0 * errors[errors.len() - 1].len().max(1) as f64).sqrt();
    r.check(Check::new(
        "largetime-efficiency",
        (e_last / cr_last - 1.0).abs() <= tol,
        format!("RMSE/Cramér–Rao at T = {t_last}: {:.4}, tolerance ±{tol:.3}", e_last / cr_last),
    ));
    r.plots.push(Plot {
        file: "rate_largetime.svg".into(),
        title: "RMSE(Ĥ_MLE) vs T".into(),
        x_label: "ln T".into(),
        y_label: "ln RMSE".into(),
        fit: f,
    });
    Ok(r)
}
