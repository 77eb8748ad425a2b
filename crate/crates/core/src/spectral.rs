//! Whittle-type Fisher information, the boundary-value functions of the
//! Wiener–Hopf analysis (`Λ`, `α`, `X_c`, `h`) and minimax rate schedules.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use statrs::function::gamma::{digamma, gamma};

use crate::error::{Error, Result};
use crate::model::{a_constant, NoiseLevel, Theta};
use crate::quad::{Adaptive, QuadConfig};

/// `∂_H a_H = Γ(2H+1)[2ψ(2H+1) sin(πH) + π cos(πH)]`.
pub fn a_constant_derivative(hurst: f64) -> f64 {
    let x = 2.0 * hurst + 1.0;
    gamma(x) * (2.0 * digamma(x) * (PI * hurst).sin() + PI * (PI * hurst).cos())
}

/// Gradient `(∂_H, ∂_{σ²})` of `log(ε + σ² a_H |λ|^{1−2H})`.
pub fn grad_log_spectrum(theta: &Theta, eps: NoiseLevel, lambda: f64) -> Result<[f64; 2]> {
    grad_log_spectrum_raw(theta, eps.value(), lambda)
}

/// As [`grad_log_spectrum`] but admits `eps = 0`.
pub fn grad_log_spectrum_raw(theta: &Theta, eps: f64, lambda: f64) -> Result<[f64; 2]> {
    if lambda == 0.0 {
        return Err(Error::Singular("lambda = 0"));
    }
    let h = theta.hurst();
    let s2 = theta.sigma2();
    let a = a_constant(h)?;
    let da = a_constant_derivative(h);
    let l = lambda.abs();
    Ok(grad_terms(h, s2, a, da, eps, l.ln()))
}

// Works in log λ so that extreme frequencies neither overflow nor underflow.
fn grad_terms(h: f64, s2: f64, a: f64, da: f64, eps: f64, log_l: f64) -> [f64; 2] {
    let pw = ((1.0 - 2.0 * h) * log_l).exp();
    let khat = s2 * a * pw;
    let f = eps + khat;
    [s2 * pw * (da - 2.0 * a * log_l) / f, a * pw / f]
}

/// Symmetric positive-definite 2×2 information matrix indexed `(H, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherMatrix {
    pub entries: [[f64; 2]; 2],
    pub quad_error: f64,
}

impl FisherMatrix {
    /// Validate symmetry, finiteness and positive definiteness.
    pub fn new(entries: [[f64; 2]; 2], quad_error: f64) -> Result<Self> {
        let m = Self {
            entries,
            quad_error,
        };
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entry".into()));
        }
        let scale = entries[0][1].abs().max(entries[0][0].abs()).max(1e-300);
        if (entries[0][1] - entries[1][0]).abs() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite("asymmetric matrix".into()));
        }
        m.cholesky()?;
        Ok(m)
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.entries[0][0],
            self.entries[0][1],
            self.entries[1][0],
            self.entries[1][1],
        )
    }

    /// Lower Cholesky factor; pivots below `1e-12` of the diagonal scale fail.
    pub fn cholesky(&self) -> Result<Matrix2<f64>> {
        cholesky2(&self.matrix())
    }

    /// `I₁₁ − I₁₂²/I₂₂`, the information on `H` with `σ²` profiled out.
    pub fn schur_hurst(&self) -> f64 {
        let e = &self.entries;
        e[0][0] - e[0][1] * e[0][1] / e[1][1]
    }
}

/// Lower Cholesky factor of a symmetric 2×2 matrix with pivot tolerance 1e-12.
pub fn cholesky2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let scale = m[(0, 0)].abs().max(m[(1, 1)].abs());
    let tol = 1e-12 * scale;
    let a = m[(0, 0)];
    if !(a > tol) {
        return Err(Error::NotPositiveDefinite(format!("first pivot {a:e}")));
    }
    let l11 = a.sqrt();
    let l21 = m[(1, 0)] / l11;
    let d = m[(1, 1)] - l21 * l21;
    if !(d > tol) {
        return Err(Error::NotPositiveDefinite(format!("second pivot {d:e}")));
    }
    Ok(Matrix2::new(l11, 0.0, l21, d.sqrt()))
}

/// Fisher information `(1/4π) ∫ ∇ log f ∇ᵀ log f dλ` with `f = ε + K̂_θ`.
///
/// The integral is folded onto `(0, ∞)`, mapped by `λ = eᵘ`, and split into
/// an adaptive middle part plus closed-form leading-order tails.
pub fn fisher_information(theta: &Theta, eps: NoiseLevel, quad: &QuadConfig) -> Result<FisherMatrix> {
    let h = theta.hurst();
    let s2 = theta.sigma2();
    let e = eps.value();
    let a = a_constant(h)?;
    let da = a_constant_derivative(h);
    let p = 1.0 - 2.0 * h;

    // Low end: K̂ dominates once (ε/σ²a) λ^{2H−1} < x_cut.
    let x_cut = quad.tail_cut.max(1e-300).sqrt().min(1e-6);
    let u_lo_switch = (x_cut * s2 * a / e).ln() / (2.0 * h - 1.0);
    let u_lo = u_lo_switch.min(-(1.0 / quad.tail_cut.max(1e-300)).ln() * 0.5 - 10.0);
    let u_lo = u_lo.min(-40.0);
    // High end: K̂/ε < x_cut.
    let u_hi = (x_cut * e / (s2 * a)).ln() / p;
    let u_hi = u_hi.max(1.0);

    let integrand = |u: f64| {
        let g = grad_terms(h, s2, a, da, e, u);
        let w = u.exp();
        [g[0] * g[0] * w, g[0] * g[1] * w, g[1] * g[1] * w]
    };
    let q = Adaptive::new(quad.rel_tol, 0.0, quad.max_panels);
    let span = (u_hi - u_lo).ceil() as usize;
    let mid = q.integrate(integrand, u_lo, u_hi, span.max(8))?;

    // Lower tail: ∇ log f ≈ (a'/a − 2u, 1/σ²).
    let c = da / a;
    let eu = u_lo.exp();
    let m0 = eu;
    let m1 = (u_lo - 1.0) * eu;
    let m2 = (u_lo * u_lo - 2.0 * u_lo + 2.0) * eu;
    let low = [
        c * c * m0 - 4.0 * c * m1 + 4.0 * m2,
        (c * m0 - 2.0 * m1) / s2,
        m0 / (s2 * s2),
    ];

    // Upper tail: ∇ log f ≈ (σ²/ε) λ^p (a' − 2a u, a/σ²), integrand ∝ e^{−κu}.
    let kappa = 4.0 * h - 3.0;
    let ek = (-kappa * u_hi).exp();
    let n0 = ek / kappa;
    let n1 = ek * (u_hi / kappa + 1.0 / (kappa * kappa));
    let n2 = ek * (u_hi * u_hi / kappa + 2.0 * u_hi / (kappa * kappa) + 2.0 / kappa.powi(3));
    let r = s2 / e;
    let high = [
        r * r * (da * da * n0 - 4.0 * a * da * n1 + 4.0 * a * a * n2),
        r * (a / e) * (da * n0 - 2.0 * a * n1),
        (a / e) * (a / e) * n0,
    ];

    let norm = 1.0 / (2.0 * PI);
    let v: Vec<f64> = (0..3).map(|k| norm * (mid.value[k] + low[k] + high[k])).collect();
    FisherMatrix::new([[v[0], v[1]], [v[1], v[2]]], norm * mid.error)
}

/// Fisher-information integrand over a finite frequency window `[lo, hi]`
/// (both positive), without tail corrections.
pub fn fisher_information_window(
    theta: &Theta,
    eps: NoiseLevel,
    lo: f64,
    hi: f64,
    quad: &QuadConfig,
) -> Result<[[f64; 2]; 2]> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("bad frequency window [{lo}, {hi}]")));
    }
    let h = theta.hurst();
    let s2 = theta.sigma2();
    let a = a_constant(h)?;
    let da = a_constant_derivative(h);
    let e = eps.value();
    let integrand = |u: f64| {
        let g = grad_terms(h, s2, a, da, e, u);
        let w = u.exp();
        [g[0] * g[0] * w, g[0] * g[1] * w, g[1] * g[1] * w]
    };
    let q = Adaptive::new(quad.rel_tol, 0.0, quad.max_panels);
    let (a0, b0) = (lo.ln(), hi.ln());
    let r = q.integrate(integrand, a0, b0, ((b0 - a0).ceil() as usize).max(8))?;
    let n = 1.0 / (2.0 * PI);
    Ok([
        [n * r.value[0], n * r.value[1]],
        [n * r.value[1], n * r.value[2]],
    ])
}

/// Information per unit time carried by the increments sampled on a grid of
/// step `dt`, from the aliased increment spectrum
/// `f_dt(ω) ∝ Σ_k f((ω + 2πk)/dt) / (ω + 2πk)²`, `ω ∈ (−π, π]`.
///
/// Tends to [`fisher_information`] as `dt → 0`, but slowly: the `H` entry
/// loses the mass of the integrand above the Nyquist frequency `π/dt`.
pub fn fisher_information_sampled(
    theta: &Theta,
    eps: NoiseLevel,
    dt: f64,
    quad: &QuadConfig,
) -> Result<FisherMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt {dt} must be positive")));
    }
    let h = theta.hurst();
    let s2 = theta.sigma2();
    let e = eps.value();
    let a = a_constant(h)?;
    let da = a_constant_derivative(h);
    let p = 1.0 + 2.0 * h;
    let ln_dt = dt.ln();
    const K: i64 = 200;
    // Σ_k |ω + 2πk|^{−p} and Σ_k |ω + 2πk|^{−p} log|ω + 2πk|, by direct
    // summation for |k| ≤ K and a midpoint-rule integral beyond.
    let sums = |w: f64| -> (f64, f64) {
        let (mut s0, mut s1) = (0.0, 0.0);
        for k in -K..=K {
            let x = (w + 2.0 * PI * k as f64).abs();
            let v = x.powf(-p);
            s0 += v;
            s1 += v * x.ln();
        }
        for start in [2.0 * PI * (K as f64 + 0.5) + w, 2.0 * PI * (K as f64 + 0.5) - w] {
            let m = 2.0 * h;
            let t0 = start.powf(-m);
            s0 += t0 / m / (2.0 * PI);
            s1 += t0 * (start.ln() / m + 1.0 / (m * m)) / (2.0 * PI);
        }
        (s0, s1)
    };
    let integrand = |u: f64| {
        let w = u.exp();
        let (s0, s1) = sums(w);
        let scale = dt.powf(p);
        // λ = |ω + 2πk|/dt, so λ^{−p} = dt^p |·|^{−p} and log λ = log|·| − log dt.
        let lam_p = scale * s0;
        let lam_p_log = scale * (s1 - ln_dt * s0);
        let white = e * dt * dt / (4.0 * (0.5 * w).sin().powi(2));
        let d = white + s2 * a * lam_p;
        let gh = s2 * (da * lam_p - 2.0 * a * lam_p_log) / d;
        let gs = a * lam_p / d;
        [gh * gh * w, gh * gs * w, gs * gs * w]
    };
    let q = Adaptive::new(quad.rel_tol, 0.0, quad.max_panels);
    let r = q.integrate(integrand, -60.0, PI.ln(), 64)?;
    let n = 1.0 / (2.0 * PI * dt);
    let v = r.value.map(|x| x * n);
    FisherMatrix::new([[v[0], v[1]], [v[1], v[2]]], n * r.error)
}

/// `Λ(z) = ε + (σ²/2) Γ(2H+1) (z^{1−2H} + (−z)^{1−2H})` with principal powers.
pub fn lambda_complex(theta: &Theta, eps: NoiseLevel, z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Singular("z = 0"));
    }
    let h = theta.hurst();
    let p = 1.0 - 2.0 * h;
    let c = 0.5 * theta.sigma2() * gamma(2.0 * h + 1.0);
    Ok(eps.value() + c * (z.powf(p) + (-z).powf(p)))
}

/// Boundary value `Λ⁺(τ)` from the upper half-plane.
pub fn lambda_plus(theta: &Theta, eps: NoiseLevel, tau: f64) -> Result<Complex64> {
    if tau == 0.0 {
        return Err(Error::Singular("tau = 0"));
    }
    let h = theta.hurst();
    let phase = (h - 0.5) * PI * tau.signum();
    let mag = theta.sigma2() * a_constant(h)? * tau.abs().powf(1.0 - 2.0 * h);
    Ok(eps.value() + mag * Complex64::from_polar(1.0, phase))
}

/// Boundary value `Λ⁻(τ) = conj Λ⁺(τ)`.
pub fn lambda_minus(theta: &Theta, eps: NoiseLevel, tau: f64) -> Result<Complex64> {
    Ok(lambda_plus(theta, eps, tau)?.conj())
}

#[derive(Clone, Copy)]
struct AlphaParts {
    num: f64,
    cos_part: f64,
    eps: f64,
    q: f64,
}

impl AlphaParts {
    fn new(theta: &Theta, eps: f64) -> Result<Self> {
        let h = theta.hurst();
        let sa = theta.sigma2() * a_constant(h)?;
        let phi = (h - 0.5) * PI;
        Ok(Self {
            num: sa * phi.sin(),
            cos_part: sa * phi.cos(),
            eps,
            q: 2.0 * h - 1.0,
        })
    }

    fn alpha(&self, tau: f64) -> f64 {
        let d = self.eps * tau.abs().powf(self.q) + self.cos_part;
        (self.num / d).atan() * tau.signum()
    }

    fn alpha_prime(&self, tau: f64) -> f64 {
        let t = tau.abs();
        let d = self.eps * t.powf(self.q) + self.cos_part;
        let dd = self.eps * self.q * t.powf(self.q - 1.0);
        -self.num * dd / (d * d + self.num * self.num)
    }
}

/// `α(τ) = arg Λ⁺(τ)`, principal branch; odd and decreasing on each half-line.
pub fn alpha(theta: &Theta, eps: NoiseLevel, tau: f64) -> Result<f64> {
    if tau == 0.0 {
        return Err(Error::Singular("tau = 0"));
    }
    Ok(AlphaParts::new(theta, eps.value())?.alpha(tau))
}

/// Analytic derivative `α′(τ)`; even in `τ`.
pub fn alpha_prime(theta: &Theta, eps: NoiseLevel, tau: f64) -> Result<f64> {
    if tau == 0.0 {
        return Err(Error::Singular("tau = 0"));
    }
    Ok(AlphaParts::new(theta, eps.value())?.alpha_prime(tau))
}

/// The limit `α(0+) = π(H − ½)`.
pub fn alpha_at_zero(theta: &Theta) -> f64 {
    PI * (theta.hurst() - 0.5)
}

/// Canonical solution `X_c(z) = exp((1/π) ∫₀^∞ α(τ)/(τ − z) dτ)` of the
/// homogeneous Hilbert problem, for `z ∉ [0, ∞)`.
pub fn x_canonical(theta: &Theta, eps: NoiseLevel, z: Complex64) -> Result<Complex64> {
    Ok(log_x_canonical(theta, eps, z)?.exp())
}

/// `log X_c(z)`, the Cauchy-type integral itself.
pub fn log_x_canonical(theta: &Theta, eps: NoiseLevel, z: Complex64) -> Result<Complex64> {
    let r = z.norm();
    if r == 0.0 || (z.re >= 0.0 && z.im.abs() <= 1e-8 * r.max(1.0)) {
        return Err(Error::PoleProximity(format!("{z}")));
    }
    let parts = AlphaParts::new(theta, eps.value())?;
    let h = theta.hurst();
    let alpha0 = alpha_at_zero(theta);

    let tau_lo = 1e-14 * r.min(1.0);
    let growth = (parts.cos_part.hypot(parts.num) / eps.value()).powf(1.0 / parts.q);
    let tau_hi = (1e9 * r.max(1.0)).max(1e6 * growth);

    // α is constant to O(τ^{2H−1}) on (0, τ_lo).
    let low = alpha0 * ((tau_lo - z).ln() - (-z).ln());

    // α(τ) ≈ (N/ε) τ^{1−2H} (1 − M τ^{1−2H}/ε) on (τ_hi, ∞).
    let ne = parts.num / eps.value();
    let me = parts.cos_part / eps.value();
    let high = ne
        * (tau_hi.powf(1.0 - 2.0 * h) / (2.0 * h - 1.0)
            + z * tau_hi.powf(-2.0 * h) / (2.0 * h)
            - me * tau_hi.powf(2.0 - 4.0 * h) / (4.0 * h - 2.0));

    let integrand = |u: f64| {
        let tau = u.exp();
        let v = parts.alpha(tau) * tau / (tau - z);
        [v.re, v.im]
    };
    let (a, b) = (tau_lo.ln(), tau_hi.ln());
    let q = Adaptive::new(1e-12, 1e-15, 20_000);
    let mid = q.integrate(integrand, a, b, 4 * (b - a).ceil() as usize)?;
    let total = low + Complex64::new(mid.value[0], mid.value[1]) + high;
    Ok(total / PI)
}

/// `h(τ) = exp(−(1/π) ∫₀^∞ α′(s) log|(τ+s)/(τ−s)| ds) · sin α(τ)` for `τ > 0`.
///
/// The logarithmic singularity at `s = τ` is integrable; both sides of it are
/// mapped with exponential substitutions that cluster nodes at `s = τ`.
pub fn h_function(theta: &Theta, eps: NoiseLevel, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("h requires tau > 0, got {tau}")));
    }
    let parts = AlphaParts::new(theta, eps.value())?;
    Ok(h_with(&parts, tau)?)
}

fn h_with(parts: &AlphaParts, tau: f64) -> Result<f64> {
    let q = Adaptive::new(1e-11, 1e-14, 20_000);
    // s ∈ (0, τ): s = τ(1 − e^{−v}); log|(τ+s)/(τ−s)| = log(2eᵛ − 1).
    let left = q.integrate(
        |v: f64| {
            if v == 0.0 {
                return [0.0];
            }
            let ev = (-v).exp();
            let s = tau * (-(-v).exp_m1());
            let lg = (2.0 / ev - 1.0).ln();
            [parts.alpha_prime(s) * lg * tau * ev]
        },
        0.0,
        45.0,
        16,
    )?;
    // s ∈ (τ, ∞): s = τ(1 + e^w); log|(τ+s)/(τ−s)| = log(1 + 2e^{−w}).
    let w_hi = 40.0 / parts.q.min(1.0) + 10.0;
    let right = q.integrate(
        |w: f64| {
            let ew = w.exp();
            let s = tau * (1.0 + ew);
            let lg = (2.0 * (-w).exp()).ln_1p();
            [parts.alpha_prime(s) * lg * tau * ew]
        },
        -45.0,
        w_hi,
        32,
    )?;
    let integral = left.value[0] + right.value[0];
    Ok((-integral / PI).exp() * parts.alpha(tau).sin())
}

/// Richardson extrapolation of `f(τ) = f₀ + c τ^q + …` to `τ → 0⁺`.
pub fn extrapolate_to_zero(f: impl Fn(f64) -> Result<f64>, tau: f64, q: f64) -> Result<f64> {
    let f1 = f(tau)?;
    let f2 = f(0.5 * tau)?;
    let r = 2f64.powf(q);
    Ok((r * f2 - f1) / (r - 1.0))
}

/// Frequency `(σ² a_H/ε)^{1/(2H−1)}` at which the fractional and white parts
/// of the spectrum balance; `α` and `h` depend on `τ` only through `τ/τ*`.
pub fn crossover_scale(theta: &Theta, eps: NoiseLevel) -> Result<f64> {
    let h = theta.hurst();
    Ok((theta.sigma2() * a_constant(h)? / eps.value()).powf(1.0 / (2.0 * h - 1.0)))
}

/// `h(0+)` by extrapolation in the leading exponent `2H − 1`.
pub fn h_at_zero(theta: &Theta, eps: NoiseLevel) -> Result<f64> {
    let q = 2.0 * theta.hurst() - 1.0;
    let tau = 1e-8 * crossover_scale(theta, eps)?;
    extrapolate_to_zero(|t| h_function(theta, eps, t), tau, q)
}

/// Asymptotic regime of the minimax analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// `T → ∞` with fixed noise.
    LargeTime { eps: NoiseLevel, horizon: f64 },
    /// `ε → 0`, both parameters unknown.
    SmallNoiseJoint { eps: NoiseLevel, horizon: f64 },
    /// `ε → 0`, `σ²` known.
    SmallNoiseHurst { eps: NoiseLevel, horizon: f64 },
    /// `ε → 0`, `H` known.
    SmallNoiseSigma { eps: NoiseLevel, horizon: f64 },
}

/// Local scaling of the LAN expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    Matrix(Matrix2<f64>),
    Scalar(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSchedule {
    pub regime: Regime,
    /// `φ` with `φᵀ (information) φ = Id` in matrix regimes.
    pub scaling: Scaling,
    /// `log ε⁻¹` in small-noise regimes, `1` otherwise.
    pub log_factor: f64,
    /// Per-parameter minimax rates `(H, σ²)` (inverse error scale).
    pub rates: [f64; 2],
    /// Information matrix entering the schedule (`I(θ,ε)` or `I(θ,1)`).
    pub information: FisherMatrix,
    /// Alternative joint scaling from the upper Cholesky factor.
    pub upper_scaling: Option<Matrix2<f64>>,
}

/// Shear `[[1, −2σ² log ε^{−γ}], [0, 1]]` of the small-noise scaling identities.
pub fn shear_matrix(theta: &Theta, eps: NoiseLevel) -> Matrix2<f64> {
    let l = theta.gamma_exponent() * (1.0 / eps.value()).ln();
    Matrix2::new(1.0, -2.0 * theta.sigma2() * l, 0.0, 1.0)
}

/// `ν(ε,θ)` of the Hessian scaling identity.
pub fn nu_matrix(theta: &Theta, eps: NoiseLevel) -> Matrix2<f64> {
    let l = theta.gamma_exponent() * (1.0 / eps.value()).ln();
    Matrix2::new(4.0 * theta.sigma2() * l * l, -2.0 * l, -2.0 * l, 0.0)
}

/// `M(ε,θ) = ε^{−1/(4H−2)} · shear`.
pub fn small_noise_m(theta: &Theta, eps: NoiseLevel) -> Matrix2<f64> {
    let pref = eps.value().powf(-1.0 / (4.0 * theta.hurst() - 2.0));
    shear_matrix(theta, eps) * pref
}

/// `J(θ) = √(T (I₁₁ − I₁₂²/I₂₂))` for `H`, and the `σ²` constant
/// `(H − ½)/σ² · J(θ)`, both from `I(θ, 1)`.
pub fn cor1_constants(theta: &Theta, info_unit: &FisherMatrix, horizon: f64) -> [f64; 2] {
    let j = (horizon * info_unit.schur_hurst()).sqrt();
    [j, (theta.hurst() - 0.5) / theta.sigma2() * j]
}

pub fn inverse_sqrt(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotPositiveDefinite("information".into()));
    }
    let d = Matrix2::from_diagonal(&Vector2::new(
        1.0 / eig.eigenvalues[0].sqrt(),
        1.0 / eig.eigenvalues[1].sqrt(),
    ));
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Local scalings `φ` and per-parameter minimax rates for each regime.
pub fn rate_schedule(regime: Regime, theta0: &Theta, quad: &QuadConfig) -> Result<RateSchedule> {
    let unit = NoiseLevel::new(1.0)?;
    match regime {
        Regime::LargeTime { eps, horizon } => {
            check_horizon(horizon)?;
            let info = fisher_information(theta0, eps, quad)?;
            let phi = inverse_sqrt(&(info.matrix() * horizon))?;
            let rt = horizon.sqrt();
            Ok(RateSchedule {
                regime,
                scaling: Scaling::Matrix(phi),
                log_factor: 1.0,
                rates: [rt, rt],
                information: info,
                upper_scaling: None,
            })
        }
        Regime::SmallNoiseJoint { eps, horizon } => {
            check_horizon(horizon)?;
            let info = fisher_information(theta0, unit, quad)?;
            let m = small_noise_m(theta0, eps);
            let a = m * info.matrix() * horizon * m.transpose();
            let a = 0.5 * (a + a.transpose());
            let lower = cholesky2(&a)?;
            let phi = lower
                .transpose()
                .try_inverse()
                .ok_or_else(|| Error::NotPositiveDefinite("scaling".into()))?;
            // Upper factor U Uᵀ = A from the Cholesky factor of the permuted matrix.
            let perm = Matrix2::new(0.0, 1.0, 1.0, 0.0);
            let lp = cholesky2(&(perm * a * perm))?;
            let upper = perm * lp * perm;
            let phi_upper = upper
                .transpose()
                .try_inverse()
                .ok_or_else(|| Error::NotPositiveDefinite("scaling".into()))?;
            Ok(RateSchedule {
                regime,
                scaling: Scaling::Matrix(phi),
                log_factor: (1.0 / eps.value()).ln(),
                rates: [upper[(0, 0)], lower[(1, 1)]],
                information: info,
                upper_scaling: Some(phi_upper),
            })
        }
        Regime::SmallNoiseHurst { eps, horizon } => {
            check_horizon(horizon)?;
            let info = fisher_information(theta0, unit, quad)?;
            let h = theta0.hurst();
            let lf = (1.0 / eps.value()).ln();
            let phi = eps.value().powf(1.0 / (4.0 * h - 2.0)) / lf * (h - 0.5) / theta0.sigma2()
                / (horizon * info.entries[1][1]).sqrt();
            Ok(RateSchedule {
                regime,
                scaling: Scaling::Scalar(phi),
                log_factor: lf,
                rates: [1.0 / phi, f64::NAN],
                information: info,
                upper_scaling: None,
            })
        }
        Regime::SmallNoiseSigma { eps, horizon } => {
            check_horizon(horizon)?;
            let info = fisher_information(theta0, unit, quad)?;
            let h = theta0.hurst();
            let phi = eps.value().powf(1.0 / (4.0 * h - 2.0)) / (horizon * info.entries[1][1]).sqrt();
            Ok(RateSchedule {
                regime,
                scaling: Scaling::Scalar(phi),
                log_factor: 1.0,
                rates: [f64::NAN, 1.0 / phi],
                information: info,
                upper_scaling: None,
            })
        }
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("horizon {t} must be positive")))
    }
}
