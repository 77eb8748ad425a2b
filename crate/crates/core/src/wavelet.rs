//! Wavelet energy estimators of `(H, σ²)` in the small-noise regime.
//!
//! The mother wavelet is tabulated through its exact dyadic cell integrals:
//! the refinement equation maps cell integrals at level `j − 1` to level `j`,
//! and the level-0 integrals solve a 3×3 eigenproblem. Coefficients of a
//! sampled path are Riemann–Stieltjes sums with cell-averaged weights taken
//! from the cumulative integral `Ψ(x) = ∫₀ˣ ψ`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{a_constant, fgn_autocovariance, SamplePath};
use crate::quad::Adaptive;

/// Minimum number of path samples inside one wavelet support.
pub const MIN_SAMPLES_PER_SUPPORT: f64 = 8.0;

/// Samples per support below which cell averaging visibly flattens the
/// energy of a rough path; the estimators probe no finer.
pub const RESOLVED_SAMPLES_PER_SUPPORT: f64 = 48.0;

/// Default lowest level `J̲` of the selector.
pub const DEFAULT_J_LOWER: u32 = 3;

/// Compactly supported mother wavelet tabulated on the dyadic grid `2^{−L}`.
#[derive(Debug, Clone)]
pub struct Wavelet {
    name: &'static str,
    lowpass: Vec<f64>,
    levels: u32,
    /// Integrals of `ψ` over the cells `[i, i+1)·2^{−L}`.
    cells: Vec<f64>,
    /// `Ψ(i·2^{−L})`, one entry more than `cells`.
    cumulative: Vec<f64>,
    /// Autocorrelation of the cell averages, lags `0..cells.len()`.
    autocorr: Vec<f64>,
    norm2: f64,
    moments: [f64; 2],
}

impl Wavelet {
    /// Daubechies wavelet with two vanishing moments, support `[0, 3]`.
    pub fn daubechies4(levels: u32) -> Result<Self> {
        let s3 = 3f64.sqrt();
        let d = 4.0 * SQRT_2;
        let h = vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
        Self::from_lowpass("daubechies4", h, levels)
    }

    /// Build from an orthonormal low-pass filter (sum `√2`).
    pub fn from_lowpass(name: &'static str, h: Vec<f64>, levels: u32) -> Result<Self> {
        if !(1..=20).contains(&levels) {
            return Err(Error::Domain(format!("cascade levels {levels} outside 1..=20")));
        }
        let taps = h.len();
        if taps < 2 {
            return Err(Error::Domain("filter needs at least two taps".into()));
        }
        let width = taps - 1;
        let g: Vec<f64> = (0..taps)
            .map(|n| if n % 2 == 0 { h[width - n] } else { -h[width - n] })
            .collect();

        let (mut integ, mut first) = level_zero(&h)?;
        for j in 1..levels {
            let (i_next, f_next) = refine(&h, &integ, &first, j);
            integ = i_next;
            first = f_next;
        }
        let (cells, psi_first) = refine(&g, &integ, &first, levels);

        let delta = (-(levels as f64)).exp2();
        let mut cumulative = Vec::with_capacity(cells.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for c in &cells {
            acc += c;
            cumulative.push(acc);
        }
        let m0: f64 = cells.iter().sum();
        let m1: f64 = psi_first.iter().sum();
        let norm2 = cells.iter().map(|c| c * c).sum::<f64>() / delta;
        let averages: Vec<f64> = cells.iter().map(|c| c / delta).collect();
        let autocorr = autocorrelation(&averages);
        let w = Self {
            name,
            lowpass: h,
            levels,
            cells,
            cumulative,
            autocorr,
            norm2,
            moments: [m0, m1],
        };
        if m0.abs() > 1e-8 || m1.abs() > 1e-8 {
            return Err(Error::Domain(format!(
                "wavelet moments ({m0:e}, {m1:e}) do not vanish"
            )));
        }
        if !(norm2 > 0.0) {
            return Err(Error::Domain("wavelet has zero norm".into()));
        }
        Ok(w)
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn support(&self) -> (f64, f64) {
        (0.0, (self.lowpass.len() - 1) as f64)
    }

    pub fn vanishing_moments(&self) -> usize {
        self.moments.iter().take_while(|m| m.abs() <= 1e-8).count()
    }

    /// `(∫ψ, ∫tψ)` from the exact cell tables.
    pub fn moments(&self) -> [f64; 2] {
        self.moments
    }

    /// `‖ψ‖²` of the tabulated (cell-averaged) wavelet.
    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    fn delta(&self) -> f64 {
        (-(self.levels as f64)).exp2()
    }

    /// Cell average of `ψ` on the table cell containing `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x < hi) {
            return 0.0;
        }
        let i = ((x / self.delta()) as usize).min(self.cells.len() - 1);
        self.cells[i] / self.delta()
    }

    /// `Ψ(x) = ∫₀ˣ ψ`, linear between table points.
    pub fn cumulative(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo || x >= hi {
            return 0.0;
        }
        let s = x / self.delta();
        let i = (s.floor() as usize).min(self.cells.len() - 1);
        let frac = s - i as f64;
        self.cumulative[i] + frac * self.cells[i]
    }

    /// Low-pass transfer function `m₀(ω) = 2^{−1/2} Σ h_n e^{−inω}`.
    fn m0(&self, w: f64) -> Complex64 {
        self.lowpass
            .iter()
            .enumerate()
            .map(|(n, h)| h * Complex64::from_polar(1.0, -(n as f64) * w))
            .sum::<Complex64>()
            * FRAC_1_SQRT_2
    }

    /// High-pass transfer function built from `g_n = (−1)^n h_{L−n}`.
    fn m1(&self, w: f64) -> Complex64 {
        let width = self.lowpass.len() - 1;
        (0..=width)
            .map(|n| {
                let g = if n % 2 == 0 { self.lowpass[width - n] } else { -self.lowpass[width - n] };
                g * Complex64::from_polar(1.0, -(n as f64) * w)
            })
            .sum::<Complex64>()
            * FRAC_1_SQRT_2
    }

    /// Fourier transform `ψ̂(λ)` from the infinite product.
    pub fn fourier(&self, lambda: f64) -> Complex64 {
        let mut phi = Complex64::new(1.0, 0.0);
        let mut w = lambda / 2.0;
        for _ in 0..80 {
            w /= 2.0;
            if w.abs() < 1e-18 {
                break;
            }
            phi *= self.m0(w);
        }
        self.m1(lambda / 2.0) * phi
    }
}

/// Level-0 cell integrals of `φ` and of `tφ`.
fn level_zero(h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let width = h.len() - 1;
    if width != 3 {
        return Err(Error::Domain(format!(
            "only four-tap filters are supported, got {}",
            h.len()
        )));
    }
    // I(k) = (√2/2) Σ_n h_n [I(2k−n) + I(2k+1−n)] for cells k = 0..3.
    let mut a = Matrix3::zeros();
    let mut b = Matrix3::zeros();
    let mut c = Vector3::zeros();
    for k in 0..3i64 {
        for (n, hn) in h.iter().enumerate() {
            let n = n as i64;
            for m in [2 * k - n, 2 * k + 1 - n] {
                if (0..3).contains(&m) {
                    a[(k as usize, m as usize)] += FRAC_1_SQRT_2 * hn;
                    b[(k as usize, m as usize)] += FRAC_1_SQRT_2 * hn * n as f64;
                }
            }
        }
    }
    let mut sys = a - Matrix3::identity();
    sys.set_row(2, &nalgebra::RowVector3::new(1.0, 1.0, 1.0));
    let integ = sys
        .lu()
        .solve(&Vector3::new(0.0, 0.0, 1.0))
        .ok_or(Error::Singular("scaling-function cell system"))?;
    // F(k) = ½ Σ A_km F(m) + ½ Σ B_km I(m).
    c += 0.5 * b * integ;
    let first = (Matrix3::identity() - 0.5 * a)
        .lu()
        .solve(&c)
        .ok_or(Error::Singular("scaling-function moment system"))?;
    Ok((integ.iter().copied().collect(), first.iter().copied().collect()))
}

/// Refine cell integrals of `φ` (and `tφ`) from level `j − 1` to level `j`
/// through the filter `f`.
fn refine(f: &[f64], integ: &[f64], first: &[f64], j: u32) -> (Vec<f64>, Vec<f64>) {
    let half = 1usize << (j - 1);
    let len = integ.len() * 2;
    let mut i_out = vec![0.0; len];
    let mut f_out = vec![0.0; len];
    for (k, (io, fo)) in i_out.iter_mut().zip(f_out.iter_mut()).enumerate() {
        for (n, fnn) in f.iter().enumerate() {
            let Some(src) = k.checked_sub(n * half) else { break };
            if src >= integ.len() {
                continue;
            }
            *io += FRAC_1_SQRT_2 * fnn * integ[src];
            *fo += 0.5 * FRAC_1_SQRT_2 * fnn * (first[src] + n as f64 * integ[src]);
        }
    }
    (i_out, f_out)
}

/// `A(m) = Σ_k x_k x_{k+m}` by zero-padded FFT.
fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    buf.iter().take(n).map(|v| v.re / size as f64).collect()
}

/// `c_H(ψ) = ∫∫ ψ(u)ψ(v) H(2H−1)|u−v|^{2H−2} du dv`.
///
/// `ψ` is replaced by its cell averages on the table grid, so the double
/// integral reduces to exact cell-pair integrals of the kernel, which are
/// the fractional Gaussian noise autocovariances at step `2^{−L}`.
pub fn c_constant(w: &Wavelet, h: f64) -> Result<f64> {
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::Domain(format!("c_H needs H in (1/2, 1), got {h}")));
    }
    let delta = w.delta();
    let mut total = 0.0;
    for (m, a) in w.autocorr.iter().enumerate() {
        let g = fgn_autocovariance(h, delta, m);
        total += if m == 0 { a * g } else { 2.0 * a * g };
    }
    Ok(total)
}

/// Spectral form `(1/π) ∫₀^∞ |ψ̂(λ)|² a_H λ^{1−2H} dλ`, an independent
/// evaluation of `c_H(ψ)`.
pub fn c_constant_spectral(w: &Wavelet, h: f64) -> Result<f64> {
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::Domain(format!("c_H needs H in (1/2, 1), got {h}")));
    }
    let ah = a_constant(h)?;
    let q = Adaptive::new(1e-9, 1e-13, 200_000);
    // Integrate in u = ln λ over [ln 1e-6, ln 2^16].
    let f = |u: f64| {
        let l = u.exp();
        [w.fourier(l).norm_sqr() * ah * l.powf(2.0 - 2.0 * h) / PI]
    };
    let r = q.integrate(f, (1e-6f64).ln(), 16.0 * std::f64::consts::LN_2, 256)?;
    Ok(r.value[0])
}

/// A sampled path seen on the unit window.
///
/// Time is rescaled by the horizon `T`, so the noise level becomes `εT` and
/// the fractional scale `σ²T^{2H}`.
#[derive(Debug, Clone, Copy)]
pub struct UnitWindow<'a> {
    pub increments: &'a [f64],
    /// Noise intensity on the unit window.
    pub eps: f64,
    /// Original horizon, used to map `σ²` back.
    pub horizon: f64,
}

impl<'a> UnitWindow<'a> {
    pub fn new(increments: &'a [f64], eps: f64, horizon: f64) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::Domain("empty increment sequence".into()));
        }
        if !(eps >= 0.0 && eps.is_finite()) || !(horizon > 0.0) {
            return Err(Error::Domain(format!("invalid window (ε = {eps}, T = {horizon})")));
        }
        Ok(Self {
            increments,
            eps,
            horizon,
        })
    }

    /// Borrow the increments of `path`; `ε` is rescaled by the horizon.
    pub fn from_path(path: &'a SamplePath, increments: &'a [f64]) -> Result<Self> {
        let t = path.horizon();
        Self::new(increments, path.eps.value() * t, t)
    }

    pub fn samples(&self) -> usize {
        self.increments.len()
    }
}

/// Weights `w_m = ∫_{cell m} ψ_{j,k}` over the unit-window sampling cells,
/// returned with the index of the first cell.
fn coeff_weights(w: &Wavelet, n: usize, j: u32, k: usize) -> Result<(usize, Vec<f64>)> {
    let scale = (j as f64).exp2();
    let (_, hi) = w.support();
    let samples = hi / scale * n as f64;
    if samples < MIN_SAMPLES_PER_SUPPORT {
        return Err(Error::LevelTooFine {
            level: j,
            samples: samples.floor() as usize,
        });
    }
    if (k as f64 + hi) > scale {
        return Err(Error::SupportOutsideWindow { level: j, shift: k });
    }
    let nf = n as f64;
    let first = ((k as f64 / scale) * nf).floor() as usize;
    let last = (((k as f64 + hi) / scale) * nf).ceil().min(nf) as usize;
    let amp = scale.sqrt().recip();
    let mut prev = amp * w.cumulative(scale * first as f64 / nf - k as f64);
    let mut out = Vec::with_capacity(last - first);
    for m in first..last {
        let cur = amp * w.cumulative(scale * (m + 1) as f64 / nf - k as f64);
        out.push(cur - prev);
        prev = cur;
    }
    Ok((first, out))
}

/// Noisy coefficient `d̃_{j,k}` and the discretized `‖ψ_{j,k}‖²` it carries.
fn coefficient(w: &Wavelet, win: &UnitWindow<'_>, j: u32, k: usize) -> Result<(f64, f64)> {
    let n = win.samples();
    let (first, weights) = coeff_weights(w, n, j, k)?;
    let nf = n as f64;
    let mut d = 0.0;
    let mut norm = 0.0;
    for (i, wm) in weights.iter().enumerate() {
        d += wm * nf * win.increments[first + i];
        norm += wm * wm * nf;
    }
    Ok((d, norm))
}

/// `d̃_{j,k} = ∫ ψ_{j,k} dX` on the unit window of `path`.
pub fn noisy_coeff(w: &Wavelet, path: &SamplePath, j: u32, k: usize) -> Result<f64> {
    let inc = path.increments();
    let win = UnitWindow::from_path(path, &inc)?;
    Ok(coefficient(w, &win, j, k)?.0)
}

/// `Q̂_j = Σ_{k < 2^{j−1}} (d̃²_{j,k} − ε‖ψ_{j,k}‖²)`.
///
/// The bias correction uses the norm of the sampled wavelet, which is the
/// exact noise variance of the computed coefficient.
pub fn energy_window(w: &Wavelet, win: &UnitWindow<'_>, j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::Domain("energy levels start at j = 1".into()));
    }
    let shifts = 1usize << (j - 1);
    let mut q = 0.0;
    for k in 0..shifts {
        let (d, norm) = coefficient(w, win, j, k)?;
        q += d * d - win.eps * norm;
    }
    Ok(q)
}

/// `Q̂_j` of a sample path.
pub fn energy_level(w: &Wavelet, path: &SamplePath, j: u32) -> Result<f64> {
    let inc = path.increments();
    let win = UnitWindow::from_path(path, &inc)?;
    energy_window(w, &win, j)
}

/// Finest level whose supports still hold enough samples for an unbiased energy.
pub fn finest_level(w: &Wavelet, samples: usize) -> u32 {
    let (_, hi) = w.support();
    let mut j = 1;
    while hi / (j as f64 + 1.0).exp2() * samples as f64 >= RESOLVED_SAMPLES_PER_SUPPORT
        && (j + 1) < 60
    {
        j += 1;
    }
    j
}

/// Components of `Q̂_j` for linear path decompositions `X = A + √ε B`:
/// returns `(Σd_A², 2Σd_A d_B, Σd_B², Σ‖ψ_{j,k}‖²)` so energies at any noise
/// level follow without recomputing coefficients.
pub fn energy_parts(w: &Wavelet, a: &[f64], b: &[f64], j: u32) -> Result<[f64; 4]> {
    if a.len() != b.len() {
        return Err(Error::Domain("component lengths differ".into()));
    }
    let wa = UnitWindow::new(a, 0.0, 1.0)?;
    let wb = UnitWindow::new(b, 0.0, 1.0)?;
    let shifts = 1usize << (j.max(1) - 1);
    let mut out = [0.0; 4];
    for k in 0..shifts {
        let (da, norm) = coefficient(w, &wa, j, k)?;
        let (db, _) = coefficient(w, &wb, j, k)?;
        out[0] += da * da;
        out[1] += 2.0 * da * db;
        out[2] += db * db;
        out[3] += norm;
    }
    Ok(out)
}

/// `Ĥ_j = 1 − ½ log₂(Q̂_{j+1}/Q̂_j)`.
pub fn estimate_h_level(qj: f64, qj1: f64) -> Result<f64> {
    if !(qj > 0.0) {
        return Err(Error::NonPositiveEnergy(0));
    }
    if !(qj1 > 0.0) {
        return Err(Error::NonPositiveEnergy(1));
    }
    Ok(1.0 - 0.5 * (qj1 / qj).log2())
}

/// `J_ε = [2 log₂ ε^{−1}]`.
pub fn max_level(eps: f64) -> i64 {
    (2.0 * (1.0 / eps).log2()).floor() as i64
}

/// Outcome of the level selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub level: u32,
    /// No level met the threshold.
    pub degraded: bool,
}

/// `J*_ε = max{J̲ ≤ j ≤ J_ε : Q̂_j ≥ 2^j ε}` over the supplied `(j, Q̂_j)`.
pub fn select_level(energies: &[(u32, f64)], eps: f64, j_lower: u32) -> Selection {
    let j_eps = max_level(eps);
    energies
        .iter()
        .filter(|(j, q)| *j >= j_lower && (*j as i64) <= j_eps && *q >= (*j as f64).exp2() * eps)
        .map(|(j, _)| *j)
        .max()
        .map_or(
            Selection {
                level: j_lower,
                degraded: true,
            },
            |level| Selection {
                level,
                degraded: false,
            },
        )
}

/// Diagnostic flags of a wavelet estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// No level met the selector threshold.
    pub degraded_selection: bool,
    /// The selected level had a nonpositive neighbour energy; a coarser one was used.
    pub fallback: bool,
    /// `Ĥ` left `(1/2, 1)`; `c_Ĥ` was evaluated at the nearest admissible value.
    pub hurst_outside: bool,
    /// `J_ε` exceeded the finest level the sampling supports.
    pub truncated: bool,
}

/// Point estimates with the selector trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub h_hat: f64,
    pub sigma2_hat: f64,
    pub selected_level: u32,
    /// `(j, Q̂_j)` for every probed level.
    pub energies: Vec<(u32, f64)>,
    pub diagnostics: Diagnostics,
    pub seed: Option<u64>,
}

/// Settings of the wavelet pipeline.
#[derive(Debug, Clone)]
pub struct WaveletEstimator {
    pub wavelet: Wavelet,
    pub j_lower: u32,
}

impl WaveletEstimator {
    pub fn new(wavelet: Wavelet, j_lower: u32) -> Result<Self> {
        if j_lower < 1 {
            return Err(Error::Domain("J_lower must be at least 1".into()));
        }
        Ok(Self { wavelet, j_lower })
    }

    pub fn daubechies4() -> Result<Self> {
        Self::new(Wavelet::daubechies4(12)?, DEFAULT_J_LOWER)
    }

    /// Levels probed for a window with `samples` increments and noise `eps`:
    /// `J̲ ..= min(J_ε, finest − 1) + 1`, so that every candidate has a neighbour.
    pub fn probe_range(&self, samples: usize, eps: f64) -> (u32, u32, bool) {
        let finest = finest_level(&self.wavelet, samples);
        let j_eps = max_level(eps).max(self.j_lower as i64) as u32;
        let top = j_eps.min(finest.saturating_sub(1)).max(self.j_lower);
        (self.j_lower, top + 1, j_eps > top)
    }

    /// All energies `Q̂_j` over the probe range.
    pub fn energies(&self, win: &UnitWindow<'_>) -> Result<(Vec<(u32, f64)>, bool)> {
        let (lo, hi, truncated) = self.probe_range(win.samples(), win.eps);
        let mut out = Vec::with_capacity((hi - lo + 1) as usize);
        for j in lo..=hi {
            out.push((j, energy_window(&self.wavelet, win, j)?));
        }
        Ok((out, truncated))
    }

    /// Estimates from precomputed energies on the unit window.
    pub fn from_energies(
        &self,
        energies: Vec<(u32, f64)>,
        eps: f64,
        horizon: f64,
        truncated: bool,
    ) -> Result<EstimateReport> {
        let top = energies.iter().map(|(j, _)| *j).max().unwrap_or(self.j_lower);
        let candidates: Vec<(u32, f64)> = energies.iter().copied().filter(|(j, _)| *j < top).collect();
        let sel = select_level(&candidates, eps, self.j_lower);
        let q = |j: u32| energies.iter().find(|(l, _)| *l == j).map(|(_, v)| *v);
        let mut diagnostics = Diagnostics {
            degraded_selection: sel.degraded,
            truncated,
            ..Diagnostics::default()
        };
        // Coarser levels first, then finer ones below the top probe.
        let order = (self.j_lower..=sel.level).rev().chain(sel.level + 1..top);
        let mut found = None;
        for j in order {
            if let (Some(a), Some(b)) = (q(j), q(j + 1)) {
                if let Ok(hh) = estimate_h_level(a, b) {
                    found = Some((j, hh));
                    break;
                }
            }
        }
        let (level, h_raw) = found.ok_or(Error::NonPositiveEnergy(sel.level))?;
        diagnostics.fallback = level != sel.level;
        let h_hat = h_raw;
        diagnostics.hurst_outside = !(h_hat > HURST_LO && h_hat < HURST_HI);
        let c = c_constant(&self.wavelet, h_hat.clamp(HURST_LO, HURST_HI))?;
        let qj = q(level).expect("selected energy");
        let lf = level as f64;
        let sigma2_unit = 2.0 / c * qj / (lf * (2.0 - 2.0 * h_hat)).exp2();
        Ok(EstimateReport {
            h_hat,
            sigma2_hat: sigma2_unit / horizon.powf(2.0 * h_hat),
            selected_level: level,
            energies,
            diagnostics,
            seed: None,
        })
    }

    /// `(Ĥ, σ̂²)` with `Ĥ = Ĥ_{J*_ε}` and `σ̂² = (2/c_Ĥ) Q̂_{J*}/2^{J*(2−2Ĥ)}`.
    pub fn estimate_window(&self, win: &UnitWindow<'_>) -> Result<EstimateReport> {
        let (energies, truncated) = self.energies(win)?;
        self.from_energies(energies, win.eps, win.horizon, truncated)
    }

    pub fn estimate_joint(&self, path: &SamplePath) -> Result<EstimateReport> {
        let inc = path.increments();
        let win = UnitWindow::from_path(path, &inc)?;
        let mut r = self.estimate_window(&win)?;
        r.seed = Some(path.seed);
        Ok(r)
    }

    /// `j_ε = [(1/(2H−1)) log₂ ε^{−1}]`, clamped to the levels the sampling supports.
    pub fn known_h_level(&self, h: f64, eps: f64, samples: usize) -> (u32, bool) {
        let raw = ((1.0 / eps).log2() / (2.0 * h - 1.0)).floor();
        let finest = finest_level(&self.wavelet, samples);
        let clamped = raw.clamp(1.0, finest as f64) as u32;
        (clamped, clamped as f64 != raw)
    }

    /// `σ̃² = (2/c_H) Q̂_{j_ε}/2^{j_ε(2−2H)}` with `H` known.
    pub fn sigma2_known_h(&self, win: &UnitWindow<'_>, h: f64) -> Result<(f64, u32, bool)> {
        let (j, clamped) = self.known_h_level(h, win.eps, win.samples());
        let qj = energy_window(&self.wavelet, win, j)?;
        Ok((self.sigma2_from_level(qj, j, h, win.horizon)?, j, clamped))
    }

    /// `σ̃²` from a given energy at level `j`.
    pub fn sigma2_from_level(&self, qj: f64, j: u32, h: f64, horizon: f64) -> Result<f64> {
        let c = c_constant(&self.wavelet, h)?;
        let unit = 2.0 / c * qj / (j as f64 * (2.0 - 2.0 * h)).exp2();
        Ok(unit / horizon.powf(2.0 * h))
    }

    /// `H̃` with `σ²` known: solves `Q̂_{J*} = (σ²T^{2H}/2) c_Ĥ 2^{J*(2−2H)}`
    /// for `H`; on the unit horizon this is
    /// `1 − (1/(2J*)) log₂((2/(σ² c_Ĥ)) Q̂_{J*})`.
    pub fn hurst_known_sigma(&self, joint: &EstimateReport, sigma2: f64, horizon: f64) -> Result<f64> {
        if !(sigma2 > 0.0) {
            return Err(Error::Domain(format!("σ² must be positive, got {sigma2}")));
        }
        let level = joint.selected_level;
        let qj = joint
            .energies
            .iter()
            .find(|(j, _)| *j == level)
            .map(|(_, v)| *v)
            .ok_or(Error::NonPositiveEnergy(level))?;
        if !(qj > 0.0) {
            return Err(Error::NonPositiveEnergy(level));
        }
        let c = c_constant(&self.wavelet, joint.h_hat.clamp(HURST_LO, HURST_HI))?;
        let jf = level as f64;
        let lt = horizon.log2();
        Ok((2.0 * jf - (2.0 * qj / (sigma2 * c)).log2()) / (2.0 * (jf - lt)))
    }
}

/// Which parameter is known to [`estimate_single`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Known {
    Hurst(f64),
    Sigma2(f64),
}

/// Single-parameter estimator: `σ̃²` if `H` is known, `H̃` if `σ²` is known.
pub fn estimate_single(est: &WaveletEstimator, path: &SamplePath, known: Known) -> Result<f64> {
    let inc = path.increments();
    let win = UnitWindow::from_path(path, &inc)?;
    match known {
        Known::Hurst(h) => Ok(est.sigma2_known_h(&win, h)?.0),
        Known::Sigma2(s) => {
            let joint = est.estimate_window(&win)?;
            est.hurst_known_sigma(&joint, s, win.horizon)
        }
    }
}

const HURST_LO: f64 = 0.5 + 1e-6;
const HURST_HI: f64 = 1.0 - 1e-6;

#[cfg(test)]
mod tests {
    use super::*;

    fn d4() -> Wavelet {
        Wavelet::daubechies4(12).unwrap()
    }

    #[test]
    fn tables_have_vanishing_moments_and_unit_norm() {
        let w = d4();
        let m = w.moments();
        assert!(m[0].abs() < 1e-12 && m[1].abs() < 1e-12, "{m:?}");
        assert_eq!(w.vanishing_moments(), 2);
        assert!((w.norm2() - 1.0).abs() < 2e-3, "{}", w.norm2());
        assert_eq!(w.support(), (0.0, 3.0));
        assert_eq!(w.cumulative(3.5), 0.0);
        assert!(w.cumulative(1.0).abs() > 0.0);
    }

    #[test]
    fn norm_converges_with_levels() {
        let a = Wavelet::daubechies4(8).unwrap().norm2();
        let b = Wavelet::daubechies4(12).unwrap().norm2();
        assert!((b - 1.0).abs() < (a - 1.0).abs());
    }

    #[test]
    fn fourier_product_is_normalized() {
        let w = d4();
        assert!(w.fourier(0.0).norm() < 1e-14);
        // Parseval: (1/π)∫₀^∞ |ψ̂|² = ‖ψ‖² = 1 for the exact wavelet.
        let q = Adaptive::new(1e-8, 1e-12, 100_000);
        let r = q
            .integrate(|u: f64| { let l = u.exp(); [w.fourier(l).norm_sqr() * l / PI] }, -10.0, 14.0, 128)
            .unwrap();
        assert!((r.value[0] - 1.0).abs() < 1e-3, "{}", r.value[0]);
    }

    #[test]
    fn c_constant_matches_spectral_form() {
        let w = d4();
        for h in [0.8, 0.85, 0.95] {
            let a = c_constant(&w, h).unwrap();
            let b = c_constant_spectral(&w, h).unwrap();
            assert!(a > 0.0);
            assert!(((a - b) / b).abs() < 1e-4, "H={h}: {a} vs {b}");
        }
        assert!(c_constant(&w, 0.5).is_err());
    }

    #[test]
    fn level_estimator_inverts_ratio() {
        assert!((estimate_h_level(1.0, 0.3f64.exp2()).unwrap() - 0.85).abs() < 1e-15);
        assert_eq!(estimate_h_level(2.0, 2.0).unwrap(), 1.0);
        assert_eq!(estimate_h_level(1.0, 2.0).unwrap(), 0.5);
        assert!(estimate_h_level(-1.0, 2.0).is_err());
        assert!(estimate_h_level(1.0, 0.0).is_err());
    }

    #[test]
    fn selector_edges() {
        let e: Vec<(u32, f64)> = (3..10).map(|j| (j, -1.0)).collect();
        assert_eq!(select_level(&e, 1e-3, 3), Selection { level: 3, degraded: true });
        let e: Vec<(u32, f64)> = (3..10).map(|j| (j, 1.0)).collect();
        assert_eq!(select_level(&e, 1e-12, 3).level, 9);
        let s1 = select_level(&e, 1e-2, 3).level;
        let s2 = select_level(&e, 1e-3, 3).level;
        assert!(s2 >= s1);
    }

    #[test]
    fn zero_path_has_zero_coefficients() {
        let w = d4();
        let z = vec![0.0; 1024];
        let win = UnitWindow::new(&z, 0.0, 1.0).unwrap();
        assert_eq!(coefficient(&w, &win, 5, 3).unwrap().0, 0.0);
    }

    #[test]
    fn coefficient_errors() {
        let w = d4();
        let z = vec![1.0; 64];
        let win = UnitWindow::new(&z, 0.0, 1.0).unwrap();
        assert!(matches!(coefficient(&w, &win, 5, 0), Err(Error::LevelTooFine { .. })));
        assert!(matches!(
            coefficient(&w, &win, 3, 6),
            Err(Error::SupportOutsideWindow { .. })
        ));
        // Linear path: ∫ψ_{jk} dt = 0.
        let (d, _) = coefficient(&w, &win, 3, 2).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn expected_energies_recover_hurst() {
        let w = d4();
        let h = 0.85;
        let c = c_constant(&w, h).unwrap();
        let q = |j: f64| 0.5 * c * (j * (2.0 - 2.0 * h)).exp2();
        assert!((estimate_h_level(q(6.0), q(7.0)).unwrap() - h).abs() < 1e-12);
    }
}
