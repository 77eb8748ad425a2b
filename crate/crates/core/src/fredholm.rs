//! Nyström solution of `ε g(t,s) + ∫₀ᵗ K(r−s) g(t,r) dr = K(s)`, the
//! auxiliary `p`/`q` equations, and numerical checks of the scaling and
//! differential identities satisfied by `g`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{kernel_k, NoiseLevel, Theta};
use crate::spectral::{h_function, shear_matrix, nu_matrix};
use crate::toeplitz::{levinson_family, toeplitz_matvec, Packed};

/// Plug-back residual tolerance, relative to `max_i K(s_i)`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Condition-number ceiling for the dense solve.
pub const MAX_CONDITION: f64 = 1e12;

/// Solver settings exposed through configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FredholmConfig {
    pub n_nodes: usize,
    pub residual_tol: f64,
}

impl Default for FredholmConfig {
    fn default() -> Self {
        Self {
            n_nodes: 256,
            residual_tol: RESIDUAL_TOL,
        }
    }
}

/// Collocation solution on the uniform midpoint grid `s_i = (i + ½) t/n`.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub t: f64,
    pub nodes: Vec<f64>,
    /// Product-integration weights `w_{|i−j|} = ∫_{cell j} K(r − s_i) dr`.
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub theta: Theta,
    pub eps: NoiseLevel,
    /// Relative plug-back residual.
    pub residual: f64,
    /// 1-norm condition estimate of `εI + W`.
    pub condition: f64,
}

impl GridSolution {
    pub fn cell(&self) -> f64 {
        self.t / self.nodes.len() as f64
    }

    /// Linear interpolation between nodes, constant beyond the outer nodes.
    pub fn interpolate(&self, s: f64) -> f64 {
        interpolate_midpoint(&self.values, self.cell(), s)
    }

    /// `ĝ_t(z) = ∫₀ᵗ e^{−zs} g(t,s) ds` for the piecewise-constant solution.
    pub fn laplace(&self, z: Complex64) -> Complex64 {
        laplace_piecewise(&self.values, self.cell(), z)
    }
}

/// Interpolate values given at `(i + ½) h`.
pub fn interpolate_midpoint(values: &[f64], h: f64, s: f64) -> f64 {
    let n = values.len();
    let x = s / h - 0.5;
    if x <= 0.0 || n == 1 {
        return values[0];
    }
    let i = x.floor() as usize;
    if i + 1 >= n {
        return values[n - 1];
    }
    let f = x - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// `Σ g_i ∫_{ih}^{(i+1)h} e^{−zs} ds`.
pub fn laplace_piecewise(values: &[f64], h: f64, z: Complex64) -> Complex64 {
    let cell = if z.norm() * h < 1e-8 {
        Complex64::new(h, 0.0) * (1.0 - z * h * 0.5)
    } else {
        (1.0 - (-z * h).exp()) / z
    };
    let step = (-z * h).exp();
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &g in values {
        acc += phase * g;
        phase *= step;
    }
    acc * cell
}

fn antiderivative(h2: f64, x: f64) -> f64 {
    x.signum() * x.abs().powf(h2)
}

/// Toeplitz generator of the product-integration weights on cells of width `h`.
pub fn kernel_weights(theta: &Theta, h: f64, n: usize) -> Vec<f64> {
    let hh = theta.hurst();
    let q = 2.0 * hh - 1.0;
    let c = theta.sigma2() * hh;
    (0..n)
        .map(|m| {
            let m = m as f64;
            c * (antiderivative(q, (m + 0.5) * h) - antiderivative(q, (m - 0.5) * h))
        })
        .collect()
}

fn rhs(theta: &Theta, h: f64, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|i| kernel_k(theta, (i as f64 + 0.5) * h)).collect()
}

fn check_args(t: f64, n: usize, min_nodes: usize) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("horizon {t} must be positive")));
    }
    if n < min_nodes {
        return Err(Error::Domain(format!("need at least {min_nodes} nodes, got {n}")));
    }
    Ok(())
}

/// Nyström solve with midpoint collocation and dense LU.
pub fn solve_g(theta: &Theta, eps: NoiseLevel, t: f64, n_nodes: usize) -> Result<GridSolution> {
    solve_g_with(
        theta,
        eps,
        t,
        &FredholmConfig {
            n_nodes,
            ..Default::default()
        },
    )
}

pub fn solve_g_with(theta: &Theta, eps: NoiseLevel, t: f64, cfg: &FredholmConfig) -> Result<GridSolution> {
    let n = cfg.n_nodes;
    check_args(t, n, 16)?;
    let h = t / n as f64;
    let mut col = kernel_weights(theta, h, n);
    let weights = col.clone();
    col[0] += eps.value();
    let b = rhs(theta, h, n)?;
    let a = DMatrix::from_fn(n, n, |i, j| col[i.abs_diff(j)]);
    let lu = a.lu();
    let x = lu
        .solve(&DVector::from_column_slice(&b))
        .ok_or(Error::Singular("Nyström matrix"))?;
    let norm1: f64 = col[0] + 2.0 * col[1..].iter().map(|v| v.abs()).sum::<f64>();
    let condition = norm1 * hager_inverse_norm(n, |v| lu.solve(v));
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let values: Vec<f64> = x.iter().copied().collect();
    let residual = plug_back(&col, &values, &b);
    if !(residual <= cfg.residual_tol) {
        return Err(Error::NonConvergence(format!("plug-back residual {residual:e}")));
    }
    Ok(GridSolution {
        t,
        nodes: (0..n).map(|i| (i as f64 + 0.5) * h).collect(),
        weights,
        values,
        theta: *theta,
        eps,
        residual,
        condition,
    })
}

fn plug_back(col: &[f64], x: &[f64], b: &[f64]) -> f64 {
    let ax = toeplitz_matvec(col, x);
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ax.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

// Hager's estimate of ‖A⁻¹‖₁ for symmetric A.
fn hager_inverse_norm(n: usize, solve: impl Fn(&DVector<f64>) -> Option<DVector<f64>>) -> f64 {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let Some(y) = solve(&x) else { return f64::INFINITY };
        est = y.iter().map(|v| v.abs()).sum();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let Some(z) = solve(&xi) else { return f64::INFINITY };
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bj, bm), (j, v)| if v.abs() > bm { (j, v.abs()) } else { (bj, bm) });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    est
}

/// Solutions for every horizon `t_k = k·h`, `k = 1..=n`, on the common cell
/// width `h`, from one Levinson pass over the nested Toeplitz blocks.
#[derive(Debug, Clone)]
pub struct GFamily {
    pub cell: f64,
    pub theta: Theta,
    pub eps: NoiseLevel,
    solutions: Packed,
}

impl GFamily {
    pub fn new(theta: &Theta, eps: NoiseLevel, cell: f64, n: usize) -> Result<Self> {
        check_args(cell, n, 1)?;
        let mut col = kernel_weights(theta, cell, n);
        col[0] += eps.value();
        let b = rhs(theta, cell, n)?;
        Ok(Self {
            cell,
            theta: *theta,
            eps,
            solutions: levinson_family(&col, &b)?,
        })
    }

    pub fn len(&self) -> usize {
        self.solutions.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `g(k·h, (i + ½)h)`, `i < k`.
    pub fn values(&self, k: usize) -> &[f64] {
        self.solutions.row(k - 1)
    }
}

fn interior(nodes: &[f64], t: f64, lo: f64, hi: f64) -> Vec<usize> {
    (0..nodes.len())
        .filter(|&i| nodes[i] >= lo * t && nodes[i] <= hi * t)
        .collect()
}

fn max_rel(lhs: &[f64], rhs: &[f64]) -> f64 {
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = lhs.iter().zip(rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn scale_factor(theta: &Theta, eps: NoiseLevel) -> f64 {
    eps.value().powf(-theta.gamma_exponent())
}

/// `g_ε(t,s) = ε^{−γ} g₁(tε^{−γ}, sε^{−γ})` on matched grids; returns the
/// maximum relative discrepancy over nodes in `[0.1t, 0.9t]`.
pub fn scaling_check(theta: &Theta, eps: NoiseLevel, t: f64, n_nodes: usize) -> Result<f64> {
    let c = scale_factor(theta, eps);
    let left = solve_g(theta, eps, t, n_nodes)?;
    let right = solve_g(theta, NoiseLevel::new(1.0)?, c * t, n_nodes)?;
    let idx = interior(&left.nodes, t, 0.1, 0.9);
    let l: Vec<f64> = idx.iter().map(|&i| left.values[i]).collect();
    let r: Vec<f64> = idx.iter().map(|&i| c * right.values[i]).collect();
    Ok(max_rel(&l, &r))
}

/// Values at fixed node indices under a perturbation of `θ`.
fn solve_at(theta: &Theta, eps: NoiseLevel, t: f64, n: usize, dh: f64, ds: f64) -> Result<Vec<f64>> {
    Ok(solve_g(&theta.offset(dh, ds)?, eps, t, n)?.values)
}

/// Gradient and Hessian of `g` in `θ` by central differences with steps
/// `(δ_H, δ_σ²)`; returns `(∇g, ∇²g)` per node.
fn theta_derivatives(
    theta: &Theta,
    eps: NoiseLevel,
    t: f64,
    n: usize,
    step: [f64; 2],
) -> Result<(Vec<[f64; 2]>, Vec<[[f64; 2]; 2]>)> {
    let [a, b] = step;
    let g0 = solve_at(theta, eps, t, n, 0.0, 0.0)?;
    let hp = solve_at(theta, eps, t, n, a, 0.0)?;
    let hm = solve_at(theta, eps, t, n, -a, 0.0)?;
    let sp = solve_at(theta, eps, t, n, 0.0, b)?;
    let sm = solve_at(theta, eps, t, n, 0.0, -b)?;
    let pp = solve_at(theta, eps, t, n, a, b)?;
    let pm = solve_at(theta, eps, t, n, a, -b)?;
    let mp = solve_at(theta, eps, t, n, -a, b)?;
    let mm = solve_at(theta, eps, t, n, -a, -b)?;
    let mut grad = Vec::with_capacity(n);
    let mut hess = Vec::with_capacity(n);
    for i in 0..n {
        grad.push([(hp[i] - hm[i]) / (2.0 * a), (sp[i] - sm[i]) / (2.0 * b)]);
        let hh = (hp[i] - 2.0 * g0[i] + hm[i]) / (a * a);
        let ss = (sp[i] - 2.0 * g0[i] + sm[i]) / (b * b);
        let hs = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * a * b);
        hess.push([[hh, hs], [hs, ss]]);
    }
    Ok((grad, hess))
}

/// Gradient identity `∇g_ε(t,s) = ε^{−γ} M ∇g₁(tε^{−γ}, sε^{−γ})` with the
/// shear `M`, both sides by central differences in `θ` with relative step
/// `step`. Returns the worst relative discrepancy over both components.
pub fn gradient_scaling_check(
    theta: &Theta,
    eps: NoiseLevel,
    t: f64,
    n_nodes: usize,
    step: f64,
) -> Result<f64> {
    let (l, r) = derivative_sides(theta, eps, t, n_nodes, step)?;
    let m = shear_matrix(theta, eps);
    let c = scale_factor(theta, eps);
    let idx = interior(&uniform_nodes(t, n_nodes), t, 0.1, 0.9);
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        let lhs: Vec<f64> = idx.iter().map(|&i| l.0[i][k]).collect();
        let rhs: Vec<f64> = idx
            .iter()
            .map(|&i| c * (m[(k, 0)] * r.0[i][0] + m[(k, 1)] * r.0[i][1]))
            .collect();
        worst = worst.max(max_rel(&lhs, &rhs));
    }
    Ok(worst)
}

/// Hessian identity `∇²g_ε = ε^{−γ}(M ∇²g₁ Mᵀ + ν ∂_{σ²} g₁)` at the scaled
/// arguments. Returns the worst relative discrepancy over the three entries.
pub fn hessian_scaling_check(
    theta: &Theta,
    eps: NoiseLevel,
    t: f64,
    n_nodes: usize,
    step: f64,
) -> Result<f64> {
    let (l, r) = derivative_sides(theta, eps, t, n_nodes, step)?;
    let m = shear_matrix(theta, eps);
    let nu = nu_matrix(theta, eps);
    let c = scale_factor(theta, eps);
    let idx = interior(&uniform_nodes(t, n_nodes), t, 0.1, 0.9);
    let mut worst: f64 = 0.0;
    for (p, q) in [(0, 0), (0, 1), (1, 1)] {
        let lhs: Vec<f64> = idx.iter().map(|&i| l.1[i][p][q]).collect();
        let rhs: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let hs = &r.1[i];
                let mut v = nu[(p, q)] * r.0[i][1];
                for a in 0..2 {
                    for b in 0..2 {
                        v += m[(p, a)] * hs[a][b] * m[(q, b)];
                    }
                }
                c * v
            })
            .collect();
        worst = worst.max(max_rel(&lhs, &rhs));
    }
    Ok(worst)
}

type Derivs = (Vec<[f64; 2]>, Vec<[[f64; 2]; 2]>);

fn derivative_sides(
    theta: &Theta,
    eps: NoiseLevel,
    t: f64,
    n: usize,
    step: f64,
) -> Result<(Derivs, Derivs)> {
    let steps = [step, step * theta.sigma2()];
    let c = scale_factor(theta, eps);
    let left = theta_derivatives(theta, eps, t, n, steps)?;
    let right = theta_derivatives(theta, NoiseLevel::new(1.0)?, c * t, n, steps)?;
    Ok((left, right))
}

fn uniform_nodes(t: f64, n: usize) -> Vec<f64> {
    let h = t / n as f64;
    (0..n).map(|i| (i as f64 + 0.5) * h).collect()
}

/// Defect of `t∂_t g + s∂_s g + g − (2H−1)σ²∂_{σ²} g` at `ε = 1`, relative to
/// `max |g|`, over nodes in `[t/4, 3t/4]`. `∂_t` and `∂_{σ²}` use re-solves
/// with relative step `step`; `∂_s` and the shifted grids use interpolation.
pub fn pde_identity_check(theta: &Theta, t: f64, n_nodes: usize, step: f64) -> Result<f64> {
    let one = NoiseLevel::new(1.0)?;
    let base = solve_g(theta, one, t, n_nodes)?;
    let tp = solve_g(theta, one, t * (1.0 + step), n_nodes)?;
    let tm = solve_g(theta, one, t * (1.0 - step), n_nodes)?;
    let ds = step * theta.sigma2();
    let sp = solve_g(&theta.offset(0.0, ds)?, one, t, n_nodes)?;
    let sm = solve_g(&theta.offset(0.0, -ds)?, one, t, n_nodes)?;
    let h = base.cell();
    let idx = interior(&base.nodes, t, 0.25, 0.75);
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &i in &idx {
        let s = base.nodes[i];
        let g = base.values[i];
        let dt = (tp.interpolate(s) - tm.interpolate(s)) / (2.0 * t * step);
        let dsg = (base.values[i + 1] - base.values[i - 1]) / (2.0 * h);
        let dsig = (sp.values[i] - sm.values[i]) / (2.0 * ds);
        let lhs = t * dt + s * dsg + g;
        let rhs = (2.0 * theta.hurst() - 1.0) * theta.sigma2() * dsig;
        defect = defect.max((lhs - rhs).abs());
        scale = scale.max(g.abs());
    }
    Ok(defect / scale)
}

/// Settings of the `p`/`q` solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PqConfig {
    pub n_nodes: usize,
    pub max_iter: usize,
    pub fp_tol: f64,
    /// Lower end of the log-spaced `τ` grid.
    pub tau_min: f64,
    /// The grid ends at `tau_span / t`.
    pub tau_span: f64,
}

impl Default for PqConfig {
    fn default() -> Self {
        Self {
            n_nodes: 240,
            max_iter: 500,
            fp_tol: 1e-10,
            tau_min: 1e-6,
            tau_span: 50.0,
        }
    }
}

/// Discretised `(A_t f)(s) = (1/π)∫₀^∞ h(τ)e^{−tτ}/(τ+s) f(τ) dτ` on a
/// log-spaced grid with trapezoid weights in `log τ`.
#[derive(Debug, Clone)]
pub struct OperatorA {
    pub t: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub h_values: Vec<f64>,
    /// Row-major `n × n` matrix acting on nodal values.
    matrix: Vec<f64>,
}

impl OperatorA {
    pub fn new(theta: &Theta, eps: NoiseLevel, t: f64, cfg: &PqConfig) -> Result<Self> {
        check_args(t, cfg.n_nodes, 2)?;
        let n = cfg.n_nodes;
        let hi = cfg.tau_span / t;
        if !(hi > cfg.tau_min) {
            return Err(Error::Domain(format!("empty tau grid for t = {t}")));
        }
        let (a, b) = (cfg.tau_min.ln(), hi.ln());
        let du = (b - a) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| (a + du * i as f64).exp()).collect();
        let weights: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(i, x)| if i == 0 || i + 1 == n { 0.5 * du * x } else { du * x })
            .collect();
        let h_values = nodes
            .iter()
            .map(|&x| h_function(theta, eps, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(t, nodes, weights, h_values))
    }

    fn assemble(t: f64, nodes: Vec<f64>, weights: Vec<f64>, h_values: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] =
                    h_values[j] * (-t * nodes[j]).exp() * weights[j] / (PI * (nodes[j] + nodes[i]));
            }
        }
        Self {
            t,
            nodes,
            weights,
            h_values,
            matrix,
        }
    }

    /// The same grid and `h` values with the damping `e^{−tτ}` at a new `t`.
    pub fn retimed(&self, t: f64) -> Self {
        Self::assemble(t, self.nodes.clone(), self.weights.clone(), self.h_values.clone())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| self.matrix[i * n..(i + 1) * n].iter().zip(f).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `L²` norm with respect to the quadrature weights.
    pub fn norm(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }

    /// Operator norm in the weighted `L²` space, by power iteration on
    /// `CᵀC` with `C = W^{1/2} A W^{−1/2}`.
    pub fn operator_norm(&self) -> f64 {
        let n = self.len();
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let c = |x: &[f64]| -> Vec<f64> {
            let y: Vec<f64> = x.iter().zip(&sw).map(|(v, s)| v / s).collect();
            self.apply(&y).iter().zip(&sw).map(|(v, s)| v * s).collect()
        };
        let ct = |x: &[f64]| -> Vec<f64> {
            let y: Vec<f64> = x.iter().zip(&sw).map(|(v, s)| v * s).collect();
            (0..n)
                .map(|j| (0..n).map(|i| self.matrix[i * n + j] * y[i]).sum::<f64>() / sw[j])
                .collect()
        };
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut est = 0.0;
        for _ in 0..300 {
            let y = ct(&c(&x));
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm.sqrt();
            x = y.iter().map(|v| v / norm).collect();
            if (next - est).abs() < 1e-12 * next {
                est = next;
                break;
            }
            est = next;
        }
        est
    }
}

/// Apply `A_t` to nodal values on the default log-spaced grid of size `f.len()`.
pub fn operator_a_apply(theta: &Theta, eps: NoiseLevel, t: f64, f: &[f64]) -> Result<Vec<f64>> {
    let cfg = PqConfig {
        n_nodes: f.len(),
        ..Default::default()
    };
    Ok(OperatorA::new(theta, eps, t, &cfg)?.apply(f))
}

/// Solutions of `p = A_t p − ½` and `q = −A_t q − ½`.
#[derive(Debug, Clone)]
pub struct PQSolution {
    pub t: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub iterations: usize,
    /// Largest observed ratio of successive iterate differences.
    pub contraction: f64,
}

impl PQSolution {
    /// Weighted `L²` norm of `p + ½`.
    pub fn p_deviation(&self) -> f64 {
        weighted_norm(&self.weights, self.p_values.iter().map(|p| p + 0.5))
    }
}

fn weighted_norm(w: &[f64], f: impl Iterator<Item = f64>) -> f64 {
    f.zip(w).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
}

/// Neumann iteration for `f = sign·A_t f − ½` from `f₀ = −½`.
pub fn neumann_signed(op: &OperatorA, sign: f64, cfg: &PqConfig) -> Result<(Vec<f64>, usize, f64)> {
    let n = op.len();
    let mut f = vec![-0.5; n];
    let mut prev_diff = f64::NAN;
    let mut worst: f64 = 0.0;
    let mut growth = 0;
    for it in 1..=cfg.max_iter {
        let next: Vec<f64> = op.apply(&f).iter().map(|v| sign * v - 0.5).collect();
        let diff = weighted_norm(&op.weights, next.iter().zip(&f).map(|(a, b)| a - b));
        if !diff.is_finite() {
            return Err(Error::NonContraction(f64::INFINITY));
        }
        if prev_diff.is_finite() && prev_diff > 0.0 {
            let ratio = diff / prev_diff;
            worst = worst.max(ratio);
            growth = if ratio >= 1.0 { growth + 1 } else { 0 };
            if growth >= 5 {
                return Err(Error::NonContraction(ratio));
            }
        }
        f = next;
        if diff < cfg.fp_tol {
            return Ok((f, it, worst));
        }
        prev_diff = diff;
    }
    Err(Error::NonContraction(worst))
}

pub fn solve_pq(theta: &Theta, eps: NoiseLevel, t: f64, n_nodes: usize) -> Result<PQSolution> {
    solve_pq_with(
        theta,
        eps,
        t,
        &PqConfig {
            n_nodes,
            ..Default::default()
        },
    )
}

pub fn solve_pq_with(theta: &Theta, eps: NoiseLevel, t: f64, cfg: &PqConfig) -> Result<PQSolution> {
    let op = OperatorA::new(theta, eps, t, cfg)?;
    let (p, ip, cp) = neumann_signed(&op, 1.0, cfg)?;
    let (q, iq, cq) = neumann_signed(&op, -1.0, cfg)?;
    Ok(PQSolution {
        t,
        nodes: op.nodes.clone(),
        weights: op.weights.clone(),
        p_values: p,
        q_values: q,
        iterations: ip.max(iq),
        contraction: cp.max(cq),
    })
}

/// First `t ∈ {1, 2, 4, …, t_max}` at which the operator norm of `A_t`
/// falls below `threshold`; returns `(t, norm)`.
pub fn probe_t_min(
    theta: &Theta,
    eps: NoiseLevel,
    threshold: f64,
    t_max: f64,
    cfg: &PqConfig,
) -> Result<(f64, f64)> {
    let mut t = 1.0;
    let mut last = f64::NAN;
    while t <= t_max {
        last = OperatorA::new(theta, eps, t, cfg)?.operator_norm();
        if last < threshold {
            return Ok((t, last));
        }
        t *= 2.0;
    }
    Err(Error::NonContraction(last))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(h: f64, s: f64) -> Theta {
        Theta::new(h, s).unwrap()
    }
    fn ne(e: f64) -> NoiseLevel {
        NoiseLevel::new(e).unwrap()
    }

    #[test]
    fn weights_integrate_kernel_cells() {
        let t = th(0.8, 1.5);
        let w = kernel_weights(&t, 0.1, 4);
        // Cell m = 2 around s = 0.05: ∫_{0.2}^{0.3} K(r − 0.05) dr.
        let q = crate::quad::Adaptive::new(1e-13, 0.0, 100);
        let oracle = q
            .integrate(|r: f64| [kernel_k(&t, r - 0.05).unwrap()], 0.2, 0.3, 1)
            .unwrap()
            .value[0];
        assert!((w[2] - oracle).abs() < 1e-12);
        assert!((w[0] - 1.5 * 0.8 * 2.0 * 0.05f64.powf(0.6)).abs() < 1e-14);
    }

    #[test]
    fn residual_and_large_noise_limit() {
        let t = th(0.8, 1.0);
        let g = solve_g(&t, ne(1.0), 1.0, 64).unwrap();
        assert!(g.residual <= 1e-8);
        assert!(g.condition > 1.0 && g.condition < 1e12);
        let big = solve_g(&t, ne(1e6), 1.0, 64).unwrap();
        for (s, v) in big.nodes.iter().zip(&big.values) {
            if *s > 0.1 && *s < 0.9 {
                let want = kernel_k(&t, *s).unwrap() / 1e6;
                assert!(((v - want) / want).abs() < 1e-4);
            }
        }
        assert!(solve_g(&t, ne(1.0), 1.0, 8).is_err());
    }

    #[test]
    fn family_matches_individual_solves() {
        let t = th(0.85, 1.3);
        let fam = GFamily::new(&t, ne(0.7), 0.05, 40).unwrap();
        for k in [20usize, 40] {
            let g = solve_g(&t, ne(0.7), 0.05 * k as f64, k).unwrap();
            for (a, b) in fam.values(k).iter().zip(&g.values) {
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn unit_noise_scaling_is_exact() {
        assert_eq!(scaling_check(&th(0.8, 1.0), ne(1.0), 1.0, 32).unwrap(), 0.0);
    }

    #[test]
    fn interpolation_and_laplace_helpers() {
        let v = [1.0, 3.0, 5.0];
        assert_eq!(interpolate_midpoint(&v, 1.0, 1.0), 2.0);
        assert_eq!(interpolate_midpoint(&v, 1.0, 0.1), 1.0);
        assert_eq!(interpolate_midpoint(&v, 1.0, 2.9), 5.0);
        let l = laplace_piecewise(&[2.0; 4], 0.25, Complex64::new(0.0, 0.0));
        assert!((l.re - 2.0).abs() < 1e-15);
        let z = Complex64::new(0.3, 1.1);
        let exact = 2.0 * (1.0 - (-z).exp()) / z;
        assert!((laplace_piecewise(&[2.0; 8], 0.125, z) - exact).norm() < 1e-13);
    }

    #[test]
    fn operator_a_basic_properties() {
        let theta = th(0.8, 1.0);
        let cfg = PqConfig {
            n_nodes: 60,
            ..Default::default()
        };
        let op = OperatorA::new(&theta, ne(1.0), 4.0, &cfg).unwrap();
        assert!(op.apply(&vec![0.0; 60]).iter().all(|v| *v == 0.0));
        let norm = op.operator_norm();
        assert!(norm > 0.0 && norm < 1.0, "{norm}");
        let f: Vec<f64> = op.nodes.iter().map(|x| 1.0 / (1.0 + x)).collect();
        let slow = op.norm(&op.apply(&f));
        let fast = op.norm(&op.retimed(8.0).apply(&f));
        assert!(fast <= slow);
    }
}
