//! Composite Gauss–Legendre quadrature with global adaptive bisection.
//!
//! Integrands return fixed-size arrays so that several related integrals
//! (matrix entries, real and imaginary parts) share the same panel tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Relative tolerance per output component.
    pub rel_tol: f64,
    /// Upper bound on the number of panels in the adaptive tree.
    pub max_panels: usize,
    /// Integrand magnitude below which an infinite tail is cut off.
    pub tail_cut: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_panels: 4000,
            tail_cut: 1e-16,
        }
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Apply the rule on `[a, b]`.
    pub fn integrate<const N: usize, F>(&self, f: &F, a: f64, b: f64) -> [f64; N]
    where
        F: Fn(f64) -> [f64; N],
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [0.0; N];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            for k in 0..N {
                acc[k] += w * v[k];
            }
        }
        for a in acc.iter_mut() {
            *a *= half;
        }
        acc
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    err: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    /// Sum of per-panel error estimates (max over components).
    pub error: f64,
    pub panels: usize,
}

/// Adaptive composite integrator: the panel with the largest error estimate
/// is bisected until every component meets `rel_tol * |value| + abs_tol`.
#[derive(Debug, Clone)]
pub struct Adaptive {
    rule: GaussLegendre,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Adaptive {
    pub fn new(rel_tol: f64, abs_tol: f64, max_panels: usize) -> Self {
        Self {
            rule: GaussLegendre::new(15),
            rel_tol,
            abs_tol,
            max_panels,
        }
    }

    pub fn from_config(cfg: &QuadConfig) -> Self {
        Self::new(cfg.rel_tol, 0.0, cfg.max_panels)
    }

    fn panel<const N: usize, F>(&self, f: &F, a: f64, b: f64) -> Panel<N>
    where
        F: Fn(f64) -> [f64; N],
    {
        let m = 0.5 * (a + b);
        let coarse = self.rule.integrate(f, a, b);
        let l = self.rule.integrate(f, a, m);
        let r = self.rule.integrate(f, m, b);
        let mut value = [0.0; N];
        let mut err: f64 = 0.0;
        for k in 0..N {
            value[k] = l[k] + r[k];
            err = err.max((value[k] - coarse[k]).abs());
        }
        Panel { a, b, value, err }
    }

    /// Integrate over `[a, b]`, starting from `initial` equal panels.
    pub fn integrate<const N: usize, F>(
        &self,
        f: F,
        a: f64,
        b: f64,
        initial: usize,
    ) -> Result<Integral<N>>
    where
        F: Fn(f64) -> [f64; N],
    {
        let initial = initial.max(1);
        let mut heap = BinaryHeap::with_capacity(self.max_panels + 2);
        let step = (b - a) / initial as f64;
        for i in 0..initial {
            let lo = a + step * i as f64;
            let hi = if i + 1 == initial { b } else { lo + step };
            heap.push(self.panel(&f, lo, hi));
        }
        loop {
            let (total, err) = sum_panels(heap.iter());
            // Components that nearly cancel are held to a floor set by the largest one.
            let largest = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tol = total
                .iter()
                .map(|v| self.rel_tol * v.abs().max(1e-4 * largest) + self.abs_tol)
                .fold(f64::INFINITY, f64::min);
            if err <= tol || err == 0.0 {
                return Ok(Integral {
                    value: total,
                    error: err,
                    panels: heap.len(),
                });
            }
            if heap.len() >= self.max_panels {
                return Err(Error::NonConvergence(format!(
                    "{} panels exhausted with error {err:e} against tolerance {tol:e}",
                    heap.len()
                )));
            }
            let worst = heap.pop().expect("non-empty panel heap");
            let m = 0.5 * (worst.a + worst.b);
            if m <= worst.a || m >= worst.b {
                // Panel cannot be split further in floating point.
                let (total, err) = sum_panels(heap.iter().chain(std::iter::once(&worst)));
                return Ok(Integral {
                    value: total,
                    error: err,
                    panels: heap.len() + 1,
                });
            }
            heap.push(self.panel(&f, worst.a, m));
            heap.push(self.panel(&f, m, worst.b));
        }
    }
}

fn sum_panels<'a, const N: usize>(panels: impl Iterator<Item = &'a Panel<N>>) -> ([f64; N], f64) {
    let mut total = [0.0; N];
    let mut err = 0.0;
    for p in panels {
        for k in 0..N {
            total[k] += p.value[k];
        }
        err += p.err;
    }
    (total, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(15);
        let v = rule.integrate(&|x: f64| [x.powi(28), x.powi(3)], -1.0, 1.0);
        assert!((v[0] - 2.0 / 29.0).abs() < 1e-14);
        assert!(v[1].abs() < 1e-15);
        let w: f64 = rule.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let q = Adaptive::new(1e-10, 0.0, 2000);
        let r = q.integrate(|x: f64| [x.powf(-0.5)], 0.0, 1.0, 1).unwrap();
        assert!((r.value[0] - 2.0).abs() < 1e-8, "{:?}", r.value);
    }

    #[test]
    fn adaptive_reports_exhaustion() {
        let q = Adaptive::new(1e-14, 0.0, 4);
        let r = q.integrate(|x: f64| [x.powf(-0.9)], 0.0, 1.0, 1);
        assert!(matches!(r, Err(Error::NonConvergence(_))));
    }
}
