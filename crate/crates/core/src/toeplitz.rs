//! Symmetric positive-definite Toeplitz systems: Levinson recursion for
//! nested leading blocks and Durbin's recursion for Gaussian likelihoods.

use crate::error::{Error, Result};

/// Packed lower-triangular storage: row `k` (0-based) holds `k + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Packed {
    n: usize,
    data: Vec<f64>,
}

impl Packed {
    fn with_rows(n: usize) -> Self {
        Self {
            n,
            data: Vec::with_capacity(n * (n + 1) / 2),
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    /// Row `k`, of length `k + 1`.
    pub fn row(&self, k: usize) -> &[f64] {
        let start = k * (k + 1) / 2;
        &self.data[start..start + k + 1]
    }
}

/// Solutions of every leading block `T_k x = b[..k]`, `k = 1..=n`, where
/// `T` is the symmetric Toeplitz matrix with first column `col`.
///
/// Row `k − 1` of the result is the solution of size `k`. Cost is `O(n²)`.
pub fn levinson_family(col: &[f64], rhs: &[f64]) -> Result<Packed> {
    let n = col.len();
    if n == 0 || rhs.len() != n {
        return Err(Error::Domain("toeplitz column and rhs lengths differ".into()));
    }
    let t0 = col[0];
    if !(t0 > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("diagonal {t0}")));
    }
    let r: Vec<f64> = col[1..].iter().map(|v| v / t0).collect();
    let b: Vec<f64> = rhs.iter().map(|v| v / t0).collect();
    let mut out = Packed::with_rows(n);
    let mut x = vec![b[0]];
    out.data.push(x[0]);
    if n == 1 {
        return Ok(out);
    }
    let mut y = vec![-r[0]];
    let mut beta = 1.0;
    let mut alpha = -r[0];
    let mut scratch = Vec::with_capacity(n);
    for k in 1..n {
        beta *= 1.0 - alpha * alpha;
        if !(beta > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("leading block {}", k + 1)));
        }
        let dot: f64 = (0..k).map(|i| r[i] * x[k - 1 - i]).sum();
        let mu = (b[k] - dot) / beta;
        for i in 0..k {
            x[i] += mu * y[k - 1 - i];
        }
        x.push(mu);
        out.data.extend_from_slice(&x);
        if k + 1 < n {
            let dot: f64 = (0..k).map(|i| r[i] * y[k - 1 - i]).sum();
            alpha = (-r[k] - dot) / beta;
            scratch.clear();
            scratch.extend((0..k).map(|i| y[i] + alpha * y[k - 1 - i]));
            y.clear();
            y.extend_from_slice(&scratch);
            y.push(alpha);
        }
    }
    Ok(out)
}

/// Solve the full symmetric Toeplitz system by Levinson recursion.
pub fn levinson_solve(col: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let fam = levinson_family(col, rhs)?;
    Ok(fam.row(col.len() - 1).to_vec())
}

/// `y = T x` for the symmetric Toeplitz matrix with first column `col`.
pub fn toeplitz_matvec(col: &[f64], x: &[f64]) -> Vec<f64> {
    let n = col.len();
    (0..n)
        .map(|i| (0..n).map(|j| col[i.abs_diff(j)] * x[j]).sum())
        .collect()
}

/// One-step prediction factor of a stationary Gaussian sequence with
/// autocovariance `acov[0..n]`.
#[derive(Debug, Clone)]
pub struct DurbinFactor {
    /// Row `k − 1` holds `φ_{k,1..k}` predicting `x_k` from `x_{k−1}, …, x_0`.
    coeffs: Packed,
    /// Prediction-error variances `v_0, …, v_{n−1}`.
    variances: Vec<f64>,
}

impl DurbinFactor {
    pub fn new(acov: &[f64]) -> Result<Self> {
        let n = acov.len();
        if n == 0 {
            return Err(Error::Domain("empty autocovariance".into()));
        }
        if !(acov[0] > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("variance {}", acov[0])));
        }
        let mut coeffs = Packed::with_rows(n.saturating_sub(1));
        let mut variances = Vec::with_capacity(n);
        variances.push(acov[0]);
        let mut prev: Vec<f64> = Vec::with_capacity(n);
        let mut cur: Vec<f64> = Vec::with_capacity(n);
        for k in 1..n {
            let v = variances[k - 1];
            let dot: f64 = (1..k).map(|j| prev[j - 1] * acov[k - j]).sum();
            let kk = (acov[k] - dot) / v;
            cur.clear();
            cur.extend((1..k).map(|j| prev[j - 1] - kk * prev[k - j - 1]));
            cur.push(kk);
            let vk = v * (1.0 - kk * kk);
            if !(vk > 0.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "prediction variance {vk:e} at step {k}"
                )));
            }
            variances.push(vk);
            coeffs.data.extend_from_slice(&cur);
            std::mem::swap(&mut prev, &mut cur);
        }
        Ok(Self { coeffs, variances })
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `log det Σ = Σ log v_k`.
    pub fn log_det(&self) -> f64 {
        self.variances.iter().map(|v| v.ln()).sum()
    }

    /// One-step prediction errors `x_k − x̂_k`.
    pub fn innovations(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len().min(self.len());
        let mut e = Vec::with_capacity(n);
        for k in 0..n {
            if k == 0 {
                e.push(x[0]);
                continue;
            }
            let phi = self.coeffs.row(k - 1);
            let pred: f64 = phi.iter().enumerate().map(|(j, p)| p * x[k - 1 - j]).sum();
            e.push(x[k] - pred);
        }
        e
    }

    /// Gaussian log-density of `x` (length must equal the factor size).
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.len() {
            return Err(Error::Domain(format!(
                "sample length {} does not match covariance size {}",
                x.len(),
                self.len()
            )));
        }
        let e = self.innovations(x);
        let quad: f64 = e.iter().zip(&self.variances).map(|(e, v)| e * e / v).sum();
        let n = x.len() as f64;
        Ok(-0.5 * self.log_det() - 0.5 * quad - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dense(col: &[f64]) -> DMatrix<f64> {
        let n = col.len();
        DMatrix::from_fn(n, n, |i, j| col[i.abs_diff(j)])
    }

    fn test_col(n: usize) -> Vec<f64> {
        (0..n).map(|k| if k == 0 { 2.5 } else { 1.0 / (1.0 + k as f64).powf(0.7) }).collect()
    }

    #[test]
    fn family_rows_solve_leading_blocks() {
        let col = test_col(40);
        let rhs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() + 1.0).collect();
        let fam = levinson_family(&col, &rhs).unwrap();
        for k in [1usize, 2, 7, 40] {
            let a = dense(&col[..k]);
            let x = a.lu().solve(&DVector::from_column_slice(&rhs[..k])).unwrap();
            for i in 0..k {
                assert!((fam.row(k - 1)[i] - x[i]).abs() < 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn durbin_matches_dense_cholesky() {
        let col = test_col(30);
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).cos()).collect();
        let f = DurbinFactor::new(&col).unwrap();
        let a = dense(&col);
        let ch = a.clone().cholesky().unwrap();
        let logdet = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let xv = DVector::from_column_slice(&x);
        let q = xv.dot(&ch.solve(&xv));
        let oracle = -0.5 * logdet - 0.5 * q - 15.0 * (2.0 * std::f64::consts::PI).ln();
        assert!((f.log_density(&x).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn indefinite_input_is_rejected() {
        assert!(DurbinFactor::new(&[1.0, 1.5, 0.0]).is_err());
        assert!(levinson_family(&[1.0, 1.5, 0.0], &[1.0, 1.0, 1.0]).is_err());
    }
}
