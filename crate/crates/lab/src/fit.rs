//! Log-log rate regression.

use mfbm::Error;

/// Least-squares line through `(ln x, ln rmse)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, Error> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Domain("rate fit needs positive finite points".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let span = logs.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    if sxx <= (1e-12 * span).powi(2) * n {
        return Err(Error::DegenerateAbscissa);
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        stderr,
        points: logs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 11.0].iter().map(|x: &f64| (*x, x.powf(0.7))).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12);
        assert!(f.stderr < 1e-10);
    }

    #[test]
    fn constant_rmse_has_zero_slope() {
        let f = fit_rate(&[(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)]).unwrap();
        assert!(f.slope.abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_rate(&[(2.0, 1.0), (2.0, 3.0), (2.0, 4.0)]),
            Err(Error::DegenerateAbscissa)
        ));
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (2.0, -2.0), (3.0, 1.0)]).is_err());
    }
}
