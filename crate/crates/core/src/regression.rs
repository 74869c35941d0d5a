//! Ordinary least squares for a straight line.

use crate::arith::CompensatedSum;
use crate::error::{Error, Result};

/// Fit of `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    /// Root mean square of the residuals.
    pub rms_residual: f64,
    pub points: usize,
}

/// Least-squares line through `(x, y)` pairs. Needs at least `min_points`
/// points and two distinct abscissae.
pub fn fit_line(xs: &[f64], ys: &[f64], min_points: usize) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < min_points.max(2) {
        return Err(Error::Fit(format!(
            "need at least {} points, got {n}",
            min_points.max(2)
        )));
    }
    let nf = n as f64;
    let mean_x = xs.iter().copied().collect::<CompensatedSum>().value() / nf;
    let mean_y = ys.iter().copied().collect::<CompensatedSum>().value() / nf;
    let mut sxx = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    let mut syy = CompensatedSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (sxx, sxy, syy) = (sxx.value(), sxy.value(), syy.value());
    if !(sxx > f64::EPSILON * mean_x.abs().max(1.0) * nf) {
        return Err(Error::Fit("degenerate abscissae (all equal)".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - intercept - slope * x).powi(2))
        .collect::<CompensatedSum>()
        .value();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    let sigma2 = if n > 2 { rss / (nf - 2.0) } else { 0.0 };
    let slope_err = (sigma2 / sxx).sqrt();
    let intercept_err = (sigma2 * (1.0 / nf + mean_x * mean_x / sxx)).sqrt();
    Ok(LineFit {
        slope,
        intercept,
        r2,
        slope_err,
        intercept_err,
        rms_residual: (rss / nf).sqrt(),
        points: n,
    })
}

/// Mean of `ys` with its standard error.
pub fn mean_with_error(ys: &[f64]) -> Result<(f64, f64)> {
    if ys.is_empty() {
        return Err(Error::Fit("no points".into()));
    }
    let n = ys.len() as f64;
    let mean = ys.iter().copied().collect::<CompensatedSum>().value() / n;
    if ys.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
