//! Least-squares line fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("length mismatch {} vs {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample in fit window".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::Fit("degenerate fit window (no spread in abscissa)".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared, samples: n })
}

/// Slope of `log y` against `x`; all `y` must be positive.
pub fn log_linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("log fit needs positive values".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(x, &ly)
}

/// Slope of `log y` against `log x`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("log fit needs positive abscissae".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    log_linear_fit(&lx, y)
}
