//! The exponential-interaction system for soliton centres
//!
//! ```text
//! ẏ₁ = -(κ/2α) e^{-(y₂-y₁)},
//! ẏ_k = (κ/2α) (e^{-(y_k-y_{k-1})} - e^{-(y_{k+1}-y_k)}),
//! ẏ_K = (κ/2α) e^{-(y_K-y_{K-1})},
//! ```
//!
//! its explicit logarithmic solution, and the autonomous system for the
//! deviation from that solution. Everything is integrated in `s = log t`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::{log_log_fit, LinearFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub t: f64,
    pub y: Vec<f64>,
}

impl OdeState {
    pub fn new(t: f64, y: Vec<f64>) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!("ODE time must be positive, got {t}")));
        }
        if y.len() < 2 {
            return Err(invalid("ODE needs at least two centres"));
        }
        if !y.windows(2).all(|w| w[1] > w[0]) {
            return Err(invalid("centres must be strictly increasing"));
        }
        Ok(Self { t, y })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticProfile {
    #[serde(rename = "K")]
    pub k: usize,
    pub tau: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: f64,
    pub kappa: f64,
}

/// `γ_k = k(K - k)/2` for `k = 1..K-1`.
pub fn gammas(k: usize) -> Vec<f64> {
    (1..k).map(|j| (j * (k - j)) as f64 / 2.0).collect()
}

/// `τ_k` from `e^{-(τ_{k+1}-τ_k)} = (2α/κ) γ_k` and `Σ τ_k = 0`.
pub fn tau_profile(k: usize, alpha: f64, kappa: f64) -> Result<AsymptoticProfile> {
    if k < 2 {
        return Err(invalid(format!("profile needs K >= 2, got {k}")));
    }
    if !(alpha > 0.0 && kappa > 0.0) {
        return Err(invalid("profile needs alpha > 0 and kappa > 0"));
    }
    let gamma = gammas(k);
    let mut cumulative = vec![0.0; k];
    for j in 1..k {
        cumulative[j] = cumulative[j - 1] + (kappa / (2.0 * alpha * gamma[j - 1])).ln();
    }
    let mean = cumulative.iter().sum::<f64>() / k as f64;
    let tau = cumulative.iter().map(|c| c - mean).collect();
    Ok(AsymptoticProfile { k, tau, gamma, alpha, kappa })
}

/// `ȳ_k(t) = (k - (K+1)/2) log t + τ_k`.
pub fn exact_profile_y(t: f64, profile: &AsymptoticProfile) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(invalid(format!("profile time must be positive, got {t}")));
    }
    let lt = t.ln();
    let mid = (profile.k + 1) as f64 / 2.0;
    Ok(profile
        .tau
        .iter()
        .enumerate()
        .map(|(j, tau)| ((j + 1) as f64 - mid) * lt + tau)
        .collect())
}

/// Right-hand side of the centre system.
pub fn centres_rhs(y: &[f64], alpha: f64, kappa: f64, out: &mut [f64]) {
    let c = kappa / (2.0 * alpha);
    let k = y.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..k - 1 {
        let e = c * (-(y[j + 1] - y[j])).exp();
        out[j] -= e;
        out[j + 1] += e;
    }
}

/// `ẏ` of the centre system as a fresh vector.
pub fn interaction_velocities(y: &[f64], alpha: f64, kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    centres_rhs(y, alpha, kappa, &mut out);
    out
}

/// `max_k |d/dt ȳ_k - RHS_k(ȳ)|` at time `t`.
pub fn profile_residual(t: f64, profile: &AsymptoticProfile) -> Result<f64> {
    let y = exact_profile_y(t, profile)?;
    let mut rhs = vec![0.0; profile.k];
    centres_rhs(&y, profile.alpha, profile.kappa, &mut rhs);
    let mid = (profile.k + 1) as f64 / 2.0;
    Ok(rhs
        .iter()
        .enumerate()
        .map(|(j, r)| (((j + 1) as f64 - mid) / t - r).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeTolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self { rel: 1e-10, abs: 1e-12 }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand–Prince integration of `y' = f(s, y)` from `s0`, reporting
/// the solution exactly at each of the increasing `outputs` (all `> s0`).
/// Step-size underflow is reported through `on_underflow(s)`.
pub fn dopri5<F>(
    f: F,
    s0: f64,
    y0: &[f64],
    outputs: &[f64],
    tol: OdeTolerance,
    on_underflow: impl Fn(f64) -> Error,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut s = s0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut out = Vec::with_capacity(outputs.len());
    let span = outputs.last().map_or(0.0, |e| e - s0);
    let mut h = (span.abs() * 1e-3).max(1e-6);
    f(s, &y, &mut k[0]);
    for &target in outputs {
        if target < s {
            return Err(invalid("output times must be increasing"));
        }
        while s < target {
            let last = target - s <= h;
            let hh = if last { target - s } else { h };
            if hh < 1e-14 * s.abs().max(1.0) {
                if last {
                    // the remaining gap is round-off
                    s = target;
                    break;
                }
                return Err(on_underflow(s));
            }
            for stage in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for j in 0..stage {
                        acc += hh * A[stage][j] * k[j][i];
                    }
                    tmp[i] = acc;
                }
                f(s + C[stage] * hh, &tmp, &mut k[stage]);
            }
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut a5 = y[i];
                let mut e = 0.0;
                for j in 0..7 {
                    a5 += hh * B5[j] * k[j][i];
                    e += hh * (B5[j] - B4[j]) * k[j][i];
                }
                y5[i] = a5;
                let sc = tol.abs + tol.rel * y[i].abs().max(a5.abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                h = hh * 0.1;
                continue;
            }
            if err <= 1.0 {
                s = if last { target } else { s + hh };
                std::mem::swap(&mut y, &mut y5);
                // FSAL: the last stage is the derivative at the new point
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) {
                h = hh * factor;
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeTrajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// `max |Σ y_k(t) - Σ y_k(t₀)|` over the samples.
    pub mean_drift: f64,
}

/// Integrate the centre system from `y0` to each of `sample_times`
/// (increasing, `> y0.t`), in the variable `s = log t`.
pub fn integrate_centers(
    y0: &OdeState,
    sample_times: &[f64],
    alpha: f64,
    kappa: f64,
    tol: OdeTolerance,
) -> Result<OdeTrajectory> {
    if !(alpha > 0.0 && kappa > 0.0) {
        return Err(invalid("ODE needs alpha > 0 and kappa > 0"));
    }
    if sample_times.iter().any(|&t| !(t > y0.t)) {
        return Err(invalid("sample times must exceed the initial time"));
    }
    let outputs: Vec<f64> = sample_times.iter().map(|t| t.ln()).collect();
    let rhs = |s: f64, y: &[f64], out: &mut [f64]| {
        centres_rhs(y, alpha, kappa, out);
        let t = s.exp();
        out.iter_mut().for_each(|o| *o *= t);
    };
    let ys = dopri5(rhs, y0.t.ln(), &y0.y, &outputs, tol, |s| Error::StepUnderflow { t: s.exp() })?;
    let sum0: f64 = y0.y.iter().sum();
    let mut drift: f64 = 0.0;
    for (t, y) in sample_times.iter().zip(&ys) {
        if !y.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::NumericalFailure(format!("centres lost their ordering at t = {t}")));
        }
        drift = drift.max((y.iter().sum::<f64>() - sum0).abs());
    }
    Ok(OdeTrajectory { t: sample_times.to_vec(), y: ys, mean_drift: drift })
}

/// `Φ(ϖ)` for the deviation system `ϖ̇ = t⁻¹ Φ(ϖ)`.
pub fn phi(varpi: &[f64], gamma: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; varpi.len()];
    phi_into(varpi, gamma, &mut out);
    out
}

fn phi_into(varpi: &[f64], gamma: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..varpi.len() - 1 {
        let e = gamma[j] * ((-(varpi[j + 1] - varpi[j])).exp() - 1.0);
        out[j] -= e;
        out[j + 1] += e;
    }
}

/// `DΦ(0)`: tridiagonal, `m_{k,k} = -(γ_{k-1} + γ_k)`, `m_{k,k±1} = γ`.
pub fn dphi0(k: usize, gamma: &[f64]) -> Result<DMatrix<f64>> {
    if k < 2 || gamma.len() != k - 1 {
        return Err(invalid(format!("DΦ(0) needs K >= 2 and K - 1 gammas (K = {k})")));
    }
    let mut m = DMatrix::zeros(k, k);
    for j in 0..k - 1 {
        let g = gamma[j];
        m[(j, j)] -= g;
        m[(j + 1, j + 1)] -= g;
        m[(j, j + 1)] = g;
        m[(j + 1, j)] = g;
    }
    Ok(m)
}

/// Eigenvalues of `DΦ(0)` in ascending order.
pub fn dphi0_spectrum(k: usize) -> Result<Vec<f64>> {
    let m = dphi0(k, &gammas(k))?;
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiRun {
    pub t: Vec<f64>,
    pub varpi: Vec<Vec<f64>>,
    /// `‖ϖ(t) - (ϖ(t₀), e₁) e₁‖ · t / t₀` per sample.
    pub scaled_deviation: Vec<f64>,
    pub sup_scaled_deviation: f64,
    /// Fitted exponent `r` in `‖ϖ - mean‖ ∝ t^{-r}` over the samples.
    pub decay_exponent: f64,
}

/// Integrate `ϖ̇ = t⁻¹ Φ(ϖ)` from `(t0, xi0)` with `samples` log-spaced
/// outputs up to `t_end`.
pub fn xi_convergence_run(xi0: &[f64], t0: f64, t_end: f64, samples: usize) -> Result<XiRun> {
    let k = xi0.len();
    if k < 2 {
        return Err(invalid("deviation system needs K >= 2"));
    }
    if !(t0 > 0.0 && t_end > t0) || samples < 2 {
        return Err(invalid("need 0 < t0 < t_end and at least 2 samples"));
    }
    if xi0.iter().map(|x| x * x).sum::<f64>().sqrt() > 1.0 + 1e-12 {
        return Err(invalid("initial deviation must have norm <= 1"));
    }
    let gamma = gammas(k);
    let (s0, s1) = (t0.ln(), t_end.ln());
    let outputs: Vec<f64> = (1..=samples).map(|i| s0 + (s1 - s0) * i as f64 / samples as f64).collect();
    let f = |_s: f64, w: &[f64], out: &mut [f64]| phi_into(w, &gamma, out);
    let ys = dopri5(f, s0, xi0, &outputs, OdeTolerance::default(), |s| Error::StepUnderflow { t: s.exp() })?;
    let mean0 = xi0.iter().sum::<f64>() / k as f64;
    let t: Vec<f64> = outputs.iter().map(|s| s.exp()).collect();
    let deviation: Vec<f64> = ys
        .iter()
        .map(|w| w.iter().map(|x| (x - mean0).powi(2)).sum::<f64>().sqrt())
        .collect();
    let scaled: Vec<f64> = deviation.iter().zip(&t).map(|(d, ti)| d * ti / t0).collect();
    let sup = scaled.iter().copied().fold(0.0, f64::max);
    let positive: Vec<(f64, f64)> = t.iter().copied().zip(deviation.iter().copied()).filter(|(_, d)| *d > 1e-300).collect();
    let decay_exponent = if positive.len() >= 2 {
        let (ts, ds): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
        -log_log_fit(&ts, &ds).map(|f: LinearFit| f.slope)?
    } else {
        f64::INFINITY
    };
    Ok(XiRun { t, varpi: ys, scaled_deviation: scaled, sup_scaled_deviation: sup, decay_exponent })
}
