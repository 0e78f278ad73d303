//! Asymptotic fits of a tracked time series.

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::record::TimeseriesRow;
use crate::error::{Error, Result};
use crate::ground_state::{compute_constants, QuadratureConfig};
use crate::interaction_ode::{exact_profile_y, tau_profile};
use crate::stats::{linear_fit, log_linear_fit};

/// Fewest samples a fit window may hold.
pub const MIN_FIT_SAMPLES: usize = 50;

/// Number of log-spaced samples used for fits against `log t`.
const LOG_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub window: [f64; 2],
    pub samples: usize,
    /// Slope of `z_{k+1} - z_k` against `log t`, one per gap.
    pub gap_log_slopes: Vec<f64>,
    /// Slope of `exp(z_{k+1} - z_k)` against `t`, one per gap.
    pub exp_gap_slopes: Vec<f64>,
    /// Slope of `log 𝒩` against `log t`.
    pub n_log_slope: Option<f64>,
    /// Slope of `log(𝒩 t)` against `log t`; zero or below means no growth.
    pub n_t_trend: Option<f64>,
    /// Exponential decay rate of `𝒩` (the energy norm when `K = 0`),
    /// fitted up to the time where `𝒩` is smallest.
    pub decay_rate: Option<f64>,
    /// Final centre of a single tracked soliton.
    pub ell_limit: Option<f64>,
    /// Mean offset of the centres from the asymptotic profile at the last sample.
    pub y_sharp: Option<f64>,
    pub theta_fit: f64,
    /// Slope of `log max_k |z_k - ȳ_k - y_♯|` against `log t`; compare with `1 - θ_fit`.
    pub residual_exponent: Option<f64>,
}

fn window_of(rows: &[TimeseriesRow], config: &RunConfig) -> Result<[f64; 2]> {
    let (t0, t1) = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::Fit("empty record".into())),
    };
    Ok(match config.fit_window {
        Some(w) => w,
        None => [t0 + (t1 - t0) / 3.0, t1],
    })
}

/// Indices of rows nearest to log-spaced times in `[lo, hi]`.
fn log_spaced(rows: &[TimeseriesRow], idx: &[usize]) -> Vec<usize> {
    let positive: Vec<usize> = idx.iter().copied().filter(|&i| rows[i].t > 0.0).collect();
    if positive.len() <= LOG_SAMPLES {
        return positive;
    }
    let (lo, hi) = (rows[positive[0]].t.ln(), rows[*positive.last().unwrap()].t.ln());
    let mut out: Vec<usize> = Vec::with_capacity(LOG_SAMPLES);
    let mut cursor = 0;
    for j in 0..LOG_SAMPLES {
        let target = (lo + (hi - lo) * j as f64 / (LOG_SAMPLES - 1) as f64).exp();
        while cursor + 1 < positive.len()
            && (rows[positive[cursor + 1]].t - target).abs() <= (rows[positive[cursor]].t - target).abs()
        {
            cursor += 1;
        }
        if out.last() != Some(&positive[cursor]) {
            out.push(positive[cursor]);
        }
    }
    out
}

fn slope_or_none(fit: Result<crate::stats::LinearFit>) -> Option<f64> {
    fit.ok().map(|f| f.slope)
}

pub fn fit_asymptotics(rows: &[TimeseriesRow], config: &RunConfig) -> Result<Fits> {
    let window = window_of(rows, config)?;
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].t >= window[0] && rows[i].t <= window[1]).collect();
    if idx.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "fit window [{}, {}] holds {} samples, need {MIN_FIT_SAMPLES}",
            window[0],
            window[1],
            idx.len()
        )));
    }
    let k = config.k;
    let logs = log_spaced(rows, &idx);
    let tracked = idx.iter().all(|&i| rows[i].is_tracked());

    let mut gap_log_slopes = Vec::new();
    let mut exp_gap_slopes = Vec::new();
    if tracked && k >= 2 {
        for g in 0..k - 1 {
            let lt: Vec<f64> = logs.iter().map(|&i| rows[i].t.ln()).collect();
            let gap: Vec<f64> = logs.iter().map(|&i| rows[i].z[g + 1] - rows[i].z[g]).collect();
            gap_log_slopes.push(linear_fit(&lt, &gap)?.slope);
            let t: Vec<f64> = idx.iter().map(|&i| rows[i].t).collect();
            let eg: Vec<f64> = idx.iter().map(|&i| (rows[i].z[g + 1] - rows[i].z[g]).exp()).collect();
            exp_gap_slopes.push(linear_fit(&t, &eg)?.slope);
        }
    }

    let n_pts: Vec<usize> = logs.iter().copied().filter(|&i| rows[i].n > 0.0 && rows[i].n.is_finite()).collect();
    let lt: Vec<f64> = n_pts.iter().map(|&i| rows[i].t.ln()).collect();
    let ln: Vec<f64> = n_pts.iter().map(|&i| rows[i].n.ln()).collect();
    let n_log_slope = slope_or_none(linear_fit(&lt, &ln));
    let n_t_trend = n_log_slope.map(|s| s + 1.0);

    let decay_rate = {
        let (lo, hi) = match (config.fit_window, k) {
            (Some(w), _) => (w[0], w[1]),
            (None, 0) => (window[0], window[1]),
            (None, _) => (rows[0].t, window[1]),
        };
        let finite: Vec<usize> =
            (0..rows.len()).filter(|&i| rows[i].t >= lo && rows[i].t <= hi && rows[i].n > 0.0).collect();
        let argmin = finite.iter().copied().min_by(|&a, &b| rows[a].n.total_cmp(&rows[b].n));
        match argmin {
            Some(m) => {
                let pts: Vec<usize> = finite.into_iter().filter(|&i| rows[i].t <= rows[m].t).collect();
                if pts.len() >= MIN_FIT_SAMPLES {
                    let t: Vec<f64> = pts.iter().map(|&i| rows[i].t).collect();
                    let n: Vec<f64> = pts.iter().map(|&i| rows[i].n).collect();
                    slope_or_none(log_linear_fit(&t, &n)).map(|s| -s)
                } else {
                    None
                }
            }
            None => None,
        }
    };

    let last = &rows[*idx.last().unwrap()];
    let ell_limit = (k == 1 && last.is_tracked()).then(|| last.z[0]);
    let (y_sharp, residual_exponent) = if k >= 2 && tracked {
        asymptotic_offsets(rows, &logs, config)?
    } else {
        (None, None)
    };

    Ok(Fits {
        window,
        samples: idx.len(),
        gap_log_slopes,
        exp_gap_slopes,
        n_log_slope,
        n_t_trend,
        decay_rate,
        ell_limit,
        y_sharp,
        theta_fit: config.theta_fit,
        residual_exponent,
    })
}

fn asymptotic_offsets(
    rows: &[TimeseriesRow],
    logs: &[usize],
    config: &RunConfig,
) -> Result<(Option<f64>, Option<f64>)> {
    let consts = compute_constants(&config.params, &QuadratureConfig::default())?;
    let prof = tau_profile(config.k, config.params.alpha, consts.kappa)?;
    let last = &rows[*logs.last().unwrap()];
    let ybar = exact_profile_y(last.t, &prof)?;
    let y_sharp = last.z.iter().zip(&ybar).map(|(z, y)| z - y).sum::<f64>() / config.k as f64;
    let mut lt = Vec::new();
    let mut lr = Vec::new();
    for &i in logs {
        let ybar = exact_profile_y(rows[i].t, &prof)?;
        let r = rows[i].z.iter().zip(&ybar).map(|(z, y)| (z - y - y_sharp).abs()).fold(0.0, f64::max);
        if r > 0.0 && rows[i].t < last.t {
            lt.push(rows[i].t.ln());
            lr.push(r.ln());
        }
    }
    Ok((Some(y_sharp), slope_or_none(linear_fit(&lt, &lr))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Scenario;
    use crate::ground_state::ModelParams;

    fn fake_profile_record(k: usize, t0: f64, t1: f64, n: usize) -> (Vec<TimeseriesRow>, RunConfig) {
        let params = ModelParams::new(1.0, 3.0).unwrap();
        let mut cfg = RunConfig::new(Scenario::OdeOnly, params, t1);
        cfg.k = k;
        cfg.t0 = t0;
        let prof = tau_profile(k, 1.0, 12.0).unwrap();
        let rows = (0..n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
                let z = exact_profile_y(t, &prof).unwrap();
                TimeseriesRow {
                    t,
                    z,
                    ell: vec![0.0; k],
                    n: 1.0 / t,
                    f_minus: 0.0,
                    f_plus: 0.0,
                    b: 0.0,
                    e: f64::NAN,
                    dtu_l2: f64::NAN,
                    a_plus: vec![0.0; k],
                    a_minus: vec![0.0; k],
                }
            })
            .collect();
        (rows, cfg)
    }

    #[test]
    fn exact_profile_has_unit_gap_slope() {
        let (rows, cfg) = fake_profile_record(2, 10.0, 1000.0, 500);
        let f = fit_asymptotics(&rows, &cfg).unwrap();
        assert!((f.gap_log_slopes[0] - 1.0).abs() < 1e-6);
        assert!((f.exp_gap_slopes[0] - 12.0).abs() < 1e-6);
        assert!((f.n_log_slope.unwrap() + 1.0).abs() < 1e-9);
        assert!(f.n_t_trend.unwrap().abs() < 1e-9);
        assert!(f.y_sharp.unwrap().abs() < 1e-9);
    }

    #[test]
    fn short_windows_are_rejected() {
        let (rows, cfg) = fake_profile_record(2, 10.0, 20.0, 60);
        assert!(matches!(fit_asymptotics(&rows, &cfg), Err(Error::Fit(_))));
    }
}
