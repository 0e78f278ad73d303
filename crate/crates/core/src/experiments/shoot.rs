//! Threshold search along unstable directions.
//!
//! A trial adds `Σ c_i D⃗_i` to a base state, runs until some watched `|a⁺_k|`
//! reaches the departure threshold, and reports the signs of the watched
//! `a⁺`. Positive means the blow-up side. Multi-soliton thresholds are
//! re-shot on consecutive segments so the unstable growth never outruns the
//! resolution of one bisection.

use log::{info, warn};

use super::config::RunConfig;
use super::record::{BisectionReport, SegmentReport, ShootReport, Termination, TimeseriesRow};
use super::track::{run_tracked, OnExit, Symmetry, Tracker};
use super::wmap::build_wmap;
use crate::error::{Error, Result};
use crate::modulation::{decompose, DecomposeOptions, Signs};
use crate::profile::Profile;
use crate::solver::{FieldState, Integrator, StepConfig};

/// Growth factor of the bracket when re-shooting finds no sign change.
const BRACKET_GROWTH: f64 = 10.0;
const BRACKET_EXPANSIONS: usize = 6;
/// A coupled coordinate counts as settled once a sweep moves it by less than
/// this many bisection widths.
const SWEEP_TOL: f64 = 4.0;
const MAX_SWEEPS: usize = 12;

/// Where the perturbation directions come from.
#[derive(Debug, Clone)]
pub enum DirectionKind {
    /// Fixed fields, e.g. `(Y, ν⁺Y)` for a single soliton.
    Fixed(Vec<(Vec<f64>, Vec<f64>)>),
    /// `W⃗(a)` for each amplitude pattern, rebuilt at every segment start.
    WMap(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct ShootSetup {
    pub base: FieldState,
    pub sigma: Signs,
    pub z0: Vec<f64>,
    pub symmetry: Symmetry,
    pub directions: DirectionKind,
    /// Soliton whose `a⁺` classifies each direction.
    pub watch: Vec<usize>,
    pub segmented: bool,
}

pub struct ShootContext<'a> {
    pub profile: &'a Profile,
    pub config: &'a RunConfig,
    pub step: StepConfig,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialEnd {
    Departed,
    BlowUp,
    TubeExit,
    Horizon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub signs: Vec<i8>,
    pub t_stop: f64,
    pub end: TrialEnd,
}

pub struct ShootResult {
    pub rows: Vec<TimeseriesRow>,
    pub termination: Termination,
    pub last_state: FieldState,
    pub report: ShootReport,
    /// Final bracket of the first bisection, used for endpoint validation.
    pub first_bracket: (f64, f64),
    pub energy_norms: Vec<f64>,
}

fn sign_of(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

fn perturbed(
    base: &FieldState,
    dirs: &[(Vec<f64>, Vec<f64>)],
    coeffs: &[f64],
    symmetry: Symmetry,
) -> FieldState {
    let mut st = base.clone();
    for ((du, dv), &c) in dirs.iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        for (u, d) in st.u.iter_mut().zip(du) {
            *u += c * d;
        }
        for (v, d) in st.v.iter_mut().zip(dv) {
            *v += c * d;
        }
    }
    symmetry.apply(&mut st);
    st
}

/// Run one trial from `start` and classify by the departing `a⁺`.
pub fn trial(ctx: &ShootContext<'_>, start: FieldState, sigma: &Signs, z: &[f64], watch: &[usize]) -> Result<TrialOutcome> {
    let cfg = ctx.config;
    let every = ((cfg.shooting.check_dt / ctx.step.dt).round() as u64).max(1);
    let horizon = start.t + cfg.shooting.trial_horizon;
    // only the sign of a⁺ matters here, so large initial offsets are still decomposed
    let opts = DecomposeOptions { tube_radius: f64::INFINITY, ..cfg.decompose_options() };
    let mut tracker = Tracker::new(ctx.profile, sigma.clone(), z, opts, ctx.step.alpha, ctx.mu);
    let mut integ = Integrator::new(start, ctx.step)?;
    let mut last: Option<Vec<f64>> = None;
    loop {
        let st = integ.state();
        match tracker.observe(&st) {
            Ok(dec) => {
                let a: Vec<f64> = watch.iter().map(|&k| dec.a_plus[k]).collect();
                if a.iter().any(|x| x.abs() >= cfg.thresholds.departure) {
                    return Ok(TrialOutcome { signs: a.iter().map(|&x| sign_of(x)).collect(), t_stop: st.t, end: TrialEnd::Departed });
                }
                last = Some(a);
            }
            Err(Error::OutOfTube(_)) | Err(Error::IllConditioned(_)) => {
                let a = last.ok_or_else(|| Error::OutOfTube("trial data outside the tube".into()))?;
                return Ok(TrialOutcome { signs: a.iter().map(|&x| sign_of(x)).collect(), t_stop: st.t, end: TrialEnd::TubeExit });
            }
            Err(e) => return Err(e),
        }
        if st.t >= horizon - 0.5 * ctx.step.dt {
            let a = last.unwrap_or_default();
            warn!("trial reached its horizon t = {} without departing", st.t);
            return Ok(TrialOutcome { signs: a.iter().map(|&x| sign_of(x)).collect(), t_stop: st.t, end: TrialEnd::Horizon });
        }
        for _ in 0..every {
            match integ.step() {
                Ok(()) => {}
                Err(Error::BlowUp { t_last }) => {
                    let signs = match &last {
                        Some(a) => a.iter().map(|&x| sign_of(x)).collect(),
                        None => vec![1; watch.len()],
                    };
                    return Ok(TrialOutcome { signs, t_stop: t_last, end: TrialEnd::BlowUp });
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Plain bisection on a sign-valued function whose endpoint signs are known.
pub fn bisect(
    mut eval: impl FnMut(f64) -> Result<i8>,
    coordinate: usize,
    (mut lo, s_lo): (f64, i8),
    (mut hi, s_hi): (f64, i8),
    width_tol: f64,
    max_iter: usize,
) -> Result<BisectionReport> {
    if s_lo == s_hi {
        return Err(Error::Bracketing(format!("no sign change on [{lo}, {hi}]")));
    }
    let mut history = vec![(lo, s_lo), (hi, s_hi)];
    let mut iterations = 0;
    while hi - lo > width_tol {
        if iterations >= max_iter {
            return Err(Error::Bracketing(format!(
                "bracket width {:.3e} above {width_tol:.1e} after {max_iter} iterations",
                hi - lo
            )));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = eval(mid)?;
        history.push((mid, s));
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let tail = &history[history.len().saturating_sub(5)..];
    let monotone_last5 = tail.iter().all(|&(a, s)| if a <= lo { s == s_lo } else { a >= hi && s == s_hi });
    Ok(BisectionReport { coordinate, lo, hi, iterations, history, monotone_last5 })
}

/// Symmetric bracket around `centre`, widened until the signs differ.
fn find_bracket(
    eval: &mut impl FnMut(f64) -> Result<i8>,
    centre: f64,
    half: f64,
) -> Result<((f64, i8), (f64, i8))> {
    let mut h = half;
    for _ in 0..=BRACKET_EXPANSIONS {
        let (lo, hi) = (centre - h, centre + h);
        let (s_lo, s_hi) = (eval(lo)?, eval(hi)?);
        if s_lo != s_hi {
            return Ok(((lo, s_lo), (hi, s_hi)));
        }
        h *= BRACKET_GROWTH;
    }
    Err(Error::Bracketing(format!("no sign change within ±{:.1e} of {centre}", h / BRACKET_GROWTH)))
}

fn directions_at(
    ctx: &ShootContext<'_>,
    setup: &ShootSetup,
    state: &FieldState,
    z: &[f64],
) -> Result<(Vec<(Vec<f64>, Vec<f64>)>, Vec<f64>)> {
    let dec = decompose(state, ctx.profile, &setup.sigma, z, &ctx.config.decompose_options())?;
    let dirs = match &setup.directions {
        DirectionKind::Fixed(d) => d.clone(),
        DirectionKind::WMap(patterns) => {
            let map = build_wmap(ctx.profile, &state.grid, &setup.sigma, &dec.z)?;
            patterns.iter().map(|a| map.data(a)).collect::<Result<_>>()?
        }
    };
    Ok((dirs, dec.z))
}

/// Bisect every direction (alternating for several), then follow the
/// threshold trajectory; repeat per segment when `setup.segmented`.
pub fn shoot(ctx: &ShootContext<'_>, setup: &ShootSetup) -> Result<ShootResult> {
    let cfg = ctx.config;
    let bis = cfg.bisection.ok_or_else(|| crate::error::invalid("shooting needs a bisection block"))?;
    let every = cfg.steps_per_sample()?;
    let d = setup.watch.len();
    let mut state = setup.base.clone();
    setup.symmetry.apply(&mut state);
    let mut z = setup.z0.clone();
    let mut tracker =
        Tracker::new(ctx.profile, setup.sigma.clone(), &z, cfg.decompose_options(), ctx.step.alpha, ctx.mu);
    let mut rows: Vec<TimeseriesRow> = Vec::new();
    let mut norms = Vec::new();
    let mut segments = Vec::new();
    let mut first_bracket = (f64::NAN, f64::NAN);
    let mut a_star = Vec::new();
    let mut termination = Termination::Completed;
    loop {
        let t_start = state.t;
        let seg_end = if setup.segmented { (t_start + cfg.shooting.segment_length).min(cfg.t_end) } else { cfg.t_end };
        let (dirs, zs) = directions_at(ctx, setup, &state, &z)?;
        z = zs;
        let mut coeffs = vec![0.0; d];
        let mut bisections = Vec::new();
        // coupled coordinates: sweep until a full sweep no longer moves any of them
        let mut moved = vec![f64::INFINITY; d];
        let mut r = 0;
        while r < d || (d > 1 && moved.iter().any(|m| *m > SWEEP_TOL * bis.width_tol)) {
            if r >= MAX_SWEEPS * d {
                return Err(Error::Bracketing(format!(
                    "coupled thresholds still moving by {:.1e} after {MAX_SWEEPS} sweeps",
                    moved.iter().fold(0.0f64, |a, b| a.max(*b))
                )));
            }
            let i = r % d;
            let mut eval = |c: f64| -> Result<i8> {
                let mut trial_coeffs = coeffs.clone();
                trial_coeffs[i] = c;
                let start = perturbed(&state, &dirs, &trial_coeffs, setup.symmetry);
                let out = trial(ctx, start, &setup.sigma, &z, &setup.watch)?;
                Ok(out.signs[i])
            };
            let (lo, hi) = if segments.is_empty() && r < d {
                ((bis.lo, eval(bis.lo)?), (bis.hi, eval(bis.hi)?))
            } else if r < d {
                find_bracket(&mut eval, coeffs[i], cfg.shooting.restart_bracket)?
            } else {
                let half = (4.0 * moved[i]).clamp(SWEEP_TOL * bis.width_tol, cfg.shooting.restart_bracket);
                find_bracket(&mut eval, coeffs[i], half)?
            };
            let rep = bisect(&mut eval, i, lo, hi, bis.width_tol, bis.max_iter)?;
            let c = 0.5 * (rep.lo + rep.hi);
            moved[i] = (c - coeffs[i]).abs();
            coeffs[i] = c;
            if segments.is_empty() && r == 0 {
                first_bracket = (rep.lo, rep.hi);
            }
            info!(
                "t = {t_start}: coordinate {i} threshold {:.15e} (width {:.1e}, {} trials)",
                coeffs[i],
                rep.hi - rep.lo,
                rep.history.len()
            );
            bisections.push(rep);
            r += 1;
        }
        if segments.is_empty() {
            a_star = coeffs.clone();
        }
        segments.push(SegmentReport { t_start, coefficients: coeffs.clone(), bisections });
        let start = perturbed(&state, &dirs, &coeffs, setup.symmetry);
        let run = run_tracked(start, ctx.step, &mut tracker, seg_end, every, OnExit::Stop, |_| Ok(()))?;
        if let (Some(prev), Some(first)) = (rows.last(), run.rows.first()) {
            if prev.t == first.t {
                rows.pop();
                norms.pop();
            }
        }
        rows.extend(run.rows);
        norms.extend(run.energy_norms);
        state = run.last_state;
        if run.termination != Termination::Completed {
            termination = run.termination;
            warn!("threshold trajectory stopped early: {termination:?}");
            break;
        }
        if let Some(c) = tracker.centres() {
            z = c.to_vec();
        }
        if !setup.segmented || state.t >= cfg.t_end - 0.5 * ctx.step.dt {
            break;
        }
    }
    Ok(ShootResult {
        rows,
        termination,
        last_state: state,
        report: ShootReport { a_star, segments, endpoints: None },
        first_bracket,
        energy_norms: norms,
    })
}
