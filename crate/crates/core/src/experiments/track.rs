//! Solver stepping with modulation sampling.

use log::debug;

use super::record::{Termination, TimeseriesRow};
use crate::error::{Error, Result};
use crate::modulation::{decompose, diagnostics, DecomposeOptions, Decomposition, Signs};
use crate::profile::Profile;
use crate::solver::{energy, FieldState, Integrator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    None,
    Odd,
    Even,
}

impl Symmetry {
    pub fn apply(self, state: &mut FieldState) {
        match self {
            Symmetry::None => {}
            Symmetry::Odd => state.make_odd(),
            Symmetry::Even => state.make_even(),
        }
    }
}

/// Follows `K` solitons through a run, warm-starting each decomposition from
/// the previous centres advanced by their velocities.
pub struct Tracker<'a> {
    pub profile: &'a Profile,
    pub sigma: Signs,
    pub opts: DecomposeOptions,
    pub alpha: f64,
    pub mu: f64,
    last: Option<(f64, Vec<f64>, Vec<f64>)>,
    lost: bool,
}

impl<'a> Tracker<'a> {
    pub fn new(profile: &'a Profile, sigma: Signs, z0: &[f64], opts: DecomposeOptions, alpha: f64, mu: f64) -> Self {
        let k = sigma.len();
        let last = (k > 0).then(|| (f64::NAN, z0.to_vec(), vec![0.0; k]));
        Self { profile, sigma, opts, alpha, mu, last, lost: false }
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_lost(&self) -> bool {
        self.lost
    }

    /// Current centre estimate.
    pub fn centres(&self) -> Option<&[f64]> {
        self.last.as_ref().map(|(_, z, _)| z.as_slice())
    }

    fn guess(&self, t: f64) -> Vec<f64> {
        let (t0, z, ell) = self.last.as_ref().expect("tracker without solitons");
        if t0.is_nan() {
            return z.clone();
        }
        z.iter().zip(ell).map(|(z, l)| z + l * (t - t0)).collect()
    }

    /// Decompose `state`; on failure the tracker is marked lost and the error returned.
    pub fn observe(&mut self, state: &FieldState) -> Result<Decomposition> {
        if self.k() == 0 || self.lost {
            return Err(Error::OutOfTube("no solitons tracked".into()));
        }
        let guess = self.guess(state.t);
        match decompose(state, self.profile, &self.sigma, &guess, &self.opts) {
            Ok(dec) => {
                self.last = Some((state.t, dec.z.clone(), dec.ell.clone()));
                Ok(dec)
            }
            Err(e) => {
                debug!("tracker lost solitons at t = {}: {e}", state.t);
                self.lost = true;
                Err(e)
            }
        }
    }

    /// Sample row; soliton columns are NaN once tracking has failed.
    pub fn row(&mut self, state: &FieldState) -> Result<TimeseriesRow> {
        let p = self.profile.p();
        let k = self.k();
        let e = energy(state, p);
        let dtu_l2 = state.velocity_l2();
        if k == 0 {
            return Ok(TimeseriesRow {
                t: state.t,
                z: vec![],
                ell: vec![],
                n: state.energy_norm(),
                f_minus: 0.0,
                f_plus: 0.0,
                b: 0.0,
                e,
                dtu_l2,
                a_plus: vec![],
                a_minus: vec![],
            });
        }
        match self.observe(state) {
            Ok(dec) => {
                let d = diagnostics(&dec, state, self.profile, self.alpha, self.mu)?;
                Ok(TimeseriesRow {
                    t: state.t,
                    z: dec.z,
                    ell: dec.ell,
                    n: d.n,
                    f_minus: d.f_minus,
                    f_plus: d.f_plus,
                    b: d.b,
                    e,
                    dtu_l2,
                    a_plus: dec.a_plus,
                    a_minus: dec.a_minus,
                })
            }
            Err(Error::OutOfTube(_)) | Err(Error::IllConditioned(_)) => Ok(lost_row(state.t, k, e, dtu_l2)),
            Err(e) => Err(e),
        }
    }
}

fn lost_row(t: f64, k: usize, e: f64, dtu_l2: f64) -> TimeseriesRow {
    let nan = vec![f64::NAN; k];
    TimeseriesRow {
        t,
        z: nan.clone(),
        ell: nan.clone(),
        n: f64::NAN,
        f_minus: f64::NAN,
        f_plus: f64::NAN,
        b: f64::NAN,
        e,
        dtu_l2,
        a_plus: nan.clone(),
        a_minus: nan,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnExit {
    Stop,
    Continue,
}

pub struct TrackedRun {
    pub rows: Vec<TimeseriesRow>,
    pub termination: Termination,
    pub last_state: FieldState,
    /// Energy norms at the sample times.
    pub energy_norms: Vec<f64>,
}

impl TrackedRun {
    /// Terminal energy norm is below its value at 80% of the run.
    pub fn energy_norm_decaying(&self) -> bool {
        match self.energy_norms.len() {
            0 => false,
            n => {
                let last = self.energy_norms[n - 1];
                last <= self.energy_norms[(n - 1) * 4 / 5]
            }
        }
    }
}

/// Step from `state` to `t_end`, sampling a row every `every` steps (and at the start).
/// `snapshot` sees the state at each sample time.
pub fn run_tracked(
    state: FieldState,
    integ_cfg: crate::solver::StepConfig,
    tracker: &mut Tracker<'_>,
    t_end: f64,
    every: u64,
    on_exit: OnExit,
    mut snapshot: impl FnMut(&FieldState) -> Result<()>,
) -> Result<TrackedRun> {
    let mut rows = Vec::new();
    let mut norms = Vec::new();
    let mut integ = Integrator::new(state, integ_cfg)?;
    let dt = integ_cfg.dt;
    let total = ((t_end - integ.time()) / dt - 1e-9).ceil().max(0.0) as u64;
    let mut termination = Termination::Completed;
    let mut step = 0u64;
    loop {
        let st = integ.state();
        snapshot(&st)?;
        norms.push(st.energy_norm());
        rows.push(tracker.row(&st)?);
        if tracker.k() > 0 && tracker.is_lost() && termination == Termination::Completed {
            termination = Termination::TubeExit { t: st.t };
            if on_exit == OnExit::Stop {
                return Ok(TrackedRun { rows, termination, last_state: st, energy_norms: norms });
            }
        }
        if step >= total {
            break;
        }
        let target = (step + every).min(total);
        while step < target {
            match integ.step() {
                Ok(()) => step += 1,
                Err(Error::BlowUp { t_last }) => {
                    let st = integ.state();
                    norms.push(st.energy_norm());
                    return Ok(TrackedRun {
                        rows,
                        termination: Termination::BlowUp { t: t_last },
                        last_state: st,
                        energy_norms: norms,
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(TrackedRun { rows, termination, last_state: integ.state(), energy_norms: norms })
}
