//! Explicit three-level time stepping for the damped equation with energy and
//! dissipation diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ground_state::{check_exponent, nonlinearity, potential};
use crate::grid::{second_difference, Grid1D};

/// Any node exceeding this amplitude is treated as blow-up.
pub const BLOWUP_CAP: f64 = 1e6;

/// Largest admissible `dt / dx`.
pub const CFL_LIMIT: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub grid: Grid1D,
}

impl FieldState {
    pub fn new(t: f64, u: Vec<f64>, v: Vec<f64>, grid: Grid1D) -> Result<Self> {
        if u.len() != grid.len() || v.len() != grid.len() {
            return Err(invalid("field length does not match the grid"));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(invalid("field state contains non-finite values"));
        }
        Ok(Self { t, u, v, grid })
    }

    pub fn zero(grid: Grid1D) -> Self {
        let n = grid.len();
        Self { t: 0.0, u: vec![0.0; n], v: vec![0.0; n], grid }
    }

    pub fn energy_norm(&self) -> f64 {
        self.grid.energy_norm_sq(&self.u, &self.v).sqrt()
    }

    pub fn velocity_l2(&self) -> f64 {
        self.grid.l2_norm(&self.v)
    }

    /// Replace the state by its odd part, bit-exactly antisymmetric.
    pub fn make_odd(&mut self) {
        antisymmetrize(&mut self.u);
        antisymmetrize(&mut self.v);
    }

    pub fn make_even(&mut self) {
        symmetrize(&mut self.u);
        symmetrize(&mut self.v);
    }
}

fn antisymmetrize(a: &mut [f64]) {
    let n = a.len();
    for i in 0..n / 2 {
        let m = 0.5 * (a[i] - a[n - 1 - i]);
        a[i] = m;
        a[n - 1 - i] = -m;
    }
    if n % 2 == 1 {
        a[n / 2] = 0.0;
    }
}

fn symmetrize(a: &mut [f64]) {
    let n = a.len();
    for i in 0..n / 2 {
        let m = 0.5 * (a[i] + a[n - 1 - i]);
        a[i] = m;
        a[n - 1 - i] = m;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub alpha: f64,
    pub p: f64,
}

impl StepConfig {
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        check_exponent(self.p)?;
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid(format!("damping must be >= 0, got {}", self.alpha)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if self.dt > CFL_LIMIT * grid.dx() {
            return Err(invalid(format!(
                "time step {} violates dt <= {CFL_LIMIT} dx = {}",
                self.dt,
                CFL_LIMIT * grid.dx()
            )));
        }
        Ok(())
    }
}

/// Three-level integrator. It always holds the levels `n - 1`, `n` and
/// `n + 1`, so the centred velocity at the current level is available.
#[derive(Debug, Clone)]
pub struct Integrator {
    grid: Grid1D,
    cfg: StepConfig,
    t0: f64,
    n: u64,
    prev: Vec<f64>,
    curr: Vec<f64>,
    next: Vec<f64>,
    /// Initial velocity, used while `n == 0`.
    v0: Option<Vec<f64>>,
    work: Vec<f64>,
}

impl Integrator {
    pub fn new(state: FieldState, cfg: StepConfig) -> Result<Self> {
        cfg.validate(&state.grid)?;
        let FieldState { t, u, v, grid } = state;
        let n = u.len();
        let mut work = vec![0.0; n];
        second_difference(&u, grid.dx(), &mut work);
        let dt = cfg.dt;
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let acc = work[i] - u[i] + nonlinearity(u[i], cfg.p) - 2.0 * cfg.alpha * v[i];
                u[i] + dt * v[i] + 0.5 * dt * dt * acc
            })
            .collect();
        check_level(&next, t)?;
        Ok(Self { grid, cfg, t0: t, n: 0, prev: vec![0.0; n], curr: u, next, v0: Some(v), work })
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.n as f64 * self.cfg.dt
    }

    pub fn u(&self) -> &[f64] {
        &self.curr
    }

    pub fn velocity(&self) -> Vec<f64> {
        match &self.v0 {
            Some(v) => v.clone(),
            None => {
                let inv = 0.5 / self.cfg.dt;
                self.next.iter().zip(&self.prev).map(|(a, b)| (a - b) * inv).collect()
            }
        }
    }

    pub fn state(&self) -> FieldState {
        FieldState { t: self.time(), u: self.curr.clone(), v: self.velocity(), grid: self.grid.clone() }
    }

    /// Advance one level. On blow-up the integrator is left unchanged.
    pub fn step(&mut self) -> Result<()> {
        let StepConfig { dt, alpha, p } = self.cfg;
        let src = &self.next;
        second_difference(src, self.grid.dx(), &mut self.work);
        let a = 1.0 - alpha * dt;
        let inv = 1.0 / (1.0 + alpha * dt);
        let dt2 = dt * dt;
        let mut peak = 0.0f64;
        let mut finite = true;
        for i in 0..src.len() {
            let ui = src[i];
            let rhs = self.work[i] - ui + nonlinearity(ui, p);
            let w = (2.0 * ui - a * self.curr[i] + dt2 * rhs) * inv;
            finite &= w.is_finite();
            peak = peak.max(w.abs());
            // the buffer for level n - 1 becomes level n + 2
            self.prev[i] = w;
        }
        if !finite || peak > BLOWUP_CAP {
            return Err(Error::BlowUp { t_last: self.time() + dt });
        }
        // rotate: (prev, curr, next) <- (curr, next, new)
        std::mem::swap(&mut self.prev, &mut self.curr);
        std::mem::swap(&mut self.curr, &mut self.next);
        self.n += 1;
        self.v0 = None;
        Ok(())
    }

    /// Step until the current time is within half a step of `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        while self.time() < t - 0.5 * self.cfg.dt {
            self.step()?;
        }
        Ok(())
    }
}

fn check_level(u: &[f64], t_last: f64) -> Result<()> {
    if u.iter().any(|x| !x.is_finite() || x.abs() > BLOWUP_CAP) {
        return Err(Error::BlowUp { t_last });
    }
    Ok(())
}

/// One step of the scheme from a bare `(u, v)` state (the first step is the
/// Taylor bootstrap). The returned velocity is centred, so one further level
/// is computed internally.
pub fn step(state: &FieldState, cfg: &StepConfig) -> Result<FieldState> {
    let mut it = Integrator::new(state.clone(), *cfg)?;
    it.step()?;
    Ok(it.state())
}

/// `E = ½∫ v² + (∂x u)² + u² - 2F(u)`.
pub fn energy(state: &FieldState, p: f64) -> f64 {
    let g = &state.grid;
    let pot: f64 = state.u.iter().map(|&u| potential(u, p)).sum::<f64>() * g.dx();
    0.5 * (g.l2_norm_sq(&state.v) + g.h1_norm_sq(&state.u)) - pot
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
    /// `‖∂t u‖²_{L²}`.
    pub dtu_sq: f64,
}

impl EnergySample {
    pub fn of(state: &FieldState, p: f64) -> Self {
        Self { t: state.t, energy: energy(state, p), dtu_sq: state.grid.l2_norm_sq(&state.v) }
    }
}

/// `|E(t₂) - E(t₁) + 2α ∫ ‖∂t u‖²|` between the first and last samples, time
/// integral by the trapezoid rule.
pub fn dissipation_residual(samples: &[EnergySample], alpha: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(invalid("dissipation residual needs at least two samples"));
    }
    let integral: f64 = samples
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].dtu_sq + w[1].dtu_sq))
        .sum();
    let first = samples[0].energy;
    let last = samples[samples.len() - 1].energy;
    Ok((last - first + 2.0 * alpha * integral).abs())
}

/// Run from `state` to `t_end`, recording an energy sample every `every` steps.
pub fn energy_trajectory(
    state: FieldState,
    cfg: StepConfig,
    t_end: f64,
    every: u64,
) -> Result<Vec<EnergySample>> {
    let mut it = Integrator::new(state, cfg)?;
    let mut out = vec![EnergySample::of(&it.state(), cfg.p)];
    while it.time() < t_end - 0.5 * cfg.dt {
        it.step()?;
        if it.steps() % every.max(1) == 0 {
            out.push(EnergySample::of(&it.state(), cfg.p));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::q_unchecked;

    fn cfg(dt: f64) -> StepConfig {
        StepConfig { dt, alpha: 1.0, p: 3.0 }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = Grid1D::with_spacing(20.0, 0.05).unwrap();
        let mut it = Integrator::new(FieldState::zero(g), cfg(0.02)).unwrap();
        it.advance_to(3.0).unwrap();
        assert!(it.u().iter().all(|&x| x == 0.0));
        assert!(it.velocity().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = Grid1D::with_spacing(20.0, 0.05).unwrap();
        assert!(Integrator::new(FieldState::zero(g), cfg(0.05)).is_err());
    }

    #[test]
    fn energy_of_soliton() {
        let g = Grid1D::with_spacing(40.0, 0.02).unwrap();
        let u = g.sample(|x| q_unchecked(3.0, x));
        let s = FieldState::new(0.0, u, vec![0.0; g.len()], g).unwrap();
        assert!((energy(&s, 3.0) - 4.0 / 3.0).abs() < 1e-4);
        assert_eq!(energy(&FieldState::zero(s.grid.clone()), 3.0), 0.0);
    }

    #[test]
    fn large_data_blows_up() {
        let g = Grid1D::with_spacing(30.0, 0.05).unwrap();
        let u = g.sample(|x| 3.0 * q_unchecked(3.0, x));
        let s = FieldState::new(0.0, u, vec![0.0; g.len()], g).unwrap();
        let mut it = Integrator::new(s, cfg(0.02)).unwrap();
        match it.advance_to(20.0) {
            Err(Error::BlowUp { t_last }) => assert!(t_last > 0.0 && t_last < 20.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn odd_data_stays_exactly_odd() {
        let g = Grid1D::with_spacing(30.0, 0.05).unwrap();
        let mut s = FieldState::new(
            0.0,
            g.sample(|x| q_unchecked(3.0, x - 4.0) - q_unchecked(3.0, x + 4.0)),
            g.sample(|x| 0.1 * x * (-x * x).exp()),
            g.clone(),
        )
        .unwrap();
        s.make_odd();
        let mut it = Integrator::new(s, cfg(0.02)).unwrap();
        it.advance_to(5.0).unwrap();
        let u = it.u();
        let n = u.len();
        for i in 0..n {
            assert_eq!(u[i], -u[n - 1 - i]);
        }
    }

    #[test]
    fn small_data_energy_is_nonincreasing() {
        let g = Grid1D::with_spacing(40.0, 0.05).unwrap();
        let s = FieldState::new(0.0, g.sample(|x| 0.3 * (-x * x).exp()), vec![0.0; g.len()], g).unwrap();
        let tr = energy_trajectory(s, cfg(0.02), 10.0, 5).unwrap();
        for w in tr.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12);
        }
    }
}
