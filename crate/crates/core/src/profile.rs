//! Soliton templates: the profile `Q`, its derivatives and the unstable
//! eigenfunction `Y`, evaluable at arbitrary (shifted) positions.
//!
//! Two flavours exist. [`TemplateKind::Analytic`] uses the closed-form ground
//! state. [`TemplateKind::GridRelaxed`] uses the exact stationary solution of
//! the semi-discrete equation on a given spacing, which is what a simulation
//! on that spacing actually relaxes to; the difference between the two is a
//! smooth `O(dx²)` correction that would otherwise show up as a spurious
//! residual in every decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::{nonlinearity, q_prime_unchecked, q_unchecked, ModelParams};
use crate::grid::Grid1D;
use crate::spectrum::{assemble_l_with_profile, SpectralData, Rates, SPECTRAL_HALF_WIDTH};
use crate::spline::UniformSpline;

/// Node count of the grid used for the analytic template's eigenfunction.
pub const ANALYTIC_SPECTRAL_NODES: usize = 8193;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Analytic,
    #[default]
    GridRelaxed,
}

#[derive(Debug, Clone)]
pub struct Profile {
    kind: TemplateKind,
    p: f64,
    q: Option<UniformSpline>,
    y: UniformSpline,
    nu0: f64,
    rates: Rates,
}

impl Profile {
    pub fn analytic(params: &ModelParams) -> Result<Self> {
        let grid = Grid1D::new(SPECTRAL_HALF_WIDTH, ANALYTIC_SPECTRAL_NODES)?;
        let sd = SpectralData::compute(params, &grid)?;
        Ok(Self {
            kind: TemplateKind::Analytic,
            p: params.p,
            q: None,
            y: UniformSpline::new(grid.nodes()[0], grid.dx(), sd.y)?,
            nu0: sd.nu0,
            rates: sd.rates,
        })
    }

    /// Template relaxed on spacing `dx`. The knots are `j·dx` (odd node
    /// count) or `(j + 1/2)·dx` (even), matching solver grids of the same
    /// parity so that integer shifts sample the knots exactly.
    pub fn grid_relaxed(params: &ModelParams, solver_grid: &Grid1D) -> Result<Self> {
        params.validate()?;
        let dx = solver_grid.dx();
        let extra = ((SPECTRAL_HALF_WIDTH - solver_grid.half_width()) / dx).ceil().max(0.0) as usize;
        let n = solver_grid.len() + 2 * extra;
        let grid = Grid1D::new(0.5 * (n - 1) as f64 * dx, n)?;
        let q = relax_ground_state(params.p, &grid)?;
        let op = assemble_l_with_profile(params.p, &grid, &q)?;
        let sd = SpectralData::from_operator(params.alpha, &op, &grid)?;
        let x0 = grid.nodes()[0];
        Ok(Self {
            kind: TemplateKind::GridRelaxed,
            p: params.p,
            q: Some(UniformSpline::new(x0, dx, q)?),
            y: UniformSpline::new(x0, dx, sd.y)?,
            nu0: sd.nu0,
            rates: sd.rates,
        })
    }

    pub fn new(kind: TemplateKind, params: &ModelParams, solver_grid: &Grid1D) -> Result<Self> {
        match kind {
            TemplateKind::Analytic => Self::analytic(params),
            TemplateKind::GridRelaxed => Self::grid_relaxed(params, solver_grid),
        }
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    /// `(Q, Q', Q'')` at `x`.
    #[inline]
    pub fn q_all(&self, x: f64) -> (f64, f64, f64) {
        match &self.q {
            Some(s) => s.eval_all(x),
            None => {
                let q = q_unchecked(self.p, x);
                let dq = if x == 0.0 { 0.0 } else { q_prime_unchecked(self.p, x) };
                (q, dq, q - nonlinearity(q, self.p))
            }
        }
    }

    #[inline]
    pub fn q(&self, x: f64) -> f64 {
        match &self.q {
            Some(s) => s.eval(x),
            None => q_unchecked(self.p, x),
        }
    }

    #[inline]
    pub fn y(&self, x: f64) -> f64 {
        self.y.eval(x)
    }
}

/// Newton iteration for `D₂q - q + f(q) = 0` on `grid`, started from the
/// exact ground state. Each update is symmetrised so the iterate cannot drift
/// along the (nearly singular) translation direction.
pub fn relax_ground_state(p: f64, grid: &Grid1D) -> Result<Vec<f64>> {
    let n = grid.len();
    let mut q = grid.sample(|x| q_unchecked(p, x));
    let mut d2 = vec![0.0; n];
    let mut prev_step = f64::INFINITY;
    for _ in 0..30 {
        grid.second_difference(&q, &mut d2);
        let g: Vec<f64> = (0..n).map(|i| d2[i] - q[i] + nonlinearity(q[i], p)).collect();
        let op = assemble_l_with_profile(p, grid, &q)?;
        let delta = op.solve_shifted(0.0, &g)?;
        let mut step = 0.0f64;
        for i in 0..n {
            let d = 0.5 * (delta[i] + delta[n - 1 - i]);
            step = step.max(d.abs());
            q[i] += d;
        }
        for i in 0..n / 2 {
            q[n - 1 - i] = q[i];
        }
        // Newton is quadratic: once the previous update was tiny, the current
        // one sits at the roundoff floor, which grows with the grid size
        if step < 1e-14 || (prev_step < 1e-9 && step < 1e-11) {
            return Ok(q);
        }
        prev_step = step;
    }
    Err(Error::NumericalFailure("ground-state relaxation did not converge".into()))
}
