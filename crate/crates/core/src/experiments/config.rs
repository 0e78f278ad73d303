use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ground_state::ModelParams;
use crate::grid::Grid1D;
use crate::modulation::{DecomposeOptions, Signs};
use crate::profile::TemplateKind;
use crate::solver::StepConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Vanishing,
    SingleSoliton,
    TwoSolitonShoot,
    KSolitonShoot,
    SameSignPair,
    OdeOnly,
}

impl Scenario {
    pub fn is_shoot(self) -> bool {
        matches!(self, Scenario::SingleSoliton | Scenario::TwoSolitonShoot | Scenario::KSolitonShoot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub dx: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 60.0, dx: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectionConfig {
    pub lo: f64,
    pub hi: f64,
    pub max_iter: usize,
    pub width_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Terminal energy norm below which a run counts as vanishing.
    pub vanish: f64,
    /// Residual norm `‖ε⃗‖` beyond which the decomposition is abandoned.
    pub tube_radius: f64,
    /// `|a⁺|` at which a shooting trial is declared to have left the threshold.
    pub departure: f64,
    /// `𝒩` still accepted at the end of a tracked soliton run.
    pub tracked_n: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { vanish: 1e-4, tube_radius: 0.3, departure: 5e-3, tracked_n: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Length of one re-shooting segment for multi-soliton thresholds.
    pub segment_length: f64,
    /// Interval between decompositions during a classification trial.
    pub check_dt: f64,
    /// Horizon of a classification trial.
    pub trial_horizon: f64,
    /// Half-width of the bracket used when re-shooting at a segment start.
    pub restart_bracket: f64,
    /// Horizon of the full runs that validate the final bracket endpoints.
    pub validation_horizon: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            segment_length: 15.0,
            check_dt: 0.5,
            trial_horizon: 60.0,
            restart_bracket: 1e-5,
            validation_horizon: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: ModelParams,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "K", default)]
    pub k: usize,
    #[serde(default)]
    pub signs: Option<Signs>,
    /// Initial centres (or, for the ODE, initial `y`).
    #[serde(default)]
    pub z0: Vec<f64>,
    /// Scenario-dependent amplitude: Gaussian height for `vanishing`, the
    /// unstable-mode amplitude for an unbisected `single_soliton` run.
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub bisection: Option<BisectionConfig>,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    pub t_end: f64,
    /// Initial time (the ODE needs `t0 > 0`).
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub template: TemplateKind,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub shooting: ShootingConfig,
    /// Parameter `μ` of the energy functional; defaults to `0.9 min(1, α, |ν⁻|)`.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_theta")]
    pub theta_fit: f64,
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
    /// Times at which `(x, u, v)` snapshots are written.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    0.01
}

fn default_sample_dt() -> f64 {
    1.0
}

fn default_theta() -> f64 {
    1.2
}

impl RunConfig {
    /// Minimal configuration for a scenario with every optional knob at its default.
    pub fn new(scenario: Scenario, params: ModelParams, t_end: f64) -> Self {
        Self {
            scenario,
            params,
            grid: GridConfig::default(),
            dt: default_dt(),
            k: 0,
            signs: None,
            z0: Vec::new(),
            perturbation: 0.0,
            bisection: None,
            sample_dt: default_sample_dt(),
            t_end,
            t0: 0.0,
            output_dir: None,
            template: TemplateKind::default(),
            thresholds: Thresholds::default(),
            shooting: ShootingConfig::default(),
            mu: None,
            theta_fit: default_theta(),
            fit_window: None,
            snapshot_times: Vec::new(),
            seed: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn make_grid(&self) -> Result<Grid1D> {
        Grid1D::with_spacing(self.grid.half_width, self.grid.dx)
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig { dt: self.dt, alpha: self.params.alpha, p: self.params.p }
    }

    pub fn decompose_options(&self) -> DecomposeOptions {
        DecomposeOptions { tube_radius: self.thresholds.tube_radius, ..DecomposeOptions::default() }
    }

    /// Signs, defaulting to the alternating pattern starting with `-`.
    pub fn signs_or_default(&self) -> Signs {
        self.signs.clone().unwrap_or_else(|| {
            let first = if self.k == 1 { crate::modulation::Sign::Plus } else { crate::modulation::Sign::Minus };
            Signs::alternating(self.k, first)
        })
    }

    /// Samples land on whole steps.
    pub fn steps_per_sample(&self) -> Result<u64> {
        let m = (self.sample_dt / self.dt).round();
        if !(m >= 1.0) || ((m * self.dt - self.sample_dt).abs() > 1e-9 * self.sample_dt) {
            return Err(invalid(format!(
                "sample_dt {} must be a positive multiple of dt {}",
                self.sample_dt, self.dt
            )));
        }
        Ok(m as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_end.is_finite() && self.t_end > self.t0) {
            return Err(invalid(format!("t_end {} must exceed t0 {}", self.t_end, self.t0)));
        }
        if !(self.sample_dt > 0.0) {
            return Err(invalid("sample_dt must be positive"));
        }
        if !(self.theta_fit > 1.0) {
            return Err(invalid("theta_fit must exceed 1"));
        }
        if let Some(s) = &self.signs {
            if s.len() != self.k {
                return Err(invalid(format!("{} signs given for K = {}", s.len(), self.k)));
            }
        }
        if let Some(b) = &self.bisection {
            if !(b.lo < b.hi && b.width_tol > 0.0 && b.max_iter > 0) {
                return Err(invalid("bisection needs lo < hi, width_tol > 0 and max_iter > 0"));
            }
        }
        if let Some([a, b]) = self.fit_window {
            if !(a < b) {
                return Err(invalid("fit window must be increasing"));
            }
        }
        let need_centres = |k: usize| -> Result<()> {
            if self.z0.len() != k {
                return Err(invalid(format!("scenario needs {k} initial centres in z0, got {}", self.z0.len())));
            }
            if !self.z0.windows(2).all(|w| w[1] > w[0]) {
                return Err(invalid("z0 must be strictly increasing"));
            }
            Ok(())
        };
        match self.scenario {
            Scenario::OdeOnly => {
                if self.k < 2 {
                    return Err(invalid("ode_only needs K >= 2"));
                }
                if !(self.t0 > 0.0) {
                    return Err(invalid("ode_only needs t0 > 0"));
                }
                if !self.z0.is_empty() {
                    need_centres(self.k)?;
                }
                return Ok(());
            }
            Scenario::Vanishing => {
                if self.k != 0 {
                    return Err(invalid("vanishing runs track no solitons (K = 0)"));
                }
            }
            Scenario::SingleSoliton => {
                if self.k != 1 {
                    return Err(invalid("single_soliton needs K = 1"));
                }
                need_centres(1)?;
            }
            Scenario::TwoSolitonShoot => {
                if self.k != 2 {
                    return Err(invalid("two_soliton_shoot needs K = 2"));
                }
                need_centres(2)?;
                if self.bisection.is_none() {
                    return Err(invalid("shoot scenarios need a bisection block"));
                }
                let s = self.signs_or_default();
                if s.0[0] == s.0[1] {
                    return Err(invalid("two_soliton_shoot needs opposite signs"));
                }
            }
            Scenario::KSolitonShoot => {
                if self.k != 3 {
                    return Err(invalid("k_soliton_shoot supports the even K = 3 reduction only"));
                }
                need_centres(3)?;
                if self.bisection.is_none() {
                    return Err(invalid("shoot scenarios need a bisection block"));
                }
            }
            Scenario::SameSignPair => {
                if self.k != 2 {
                    return Err(invalid("same_sign_pair needs K = 2"));
                }
                need_centres(2)?;
                let s = self.signs_or_default();
                if s.0[0] != s.0[1] {
                    return Err(invalid("same_sign_pair needs equal signs"));
                }
            }
        }
        self.make_grid()?;
        self.step_config().validate(&self.make_grid()?)?;
        self.steps_per_sample()?;
        Ok(())
    }
}
