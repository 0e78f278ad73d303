//! Scenario orchestration.

use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{RunConfig, Scenario};
use super::record::{ConstantsUsed, RunFacts, RunRecord, Termination, TimeseriesRow};
use super::shoot::{shoot, DirectionKind, ShootContext, ShootSetup};
use super::track::{run_tracked, OnExit, Symmetry, TrackedRun, Tracker};
use crate::error::{invalid, Result};
use crate::ground_state::{compute_constants, QuadratureConfig};
use crate::grid::Grid1D;
use crate::interaction_ode::{exact_profile_y, integrate_centers, interaction_velocities, tau_profile, OdeState, OdeTolerance};
use crate::modulation::{default_mu, interaction_sums, soliton_sum, Sign, Signs};
use crate::profile::Profile;
use crate::solver::FieldState;
use crate::spectrum::random_smooth;

/// Result of a scenario; shooting a single soliton also yields the two
/// bracket-endpoint runs.
pub struct ScenarioOutput {
    pub record: RunRecord,
    pub endpoints: Option<(RunRecord, RunRecord)>,
}

impl ScenarioOutput {
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        self.record.write_dir(dir)?;
        if let Some((lo, hi)) = &self.endpoints {
            lo.write_dir(&dir.join("endpoint_lo"))?;
            hi.write_dir(&dir.join("endpoint_hi"))?;
        }
        Ok(())
    }
}

struct Setup {
    grid: Grid1D,
    profile: Profile,
    mu: f64,
    constants: ConstantsUsed,
}

fn setup(config: &RunConfig) -> Result<Setup> {
    let grid = config.make_grid()?;
    let profile = Profile::new(config.template, &config.params, &grid)?;
    let rates = *profile.rates();
    let mu = config.mu.unwrap_or_else(|| default_mu(config.params.alpha, rates.nu_minus));
    let gs = compute_constants(&config.params, &QuadratureConfig::default())?;
    let constants = ConstantsUsed {
        c_q: gs.c_q,
        c_1: gs.c_1,
        kappa: gs.kappa,
        e_q: gs.e_q,
        nu0: profile.nu0(),
        nu_plus: rates.nu_plus,
        nu_minus: rates.nu_minus,
        beta: rates.beta,
        mu,
        template: config.template,
        thresholds: config.thresholds,
        theta_fit: config.theta_fit,
    };
    Ok(Setup { grid, profile, mu, constants })
}

fn facts(run: &TrackedRun) -> RunFacts {
    let e = run.last_state.energy_norm();
    RunFacts {
        termination: run.termination,
        terminal_energy_norm: e.is_finite().then_some(e),
        energy_norm_decaying: run.energy_norm_decaying(),
        shooting: None,
    }
}

/// Writes `(x, u, v)` snapshots at the first sample at or after each requested time.
struct Snapshots {
    dir: Option<PathBuf>,
    pending: Vec<f64>,
    half_dt: f64,
}

impl Snapshots {
    fn new(config: &RunConfig) -> Self {
        let mut pending = config.snapshot_times.clone();
        pending.sort_by(f64::total_cmp);
        pending.reverse();
        Self { dir: config.output_dir.as_ref().map(|d| d.join("snapshots")), pending, half_dt: 0.5 * config.dt }
    }

    fn observe(&mut self, st: &FieldState) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        while let Some(&ts) = self.pending.last() {
            if ts > st.t + self.half_dt {
                break;
            }
            self.pending.pop();
            std::fs::create_dir_all(dir)?;
            write_state_csv(&dir.join(format!("t_{ts}.csv")), st)?;
        }
        Ok(())
    }
}

/// `(x, u, v)` CSV of a field state.
pub fn write_state_csv(path: &Path, st: &FieldState) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "u", "v"])?;
    for ((x, u), v) in st.grid.nodes().iter().zip(&st.u).zip(&st.v) {
        w.write_record([format!("{x:?}"), format!("{u:?}"), format!("{v:?}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Read an `(x, u, v)` CSV; the nodes must be uniform and symmetric.
pub fn read_state_csv(path: &Path, t: f64) -> Result<FieldState> {
    let mut rd = csv::Reader::from_path(path)?;
    let (mut xs, mut us, mut vs) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| crate::Error::Schema("state rows need x, u, v".into()))?
                .trim()
                .parse()
                .map_err(|e| crate::Error::Schema(format!("bad number: {e}")))
        };
        xs.push(parse(0)?);
        us.push(parse(1)?);
        vs.push(parse(2)?);
    }
    let n = xs.len();
    if n < 2 {
        return Err(crate::Error::Schema("state file has fewer than two nodes".into()));
    }
    let hw = xs[n - 1];
    if (xs[0] + hw).abs() > 1e-9 * hw {
        return Err(crate::Error::Schema("state nodes must be symmetric about 0".into()));
    }
    let grid = Grid1D::new(hw, n)?;
    if xs.iter().zip(grid.nodes()).any(|(a, b)| (a - b).abs() > 1e-9 * hw) {
        return Err(crate::Error::Schema("state nodes must be uniform".into()));
    }
    FieldState::new(t, us, vs, grid)
}

fn zero_velocity(grid: &Grid1D) -> Vec<f64> {
    vec![0.0; grid.len()]
}

fn symmetric_pair(z0: &[f64]) -> bool {
    z0.len() == 2 && z0[0] == -z0[1]
}

pub fn run_scenario(config: &RunConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let out = match config.scenario {
        Scenario::OdeOnly => ScenarioOutput { record: run_ode(config)?, endpoints: None },
        Scenario::Vanishing => ScenarioOutput { record: run_vanishing(config)?, endpoints: None },
        Scenario::SameSignPair => ScenarioOutput { record: same_sign_probe(config)?, endpoints: None },
        Scenario::SingleSoliton => {
            if config.bisection.is_some() {
                shoot_single(config)?
            } else {
                ScenarioOutput { record: run_single(config, config.perturbation, config.t_end)?, endpoints: None }
            }
        }
        Scenario::TwoSolitonShoot => ScenarioOutput { record: shoot_two_soliton(config)?, endpoints: None },
        Scenario::KSolitonShoot => ScenarioOutput { record: shoot_k_soliton(config)?, endpoints: None },
    };
    if let Some(dir) = &config.output_dir {
        out.write_dir(dir)?;
        info!("run written to {}", dir.display());
    }
    Ok(out)
}

fn run_vanishing(config: &RunConfig) -> Result<RunRecord> {
    let s = setup(config)?;
    let mut u = s.grid.sample(|x| config.perturbation * (-x * x / 4.0).exp());
    if config.seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let noise = random_smooth(&s.grid, &mut rng);
        for (ui, n) in u.iter_mut().zip(noise) {
            *ui += 0.1 * config.perturbation * n;
        }
    }
    let state = FieldState::new(config.t0, u, zero_velocity(&s.grid), s.grid.clone())?;
    let mut tracker = Tracker::new(&s.profile, Signs(vec![]), &[], config.decompose_options(), config.params.alpha, s.mu);
    let mut snaps = Snapshots::new(config);
    let run = run_tracked(
        state,
        config.step_config(),
        &mut tracker,
        config.t_end,
        config.steps_per_sample()?,
        OnExit::Continue,
        |st| snaps.observe(st),
    )?;
    let f = facts(&run);
    Ok(RunRecord::assemble(config.clone(), run.rows, f, s.constants))
}

/// Analytic single-soliton data `(Q + aY, ν⁺aY)` centred at `z0[0]`.
fn single_data(config: &RunConfig, grid: &Grid1D, a: f64) -> Result<FieldState> {
    let analytic = Profile::analytic(&config.params)?;
    let z = config.z0[0];
    let sign = config.signs_or_default().0[0].value();
    let nu = analytic.rates().nu_plus;
    let u = grid.sample(|x| sign * (analytic.q(x - z) + a * analytic.y(x - z)));
    let v = grid.sample(|x| sign * nu * a * analytic.y(x - z));
    FieldState::new(config.t0, u, v, grid.clone())
}

fn run_single(config: &RunConfig, a: f64, t_end: f64) -> Result<RunRecord> {
    let s = setup(config)?;
    let state = single_data(config, &s.grid, a)?;
    let mut tracker =
        Tracker::new(&s.profile, config.signs_or_default(), &config.z0, config.decompose_options(), config.params.alpha, s.mu);
    let mut snaps = Snapshots::new(config);
    let run = run_tracked(
        state,
        config.step_config(),
        &mut tracker,
        t_end,
        config.steps_per_sample()?,
        OnExit::Continue,
        |st| snaps.observe(st),
    )?;
    let f = facts(&run);
    let mut cfg = config.clone();
    cfg.t_end = t_end;
    cfg.perturbation = a;
    cfg.bisection = None;
    cfg.output_dir = None;
    Ok(RunRecord::assemble(cfg, run.rows, f, s.constants))
}

/// Bisection over `a` in `(Q + aY, ν⁺aY)`; the endpoint runs are validated concurrently.
pub fn shoot_single(config: &RunConfig) -> Result<ScenarioOutput> {
    let s = setup(config)?;
    let analytic = Profile::analytic(&config.params)?;
    let (z, sign) = (config.z0[0], config.signs_or_default().0[0].value());
    let nu = analytic.rates().nu_plus;
    let y = s.grid.sample(|x| sign * analytic.y(x - z));
    let vy = y.iter().map(|v| nu * v).collect();
    let base = single_data(config, &s.grid, 0.0)?;
    let ctx = ShootContext { profile: &s.profile, config, step: config.step_config(), mu: s.mu };
    let shoot_setup = ShootSetup {
        base,
        sigma: config.signs_or_default(),
        z0: config.z0.clone(),
        symmetry: Symmetry::None,
        directions: DirectionKind::Fixed(vec![(y, vy)]),
        watch: vec![0],
        segmented: false,
    };
    let res = shoot(&ctx, &shoot_setup)?;
    let (lo, hi) = res.first_bracket;
    let horizon = config.t0 + config.shooting.validation_horizon;
    let (rec_lo, rec_hi) = std::thread::scope(|sc| {
        let h_lo = sc.spawn(|| run_single(config, lo, horizon));
        let h_hi = sc.spawn(|| run_single(config, hi, horizon));
        (h_lo.join().expect("endpoint run panicked"), h_hi.join().expect("endpoint run panicked"))
    });
    let (rec_lo, rec_hi) = (rec_lo?, rec_hi?);
    let mut report = res.report;
    report.endpoints = Some((rec_lo.summary.classification, rec_hi.summary.classification));
    let e = res.last_state.energy_norm();
    let facts = RunFacts {
        termination: res.termination,
        terminal_energy_norm: e.is_finite().then_some(e),
        energy_norm_decaying: decaying(&res.energy_norms),
        shooting: Some(report),
    };
    let record = RunRecord::assemble(config.clone(), res.rows, facts, s.constants);
    Ok(ScenarioOutput { record, endpoints: Some((rec_lo, rec_hi)) })
}

fn decaying(norms: &[f64]) -> bool {
    match norms.len() {
        0 => false,
        n => norms[n - 1] <= norms[(n - 1) * 4 / 5],
    }
}

fn shoot_record(config: &RunConfig, s: Setup, shoot_setup: ShootSetup) -> Result<RunRecord> {
    let ctx = ShootContext { profile: &s.profile, config, step: config.step_config(), mu: s.mu };
    let res = shoot(&ctx, &shoot_setup)?;
    let e = res.last_state.energy_norm();
    let facts = RunFacts {
        termination: res.termination,
        terminal_energy_norm: e.is_finite().then_some(e),
        energy_norm_decaying: decaying(&res.energy_norms),
        shooting: Some(res.report),
    };
    Ok(RunRecord::assemble(config.clone(), res.rows, facts, s.constants))
}

fn soliton_state(config: &RunConfig, s: &Setup, sigma: &Signs) -> Result<FieldState> {
    let u = soliton_sum(&s.profile, s.grid.nodes(), &sigma.values(), &config.z0);
    FieldState::new(config.t0, u, zero_velocity(&s.grid), s.grid.clone())
}

/// Odd two-soliton threshold, `σ = (∓, ±)` at `∓z₀`, one amplitude along `W⃗(a, a)`.
pub fn shoot_two_soliton(config: &RunConfig) -> Result<RunRecord> {
    if !symmetric_pair(&config.z0) {
        return Err(invalid("two_soliton_shoot uses the odd reduction: z0 must be [-z, z]"));
    }
    let s = setup(config)?;
    let sigma = config.signs_or_default();
    let base = soliton_state(config, &s, &sigma)?;
    let shoot_setup = ShootSetup {
        base,
        sigma,
        z0: config.z0.clone(),
        symmetry: Symmetry::Odd,
        directions: DirectionKind::WMap(vec![vec![1.0, 1.0]]),
        watch: vec![1],
        segmented: true,
    };
    shoot_record(config, s, shoot_setup)
}

/// Even three-soliton threshold at `(-z, 0, z)`: outer pair and centre are two
/// independent unstable coordinates, bisected alternately.
pub fn shoot_k_soliton(config: &RunConfig) -> Result<RunRecord> {
    let z0 = &config.z0;
    if !(z0.len() == 3 && z0[1] == 0.0 && z0[0] == -z0[2]) {
        return Err(invalid("k_soliton_shoot uses the even reduction: z0 must be [-z, 0, z]"));
    }
    let sigma = config.signs_or_default();
    if sigma.0[0] != sigma.0[2] || sigma.0[0] == sigma.0[1] {
        return Err(invalid("k_soliton_shoot needs alternating signs"));
    }
    let s = setup(config)?;
    let base = soliton_state(config, &s, &sigma)?;
    let shoot_setup = ShootSetup {
        base,
        sigma,
        z0: z0.clone(),
        symmetry: Symmetry::Even,
        directions: DirectionKind::WMap(vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]),
        watch: vec![0, 1],
        segmented: true,
    };
    shoot_record(config, s, shoot_setup)
}

/// Even same-sign pair; runs past the tube exit to see what the pair becomes.
pub fn same_sign_probe(config: &RunConfig) -> Result<RunRecord> {
    let s = setup(config)?;
    let sigma = config.signs_or_default();
    let mut state = soliton_state(config, &s, &sigma)?;
    if symmetric_pair(&config.z0) {
        state.make_even();
    }
    let mut tracker = Tracker::new(&s.profile, sigma, &config.z0, config.decompose_options(), config.params.alpha, s.mu);
    let mut snaps = Snapshots::new(config);
    let run = run_tracked(
        state,
        config.step_config(),
        &mut tracker,
        config.t_end,
        config.steps_per_sample()?,
        OnExit::Continue,
        |st| snaps.observe(st),
    )?;
    let f = facts(&run);
    Ok(RunRecord::assemble(config.clone(), run.rows, f, s.constants))
}

/// Longest stretch of sampled time over which a same-sign pair is tracked with growing spacing.
pub fn longest_same_sign_growth(record: &RunRecord) -> f64 {
    let sigma = record.config.signs_or_default();
    let mut best: f64 = 0.0;
    let mut start: Option<f64> = None;
    for w in record.rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let growing = a.is_tracked()
            && b.is_tracked()
            && (0..a.k().saturating_sub(1))
                .any(|i| sigma.0[i] == sigma.0[i + 1] && b.z[i + 1] - b.z[i] > a.z[i + 1] - a.z[i]);
        if growing {
            let s0 = *start.get_or_insert(a.t);
            best = best.max(b.t - s0);
        } else {
            start = None;
        }
    }
    best
}

fn run_ode(config: &RunConfig) -> Result<RunRecord> {
    let gs = compute_constants(&config.params, &QuadratureConfig::default())?;
    let (alpha, kappa, k) = (config.params.alpha, gs.kappa, config.k);
    let prof = tau_profile(k, alpha, kappa)?;
    let y0 = if config.z0.is_empty() { exact_profile_y(config.t0, &prof)? } else { config.z0.clone() };
    let n = ((config.t_end - config.t0) / config.sample_dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| config.t0 + (config.t_end - config.t0) * i as f64 / n as f64).collect();
    let traj = integrate_centers(&OdeState::new(config.t0, y0.clone())?, &times[1..], alpha, kappa, OdeTolerance::default())?;
    let sigma = Signs::alternating(k, Sign::Minus);
    let rows = std::iter::once(&config.t0)
        .chain(&traj.t)
        .zip(std::iter::once(&y0).chain(&traj.y))
        .map(|(&t, y)| {
            let (f_plus, f_minus) = interaction_sums(y, &sigma);
            let nan = vec![f64::NAN; k];
            TimeseriesRow {
                t,
                z: y.clone(),
                ell: interaction_velocities(y, alpha, kappa),
                n: f64::NAN,
                f_minus,
                f_plus,
                b: f64::NAN,
                e: f64::NAN,
                dtu_l2: f64::NAN,
                a_plus: nan.clone(),
                a_minus: nan,
            }
        })
        .collect();
    let grid = config.make_grid()?;
    let profile = Profile::new(config.template, &config.params, &grid)?;
    let rates = *profile.rates();
    let constants = ConstantsUsed {
        c_q: gs.c_q,
        c_1: gs.c_1,
        kappa,
        e_q: gs.e_q,
        nu0: profile.nu0(),
        nu_plus: rates.nu_plus,
        nu_minus: rates.nu_minus,
        beta: rates.beta,
        mu: config.mu.unwrap_or_else(|| default_mu(alpha, rates.nu_minus)),
        template: config.template,
        thresholds: config.thresholds,
        theta_fit: config.theta_fit,
    };
    let facts = RunFacts {
        termination: Termination::Completed,
        terminal_energy_norm: None,
        energy_norm_decaying: false,
        shooting: None,
    };
    Ok(RunRecord::assemble(config.clone(), rows, facts, constants))
}
