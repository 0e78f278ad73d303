use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use dnlkg::experiments::{
    fit_asymptotics, longest_same_sign_growth, read_state_csv, run_scenario, RunConfig, RunRecord, Scenario,
};
use dnlkg::grid::Grid1D;
use dnlkg::interaction_ode::{
    exact_profile_y, integrate_centers, profile_residual, tau_profile, OdeState, OdeTolerance,
};
use dnlkg::modulation::{decompose, default_mu, diagnostics, DecomposeOptions, Signs};
use dnlkg::profile::{Profile, TemplateKind};
use dnlkg::stats::linear_fit;
use dnlkg::ground_state::compute_constants;
use dnlkg::{ModelParams, QuadratureConfig, SpectralData};

/// Numerical laboratory for the damped nonlinear Klein-Gordon equation.
#[derive(Parser)]
#[command(name = "dnlkg", version, about)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state constants c_Q, c_1, kappa, E_Q.
    GroundState {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 40.0)]
        quad_halfwidth: f64,
        #[arg(long, default_value_t = 0.005)]
        quad_dx: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unstable eigenpair of the linearised operator and the derived rates.
    Spectrum {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "L", default_value_t = 40.0)]
        half_width: f64,
        #[arg(long, default_value_t = 8193)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `(x, Y)` samples.
        #[arg(long)]
        y_csv: Option<PathBuf>,
    },
    /// Run the scenario in `--config`.
    Simulate,
    /// Decompose a saved `(x, u, v)` state around K solitons.
    Modulate(ModulateArgs),
    /// Integrate the centre ODE.
    Ode(OdeArgs),
    /// Run a shooting scenario from `--config`.
    Shoot,
    /// Run the same-sign pair probe from `--config`.
    Probe,
    /// Refit the rows of a saved run.
    Fit {
        /// Run directory holding config.json and timeseries.csv.
        #[arg(long)]
        run: PathBuf,
        /// Fit window `t_lo,t_hi`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        window: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct ModulateArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    signs: Signs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    guess: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    #[arg(long, value_enum, default_value = "grid-relaxed")]
    template: TemplateArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TemplateArg {
    Analytic,
    GridRelaxed,
}

impl From<TemplateArg> for TemplateKind {
    fn from(t: TemplateArg) -> Self {
        match t {
            TemplateArg::Analytic => TemplateKind::Analytic,
            TemplateArg::GridRelaxed => TemplateKind::GridRelaxed,
        }
    }
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    t0: f64,
    #[arg(long)]
    t1: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "profile")]
    y0: Option<Vec<f64>>,
    /// Start from the asymptotic profile at `t0`.
    #[arg(long)]
    profile: bool,
    /// Number of log-spaced output times.
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            // downstream closed early (e.g. piped into `head`)
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().context("this subcommand needs --config <file>")?;
    let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(dir) = &cli.out_dir {
        cfg.output_dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn summarise(record: &RunRecord) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(&record.summary)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match &cli.command {
        Command::GroundState { p, quad_halfwidth, quad_dx, out } => {
            let quad = QuadratureConfig { half_width: *quad_halfwidth, dx: *quad_dx };
            // the constants do not involve the damping
            let consts = compute_constants(&ModelParams::new(1.0, *p)?, &quad)?;
            emit(&serde_json::to_value(consts)?, out.as_deref())?;
        }
        Command::Spectrum { p, alpha, half_width, n, out, y_csv } => {
            let params = ModelParams::new(*alpha, *p)?;
            let grid = Grid1D::new(*half_width, *n)?;
            let spec = SpectralData::compute(&params, &grid)?;
            let r = spec.rates;
            emit(
                &json!({
                    "nu0_sq": spec.nu0_sq(),
                    "nu_plus": r.nu_plus,
                    "nu_minus": r.nu_minus,
                    "zeta_plus": r.zeta_plus,
                    "zeta_minus": r.zeta_minus,
                    "beta": r.beta,
                }),
                out.as_deref(),
            )?;
            if let Some(path) = y_csv {
                let mut f = fs::File::create(path)?;
                writeln!(f, "x,Y")?;
                for (x, y) in grid.nodes().iter().zip(&spec.y) {
                    writeln!(f, "{x:?},{y:?}")?;
                }
            }
        }
        Command::Simulate => {
            let cfg = load_config(&cli)?;
            let out = run_scenario(&cfg)?;
            emit(&summarise(&out.record)?, None)?;
        }
        Command::Shoot => {
            let cfg = load_config(&cli)?;
            if !cfg.scenario.is_shoot() {
                bail!("shoot needs a single_soliton, two_soliton_shoot or k_soliton_shoot config");
            }
            if cfg.bisection.is_none() {
                bail!("shoot needs a bisection block in the config");
            }
            let out = run_scenario(&cfg)?;
            emit(&summarise(&out.record)?, None)?;
        }
        Command::Probe => {
            let cfg = load_config(&cli)?;
            if cfg.scenario != Scenario::SameSignPair {
                bail!("probe needs a same_sign_pair config");
            }
            let out = run_scenario(&cfg)?;
            let rec = &out.record;
            let tracked: Vec<_> = rec.rows.iter().filter(|r| r.is_tracked()).collect();
            let shrinking = tracked.windows(2).all(|w| w[1].z[1] - w[1].z[0] < w[0].z[1] - w[0].z[0]);
            let exit = tracked.last().map(|r| r.t);
            emit(
                &json!({
                    "classification": rec.summary.classification,
                    "spacing_strictly_decreasing": shrinking,
                    "last_tracked_time": exit,
                    "longest_growth_interval": longest_same_sign_growth(rec),
                    "termination": rec.summary.run.termination,
                }),
                None,
            )?;
        }
        Command::Modulate(a) => modulate(a)?,
        Command::Ode(a) => ode(a, cli.out_dir.as_deref())?,
        Command::Fit { run, window } => {
            let mut rec = RunRecord::read_dir(run)?;
            if let Some(w) = window {
                if w.len() != 2 {
                    bail!("--window takes t_lo,t_hi");
                }
                rec.config.fit_window = Some([w[0], w[1]]);
            }
            let fits = fit_asymptotics(&rec.rows, &rec.config)?;
            emit(&serde_json::to_value(fits)?, None)?;
        }
    }
    Ok(())
}

fn modulate(a: &ModulateArgs) -> Result<()> {
    if a.signs.len() != a.k || a.guess.len() != a.k {
        bail!("--signs and --guess must both have K = {} entries", a.k);
    }
    let params = ModelParams::new(a.alpha, a.p)?;
    let state = read_state_csv(&a.state, a.t)?;
    let profile = Profile::new(a.template.into(), &params, &state.grid)?;
    let dec = decompose(&state, &profile, &a.signs, &a.guess, &DecomposeOptions::default())?;
    let mu = a.mu.unwrap_or_else(|| default_mu(a.alpha, profile.rates().nu_minus));
    let diag = diagnostics(&dec, &state, &profile, a.alpha, mu)?;
    emit(&json!({ "decomposition": dec, "diagnostics": diag }), a.out.as_deref())
}

fn ode(a: &OdeArgs, out_dir: Option<&Path>) -> Result<()> {
    if !(a.t1 > a.t0 && a.t0 > 0.0) {
        bail!("need 0 < t0 < t1");
    }
    if a.samples < 2 {
        bail!("need at least 2 samples");
    }
    let prof = tau_profile(a.k, a.alpha, a.kappa)?;
    let y0 = match (&a.y0, a.profile) {
        (Some(y), _) => y.clone(),
        (None, true) => exact_profile_y(a.t0, &prof)?,
        (None, false) => bail!("give --y0 or --profile"),
    };
    let ratio = (a.t1 / a.t0).ln();
    let times: Vec<f64> =
        (1..a.samples).map(|i| a.t0 * (ratio * i as f64 / (a.samples - 1) as f64).exp()).collect();
    let traj = integrate_centers(&OdeState::new(a.t0, y0.clone())?, &times, a.alpha, a.kappa, OdeTolerance::default())?;
    let all_t: Vec<f64> = std::iter::once(a.t0).chain(traj.t.iter().copied()).collect();
    let all_y: Vec<&Vec<f64>> = std::iter::once(&y0).chain(&traj.y).collect();
    let mut deviation: f64 = 0.0;
    for (t, y) in all_t.iter().zip(&all_y) {
        let ybar = exact_profile_y(*t, &prof)?;
        deviation = y.iter().zip(&ybar).map(|(a, b)| (a - b).abs()).fold(deviation, f64::max);
    }
    let lt: Vec<f64> = all_t.iter().map(|t| t.ln()).collect();
    let gap_slopes = (0..a.k - 1)
        .map(|g| {
            let gaps: Vec<f64> = all_y.iter().map(|y| y[g + 1] - y[g]).collect();
            Ok(linear_fit(&lt, &gaps)?.slope)
        })
        .collect::<Result<Vec<f64>>>()?;
    let summary = json!({
        "tau": prof.tau,
        "gamma": prof.gamma,
        "profile_residual_t0": profile_residual(a.t0, &prof)?,
        "profile_residual_t1": profile_residual(a.t1, &prof)?,
        "max_deviation_from_profile": deviation,
        "mean_drift": traj.mean_drift,
        "gap_log_slopes": gap_slopes,
    });
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut f = fs::File::create(dir.join("ode.csv"))?;
        let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=a.k).map(|i| format!("y_{i}"))).collect();
        writeln!(f, "{}", header.join(","))?;
        for (t, y) in all_t.iter().zip(&all_y) {
            let vals: Vec<String> = std::iter::once(*t).chain(y.iter().copied()).map(|v| format!("{v:?}")).collect();
            writeln!(f, "{}", vals.join(","))?;
        }
        emit(&summary, Some(&dir.join("ode_summary.json")))?;
        info!("ODE output written to {}", dir.display());
    }
    emit(&summary, None)
}
