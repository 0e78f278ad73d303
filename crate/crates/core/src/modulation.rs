//! Modulation of a field state near a sum of solitons: centres `z_k`,
//! velocity parameters `ℓ_k`, the residual `ε⃗ = (ε, η)` and the projections
//! on the exponential directions, together with the diagnostic functionals.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ground_state::{nonlinearity, potential, GroundStateConsts};
use crate::profile::Profile;
use crate::solver::{energy, FieldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(format!("sign must be +1 or -1, got {v}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Sign pattern such as `"-+"` or `"+++"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Signs(pub Vec<Sign>);

impl Signs {
    /// `σ_k = σ₁ (-1)^{k-1}`.
    pub fn alternating(k: usize, first: Sign) -> Self {
        Self((0..k).map(|i| if i % 2 == 0 { first } else { first.flip() }).collect())
    }

    pub fn uniform(k: usize, s: Sign) -> Self {
        Self(vec![s; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|s| s.value()).collect()
    }
}

impl FromStr for Signs {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '+' => Ok(Sign::Plus),
                '-' => Ok(Sign::Minus),
                other => Err(invalid(format!("invalid sign character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if signs.is_empty() {
            return Err(invalid("empty sign pattern"));
        }
        Ok(Self(signs))
    }
}

impl TryFrom<String> for Signs {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Signs> for String {
    fn from(s: Signs) -> String {
        s.to_string()
    }
}

impl fmt::Display for Signs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// `‖ε⃗‖` above which the state is declared out of the tube.
    pub tube_radius: f64,
    pub max_iter: usize,
    pub min_spacing: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { tube_radius: 0.3, max_iter: 50, min_spacing: 2.0 }
    }
}

/// Orthogonality residual at which Newton stops iterating.
const NEWTON_TOL: f64 = 1e-13;
/// Orthogonality residual accepted when Newton stalls at round-off.
const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    pub sigma: Signs,
    pub z: Vec<f64>,
    pub ell: Vec<f64>,
    #[serde(skip)]
    pub eps: Vec<f64>,
    #[serde(skip)]
    pub eta: Vec<f64>,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    /// `‖ε⃗‖` in `H¹ × L²`.
    pub eps_norm: f64,
    /// Largest `|⟨ε, ∂xQ_k⟩|` or `|⟨η, ∂xQ_k⟩|`.
    pub ortho_residual: f64,
    pub newton_iterations: usize,
}

impl Decomposition {
    pub fn k(&self) -> usize {
        self.z.len()
    }
}

/// Unsigned translates `T(· - z)`, `T'(· - z)`, `T''(· - z)`.
struct Translates {
    q: Vec<f64>,
    dq: Vec<f64>,
    d2q: Vec<f64>,
}

fn translates(profile: &Profile, nodes: &[f64], z: f64) -> Translates {
    let n = nodes.len();
    let mut t = Translates { q: vec![0.0; n], dq: vec![0.0; n], d2q: vec![0.0; n] };
    for (i, &x) in nodes.iter().enumerate() {
        let (a, b, c) = profile.q_all(x - z);
        t.q[i] = a;
        t.dq[i] = b;
        t.d2q[i] = c;
    }
    t
}

/// `R = Σ σ_k T(· - z_k)` on the nodes.
pub fn soliton_sum(profile: &Profile, nodes: &[f64], sigma: &[f64], z: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; nodes.len()];
    for (&s, &zk) in sigma.iter().zip(z) {
        for (ri, &x) in r.iter_mut().zip(nodes) {
            *ri += s * profile.q(x - zk);
        }
    }
    r
}

fn check_spacing(z: &[f64], min_spacing: f64) -> Result<()> {
    for w in z.windows(2) {
        if !(w[1] - w[0] >= min_spacing) {
            return Err(Error::IllConditioned(format!(
                "soliton spacing {} below {min_spacing}",
                w[1] - w[0]
            )));
        }
    }
    Ok(())
}

struct Residual {
    g: DVector<f64>,
    eps: Vec<f64>,
    parts: Vec<Translates>,
}

fn orthogonality(state: &FieldState, profile: &Profile, sigma: &[f64], z: &[f64]) -> Residual {
    let nodes = state.grid.nodes();
    let parts: Vec<Translates> = z.iter().map(|&zk| translates(profile, nodes, zk)).collect();
    let mut eps = state.u.clone();
    for (s, t) in sigma.iter().zip(&parts) {
        for (e, q) in eps.iter_mut().zip(&t.q) {
            *e -= s * q;
        }
    }
    let g = DVector::from_iterator(z.len(), parts.iter().map(|t| state.grid.dot(&eps, &t.dq)));
    Residual { g, eps, parts }
}

/// Decompose `state` around `K = sigma.len()` solitons starting from `z_guess`.
pub fn decompose(
    state: &FieldState,
    profile: &Profile,
    sigma: &Signs,
    z_guess: &[f64],
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    let k = sigma.len();
    if k == 0 || z_guess.len() != k {
        return Err(invalid(format!("need {k} centre guesses, got {}", z_guess.len())));
    }
    check_spacing(z_guess, opts.min_spacing)?;
    let sig = sigma.values();
    let grid = &state.grid;
    let mut z = z_guess.to_vec();
    let mut res = orthogonality(state, profile, &sig, &z);
    let mut iterations = 0;
    loop {
        let gnorm = res.g.amax();
        if gnorm <= NEWTON_TOL {
            break;
        }
        if iterations >= opts.max_iter {
            if gnorm <= ORTHO_TOL {
                break;
            }
            return Err(Error::OutOfTube(format!("centre Newton did not converge in {} iterations", opts.max_iter)));
        }
        iterations += 1;
        let mut jac = DMatrix::zeros(k, k);
        for kk in 0..k {
            for j in 0..k {
                jac[(kk, j)] = if j == kk {
                    let t = &res.parts[kk];
                    sig[kk] * grid.dot(&t.dq, &t.dq) - grid.dot(&res.eps, &t.d2q)
                } else {
                    sig[j] * grid.dot(&res.parts[j].dq, &res.parts[kk].dq)
                };
            }
        }
        let step = jac
            .lu()
            .solve(&(-&res.g))
            .ok_or_else(|| Error::IllConditioned("singular centre Jacobian".into()))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            if trial.windows(2).all(|w| w[1] > w[0]) {
                let r = orthogonality(state, profile, &sig, &trial);
                if r.g.norm() < res.g.norm() {
                    z = trial;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            if gnorm <= ORTHO_TOL {
                break;
            }
            return Err(Error::OutOfTube("centre Newton made no progress".into()));
        }
    }
    check_spacing(&z, opts.min_spacing)?;

    let nodes = grid.nodes();
    let ys: Vec<Vec<f64>> = z.iter().map(|&zk| nodes.iter().map(|&x| profile.y(x - zk)).collect()).collect();
    // ℓ from ⟨v + Σ ℓ_j ∂xQ_j, ∂xQ_k⟩ = 0 with ∂xQ_j = σ_j T'(· - z_j)
    let mut m = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for kk in 0..k {
        for j in 0..k {
            m[(kk, j)] = sig[j] * sig[kk] * grid.dot(&res.parts[j].dq, &res.parts[kk].dq);
        }
        rhs[kk] = -sig[kk] * grid.dot(&state.v, &res.parts[kk].dq);
    }
    let ell = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned("singular velocity Gram matrix".into()))?;
    let mut eta = state.v.clone();
    for j in 0..k {
        let c = ell[j] * sig[j];
        for (e, d) in eta.iter_mut().zip(&res.parts[j].dq) {
            *e += c * d;
        }
    }
    let (zeta_plus, zeta_minus) = (profile.rates().zeta_plus, profile.rates().zeta_minus);
    let mut a_plus = Vec::with_capacity(k);
    let mut a_minus = Vec::with_capacity(k);
    let mut ortho: f64 = res.g.amax();
    for j in 0..k {
        let ey = grid.dot(&res.eps, &ys[j]);
        let hy = grid.dot(&eta, &ys[j]);
        a_plus.push(sig[j] * (zeta_plus * ey + hy));
        a_minus.push(sig[j] * (zeta_minus * ey + hy));
        ortho = ortho.max(grid.dot(&eta, &res.parts[j].dq).abs());
    }
    let eps_norm = grid.energy_norm_sq(&res.eps, &eta).sqrt();
    if !(eps_norm <= opts.tube_radius) {
        return Err(Error::OutOfTube(format!(
            "residual norm {eps_norm:.3e} exceeds tube radius {}",
            opts.tube_radius
        )));
    }
    Ok(Decomposition {
        sigma: sigma.clone(),
        z,
        ell: ell.iter().copied().collect(),
        eps: res.eps,
        eta,
        a_plus,
        a_minus,
        eps_norm,
        ortho_residual: ortho,
        newton_iterations: iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "F_plus")]
    pub f_plus: f64,
    #[serde(rename = "F_minus")]
    pub f_minus: f64,
    pub b: f64,
    #[serde(rename = "calE")]
    pub cal_e: f64,
    #[serde(rename = "calB")]
    pub cal_b: f64,
}

/// `min(1, α, |ν⁻|)`, the largest admissible `μ`.
pub fn mu_max(alpha: f64, nu_minus: f64) -> f64 {
    1.0f64.min(alpha).min(nu_minus.abs())
}

pub fn default_mu(alpha: f64, nu_minus: f64) -> f64 {
    0.9 * mu_max(alpha, nu_minus)
}

/// `y_k = z_k + ℓ_k / (2α)`.
pub fn damped_centres(dec: &Decomposition, alpha: f64) -> Vec<f64> {
    dec.z.iter().zip(&dec.ell).map(|(z, l)| z + l / (2.0 * alpha)).collect()
}

/// `(F₊, F₋)` from centres and signs.
pub fn interaction_sums(y: &[f64], sigma: &Signs) -> (f64, f64) {
    let mut plus = 0.0;
    let mut minus = 0.0;
    for (k, w) in y.windows(2).enumerate() {
        let e = (-(w[1] - w[0])).exp();
        if sigma.0[k] == sigma.0[k + 1] {
            plus += e;
        } else {
            minus += e;
        }
    }
    (plus, minus)
}

pub fn diagnostics(
    dec: &Decomposition,
    state: &FieldState,
    profile: &Profile,
    alpha: f64,
    mu: f64,
) -> Result<Diagnostics> {
    let nu_minus = profile.rates().nu_minus;
    if !(mu > 0.0 && mu <= mu_max(alpha, nu_minus)) {
        return Err(invalid(format!(
            "mu must lie in (0, {}], got {mu}",
            mu_max(alpha, nu_minus)
        )));
    }
    let grid = &state.grid;
    let ell_sq: f64 = dec.ell.iter().map(|l| l * l).sum();
    let n = (dec.eps_norm * dec.eps_norm + ell_sq).sqrt();
    let y = damped_centres(dec, alpha);
    let (f_plus, f_minus) = interaction_sums(&y, &dec.sigma);
    let b = dec.a_plus.iter().map(|a| a * a).sum();
    let rho = 2.0 * alpha - mu;
    let p = profile.p();
    let r = soliton_sum(profile, grid.nodes(), &dec.sigma.values(), &dec.z);
    let local: Vec<f64> = (0..r.len())
        .map(|i| {
            let (e, h, ri) = (dec.eps[i], dec.eta[i], r[i]);
            let nl = potential(ri + e, p) - potential(ri, p) - nonlinearity(ri, p) * e;
            (1.0 - rho * mu) * e * e + (h + mu * e).powi(2) - 2.0 * nl
        })
        .collect();
    let cal_e = grid.gradient_norm_sq(&dec.eps) + grid.dx() * local.iter().sum::<f64>();
    let cal_b = ell_sq + dec.a_minus.iter().map(|a| a * a).sum::<f64>() / (2.0 * mu);
    Ok(Diagnostics { n, f_plus, f_minus, b, cal_e, cal_b })
}

/// `|E(u⃗) - K E_Q + c₁κF₊ - c₁κF₋|`.
pub fn energy_expansion_check(
    state: &FieldState,
    dec: &Decomposition,
    consts: &GroundStateConsts,
    alpha: f64,
    p: f64,
) -> f64 {
    let y = damped_centres(dec, alpha);
    let (f_plus, f_minus) = interaction_sums(&y, &dec.sigma);
    let c = consts.c_1 * consts.kappa;
    (energy(state, p) - dec.k() as f64 * consts.e_q + c * f_plus - c * f_minus).abs()
}
