//! The linearised operator `𝓛 = -∂x² + 1 - pQ^{p-1}` around the ground state,
//! its unstable eigenpair and the growth/decay rates of the damped flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ground_state::{check_exponent, q_prime_unchecked, q_unchecked, ModelParams};
use crate::grid::Grid1D;
use crate::linalg::SymTridiagonal;

/// Default truncation half-width for spectral computations.
pub const SPECTRAL_HALF_WIDTH: f64 = 40.0;

/// `-D₂ + 1 - p q^{p-1}` on the grid, homogeneous Dirichlet data outside.
pub fn assemble_l_with_profile(p: f64, grid: &Grid1D, q: &[f64]) -> Result<SymTridiagonal> {
    check_exponent(p)?;
    if q.len() != grid.len() {
        return Err(invalid("profile length does not match the grid"));
    }
    let inv = 1.0 / (grid.dx() * grid.dx());
    let diag = q.iter().map(|&qi| 2.0 * inv + 1.0 - p * qi.abs().powf(p - 1.0)).collect();
    SymTridiagonal::new(diag, vec![-inv; grid.len() - 1])
}

/// `𝓛` for the exact ground state sampled on the grid.
pub fn assemble_l(p: f64, grid: &Grid1D) -> Result<SymTridiagonal> {
    check_exponent(p)?;
    let q = grid.sample(|x| q_unchecked(p, x));
    assemble_l_with_profile(p, grid, &q)
}

/// Sign convention: positive at the centre of the grid, or, for functions
/// vanishing there, positive mass on the left half.
fn fix_sign(v: &mut [f64]) {
    let n = v.len();
    let centre = if n % 2 == 1 { v[n / 2] } else { v[n / 2 - 1] + v[n / 2] };
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let indicator = if centre.abs() > 1e-8 * scale {
        centre
    } else {
        v[..n / 2].iter().sum::<f64>()
    };
    if indicator < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `k`-th eigenpair (0-based, ascending) with the eigenvector normalised in
/// the `dx`-weighted `L²` norm.
pub fn kth_eigenpair(op: &SymTridiagonal, grid: &Grid1D, k: usize) -> Result<(f64, Vec<f64>)> {
    if op.len() != grid.len() {
        return Err(invalid("operator size does not match the grid"));
    }
    let lambda = op.eigenvalue(k)?;
    let n = op.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + k as u64);
    let mut v: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| (-x * x / 50.0).exp() * (1.0 + 0.1 * rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = grid.l2_norm(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    for _ in 0..30 {
        let mut w = op.solve_shifted(lambda, &v)?;
        let norm = grid.l2_norm(&w);
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        fix_sign(&mut w);
        let change = grid.l2_norm(&w.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        v = w;
        if change < 1e-12 {
            debug_assert_eq!(v.len(), n);
            return Ok((lambda, v));
        }
    }
    Err(Error::NumericalFailure(format!("inverse iteration for eigenvalue #{k} did not converge")))
}

pub fn smallest_eigenpair(op: &SymTridiagonal, grid: &Grid1D) -> Result<(f64, Vec<f64>)> {
    kth_eigenpair(op, grid, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub zeta_plus: f64,
    pub zeta_minus: f64,
    pub beta: f64,
}

/// `ν± = -α ± s`, `ζ± = α ± s`, `β = 1/(2s)` with `s = √(α² + ν0²)`.
pub fn rate_constants(alpha: f64, nu0: f64) -> Result<Rates> {
    if !(alpha > 0.0 && nu0 > 0.0 && alpha.is_finite() && nu0.is_finite()) {
        return Err(invalid(format!("rates need alpha > 0 and nu0 > 0, got {alpha}, {nu0}")));
    }
    let s = alpha.hypot(nu0);
    Ok(Rates {
        nu_plus: -alpha + s,
        nu_minus: -alpha - s,
        zeta_plus: alpha + s,
        zeta_minus: alpha - s,
        beta: 0.5 / s,
    })
}

/// Unstable eigenpair of `𝓛` on a grid together with the derived rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    pub nu0: f64,
    #[serde(rename = "Y")]
    pub y: Vec<f64>,
    #[serde(flatten)]
    pub rates: Rates,
}

impl SpectralData {
    /// From the exact ground state on `grid`.
    pub fn compute(params: &ModelParams, grid: &Grid1D) -> Result<Self> {
        params.validate()?;
        let op = assemble_l(params.p, grid)?;
        Self::from_operator(params.alpha, &op, grid)
    }

    pub fn from_operator(alpha: f64, op: &SymTridiagonal, grid: &Grid1D) -> Result<Self> {
        let (lambda, y) = smallest_eigenpair(op, grid)?;
        if lambda >= 0.0 {
            return Err(Error::NumericalFailure(format!(
                "linearised operator has no negative eigenvalue (smallest {lambda})"
            )));
        }
        let nu0 = (-lambda).sqrt();
        Ok(Self { nu0, y, rates: rate_constants(alpha, nu0)? })
    }

    pub fn nu0_sq(&self) -> f64 {
        self.nu0 * self.nu0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityProbe {
    pub form: f64,
    pub proj_y: f64,
    pub proj_q_prime: f64,
}

/// `⟨𝓛ε, ε⟩`, `⟨ε, Y⟩`, `⟨ε, Q'⟩`.
pub fn coercivity_probe(
    op: &SymTridiagonal,
    grid: &Grid1D,
    eps: &[f64],
    y: &[f64],
    q_prime: &[f64],
) -> CoercivityProbe {
    let mut le = vec![0.0; eps.len()];
    op.apply(eps, &mut le);
    CoercivityProbe {
        form: grid.dot(&le, eps),
        proj_y: grid.dot(eps, y),
        proj_q_prime: grid.dot(eps, q_prime),
    }
}

/// Smallest ratio `⟨𝓛ε, ε⟩ / ‖ε‖²_{H¹}` over `samples` random smooth functions
/// projected onto the orthogonal complement of `Y` and `Q'`.
pub fn empirical_coercivity(p: f64, grid: &Grid1D, samples: usize, seed: u64) -> Result<f64> {
    let op = assemble_l(p, grid)?;
    let (_, y) = smallest_eigenpair(&op, grid)?;
    let mut qp = grid.sample(|x| if x == 0.0 { 0.0 } else { q_prime_unchecked(p, x) });
    let n = grid.l2_norm(&qp);
    qp.iter_mut().for_each(|v| *v /= n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let mut eps = random_smooth(grid, &mut rng);
        for basis in [&y, &qp] {
            let c = grid.dot(&eps, basis);
            eps.iter_mut().zip(basis.iter()).for_each(|(e, b)| *e -= c * b);
        }
        let probe = coercivity_probe(&op, grid, &eps, &y, &qp);
        worst = worst.min(probe.form / grid.h1_norm_sq(&eps));
    }
    Ok(worst)
}

/// Sum of a few random Gaussian bumps, some modulated, centred in `[-8, 8]`.
pub fn random_smooth(grid: &Grid1D, rng: &mut impl Rng) -> Vec<f64> {
    let bumps: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-8.0..8.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.0..3.0),
            )
        })
        .collect();
    grid.sample(|x| {
        bumps
            .iter()
            .map(|&(a, c, w, k)| a * (-(x - c).powi(2) / (w * w)).exp() * (k * x).cos())
            .sum()
    })
}
