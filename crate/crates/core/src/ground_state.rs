//! The explicit ground state `Q` of `Q'' - Q + Q^p = 0` and the constants built
//! from it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{trapezoid, Grid1D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub p: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, p: f64) -> Result<Self> {
        let params = Self { alpha, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid(format!("damping alpha must be > 0, got {}", self.alpha)));
        }
        check_exponent(self.p)
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 2.0) {
        return Err(invalid(format!("exponent p must be > 2, got {p}")));
    }
    Ok(())
}

/// `f(u) = |u|^{p-1} u`, evaluated as `sign(u) |u|^p`.
#[inline]
pub fn nonlinearity(u: f64, p: f64) -> f64 {
    let a = u.abs();
    let m = if p == 3.0 { a * a * a } else { a.powf(p) };
    m.copysign(u)
}

/// `F(u) = |u|^{p+1} / (p + 1)`.
#[inline]
pub fn potential(u: f64, p: f64) -> f64 {
    u.abs().powf(p + 1.0) / (p + 1.0)
}

/// Tail amplitude `c_Q = (2p + 2)^{1/(p-1)}`: `Q(x) ~ c_Q e^{-|x|}`.
pub fn tail_amplitude(p: f64) -> f64 {
    (2.0 * p + 2.0).powf(1.0 / (p - 1.0))
}

fn ln_cosh(s: f64) -> f64 {
    let a = s.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Ground state without parameter validation. Evaluated in log form so the
/// tails stay accurate far beyond the range where `cosh` overflows.
#[inline]
pub(crate) fn q_unchecked(p: f64, x: f64) -> f64 {
    let s = 0.5 * (p - 1.0) * x.abs();
    (((0.5 * (p + 1.0)).ln() - 2.0 * ln_cosh(s)) / (p - 1.0)).exp()
}

#[inline]
pub(crate) fn q_prime_unchecked(p: f64, x: f64) -> f64 {
    let s = 0.5 * (p - 1.0) * x.abs();
    (-s.tanh() * q_unchecked(p, x)).copysign(-x)
}

pub fn eval_q(p: f64, x: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(q_unchecked(p, x))
}

/// `Q'(x) = -tanh((p-1)x/2) Q(x)`.
pub fn eval_q_prime(p: f64, x: f64) -> Result<f64> {
    check_exponent(p)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(q_prime_unchecked(p, x))
}

/// Max over the grid of `|D₂Q - Q + Q^p|` with the central second difference.
pub fn residual_q(p: f64, grid: &Grid1D) -> Result<f64> {
    check_exponent(p)?;
    // exact ghost values beyond the ends, so the result measures the
    // consistency error of D₂ alone
    let h = grid.dx();
    let inv = 1.0 / (h * h);
    Ok(grid
        .nodes()
        .iter()
        .map(|&x| {
            let (l, c, r) = (q_unchecked(p, x - h), q_unchecked(p, x), q_unchecked(p, x + h));
            (((l + r) - 2.0 * c) * inv - c + nonlinearity(c, p)).abs()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub half_width: f64,
    pub dx: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { half_width: 40.0, dx: 0.005 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateConsts {
    #[serde(rename = "c_Q")]
    pub c_q: f64,
    pub c_1: f64,
    pub kappa: f64,
    #[serde(rename = "E_Q")]
    pub e_q: f64,
}

/// Relative disagreement tolerated between the `h` and `2h` quadratures.
const QUAD_REFINEMENT_TOL: f64 = 1e-8;

/// `c_Q` in closed form; `c_1 = ‖Q'‖²`, `κ = (c_Q / c_1) ∫ Q^p e^{-x}` and
/// `E(Q, 0) = (1/2 - 1/(p+1)) ∫ Q^{p+1}` by trapezoid quadrature.
pub fn compute_constants(params: &ModelParams, quad: &QuadratureConfig) -> Result<GroundStateConsts> {
    params.validate()?;
    if quad.half_width < 30.0 {
        return Err(invalid(format!("quadrature half-width must be >= 30, got {}", quad.half_width)));
    }
    if !(quad.dx > 0.0 && quad.dx <= 0.01) {
        return Err(invalid(format!("quadrature spacing must be in (0, 0.01], got {}", quad.dx)));
    }
    let p = params.p;
    let fine = integrals(p, quad.half_width, quad.dx);
    let coarse = integrals(p, quad.half_width, 2.0 * quad.dx);
    for (name, a, b) in [
        ("|Q'|^2", fine.0, coarse.0),
        ("Q^p e^-x", fine.1, coarse.1),
        ("Q^(p+1)", fine.2, coarse.2),
    ] {
        if !a.is_finite() || ((a - b) / a).abs() > QUAD_REFINEMENT_TOL {
            return Err(Error::NumericalFailure(format!(
                "quadrature of {name} did not converge under refinement ({a} vs {b})"
            )));
        }
    }
    let (c_1, tail_moment, mass) = fine;
    let c_q = tail_amplitude(p);
    Ok(GroundStateConsts {
        c_q,
        c_1,
        kappa: c_q / c_1 * tail_moment,
        e_q: (0.5 - 1.0 / (p + 1.0)) * mass,
    })
}

fn integrals(p: f64, half_width: f64, dx: f64) -> (f64, f64, f64) {
    let n = (2.0 * half_width / dx).round() as usize + 1;
    let h = 2.0 * half_width / (n - 1) as f64;
    let mut dq2 = Vec::with_capacity(n);
    let mut moment = Vec::with_capacity(n);
    let mut mass = Vec::with_capacity(n);
    for i in 0..n {
        let x = -half_width + i as f64 * h;
        let q = q_unchecked(p, x);
        let dq = if x == 0.0 { 0.0 } else { q_prime_unchecked(p, x) };
        dq2.push(dq * dq);
        moment.push(q.powf(p) * (-x).exp());
        mass.push(q.powf(p + 1.0));
    }
    (trapezoid(&dq2, h), trapezoid(&moment, h), trapezoid(&mass, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn peak_value_for_cubic() {
        assert_relative_eq!(eval_q(3.0, 0.0).unwrap(), 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn rejects_subcritical_exponent() {
        assert!(eval_q(2.0, 0.0).is_err());
        assert!(eval_q_prime(1.5, 0.3).is_err());
        assert!(ModelParams::new(0.0, 3.0).is_err());
        assert!(ModelParams::new(1.0, 2.0).is_err());
    }

    #[test]
    fn even_and_odd_symmetry() {
        for p in [2.5, 3.0, 4.0, 7.0] {
            for k in 0..50 {
                let x = 0.37 * k as f64;
                assert_eq!(eval_q(p, x).unwrap(), eval_q(p, -x).unwrap());
                assert_eq!(eval_q_prime(p, x).unwrap(), -eval_q_prime(p, -x).unwrap());
                assert!(eval_q(p, x).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn tail_remainder_is_second_exponential_order() {
        let cq = tail_amplitude(3.0);
        assert_relative_eq!(cq, 2.0 * 2f64.sqrt(), max_relative = 1e-15);
        for x in [4.0f64, 8.0, 12.0, 16.0] {
            let lead = cq * (-x).exp();
            assert!((eval_q(3.0, x).unwrap() - lead).abs() <= cq * (-3.0 * x).exp() * 1.01 + 1e-14 * lead);
        }
    }

    #[test]
    fn tail_at_ten_within_relative_1e7_of_leading_order() {
        // For p = 3, Q = √2 sech x = 2√2 e^{-x}/(1 + e^{-2x}); the relative gap
        // to 2√2 e^{-x} is e^{-20}/(1 + e^{-20}) ≈ 2e-9.
        let x: f64 = 10.0;
        let lead = 2.0 * 2f64.sqrt() * (-x).exp();
        assert!(((eval_q(3.0, x).unwrap() - lead) / lead).abs() < 1e-7);
        assert!(((eval_q_prime(3.0, x).unwrap() + lead) / lead).abs() < 1e-7);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-3;
        for p in [2.5, 3.0, 5.0] {
            let mut worst: f64 = 0.0;
            for k in 0..=100 {
                let x = -5.0 + 0.1 * k as f64;
                let fd = (eval_q(p, x + h).unwrap() - eval_q(p, x - h).unwrap()) / (2.0 * h);
                worst = worst.max((fd - eval_q_prime(p, x).unwrap()).abs());
            }
            // O(h²) with the third derivative of Q bounded by a few units
            assert!(worst < 10.0 * h * h, "p={p}: {worst}");
        }
    }

    #[test]
    fn closed_form_for_cubic() {
        for k in 0..40 {
            let x = -8.0 + 0.4 * k as f64;
            let exact = 2f64.sqrt() / x.cosh();
            assert_relative_eq!(eval_q(3.0, x).unwrap(), exact, max_relative = 1e-14);
        }
    }

    #[test]
    fn residual_is_second_order() {
        for p in [3.0, 2.5] {
            let coarse = residual_q(p, &Grid1D::with_spacing(20.0, 0.01).unwrap()).unwrap();
            let fine = residual_q(p, &Grid1D::with_spacing(20.0, 0.005).unwrap()).unwrap();
            assert!(coarse <= 1e-3, "p={p}: {coarse}");
            let ratio = coarse / fine;
            assert!((ratio - 4.0).abs() < 0.1, "p={p}: ratio {ratio}");
        }
    }

    #[test]
    fn cubic_constants_match_closed_forms() {
        let params = ModelParams::new(1.0, 3.0).unwrap();
        let c = compute_constants(&params, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(c.c_q, 2.0 * 2f64.sqrt(), max_relative = 1e-15);
        assert!((c.c_1 - 4.0 / 3.0).abs() < 1e-8);
        assert!((c.kappa - 12.0).abs() < 1e-6);
        assert!((c.e_q - 4.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn truncation_width_is_irrelevant() {
        let params = ModelParams::new(1.0, 3.0).unwrap();
        let a = compute_constants(&params, &QuadratureConfig { half_width: 30.0, dx: 0.005 }).unwrap();
        let b = compute_constants(&params, &QuadratureConfig { half_width: 60.0, dx: 0.005 }).unwrap();
        assert!((a.c_1 - b.c_1).abs() < 1e-10);
        assert!((a.kappa - b.kappa).abs() < 1e-10);
        assert!((a.e_q - b.e_q).abs() < 1e-10);
    }

    #[test]
    fn kappa_symmetric_under_reflection() {
        // ∫ Q^p e^{-x} = ∫ Q^p e^{+x} because Q is even.
        let p = 3.7;
        let h = 0.005;
        let n = (80.0 / h) as usize + 1;
        let xs: Vec<f64> = (0..n).map(|i| -40.0 + i as f64 * h).collect();
        let minus: Vec<f64> = xs.iter().map(|&x| q_unchecked(p, x).powf(p) * (-x).exp()).collect();
        let plus: Vec<f64> = xs.iter().map(|&x| q_unchecked(p, x).powf(p) * x.exp()).collect();
        assert_relative_eq!(trapezoid(&minus, h), trapezoid(&plus, h), max_relative = 1e-12);
    }

    #[test]
    fn quadrature_config_is_validated() {
        let params = ModelParams::new(1.0, 3.0).unwrap();
        assert!(compute_constants(&params, &QuadratureConfig { half_width: 20.0, dx: 0.005 }).is_err());
        assert!(compute_constants(&params, &QuadratureConfig { half_width: 40.0, dx: 0.05 }).is_err());
    }

    #[test]
    fn nonlinearity_is_odd_and_defined_for_negative_values() {
        for p in [2.5, 3.0, 4.2] {
            for u in [0.0, 0.3, 1.7, 5.0] {
                assert_eq!(nonlinearity(-u, p), -nonlinearity(u, p));
            }
            assert!(nonlinearity(-0.5, p).is_finite());
        }
    }

    #[test]
    fn constants_positive_for_various_exponents() {
        for p in [2.2, 2.5, 3.0, 4.0, 5.0, 7.5] {
            let c = compute_constants(&ModelParams::new(0.5, p).unwrap(), &QuadratureConfig::default()).unwrap();
            assert!(c.c_q > 0.0 && c.c_1 > 0.0 && c.kappa > 0.0 && c.e_q > 0.0, "p={p}: {c:?}");
        }
    }
}
