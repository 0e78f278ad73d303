//! Linear map from prescribed unstable coordinates to a perturbation field.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid1D;
use crate::modulation::Signs;
use crate::profile::Profile;

/// Closest admissible soliton spacing for the Gram system.
pub const MIN_WMAP_SPACING: f64 = 5.0;

/// Reciprocal condition number below which the Gram matrix counts as singular.
const GRAM_RCOND: f64 = 1e-12;

/// `W = Σ_j B_j Y_j + V_j ∂xQ_j` with `⟨W, ∂xQ_k⟩ = 0` and `⟨W, Y_k⟩ = β a_k`,
/// where `Y_j = σ_j Y(· - z_j)` and `∂xQ_j = σ_j T'(· - z_j)`.
#[derive(Debug, Clone)]
pub struct WMap {
    /// Column `j` holds the `B` coefficients of `W(e_j)`.
    pub b: DMatrix<f64>,
    /// Column `j` holds the `V` coefficients of `W(e_j)`.
    pub v: DMatrix<f64>,
    nu_plus: f64,
    ys: Vec<Vec<f64>>,
    dqs: Vec<Vec<f64>>,
}

pub fn build_wmap(profile: &Profile, grid: &Grid1D, sigma: &Signs, z: &[f64]) -> Result<WMap> {
    let k = sigma.len();
    if k == 0 || z.len() != k {
        return Err(invalid(format!("W-map needs {k} centres, got {}", z.len())));
    }
    for w in z.windows(2) {
        if !(w[1] - w[0] >= MIN_WMAP_SPACING) {
            return Err(Error::IllConditioned(format!(
                "W-map needs spacing >= {MIN_WMAP_SPACING}, got {}",
                w[1] - w[0]
            )));
        }
    }
    let nodes = grid.nodes();
    let sig = sigma.values();
    let ys: Vec<Vec<f64>> =
        z.iter().zip(&sig).map(|(&zk, &s)| nodes.iter().map(|&x| s * profile.y(x - zk)).collect()).collect();
    let dqs: Vec<Vec<f64>> = z
        .iter()
        .zip(&sig)
        .map(|(&zk, &s)| nodes.iter().map(|&x| s * profile.q_all(x - zk).1).collect())
        .collect();
    // basis order: Y_1..Y_K, ∂xQ_1..∂xQ_K
    let basis: Vec<&Vec<f64>> = ys.iter().chain(&dqs).collect();
    let n = 2 * k;
    let gram = DMatrix::from_fn(n, n, |i, j| grid.dot(basis[i], basis[j]));
    let svd = gram.clone().svd(false, false);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > GRAM_RCOND * smax) {
        return Err(Error::IllConditioned(format!("W-map Gram matrix singular (rcond {:.2e})", smin / smax)));
    }
    let lu = gram.lu();
    let beta = profile.rates().beta;
    let mut b = DMatrix::zeros(k, k);
    let mut v = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut rhs = DVector::zeros(n);
        rhs[j] = beta;
        let c = lu.solve(&rhs).ok_or_else(|| Error::IllConditioned("W-map Gram solve failed".into()))?;
        for i in 0..k {
            b[(i, j)] = c[i];
            v[(i, j)] = c[k + i];
        }
    }
    Ok(WMap { b, v, nu_plus: profile.rates().nu_plus, ys, dqs })
}

impl WMap {
    pub fn k(&self) -> usize {
        self.ys.len()
    }

    /// `W(a)` on the grid.
    pub fn field(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.k() {
            return Err(invalid(format!("expected {} amplitudes, got {}", self.k(), a.len())));
        }
        let av = DVector::from_column_slice(a);
        let bc = &self.b * &av;
        let vc = &self.v * &av;
        let mut w = vec![0.0; self.ys[0].len()];
        for j in 0..self.k() {
            for (wi, (y, d)) in w.iter_mut().zip(self.ys[j].iter().zip(&self.dqs[j])) {
                *wi += bc[j] * y + vc[j] * d;
            }
        }
        Ok(w)
    }

    /// `W⃗(a) = (W(a), ν⁺ W(a))`.
    pub fn data(&self, a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let w = self.field(a)?;
        let wv = w.iter().map(|x| self.nu_plus * x).collect();
        Ok((w, wv))
    }
}
