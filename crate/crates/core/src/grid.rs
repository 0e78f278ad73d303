//! Uniform symmetric grids on `[-L, L]` and the discrete inner products used
//! throughout the crate.
//!
//! Inner products are plain `dx`-weighted sums. Every operator in the crate is
//! assembled on all nodes with homogeneous Dirichlet data outside the grid, so
//! this is the inner product in which the discrete operators are symmetric.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const MIN_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    half_width: f64,
    n: usize,
    dx: f64,
    #[serde(skip)]
    nodes: Vec<f64>,
}

impl Grid1D {
    /// Grid with `n` nodes covering `[-half_width, half_width]` inclusive.
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid(format!("grid half-width must be positive, got {half_width}")));
        }
        if n < MIN_NODES {
            return Err(invalid(format!("grid needs at least {MIN_NODES} nodes, got {n}")));
        }
        let dx = 2.0 * half_width / (n - 1) as f64;
        let centre = (n - 1) as f64 / 2.0;
        // (i - centre) is exact for both halves, so nodes[n-1-i] == -nodes[i]
        // bit for bit. Parity-preserving runs rely on this.
        let nodes = (0..n).map(|i| (i as f64 - centre) * dx).collect();
        Ok(Self { half_width, n, dx, nodes })
    }

    /// Grid whose spacing is as close as possible to `dx` (node count rounded).
    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(invalid(format!("grid spacing must be positive, got {dx}")));
        }
        let intervals = (2.0 * half_width / dx).round() as usize;
        Self::new(half_width, intervals + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let s = (x + self.half_width) / self.dx;
        (s.round().max(0.0) as usize).min(self.n - 1)
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.n);
        debug_assert_eq!(b.len(), self.n);
        self.dx * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn l2_norm_sq(&self, a: &[f64]) -> f64 {
        self.dot(a, a)
    }

    pub fn l2_norm(&self, a: &[f64]) -> f64 {
        self.l2_norm_sq(a).sqrt()
    }

    /// `‖∂x u‖²` with forward differences over the `n - 1` intervals.
    pub fn gradient_norm_sq(&self, a: &[f64]) -> f64 {
        let inv = 1.0 / self.dx;
        self.dx
            * a.windows(2)
                .map(|w| {
                    let g = (w[1] - w[0]) * inv;
                    g * g
                })
                .sum::<f64>()
    }

    pub fn h1_norm_sq(&self, a: &[f64]) -> f64 {
        self.l2_norm_sq(a) + self.gradient_norm_sq(a)
    }

    pub fn h1_norm(&self, a: &[f64]) -> f64 {
        self.h1_norm_sq(a).sqrt()
    }

    /// `‖(u, v)‖²` in `H¹ × L²`.
    pub fn energy_norm_sq(&self, u: &[f64], v: &[f64]) -> f64 {
        self.h1_norm_sq(u) + self.l2_norm_sq(v)
    }

    /// Composite trapezoid rule over the whole grid.
    pub fn trapezoid(&self, f: &[f64]) -> f64 {
        trapezoid(f, self.dx)
    }

    /// Second-order central second difference, zero Dirichlet data outside.
    pub fn second_difference(&self, u: &[f64], out: &mut [f64]) {
        second_difference(u, self.dx, out);
    }
}

pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => h * (f[1..n - 1].iter().sum::<f64>() + 0.5 * (f[0] + f[n - 1])),
    }
}

/// `out[i] = (u[i-1] + u[i+1] - 2 u[i]) / h²` with `u = 0` beyond both ends.
///
/// The neighbour sum is formed first so that mirror-symmetric input produces
/// mirror-symmetric output exactly in floating point.
pub fn second_difference(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    let inv = 1.0 / (h * h);
    for i in 0..n {
        let left = if i > 0 { u[i - 1] } else { 0.0 };
        let right = if i + 1 < n { u[i + 1] } else { 0.0 };
        out[i] = ((left + right) - 2.0 * u[i]) * inv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_exactly_symmetric() {
        for n in [64, 65, 1000, 6001, 8192] {
            let g = Grid1D::new(40.0, n).unwrap();
            let x = g.nodes();
            for i in 0..n {
                assert_eq!(x[i], -x[n - 1 - i]);
            }
            assert!((x[0] + 40.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(Grid1D::new(10.0, 10).is_err());
        assert!(Grid1D::new(-1.0, 100).is_err());
        assert!(Grid1D::with_spacing(10.0, 0.0).is_err());
    }

    #[test]
    fn with_spacing_rounds_node_count() {
        let g = Grid1D::with_spacing(60.0, 0.02).unwrap();
        assert_eq!(g.len(), 6001);
        assert!((g.dx() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_integrates_gaussian() {
        let g = Grid1D::with_spacing(10.0, 0.01).unwrap();
        let f = g.sample(|x| (-x * x).exp());
        assert!((g.trapezoid(&f) - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn second_difference_preserves_parity_bitwise() {
        let g = Grid1D::new(5.0, 101).unwrap();
        let u = g.sample(|x| x.sin() * (-x * x).exp());
        let mut d = vec![0.0; u.len()];
        g.second_difference(&u, &mut d);
        let n = u.len();
        for i in 0..n {
            assert_eq!(d[i], -d[n - 1 - i]);
        }
    }
}
