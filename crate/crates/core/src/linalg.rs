//! Symmetric tridiagonal matrices: products, Sturm counts, bisection and
//! shifted solves with partial pivoting.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    /// `off[i]` couples rows `i` and `i + 1`.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::InvalidParameter(format!(
                "tridiagonal shape mismatch: {} diagonal vs {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (sign changes of the LDLᵀ pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.len() {
            let e2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            d = self.diag[i] - x - e2 / d;
            if d.abs() < tiny {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::InvalidParameter(format!("eigenvalue index {k} out of range")));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * scale {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Solve `(A - shift) x = b` by Gaussian elimination with partial pivoting.
    /// Zero pivots are replaced by a tiny multiple of the matrix scale, which is
    /// what inverse iteration needs when the shift is an eigenvalue.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let (glo, ghi) = self.gershgorin();
        let guard = f64::EPSILON * glo.abs().max(ghi.abs()).max(1.0);
        // rows stored as (lower-diagonal-free) upper band: u0 u1 u2
        let mut a: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut c: Vec<f64> = self.off.clone();
        c.push(0.0);
        let mut sub: Vec<f64> = self.off.clone();
        let mut u2 = vec![0.0; n];
        let mut x = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            let below = sub[i];
            if below.abs() > a[i].abs() {
                // swap rows i and i+1
                let (ai, ci, u2i) = (a[i], c[i], u2[i]);
                a[i] = below;
                c[i] = a[i + 1];
                u2[i] = c[i + 1];
                let m = ai / below;
                a[i + 1] = ci - m * c[i];
                c[i + 1] = u2i - m * u2[i];
                x.swap(i, i + 1);
                x[i + 1] -= m * x[i];
            } else {
                if a[i] == 0.0 {
                    a[i] = guard;
                }
                let m = below / a[i];
                a[i + 1] -= m * c[i];
                x[i + 1] -= m * x[i];
            }
            sub[i] = 0.0;
        }
        if a[n - 1] == 0.0 {
            a[n - 1] = guard;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= c[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / a[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("tridiagonal solve produced non-finite values".into()));
        }
        Ok(x)
    }
}

/// Solve a general (non-symmetric) tridiagonal system with the Thomas
/// algorithm. Only for diagonally dominant systems.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { sup[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i - 1] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn dirichlet_laplacian_eigenvalues() {
        let n = 50;
        let a = laplacian(n);
        for k in [0, 1, 7, 49] {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            let got = a.eigenvalue(k).unwrap();
            assert!((got - exact).abs() < 1e-12, "{k}: {got} vs {exact}");
        }
        assert_eq!(a.count_below(-0.1), 0);
        assert_eq!(a.count_below(4.1), n);
    }

    #[test]
    fn pivoted_solve_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let off: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = SymTridiagonal::new(diag, off).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shift = 0.3;
        let mut b = vec![0.0; n];
        a.apply(&x, &mut b);
        for (bi, xi) in b.iter_mut().zip(&x) {
            *bi -= shift * xi;
        }
        let y = a.solve_shifted(shift, &b).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((xi - yi).abs() < 1e-9, "{xi} vs {yi}");
        }
    }

    #[test]
    fn thomas_solves_dominant_system() {
        let n = 10;
        let sub = vec![1.0; n - 1];
        let sup = vec![1.0; n - 1];
        let diag = vec![4.0; n];
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = 4.0 * x[i] + if i > 0 { x[i - 1] } else { 0.0 } + if i + 1 < n { x[i + 1] } else { 0.0 };
        }
        let y = thomas(&sub, &diag, &sup, &rhs);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
