//! Natural cubic spline through samples on a uniform grid.

use crate::error::{invalid, Result};
use crate::linalg::thomas;

#[derive(Debug, Clone)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl UniformSpline {
    pub fn new(x0: f64, h: f64, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 4 || !(h > 0.0) {
            return Err(invalid("spline needs at least 4 knots and a positive spacing"));
        }
        let mut m = vec![0.0; n];
        let inner = n - 2;
        let rhs: Vec<f64> = (1..n - 1)
            .map(|i| 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h))
            .collect();
        let sol = thomas(&vec![1.0; inner - 1], &vec![4.0; inner], &vec![1.0; inner - 1], &rhs);
        m[1..n - 1].copy_from_slice(&sol);
        Ok(Self { x0, h, y, m })
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + (self.y.len() - 1) as f64 * self.h
    }

    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let s = (x - self.x0) / self.h;
        let last = self.y.len() - 1;
        if !(s >= 0.0 && s <= last as f64) {
            return None;
        }
        let i = (s.floor() as usize).min(last - 1);
        Some((i, s - i as f64))
    }

    /// Value, first and second derivative; zero outside the knot range.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let Some((i, t)) = self.locate(x) else {
            return (0.0, 0.0, 0.0);
        };
        let h = self.h;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let a = 1.0 - t;
        let h2 = h * h;
        let value = a * y0 + t * y1 + h2 / 6.0 * ((a * a * a - a) * m0 + (t * t * t - t) * m1);
        let d1 = (y1 - y0) / h + h / 6.0 * ((1.0 - 3.0 * a * a) * m0 + (3.0 * t * t - 1.0) * m1);
        let d2 = a * m0 + t * m1;
        (value, d1, d2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x).0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.eval_all(x).1
    }
}
