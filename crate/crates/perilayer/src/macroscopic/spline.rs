//! Least-squares cubic B-spline with uniform knots, used to smooth interface
//! traces before they are differentiated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq::lstsq;

/// Cubic spline `s(x) = Σ c_k B_k(x)` on `[a, b]` split into `intervals`
/// equal pieces. Outside `[a, b]` the end polynomial pieces are continued.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    pub a: f64,
    pub b: f64,
    pub intervals: usize,
    pub coefficients: Vec<f64>,
}

/// Values and first two derivatives of the four cubic B-splines that are
/// nonzero on a unit interval, at local coordinate `t`.
fn local_basis(t: f64) -> [[f64; 3]; 4] {
    let s = 1.0 - t;
    [
        [s * s * s / 6.0, -0.5 * s * s, s],
        [
            (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
            0.5 * (3.0 * t * t - 4.0 * t),
            3.0 * t - 2.0,
        ],
        [
            (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
            0.5 * (-3.0 * t * t + 2.0 * t + 1.0),
            -3.0 * t + 1.0,
        ],
        [t * t * t / 6.0, 0.5 * t * t, t],
    ]
}

impl CubicSpline {
    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let h = (self.b - self.a) / self.intervals as f64;
        let u = (x - self.a) / h;
        let i = (u.floor().max(0.0) as usize).min(self.intervals - 1);
        (i, u - i as f64, h)
    }

    /// Least-squares fit to the samples `(x, y)`.
    pub fn fit(samples: &[(f64, f64)], a: f64, b: f64, intervals: usize) -> Result<Self> {
        if !(b > a) || intervals == 0 {
            return Err(Error::Numerical(format!("invalid spline interval [{}, {}]", a, b)));
        }
        let n = intervals + 3;
        let mut spline = CubicSpline {
            a,
            b,
            intervals,
            coefficients: vec![0.0; n],
        };
        let mut rows = Vec::with_capacity(samples.len());
        let mut rhs = Vec::with_capacity(samples.len());
        for &(x, y) in samples {
            let (i, t, _) = spline.locate(x);
            let mut row = vec![0.0; n];
            for (k, basis) in local_basis(t).iter().enumerate() {
                row[i + k] = basis[0];
            }
            rows.push(row);
            rhs.push(y);
        }
        spline.coefficients = lstsq(&rows, &rhs)
            .map_err(|e| Error::Numerical(format!("spline fit failed: {}", e)))?;
        Ok(spline)
    }

    /// Derivative of order `d ≤ 2` at `x`.
    pub fn derivative(&self, x: f64, d: usize) -> f64 {
        let (i, t, h) = self.locate(x);
        let basis = local_basis(t);
        let v: f64 = (0..4).map(|k| self.coefficients[i + k] * basis[k][d]).sum();
        v / h.powi(d as i32)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_polynomials() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x + x * x * x;
        let samples: Vec<(f64, f64)> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).map(|x| (x, p(x))).collect();
        let s = CubicSpline::fit(&samples, -1.0, 1.0, 7).unwrap();
        for x in [-0.9, -0.31, 0.0, 0.42, 0.99] {
            assert!((s.value(x) - p(x)).abs() < 1e-11);
            assert!((s.derivative(x, 1) - (-2.0 + x + 3.0 * x * x)).abs() < 1e-10);
            assert!((s.derivative(x, 2) - (1.0 + 6.0 * x)).abs() < 1e-9);
        }
    }

    #[test]
    fn smooths_noise() {
        let samples: Vec<(f64, f64)> = (0..=400)
            .map(|i| {
                let x = i as f64 / 400.0;
                (x, x.sin() + 1e-3 * if i % 2 == 0 { 1.0 } else { -1.0 })
            })
            .collect();
        let s = CubicSpline::fit(&samples, 0.0, 1.0, 10).unwrap();
        assert!((s.value(0.5) - 0.5f64.sin()).abs() < 1e-4);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(CubicSpline::fit(&[(0.0, 1.0), (1.0, 2.0)], 0.0, 1.0, 4).is_err());
    }
}
