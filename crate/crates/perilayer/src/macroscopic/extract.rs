//! Extraction of corner coefficients from angular projections on arcs.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::quadrature::gauss_legendre;
use crate::fem::Side;
use crate::geometry::{lambda, Corner, CornerFrame, Point};
use crate::lstsq::lstsq;

/// Gauss points per sub-sector in the angular projections.
pub const ANGULAR_POINTS: usize = 64;

/// Coefficients ℓ_q of the modal expansion `Σ ℓ_q r^{λ_q} w_q(θ)` at a corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerCoeffs {
    pub corner: Corner,
    pub q: Vec<i32>,
    pub coefficients: Vec<f64>,
    pub fit_radii: Vec<f64>,
    /// Root-mean-square fit residual in coefficient units.
    pub fit_residual: f64,
    /// False when the residual exceeds 5% of the largest coefficient.
    pub reliable: bool,
}

impl CornerCoeffs {
    /// Coefficient of mode `q`, zero when it was not extracted.
    pub fn get(&self, q: i32) -> f64 {
        self.q
            .iter()
            .position(|&k| k == q)
            .map_or(0.0, |i| self.coefficients[i])
    }
}

/// Five logarithmically spaced radii in [0.1 L, 0.3 L].
pub fn default_radii(l: f64) -> Vec<f64> {
    (0..5)
        .map(|i| 0.1 * l * 3f64.powf(i as f64 / 4.0))
        .collect()
}

/// `(4/(3π)) ∫ u(r, θ) w_k(θ) dθ` over the sector, by Gauss–Legendre
/// quadrature on each sub-sector.
pub fn angular_projection(
    frame: &CornerFrame,
    k: i32,
    r: f64,
    sample: &dyn Fn(Point, Side) -> Option<f64>,
) -> Result<f64> {
    let (x, w) = gauss_legendre(ANGULAR_POINTS);
    let mut total = 0.0;
    for (side, (lo, hi)) in [(Side::Top, frame.top_range()), (Side::Bottom, frame.bottom_range())] {
        let half = 0.5 * (hi - lo);
        for (xi, wi) in x.iter().zip(&w) {
            let t = lo + half * (xi + 1.0);
            let p = frame.point(r, t);
            let u = sample(p, side).ok_or_else(|| {
                Error::Numerical(format!(
                    "extraction arc r = {} leaves the mesh at ({:.6}, {:.6})",
                    r, p[0], p[1]
                ))
            })?;
            total += half * wi * u * frame.mode(k, t);
        }
    }
    Ok(4.0 / (3.0 * PI) * total)
}

/// Fits the projections on every radius to `ℓ_k r^{λ_k} − ℓ_{−k} r^{−λ_k}`
/// for each `k = |q|` (w_{−k} = −w_k), keeping the unknowns listed in `q_range`.
pub fn extract_corner_coeffs(
    frame: &CornerFrame,
    sample: &dyn Fn(Point, Side) -> Option<f64>,
    q_range: &[i32],
    radii: &[f64],
) -> Result<CornerCoeffs> {
    if q_range.iter().any(|&q| q == 0) {
        return Err(Error::Numerical("mode index 0 does not exist".into()));
    }
    let ks: BTreeSet<i32> = q_range.iter().map(|q| q.abs()).collect();
    let mut found: Vec<(i32, f64)> = Vec::new();
    let mut sq = 0.0;
    let mut count = 0usize;
    for &k in &ks {
        let unknowns: Vec<i32> = [k, -k].into_iter().filter(|q| q_range.contains(q)).collect();
        if radii.len() < unknowns.len() {
            return Err(Error::Numerical(format!(
                "{} radii cannot determine {} coefficients",
                radii.len(),
                unknowns.len()
            )));
        }
        let lk = lambda(k);
        let basis = |q: i32, r: f64| if q > 0 { r.powf(lk) } else { -r.powf(-lk) };
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut scales = Vec::new();
        for &r in radii {
            let p = angular_projection(frame, k, r, sample)?;
            let row: Vec<f64> = unknowns.iter().map(|&q| basis(q, r)).collect();
            scales.push(row.iter().map(|v| v.abs()).sum::<f64>());
            rows.push(row);
            rhs.push(p);
        }
        let c = lstsq(&rows, &rhs)?;
        for (row, (p, s)) in rows.iter().zip(rhs.iter().zip(&scales)) {
            let model: f64 = row.iter().zip(&c).map(|(a, b)| a * b).sum();
            sq += ((p - model) / s).powi(2);
            count += 1;
        }
        found.extend(unknowns.into_iter().zip(c));
    }
    let mut q = Vec::new();
    let mut coefficients = Vec::new();
    for &want in q_range {
        if let Some(&(_, v)) = found.iter().find(|(k, _)| *k == want) {
            if !q.contains(&want) {
                q.push(want);
                coefficients.push(v);
            }
        }
    }
    let fit_residual = (sq / count.max(1) as f64).sqrt();
    let largest = coefficients.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(CornerCoeffs {
        corner: frame.corner,
        q,
        coefficients,
        fit_radii: radii.to_vec(),
        fit_residual,
        reliable: fit_residual <= 0.05 * largest || fit_residual < 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic(frame: CornerFrame, m: i32) -> impl Fn(Point, Side) -> Option<f64> {
        move |p, _| {
            let (r, t) = frame.polar(p);
            Some(r.powf(lambda(m)) * frame.mode(m, t))
        }
    }

    #[test]
    fn pure_modes_are_recovered() {
        for corner in Corner::BOTH {
            let frame = CornerFrame::new(corner, 1.0);
            let radii = default_radii(1.0);
            for m in [1, -1, 2] {
                let c = extract_corner_coeffs(&frame, &analytic(frame, m), &[-2, -1, 1, 2, 3], &radii).unwrap();
                for (&q, &v) in c.q.iter().zip(&c.coefficients) {
                    let expect = if q == m { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-9, "{:?} m {} q {} {}", corner, m, q, v);
                }
                assert!(c.reliable);
            }
        }
    }

    #[test]
    fn extraction_is_linear() {
        let frame = CornerFrame::new(Corner::Plus, 1.0);
        let radii = default_radii(1.0);
        let f = analytic(frame, 1);
        let g = analytic(frame, 2);
        let combo = |p: Point, s: Side| Some(2.0 * f(p, s)? - 0.5 * g(p, s)? + 0.1 * p[0] * p[1]);
        let q = [1, 2];
        let c = extract_corner_coeffs(&frame, &combo, &q, &radii).unwrap();
        let a = extract_corner_coeffs(&frame, &f, &q, &radii).unwrap();
        let b = extract_corner_coeffs(&frame, &g, &q, &radii).unwrap();
        let x = extract_corner_coeffs(&frame, &|p: Point, _| Some(p[0] * p[1]), &q, &radii).unwrap();
        for i in 0..2 {
            let lin = 2.0 * a.coefficients[i] - 0.5 * b.coefficients[i] + 0.1 * x.coefficients[i];
            assert!((c.coefficients[i] - lin).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_samples_are_errors() {
        let frame = CornerFrame::new(Corner::Plus, 1.0);
        assert!(extract_corner_coeffs(&frame, &|_, _| None, &[1], &[0.1, 0.2]).is_err());
    }
}
