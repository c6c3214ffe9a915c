//! Closed-form corner transmission lifts `r^λ G(θ)` with piecewise
//! trigonometric `G`, and the jump amplitudes they are built from.

use serde::{Deserialize, Serialize};

use crate::cell::TransmissionConstants;
use crate::error::{Error, Result};
use crate::fem::Side;
use crate::geometry::{lambda, Corner, CornerFrame};

/// `G(θ) = A sin(λθ) + B cos(λθ)` on each sub-sector, so that `r^λ G(θ)` is
/// harmonic on both sides of the interface ray. When λ = 0 the basis is
/// `(θ, 1)` instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeLift {
    pub corner: Corner,
    pub lambda: f64,
    /// Jump of G across the interface ray, top minus bottom.
    pub a: f64,
    /// Jump of G' across the interface ray, top minus bottom.
    pub b: f64,
    /// (A, B) on the top sub-sector.
    pub top: [f64; 2],
    /// (A, B) on the bottom sub-sector.
    pub bottom: [f64; 2],
}

fn basis(lambda: f64, theta: f64) -> ([f64; 2], [f64; 2]) {
    if lambda == 0.0 {
        ([theta, 1.0], [1.0, 0.0])
    } else {
        let (s, c) = (lambda * theta).sin_cos();
        ([s, c], [lambda * c, -lambda * s])
    }
}

/// True when λ is one of the singular exponents 2m/3, m ≠ 0.
pub fn is_resonant(lambda: f64) -> bool {
    let m = 1.5 * lambda;
    m.round() != 0.0 && (m - m.round()).abs() < 1e-12
}

impl ConeLift {
    /// The angular mode `w_m` written as a lift without jumps.
    pub fn mode(corner: Corner, m: i32) -> ConeLift {
        let frame = CornerFrame::at_origin(corner);
        let l = lambda(m);
        let shift = frame.mode(m, 0.0);
        let shift_d = frame.mode_derivative(m, 0.0) / l;
        let coeffs = [shift_d, shift];
        ConeLift {
            corner,
            lambda: l,
            a: 0.0,
            b: 0.0,
            top: coeffs,
            bottom: coeffs,
        }
    }

    fn coefficients(&self, side: Side) -> [f64; 2] {
        match side {
            Side::Top => self.top,
            Side::Bottom => self.bottom,
        }
    }

    /// G(θ) on the given side.
    pub fn value(&self, side: Side, theta: f64) -> f64 {
        let (v, _) = basis(self.lambda, theta);
        let c = self.coefficients(side);
        c[0] * v[0] + c[1] * v[1]
    }

    /// G'(θ) on the given side.
    pub fn derivative(&self, side: Side, theta: f64) -> f64 {
        let (_, d) = basis(self.lambda, theta);
        let c = self.coefficients(side);
        c[0] * d[0] + c[1] * d[1]
    }

    /// The four defining conditions re-evaluated: wall values on both sides
    /// and the mismatch of both jumps.
    pub fn residuals(&self) -> [f64; 4] {
        let frame = CornerFrame::at_origin(self.corner);
        let g = frame.layer_angle();
        [
            self.value(Side::Top, frame.top_wall()),
            self.value(Side::Bottom, frame.bottom_wall()),
            self.value(Side::Top, g) - self.value(Side::Bottom, g) - self.a,
            self.derivative(Side::Top, g) - self.derivative(Side::Bottom, g) - self.b,
        ]
    }
}

/// Solves for the piecewise coefficients of the lift with exponent λ and
/// jumps `[G] = a`, `[G'] = b` on the interface ray, G vanishing on both walls.
pub fn cone_lift(corner: Corner, lambda: f64, a: f64, b: f64) -> Result<ConeLift> {
    if is_resonant(lambda) {
        return Err(Error::Numerical(format!(
            "exponent {} is a singular exponent of the sector; the lift needs logarithmic terms",
            lambda
        )));
    }
    let frame = CornerFrame::at_origin(corner);
    let g = frame.layer_angle();
    let (wt, _) = basis(lambda, frame.top_wall());
    let (wb, _) = basis(lambda, frame.bottom_wall());
    let (vg, dg) = basis(lambda, g);
    // Unknowns (A_top, B_top, A_bottom, B_bottom).
    let m = [
        [wt[0], wt[1], 0.0, 0.0, 0.0],
        [0.0, 0.0, wb[0], wb[1], 0.0],
        [vg[0], vg[1], -vg[0], -vg[1], a],
        [dg[0], dg[1], -dg[0], -dg[1], b],
    ];
    let x = solve4(m).ok_or_else(|| {
        Error::Numerical(format!("cone lift system singular for exponent {}", lambda))
    })?;
    Ok(ConeLift {
        corner,
        lambda,
        a,
        b,
        top: [x[0], x[1]],
        bottom: [x[2], x[3]],
    })
}

fn solve4(mut m: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    let scale = m
        .iter()
        .flat_map(|r| r[..4].iter())
        .fold(0.0f64, |s, v| s.max(v.abs()));
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if !(m[p][c].abs() > 1e-12 * scale) {
            return None;
        }
        m.swap(c, p);
        for r in 0..4 {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..5 {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    Some([m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]])
}

/// Jump amplitudes (a, b) of the first-order transmission data generated by
/// the corner mode `r^{λ_n} w_n(θ)`: the trace jump is `a r^{λ_n − 1}` and
/// the jump of ∂_θ is `b r^{λ_n − 1}`.
pub fn first_order_amplitudes(corner: Corner, n: i32, constants: &TransmissionConstants) -> (f64, f64) {
    let frame = CornerFrame::at_origin(corner);
    let s = frame.gamma_sign();
    let g = frame.layer_angle();
    let l = lambda(n);
    let w = frame.mode(n, g);
    let dw = frame.mode_derivative(n, g);
    let d1t = constants.d_t.get(1).copied().unwrap_or(0.0);
    let d1n = constants.d_n.get(1).copied().unwrap_or(0.0);
    let n2t = constants.n_t.get(2).copied().unwrap_or(0.0);
    let n2n = constants.n_n.get(2).copied().unwrap_or(0.0);
    let a = s * (l * d1t * w + d1n * dw);
    let b = s * (l - 1.0) * (n2t * l * w + n2n * dw);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_data_gives_zero_lift() {
        let c = cone_lift(Corner::Plus, -1.0 / 3.0, 0.0, 0.0).unwrap();
        assert_eq!(c.top, [0.0, 0.0]);
        assert_eq!(c.bottom, [0.0, 0.0]);
    }

    #[test]
    fn residuals_vanish() {
        for corner in Corner::BOTH {
            for (l, a, b) in [(-1.0 / 3.0, 1.0, 0.3), (1.0 / 3.0, -0.7, 2.0), (0.0, 1.0, 1.0)] {
                let c = cone_lift(corner, l, a, b).unwrap();
                for r in c.residuals() {
                    assert!(r.abs() < 1e-12, "{:?}", c.residuals());
                }
            }
        }
    }

    #[test]
    fn resonant_exponent_rejected() {
        assert!(cone_lift(Corner::Plus, 2.0 / 3.0, 1.0, 0.0).is_err());
        assert!(cone_lift(Corner::Minus, -4.0 / 3.0, 1.0, 0.0).is_err());
        assert!(!is_resonant(-1.0 / 3.0) && !is_resonant(0.0));
    }

    #[test]
    fn minus_lift_is_mirror_of_plus_lift() {
        let (a, b) = (0.8, -0.4);
        let plus = cone_lift(Corner::Plus, -1.0 / 3.0, a, -b).unwrap();
        let minus = cone_lift(Corner::Minus, -1.0 / 3.0, a, b).unwrap();
        for k in 0..20 {
            let t = -0.5 * PI + 1.5 * PI * (k as f64 + 0.5) / 20.0;
            let side = if t > 0.0 { Side::Top } else { Side::Bottom };
            assert!((minus.value(side, t) - plus.value(side, PI - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_lift_matches_angular_mode() {
        for corner in Corner::BOTH {
            let frame = CornerFrame::at_origin(corner);
            for m in [-2, -1, 1, 2] {
                let c = ConeLift::mode(corner, m);
                let (lo, hi) = frame.interval();
                for k in 0..10 {
                    let t = lo + (hi - lo) * k as f64 / 9.0;
                    let side = if frame.is_top(t) { Side::Top } else { Side::Bottom };
                    assert!((c.value(side, t) - frame.mode(m, t)).abs() < 1e-13);
                    assert!((c.derivative(side, t) - frame.mode_derivative(m, t)).abs() < 1e-13);
                }
            }
        }
    }
}
