//! Closed-form geometric primitives: the domain description, hole shapes,
//! cut-off functions, corner polar frames and the angular eigenfunctions of
//! the Dirichlet sector with opening 3π/2.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D point.
pub type Point = [f64; 2];

/// Profile used for the smooth transition of χ on `1 ≤ |t| ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffProfile {
    /// `s(u) = 6u⁵ − 15u⁴ + 10u³`.
    #[default]
    QuinticSmoothstep,
    /// `s(u) = u − sin(2πu)/(2π)`, a trigonometric C² step.
    Cosine,
}

impl CutoffProfile {
    /// Short identifier used in diagnostics and file names.
    pub fn id(self) -> &'static str {
        match self {
            CutoffProfile::QuinticSmoothstep => "quintic-smoothstep",
            CutoffProfile::Cosine => "cosine",
        }
    }

    fn step(self, u: f64) -> (f64, f64, f64) {
        match self {
            CutoffProfile::QuinticSmoothstep => {
                let u2 = u * u;
                let u3 = u2 * u;
                (
                    u3 * (10.0 + u * (-15.0 + 6.0 * u)),
                    30.0 * u2 * (1.0 - u) * (1.0 - u),
                    60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
                )
            }
            CutoffProfile::Cosine => {
                let w = 2.0 * PI * u;
                (u - w.sin() / (2.0 * PI), 1.0 - w.cos(), 2.0 * PI * w.sin())
            }
        }
    }
}

/// Sign selector for the one-sided cut-off functions χ₊ and χ₋.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

/// χ(t): 0 for |t| ≤ 1, 1 for |t| ≥ 2, even, C², monotone on [1, 2].
pub fn chi(profile: CutoffProfile, t: f64) -> f64 {
    chi_with_derivatives(profile, t).0
}

/// Returns `(χ(t), χ'(t), χ''(t))`.
pub fn chi_with_derivatives(profile: CutoffProfile, t: f64) -> (f64, f64, f64) {
    let a = t.abs();
    if a <= 1.0 {
        (0.0, 0.0, 0.0)
    } else if a >= 2.0 {
        (1.0, 0.0, 0.0)
    } else {
        let (s, ds, dds) = profile.step(a - 1.0);
        (s, ds * t.signum(), dds)
    }
}

/// χ±(t) = 1_{±t>0} χ(t).
pub fn chi_pm(profile: CutoffProfile, sign: Sign, t: f64) -> f64 {
    chi_pm_with_derivatives(profile, sign, t).0
}

/// Returns `(χ±(t), χ±'(t), χ±''(t))`.
pub fn chi_pm_with_derivatives(profile: CutoffProfile, sign: Sign, t: f64) -> (f64, f64, f64) {
    let active = match sign {
        Sign::Plus => t > 0.0,
        Sign::Minus => t < 0.0,
    };
    if active {
        chi_with_derivatives(profile, t)
    } else {
        (0.0, 0.0, 0.0)
    }
}

/// Corner cut-off χ_L(r) = 1 − χ(2r/L) with its first two radial derivatives.
/// Equal to one for r ≤ L/2 and to zero for r ≥ L.
pub fn corner_cutoff(profile: CutoffProfile, l: f64, r: f64) -> (f64, f64, f64) {
    let (c, dc, ddc) = chi_with_derivatives(profile, 2.0 * r / l);
    (1.0 - c, -2.0 * dc / l, -4.0 * ddc / (l * l))
}

/// Smooth compactly supported bump source `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
}

impl SourceSpec {
    /// `amplitude · exp(1 − 1/(1 − ρ²))` with `ρ = |x − c|/radius`, zero outside the disk.
    pub fn value(&self, x: Point) -> f64 {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let rho2 = (dx * dx + dy * dy) / (self.radius * self.radius);
        if rho2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - rho2)).exp()
        }
    }
}

/// The polygonal domain Ω = Ω_T ∪ Ω_B with Ω_B = (−L, L)×(−H_B, 0) and
/// Ω_T = (−L_top, L_top)×(0, H_T), the layer sitting on Γ = (−L, L)×{0}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "L_top")]
    pub l_top: f64,
    #[serde(rename = "H_B")]
    pub h_b: f64,
    #[serde(rename = "H_T")]
    pub h_t: f64,
    pub source: SourceSpec,
}

impl DomainSpec {
    /// Checks the invariants `L_top > L > 0`, positive heights and that the
    /// source disk lies inside Ω_T at a positive distance from Γ.
    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l_top > self.l) {
            return Err(Error::Geometry(format!(
                "need L_top > L > 0 (L = {}, L_top = {})",
                self.l, self.l_top
            )));
        }
        if !(self.h_b > 0.0 && self.h_t > 0.0) {
            return Err(Error::Geometry(
                "heights H_B and H_T must be positive".into(),
            ));
        }
        let s = &self.source;
        if !(s.radius > 0.0) {
            return Err(Error::Geometry("source radius must be positive".into()));
        }
        let inside = s.center[0] - s.radius > -self.l_top
            && s.center[0] + s.radius < self.l_top
            && s.center[1] - s.radius > 0.0
            && s.center[1] + s.radius < self.h_t;
        if !inside {
            return Err(Error::Geometry(
                "source disk must lie strictly inside the top rectangle, away from the layer"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Distance between the source support and Γ.
    pub fn source_gap(&self) -> f64 {
        self.source.center[1] - self.source.radius
    }

    /// Membership in the open domain Ω.
    pub fn contains(&self, x: Point) -> bool {
        let top = x[1] > 0.0 && x[1] < self.h_t && x[0].abs() < self.l_top;
        let bottom = x[1] < 0.0 && x[1] > -self.h_b && x[0].abs() < self.l;
        let gamma = x[1] == 0.0 && x[0].abs() < self.l;
        top || bottom || gamma
    }

    /// Mirror image of the domain under x₁ ↦ −x₁ (source mirrored too).
    pub fn mirrored(&self) -> DomainSpec {
        let mut d = *self;
        d.source.center[0] = -d.source.center[0];
        d
    }
}

/// Shape of the canonical hole inside the cell (0,1)×(−1,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HoleShape {
    /// No hole: the layer is absent.
    #[default]
    Empty,
    /// Disk with the given center and radius.
    Disk { center: Point, radius: f64 },
    /// Simple polygon (any orientation), star-shaped or not.
    Polygon { vertices: Vec<Point> },
}

/// The periodicity cell: the unit strip with one hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PeriodicityCell {
    pub hole: HoleShape,
}

impl PeriodicityCell {
    /// Cell with a centered disk hole of the given radius.
    pub fn centered_disk(radius: f64) -> Self {
        PeriodicityCell {
            hole: HoleShape::Disk {
                center: [0.5, 0.0],
                radius,
            },
        }
    }

    /// Cell without hole.
    pub fn empty() -> Self {
        PeriodicityCell {
            hole: HoleShape::Empty,
        }
    }

    /// True when the cell has no hole.
    pub fn is_empty(&self) -> bool {
        matches!(self.hole, HoleShape::Empty)
    }

    /// Checks that the closure of the hole lies strictly inside (0,1)×(−1,1).
    pub fn validate(&self) -> Result<()> {
        match &self.hole {
            HoleShape::Empty => Ok(()),
            HoleShape::Disk { center, radius } => {
                let margin = [center[0], 1.0 - center[0], center[1] + 1.0, 1.0 - center[1]]
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                if !(*radius > 0.0) || *radius >= margin {
                    return Err(Error::Geometry(format!(
                        "disk hole (center {:?}, radius {}) must lie strictly inside (0,1)x(-1,1)",
                        center, radius
                    )));
                }
                Ok(())
            }
            HoleShape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::Geometry(
                        "polygon hole needs at least 3 vertices".into(),
                    ));
                }
                for v in vertices {
                    if !(v[0] > 0.0 && v[0] < 1.0 && v[1] > -1.0 && v[1] < 1.0) {
                        return Err(Error::Geometry(format!(
                            "polygon vertex {:?} lies outside (0,1)x(-1,1)",
                            v
                        )));
                    }
                }
                if polygon_area(vertices).abs() < 1e-14 {
                    return Err(Error::Geometry("degenerate polygon hole".into()));
                }
                if polygon_self_intersects(vertices) {
                    return Err(Error::Geometry("polygon hole is not simple".into()));
                }
                Ok(())
            }
        }
    }

    /// Exact area of the hole.
    pub fn hole_area(&self) -> f64 {
        match &self.hole {
            HoleShape::Empty => 0.0,
            HoleShape::Disk { radius, .. } => PI * radius * radius,
            HoleShape::Polygon { vertices } => polygon_area(vertices).abs(),
        }
    }

    /// Bounding box `[xmin, xmax, ymin, ymax]` of the hole, `None` when empty.
    pub fn hole_bbox(&self) -> Option<[f64; 4]> {
        match &self.hole {
            HoleShape::Empty => None,
            HoleShape::Disk { center, radius } => Some([
                center[0] - radius,
                center[0] + radius,
                center[1] - radius,
                center[1] + radius,
            ]),
            HoleShape::Polygon { vertices } => {
                let mut b = [
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                ];
                for v in vertices {
                    b[0] = b[0].min(v[0]);
                    b[1] = b[1].max(v[0]);
                    b[2] = b[2].min(v[1]);
                    b[3] = b[3].max(v[1]);
                }
                Some(b)
            }
        }
    }

    /// Boundary polygon of the hole in counter-clockwise order with edges no
    /// longer than `seg_len` and at least 16 edges. `None` when empty.
    pub fn hole_polygon(&self, seg_len: f64) -> Option<Vec<Point>> {
        match &self.hole {
            HoleShape::Empty => None,
            HoleShape::Disk { center, radius } => {
                let n = ((2.0 * PI * radius / seg_len).ceil() as usize).max(16);
                Some(
                    (0..n)
                        .map(|k| {
                            let t = 2.0 * PI * k as f64 / n as f64;
                            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                        })
                        .collect(),
                )
            }
            HoleShape::Polygon { vertices } => {
                let mut v = vertices.clone();
                if polygon_area(&v) < 0.0 {
                    v.reverse();
                }
                let perimeter: f64 = (0..v.len()).map(|i| dist(v[i], v[(i + 1) % v.len()])).sum();
                let seg = seg_len.min(perimeter / 16.0);
                let mut out = Vec::new();
                for i in 0..v.len() {
                    let a = v[i];
                    let b = v[(i + 1) % v.len()];
                    let n = ((dist(a, b) / seg).ceil() as usize).max(1);
                    for k in 0..n {
                        let t = k as f64 / n as f64;
                        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                Some(out)
            }
        }
    }

    /// Membership of `x` (cell coordinates) in the open hole.
    pub fn hole_contains(&self, x: Point) -> bool {
        match &self.hole {
            HoleShape::Empty => false,
            HoleShape::Disk { center, radius } => dist(x, *center) < *radius,
            HoleShape::Polygon { vertices } => point_in_polygon(x, vertices),
        }
    }

    /// Distance from `x` to the hole boundary, positive outside the hole and
    /// negative inside. Infinite for an empty cell.
    pub fn hole_distance(&self, x: Point) -> f64 {
        match &self.hole {
            HoleShape::Empty => f64::INFINITY,
            HoleShape::Disk { center, radius } => dist(x, *center) - radius,
            HoleShape::Polygon { vertices } => {
                let d = distance_to_polygon(x, vertices);
                if point_in_polygon(x, vertices) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Perimeter of the hole.
    pub fn hole_perimeter(&self) -> f64 {
        match &self.hole {
            HoleShape::Empty => 0.0,
            HoleShape::Disk { radius, .. } => 2.0 * PI * radius,
            HoleShape::Polygon { vertices } => (0..vertices.len())
                .map(|i| dist(vertices[i], vertices[(i + 1) % vertices.len()]))
                .sum(),
        }
    }

    /// Mirror image of the cell under X₁ ↦ 1 − X₁.
    pub fn mirrored(&self) -> PeriodicityCell {
        let hole = match &self.hole {
            HoleShape::Empty => HoleShape::Empty,
            HoleShape::Disk { center, radius } => HoleShape::Disk {
                center: [1.0 - center[0], center[1]],
                radius: *radius,
            },
            HoleShape::Polygon { vertices } => HoleShape::Polygon {
                vertices: vertices.iter().rev().map(|v| [1.0 - v[0], v[1]]).collect(),
            },
        };
        PeriodicityCell { hole }
    }
}

/// Euclidean distance.
pub fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Signed area (positive for counter-clockwise polygons).
pub fn polygon_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(x: Point, v: &[Point]) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let xi = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if x[0] < xi {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `x` to the closed polygon boundary.
pub fn distance_to_polygon(x: Point, v: &[Point]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| distance_to_segment(x, v[i], v[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Distance from `x` to the segment `[a, b]`.
pub fn distance_to_segment(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(x, [a[0] + t * d[0], a[1] + t * d[1]])
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let o = |a: Point, b: Point, c: Point| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = o(q1, q2, p1);
    let d2 = o(q1, q2, p2);
    let d3 = o(p1, p2, q1);
    let d4 = o(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn polygon_self_intersects(v: &[Point]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Singular exponent λ_m = 2m/3 of the 3π/2 Dirichlet sector.
pub fn lambda(m: i32) -> f64 {
    2.0 * m as f64 / 3.0
}

/// The two re-entrant corners x_O^± = (±L, 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Corner {
    Plus,
    Minus,
}

impl Corner {
    pub const BOTH: [Corner; 2] = [Corner::Plus, Corner::Minus];

    pub fn id(self) -> &'static str {
        match self {
            Corner::Plus => "plus",
            Corner::Minus => "minus",
        }
    }
}

/// Polar frame attached to a corner. The plus corner uses θ ∈ (0, 3π/2)
/// with the layer along θ = π; the minus corner uses θ ∈ (−π/2, π) with the
/// layer along θ = 0. In both frames the top sub-sector is (0, π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerFrame {
    pub corner: Corner,
    pub origin: Point,
}

impl CornerFrame {
    /// Frame of the corner located at `(±l, 0)`.
    pub fn new(corner: Corner, l: f64) -> Self {
        let origin = match corner {
            Corner::Plus => [l, 0.0],
            Corner::Minus => [-l, 0.0],
        };
        CornerFrame { corner, origin }
    }

    /// Frame of the unbounded near-field sector (corner at the origin).
    pub fn at_origin(corner: Corner) -> Self {
        CornerFrame {
            corner,
            origin: [0.0, 0.0],
        }
    }

    /// Angular interval (θ_min, θ_max) of the sector.
    pub fn interval(&self) -> (f64, f64) {
        match self.corner {
            Corner::Plus => (0.0, 1.5 * PI),
            Corner::Minus => (-0.5 * PI, PI),
        }
    }

    /// Angle of the ray carrying the layer (and Γ).
    pub fn layer_angle(&self) -> f64 {
        match self.corner {
            Corner::Plus => PI,
            Corner::Minus => 0.0,
        }
    }

    /// Wall bounding the top sub-sector.
    pub fn top_wall(&self) -> f64 {
        match self.corner {
            Corner::Plus => 0.0,
            Corner::Minus => PI,
        }
    }

    /// Wall bounding the bottom sub-sector.
    pub fn bottom_wall(&self) -> f64 {
        match self.corner {
            Corner::Plus => 1.5 * PI,
            Corner::Minus => -0.5 * PI,
        }
    }

    /// `cos` of the layer angle: x₁ increases with r along Γ when +1.
    /// On Γ, ∂_{x₁} = s ∂_r and ∂_{x₂} = s r⁻¹ ∂_θ.
    pub fn gamma_sign(&self) -> f64 {
        match self.corner {
            Corner::Plus => -1.0,
            Corner::Minus => 1.0,
        }
    }

    /// Sub-sector (θ_a, θ_b) with θ_a < θ_b on the top side.
    pub fn top_range(&self) -> (f64, f64) {
        (0.0, PI)
    }

    /// Sub-sector (θ_a, θ_b) with θ_a < θ_b on the bottom side.
    pub fn bottom_range(&self) -> (f64, f64) {
        match self.corner {
            Corner::Plus => (PI, 1.5 * PI),
            Corner::Minus => (-0.5 * PI, 0.0),
        }
    }

    /// Polar coordinates of `x`, θ normalized to the sector interval. Points
    /// lying on the layer ray exactly get the top-side angle.
    pub fn polar(&self, x: Point) -> (f64, f64) {
        let dx = x[0] - self.origin[0];
        let dy = x[1] - self.origin[1];
        let r = (dx * dx + dy * dy).sqrt();
        let mut t = dy.atan2(dx);
        match self.corner {
            Corner::Plus => {
                if t < 0.0 {
                    t += 2.0 * PI;
                }
            }
            Corner::Minus => {
                if t < -0.5 * PI - 1e-12 {
                    t += 2.0 * PI;
                }
            }
        }
        (r, t)
    }

    /// Polar coordinates with an explicit side for points on the layer ray.
    pub fn polar_on_side(&self, x: Point, top: bool) -> (f64, f64) {
        let (r, t) = self.polar(x);
        if x[1] == 0.0 && (t - self.layer_angle()).abs() < 1e-12 && !top {
            return (
                r,
                self.layer_angle()
                    + if self.corner == Corner::Plus {
                        0.0
                    } else {
                        -0.0
                    },
            );
        }
        (r, t)
    }

    /// Cartesian point for polar coordinates in this frame.
    pub fn point(&self, r: f64, theta: f64) -> Point {
        [
            self.origin[0] + r * theta.cos(),
            self.origin[1] + r * theta.sin(),
        ]
    }

    /// True when θ lies in the top sub-sector.
    pub fn is_top(&self, theta: f64) -> bool {
        theta > 0.0 && theta < PI
    }

    /// Angular eigenfunction w_m(θ), checked against the sector interval.
    pub fn angular_mode(&self, m: i32, theta: f64) -> Result<f64> {
        let (a, b) = self.interval();
        if m == 0 {
            return Err(Error::Numerical(
                "angular mode index must be nonzero".into(),
            ));
        }
        if theta < a - 1e-12 || theta > b + 1e-12 {
            return Err(Error::Numerical(format!(
                "angle {} outside the sector ({}, {})",
                theta, a, b
            )));
        }
        Ok(self.mode(m, theta))
    }

    /// Angular eigenfunction without range check: sin(λ_m θ) for the plus
    /// corner and sin(λ_m (θ + π/2)) for the minus corner. Both vanish at the
    /// two walls of their sector.
    pub fn mode(&self, m: i32, theta: f64) -> f64 {
        (lambda(m) * self.shifted(theta)).sin()
    }

    /// Derivative of [`CornerFrame::mode`] with respect to θ.
    pub fn mode_derivative(&self, m: i32, theta: f64) -> f64 {
        lambda(m) * (lambda(m) * self.shifted(theta)).cos()
    }

    fn shifted(&self, theta: f64) -> f64 {
        match self.corner {
            Corner::Plus => theta,
            Corner::Minus => theta + 0.5 * PI,
        }
    }

    /// The frame of the other corner.
    pub fn mirror(&self) -> CornerFrame {
        CornerFrame {
            corner: match self.corner {
                Corner::Plus => Corner::Minus,
                Corner::Minus => Corner::Plus,
            },
            origin: [-self.origin[0], self.origin[1]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_plateaus_and_midpoint() {
        for p in [CutoffProfile::QuinticSmoothstep, CutoffProfile::Cosine] {
            assert_eq!(chi(p, 0.5), 0.0);
            assert_eq!(chi(p, -0.5), 0.0);
            assert_eq!(chi(p, 3.0), 1.0);
            assert!((chi(p, 1.5) - 0.5).abs() < 1e-15);
            assert!((chi(p, -1.5) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn chi_is_c2_at_junctions() {
        for p in [CutoffProfile::QuinticSmoothstep, CutoffProfile::Cosine] {
            for t0 in [1.0, 2.0, -1.0, -2.0] {
                let e = 1e-6;
                let (_, d1m, d2m) = chi_with_derivatives(p, t0 - e);
                let (_, d1p, d2p) = chi_with_derivatives(p, t0 + e);
                assert!((d1m - d1p).abs() < 1e-4, "{:?} {}", p, t0);
                assert!((d2m - d2p).abs() < 1e-3, "{:?} {}", p, t0);
            }
        }
    }

    #[test]
    fn chi_derivatives_match_differences() {
        for p in [CutoffProfile::QuinticSmoothstep, CutoffProfile::Cosine] {
            for &t in &[1.2, 1.5, 1.9, -1.3, -1.7] {
                let e = 1e-5;
                let (_, d1, d2) = chi_with_derivatives(p, t);
                let fd1 = (chi(p, t + e) - chi(p, t - e)) / (2.0 * e);
                let fd2 = (chi(p, t + e) - 2.0 * chi(p, t) + chi(p, t - e)) / (e * e);
                assert!((d1 - fd1).abs() < 1e-8);
                assert!((d2 - fd2).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn chi_pm_is_one_sided() {
        let p = CutoffProfile::QuinticSmoothstep;
        assert_eq!(chi_pm(p, Sign::Plus, -1.5), 0.0);
        assert!((chi_pm(p, Sign::Plus, 1.5) - 0.5).abs() < 1e-15);
        assert_eq!(chi_pm(p, Sign::Minus, -3.0), 1.0);
    }

    #[test]
    fn modes_vanish_on_walls() {
        for corner in Corner::BOTH {
            let f = CornerFrame::at_origin(corner);
            let (a, b) = f.interval();
            for m in [-3, -2, -1, 1, 2, 3, 4] {
                assert!(f.mode(m, a).abs() < 1e-14);
                assert!(f.mode(m, b).abs() < 1e-14);
            }
        }
        let f = CornerFrame::at_origin(Corner::Plus);
        assert!((f.angular_mode(1, 0.75 * PI).unwrap() - 1.0).abs() < 1e-15);
        assert!(f.angular_mode(1, -0.1).is_err());
    }

    #[test]
    fn mirror_relation_between_modes() {
        let p = CornerFrame::at_origin(Corner::Plus);
        let m = CornerFrame::at_origin(Corner::Minus);
        for k in [-2, -1, 1, 2, 3] {
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            for i in 1..20 {
                let t = 1.5 * PI * i as f64 / 20.0;
                assert!((m.mode(k, PI - t) - sign * p.mode(k, t)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn polar_round_trip() {
        for corner in Corner::BOTH {
            let f = CornerFrame::new(corner, 1.0);
            let (a, b) = f.interval();
            for i in 1..10 {
                let t = a + (b - a) * i as f64 / 10.0;
                let x = f.point(0.3, t);
                let (r, tt) = f.polar(x);
                assert!((r - 0.3).abs() < 1e-14);
                assert!((tt - t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hole_polygon_has_enough_edges() {
        let c = PeriodicityCell::centered_disk(0.25);
        assert!(c.hole_polygon(1.0).unwrap().len() >= 16);
        let p = c.hole_polygon(0.01).unwrap();
        assert!(polygon_area(&p) > 0.0);
        assert!(c.validate().is_ok());
        assert!(PeriodicityCell::centered_disk(0.6).validate().is_err());
    }
}
