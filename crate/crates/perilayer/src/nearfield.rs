//! Near-field singularity S₁^± on a truncated holed sector, extraction of its
//! decaying coefficient ℒ₋₁, and the direct solver of the perforated problem.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cell::TransmissionConstants;
use crate::error::{Error, Result};
use crate::fem::quadrature::gauss_legendre;
use crate::fem::{assemble, energy_identity_gap, Field, Side};
use crate::geometry::{lambda, Corner, CornerFrame, DomainSpec, PeriodicityCell, Point};
use crate::lstsq::lstsq;
use crate::macroscopic::{cone_lift, first_order_amplitudes, ConeLift};
use crate::mesh::{edge_key, mesh_perforated, mesh_sector, EdgeTag, Locator, Mesh, SectorSpec};

/// Gauss points per retained angular piece in the fit.
const FIT_POINTS: usize = 64;

/// Exponent of the leading truncation bias of ℒ₋₁ in R_max.
pub const RICHARDSON_EXPONENT: f64 = 4.0 / 3.0;

/// Settings of the near-field computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearFieldConfig {
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_h_near")]
    pub h_near: f64,
    #[serde(default = "default_h_far")]
    pub h_far: f64,
    /// Half-width of the excluded window around the layer ray is `window / r`.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Also solve on the sector of radius 2·R_max and extrapolate.
    #[serde(default = "default_richardson")]
    pub richardson: bool,
}

fn default_r_max() -> f64 {
    16.0
}

fn default_h_near() -> f64 {
    1.0 / 16.0
}

fn default_h_far() -> f64 {
    0.25
}

fn default_window() -> f64 {
    3.0
}

fn default_richardson() -> bool {
    true
}

impl Default for NearFieldConfig {
    fn default() -> Self {
        NearFieldConfig {
            r_max: default_r_max(),
            h_near: default_h_near(),
            h_far: default_h_far(),
            window: default_window(),
            richardson: default_richardson(),
        }
    }
}

impl NearFieldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max >= 8.0) {
            return Err(Error::Config(format!("nearfield.r_max = {} must be at least 8", self.r_max)));
        }
        if !(self.h_near > 0.0 && self.h_near <= 0.125) {
            return Err(Error::Config(format!(
                "nearfield.h_near = {} is too coarse near the origin (need 0 < h_near <= 1/8)",
                self.h_near
            )));
        }
        if !(self.h_far >= self.h_near) {
            return Err(Error::Config("nearfield.h_far must be at least h_near".into()));
        }
        if !(self.window >= 1.0 && self.window <= 8.0) {
            return Err(Error::Config(format!("nearfield.window = {} must lie in [1, 8]", self.window)));
        }
        Ok(())
    }
}

/// Least-squares fit of a sector solution on three arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcFit {
    pub r_max: f64,
    pub radii: Vec<f64>,
    /// Coefficient of `r^{2/3} w₁`, close to one.
    pub leading: f64,
    pub l_minus1: f64,
    pub l_minus2: f64,
    /// Weighted misfit relative to the leading term.
    pub residual: f64,
}

/// S₁ at one corner together with its extracted coefficient.
#[derive(Debug, Clone)]
pub struct NearFieldResult {
    pub corner: Corner,
    /// S₁ on the sector of radius R_max.
    pub field: Field,
    /// Extrapolated ℒ₋₁(S₁).
    pub l_minus1: f64,
    /// Fits at R_max and, with Richardson enabled, at 2·R_max.
    pub fits: Vec<ArcFit>,
    /// |extrapolated − finest| as an error indicator.
    pub uncertainty: f64,
    /// The angular part of the known `r^{−1/3}` transmission term.
    pub lift: ConeLift,
}

/// Transmission term generated by the growth `r^{2/3} w₁` at first order.
pub fn first_order_lift(corner: Corner, constants: &TransmissionConstants) -> Result<ConeLift> {
    let (a, b) = first_order_amplitudes(corner, 1, constants);
    cone_lift(corner, lambda(1) - 1.0, a, b)
}

/// The growth term `r^{2/3} w₁(θ)` and its gradient.
fn leading_term(frame: &CornerFrame, x: Point) -> (f64, [f64; 2]) {
    let (r, t) = frame.polar(x);
    if r == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    let l = lambda(1);
    let rl = r.powf(l - 1.0);
    let dr = l * rl * frame.mode(1, t);
    let dt = rl * frame.mode_derivative(1, t);
    let (sn, cs) = t.sin_cos();
    (r * rl * frame.mode(1, t), [dr * cs - dt * sn, dr * sn + dt * cs])
}

/// Load `−∫ ∂ₙ(r^{2/3} w₁) φᵢ ds` over the hole boundaries, with n the
/// outward normal of the sector domain.
fn hole_flux_load(mesh: &Mesh, frame: &CornerFrame) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(4);
    let mut b = vec![0.0; mesh.vertices.len()];
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (i, j) = (tri[k], tri[(k + 1) % 3]);
            if mesh.edge_tags.get(&edge_key(i, j)) != Some(&EdgeTag::Hole) {
                continue;
            }
            let (p, q) = (mesh.vertices[i], mesh.vertices[j]);
            let d = [q[0] - p[0], q[1] - p[1]];
            let len = d[0].hypot(d[1]);
            let n = [d[1] / len, -d[0] / len];
            for (xi, wi) in gx.iter().zip(&gw) {
                let s = 0.5 * (xi + 1.0);
                let x = [p[0] + s * d[0], p[1] + s * d[1]];
                let (_, g) = leading_term(frame, x);
                let flux = -(g[0] * n[0] + g[1] * n[1]) * 0.5 * wi * len;
                b[i] += (1.0 - s) * flux;
                b[j] += s * flux;
            }
        }
    }
    b
}

/// Solves for the remainder `S₁ − r^{2/3} w₁` on the sector of radius
/// `r_max`: harmonic, zero on the walls, equal to `r^{−1/3} G` on the outer
/// arc, with normal derivative `−∂ₙ(r^{2/3} w₁)` on the holes.
pub fn solve_sector(
    corner: Corner,
    cell: &PeriodicityCell,
    lift: &ConeLift,
    r_max: f64,
    cfg: &NearFieldConfig,
) -> Result<Field> {
    let mesh = Arc::new(mesh_sector(&SectorSpec {
        corner,
        r_max,
        cell: cell.clone(),
        h_near: cfg.h_near,
        h_far: cfg.h_far,
    })?);
    let frame = CornerFrame::at_origin(corner);
    let mut sys = assemble(&mesh, None)?;
    for (r, f) in sys.rhs.iter_mut().zip(hole_flux_load(&mesh, &frame)) {
        *r += f;
    }
    sys.apply_dirichlet(EdgeTag::Dirichlet, &|_| 0.0)?;
    let g = frame.layer_angle();
    sys.apply_dirichlet(EdgeTag::OuterArc, &|x| {
        let (r, t) = frame.polar(x);
        let lift_at = |side| r.powf(lift.lambda) * lift.value(side, t);
        if (t - g).abs() < 1e-9 {
            0.5 * (lift_at(Side::Top) + lift_at(Side::Bottom))
        } else {
            lift_at(if frame.is_top(t) { Side::Top } else { Side::Bottom })
        }
    })?;
    sys.solve()
}

/// Fits `S − r^{−1/3}G` on the arcs R/4, R/3, R/2 to
/// `c₁ r^{2/3} w₁ + ℒ₋₁ r^{−2/3} w₋₁ + c₋₂ r^{−4/3} w₋₂`, leaving out the
/// angles within `window / r` of the layer ray.
pub fn fit_arcs(
    frame: &CornerFrame,
    sample: &dyn Fn(Point, Side) -> Option<f64>,
    lift: &ConeLift,
    r_max: f64,
    window: f64,
) -> Result<ArcFit> {
    let radii = vec![r_max / 4.0, r_max / 3.0, r_max / 2.0];
    let (gx, gw) = gauss_legendre(FIT_POINTS);
    let (lo, hi) = frame.interval();
    let g = frame.layer_angle();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut lead_norm = 0.0;
    for &r in &radii {
        let w = window / r;
        for (a, b) in [(lo, g - w), (g + w, hi)] {
            if b <= a {
                return Err(Error::Numerical(format!("arc r = {} lies inside the excluded window", r)));
            }
            let half = 0.5 * (b - a);
            for (xi, wi) in gx.iter().zip(&gw) {
                let t = a + half * (xi + 1.0);
                let side = if frame.is_top(t) { Side::Top } else { Side::Bottom };
                let p = frame.point(r, t);
                let s = sample(p, side).ok_or_else(|| {
                    Error::Numerical(format!("fit arc r = {} leaves the sector mesh", r))
                })?;
                let sw = (half * wi).sqrt();
                let v = s - r.powf(lift.lambda) * lift.value(side, t);
                rows.push(vec![
                    sw * r.powf(lambda(1)) * frame.mode(1, t),
                    sw * r.powf(lambda(-1)) * frame.mode(-1, t),
                    sw * r.powf(lambda(-2)) * frame.mode(-2, t),
                ]);
                rhs.push(sw * v);
            }
        }
    }
    let c = lstsq(&rows, &rhs)?;
    let mut misfit = 0.0;
    for (row, v) in rows.iter().zip(&rhs) {
        let m: f64 = row.iter().zip(&c).map(|(a, b)| a * b).sum();
        misfit += (v - m).powi(2);
        lead_norm += (c[0] * row[0]).powi(2);
    }
    let residual = (misfit / lead_norm.max(f64::MIN_POSITIVE)).sqrt();
    if residual > 0.1 {
        return Err(Error::Numerical(format!(
            "near-field fit residual {:.3e} exceeds 10% of the leading term",
            residual
        )));
    }
    Ok(ArcFit {
        r_max,
        radii,
        leading: c[0],
        l_minus1: c[1],
        l_minus2: c[2],
        residual,
    })
}

/// Richardson extrapolation of values at R and 2R with bias `∝ R^{−p}`.
pub fn richardson(at_r: f64, at_2r: f64, p: f64) -> f64 {
    let f = 2f64.powf(p);
    (f * at_2r - at_r) / (f - 1.0)
}

/// Computes S₁ at one corner and its coefficient ℒ₋₁.
pub fn solve_s1(
    corner: Corner,
    cell: &PeriodicityCell,
    constants: &TransmissionConstants,
    cfg: &NearFieldConfig,
) -> Result<NearFieldResult> {
    cfg.validate()?;
    let frame = CornerFrame::at_origin(corner);
    let lift = first_order_lift(corner, constants)?;
    let mut radii = vec![cfg.r_max];
    if cfg.richardson {
        radii.push(2.0 * cfg.r_max);
    }
    let mut fits = Vec::new();
    let mut first = None;
    for &r in &radii {
        let remainder = solve_sector(corner, cell, &lift, r, cfg)?;
        let fit = {
            let locator = Locator::new(&remainder.mesh);
            let sample = |p: Point, _: Side| {
                locator
                    .interpolate(&remainder.mesh, &remainder.values, p)
                    .map(|v| v + leading_term(&frame, p).0)
            };
            fit_arcs(&frame, &sample, &lift, r, cfg.window)?
        };
        let values = remainder
            .mesh
            .vertices
            .iter()
            .zip(&remainder.values)
            .map(|(&x, v)| v + leading_term(&frame, x).0)
            .collect();
        let field = Field {
            mesh: remainder.mesh,
            values,
        };
        fits.push(fit);
        if first.is_none() {
            first = Some(field);
        }
    }
    let (l_minus1, uncertainty) = match fits.as_slice() {
        [a, b] => {
            let x = richardson(a.l_minus1, b.l_minus1, RICHARDSON_EXPONENT);
            (x, (x - b.l_minus1).abs())
        }
        [a] => (a.l_minus1, f64::NAN),
        _ => unreachable!("one or two sector radii"),
    };
    Ok(NearFieldResult {
        corner,
        field: first.expect("at least one sector solve"),
        l_minus1,
        fits,
        uncertainty,
        lift,
    })
}

/// Direct finite-element solution of the perforated problem.
#[derive(Debug, Clone)]
pub struct DirectSolution {
    pub delta: f64,
    pub field: Field,
    pub energy_gap: f64,
}

impl DirectSolution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.field.mesh
    }
}

/// Solves −Δu = f on the perforated domain with u = 0 on the outer boundary
/// and natural Neumann conditions on the holes.
pub fn solve_direct(domain: &DomainSpec, cell: &PeriodicityCell, delta: f64, h: f64) -> Result<DirectSolution> {
    let mesh = Arc::new(mesh_perforated(domain, cell, delta, h)?);
    let mut sys = assemble(&mesh, Some(&domain.source))?;
    let matrix = sys.matrix.clone();
    let load = sys.rhs.clone();
    sys.apply_dirichlet(EdgeTag::Dirichlet, &|_| 0.0)?;
    let field = sys.solve()?;
    let energy_gap = energy_identity_gap(&matrix, &field.values, &load);
    if energy_gap > 1e-8 {
        return Err(Error::Inconsistency(format!(
            "energy identity gap {:e} for the direct solution at delta = {}",
            energy_gap, delta
        )));
    }
    Ok(DirectSolution {
        delta,
        field,
        energy_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::subdomain_norms;
    use crate::geometry::{CutoffProfile, SourceSpec};

    fn quick() -> NearFieldConfig {
        NearFieldConfig {
            r_max: 8.0,
            h_near: 1.0 / 16.0,
            h_far: 0.25,
            window: 3.0,
            richardson: false,
        }
    }

    fn zero() -> TransmissionConstants {
        TransmissionConstants::zero(2, CutoffProfile::QuinticSmoothstep)
    }

    #[test]
    fn empty_sector_reproduces_cone_mode() {
        for corner in Corner::BOTH {
            let r = solve_s1(corner, &PeriodicityCell::empty(), &zero(), &quick()).unwrap();
            assert!(r.l_minus1.abs() < 1e-9, "{:?}", r.fits);
            assert!((r.fits[0].leading - 1.0).abs() < 1e-9, "{:?}", r.fits);
        }
    }

    #[test]
    fn fit_is_linear_in_the_data() {
        let frame = CornerFrame::at_origin(Corner::Plus);
        let lift = first_order_lift(Corner::Plus, &zero()).unwrap();
        let f = |p: Point, _: Side| {
            let (r, t) = frame.polar(p);
            Some(r.powf(2.0 / 3.0) * frame.mode(1, t) + 0.3 * r.powf(-2.0 / 3.0) * frame.mode(-1, t))
        };
        let a = fit_arcs(&frame, &f, &lift, 16.0, 3.0).unwrap();
        let b = fit_arcs(&frame, &|p, s| f(p, s).map(|v| 2.0 * v), &lift, 16.0, 3.0).unwrap();
        assert!((a.l_minus1 - 0.3).abs() < 1e-10);
        assert!((2.0 * a.l_minus1 - b.l_minus1).abs() < 1e-10);
        assert!((2.0 * a.leading - b.leading).abs() < 1e-10);
    }

    #[test]
    fn mirrored_corners_agree_and_window_is_immaterial() {
        let cell = PeriodicityCell::centered_disk(0.25);
        let cc = crate::cell::CellConfig {
            cell: cell.clone(),
            profile: CutoffProfile::QuinticSmoothstep,
            l_band: 6.0,
            h: 1.0 / 16.0,
            order: 2,
            ..Default::default()
        };
        let k = crate::cell::transmission_constants(&cc).unwrap().constants;
        let cfg = NearFieldConfig { r_max: 16.0, ..quick() };
        let plus = solve_s1(Corner::Plus, &cell, &k, &cfg).unwrap();
        let minus = solve_s1(Corner::Minus, &cell, &k, &cfg).unwrap();
        assert!((plus.l_minus1 - minus.l_minus1).abs() < 1e-9 * (1.0 + plus.l_minus1.abs()));
        let wide = solve_s1(Corner::Plus, &cell, &k, &NearFieldConfig { window: 4.0, ..cfg }).unwrap();
        assert!((wide.l_minus1 - plus.l_minus1).abs() < 0.1 * plus.l_minus1.abs(), "{} {}", wide.l_minus1, plus.l_minus1);
    }

    #[test]
    fn richardson_removes_power_bias() {
        let exact = 0.7;
        let at = |r: f64| exact + 3.0 * r.powf(-RICHARDSON_EXPONENT);
        assert!((richardson(at(16.0), at(32.0), RICHARDSON_EXPONENT) - exact).abs() < 1e-13);
    }

    #[test]
    fn coarse_origin_mesh_rejected() {
        let cfg = NearFieldConfig {
            h_near: 0.5,
            h_far: 1.0,
            ..quick()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    fn domain(amplitude: f64) -> DomainSpec {
        DomainSpec {
            l: 1.0,
            l_top: 1.5,
            h_b: 0.75,
            h_t: 0.75,
            source: SourceSpec {
                center: [0.0, 0.4],
                radius: 0.2,
                amplitude,
            },
        }
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let d = solve_direct(&domain(0.0), &PeriodicityCell::centered_disk(0.25), 0.25, 1.0 / 16.0).unwrap();
        assert!(d.field.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn direct_solution_is_bounded_uniformly() {
        let mut ratios = Vec::new();
        for delta in [0.25, 0.125] {
            let d = solve_direct(&domain(1.0), &PeriodicityCell::centered_disk(0.25), delta, delta / 4.0).unwrap();
            let n = subdomain_norms(&d.field.mesh, &d.field.values, &|_| true).unwrap();
            ratios.push(n.h1);
        }
        assert!((ratios[0] / ratios[1] - 1.0).abs() < 0.1, "{:?}", ratios);
    }
}
