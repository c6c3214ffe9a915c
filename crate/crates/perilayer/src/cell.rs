//! Boundary-layer cell problems on the truncated periodicity band: the
//! kernel function D with its far-field shift D_∞, the profile functions
//! W_p^t and W_p^n, and the transmission constants D_p^t, D_p^n, N_p^t, N_p^n.
//!
//! Every right-hand side is represented by its node load vector
//! `b_i = ∫ F φ_i`. Commutator terms `[Δ, v](X₂^p/p!)` are integrated by parts
//! against the interpolant of `v·X₂^p/p!`, so that the compatibility
//! integrals of the discrete loads against 1 and against the discrete D hold
//! to rounding error.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::quadrature::TriangleRule;
use crate::fem::{
    edge_load, element_gradients, mass, stiffness, subdomain_norms, CsrMatrix, Factorization, Field,
    SparseSystem,
};
use crate::geometry::{chi_with_derivatives, CutoffProfile, PeriodicityCell, Point};
use crate::mesh::{mesh_band, BandSpec, EdgeTag, Mesh};

/// Parameters of the cell computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    #[serde(default)]
    pub cell: PeriodicityCell,
    #[serde(default)]
    pub profile: CutoffProfile,
    #[serde(default = "default_l_band")]
    pub l_band: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub recursion: Recursion,
}

/// How the slow tangential derivative of the previous profile enters each
/// band problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recursion {
    /// The load `2∂_{X₁}W_{p−1}` together with the hole flux
    /// `−n₁ W_{p−1}` that the Neumann condition on the hole produces. In weak
    /// form this is `∫ (∂_{X₁}W_{p−1} φ − W_{p−1} ∂_{X₁}φ)`.
    #[default]
    Full,
    /// The interior load `2∂_{X₁}W_{p−1}` alone, with homogeneous Neumann
    /// data on the hole. Here W₁ᵗ vanishes and N₂ᵗ is the hole area.
    Interior,
}

fn default_l_band() -> f64 {
    8.0
}

fn default_h() -> f64 {
    1.0 / 64.0
}

fn default_order() -> usize {
    2
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            cell: PeriodicityCell::default(),
            profile: CutoffProfile::default(),
            l_band: default_l_band(),
            h: default_h(),
            order: default_order(),
            recursion: Recursion::default(),
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        if !(self.l_band >= 4.0 && self.l_band.is_finite()) {
            return Err(Error::Config(format!("cell.l_band = {} must be at least 4", self.l_band)));
        }
        if !(self.h > 0.0 && self.h <= 0.25) {
            return Err(Error::Config(format!("cell.h = {} must lie in (0, 1/4]", self.h)));
        }
        if !(2..=4).contains(&self.order) {
            return Err(Error::Config(format!("cell.order = {} must lie in 2..=4", self.order)));
        }
        Ok(())
    }
}

/// Which family a profile function belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Tangential,
    Normal,
    DTilde,
}

impl ProfileKind {
    pub fn id(self) -> &'static str {
        match self {
            ProfileKind::Tangential => "t",
            ProfileKind::Normal => "n",
            ProfileKind::DTilde => "d-tilde",
        }
    }
}

/// A decaying solution of a band problem.
#[derive(Debug, Clone)]
pub struct ProfileFunction {
    pub field: Field,
    pub p: usize,
    pub kind: ProfileKind,
    /// L² norm on |X₂| ∈ [L_band − 1, L_band] divided by the larger of 1 and
    /// the L² norm inside.
    pub decay_report: f64,
    /// Difference between the top and bottom end averages.
    pub end_mismatch: f64,
}

/// Compatibility residuals of one band right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compatibility {
    pub label: String,
    pub against_one: f64,
    pub against_d: f64,
    pub scale: f64,
}

/// Transmission constants with their computation diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConstants {
    pub d_infinity: f64,
    pub d_t: Vec<f64>,
    pub d_n: Vec<f64>,
    pub n_t: Vec<f64>,
    pub n_n: Vec<f64>,
    pub order: usize,
    pub profile: CutoffProfile,
    pub l_band: f64,
    pub h: f64,
    pub compatibility: Vec<Compatibility>,
}

impl TransmissionConstants {
    /// Constants of the hole-free cell, all zero.
    pub fn zero(order: usize, profile: CutoffProfile) -> Self {
        TransmissionConstants {
            d_infinity: 0.0,
            d_t: vec![0.0; order + 1],
            d_n: vec![0.0; order + 1],
            n_t: vec![0.0; order + 1],
            n_n: vec![0.0; order + 1],
            order,
            profile,
            l_band: 0.0,
            h: 0.0,
            compatibility: Vec::new(),
        }
    }

    pub fn d1_n(&self) -> f64 {
        self.d_n[1]
    }

    pub fn n2_t(&self) -> f64 {
        self.n_t[2]
    }

    pub fn n2_n(&self) -> f64 {
        self.n_n[2]
    }
}

/// Full output of the cell computation.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub config: CellConfig,
    pub constants: TransmissionConstants,
    pub band: Arc<Mesh>,
    pub d: Field,
    pub d_tilde: ProfileFunction,
    /// W_p^t for p = 0..=order.
    pub w_t: Vec<ProfileFunction>,
    /// W_p^n for p = 0..=order (W_0^n = 0).
    pub w_n: Vec<ProfileFunction>,
}

/// Parity of the cut-off combination in a commutator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    /// χ₊ + χ₋.
    Sum,
    /// χ₊ − χ₋.
    Difference,
}

fn combination(profile: CutoffProfile, c: Combination, t: f64) -> (f64, f64, f64) {
    let (v, dv, ddv) = chi_with_derivatives(profile, t);
    match c {
        Combination::Sum => (v, dv, ddv),
        Combination::Difference => {
            let s = if t > 0.0 {
                1.0
            } else if t < 0.0 {
                -1.0
            } else {
                0.0
            };
            (s * v, s * dv, s * ddv)
        }
    }
}

fn monomial(p: usize, t: f64, derivative: usize) -> f64 {
    if derivative > p {
        return 0.0;
    }
    let k = p - derivative;
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    t.powi(k as i32) / fact
}

/// Analytic mean and jump of g_p at X₂: `(⟨g_p⟩, [g_p])`.
pub fn g_values(profile: CutoffProfile, p: usize, x2: f64) -> (f64, f64) {
    let u = monomial(p, x2, 0);
    let du = monomial(p, x2, 1);
    let comm = |c| {
        let (_, dv, ddv) = combination(profile, c, x2);
        ddv * u + 2.0 * dv * du
    };
    (0.5 * comm(Combination::Sum), comm(Combination::Difference))
}

/// Nodal fields ⟨g_p⟩ and [g_p] on a band mesh.
pub fn g_terms(p: usize, profile: CutoffProfile, band: &Mesh) -> (Vec<f64>, Vec<f64>) {
    band.vertices.iter().map(|x| g_values(profile, p, x[1])).unzip()
}

/// Quadrature values of the eight compatibility integrals
/// (⟨g₀⟩·D, [g₀]·D, ⟨g₀⟩·1, [g₀]·1, ⟨g₁⟩·D, [g₁]·D, ⟨g₁⟩·1, [g₁]·1)
/// with the analytic g fields and the discrete D.
pub fn lemma_integrals(sol: &CellSolution) -> [f64; 8] {
    let mesh = &sol.band;
    let rule = TriangleRule::degree5();
    let mut out = [0.0; 8];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let pts = mesh.triangle_points(t);
        if pts.iter().all(|p| p[1].abs() < 1.0) || pts.iter().all(|p| p[1].abs() > 2.0) {
            continue;
        }
        let area = mesh.area(t);
        for (l, w) in rule.bary.iter().zip(&rule.weights) {
            let x2 = l[0] * pts[0][1] + l[1] * pts[1][1] + l[2] * pts[2][1];
            let d = l[0] * sol.d.values[tri[0]] + l[1] * sol.d.values[tri[1]] + l[2] * sol.d.values[tri[2]];
            let (m0, j0) = g_values(sol.config.profile, 0, x2);
            let (m1, j1) = g_values(sol.config.profile, 1, x2);
            let aw = area * w;
            out[0] += aw * m0 * d;
            out[1] += aw * j0 * d;
            out[2] += aw * m0;
            out[3] += aw * j0;
            out[4] += aw * m1 * d;
            out[5] += aw * j1 * d;
            out[6] += aw * m1;
            out[7] += aw * j1;
        }
    }
    out
}

/// Assembled band operators shared by every cell solve.
pub struct CellProblem {
    pub config: CellConfig,
    pub mesh: Arc<Mesh>,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    template: SparseSystem,
    factorization: Factorization,
    top: Vec<f64>,
    bottom: Vec<f64>,
}

impl CellProblem {
    pub fn new(config: &CellConfig) -> Result<Self> {
        config.validate()?;
        let mesh = Arc::new(mesh_band(&BandSpec {
            cell: config.cell.clone(),
            l_band: config.l_band,
            h: config.h,
        })?);
        let mut template = SparseSystem::with_rhs(&mesh, vec![0.0; mesh.vertices.len()])?;
        template.apply_periodic(&mesh.periodic_pairs)?;
        let pin = (0..mesh.vertices.len())
            .min_by(|&a, &b| {
                let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
                (p[1].abs(), p[0]).partial_cmp(&(q[1].abs(), q[0])).unwrap()
            })
            .ok_or_else(|| Error::Mesh("empty band mesh".into()))?;
        let pin = mesh
            .periodic_pairs
            .iter()
            .find(|(_, r)| *r == pin)
            .map(|(l, _)| *l)
            .unwrap_or(pin);
        template.pin(pin, 0.0);
        let factorization = template.factorize()?;
        let one = |_: Point| 1.0;
        let top = edge_load(&mesh, &mesh.edges_with_tag(EdgeTag::BandTop), &one, 2);
        let bottom = edge_load(&mesh, &mesh.edges_with_tag(EdgeTag::BandBottom), &one, 2);
        Ok(CellProblem {
            config: config.clone(),
            stiffness: stiffness(&mesh)?,
            mass: mass(&mesh),
            mesh,
            template,
            factorization,
            top,
            bottom,
        })
    }

    fn end_averages(&self, u: &[f64]) -> (f64, f64) {
        let dot = |w: &[f64]| w.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        (dot(&self.top), dot(&self.bottom))
    }

    fn solve_raw(&self, rhs: Vec<f64>) -> Result<Vec<f64>> {
        let mut sys = self.template.clone();
        sys.rhs = rhs;
        Ok(sys.solve_with(&self.factorization)?.values)
    }

    /// Load vector of `[Δ, v](X₂^p/p!)` with `v` the given cut-off combination.
    pub fn commutator_load(&self, c: Combination, p: usize) -> Vec<f64> {
        let profile = self.config.profile;
        let lb = self.config.l_band;
        let vu: Vec<f64> = self
            .mesh
            .vertices
            .iter()
            .map(|x| combination(profile, c, x[1]).0 * monomial(p, x[1], 0))
            .collect();
        let mut b: Vec<f64> = self.stiffness.matvec(&vu).iter().map(|v| -v).collect();
        if p >= 1 {
            let top_flux = combination(profile, c, lb).0 * monomial(p, lb, 1);
            let bottom_flux = -combination(profile, c, -lb).0 * monomial(p, -lb, 1);
            for i in 0..b.len() {
                b[i] += top_flux * self.top[i] + bottom_flux * self.bottom[i];
            }
        }
        if p >= 2 {
            let vlap: Vec<f64> = self
                .mesh
                .vertices
                .iter()
                .map(|x| combination(profile, c, x[1]).0 * monomial(p, x[1], 2))
                .collect();
            for (bi, mi) in b.iter_mut().zip(self.mass.matvec(&vlap)) {
                *bi -= mi;
            }
        }
        b
    }

    /// Load vector of the slow-derivative term generated by the profile `w`,
    /// in the form selected by [`Recursion`].
    fn dx1_load(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut b = vec![0.0; w.len()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let (grads, _) = element_gradients(&self.mesh, t)?;
            let g: f64 = (0..3).map(|k| grads[k][0] * w[tri[k]]).sum();
            let area = self.mesh.area(t);
            match self.config.recursion {
                Recursion::Interior => {
                    for &k in tri {
                        b[k] += 2.0 * g * area / 3.0;
                    }
                }
                Recursion::Full => {
                    let mean = (w[tri[0]] + w[tri[1]] + w[tri[2]]) / 3.0;
                    for (j, &k) in tri.iter().enumerate() {
                        b[k] += (g / 3.0 - mean * grads[j][0]) * area;
                    }
                }
            }
        }
        Ok(b)
    }

    fn decay_report(&self, values: &[f64]) -> Result<f64> {
        let lb = self.config.l_band;
        let tail = subdomain_norms(&self.mesh, values, &|x| x[1].abs() >= lb - 1.0)?.l2;
        let inner = subdomain_norms(&self.mesh, values, &|x| x[1].abs() < lb - 1.0)?.l2;
        Ok(tail / inner.max(1.0))
    }

    /// Solves for D with unit flux at both band ends, gauged so that the top
    /// and bottom end averages are opposite. Returns (D, D̃, D_∞).
    pub fn solve_profile_d(&self) -> Result<(Field, ProfileFunction, f64)> {
        let rhs: Vec<f64> = self.top.iter().zip(&self.bottom).map(|(t, b)| t - b).collect();
        let mut d = self.solve_raw(rhs)?;
        let (top, bottom) = self.end_averages(&d);
        let shift = 0.5 * (top + bottom);
        for v in d.iter_mut() {
            *v -= shift;
        }
        let d_inf = 0.5 * (top - bottom) - self.config.l_band;
        let profile = self.config.profile;
        let tilde: Vec<f64> = self
            .mesh
            .vertices
            .iter()
            .zip(&d)
            .map(|(x, v)| {
                let (c, _, _) = chi_with_derivatives(profile, x[1]);
                let shift = if x[1] > 0.0 { x[1] + d_inf } else { x[1] - d_inf };
                v - c * shift
            })
            .collect();
        let (tt, tb) = self.end_averages(&tilde);
        let report = self.decay_report(&tilde)?;
        Ok((
            Field {
                mesh: self.mesh.clone(),
                values: d,
            },
            ProfileFunction {
                field: Field {
                    mesh: self.mesh.clone(),
                    values: tilde,
                },
                p: 1,
                kind: ProfileKind::DTilde,
                decay_report: report,
                end_mismatch: (tt - tb).abs(),
            },
            d_inf,
        ))
    }

    /// Solves −ΔW = load with homogeneous Neumann ends and returns the
    /// decaying representative (end averages centred on zero).
    pub fn solve_profile_w(&self, load: Vec<f64>, p: usize, kind: ProfileKind) -> Result<ProfileFunction> {
        let mut w = self.solve_raw(load)?;
        let (top, bottom) = self.end_averages(&w);
        let shift = 0.5 * (top + bottom);
        for v in w.iter_mut() {
            *v -= shift;
        }
        let report = self.decay_report(&w)?;
        Ok(ProfileFunction {
            field: Field {
                mesh: self.mesh.clone(),
                values: w,
            },
            p,
            kind,
            decay_report: report,
            end_mismatch: (top - bottom).abs(),
        })
    }
}

fn parity_sign(k: usize) -> f64 {
    if (k / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Runs the profile recursion up to `config.order` and returns all profiles
/// and constants.
pub fn transmission_constants(config: &CellConfig) -> Result<CellSolution> {
    let problem = CellProblem::new(config)?;
    let (d, d_tilde, d_inf) = problem.solve_profile_d()?;
    let order = config.order;
    let n = problem.mesh.vertices.len();
    let g0_jump = problem.commutator_load(Combination::Difference, 0);
    let g1_jump = problem.commutator_load(Combination::Difference, 1);
    let jumps: Vec<Vec<f64>> = (0..=order)
        .map(|k| problem.commutator_load(Combination::Difference, k))
        .collect();
    let means: Vec<Vec<f64>> = (0..=order)
        .map(|k| {
            problem
                .commutator_load(Combination::Sum, k)
                .into_iter()
                .map(|v| 0.5 * v)
                .collect()
        })
        .collect();
    let mut compatibility = Vec::new();
    let mut families = Vec::new();
    for kind in [ProfileKind::Tangential, ProfileKind::Normal] {
        let mut dc = vec![0.0; order + 1];
        let mut nc = vec![0.0; order + 1];
        let mut w: Vec<ProfileFunction> = Vec::with_capacity(order + 1);
        for p in 0..=order {
            let mut b = vec![0.0; n];
            if p >= 1 {
                for (bi, v) in b.iter_mut().zip(problem.dx1_load(&w[p - 1].field.values)?) {
                    *bi += v;
                }
            }
            if p >= 2 {
                for (bi, v) in b.iter_mut().zip(problem.mass.matvec(&w[p - 2].field.values)) {
                    *bi += v;
                }
            }
            let selected = match kind {
                ProfileKind::Tangential => p % 2 == 0,
                _ => p % 2 == 1,
            };
            if selected {
                let s = 2.0 * parity_sign(p);
                for (bi, v) in b.iter_mut().zip(&means[p]) {
                    *bi += s * v;
                }
            }
            for k in 2..p {
                let coeff = if k % 2 == 0 { dc[p - k] } else { nc[p - k + 1] };
                let s = parity_sign(k) * 0.5 * coeff;
                for (bi, v) in b.iter_mut().zip(&jumps[k]) {
                    *bi += s * v;
                }
            }
            let dp: f64 = b.iter().zip(&d.values).map(|(a, c)| a * c).sum();
            let np: f64 = -b.iter().sum::<f64>();
            dc[p] = dp;
            nc[p] = np;
            let rhs: Vec<f64> = (0..n)
                .map(|i| b[i] + 0.5 * dp * g0_jump[i] + 0.5 * np * g1_jump[i])
                .collect();
            let scale: f64 = rhs.iter().map(|v| v.abs()).sum();
            let c = Compatibility {
                label: format!("W_{}^{}", p, kind.id()),
                against_one: rhs.iter().sum(),
                against_d: rhs.iter().zip(&d.values).map(|(a, c)| a * c).sum(),
                scale,
            };
            if c.against_one.abs() > 1e-8 * scale + 1e-13 || c.against_d.abs() > 1e-8 * scale + 1e-13 {
                return Err(Error::Inconsistency(format!(
                    "{} right-hand side not compatible: against 1 {:e}, against D {:e}",
                    c.label, c.against_one, c.against_d
                )));
            }
            compatibility.push(c);
            w.push(problem.solve_profile_w(rhs, p, kind)?);
        }
        families.push((dc, nc, w));
    }
    let (d_n, n_n, w_n) = families.pop().unwrap();
    let (d_t, n_t, w_t) = families.pop().unwrap();
    let constants = TransmissionConstants {
        d_infinity: d_inf,
        d_t,
        d_n,
        n_t,
        n_n,
        order,
        profile: config.profile,
        l_band: config.l_band,
        h: config.h,
        compatibility,
    };
    Ok(CellSolution {
        config: config.clone(),
        constants,
        band: problem.mesh.clone(),
        d,
        d_tilde,
        w_t,
        w_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chi;

    fn coarse(cell: PeriodicityCell) -> CellConfig {
        CellConfig {
            cell,
            l_band: 5.0,
            h: 1.0 / 16.0,
            ..CellConfig::default()
        }
    }

    #[test]
    fn g_terms_supported_in_transition_zone() {
        for p in 0..4 {
            for x in [0.0, 0.5, 0.99, 2.0, 3.5, -0.3, -2.5] {
                let (m, j) = g_values(CutoffProfile::QuinticSmoothstep, p, x);
                assert_eq!((m, j), (0.0, 0.0));
            }
        }
        let (m, j) = g_values(CutoffProfile::QuinticSmoothstep, 0, 1.3);
        let (_, _, dd) = chi_with_derivatives(CutoffProfile::QuinticSmoothstep, 1.3);
        assert!((m - 0.5 * dd).abs() < 1e-15 && (j - dd).abs() < 1e-15);
    }

    #[test]
    fn empty_cell_has_linear_d_and_closed_form_w0() {
        let sol = transmission_constants(&coarse(PeriodicityCell::empty())).unwrap();
        for (x, v) in sol.band.vertices.iter().zip(&sol.d.values) {
            assert!((v - x[1]).abs() < 1e-10);
        }
        for (x, v) in sol.band.vertices.iter().zip(&sol.w_t[0].field.values) {
            assert!((v - (1.0 - chi(CutoffProfile::QuinticSmoothstep, x[1]))).abs() < 1e-10);
        }
        assert!(sol.constants.d_infinity.abs() < 1e-12);
    }

    fn interior(cell: PeriodicityCell) -> CellConfig {
        CellConfig {
            recursion: Recursion::Interior,
            ..coarse(cell)
        }
    }

    fn w1n_minus_d_tilde(sol: &CellSolution) -> f64 {
        let diff: Vec<f64> = sol.w_n[1]
            .field
            .values
            .iter()
            .zip(&sol.d_tilde.field.values)
            .map(|(a, b)| a - b)
            .collect();
        subdomain_norms(&sol.band, &diff, &|_| true).unwrap().l2
    }

    #[test]
    fn base_case_identities_hold_for_a_disk() {
        let sol = transmission_constants(&interior(PeriodicityCell::centered_disk(0.3))).unwrap();
        let c = &sol.constants;
        assert!((c.d_n[1] - 2.0 * c.d_infinity).abs() <= 1e-9 * c.d_infinity.abs());
        assert!(c.d_t[0].abs() < 1e-12);
        let w1t = subdomain_norms(&sol.band, &sol.w_t[1].field.values, &|_| true).unwrap().l2;
        assert!(w1t < 1e-10);
        let e = w1n_minus_d_tilde(&sol);
        assert!(e < 1e-9, "{}", e);
    }

    #[test]
    fn interior_recursion_gives_the_discrete_hole_area() {
        let cfg = interior(PeriodicityCell::centered_disk(0.2));
        let sol = transmission_constants(&cfg).unwrap();
        let area = 2.0 * cfg.l_band - sol.band.total_area();
        assert!((sol.constants.n_t[2] - area).abs() < 1e-10);
    }

    #[test]
    fn full_recursion_adds_the_tangential_corrector_energy() {
        let cfg = coarse(PeriodicityCell::centered_disk(0.25));
        let sol = transmission_constants(&cfg).unwrap();
        let c = &sol.constants;
        let area = 2.0 * cfg.l_band - sol.band.total_area();
        let energy = subdomain_norms(&sol.band, &sol.w_t[1].field.values, &|_| true).unwrap().h1_semi.powi(2);
        assert!(energy > 0.1 * area, "{} {}", energy, area);
        assert!((c.n_t[2] - area - energy).abs() < 1e-3 * c.n_t[2], "{} {} {}", c.n_t[2], area, energy);
        assert!((c.d_n[1] - 2.0 * c.d_infinity).abs() <= 1e-9 * c.d_infinity.abs());
        assert!(c.d_t[1].abs() < 1e-12 && c.n_n[2].abs() < 1e-10);
        assert!(w1n_minus_d_tilde(&sol) < 1e-9);
    }

    #[test]
    fn lemma_integrals_on_coarse_band() {
        let sol = transmission_constants(&coarse(PeriodicityCell::centered_disk(0.25))).unwrap();
        let d = sol.constants.d_infinity;
        let v = lemma_integrals(&sol);
        let expect = [0.0, -2.0, 0.0, 0.0, d, 0.0, 0.0, 2.0];
        for (a, b) in v.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-3, "{:?}", v);
        }
    }

    #[test]
    fn profiles_decay_and_are_compatible() {
        let sol = transmission_constants(&coarse(PeriodicityCell::centered_disk(0.25))).unwrap();
        for w in sol.w_t.iter().chain(&sol.w_n) {
            assert!(w.decay_report < 1e-6, "{} {}", w.p, w.decay_report);
            assert!(w.end_mismatch < 1e-8, "{} {}", w.p, w.end_mismatch);
        }
        assert_eq!(sol.constants.compatibility.len(), 6);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = CellConfig::default();
        cfg.order = 1;
        assert!(matches!(CellProblem::new(&cfg), Err(Error::Config(_))));
    }
}
