//! Macroscopic hierarchy on the limit domain: the limit field u₀₀, the
//! singular harmonic functions s₋₁^±, the first transmission correction u₀₁
//! and the singular term u₂₀, together with corner-coefficient extraction.
//!
//! Fields that blow up at a corner are stored as a finite-element part plus
//! analytic lifts `c χ_L(r) r^λ G(θ)` that are added on evaluation.

pub mod cone;
pub mod extract;
pub mod spline;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cone::{cone_lift, first_order_amplitudes, is_resonant, ConeLift};
pub use extract::{angular_projection, default_radii, extract_corner_coeffs, CornerCoeffs};
pub use spline::CubicSpline;

use crate::cell::TransmissionConstants;
use crate::error::{Error, Result};
use crate::fem::quadrature::TriangleRule;
use crate::fem::{
    assemble, energy_identity_gap, interface_nodes, load_vector, trace_normal_derivative, Factorization,
    Field, Side, SparseSystem,
};
use crate::geometry::{corner_cutoff, lambda, Corner, CornerFrame, CutoffProfile, DomainSpec, Point};
use crate::mesh::{mesh_limit_split, EdgeTag, Locator, Mesh};

/// Which macroscopic term a field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroLabel {
    U00,
    U01,
    SMinus1Plus,
    SMinus1Minus,
    U20,
}

impl MacroLabel {
    pub fn id(self) -> &'static str {
        match self {
            MacroLabel::U00 => "u00",
            MacroLabel::U01 => "u01",
            MacroLabel::SMinus1Plus => "s_minus1_plus",
            MacroLabel::SMinus1Minus => "s_minus1_minus",
            MacroLabel::U20 => "u20",
        }
    }
}

/// Side of the layer line a point belongs to when it has no other label.
pub fn side_of(x: Point) -> Side {
    if x[1] < 0.0 {
        Side::Bottom
    } else {
        Side::Top
    }
}

/// Analytic corner term `coefficient · χ_L(r) · r^λ · G(θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularLift {
    pub corner: Corner,
    pub origin: Point,
    pub angular: ConeLift,
    pub coefficient: f64,
    /// Radius L of the cut-off χ_L = 1 − χ(2r/L).
    pub cutoff_radius: f64,
    pub profile: CutoffProfile,
}

impl SingularLift {
    fn frame(&self) -> CornerFrame {
        CornerFrame {
            corner: self.corner,
            origin: self.origin,
        }
    }

    fn polar(&self, x: Point) -> (f64, f64) {
        self.frame().polar(x)
    }

    /// Value at `x` on the given side of the layer line. The corner itself
    /// evaluates to zero.
    pub fn value(&self, x: Point, side: Side) -> f64 {
        let (r, t) = self.polar(x);
        if r == 0.0 || r >= self.cutoff_radius {
            return 0.0;
        }
        let (c, _, _) = corner_cutoff(self.profile, self.cutoff_radius, r);
        self.coefficient * c * r.powf(self.angular.lambda) * self.angular.value(side, t)
    }

    /// Laplacian of the lift; nonzero only where the cut-off varies.
    pub fn laplacian(&self, x: Point, side: Side) -> f64 {
        let (r, t) = self.polar(x);
        if r <= 0.5 * self.cutoff_radius || r >= self.cutoff_radius {
            return 0.0;
        }
        let (_, dc, ddc) = corner_cutoff(self.profile, self.cutoff_radius, r);
        let mu = self.angular.lambda;
        self.coefficient * self.angular.value(side, t) * r.powf(mu) * (ddc + (1.0 + 2.0 * mu) * dc / r)
    }
}

/// A macroscopic field: finite-element part on the split limit mesh plus
/// analytic corner lifts.
#[derive(Debug, Clone)]
pub struct MacroField {
    pub label: MacroLabel,
    pub field: Field,
    pub lifts: Vec<SingularLift>,
    locator: Arc<Locator>,
    top_triangle: Arc<Vec<bool>>,
    node_side: Arc<Vec<Side>>,
}

impl MacroField {
    /// P1 value of the finite-element part on the given side.
    pub fn regular_value(&self, x: Point, side: Side) -> Option<f64> {
        let mesh = &self.field.mesh;
        let want = side == Side::Top;
        let loc = self
            .locator
            .locate_filtered(mesh, x, |t| self.top_triangle[t] == want)?;
        let v = mesh.triangles[loc.triangle];
        let u = &self.field.values;
        Some(loc.bary[0] * u[v[0]] + loc.bary[1] * u[v[1]] + loc.bary[2] * u[v[2]])
    }

    /// Total value (finite-element part plus lifts) on the given side.
    pub fn value(&self, x: Point, side: Side) -> Option<f64> {
        let reg = self.regular_value(x, side)?;
        Some(reg + self.lifts.iter().map(|l| l.value(x, side)).sum::<f64>())
    }

    /// Mean of the two traces on the layer line at abscissa `x1`.
    pub fn trace_mean(&self, x1: f64) -> Option<f64> {
        let p = [x1, 0.0];
        Some(0.5 * (self.value(p, Side::Top)? + self.value(p, Side::Bottom)?))
    }

    /// Jump (top minus bottom) of the total field at `x1`.
    pub fn trace_jump(&self, x1: f64) -> Option<f64> {
        let p = [x1, 0.0];
        Some(self.value(p, Side::Top)? - self.value(p, Side::Bottom)?)
    }

    /// Total nodal values; corner nodes carry the finite-element part only.
    pub fn nodal_total(&self) -> Vec<f64> {
        let mesh = &self.field.mesh;
        mesh.vertices
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                self.field.values[i] + self.lifts.iter().map(|l| l.value(x, self.node_side[i])).sum::<f64>()
            })
            .collect()
    }

    /// `Σ c_k f_k` of fields sharing one mesh.
    pub fn combination(label: MacroLabel, terms: &[(f64, &MacroField)]) -> Result<MacroField> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Numerical("empty field combination".into()))?
            .1;
        let mut values = vec![0.0; first.field.values.len()];
        let mut lifts = Vec::new();
        for (c, f) in terms {
            if !Arc::ptr_eq(&f.field.mesh, &first.field.mesh) {
                return Err(Error::Numerical("combined fields live on different meshes".into()));
            }
            for (v, u) in values.iter_mut().zip(&f.field.values) {
                *v += c * u;
            }
            lifts.extend(f.lifts.iter().map(|l| SingularLift {
                coefficient: c * l.coefficient,
                ..*l
            }));
        }
        Ok(MacroField {
            label,
            field: Field {
                mesh: first.field.mesh.clone(),
                values,
            },
            lifts,
            locator: first.locator.clone(),
            top_triangle: first.top_triangle.clone(),
            node_side: first.node_side.clone(),
        })
    }
}

/// Shared discretization of the limit problem: split mesh, operators and a
/// factorization reused by every macroscopic solve.
pub struct LimitProblem {
    pub domain: DomainSpec,
    pub profile: CutoffProfile,
    pub h: f64,
    pub mesh: Arc<Mesh>,
    base: SparseSystem,
    factorization: Factorization,
    locator: Arc<Locator>,
    top_triangle: Arc<Vec<bool>>,
    node_side: Arc<Vec<Side>>,
}

type JumpData<'a> = (&'a dyn Fn(f64) -> f64, &'a dyn Fn(f64) -> f64);

impl LimitProblem {
    pub fn new(domain: &DomainSpec, h: f64, profile: CutoffProfile) -> Result<Self> {
        let mesh = Arc::new(mesh_limit_split(domain, h)?);
        let base = assemble(&mesh, Some(&domain.source))?;
        let mut node_side: Vec<Side> = mesh.vertices.iter().map(|&x| side_of(x)).collect();
        for &(_, b) in &mesh.interface_pairs {
            node_side[b] = Side::Bottom;
        }
        let top_triangle = (0..mesh.triangles.len()).map(|t| mesh.centroid(t)[1] > 0.0).collect();
        let zero = |_: f64| 0.0;
        let template = Self::constrained(&base, &|_| 0.0, (&zero, &zero))?;
        let factorization = template.factorize()?;
        Ok(LimitProblem {
            domain: *domain,
            profile,
            h,
            locator: Arc::new(Locator::new(&mesh)),
            mesh,
            base,
            factorization,
            top_triangle: Arc::new(top_triangle),
            node_side: Arc::new(node_side),
        })
    }

    fn constrained(base: &SparseSystem, dirichlet: &dyn Fn(Point) -> f64, jumps: JumpData) -> Result<SparseSystem> {
        let mut sys = base.clone();
        sys.apply_dirichlet(EdgeTag::Dirichlet, dirichlet)?;
        sys.apply_interface_jump(jumps.0, jumps.1)?;
        Ok(sys)
    }

    /// Solves −Δu = load with Dirichlet data and interface jumps.
    fn solve_data(&self, rhs: Vec<f64>, dirichlet: &dyn Fn(Point) -> f64, jumps: JumpData) -> Result<Field> {
        let mut sys = self.base.clone();
        sys.rhs = rhs;
        let sys = Self::constrained(&sys, dirichlet, jumps)?;
        sys.solve_with(&self.factorization)
    }

    /// Wraps a finite-element part and lifts into a field on this mesh.
    pub fn field(&self, label: MacroLabel, field: Field, lifts: Vec<SingularLift>) -> MacroField {
        MacroField {
            label,
            field,
            lifts,
            locator: self.locator.clone(),
            top_triangle: self.top_triangle.clone(),
            node_side: self.node_side.clone(),
        }
    }

    pub fn frame(&self, corner: Corner) -> CornerFrame {
        CornerFrame::new(corner, self.domain.l)
    }

    fn lift_load(&self, lifts: &[SingularLift]) -> Vec<f64> {
        load_vector(
            &self.mesh,
            &|x| lifts.iter().map(|l| l.laplacian(x, side_of(x))).sum(),
            &TriangleRule::degree5(),
        )
    }

    fn lift(&self, corner: Corner, angular: ConeLift, coefficient: f64) -> SingularLift {
        SingularLift {
            corner,
            origin: self.frame(corner).origin,
            angular,
            coefficient,
            cutoff_radius: self.domain.l,
            profile: self.profile,
        }
    }

    /// Largest |top − bottom| over the interface pairs of a nodal vector.
    pub fn max_nodal_jump(&self, values: &[f64]) -> f64 {
        self.mesh
            .interface_pairs
            .iter()
            .map(|&(t, b)| (values[t] - values[b]).abs())
            .fold(0.0, f64::max)
    }
}

/// Solves the limit problem −Δu₀₀ = f, u₀₀ = 0 on the outer boundary, with
/// no jump across the layer line.
pub fn solve_limit(problem: &LimitProblem) -> Result<MacroField> {
    let zero = |_: f64| 0.0;
    let field = problem.solve_data(problem.base.rhs.clone(), &|_| 0.0, (&zero, &zero))?;
    let jump = problem.max_nodal_jump(&field.values);
    if jump != 0.0 {
        return Err(Error::Inconsistency(format!("limit field jumps by {:e} across the layer line", jump)));
    }
    let gap = energy_identity_gap(&problem.base.matrix, &field.values, &problem.base.rhs);
    if gap > 1e-8 {
        return Err(Error::Inconsistency(format!("energy identity gap {:e} for the limit field", gap)));
    }
    Ok(problem.field(MacroLabel::U00, field, Vec::new()))
}

/// The harmonic function s₋₁^± vanishing on the outer boundary whose only
/// non-H¹ content is `r^{−2/3} w₋₁(θ)` at the given corner.
pub fn solve_singularity(problem: &LimitProblem, corner: Corner) -> Result<MacroField> {
    let lifts = vec![problem.lift(corner, ConeLift::mode(corner, -1), 1.0)];
    let rhs = problem.lift_load(&lifts);
    let zero = |_: f64| 0.0;
    let dirichlet = |x: Point| -lifts.iter().map(|l| l.value(x, side_of(x))).sum::<f64>();
    let field = problem.solve_data(rhs, &dirichlet, (&zero, &zero))?;
    let label = match corner {
        Corner::Plus => MacroLabel::SMinus1Plus,
        Corner::Minus => MacroLabel::SMinus1Minus,
    };
    Ok(problem.field(label, field, lifts))
}

/// Corner coefficients of a macroscopic field.
pub fn extract_field_coeffs(
    problem: &LimitProblem,
    field: &MacroField,
    corner: Corner,
    q_range: &[i32],
    radii: &[f64],
) -> Result<CornerCoeffs> {
    extract_corner_coeffs(&problem.frame(corner), &|x, s| field.value(x, s), q_range, radii)
}

/// One corner term `ℓ χ_L(r) c r^p` of a trace on the layer line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTerm {
    pub corner: Corner,
    pub origin: f64,
    pub amplitude: f64,
    pub power: f64,
}

impl TraceTerm {
    /// Returns (value, d/dx₁, d²/dx₁²) of the full term and the parts of the
    /// two derivatives that involve a derivative of the cut-off.
    fn evaluate(&self, x1: f64, cutoff_radius: f64, profile: CutoffProfile) -> ([f64; 3], [f64; 2]) {
        let s = CornerFrame::at_origin(self.corner).gamma_sign();
        let r = s * (x1 - self.origin);
        if !(r > 0.0) || r >= cutoff_radius {
            return ([0.0; 3], [0.0; 2]);
        }
        let (c, dc, ddc) = corner_cutoff(profile, cutoff_radius, r);
        let p = self.power;
        let a = self.amplitude;
        let rp = r.powf(p);
        let rp1 = r.powf(p - 1.0);
        let rp2 = r.powf(p - 2.0);
        let d1_cut = s * a * dc * rp;
        let d2_cut = a * (ddc * rp + 2.0 * p * dc * rp1);
        (
            [a * c * rp, d1_cut + s * a * p * c * rp1, d2_cut + a * p * (p - 1.0) * c * rp2],
            [d1_cut, d2_cut],
        )
    }
}

/// Smoothed traces of u₀₀ on the layer line: corner terms of the modes
/// n ∈ {1, 2} plus least-squares splines of the remainders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTraces {
    pub mean_terms: Vec<TraceTerm>,
    pub normal_terms: Vec<TraceTerm>,
    pub mean_spline: CubicSpline,
    pub normal_spline: CubicSpline,
    pub cutoff_radius: f64,
    pub profile: CutoffProfile,
    pub r_cut: f64,
}

impl GammaTraces {
    fn sum(terms: &[TraceTerm], x1: f64, radius: f64, profile: CutoffProfile) -> ([f64; 3], [f64; 2]) {
        let mut full = [0.0; 3];
        let mut cut = [0.0; 2];
        for t in terms {
            let (f, c) = t.evaluate(x1, radius, profile);
            for k in 0..3 {
                full[k] += f[k];
            }
            for k in 0..2 {
                cut[k] += c[k];
            }
        }
        (full, cut)
    }

    /// ⟨u₀₀⟩ at `x1`.
    pub fn mean(&self, x1: f64) -> f64 {
        Self::sum(&self.mean_terms, x1, self.cutoff_radius, self.profile).0[0] + self.mean_spline.value(x1)
    }

    /// ⟨∂₂u₀₀⟩ at `x1`.
    pub fn normal(&self, x1: f64) -> f64 {
        Self::sum(&self.normal_terms, x1, self.cutoff_radius, self.profile).0[0] + self.normal_spline.value(x1)
    }

    /// Regular parts of the first-order jump data, i.e. the jumps of u₀₁
    /// minus the jumps of its corner lifts: `(g_reg, h_reg)` at `x1`.
    pub fn regular_jumps(&self, x1: f64, constants: &TransmissionConstants) -> (f64, f64) {
        let (_, mcut) = Self::sum(&self.mean_terms, x1, self.cutoff_radius, self.profile);
        let (_, ncut) = Self::sum(&self.normal_terms, x1, self.cutoff_radius, self.profile);
        let d1t = constants.d_t.get(1).copied().unwrap_or(0.0);
        let d1n = constants.d_n.get(1).copied().unwrap_or(0.0);
        let n2t = constants.n_t.get(2).copied().unwrap_or(0.0);
        let n2n = constants.n_n.get(2).copied().unwrap_or(0.0);
        let ru1 = self.mean_spline.derivative(x1, 1) + mcut[0];
        let ru2 = self.mean_spline.derivative(x1, 2) + mcut[1];
        let rd0 = self.normal_spline.value(x1);
        let rd1 = self.normal_spline.derivative(x1, 1) + ncut[0];
        (d1t * ru1 + d1n * rd0, n2t * ru2 + n2n * rd1)
    }
}

/// Builds the smoothed traces of u₀₀ from its corner coefficients ℓ₁^±, ℓ₂^±.
pub fn gamma_traces(problem: &LimitProblem, u00: &MacroField, coeffs: &[CornerCoeffs]) -> Result<GammaTraces> {
    let l = problem.domain.l;
    let r_cut = 0.05 * l;
    let mut mean_terms = Vec::new();
    let mut normal_terms = Vec::new();
    for c in coeffs {
        let frame = CornerFrame::at_origin(c.corner);
        let s = frame.gamma_sign();
        let g = frame.layer_angle();
        for n in [1, 2] {
            let ell = c.get(n);
            let origin = problem.frame(c.corner).origin[0];
            mean_terms.push(TraceTerm {
                corner: c.corner,
                origin,
                amplitude: ell * frame.mode(n, g),
                power: lambda(n),
            });
            normal_terms.push(TraceTerm {
                corner: c.corner,
                origin,
                amplitude: ell * s * frame.mode_derivative(n, g),
                power: lambda(n) - 1.0,
            });
        }
    }
    let mesh = &problem.mesh;
    let top = trace_normal_derivative(mesh, &u00.field.values, Side::Top)?;
    let bottom = trace_normal_derivative(mesh, &u00.field.values, Side::Bottom)?;
    let top_nodes = interface_nodes(mesh, Side::Top);
    let bottom_nodes = interface_nodes(mesh, Side::Bottom);
    let (a, b) = (-l + r_cut, l - r_cut);
    let mut mean_samples = Vec::new();
    let mut normal_samples = Vec::new();
    for k in 0..top_nodes.len() {
        let x1 = top_nodes[k].0;
        if x1 < a || x1 > b {
            continue;
        }
        let u = 0.5 * (u00.field.values[top_nodes[k].1] + u00.field.values[bottom_nodes[k].1]);
        let d = 0.5 * (top[k].1 + bottom[k].1);
        let (mt, _) = GammaTraces::sum(&mean_terms, x1, l, problem.profile);
        let (nt, _) = GammaTraces::sum(&normal_terms, x1, l, problem.profile);
        mean_samples.push((x1, u - mt[0]));
        normal_samples.push((x1, d - nt[0]));
    }
    let intervals = (mean_samples.len() / 3).clamp(4, 48);
    Ok(GammaTraces {
        mean_spline: CubicSpline::fit(&mean_samples, a, b, intervals)?,
        normal_spline: CubicSpline::fit(&normal_samples, a, b, intervals)?,
        mean_terms,
        normal_terms,
        cutoff_radius: l,
        profile: problem.profile,
        r_cut,
    })
}

/// Output of the first-order correction.
#[derive(Debug, Clone)]
pub struct Correction {
    pub u01: MacroField,
    pub traces: GammaTraces,
    /// (corner, n, a, b) of every lifted mode.
    pub amplitudes: Vec<(Corner, i32, f64, f64)>,
}

/// Solves for u₀₁: jumps `[u] = D₁ᵗ ∂₁⟨u₀₀⟩ + D₁ⁿ ⟨∂₂u₀₀⟩` and
/// `[∂₂u] = N₂ᵗ ∂₁²⟨u₀₀⟩ + N₂ⁿ ∂₁⟨∂₂u₀₀⟩`. The corner content generated by
/// the modes n ∈ {1, 2} of u₀₀ is carried by cone lifts, the rest by the
/// finite-element part.
pub fn solve_macro_correction(
    problem: &LimitProblem,
    u00: &MacroField,
    coeffs: &[CornerCoeffs],
    constants: &TransmissionConstants,
) -> Result<Correction> {
    let traces = gamma_traces(problem, u00, coeffs)?;
    let mut lifts = Vec::new();
    let mut amplitudes = Vec::new();
    for c in coeffs {
        for n in [1, 2] {
            let (a, b) = first_order_amplitudes(c.corner, n, constants);
            let angular = cone_lift(c.corner, lambda(n) - 1.0, a, b)?;
            amplitudes.push((c.corner, n, a, b));
            lifts.push(problem.lift(c.corner, angular, c.get(n)));
        }
    }
    let rhs = problem.lift_load(&lifts);
    let dirichlet = |x: Point| -lifts.iter().map(|l| l.value(x, side_of(x))).sum::<f64>();
    let g = |x1: f64| traces.regular_jumps(x1, constants).0;
    let h = |x1: f64| traces.regular_jumps(x1, constants).1;
    let field = problem.solve_data(rhs, &dirichlet, (&g, &h))?;
    Ok(Correction {
        u01: problem.field(MacroLabel::U01, field, lifts),
        traces,
        amplitudes,
    })
}

/// u₂₀ = Σ_± ℓ₋₁^±(u₂₀) s₋₁^±.
pub fn build_u20(s_plus: &MacroField, s_minus: &MacroField, lm1_plus: f64, lm1_minus: f64) -> Result<MacroField> {
    MacroField::combination(MacroLabel::U20, &[(lm1_plus, s_plus), (lm1_minus, s_minus)])
}

#[cfg(test)]
mod tests;
