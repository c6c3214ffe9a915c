//! Matching of the low-order constants and evaluation of the composite
//! approximation: macroscopic terms away from the layer blended with the
//! boundary-layer correctors inside it.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{CellSolution, ProfileFunction};
use crate::error::{Error, Result};
use crate::fem::{subdomain_norms, Norms, Side};
use crate::geometry::{chi, CutoffProfile, Point};
use crate::macroscopic::{side_of, GammaTraces, MacroField};
use crate::mesh::{Locator, Mesh};
use crate::nearfield::DirectSolution;

/// Matched constants at the implemented orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedConstants {
    /// ℓ₁^±(u₀₀).
    pub l1_u00_plus: f64,
    pub l1_u00_minus: f64,
    /// ℒ₁(U₁,₀,±).
    pub big_l1_u10_plus: f64,
    pub big_l1_u10_minus: f64,
    /// ℒ₋₁(S₁^±).
    pub lm1_s1_plus: f64,
    pub lm1_s1_minus: f64,
    /// ℓ₋₁^±(u₂,₀).
    pub lm1_u20_plus: f64,
    pub lm1_u20_minus: f64,
    /// u₁,q vanishes identically.
    pub u1q_vanish: bool,
    /// U₀,q,± vanishes identically.
    pub u0q_near_vanish: bool,
}

/// Applies the matching conditions at orders n ≤ 2, q ≤ 1.
pub fn match_low_order(l1_u00: [f64; 2], lm1_s1: [f64; 2]) -> MatchedConstants {
    let big_l1 = l1_u00;
    MatchedConstants {
        l1_u00_plus: l1_u00[0],
        l1_u00_minus: l1_u00[1],
        big_l1_u10_plus: big_l1[0],
        big_l1_u10_minus: big_l1[1],
        lm1_s1_plus: lm1_s1[0],
        lm1_s1_minus: lm1_s1[1],
        lm1_u20_plus: big_l1[0] * lm1_s1[0],
        lm1_u20_minus: big_l1[1] * lm1_s1[1],
        u1q_vanish: true,
        u0q_near_vanish: true,
    }
}

/// Truncation order N₀ of the composite approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "2/3")]
    TwoThirds,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "4/3")]
    FourThirds,
    #[serde(rename = "5/3")]
    FiveThirds,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::TwoThirds, Level::One, Level::FourThirds, Level::FiveThirds];

    pub fn id(self) -> &'static str {
        match self {
            Level::TwoThirds => "2/3",
            Level::One => "1",
            Level::FourThirds => "4/3",
            Level::FiveThirds => "5/3",
        }
    }

    pub fn exponent(self) -> f64 {
        match self {
            Level::TwoThirds => 2.0 / 3.0,
            Level::One => 1.0,
            Level::FourThirds => 4.0 / 3.0,
            Level::FiveThirds => 5.0 / 3.0,
        }
    }

    fn first_order(self) -> bool {
        self >= Level::One
    }

    fn singular(self) -> bool {
        self >= Level::FourThirds
    }
}

/// Arrangement of the composite inside the layer strip |x₁| < L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositeForm {
    /// Macroscopic sum everywhere plus the decaying part of the corrector,
    /// δ⟨∂₂u₀₀⟩(W₁ⁿ − (1 − χ)(X₂ ± D∞)).
    #[default]
    Additive,
    /// χ(x₂/δ)·(macroscopic sum) + Π₀,₀ + Π₀,₁, which replaces the
    /// macroscopic sum by its linear expansion about Γ where χ < 1.
    Blended,
}

/// A band profile sampled by P1 interpolation with X₁ reduced modulo 1 and
/// set to zero beyond |X₂| = L_band − 1.
#[derive(Debug, Clone)]
pub struct BandProfile {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    pub l_band: f64,
    locator: Arc<Locator>,
}

impl BandProfile {
    pub fn new(profile: &ProfileFunction, l_band: f64) -> Self {
        BandProfile {
            locator: Arc::new(Locator::new(&profile.field.mesh)),
            mesh: profile.field.mesh.clone(),
            values: profile.field.values.clone(),
            l_band,
        }
    }

    /// Subtracts the analytic part (1 − χ(X₂))X₂ from the nodal values.
    pub fn without_linear_part(mut self, cutoff: CutoffProfile) -> Self {
        for (v, x) in self.values.iter_mut().zip(&self.mesh.vertices) {
            *v -= (1.0 - chi(cutoff, x[1])) * x[1];
        }
        self
    }

    /// Identically zero profile, as for the hole-free cell.
    pub fn zero(mesh: Arc<Mesh>, l_band: f64) -> Self {
        BandProfile {
            locator: Arc::new(Locator::new(&mesh)),
            values: vec![0.0; mesh.vertices.len()],
            mesh,
            l_band,
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        if x[1].abs() > self.l_band - 1.0 {
            return 0.0;
        }
        let p = [x[0].rem_euclid(1.0), x[1]];
        match self.locator.locate_nearest(&self.mesh, p) {
            Some(loc) => {
                let v = self.mesh.triangles[loc.triangle];
                loc.bary[0] * self.values[v[0]] + loc.bary[1] * self.values[v[1]] + loc.bary[2] * self.values[v[2]]
            }
            None => 0.0,
        }
    }
}

/// The stored terms of the composite approximation. All δ-dependence enters
/// at evaluation.
#[derive(Debug, Clone)]
pub struct CompositeApprox {
    pub u00: MacroField,
    pub u01: MacroField,
    pub u20: MacroField,
    /// Smoothed ⟨u₀₀⟩ and ⟨∂₂u₀₀⟩.
    pub traces: GammaTraces,
    /// W₁ⁿ − (1 − χ)X₂ on the band, which vanishes for the hole-free cell.
    pub w1n: BandProfile,
    pub profile: CutoffProfile,
    /// Half-length L of the layer.
    pub l: f64,
    /// Far-field shift of the band profile D.
    pub d_infinity: f64,
    pub constants: MatchedConstants,
    pub form: CompositeForm,
}

impl CompositeApprox {
    /// Assembles the composite from the pipeline outputs.
    pub fn new(
        u00: MacroField,
        u01: MacroField,
        u20: MacroField,
        traces: GammaTraces,
        cell: &CellSolution,
        l: f64,
        constants: MatchedConstants,
        form: CompositeForm,
    ) -> Self {
        CompositeApprox {
            u00,
            u01,
            u20,
            traces,
            w1n: BandProfile::new(&cell.w_n[1], cell.config.l_band).without_linear_part(cell.config.profile),
            profile: cell.config.profile,
            l,
            d_infinity: cell.constants.d_infinity,
            constants,
            form,
        }
    }
}

fn missing(x: Point) -> Error {
    Error::Numerical(format!("point ({}, {}) lies outside the limit mesh", x[0], x[1]))
}

/// Composite approximation of order `level` at `x`.
pub fn evaluate_composite(approx: &CompositeApprox, level: Level, delta: f64, x: Point) -> Result<f64> {
    let side = side_of(x);
    let u00 = approx.u00.value(x, side).ok_or_else(|| missing(x))?;
    if !level.first_order() {
        return Ok(u00);
    }
    let mut far = u00 + delta * approx.u01.value(x, side).ok_or_else(|| missing(x))?;
    let d43 = delta.powf(4.0 / 3.0);
    if level.singular() {
        far += d43 * approx.u20.value(x, side).ok_or_else(|| missing(x))?;
    }
    if x[0].abs() >= approx.l {
        return Ok(far);
    }
    let big_x = [(x[0] + approx.l) / delta, x[1] / delta];
    let c = chi(approx.profile, big_x[1]);
    if c == 1.0 && big_x[1].abs() > approx.w1n.l_band - 1.0 {
        return Ok(far);
    }
    let x1 = x[0];
    match approx.form {
        CompositeForm::Additive => {
            let shift = match side {
                Side::Top => approx.d_infinity,
                Side::Bottom => -approx.d_infinity,
            };
            let decaying = approx.w1n.value(big_x) - (1.0 - c) * shift;
            Ok(far + delta * approx.traces.normal(x1) * decaying)
        }
        CompositeForm::Blended => {
            let mut mean = approx.traces.mean(x1) + delta * approx.u01.trace_mean(x1).ok_or_else(|| missing(x))?;
            if level.singular() {
                mean += d43 * approx.u20.trace_mean(x1).ok_or_else(|| missing(x))?;
            }
            let corrector = (1.0 - c) * mean + delta * approx.traces.normal(x1) * (approx.w1n.value(big_x) + (1.0 - c) * big_x[1]);
            Ok(c * far + corrector)
        }
    }
}

/// Composite values at every node of `mesh`.
pub fn composite_nodal(approx: &CompositeApprox, level: Level, delta: f64, mesh: &Mesh) -> Result<Vec<f64>> {
    mesh.vertices
        .par_iter()
        .map(|&x| evaluate_composite(approx, level, delta, x))
        .collect()
}

/// Ω_α: everything outside the strip (−L−α, L+α)×(−α, α).
pub fn in_omega_alpha(x: Point, l: f64, alpha: f64) -> bool {
    !(x[0].abs() < l + alpha && x[1].abs() < alpha)
}

/// L² and H¹ norms of `u_direct − composite` on Ω_α.
pub fn approximation_error(
    direct: &DirectSolution,
    approx: &CompositeApprox,
    level: Level,
    alpha: f64,
) -> Result<Norms> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha = {} must be positive", alpha)));
    }
    let mesh = direct.mesh();
    let (ymin, ymax) = mesh
        .vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[1]), b.max(p[1])));
    if alpha >= 0.5 * (-ymin).min(ymax) {
        return Err(Error::Config(format!(
            "alpha = {} must be below half the smaller domain height",
            alpha
        )));
    }
    let comp = composite_nodal(approx, level, direct.delta, mesh)?;
    let diff: Vec<f64> = direct.field.values.iter().zip(&comp).map(|(a, b)| a - b).collect();
    let l = approx.l;
    subdomain_norms(mesh, &diff, &|c| in_omega_alpha(c, l, alpha))
}

#[cfg(test)]
mod tests;
