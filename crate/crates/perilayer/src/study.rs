//! Convergence study: runs the whole pipeline, compares the composite
//! approximations with direct solutions over a sequence of layer periods and
//! fits empirical orders of convergence.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{transmission_constants, CellSolution, TransmissionConstants};
use crate::config::{AcceptanceThresholds, RunConfig};
use crate::error::{Error, Result};
use crate::expansion::{approximation_error, match_low_order, CompositeApprox, Level, MatchedConstants};
use crate::geometry::Corner;
use crate::macroscopic::{
    build_u20, default_radii, extract_field_coeffs, solve_limit, solve_macro_correction, solve_singularity,
    CornerCoeffs, Correction, LimitProblem, MacroField,
};
use crate::nearfield::{solve_direct, solve_s1, NearFieldResult};

/// Wall-clock duration of one pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Records stage timings in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings(pub Vec<StageTiming>);

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f().map_err(|e| tag(stage, e));
        self.0.push(StageTiming {
            stage: stage.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Prefixes the message of an error with the failing stage.
pub fn tag(stage: &str, e: Error) -> Error {
    match e {
        Error::Geometry(m) => Error::Geometry(format!("[{}] {}", stage, m)),
        Error::Config(m) => Error::Config(format!("[{}] {}", stage, m)),
        Error::Mesh(m) => Error::Mesh(format!("[{}] {}", stage, m)),
        Error::Assembly(m) => Error::Assembly(format!("[{}] {}", stage, m)),
        Error::Solver { message, residuals } => Error::Solver {
            message: format!("[{}] {}", stage, message),
            residuals,
        },
        Error::Inconsistency(m) => Error::Inconsistency(format!("[{}] {}", stage, m)),
        Error::Numerical(m) => Error::Numerical(format!("[{}] {}", stage, m)),
        Error::Io(e) => Error::Io(e),
    }
}

/// Errors of one composite level at one layer period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub delta: f64,
    pub level: Level,
    pub l2: f64,
    pub h1: f64,
}

/// Least-squares slope of log(error) against log(δ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub slope: f64,
    /// Two standard errors of the slope, zero when the fit is exact.
    pub half_width: f64,
    /// Root-mean-square residual of the fit in log units.
    pub residual: f64,
    /// Slope below 0.1 or residual above 0.1.
    pub flagged: bool,
}

/// Fitted orders of one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EocFit {
    pub level: Level,
    pub l2: Slope,
    pub h1: Slope,
}

/// Fits `log e = s log δ + c` to `(δ, e)` pairs.
pub fn fit_eoc(points: &[(f64, f64)]) -> Result<Slope> {
    if points.len() < 3 {
        return Err(Error::Numerical(format!(
            "an order fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(d, e)| !(d > 0.0) || !(e > 0.0)) {
        return Err(Error::Numerical("order fit needs positive deltas and errors".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let residual = (sse / n).sqrt();
    let half_width = 2.0 * (sse / (n - 2.0) / sxx).sqrt();
    Ok(Slope {
        slope,
        half_width,
        residual,
        flagged: slope < 0.1 || residual > 0.1,
    })
}

/// Outcome of one acceptance threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// δ-independent pipeline outputs.
pub struct Artifacts {
    pub cell: CellSolution,
    pub problem: LimitProblem,
    pub u00: MacroField,
    pub coeffs: Vec<CornerCoeffs>,
    pub correction: Correction,
    pub nearfield: Vec<NearFieldResult>,
    pub s_minus1: Vec<MacroField>,
    pub matched: MatchedConstants,
    pub composite: CompositeApprox,
}

/// Corner coefficients of u₀₀ at both corners.
pub fn limit_coefficients(problem: &LimitProblem, u00: &MacroField) -> Result<Vec<CornerCoeffs>> {
    let radii = default_radii(problem.domain.l);
    Corner::BOTH
        .iter()
        .map(|&c| extract_field_coeffs(problem, u00, c, &[1, 2], &radii))
        .collect()
}

/// Runs every δ-independent stage.
pub fn build_artifacts(cfg: &RunConfig, timings: &mut Timings) -> Result<Artifacts> {
    let cell = timings.time("cell", || transmission_constants(&cfg.cell))?;
    let profile = cfg.cell.profile;
    let problem = timings.time("limit-mesh", || LimitProblem::new(&cfg.domain, cfg.study.h_limit, profile))?;
    let u00 = timings.time("limit", || solve_limit(&problem))?;
    let coeffs = timings.time("extract", || limit_coefficients(&problem, &u00))?;
    let correction = timings.time("correct", || {
        solve_macro_correction(&problem, &u00, &coeffs, &cell.constants)
    })?;
    let nearfield = timings.time("nearfield", || {
        Corner::BOTH
            .par_iter()
            .map(|&c| solve_s1(c, &cfg.cell.cell, &cell.constants, &cfg.nearfield))
            .collect::<Result<Vec<_>>>()
    })?;
    let s_minus1 = timings.time("singularity", || {
        Corner::BOTH
            .iter()
            .map(|&c| solve_singularity(&problem, c))
            .collect::<Result<Vec<_>>>()
    })?;
    let matched = match_low_order(
        [coeffs[0].get(1), coeffs[1].get(1)],
        [nearfield[0].l_minus1, nearfield[1].l_minus1],
    );
    let composite = timings.time("expand", || {
        let u20 = build_u20(&s_minus1[0], &s_minus1[1], matched.lm1_u20_plus, matched.lm1_u20_minus)?;
        Ok(CompositeApprox::new(
            u00.clone(),
            correction.u01.clone(),
            u20,
            correction.traces.clone(),
            &cell,
            cfg.domain.l,
            matched,
            cfg.study.composite,
        ))
    })?;
    Ok(Artifacts {
        cell,
        problem,
        u00,
        coeffs,
        correction,
        nearfield,
        s_minus1,
        matched,
        composite,
    })
}

/// Metadata stored alongside the error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub constants: TransmissionConstants,
    pub matched: MatchedConstants,
    pub l2_u00: [f64; 2],
    pub nearfield_uncertainty: [f64; 2],
    pub limit_nodes: usize,
    pub direct_nodes: Vec<usize>,
    pub mesh_sizes: Vec<f64>,
    pub timings: Timings,
}

/// Result of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ErrorRow>,
    pub eoc: Vec<EocFit>,
    /// All levels agree to 1e−12 relative, as for the hole-free cell.
    pub degenerate: bool,
    /// Levels whose error grows by more than 5% as δ decreases.
    pub monotonicity_flags: Vec<String>,
    pub acceptance: Vec<AcceptanceCheck>,
    pub metadata: ReportMetadata,
}

impl ConvergenceReport {
    /// Errors of one level in the order of the δ list.
    pub fn level_rows(&self, level: Level) -> Vec<ErrorRow> {
        self.rows.iter().filter(|r| r.level == level).copied().collect()
    }

    pub fn eoc_of(&self, level: Level) -> Option<&EocFit> {
        self.eoc.iter().find(|e| e.level == level)
    }

    /// CSV table with columns `delta,level,l2,h1`.
    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Numerical(format!("csv: {}", e));
        w.write_record(["delta", "level", "l2", "h1"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                format!("{}", r.delta),
                r.level.id().to_string(),
                format!("{:.9e}", r.l2),
                format!("{:.9e}", r.h1),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {}", e)))?;
        String::from_utf8(bytes).map_err(|e| Error::Numerical(format!("csv: {}", e)))
    }

    /// Plain-text summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let m = &self.metadata;
        let _ = writeln!(s, "D_inf = {:.10}", m.constants.d_infinity);
        let _ = writeln!(
            s,
            "l1(u00) = ({:.6e}, {:.6e}), L-1(S1) = ({:.6e}, {:.6e})",
            m.matched.l1_u00_plus, m.matched.l1_u00_minus, m.matched.lm1_s1_plus, m.matched.lm1_s1_minus
        );
        for r in &self.rows {
            let _ = writeln!(s, "delta {:<8} level {:<4} l2 {:.6e} h1 {:.6e}", r.delta, r.level.id(), r.l2, r.h1);
        }
        for e in &self.eoc {
            let _ = writeln!(
                s,
                "EOC level {:<4} h1 {:.3} +- {:.3}  l2 {:.3} +- {:.3}{}",
                e.level.id(),
                e.h1.slope,
                e.h1.half_width,
                e.l2.slope,
                e.l2.half_width,
                if e.h1.flagged { "  (flagged)" } else { "" }
            );
        }
        if self.degenerate {
            let _ = writeln!(s, "degenerate: all levels coincide");
        }
        for f in &self.monotonicity_flags {
            let _ = writeln!(s, "monotonicity: {}", f);
        }
        for c in &self.acceptance {
            let _ = writeln!(
                s,
                "{} {}: {:.4} (threshold {:.4})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            );
        }
        s
    }

    pub fn accepted(&self) -> bool {
        self.acceptance.iter().all(|c| c.pass)
    }
}

fn acceptance_checks(rows: &[ErrorRow], eoc: &[EocFit], t: &AcceptanceThresholds) -> Vec<AcceptanceCheck> {
    let mut out = Vec::new();
    let find = |l: Level| eoc.iter().find(|e| e.level == l).map(|e| e.h1.slope);
    let h1 = |l: Level| rows.iter().filter(|r| r.level == l).map(|r| r.h1).collect::<Vec<_>>();
    if let Some(e0) = find(Level::TwoThirds) {
        out.push(AcceptanceCheck {
            name: "eoc_h1_level_2/3".into(),
            value: e0,
            threshold: t.eoc_min,
            pass: e0 >= t.eoc_min,
        });
        if let Some(e1) = find(Level::One) {
            out.push(AcceptanceCheck {
                name: "eoc_gain_level_1".into(),
                value: e1 - e0,
                threshold: t.eoc_gap,
                pass: e1 - e0 >= t.eoc_gap,
            });
            let (a, b) = (h1(Level::TwoThirds), h1(Level::One));
            let worst = a.iter().zip(&b).map(|(x, y)| y / x).fold(0.0f64, f64::max);
            out.push(AcceptanceCheck {
                name: "level_1_error_ratio_max".into(),
                value: worst,
                threshold: 1.0,
                pass: worst < 1.0,
            });
        }
    }
    let (a, b) = (h1(Level::One), h1(Level::FourThirds));
    if !a.is_empty() && a.len() == b.len() {
        let worst = a.iter().zip(&b).map(|(x, y)| y / x - 1.0).fold(f64::NEG_INFINITY, f64::max);
        out.push(AcceptanceCheck {
            name: "level_4/3_max_increase".into(),
            value: worst,
            threshold: t.singular_max_increase,
            pass: worst <= t.singular_max_increase,
        });
        let last = b[b.len() - 1] / a[a.len() - 1];
        out.push(AcceptanceCheck {
            name: "level_4/3_ratio_finest".into(),
            value: last,
            threshold: 1.0,
            pass: last < 1.0,
        });
    }
    out
}

/// Assembles a report from error rows and metadata.
pub fn assemble_report(
    cfg: &RunConfig,
    rows: Vec<ErrorRow>,
    metadata: ReportMetadata,
) -> Result<ConvergenceReport> {
    let mut eoc = Vec::new();
    if cfg.study.deltas.len() >= 3 {
        for &level in &cfg.study.levels {
            let pts = |f: fn(&ErrorRow) -> f64| -> Vec<(f64, f64)> {
                rows.iter().filter(|r| r.level == level).map(|r| (r.delta, f(r))).collect()
            };
            let l2 = pts(|r| r.l2);
            let h1 = pts(|r| r.h1);
            if let (Ok(l2), Ok(h1)) = (fit_eoc(&l2), fit_eoc(&h1)) {
                eoc.push(EocFit { level, l2, h1 });
            }
        }
    }
    let first = cfg.study.levels[0];
    let degenerate = cfg.study.levels.iter().all(|&l| {
        rows.iter().filter(|r| r.level == l).zip(rows.iter().filter(|r| r.level == first)).all(|(a, b)| {
            (a.h1 - b.h1).abs() <= 1e-12 * b.h1.abs().max(f64::MIN_POSITIVE)
        })
    });
    let mut monotonicity_flags = Vec::new();
    for &level in &cfg.study.levels {
        let h: Vec<f64> = rows.iter().filter(|r| r.level == level).map(|r| r.h1).collect();
        for w in h.windows(2) {
            if w[1] > 1.05 * w[0] {
                monotonicity_flags.push(format!("level {} error grows from {:.4e} to {:.4e}", level.id(), w[0], w[1]));
            }
        }
    }
    let acceptance = match &cfg.study.acceptance {
        Some(t) if !degenerate => acceptance_checks(&rows, &eoc, t),
        _ => Vec::new(),
    };
    Ok(ConvergenceReport {
        rows,
        eoc,
        degenerate,
        monotonicity_flags,
        acceptance,
        metadata,
    })
}

/// Direct solves and error norms for every δ. Rows are sorted by decreasing
/// δ and then by level. When a solve fails, the rows of the other periods are
/// returned with the error.
pub fn compute_rows(
    cfg: &RunConfig,
    composite: &CompositeApprox,
    timings: &mut Timings,
) -> std::result::Result<(Vec<ErrorRow>, Vec<usize>), (Error, Vec<ErrorRow>)> {
    let start = Instant::now();
    let results: Vec<Result<(Vec<ErrorRow>, usize)>> = cfg
        .study
        .deltas
        .par_iter()
        .map(|&delta| {
            let h = cfg.study.mesh_size(delta);
            let direct = solve_direct(&cfg.domain, &cfg.cell.cell, delta, h)
                .map_err(|e| tag(&format!("direct delta={}", delta), e))?;
            let rows = cfg
                .study
                .levels
                .iter()
                .map(|&level| {
                    let n = approximation_error(&direct, composite, level, cfg.study.alpha)
                        .map_err(|e| tag(&format!("error delta={}", delta), e))?;
                    Ok(ErrorRow {
                        delta,
                        level,
                        l2: n.l2,
                        h1: n.h1,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((rows, direct.mesh().vertices.len()))
        })
        .collect();
    timings.0.push(StageTiming {
        stage: "direct+errors".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    let mut rows = Vec::new();
    let mut direct_nodes = Vec::new();
    let mut failure = None;
    for r in results {
        match r {
            Ok((mut rs, n)) => {
                rows.append(&mut rs);
                direct_nodes.push(n);
            }
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
            }
        }
    }
    rows.sort_by(|a, b| b.delta.total_cmp(&a.delta).then(a.level.cmp(&b.level)));
    match failure {
        Some(e) => Err((e, rows)),
        None => Ok((rows, direct_nodes)),
    }
}

/// Runs the full study. When a direct solve fails, the rows computed so far
/// are returned together with the error.
pub fn run_convergence(cfg: &RunConfig) -> std::result::Result<ConvergenceReport, (Error, Vec<ErrorRow>)> {
    cfg.validate().map_err(|e| (e, Vec::new()))?;
    let mut timings = Timings::default();
    let art = build_artifacts(cfg, &mut timings).map_err(|e| (e, Vec::new()))?;
    report_from_artifacts(cfg, &art, timings)
}

/// Study stages that follow [`build_artifacts`].
pub fn report_from_artifacts(
    cfg: &RunConfig,
    art: &Artifacts,
    mut timings: Timings,
) -> std::result::Result<ConvergenceReport, (Error, Vec<ErrorRow>)> {
    let (rows, direct_nodes) = compute_rows(cfg, &art.composite, &mut timings)?;
    let metadata = ReportMetadata {
        constants: art.cell.constants.clone(),
        matched: art.matched,
        l2_u00: [art.coeffs[0].get(2), art.coeffs[1].get(2)],
        nearfield_uncertainty: [art.nearfield[0].uncertainty, art.nearfield[1].uncertainty],
        limit_nodes: art.problem.mesh.vertices.len(),
        direct_nodes,
        mesh_sizes: cfg.study.deltas.iter().map(|&d| cfg.study.mesh_size(d)).collect(),
        timings,
    };
    assemble_report(cfg, rows, metadata).map_err(|e| (e, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_laws() {
        let d = [0.25, 0.125, 0.0625];
        let s = fit_eoc(&d.map(|x| (x, x))).unwrap();
        assert!((s.slope - 1.0).abs() < 1e-12 && s.half_width < 1e-9 && !s.flagged);
        let s = fit_eoc(&d.map(|x| (x, 3.0 * x.powf(4.0 / 3.0)))).unwrap();
        assert!((s.slope - 4.0 / 3.0).abs() < 1e-12);
        let s = fit_eoc(&d.map(|x| (x, 0.5))).unwrap();
        assert!(s.slope.abs() < 1e-12 && s.flagged);
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(fit_eoc(&[(0.5, 1.0), (0.25, 0.5)]).is_err());
    }

    #[test]
    fn stage_errors_are_tagged() {
        let e = tag("cell", Error::Numerical("boom".into()));
        assert_eq!(e.to_string(), "numerical error: [cell] boom");
    }
}
