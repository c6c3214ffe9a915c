use super::*;
use crate::cell::{transmission_constants, CellConfig};
use crate::fem::{Field, Side};
use crate::geometry::{Corner, DomainSpec, PeriodicityCell, SourceSpec};
use crate::macroscopic::{
    build_u20, default_radii, extract_field_coeffs, solve_limit, solve_macro_correction, solve_singularity,
    LimitProblem,
};
use crate::mesh::mesh_perforated;

fn domain() -> DomainSpec {
    DomainSpec {
        l: 1.0,
        l_top: 1.5,
        h_b: 0.75,
        h_t: 0.75,
        source: SourceSpec {
            center: [0.0, 0.4],
            radius: 0.2,
            amplitude: 1.0,
        },
    }
}

fn build(cell: PeriodicityCell) -> CompositeApprox {
    build_with(cell, CompositeForm::Additive)
}

fn build_with(cell: PeriodicityCell, form: CompositeForm) -> CompositeApprox {
    let lm1 = if cell.is_empty() { 0.0 } else { 0.05 };
    let profile = CutoffProfile::QuinticSmoothstep;
    let sol = transmission_constants(&CellConfig {
        cell,
        profile,
        l_band: 4.0,
        h: 1.0 / 8.0,
        order: 2,
        ..CellConfig::default()
    })
    .unwrap();
    let k = sol.constants.clone();
    let p = LimitProblem::new(&domain(), 1.0 / 16.0, profile).unwrap();
    let u00 = solve_limit(&p).unwrap();
    let radii = default_radii(1.0);
    let coeffs: Vec<_> = Corner::BOTH
        .iter()
        .map(|&c| extract_field_coeffs(&p, &u00, c, &[1, 2], &radii).unwrap())
        .collect();
    let corr = solve_macro_correction(&p, &u00, &coeffs, &k).unwrap();
    let m = match_low_order([coeffs[0].get(1), coeffs[1].get(1)], [lm1, lm1]);
    let sp = solve_singularity(&p, Corner::Plus).unwrap();
    let sm = solve_singularity(&p, Corner::Minus).unwrap();
    let u20 = build_u20(&sp, &sm, m.lm1_u20_plus, m.lm1_u20_minus).unwrap();
    CompositeApprox::new(u00, corr.u01, u20, corr.traces, &sol, 1.0, m, form)
}

#[test]
fn matching_of_zero_inputs_is_zero() {
    let m = match_low_order([0.0, 0.0], [0.3, -0.2]);
    assert_eq!(m.lm1_u20_plus, 0.0);
    assert_eq!(m.big_l1_u10_minus, 0.0);
    let m = match_low_order([0.4, 0.5], [0.0, 0.0]);
    assert_eq!((m.lm1_u20_plus, m.lm1_u20_minus), (0.0, 0.0));
    assert_eq!((m.big_l1_u10_plus, m.big_l1_u10_minus), (0.4, 0.5));
    assert!(m.u1q_vanish && m.u0q_near_vanish);
}

#[test]
fn matching_is_bilinear() {
    let a = match_low_order([0.4, 0.5], [0.1, 0.2]);
    let b = match_low_order([0.8, 0.5], [0.1, 0.6]);
    assert_eq!(b.lm1_u20_plus, 2.0 * a.lm1_u20_plus);
    assert!((b.lm1_u20_minus - 3.0 * a.lm1_u20_minus).abs() < 1e-15);
    assert_eq!(a.big_l1_u10_plus, a.l1_u00_plus);
    assert_eq!(a.lm1_u20_plus, a.l1_u00_plus * a.lm1_s1_plus);
}

#[test]
fn empty_hole_composite_is_limit_field() {
    let c = build(PeriodicityCell::empty());
    let delta = 0.125;
    for level in Level::ALL {
        for x in [[0.3, 0.5], [-0.7, -0.4], [1.2, 0.2], [0.1, 0.05], [-0.5, -0.02]] {
            let side = side_of(x);
            let u = c.u00.value(x, side).unwrap();
            let v = evaluate_composite(&c, level, delta, x).unwrap();
            let plateau = x[1].abs() >= 2.0 * delta;
            let tol = if plateau { 1e-14 } else { 2e-3 };
            assert!((u - v).abs() <= tol * (1.0 + u.abs()), "{:?} {:?}: {} vs {}", level, x, u, v);
        }
    }
}

#[test]
fn plateau_ignores_band_profile() {
    let mut c = build(PeriodicityCell::centered_disk(0.25));
    let delta = 0.0625;
    let xs = [[0.2, 3.0 * delta], [-0.4, -3.5 * delta], [0.6, 0.3]];
    let before: Vec<f64> = xs.iter().map(|&x| evaluate_composite(&c, Level::One, delta, x).unwrap()).collect();
    for (v, p) in c.w1n.values.iter_mut().zip(&c.w1n.mesh.vertices) {
        if p[1].abs() < 2.5 {
            *v += 1.0;
        }
    }
    for (x, b) in xs.iter().zip(&before) {
        assert_eq!(evaluate_composite(&c, Level::One, delta, *x).unwrap(), *b);
    }
    let near = [0.2, 0.5 * delta];
    let _ = evaluate_composite(&c, Level::One, delta, near).unwrap();
}

#[test]
fn band_profile_is_periodic() {
    let c = build(PeriodicityCell::centered_disk(0.25));
    for x in [[0.1, 0.6], [0.37, -0.9], [0.9, 1.5]] {
        let a = c.w1n.value(x);
        let b = c.w1n.value([x[0] + 3.0, x[1]]);
        assert!((a - b).abs() < 1e-12, "{} {}", a, b);
    }
    assert_eq!(c.w1n.value([0.5, 3.5]), 0.0);
}

#[test]
fn self_difference_has_zero_error() {
    let c = build(PeriodicityCell::centered_disk(0.25));
    let delta = 0.25;
    let mesh = Arc::new(mesh_perforated(&domain(), &PeriodicityCell::centered_disk(0.25), delta, 1.0 / 16.0).unwrap());
    let values = composite_nodal(&c, Level::FourThirds, delta, &mesh).unwrap();
    let direct = DirectSolution {
        delta,
        field: Field { mesh, values },
        energy_gap: 0.0,
    };
    let e = approximation_error(&direct, &c, Level::FourThirds, 0.15).unwrap();
    assert_eq!(e.h1, 0.0);
    assert!(approximation_error(&direct, &c, Level::One, 0.5).is_err());
}

#[test]
fn composite_is_linear_in_u20() {
    let mut c = build(PeriodicityCell::centered_disk(0.25));
    let delta = 0.125;
    let x = [0.4, 0.3];
    let base = evaluate_composite(&c, Level::One, delta, x).unwrap();
    let full = evaluate_composite(&c, Level::FourThirds, delta, x).unwrap();
    let u20 = c.u20.value(x, Side::Top).unwrap();
    assert!((full - base - delta.powf(4.0 / 3.0) * u20).abs() < 1e-14);
    for l in c.u20.lifts.iter_mut() {
        l.coefficient *= 2.0;
    }
    c.u20.field.values.iter_mut().for_each(|v| *v *= 2.0);
    let doubled = evaluate_composite(&c, Level::FourThirds, delta, x).unwrap();
    assert!((doubled - base - 2.0 * (full - base)).abs() < 1e-14);
}

#[test]
fn forms_differ_at_second_order_inside_the_strip() {
    let add = build(PeriodicityCell::centered_disk(0.25));
    let mut blend = add.clone();
    blend.form = CompositeForm::Blended;
    let gap = |delta: f64, big_x2: f64| {
        let x = [0.5, big_x2 * delta];
        evaluate_composite(&add, Level::One, delta, x).unwrap() - evaluate_composite(&blend, Level::One, delta, x).unwrap()
    };
    assert_eq!(gap(0.125, 2.5), 0.0);
    assert_eq!(gap(0.0625, -3.0), 0.0);
    for (pair, big_x2) in [(0.25, 0.5), (0.125, 0.25)].iter().zip([1.5, 1.5]) {
        let ratio = gap(pair.0, big_x2) / gap(pair.1, big_x2);
        assert!(ratio > 0.05 && ratio < 0.3, "{:?} {}", pair, ratio);
    }
    for big_x2 in [1.5, -1.5] {
        let shrink = (gap(0.0625, big_x2) / gap(0.5, big_x2)).abs();
        assert!(shrink < 0.15, "{} {}", big_x2, shrink);
    }
}

#[test]
fn forms_agree_for_the_limit_level() {
    let add = build(PeriodicityCell::centered_disk(0.25));
    let mut blend = add.clone();
    blend.form = CompositeForm::Blended;
    for x in [[0.3, 0.01], [-0.6, -0.2], [1.1, 0.0]] {
        let a = evaluate_composite(&add, Level::TwoThirds, 0.125, x).unwrap();
        let b = evaluate_composite(&blend, Level::TwoThirds, 0.125, x).unwrap();
        assert_eq!(a, b);
    }
}
