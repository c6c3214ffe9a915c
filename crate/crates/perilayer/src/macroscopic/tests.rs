use super::*;
use crate::geometry::SourceSpec;

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

fn problem(h: f64) -> LimitProblem {
    LimitProblem::new(&domain(), h, CutoffProfile::QuinticSmoothstep).unwrap()
}

#[test]
fn lift_laplacian_matches_finite_differences() {
    let p = problem(1.0 / 8.0);
    let angular = cone_lift(Corner::Plus, -1.0 / 3.0, 0.7, -0.4).unwrap();
    let lift = p.lift(Corner::Plus, angular, 1.3);
    let e = 1e-4;
    for x in [[0.3, 0.4], [0.1, -0.6], [1.6, 0.5], [0.7, 0.3]] {
        let s = side_of(x);
        let f = |dx: f64, dy: f64| lift.value([x[0] + dx, x[1] + dy], s);
        let fd = (f(e, 0.0) + f(-e, 0.0) + f(0.0, e) + f(0.0, -e) - 4.0 * f(0.0, 0.0)) / (e * e);
        let exact = lift.laplacian(x, s);
        assert!((fd - exact).abs() < 1e-4 * (1.0 + exact.abs()), "{:?}: {} vs {}", x, fd, exact);
    }
}

#[test]
fn limit_field_is_continuous_and_symmetric() {
    let p = problem(1.0 / 16.0);
    let u = solve_limit(&p).unwrap();
    assert_eq!(p.max_nodal_jump(&u.field.values), 0.0);
    let radii = default_radii(1.0);
    let plus = extract_field_coeffs(&p, &u, Corner::Plus, &[1, 2], &radii).unwrap();
    let minus = extract_field_coeffs(&p, &u, Corner::Minus, &[1, 2], &radii).unwrap();
    assert!(plus.get(1) > 0.0);
    for q in [1, 2] {
        let mirrored = if q % 2 == 0 { -minus.get(q) } else { minus.get(q) };
        assert!((plus.get(q) - mirrored).abs() < 1e-9, "{:?} {:?}", plus, minus);
    }
}

#[test]
fn singular_function_has_unit_coefficient() {
    let p = problem(1.0 / 16.0);
    let s = solve_singularity(&p, Corner::Plus).unwrap();
    let radii = default_radii(1.0);
    let own = extract_field_coeffs(&p, &s, Corner::Plus, &[-1, 1, 2], &radii).unwrap();
    assert!((own.get(-1) - 1.0).abs() < 1e-2, "{:?}", own);
    let other = extract_field_coeffs(&p, &s, Corner::Minus, &[-1, 1], &radii).unwrap();
    assert!(other.get(-1).abs() < 1e-2, "{:?}", other);
    let r = p.max_nodal_jump(&s.nodal_total());
    assert!(r < 1e-12, "{}", r);
}

#[test]
fn zero_constants_give_zero_correction() {
    let p = problem(1.0 / 16.0);
    let u = solve_limit(&p).unwrap();
    let radii = default_radii(1.0);
    let coeffs: Vec<_> = Corner::BOTH
        .iter()
        .map(|&c| extract_field_coeffs(&p, &u, c, &[1, 2], &radii).unwrap())
        .collect();
    let k = TransmissionConstants::zero(2, CutoffProfile::QuinticSmoothstep);
    let c = solve_macro_correction(&p, &u, &coeffs, &k).unwrap();
    assert!(c.u01.field.values.iter().all(|v| *v == 0.0));
    assert!(c.u01.nodal_total().iter().all(|v| *v == 0.0));
}

#[test]
fn traces_reproduce_limit_field() {
    let p = problem(1.0 / 32.0);
    let u = solve_limit(&p).unwrap();
    let radii = default_radii(1.0);
    let coeffs: Vec<_> = Corner::BOTH
        .iter()
        .map(|&c| extract_field_coeffs(&p, &u, c, &[1, 2], &radii).unwrap())
        .collect();
    let t = gamma_traces(&p, &u, &coeffs).unwrap();
    let scale = u.field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for x1 in [-0.8, -0.3, 0.0, 0.45, 0.9] {
        let direct = u.trace_mean(x1).unwrap();
        assert!((t.mean(x1) - direct).abs() < 2e-3 * scale, "{}: {} vs {}", x1, t.mean(x1), direct);
    }
}

#[test]
fn correction_carries_prescribed_jump() {
    let p = problem(1.0 / 32.0);
    let u = solve_limit(&p).unwrap();
    let radii = default_radii(1.0);
    let coeffs: Vec<_> = Corner::BOTH
        .iter()
        .map(|&c| extract_field_coeffs(&p, &u, c, &[1, 2], &radii).unwrap())
        .collect();
    let mut k = TransmissionConstants::zero(2, CutoffProfile::QuinticSmoothstep);
    k.d_n[1] = 0.5;
    k.n_t[2] = 0.2;
    let c = solve_macro_correction(&p, &u, &coeffs, &k).unwrap();
    for x1 in [-0.6, -0.2, 0.3, 0.7] {
        let want = 0.5 * c.traces.normal(x1);
        let got = c.u01.trace_jump(x1).unwrap();
        assert!((got - want).abs() < 1e-3 * (1.0 + want.abs()), "{}: {} vs {}", x1, got, want);
    }
    for (corner, n, a, b) in &c.amplitudes {
        let lift = cone_lift(*corner, lambda(*n) - 1.0, *a, *b).unwrap();
        assert!(lift.residuals().iter().all(|r| r.abs() < 1e-12));
    }
}

#[test]
fn combination_scales_lifts() {
    let p = problem(1.0 / 8.0);
    let sp = solve_singularity(&p, Corner::Plus).unwrap();
    let sm = solve_singularity(&p, Corner::Minus).unwrap();
    let u20 = build_u20(&sp, &sm, 2.0, -1.0).unwrap();
    let x = [0.5, 0.3];
    let want = 2.0 * sp.value(x, Side::Top).unwrap() - sm.value(x, Side::Top).unwrap();
    assert!((u20.value(x, Side::Top).unwrap() - want).abs() < 1e-12);
    assert_eq!(u20.label, MacroLabel::U20);
}

