use std::f64::consts::SQRT_2;
use std::sync::Arc;

use pharmonic::field::{make_grid, Exponent, Extent, Field, Grid2D, PlanarMap, Shape};
use pharmonic::radial::{counterexample_map, scalar_radial};
use pharmonic::solver::{solve_dirichlet, SolveOptions, SolveReport};
use pharmonic::verify::{
    check_complex_bounds, check_hessian_sign, check_isoperimetric, check_kphi_integrability, check_length_bound,
    check_max_principle, CheckOptions, IsoOptions, Subject, Verdict,
};
use pharmonic::Error;

fn square(lo: f64, hi: f64, n: usize) -> Arc<Grid2D> {
    make_grid(Extent::square(lo, hi), Shape::Rectangle, n, n).unwrap()
}

fn annulus(n: usize) -> Arc<Grid2D> {
    let shape = Shape::Annulus { center: [0.0, 0.0], r_inner: 1.0, r_outer: 2.0 };
    make_grid(Extent::square(-2.0, 2.0), shape, n, n).unwrap()
}

fn solve(boundary: &PlanarMap) -> (PlanarMap, SolveReport) {
    let (u, r) = solve_dirichlet(boundary, &SolveOptions::default()).unwrap();
    assert!(r.converged, "{r:?}");
    (u, r)
}

fn generic(p: f64) -> (PlanarMap, SolveReport) {
    let g = square(0.0, 1.0, 33);
    solve(&PlanarMap::from_fn(&g, Exponent::new(p).unwrap(), |x, y| {
        (x + 0.3 * (x * x - y * y), y + 0.6 * x * y - 0.2 * x * x)
    }))
}

fn opts() -> CheckOptions {
    CheckOptions::default()
}

#[test]
fn hessian_sign_holds_in_range() {
    for p in [4.0 / 3.0, 1.6, 2.0, 2.5, 2.0 + SQRT_2] {
        let (u, r) = generic(p);
        let c = check_hessian_sign(Subject::solved(&u, &r), &opts()).unwrap();
        assert_eq!(c.verdict, Verdict::Holds, "p = {p}: {c:#?}");
        assert!(c.details["bound_margin"] >= -c.details["bound_tolerance"]);
    }
}

#[test]
fn hessian_sign_trivial_cases() {
    let g = square(-1.0, 1.0, 17);
    let id = PlanarMap::from_fn(&g, Exponent::new(3.0).unwrap(), |x, y| (x, y));
    assert_eq!(check_hessian_sign(Subject::constructed(&id), &opts()).unwrap().verdict, Verdict::Holds);
    let harmonic = PlanarMap::from_fn(&g, Exponent::new(2.0).unwrap(), |x, y| (x * x - y * y, 2.0 * x * y));
    let c = check_hessian_sign(Subject::constructed(&harmonic), &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
}

#[test]
fn counterexample_violates_the_sign_but_not_the_bound() {
    let ce = counterexample_map(12.0, 1.01, 101, 1.0).unwrap();
    let c = check_hessian_sign(Subject::constructed(&ce.map), &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Violated);
    let w = c.witness.as_ref().unwrap();
    assert!(w.margin < 0.0 && w.values["det_hessian_u1"] > 0.0 && w.values["det_hessian_u2"] > 0.0);
    assert!(c.details["in_sign_range"] == 0.0);
    assert!(c.details["bound_margin"] >= -c.details["bound_tolerance"], "{c:#?}");
}

#[test]
fn determinant_bound_catches_non_harmonic_maps() {
    let g = square(-1.0, 1.0, 17);
    let u = PlanarMap::from_fn(&g, Exponent::new(2.0).unwrap(), |x, y| (x * x + y * y, x * x + y * y));
    let c = check_hessian_sign(Subject::constructed(&u), &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Violated);
}

#[test]
fn max_principle() {
    for p in [1.6, 3.0] {
        let (u, r) = generic(p);
        let c = check_max_principle(Subject::solved(&u, &r), &opts()).unwrap();
        assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
        assert!(c.witness.unwrap().margin >= -10.0 * 1e-8);
    }
    let g = square(-1.0, 1.0, 17);
    let id = PlanarMap::from_fn(&g, Exponent::new(3.0).unwrap(), |x, y| (x, y));
    let c = check_max_principle(Subject::constructed(&id), &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds);
    let bump = PlanarMap::from_fn(&g, Exponent::new(3.0).unwrap(), |x, y| (1.0 - x * x - y * y, y));
    let c = check_max_principle(Subject::constructed(&bump), &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Violated);
    assert!(c.witness.unwrap().location.unwrap()[0].abs() < 1e-12);
}

#[test]
fn unconverged_input_is_rejected() {
    let g = square(0.0, 1.0, 17);
    let b = PlanarMap::from_fn(&g, Exponent::new(3.0).unwrap(), |x, y| (x * x, y));
    let o = SolveOptions { max_iters: 1, ..SolveOptions::default() };
    let (u, r) = solve_dirichlet(&b, &o).unwrap();
    assert!(!r.converged);
    assert!(matches!(check_max_principle(Subject::solved(&u, &r), &opts()), Err(Error::NotConverged)));
}

#[test]
fn complex_bounds() {
    let (u, r) = generic(3.0);
    let c = check_complex_bounds(Subject::solved(&u, &r), &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
    let g = square(-1.0, 1.0, 17);
    let bad = PlanarMap::from_fn(&g, Exponent::new(2.0).unwrap(), |x, y| (x * x + y * y, 0.0));
    assert_eq!(check_complex_bounds(Subject::constructed(&bad), &opts()).unwrap().verdict, Verdict::Violated);
}

#[test]
fn curvature_integrability() {
    let a = annulus(65);
    let v = scalar_radial(3.0, 1.0, 0.0).unwrap().field(&a).unwrap();
    let scalar = PlanarMap::new(v, Field::from_fn(&a, |_, _| 0.0), Exponent::new(3.0).unwrap()).unwrap();
    let c = check_kphi_integrability(Subject::constructed(&scalar), [1.5, 0.0], 0.4, &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
    assert!(c.details["lhs"] > 0.1);

    let g = square(0.0, 2.0, 65);
    let affine = PlanarMap::from_fn(&g, Exponent::new(3.0).unwrap(), |x, y| (x + y, x - 2.0 * y));
    let c = check_kphi_integrability(Subject::constructed(&affine), [1.0, 1.0], 0.5, &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds);
    assert!(c.details["lhs"].abs() < 1e-10);

    let harmonic = PlanarMap::from_fn(&g, Exponent::new(2.0).unwrap(), |x, y| (x * x - y * y, 2.0 * x * y));
    let c = check_kphi_integrability(Subject::constructed(&harmonic), [1.0, 1.0], 0.5, &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
    assert_eq!(c.details["lemma_constant"], 1.0);

    let g = square(-1.0, 1.0, 65);
    let harmonic = PlanarMap::from_fn(&g, Exponent::new(2.0).unwrap(), |x, y| (x * x - y * y, 2.0 * x * y));
    let c = check_kphi_integrability(Subject::constructed(&harmonic), [0.0, 0.0], 0.5, &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Inconclusive);
}

fn radial_levels(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn log_length_is_linear_for_harmonic_radial_data() {
    let a = annulus(129);
    let u0 = PlanarMap::from_fn(&a, Exponent::new(2.0).unwrap(), |x, y| (x.hypot(y).ln(), 0.0));
    let (u, r) = solve(&u0);
    let iso = IsoOptions { levels: radial_levels(0.15, 0.55, 9), fd_step: 0.02, ..IsoOptions::default() };
    let c = check_isoperimetric(Subject::solved(&u, &r), &iso, &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
    assert!(c.details["max_abs_log_second_derivative"] <= 1e-3, "{c:#?}");
    assert_eq!(c.details["rejected_levels"], 0.0);
}

#[test]
fn equality_case_for_coinciding_radial_components() {
    let a = annulus(129);
    let prof = scalar_radial(3.0, 1.0, 0.0).unwrap();
    let u0 = PlanarMap::from_fn(&a, Exponent::new(3.0).unwrap(), |x, y| {
        let v = prof.value(x.hypot(y));
        (v, v)
    });
    let (u, r) = solve(&u0);
    let iso = IsoOptions {
        levels: radial_levels(1.06, 1.36, 7),
        fd_step: 0.01,
        equality_case: true,
        ratio_ball: Some(([1.5, 0.0], 0.2)),
        ..IsoOptions::default()
    };
    let c = check_isoperimetric(Subject::solved(&u, &r), &iso, &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
    assert!(c.details["max_equality_gap"] < 1e-2);
    assert!(c.details["uhlenbeck_ratio"].is_finite());
}

fn generic_annulus() -> (PlanarMap, SolveReport) {
    let a = annulus(65);
    let u0 = PlanarMap::from_fn(&a, Exponent::new(3.0).unwrap(), |x, y| {
        let r = x.hypot(y);
        (if r < 1.5 { 1.0 } else { 0.0 }, x + 0.5 * y + 0.3 * x * y)
    });
    solve(&u0)
}

#[test]
fn iso_inequality_for_generic_data() {
    let (u, r) = generic_annulus();
    let iso = IsoOptions { levels: radial_levels(0.15, 0.85, 8), fd_step: 0.02, ..IsoOptions::default() };
    let c = check_isoperimetric(Subject::solved(&u, &r), &iso, &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
    assert_eq!(c.details["rejected_levels"], 0.0, "{c:#?}");
    assert!(c.witness.unwrap().margin >= 0.0);
}

#[test]
fn iso_requires_constant_boundary_values() {
    let g = square(0.0, 1.0, 33);
    let u = PlanarMap::from_fn(&g, Exponent::new(3.0).unwrap(), |x, y| (x + y, x - y));
    let iso = IsoOptions { levels: vec![0.5], ..IsoOptions::default() };
    let c = check_isoperimetric(Subject::constructed(&u), &iso, &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Inconclusive);
}

#[test]
fn length_bound_on_solved_levels() {
    let (u, r) = generic_annulus();
    let c = check_length_bound(Subject::solved(&u, &r), [1.5, 0.0], 0.4, &radial_levels(0.2, 0.8, 7), &opts()).unwrap();
    assert_eq!(c.verdict, Verdict::Holds, "{c:#?}");
    assert!(c.witness.unwrap().margin >= 0.0);
}

#[test]
fn checks_are_deterministic() {
    let (u, r) = generic(2.5);
    let a = check_hessian_sign(Subject::solved(&u, &r), &opts()).unwrap();
    let b = check_hessian_sign(Subject::solved(&u, &r), &opts()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
