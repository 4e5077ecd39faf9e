use std::sync::Arc;

use lmalab::catalog::ScalarExpr;
use lmalab::field::ScalarField;
use lmalab::geometry::{build_domain, DomainSpec, Point};
use lmalab::grid::{discretize, Grid};
use lmalab::ma::{hessian, ma_values, solve_ma, w21e_norm, MaOptions, PinchingBounds};

fn square(h: f64) -> Arc<Grid> {
    let d = build_domain(&DomainSpec::SmoothedPolygon {
        vertices: vec![[-0.6, -0.6], [0.6, -0.6], [0.6, 0.6], [-0.6, 0.6]],
        corner_radius: 0.25,
    })
    .unwrap();
    Arc::new(discretize(&d, h).unwrap())
}

fn exact(p: Point) -> f64 {
    (0.5 * p[0] * p[0]).exp() + (0.5 * p[1] * p[1]).exp()
}

fn density(p: Point) -> f64 {
    let a = |t: f64| (0.5 * t * t).exp() * (1.0 + t * t);
    a(p[0]) * a(p[1])
}

fn solve(g: &Arc<Grid>) -> ScalarField {
    let f: Vec<f64> = (0..g.unknown_count()).map(|u| density(g.position(u))).collect();
    let bd: Vec<f64> = g.trace_nodes().map(|t| exact(g.position(t))).collect();
    let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.iter().cloned().fold(0.0, f64::max);
    solve_ma(g, &f, &bd, &PinchingBounds::new(lo, hi).unwrap(), &MaOptions::default())
        .unwrap()
        .phi
}

#[test]
fn manufactured_solution_converges_on_smoothed_square() {
    let mut errs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let g = square(h);
        let phi = solve(&g);
        let e = ScalarField::from_fn(g.clone(), exact);
        errs.push(phi.max_diff_interior(&e));
    }
    // second order once the boundary layer is resolved
    assert!(errs[0] / errs[1] > 2.5 && errs[1] / errs[2] > 3.4, "{errs:?}");
}

#[test]
fn converged_solution_satisfies_its_density() {
    let g = square(1.0 / 32.0);
    let phi = solve(&g);
    let mv = ma_values(&phi, MaOptions::default().delta);
    for (u, v) in mv.iter().enumerate() {
        assert!((v - density(g.position(u))).abs() < 1e-8);
    }
}

#[test]
fn hessian_norm_stable_under_refinement() {
    let e = ScalarExpr::ExpSeparable;
    let mut norms = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let g = square(h);
        let phi = ScalarField::from_fn(g.clone(), |p| e.eval(p));
        norms.push(w21e_norm(&hessian(&phi), 0.1));
    }
    assert!((norms[1] / norms[0] - 1.0).abs() < 0.05, "{norms:?}");
}

#[test]
fn pinching_is_checked_before_solving() {
    let g = square(1.0 / 16.0);
    let f = vec![3.0; g.unknown_count()];
    let bd = vec![0.0; g.node_count() - g.unknown_count()];
    let err = solve_ma(&g, &f, &bd, &PinchingBounds::new(1.0, 2.0).unwrap(), &MaOptions::default()).unwrap_err();
    assert!(matches!(err, lmalab::Error::PinchingViolated { .. }));
}
