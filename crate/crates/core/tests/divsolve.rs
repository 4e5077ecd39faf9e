use std::sync::Arc;

use lmalab::catalog::VectorExpr;
use lmalab::divsolve::{abp_bound_check, green_representation_at, kappa2_from_kappa, solve_dirichlet_div, DEFAULT_KAPPA};
use lmalab::field::{ScalarField, Sym2, SymmetricMatrixField, VectorField};
use lmalab::geometry::{build_domain, DomainSpec};
use lmalab::green::{GreenOptions, GreenSolver, LinearSolver};
use lmalab::grid::{discretize, Grid};
use lmalab::linop::{assemble, DivergenceFormOperator};
use lmalab::metrics::{boundary_floor, boundary_holder_fit};

fn disk(h: f64) -> Arc<Grid> {
    let d = build_domain(&DomainSpec::Disk { radius: 1.0 }).unwrap();
    Arc::new(discretize(&d, h).unwrap())
}

fn anisotropic(g: Arc<Grid>) -> DivergenceFormOperator {
    // cofactor of the Hessian of |x|^2/2 + x1^4/12 + x2^4/12, divergence free
    let m = SymmetricMatrixField::from_fn(g, |p| Sym2::new(1.0 + p[1] * p[1], 0.0, 1.0 + p[0] * p[0]));
    assemble(&m).unwrap()
}

fn zero_trace(g: &Grid) -> Vec<f64> {
    vec![0.0; g.node_count() - g.unknown_count()]
}

#[test]
fn radial_field_matches_closed_form() {
    // div(x) = 2; with Phi = I the solution is (|x|^2 - 1) / 2
    let mut errs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let g = disk(h);
        let op = assemble(&SymmetricMatrixField::constant(g.clone(), Sym2::IDENTITY)).unwrap();
        let f = VectorField::from_fn(g.clone(), |p| VectorExpr::Radial { s: 1.0 }.eval(p));
        let sol = solve_dirichlet_div(&op, &f, &zero_trace(&g), 1e-12).unwrap();
        let exact = ScalarField::from_fn(g.clone(), |p| 0.5 * (p[0] * p[0] + p[1] * p[1] - 1.0));
        errs.push(sol.u.max_diff_interior(&exact));
    }
    assert!(errs[2] < 5e-3, "{errs:?}");
    assert!(errs[2] < errs[1], "{errs:?}");
}

#[test]
fn representation_of_radial_field_agrees_with_solve() {
    let g = disk(1.0 / 32.0);
    let op = anisotropic(g.clone());
    let f = VectorField::from_fn(g.clone(), |p| VectorExpr::Radial { s: 0.7 }.eval(p));
    let sol = solve_dirichlet_div(&op, &f, &zero_trace(&g), 1e-13).unwrap();
    let solver = GreenSolver::new(&op, GreenOptions { solver: LinearSolver::Cholesky, ..Default::default() }).unwrap();
    let nodes: Vec<usize> = (0..g.unknown_count()).step_by(37).collect();
    let v = green_representation_at(&solver, &f, &nodes).unwrap();
    let scale = sol.u.interior().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for (&n, vn) in nodes.iter().zip(&v) {
        let d = (sol.u.values()[n] - vn).abs();
        assert!(d <= 1e-8 * scale.max(1.0), "node {n}: {d}");
    }
}

#[test]
fn abp_constant_stays_bounded_under_refinement() {
    let k2 = kappa2_from_kappa(DEFAULT_KAPPA);
    let fields = [
        VectorExpr::Radial { s: 1.0 },
        VectorExpr::Rotational { s: 1.0 },
        VectorExpr::RandomBounded { seed: 3, cell: 0.25 },
    ];
    for fe in fields {
        let mut cs = Vec::new();
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let g = disk(h);
            let op = anisotropic(g.clone());
            let f = VectorField::from_fn(g.clone(), |p| fe.eval(p));
            let sol = solve_dirichlet_div(&op, &f, &zero_trace(&g), 1e-11).unwrap();
            cs.push(abp_bound_check(&sol.u, &f, k2).constant);
        }
        assert!(cs.iter().all(|c| c.is_finite() && *c < 10.0), "{}: {cs:?}", fe.id());
        if cs[0] > 0.0 {
            assert!((cs[1] / cs[0] - 1.0).abs() < 0.25, "{}: {cs:?}", fe.id());
        }
    }
}

#[test]
fn lipschitz_boundary_data_gives_holder_trace() {
    let g = disk(1.0 / 64.0);
    let op = anisotropic(g.clone());
    let f = VectorField::from_fn(g.clone(), |_| [0.0, 0.0]);
    let bd: Vec<f64> = g.trace_nodes().map(|t| g.position(t)[0].abs()).collect();
    let sol = solve_dirichlet_div(&op, &f, &bd, 1e-12).unwrap();
    let floor = boundary_floor(1.0, kappa2_from_kappa(DEFAULT_KAPPA));
    for target in [[0.0, 1.0], [1.0, 0.0], [-0.6, -0.8]] {
        let x0 = g
            .trace_nodes()
            .min_by(|&a, &b| {
                let d = |n: usize| {
                    let p = g.position(n);
                    (p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2)
                };
                d(a).partial_cmp(&d(b)).unwrap()
            })
            .unwrap();
        let est = boundary_holder_fit(&sol.u, x0, 0.25).unwrap();
        assert!(est.beta >= 0.3, "{target:?}: beta {}", est.beta);
        assert!(est.beta >= floor);
    }
}
