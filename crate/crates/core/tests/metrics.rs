use std::sync::Arc;

use lmalab::field::ScalarField;
use lmalab::geometry::{build_domain, DomainSpec, Point};
use lmalab::grid::{discretize, Grid};
use lmalab::metrics::{boundary_holder_fit, holder_fit, section, PairPolicy};

fn disk(h: f64) -> Arc<Grid> {
    let d = build_domain(&DomainSpec::Disk { radius: 1.0 }).unwrap();
    Arc::new(discretize(&d, h).unwrap())
}

fn phi(p: Point) -> f64 {
    0.5 * (p[0] * p[0] + 2.0 * p[1] * p[1]) + 0.1 * p[0].powi(4) + 0.3 * p[0] * p[1]
}

fn grad_phi(p: Point) -> Point {
    [p[0] + 0.4 * p[0].powi(3) + 0.3 * p[1], 2.0 * p[1] + 0.3 * p[0]]
}

fn rot(p: Point) -> Point {
    [-p[1], p[0]]
}

fn rot_inv(p: Point) -> Point {
    [p[1], -p[0]]
}

#[test]
fn sections_grow_with_height() {
    let g = disk(1.0 / 32.0);
    let u = ScalarField::from_fn(g.clone(), phi);
    let x = g.nearest_unknown([0.2, -0.1]);
    let grad = grad_phi(g.position(x));
    let mut prev: Vec<usize> = Vec::new();
    for t in [0.005, 0.01, 0.02, 0.05, 0.1] {
        let s = section(&u, grad, x, t).unwrap();
        assert!(s.discretely_convex, "height {t}");
        assert!(prev.iter().all(|n| s.nodes.binary_search(n).is_ok()), "height {t}");
        assert!(s.nodes.len() > prev.len());
        prev = s.nodes;
    }
}

#[test]
fn section_rejects_bad_input() {
    let g = disk(1.0 / 16.0);
    let u = ScalarField::from_fn(g.clone(), phi);
    assert!(section(&u, [0.0, 0.0], 0, 0.0).is_err());
    let t = g.trace_nodes().start;
    assert!(section(&u, [0.0, 0.0], t, 0.1).is_err());
}

#[test]
fn rotation_preserves_sections_and_fits() {
    // a quarter turn maps the centred lattice on the disk to itself
    let g = disk(1.0 / 32.0);
    let u = ScalarField::from_fn(g.clone(), phi);
    let v = ScalarField::from_fn(g.clone(), |p| phi(rot_inv(p)));
    let x = g.nearest_unknown([0.25, 0.1]);
    let rx = g.nearest_unknown(rot(g.position(x)));
    let su = section(&u, grad_phi(g.position(x)), x, 0.03).unwrap();
    let sv = section(&v, rot(grad_phi(g.position(x))), rx, 0.03).unwrap();
    assert_eq!(su.nodes.len(), sv.nodes.len());
    for &n in &su.nodes {
        let m = g.nearest_unknown(rot(g.position(n)));
        assert!(sv.nodes.binary_search(&m).is_ok());
    }

    let all: Vec<usize> = (0..g.unknown_count()).collect();
    let c = g.nearest_unknown([0.0, 0.0]);
    let anchored = |f: &ScalarField| PairPolicy::Anchored { anchor: g.position(c), value: f.values()[c] };
    let a = holder_fit(&u, &all, anchored(&u), "domain").unwrap();
    let b = holder_fit(&v, &all, anchored(&v), "domain").unwrap();
    assert!((a.beta - b.beta).abs() < 1e-12, "{} {}", a.beta, b.beta);
    assert!((a.constant / b.constant - 1.0).abs() < 1e-9);
}

#[test]
fn value_scaling_moves_only_the_constant() {
    let g = disk(1.0 / 32.0);
    let u = ScalarField::from_fn(g.clone(), |p| (p[0] - 0.1).abs().sqrt() + p[1]);
    let w = ScalarField::from_fn(g.clone(), |p| 3.0 * ((p[0] - 0.1).abs().sqrt() + p[1]) - 7.0);
    let all: Vec<usize> = (0..g.unknown_count()).collect();
    let policy = PairPolicy::Uniform { pairs: 5000, seed: 4 };
    let a = holder_fit(&u, &all, policy, "domain").unwrap();
    let b = holder_fit(&w, &all, policy, "domain").unwrap();
    assert!((a.beta - b.beta).abs() < 1e-9);
    assert!((b.constant / a.constant - 3.0).abs() < 1e-8);
}

#[test]
fn boundary_constant_field_is_flagged() {
    let g = disk(1.0 / 32.0);
    let u = ScalarField::from_fn(g.clone(), |_| 2.5);
    let x0 = g.trace_nodes().start;
    let est = boundary_holder_fit(&u, x0, 0.3).unwrap();
    assert!(est.constant_field);
    assert_eq!(est.beta, 1.0);
    assert_eq!(est.constant, 0.0);
    assert!(boundary_holder_fit(&u, 0, 0.3).is_err());
}

#[test]
fn lipschitz_field_has_exponent_near_one() {
    let g = disk(1.0 / 32.0);
    let u = ScalarField::from_fn(g.clone(), |p| 0.8 * p[0] - 0.6 * p[1]);
    let all: Vec<usize> = (0..g.unknown_count()).collect();
    let est = holder_fit(&u, &all, PairPolicy::default(), "domain").unwrap();
    assert!(est.beta > 0.95, "{}", est.beta);
    assert!((est.constant - 1.0).abs() < 0.1, "{}", est.constant);
}
