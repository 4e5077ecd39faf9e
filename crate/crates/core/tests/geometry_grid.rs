use std::f64::consts::PI;

use lmalab::geometry::{build_domain, check_quadratic_separation_fn, check_uniform_interior_ball, DomainSpec};
use lmalab::grid::{discretize, NodeKind};

fn shapes() -> Vec<DomainSpec> {
    vec![
        DomainSpec::Disk { radius: 1.0 },
        DomainSpec::Ellipse { a: 1.0, b: 0.5 },
        DomainSpec::SmoothedPolygon {
            vertices: vec![[-0.6, -0.6], [0.6, -0.6], [0.6, 0.6], [-0.6, 0.6]],
            corner_radius: 0.2,
        },
        DomainSpec::SmoothedPolygon {
            vertices: vec![[0.0, 0.9], [-0.75, -0.45], [0.75, -0.45]],
            corner_radius: 0.15,
        },
    ]
}

#[test]
fn mask_is_consistent_on_every_shape() {
    for spec in shapes() {
        let d = build_domain(&spec).unwrap();
        let h = (d.rho() / 4.0).min(1.0 / 32.0);
        let g = discretize(&d, h).unwrap();
        for u in 0..g.unknown_count() {
            assert!(d.contains(g.position(u)));
            match g.kind(u) {
                NodeKind::Interior => {
                    for k in 0..2 {
                        for s in 0..2 {
                            let l = g.link(u, k, s);
                            assert!(g.is_unknown(l.node) && (l.dist - h).abs() < 1e-12);
                        }
                    }
                }
                NodeKind::BoundaryAdjacent => {
                    let p = g.projection(u).expect("boundary-adjacent nodes carry a projection");
                    assert!(p.distance >= 0.0 && p.distance <= h * 2f64.sqrt() + 1e-12);
                    assert!(d.level(p.point).abs() < 1e-9);
                }
                NodeKind::BoundaryTrace => panic!("unknown {u} labelled as trace"),
            }
        }
        for t in g.trace_nodes() {
            assert_eq!(g.kind(t), NodeKind::BoundaryTrace);
            assert!(d.level(g.position(t)).abs() <= 0.05 * h + 1e-12);
        }
    }
}

#[test]
fn node_count_converges_to_area() {
    let d = build_domain(&DomainSpec::Ellipse { a: 1.0, b: 0.5 }).unwrap();
    let area = PI * 0.5;
    let mut errs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let g = discretize(&d, h).unwrap();
        errs.push((g.unknown_count() as f64 * h * h - area).abs() / area);
    }
    // error bounded by a multiple of h and shrinking overall
    for (e, h) in errs.iter().zip([16.0, 32.0, 64.0, 128.0]) {
        assert!(*e < 4.0 / h, "{errs:?}");
    }
    assert!(errs[3] < errs[0]);
}

#[test]
fn separation_of_half_norm_on_all_shapes() {
    for spec in shapes() {
        let d = build_domain(&spec).unwrap();
        let c = check_quadratic_separation_fn(&d, 128, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]), |p| p, 0.4);
        assert!(c.holds, "{spec:?}: {c:?}");
    }
}

#[test]
fn computed_rho_passes_its_own_ball_check() {
    for spec in shapes() {
        let d = build_domain(&spec).unwrap();
        assert!(check_uniform_interior_ball(&d, d.rho() * 0.99).holds, "{spec:?}");
        assert!(d.rho() <= 1.0 / d.circumradius() + 1e-12);
    }
}

#[test]
fn dump_round_trip() {
    let d = build_domain(&DomainSpec::Disk { radius: 1.0 }).unwrap();
    let g = discretize(&d, 1.0 / 16.0).unwrap();
    let values: Vec<f64> = (0..g.node_count()).map(|i| (i as f64).sin()).collect();
    let mut buf = Vec::new();
    g.write_dump(&values, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# h=0.0625 domain=disk"));
    assert_eq!(text.lines().count(), g.node_count() + 1);
    let back = g.read_dump(&text).unwrap();
    for (a, b) in values.iter().zip(&back) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
