use std::sync::Arc;

use proptest::prelude::*;

use lmalab::catalog::{splitmix64, ScalarExpr};
use lmalab::field::{ScalarField, Sym2, SymmetricMatrixField};
use lmalab::geometry::{build_domain, DomainSpec};
use lmalab::grid::{discretize, Grid};
use lmalab::linop::{assemble, energy_lower_bound_check};

fn grid() -> Arc<Grid> {
    let d = build_domain(&DomainSpec::Disk { radius: 1.0 }).unwrap();
    Arc::new(discretize(&d, 0.125).unwrap())
}

fn sym() -> impl Strategy<Value = Sym2> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| Sym2::new(a, b, c))
}

fn spd() -> impl Strategy<Value = Sym2> {
    (0.1..4.0f64, 0.1..4.0f64, 0.0..std::f64::consts::PI).prop_map(|(l1, l2, t)| {
        let (c, s) = (t.cos(), t.sin());
        Sym2::new(l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c)
    })
}

proptest! {
    #[test]
    fn cofactor_identities(m in sym(), v in (-3.0..3.0f64, -3.0..3.0f64)) {
        let c = m.cofactor();
        prop_assert_eq!(c.cofactor(), m);
        prop_assert!((c.det() - m.det()).abs() <= 1e-12 * (1.0 + m.det().abs()));
        let w = m.apply(c.apply([v.0, v.1]));
        let tol = 1e-10 * (1.0 + m.frobenius().powi(2));
        prop_assert!((w[0] - m.det() * v.0).abs() <= tol * (1.0 + v.0.abs()));
        prop_assert!((w[1] - m.det() * v.1).abs() <= tol * (1.0 + v.1.abs()));
    }

    #[test]
    fn eigenvalues_match_invariants(m in sym()) {
        let (lo, hi) = m.eigenvalues();
        prop_assert!(lo <= hi);
        prop_assert!((lo + hi - m.trace()).abs() <= 1e-12 * (1.0 + m.frobenius()));
        prop_assert!((lo * hi - m.det()).abs() <= 1e-10 * (1.0 + m.frobenius().powi(2)));
    }

    #[test]
    fn psd_part_is_a_projection(m in sym(), v in (-3.0..3.0f64, -3.0..3.0f64)) {
        let p = m.psd_part();
        let (lo, hi) = p.eigenvalues();
        prop_assert!(lo >= -1e-10 * (1.0 + hi.abs()));
        let q = p.psd_part();
        let d = Sym2::new(q.m11 - p.m11, q.m12 - p.m12, q.m22 - p.m22).frobenius();
        prop_assert!(d <= 1e-9 * (1.0 + p.frobenius()));
        prop_assert!(p.quad([v.0, v.1]) >= -1e-9 * (1.0 + p.frobenius()));
        if m.eigenvalues().0 >= 0.0 {
            prop_assert_eq!(p, m);
        }
    }

    #[test]
    fn energy_lower_bound_for_constant_spd(h in spd(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        prop_assume!(a.hypot(b) > 0.1);
        let g = grid();
        let hess = SymmetricMatrixField::constant(g.clone(), h);
        let cof = SymmetricMatrixField::constant(g.clone(), h.cofactor());
        let v = ScalarField::from_fn(g.clone(), |p| a * p[0] + b * p[1]);
        let ratio = energy_lower_bound_check(&cof, &hess, &v, 1e-12);
        prop_assert!(ratio >= 1.0 - 1e-10, "{}", ratio);
    }

    #[test]
    fn assembled_energy_is_nonnegative(h in spd(), seed in any::<u64>()) {
        let g = grid();
        let op = assemble(&SymmetricMatrixField::constant(g.clone(), h.cofactor())).unwrap();
        let n = g.unknown_count();
        let v: Vec<f64> = (0..n as u64).map(|i| (splitmix64(seed ^ i) >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect();
        prop_assert!(op.matrix().quadratic_form(&v) >= -1e-12);
        prop_assert!(op.matrix().is_symmetric());
    }

    #[test]
    fn checkerboard_is_deterministic_and_bounded(seed in any::<u64>(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let f = ScalarExpr::RandomCheckerboard { lambda: 1.0, upper: 3.0, seed, cell: 0.25 };
        let a = f.eval([x, y]);
        prop_assert_eq!(a, f.eval([x, y]));
        prop_assert!((1.0..=3.0).contains(&a));
        prop_assert_eq!(splitmix64(seed), splitmix64(seed));
    }
}
