use std::sync::Arc;

use lmalab::abreu::{apriori_check, manufactured, manufactured_problem, run_abreu, AbreuOptions, AbreuProblem};
use lmalab::field::ScalarField;
use lmalab::geometry::{build_domain, DomainSpec};
use lmalab::grid::{discretize, Grid};

fn disk(h: f64) -> Arc<Grid> {
    let d = build_domain(&DomainSpec::Disk { radius: 1.0 }).unwrap();
    Arc::new(discretize(&d, h).unwrap())
}

#[test]
fn manufactured_run_contracts_and_keeps_traces() {
    let g = disk(1.0 / 16.0);
    let problem = manufactured_problem(g.clone()).unwrap();
    let run = run_abreu(&problem, &AbreuOptions::default()).unwrap();
    assert!(run.converged, "{:?}", run.rejected);
    let inc: Vec<f64> = run.log.iter().map(|r| r.increment).collect();
    for w in inc.windows(2).skip(1) {
        assert!(w[1] <= w[0] * 1.05, "{inc:?}");
    }
    let floor = 0.5 * problem.psi_min();
    for row in &run.log {
        assert!(row.min_w >= floor - 1e-15);
    }
    let s = &run.state;
    for (a, b) in s.u.trace().iter().zip(&problem.varphi) {
        assert!((a - b).abs() <= 1e-12);
    }
    for (a, b) in s.w.trace().iter().zip(&problem.psi) {
        assert!((a - b).abs() <= 1e-12);
    }
    let ustar = ScalarField::from_fn(g.clone(), manufactured::u_star);
    assert!(s.u.max_diff_interior(&ustar) < 5e-3);
}

#[test]
fn manufactured_error_drops_under_refinement() {
    let mut errs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0] {
        let g = disk(h);
        let run = run_abreu(&manufactured_problem(g.clone()).unwrap(), &AbreuOptions::default()).unwrap();
        assert!(run.converged);
        let wstar = ScalarField::from_fn(g.clone(), manufactured::w_star);
        errs.push(run.state.w.max_diff_interior(&wstar));
    }
    assert!(errs[1] < errs[0] / 2.0, "{errs:?}");
}

#[test]
fn w_stays_above_boundary_infimum() {
    let g = disk(1.0 / 16.0);
    let psi: Vec<f64> = g
        .trace_nodes()
        .map(|t| {
            let p = g.position(t);
            0.75 + 0.25 * (3.0 * p[0]).cos() * p[1]
        })
        .collect();
    let varphi: Vec<f64> = g
        .trace_nodes()
        .map(|t| {
            let p = g.position(t);
            0.5 * (p[0] * p[0] + p[1] * p[1])
        })
        .collect();
    let problem = AbreuProblem::new(g.clone(), psi, varphi).unwrap();
    assert!((problem.psi_min() - 0.5).abs() < 0.05);
    let run = run_abreu(&problem, &AbreuOptions { max_iter: 400, ..Default::default() }).unwrap();
    assert!(run.converged, "{:?}", run.rejected);
    let report = apriori_check(&run.state, &problem, 1e-6);
    assert!(report.min_w >= problem.psi_min() - 1e-6, "{report:?}");
    assert!(report.lower_ok && report.upper_ok, "{report:?}");
    assert!(report.fixed_point_defect < 1e-6, "{report:?}");
}
