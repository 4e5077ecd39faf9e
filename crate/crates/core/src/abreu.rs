//! Damped fixed-point iteration for the second boundary value problem
//! `U^{ij} w_ij = -div(|Du|^2 Du)`, `w = (det D^2 u)^{-1}`, with `u` and `w`
//! prescribed on the boundary.
//!
//! Each step solves the linear w-equation with the cofactor of the current
//! Hessian, clamps `w` from below, solves `det D^2 u+ = 1/w` and blends
//! `u <- (1 - theta) u + theta u+`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::linop::{assemble, cofactor};
use crate::ma::{hessian, ma_values, solve_ma, solve_ma_from, solve_poisson, MaOptions, PinchingBounds};
use crate::metrics::{holder_fit, HolderEstimate, PairPolicy};
use crate::sparse::{max_abs, pcg};

/// Discrete `-div(|grad u|^2 grad u)` at every unknown, in flux form: axis
/// face gradients times the face average of the nodal `|grad u|^2`.
pub fn plap_rhs(u: &ScalarField) -> Vec<f64> {
    let grid = u.grid();
    let v = u.values();
    let n = grid.unknown_count();
    let g2: Vec<f64> = (0..n)
        .map(|c| {
            let g = grid.gradient(v, c);
            g[0] * g[0] + g[1] * g[1]
        })
        .collect();
    (0..n)
        .map(|c| {
            let mut div = 0.0;
            for k in 0..2 {
                let p = grid.link(c, k, 0);
                let m = grid.link(c, k, 1);
                let face = |node: usize| if node < n { 0.5 * (g2[c] + g2[node]) } else { g2[c] };
                let flux_p = face(p.node) * (v[p.node] - v[c]) / p.dist;
                let flux_m = face(m.node) * (v[c] - v[m.node]) / m.dist;
                div += (flux_p - flux_m) / (0.5 * (p.dist + m.dist));
            }
            -div
        })
        .collect()
}

/// Right-hand side of the w-equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Forcing {
    PLaplacian,
    /// Diagnostic mode with the forcing switched off.
    Off,
}

#[derive(Clone, Debug)]
pub struct AbreuProblem {
    pub grid: Arc<Grid>,
    /// Boundary data for `w`, one value per trace node.
    pub psi: Vec<f64>,
    /// Boundary data for `u`, one value per trace node.
    pub varphi: Vec<f64>,
    pub forcing: Forcing,
    /// Extra right-hand side per unknown (manufactured solutions).
    pub defect: Option<Vec<f64>>,
    pub ma: MaOptions,
    pub w_tol: f64,
}

impl AbreuProblem {
    pub fn new(grid: Arc<Grid>, psi: Vec<f64>, varphi: Vec<f64>) -> Result<Self> {
        let nt = grid.node_count() - grid.unknown_count();
        if psi.len() != nt || varphi.len() != nt {
            return Err(Error::InvalidArgument("boundary data does not match the grid".into()));
        }
        let floor = psi.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(floor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "boundary data for w needs inf_boundary psi > 0, got {floor}"
            )));
        }
        Ok(AbreuProblem {
            grid,
            psi,
            varphi,
            forcing: Forcing::PLaplacian,
            defect: None,
            ma: MaOptions::default(),
            w_tol: 1e-11,
        })
    }

    pub fn psi_min(&self) -> f64 {
        self.psi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn psi_max(&self) -> f64 {
        self.psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// Relative residual of the w-solve.
    pub w: f64,
    /// Max-norm residual of the Monge–Ampère step.
    pub ma: f64,
    /// `max |u_next - u|`.
    pub increment: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundReport {
    pub min_w: f64,
    pub max_w: f64,
    pub min_det: f64,
    pub max_det: f64,
    pub max_grad: f64,
}

#[derive(Clone, Debug)]
pub struct AbreuState {
    /// Damped iterate.
    pub u: ScalarField,
    /// Undamped Monge–Ampère solution of the last step.
    pub u_plus: ScalarField,
    /// The `w` that produced `u_plus`.
    pub w: ScalarField,
    pub iteration: usize,
    pub residuals: Residuals,
    pub bounds: BoundReport,
    pub clamp_fraction: f64,
}

fn bound_report(u_plus: &ScalarField, w: &ScalarField, delta: f64) -> BoundReport {
    let grid = u_plus.grid();
    let det = ma_values(u_plus, delta);
    let max_grad = (0..grid.unknown_count())
        .map(|c| {
            let g = u_plus.gradient(c);
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        })
        .fold(0.0, f64::max);
    BoundReport {
        min_w: w.values().iter().cloned().fold(f64::INFINITY, f64::min),
        max_w: w.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min_det: det.iter().cloned().fold(f64::INFINITY, f64::min),
        max_det: det.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        max_grad,
    }
}

/// Starting state: `u` solves `det D^2 u = 1 / max psi` with `u = varphi`,
/// `w` is the harmonic extension of `psi`.
pub fn abreu_init(problem: &AbreuProblem) -> Result<AbreuState> {
    let grid = &problem.grid;
    let n = grid.unknown_count();
    let c = 1.0 / problem.psi_max();
    let f = vec![c; n];
    let sol = solve_ma(grid, &f, &problem.varphi, &PinchingBounds::new(c, c)?, &problem.ma)?;
    let w = solve_poisson(grid, &vec![0.0; n], &problem.psi, 1e-12)?;
    let bounds = bound_report(&sol.phi, &w, problem.ma.delta);
    Ok(AbreuState {
        u: sol.phi.clone(),
        u_plus: sol.phi,
        w,
        iteration: 0,
        residuals: Residuals {
            w: 0.0,
            ma: f64::NAN,
            increment: f64::INFINITY,
        },
        bounds,
        clamp_fraction: 0.0,
    })
}

/// One damped step from `state`.
pub fn abreu_iterate(problem: &AbreuProblem, state: &AbreuState, theta: f64) -> Result<AbreuState> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping {theta} is outside (0, 1]")));
    }
    let grid = &problem.grid;
    let n = grid.unknown_count();
    let op = assemble(&cofactor(&hessian(&state.u)))?;
    let mut rhs = match problem.forcing {
        Forcing::PLaplacian => plap_rhs(&state.u),
        Forcing::Off => vec![0.0; n],
    };
    if let Some(g) = &problem.defect {
        for (r, gi) in rhs.iter_mut().zip(g) {
            *r += gi;
        }
    }
    // U^{ij} w_ij = -A w for the divergence-free cofactor
    let lift = op.lifting(&problem.psi);
    let b: Vec<f64> = rhs.iter().zip(&lift).map(|(r, l)| l - r).collect();
    let (mut w, stats) = pcg(op.matrix(), &b, Some(state.w.interior()), problem.w_tol, 20 * n + 1000)?;
    let floor = 0.5 * problem.psi_min();
    let mut clamped = 0;
    for wi in w.iter_mut() {
        if *wi < floor {
            *wi = floor;
            clamped += 1;
        }
    }
    let w = ScalarField::from_parts(grid.clone(), &w, &problem.psi);
    let f: Vec<f64> = w.interior().iter().map(|v| 1.0 / v).collect();
    let fmin = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let fmax = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sol = solve_ma_from(
        grid,
        &f,
        &problem.varphi,
        &PinchingBounds::new(fmin, fmax)?,
        &problem.ma,
        Some(state.u_plus.interior()),
    )?;
    let next: Vec<f64> = state
        .u
        .interior()
        .iter()
        .zip(sol.phi.interior())
        .map(|(a, b)| (1.0 - theta) * a + theta * b)
        .collect();
    let increment = max_abs(&next.iter().zip(state.u.interior()).map(|(a, b)| a - b).collect::<Vec<_>>());
    let bounds = bound_report(&sol.phi, &w, problem.ma.delta);
    Ok(AbreuState {
        u: ScalarField::from_parts(grid.clone(), &next, &problem.varphi),
        residuals: Residuals {
            w: stats.relative_residual,
            ma: sol.residual(),
            increment,
        },
        u_plus: sol.phi,
        w,
        iteration: state.iteration + 1,
        bounds,
        clamp_fraction: clamped as f64 / n as f64,
    })
}

/// One row of the per-iteration log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbreuLogRow {
    pub iter: usize,
    pub res_w: f64,
    pub res_ma: f64,
    pub increment: f64,
    pub min_w: f64,
    pub max_w: f64,
    pub min_det: f64,
    pub max_det: f64,
    pub max_grad: f64,
    pub clamp_frac: f64,
    pub theta: f64,
}

impl AbreuLogRow {
    pub const HEADER: &'static str = "iter,res_w,res_ma,increment,min_w,max_w,min_det,max_det,max_grad,clamp_frac";

    pub fn csv(&self) -> String {
        format!(
            "{},{:.6e},{:.6e},{:.6e},{:.10},{:.10},{:.10},{:.10},{:.10},{:.6}",
            self.iter,
            self.res_w,
            self.res_ma,
            self.increment,
            self.min_w,
            self.max_w,
            self.min_det,
            self.max_det,
            self.max_grad,
            self.clamp_frac
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AbreuOptions {
    pub theta: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Steps with more clamped nodes than this fraction are rejected.
    pub max_clamp: f64,
    pub min_theta: f64,
}

impl Default for AbreuOptions {
    fn default() -> Self {
        AbreuOptions {
            theta: 0.5,
            max_iter: 200,
            tol: 1e-8,
            max_clamp: 0.01,
            min_theta: 1.0 / 1024.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AbreuRun {
    /// Final state; on convergence `u` is the last undamped MA solution.
    pub state: AbreuState,
    pub log: Vec<AbreuLogRow>,
    pub converged: bool,
    pub theta: f64,
    /// Descriptions of rejected steps.
    pub rejected: Vec<String>,
}

/// Runs the iteration until the increment and both inner residuals are below
/// `tol`. A failed or over-clamped step halves `theta` and is retried.
pub fn run_abreu(problem: &AbreuProblem, opts: &AbreuOptions) -> Result<AbreuRun> {
    let mut state = abreu_init(problem)?;
    let mut theta = opts.theta;
    let mut log = Vec::new();
    let mut rejected = Vec::new();
    let mut converged = false;
    while state.iteration < opts.max_iter {
        let next = match abreu_iterate(problem, &state, theta) {
            Ok(s) if s.clamp_fraction <= opts.max_clamp => s,
            Ok(s) => {
                rejected.push(format!("iteration {}: clamp active at {:.2}% of nodes", s.iteration, 100.0 * s.clamp_fraction));
                theta *= 0.5;
                if theta < opts.min_theta {
                    return Err(Error::InvalidArgument(format!("damping fell below {}: {}", opts.min_theta, rejected.join("; "))));
                }
                continue;
            }
            Err(e) => {
                rejected.push(format!("iteration {}: {e}", state.iteration + 1));
                theta *= 0.5;
                if theta < opts.min_theta {
                    return Err(e);
                }
                continue;
            }
        };
        state = next;
        let r = state.residuals;
        let b = state.bounds;
        log.push(AbreuLogRow {
            iter: state.iteration,
            res_w: r.w,
            res_ma: r.ma,
            increment: r.increment,
            min_w: b.min_w,
            max_w: b.max_w,
            min_det: b.min_det,
            max_det: b.max_det,
            max_grad: b.max_grad,
            clamp_frac: state.clamp_fraction,
            theta,
        });
        if r.increment < opts.tol && r.w < opts.tol && r.ma < opts.tol {
            converged = true;
            state.u = state.u_plus.clone();
            break;
        }
    }
    Ok(AbreuRun {
        state,
        log,
        converged,
        theta,
        rejected,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AprioriReport {
    pub min_w: f64,
    pub inf_psi: f64,
    pub max_w: f64,
    /// `max over the boundary of psi + 2 C2^2 |x|^2`.
    pub w_ceiling: f64,
    pub c2: f64,
    pub min_det: f64,
    pub max_det: f64,
    /// `max |det D^2 u * w - 1|` over unknowns.
    pub fixed_point_defect: f64,
    /// Largest Hessian eigenvalue ratio over unknowns.
    pub eigen_ratio: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub det_ok: bool,
    pub pinching_ok: bool,
}

impl AprioriReport {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok && self.det_ok && self.pinching_ok
    }
}

/// Checks the a priori bounds on `state` with relative tolerance `tol`.
pub fn apriori_check(state: &AbreuState, problem: &AbreuProblem, tol: f64) -> AprioriReport {
    let grid = &problem.grid;
    let b = state.bounds;
    let inf_psi = problem.psi_min();
    let c2 = b.max_grad;
    let w_ceiling = grid
        .trace_nodes()
        .zip(&problem.psi)
        .map(|(t, &p)| {
            let x = grid.position(t);
            p + 2.0 * c2 * c2 * (x[0] * x[0] + x[1] * x[1])
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let det = ma_values(&state.u_plus, problem.ma.delta);
    let fixed_point_defect = det
        .iter()
        .zip(state.w.interior())
        .map(|(d, w)| (d * w - 1.0).abs())
        .fold(0.0, f64::max);
    let eigen_ratio = hessian(&state.u_plus)
        .values()
        .iter()
        .map(|m| {
            let (lo, hi) = m.eigenvalues();
            if lo > 0.0 {
                hi / lo
            } else {
                f64::INFINITY
            }
        })
        .fold(1.0, f64::max);
    let lo_det = 1.0 / b.max_w;
    let hi_det = 1.0 / b.min_w;
    AprioriReport {
        min_w: b.min_w,
        inf_psi,
        max_w: b.max_w,
        w_ceiling,
        c2,
        min_det: b.min_det,
        max_det: b.max_det,
        fixed_point_defect,
        eigen_ratio,
        lower_ok: b.min_w >= inf_psi * (1.0 - tol),
        upper_ok: b.max_w <= w_ceiling * (1.0 + tol),
        det_ok: b.min_det >= lo_det * (1.0 - tol) && b.max_det <= hi_det * (1.0 + tol),
        pinching_ok: eigen_ratio.is_finite(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapReport {
    pub estimate: HolderEstimate,
    /// `C / (|psi|_{C^1} + max |grad u|^3)`.
    pub ratio: f64,
}

/// Hölder fit of `w` over the whole domain and its constant relative to
/// `|psi|_{C^1} + max |grad u|^3`.
pub fn holder_bootstrap_check(state: &AbreuState, psi_c1: f64, seed: u64) -> Result<BootstrapReport> {
    let grid = state.w.grid();
    let region: Vec<usize> = (0..grid.unknown_count()).collect();
    let estimate = holder_fit(&state.w, &region, PairPolicy::Uniform { pairs: 20_000, seed }, "domain")?;
    let ratio = estimate.constant / (psi_c1 + state.bounds.max_grad.powi(3));
    Ok(BootstrapReport { estimate, ratio })
}

/// Manufactured solution `u* = |x|^2/2 + (x1^4 + x2^4)/12` with
/// `w* = 1 / ((1 + x1^2)(1 + x2^2))`.
pub mod manufactured {
    use crate::geometry::Point;

    pub fn u_star(x: Point) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1]) + (x[0].powi(4) + x[1].powi(4)) / 12.0
    }

    pub fn w_star(x: Point) -> f64 {
        1.0 / ((1.0 + x[0] * x[0]) * (1.0 + x[1] * x[1]))
    }

    /// `U*^{ij} w*_ij + div(|Du*|^2 Du*)`.
    pub fn defect(x: Point) -> f64 {
        let a2 = |t: f64| (6.0 * t * t - 2.0) / (1.0 + t * t).powi(3);
        let p = |t: f64| t + t * t * t / 3.0;
        let dp = |t: f64| 1.0 + t * t;
        let (p1, p2) = (p(x[0]), p(x[1]));
        let div = dp(x[0]) * (3.0 * p1 * p1 + p2 * p2) + dp(x[1]) * (3.0 * p2 * p2 + p1 * p1);
        a2(x[0]) + a2(x[1]) + div
    }
}

/// Problem whose exact solution is the manufactured pair.
pub fn manufactured_problem(grid: Arc<Grid>) -> Result<AbreuProblem> {
    let trace = |f: fn([f64; 2]) -> f64| grid.trace_nodes().map(|t| f(grid.position(t))).collect::<Vec<_>>();
    let psi = trace(manufactured::w_star);
    let varphi = trace(manufactured::u_star);
    let defect = (0..grid.unknown_count()).map(|u| manufactured::defect(grid.position(u))).collect();
    let mut p = AbreuProblem::new(grid.clone(), psi, varphi)?;
    p.defect = Some(defect);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};
    use crate::grid::discretize;

    fn disk(h: f64) -> Arc<Grid> {
        let d = build_domain(&DomainSpec::Disk { radius: 1.0 }).unwrap();
        Arc::new(discretize(&d, h).unwrap())
    }

    #[test]
    fn plap_of_linear_vanishes() {
        let g = disk(1.0 / 32.0);
        let u = ScalarField::from_fn(g.clone(), |p| 2.0 * p[0] - 3.0 * p[1] + 1.0);
        assert!(max_abs(&plap_rhs(&u)) < 1e-9);
    }

    #[test]
    fn plap_of_quadratics() {
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let g = disk(h);
            let u = ScalarField::from_fn(g.clone(), |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
            let v = ScalarField::from_fn(g.clone(), |p| 0.5 * p[0] * p[0]);
            let (ru, rv) = (plap_rhs(&u), plap_rhs(&v));
            for c in (0..g.unknown_count()).filter(|&c| g.has_full_stencil(c)) {
                let x = g.position(c);
                let r2 = x[0] * x[0] + x[1] * x[1];
                assert!((ru[c] + 4.0 * r2).abs() < 4.0 * h * h, "{} vs {}", ru[c], -4.0 * r2);
                assert!((rv[c] + 3.0 * x[0] * x[0]).abs() < 2.0 * h * h);
            }
        }
    }

    #[test]
    fn defect_matches_finite_differences() {
        // independent evaluation of U* w*_ij + div(|Du*|^2 Du*) by central differences
        let e = 1e-3;
        let u = manufactured::u_star;
        let w = manufactured::w_star;
        let d2 = |f: fn([f64; 2]) -> f64, x: [f64; 2], i: usize| {
            let mut p = x;
            let mut m = x;
            p[i] += e;
            m[i] -= e;
            (f(p) - 2.0 * f(x) + f(m)) / (e * e)
        };
        let flux = |x: [f64; 2], i: usize| {
            let g = [
                (u([x[0] + e, x[1]]) - u([x[0] - e, x[1]])) / (2.0 * e),
                (u([x[0], x[1] + e]) - u([x[0], x[1] - e])) / (2.0 * e),
            ];
            (g[0] * g[0] + g[1] * g[1]) * g[i]
        };
        for x in [[0.1, 0.2], [-0.5, 0.3], [0.6, -0.6]] {
            let uw = d2(u, x, 1) * d2(w, x, 0) + d2(u, x, 0) * d2(w, x, 1);
            let div = (flux([x[0] + e, x[1]], 0) - flux([x[0] - e, x[1]], 0)) / (2.0 * e)
                + (flux([x[0], x[1] + e], 1) - flux([x[0], x[1] - e], 1)) / (2.0 * e);
            let d = manufactured::defect(x);
            assert!((d - (uw + div)).abs() < 1e-4 * (1.0 + d.abs()), "{d} vs {}", uw + div);
        }
    }

    #[test]
    fn decoupled_mode_fixed_point() {
        let g = disk(1.0 / 16.0);
        let trace = |f: &dyn Fn([f64; 2]) -> f64| g.trace_nodes().map(|t| f(g.position(t))).collect::<Vec<_>>();
        let mut p = AbreuProblem::new(g.clone(), trace(&|_| 1.0), trace(&|x| 0.5 * (x[0] * x[0] + x[1] * x[1]))).unwrap();
        p.forcing = Forcing::Off;
        let run = run_abreu(&p, &AbreuOptions::default()).unwrap();
        assert!(run.converged);
        let w = &run.state.w;
        assert!(w.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
        let rep = apriori_check(&run.state, &p, 1e-8);
        assert!(rep.lower_ok && rep.det_ok, "{rep:?}");
        let exact = ScalarField::from_fn(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        assert!(run.state.u.max_diff_interior(&exact) < 1e-6);
        let boot = holder_bootstrap_check(&run.state, 1.0, 0).unwrap();
        assert!(boot.estimate.constant_field);
    }

    #[test]
    fn rejects_nonpositive_psi() {
        let g = disk(1.0 / 8.0);
        let nt = g.node_count() - g.unknown_count();
        let err = AbreuProblem::new(g, vec![0.0; nt], vec![0.0; nt]).unwrap_err();
        assert!(err.to_string().contains("inf_boundary psi > 0"));
    }
}
