//! Subcommand drivers. Each one collects its CSV tables in memory and hands
//! them to the output directory at the end, so rows come out in a fixed order
//! whatever the completion order of the concurrent solves.

use std::fs;
use std::sync::Arc;

use rayon::prelude::*;

use lmalab::abreu::{apriori_check, run_abreu, AbreuLogRow, AbreuOptions, AbreuProblem, Forcing};
use lmalab::acceptance::{run_criterion, AcceptanceConfig, Lab};
use lmalab::divsolve::{abp_bound_check, kappa2_from_kappa, solve_dirichlet_div, DEFAULT_KAPPA};
use lmalab::field::{ScalarField, SymmetricMatrixField, VectorField};
use lmalab::geometry::{build_domain, norm, sub, ConvexDomain, Point};
use lmalab::green::{
    local_operator, pole_positions, snap_poles, sublevel_gradient_lp, truncation_energy, GreenOptions, GreenSolver,
};
use lmalab::grid::{discretize, Grid};
use lmalab::linop::{assemble, cofactor, divergence_free_residual, project_psd, DivergenceFormOperator};
use lmalab::ma::{hessian, solve_ma, MaOptions, PinchingBounds};
use lmalab::metrics::{boundary_floor, boundary_holder_fit, holder_fit, HolderEstimate, PairPolicy};

use crate::config::{ExperimentConfig, PhiSource, PoleSpec, ScalarSource, VectorSource};
use crate::output::{num, Csv, OutputDir};

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Acceptance(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Acceptance(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Acceptance(m) => m,
        }
    }
}

fn solver_err(e: lmalab::Error) -> Failure {
    Failure::Solver(e.to_string())
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Config(format!("cannot write output: {e}"))
}

/// Replaces characters outside `[A-Za-z0-9_]` so identifiers need no quoting.
pub fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect()
}

/// A convex potential on one grid with the data derived from it.
pub struct Potential {
    pub phi: ScalarField,
    pub hess: SymmetricMatrixField,
    pub projected: usize,
    pub newton: Option<(usize, f64)>,
}

pub struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub domain: ConvexDomain,
    pub out: OutputDir,
    /// Number of rows marked as failed across all tables.
    pub failed_rows: usize,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a ExperimentConfig, out: OutputDir) -> Result<Self, Failure> {
        let domain = build_domain(&cfg.domain).map_err(|e| Failure::Config(e.to_string()))?;
        Ok(Run {
            cfg,
            domain,
            out,
            failed_rows: 0,
        })
    }

    fn grid(&self, h: f64) -> Result<Arc<Grid>, Failure> {
        discretize(&self.domain, h).map(Arc::new).map_err(|e| Failure::Config(e.to_string()))
    }

    fn write(&mut self, csv: &Csv) -> Result<(), Failure> {
        self.failed_rows += csv.failed();
        self.out.write_csv(csv).map_err(io_err)
    }

    fn dump(&mut self, file: &str, field: &ScalarField) -> Result<(), Failure> {
        let grid = field.grid().clone();
        self.out
            .write_with(file, |f| grid.write_dump(field.values(), f))
            .map_err(|e| Failure::Config(e.to_string()))
    }

    fn read_dump(&self, grid: &Grid, path: &std::path::Path) -> Result<Vec<f64>, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        grid.read_dump(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    fn trace(&self, grid: &Grid, f: impl Fn(Point) -> f64) -> Vec<f64> {
        grid.trace_nodes().map(|t| f(grid.position(t))).collect()
    }

    pub fn potential(&self, grid: &Arc<Grid>) -> Result<Potential, Failure> {
        match &self.cfg.phi {
            PhiSource::Ma { f, boundary } => {
                let n = grid.unknown_count();
                let fv: Vec<f64> = match f {
                    ScalarSource::Expr(e) => (0..n).map(|u| e.eval(grid.position(u))).collect(),
                    ScalarSource::File(p) => self.read_dump(grid, p)?[..n].to_vec(),
                };
                let bd = self.trace(grid, |p| boundary.eval(p));
                let bounds = PinchingBounds::new(self.cfg.lambda, self.cfg.upper).map_err(|e| Failure::Config(e.to_string()))?;
                let opts = MaOptions {
                    tol: self.cfg.ma_tol,
                    ..Default::default()
                };
                let sol = solve_ma(grid, &fv, &bd, &bounds, &opts).map_err(solver_err)?;
                let (hess, projected) = project_psd(&hessian(&sol.phi));
                let newton = Some((sol.iterations, sol.residual()));
                Ok(Potential {
                    phi: sol.phi,
                    hess,
                    projected,
                    newton,
                })
            }
            PhiSource::ClosedForm(e) => {
                let phi = ScalarField::from_fn(grid.clone(), |p| e.eval(p));
                let exact: Option<Vec<_>> = (0..grid.unknown_count()).map(|u| e.hessian(grid.position(u))).collect();
                let (hess, projected) = match exact {
                    Some(v) => (SymmetricMatrixField::new(grid.clone(), v), 0),
                    None => project_psd(&hessian(&phi)),
                };
                Ok(Potential {
                    phi,
                    hess,
                    projected,
                    newton: None,
                })
            }
        }
    }

    fn operator(&self, pot: &Potential) -> Result<DivergenceFormOperator, Failure> {
        assemble(&cofactor(&pot.hess)).map_err(solver_err)
    }

    fn force(&self, grid: &Arc<Grid>) -> Result<VectorField, Failure> {
        match &self.cfg.force {
            VectorSource::Expr(e) => Ok(VectorField::from_fn(grid.clone(), |p| e.eval(p))),
            VectorSource::Files(a, b) => {
                let x = self.read_dump(grid, a)?;
                let y = self.read_dump(grid, b)?;
                Ok(VectorField::new(grid.clone(), x.into_iter().zip(y).map(|(a, b)| [a, b]).collect()))
            }
        }
    }

    fn poles(&self) -> Vec<Point> {
        match &self.cfg.poles {
            PoleSpec::List(l) => l.clone(),
            PoleSpec::Random {
                interior,
                near,
                near_depth,
                min_depth,
                seed,
            } => pole_positions(&self.domain, *interior, *near, *near_depth, *min_depth, *seed),
        }
    }

    fn green_options(&self) -> GreenOptions {
        GreenOptions {
            tol: self.cfg.linear_tol,
            max_iter: None,
            kappas: self.cfg.kappas.clone(),
            qs: self.cfg.qs.clone(),
            solver: self.cfg.solver,
        }
    }
}

pub fn solve_ma_cmd(run: &mut Run) -> Result<(), Failure> {
    let f_id = match &run.cfg.phi {
        PhiSource::Ma { f, .. } => f.id(),
        PhiSource::ClosedForm(_) => return Err(Failure::Config("solve-ma needs phi.source = ma".into())),
    };
    let phi_id = run.cfg.phi_id();
    let mut csv = Csv::new("solve_ma.csv", "phi_id,f_id,h,unknowns,iterations,residual,projected,status");
    let mut first_err = None;
    for (i, &h) in run.cfg.ladder.iter().enumerate() {
        let grid = run.grid(h)?;
        match run.potential(&grid) {
            Ok(p) => {
                let (it, res) = p.newton.unwrap_or((0, f64::NAN));
                csv.push(format!(
                    "{phi_id},{f_id},{},{},{it},{},{},ok",
                    num(h),
                    grid.unknown_count(),
                    num(res),
                    p.projected
                ));
                run.dump(&format!("phi_{i}.dump"), &p.phi)?;
            }
            Err(e) => {
                run.out.note(format!("h = {h}: {}", e.message()));
                csv.push_failed(format!("{phi_id},{f_id},{},{},nan,nan,nan,failed", num(h), grid.unknown_count()));
                first_err.get_or_insert(e);
            }
        }
    }
    run.write(&csv)?;
    first_err.map_or(Ok(()), Err)
}

pub fn assemble_cmd(run: &mut Run) -> Result<(), Failure> {
    let phi_id = run.cfg.phi_id();
    let mut csv = Csv::new(
        "assemble.csv",
        "phi_id,h,unknowns,nnz,symmetric,min_ritz,div_free_residual,projected,status",
    );
    for (i, &h) in run.cfg.ladder.iter().enumerate() {
        let grid = run.grid(h)?;
        let p = run.potential(&grid)?;
        let cof = cofactor(&p.hess);
        let op = run.operator(&p)?;
        let ritz = op.smallest_ritz_value(200).map_err(solver_err)?;
        csv.push(format!(
            "{phi_id},{},{},{},{},{},{},{},ok",
            num(h),
            grid.unknown_count(),
            op.matrix().nnz(),
            op.matrix().is_symmetric(),
            num(ritz),
            num(divergence_free_residual(&cof)),
            p.projected
        ));
        run.out
            .write_with(&format!("operator_{i}.coo"), |f| op.write_coo(f))
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    run.write(&csv)
}

pub fn green_cmd(run: &mut Run) -> Result<(), Failure> {
    let mut csv = Csv::new("green.csv", "phi_id,pole_x,pole_y,kappa,grad_lp,q,lq,tail_s,tail_resid,h,status");
    let mut levels = Csv::new("green_levels.csv", "phi_id,pole_x,pole_y,k_fraction,k,energy_ratio,p,sublevel_lp,h,status");
    let positions = run.poles();
    let opts = run.green_options();
    let base_id = run.cfg.phi_id();
    for &h in &run.cfg.ladder {
        let grid = run.grid(h)?;
        let pot = run.potential(&grid)?;
        let op = run.operator(&pot)?;
        let mut variants = vec![(base_id.clone(), op, positions.clone())];
        if let Some(delta) = run.cfg.local_delta {
            let local = local_operator(&variants[0].1, [0.0, 0.0], delta);
            let inside: Vec<Point> = positions.iter().cloned().filter(|p| norm(*p) < delta).collect();
            variants.push((format!("{base_id}_local"), local, inside));
        }
        for (phi_id, op, poles) in &variants {
            let solver = GreenSolver::new(op, opts.clone()).map_err(solver_err)?;
            let nodes = snap_poles(&grid, poles);
            let results: Vec<_> = nodes.par_iter().map(|&p| solver.solve(p)).collect();
            for (&node, r) in nodes.iter().zip(results) {
                let x = grid.position(node);
                let (px, py) = (num(x[0]), num(x[1]));
                match r {
                    Ok(r) => {
                        let (ts, tr) = match &r.tail_fit {
                            Ok(t) => (num(t.s), num(t.residual)),
                            Err(m) => {
                                run.out.note(format!("{phi_id} pole ({px}, {py}) h = {h}: tail fit: {m}"));
                                ("nan".into(), "nan".into())
                            }
                        };
                        for (i, &(kappa, g)) in r.grad_lp.iter().enumerate() {
                            let (q, lq) = r
                                .lq
                                .get(i)
                                .map_or((String::new(), String::new()), |&(q, l)| (num(q), num(l)));
                            csv.push(format!(
                                "{phi_id},{px},{py},{},{},{q},{lq},{ts},{tr},{},ok",
                                num(kappa),
                                num(g),
                                num(h)
                            ));
                        }
                        let gmax = r.max_value();
                        for &frac in &run.cfg.k_levels {
                            let k = frac * gmax;
                            let ratio = truncation_energy(&r, op, k).map(|e| e / k);
                            let lp = sublevel_gradient_lp(&r, k, 1.5);
                            match ratio {
                                Ok(e) => levels.push(format!(
                                    "{phi_id},{px},{py},{},{},{},1.5,{},{},ok",
                                    num(frac),
                                    num(k),
                                    num(e),
                                    num(lp),
                                    num(h)
                                )),
                                Err(e) => {
                                    run.out.note(format!("{phi_id} pole ({px}, {py}) k = {k}: {e}"));
                                    levels.push_failed(format!(
                                        "{phi_id},{px},{py},{},{},nan,1.5,{},{},failed",
                                        num(frac),
                                        num(k),
                                        num(lp),
                                        num(h)
                                    ));
                                }
                            }
                        }
                    }
                    Err(e) => {
                        run.out.note(format!("{phi_id} pole ({px}, {py}) h = {h}: {e}"));
                        for (i, &kappa) in opts.kappas.iter().enumerate() {
                            let q = opts.qs.get(i).map_or(String::new(), |&q| num(q));
                            let lq = if q.is_empty() { "" } else { "nan" };
                            csv.push_failed(format!(
                                "{phi_id},{px},{py},{},nan,{q},{lq},nan,nan,{},failed",
                                num(kappa),
                                num(h)
                            ));
                        }
                    }
                }
            }
        }
    }
    run.write(&csv)?;
    run.write(&levels)?;
    Ok(())
}

pub fn solve_div_cmd(run: &mut Run) -> Result<(), Failure> {
    let phi_id = run.cfg.phi_id();
    let f_id = run.cfg.force.id();
    let k2 = kappa2_from_kappa(DEFAULT_KAPPA);
    let mut csv = Csv::new("solve_div.csv", "phi_id,F_id,sup_u,sup_bd_u_plus,C_meas,h,status");
    for (i, &h) in run.cfg.ladder.iter().enumerate() {
        let grid = run.grid(h)?;
        let pot = run.potential(&grid)?;
        let op = run.operator(&pot)?;
        let f = run.force(&grid)?;
        let bd = run.trace(&grid, |p| run.cfg.div_boundary.eval(p));
        match solve_dirichlet_div(&op, &f, &bd, run.cfg.linear_tol) {
            Ok(sol) => {
                let m = abp_bound_check(&sol.u, &f, k2);
                csv.push(format!(
                    "{phi_id},{f_id},{},{},{},{},ok",
                    num(m.sup_u),
                    num(m.sup_boundary_plus),
                    num(m.constant),
                    num(h)
                ));
                run.dump(&format!("u_{i}.dump"), &sol.u)?;
            }
            Err(e) => {
                run.out.note(format!("h = {h}: {e}"));
                csv.push_failed(format!("{phi_id},{f_id},nan,nan,nan,{},failed", num(h)));
            }
        }
    }
    run.write(&csv)
}

fn nearest_trace(grid: &Grid, p: Point) -> usize {
    grid.trace_nodes()
        .min_by(|&a, &b| {
            let da = norm(sub(grid.position(a), p));
            let db = norm(sub(grid.position(b), p));
            da.partial_cmp(&db).unwrap()
        })
        .expect("grid has trace nodes")
}

pub fn holder_scan_cmd(run: &mut Run) -> Result<(), Failure> {
    let phi_id = run.cfg.phi_id();
    let u_id = format!("u_{}", slug(&run.cfg.force.id()));
    let hs = run.cfg.holder.clone();
    let floor_b = boundary_floor(run.cfg.alpha, kappa2_from_kappa(DEFAULT_KAPPA));
    let mut csv = Csv::new("holder_scan.csv", "phi_id,u_id,region,beta,C,residual,pairs,h,floor,passed");
    let mut domain_betas = Vec::new();
    for &h in &run.cfg.ladder {
        let grid = run.grid(h)?;
        let pot = run.potential(&grid)?;
        let op = run.operator(&pot)?;
        let f = run.force(&grid)?;
        let bd = run.trace(&grid, |p| run.cfg.varphi.eval(p));
        let sol = match solve_dirichlet_div(&op, &f, &bd, run.cfg.linear_tol) {
            Ok(s) => s,
            Err(e) => {
                run.out.note(format!("h = {h}: {e}"));
                csv.push_failed(format!("{phi_id},{u_id},domain,nan,nan,nan,0,{},0,false", num(h)));
                continue;
            }
        };
        let all: Vec<usize> = (0..grid.unknown_count()).collect();
        let interior: Vec<usize> = all
            .iter()
            .cloned()
            .filter(|&u| run.domain.level(grid.position(u)) < -hs.interior_depth)
            .collect();
        let policy = PairPolicy::Uniform {
            pairs: hs.pairs,
            seed: run.cfg.seed,
        };
        let mut fits: Vec<(String, f64, Result<HolderEstimate, lmalab::Error>)> = vec![
            ("domain".into(), 0.0, holder_fit(&sol.u, &all, policy, "domain")),
            ("interior".into(), 0.0, holder_fit(&sol.u, &interior, policy, "interior")),
        ];
        for (j, s) in run.domain.boundary_samples(hs.boundary_points).iter().enumerate() {
            let x0 = nearest_trace(&grid, s.point);
            fits.push((format!("boundary_{j}"), floor_b, boundary_holder_fit(&sol.u, x0, hs.delta)));
        }
        for (region, floor, fit) in fits {
            match fit {
                Ok(e) => {
                    if region == "domain" {
                        domain_betas.push(e.beta);
                    }
                    // interior and global exponents only need beta > 0
                    let passed = if floor > 0.0 { e.beta >= floor - 0.05 } else { e.beta > 0.0 };
                    csv.push(format!(
                        "{phi_id},{u_id},{region},{},{},{},{},{},{},{passed}",
                        num(e.beta),
                        num(e.constant),
                        num(e.residual),
                        e.pairs,
                        num(h),
                        num(floor)
                    ));
                }
                Err(e) => {
                    run.out.note(format!("{region} h = {h}: {e}"));
                    csv.push_failed(format!("{phi_id},{u_id},{region},nan,nan,nan,0,{},{},false", num(h), num(floor)));
                }
            }
        }
    }
    if domain_betas.len() >= 2 {
        let lo = domain_betas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = domain_betas.iter().cloned().fold(0.0, f64::max);
        run.out.note(format!("global exponent over the ladder: [{lo:.4}, {hi:.4}], spread {:.1}%", 100.0 * (hi - lo) / lo));
    }
    run.write(&csv)
}

pub fn abreu_cmd(run: &mut Run) -> Result<(), Failure> {
    let grid = run.grid(run.cfg.h)?;
    let psi = run.trace(&grid, |p| run.cfg.psi.eval(p));
    let varphi = run.trace(&grid, |p| run.cfg.varphi.eval(p));
    let mut problem = AbreuProblem::new(grid.clone(), psi, varphi).map_err(|e| Failure::Config(e.to_string()))?;
    let a = &run.cfg.abreu;
    if a.forcing_off {
        problem.forcing = Forcing::Off;
    }
    problem.ma.tol = run.cfg.ma_tol;
    let opts = AbreuOptions {
        theta: a.theta,
        max_iter: a.max_iter,
        tol: a.tol,
        max_clamp: a.max_clamp,
        ..Default::default()
    };
    let result = run_abreu(&problem, &opts).map_err(solver_err)?;
    let mut log = Csv::new("abreu_log.csv", AbreuLogRow::HEADER);
    for row in &result.log {
        log.push(row.csv());
    }
    for r in &result.rejected {
        run.out.note(format!("rejected step, {r}"));
    }
    let report = apriori_check(&result.state, &problem, 0.05);
    let mut summary = Csv::new(
        "abreu_summary.csv",
        "h,converged,iterations,theta,min_w,inf_psi,max_w,w_ceiling,min_det,max_det,fixed_point_defect,apriori_passed",
    );
    summary.push(format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        num(run.cfg.h),
        result.converged,
        result.state.iteration,
        num(result.theta),
        num(report.min_w),
        num(report.inf_psi),
        num(report.max_w),
        num(report.w_ceiling),
        num(report.min_det),
        num(report.max_det),
        num(report.fixed_point_defect),
        report.passed()
    ));
    run.write(&log)?;
    run.write(&summary)?;
    run.dump("u.dump", &result.state.u)?;
    run.dump("w.dump", &result.state.w)?;
    if !result.converged {
        return Err(Failure::Solver(format!(
            "no convergence within {} iterations (last increment {:e})",
            opts.max_iter,
            result.log.last().map_or(f64::NAN, |r| r.increment)
        )));
    }
    Ok(())
}

pub fn full_report_cmd(run: &mut Run, criteria: &[usize]) -> Result<(), Failure> {
    let config = AcceptanceConfig {
        seed: run.cfg.seed,
        ..Default::default()
    };
    let lab = Lab::new(config).map_err(solver_err)?;
    let mut csv = Csv::new("acceptance.csv", "criterion,title,passed");
    let mut lines = String::new();
    let mut failed = Vec::new();
    for &id in criteria {
        let o = run_criterion(&lab, id);
        let line = o.line();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
        csv.push(format!("{},{},{}", o.id, slug(o.title), o.passed));
        if !o.passed {
            failed.push(o.id);
        }
    }
    run.write(&csv)?;
    fs::write(run.out.path("acceptance.txt"), lines).map_err(io_err)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(format!("criteria {failed:?} failed")))
    }
}
