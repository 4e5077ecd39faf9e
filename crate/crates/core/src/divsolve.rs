//! The Dirichlet problem `Phi^{ij} u_ij = div F` in flux form, its Green
//! representation and the maximum-principle bound.
//!
//! The load pairs `F` with discrete test gradients along the same axis edges
//! the operator uses: every axis edge `C -> X` carries the weight `h^2` (full
//! edge) or `dist * h` (edge cut by the boundary), and `F` is averaged over
//! the two endpoints. The assembled system is the weak statement
//! `sum Phi grad u . grad t = sum F . grad t` for every nodal hat `t`.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::green::{GreenOptions, GreenSolver};
use crate::linop::DivergenceFormOperator;
use crate::sparse::{pcg, SolveStats};

/// One axis edge of the load pairing: `weight * F_edge . e` multiplies
/// `(t_X - t_C)`, where `e` is the signed unit axis vector.
#[derive(Clone, Copy, Debug)]
struct LoadEdge {
    center: usize,
    arm: usize,
    axis: usize,
    sign: f64,
}

fn load_edges(op: &DivergenceFormOperator) -> Vec<LoadEdge> {
    let grid = op.grid();
    let mut edges = Vec::new();
    for u in 0..grid.unknown_count() {
        for axis in 0..2 {
            for s in 0..2 {
                let l = grid.link(u, axis, s);
                // interior edges are listed once, from their lower-index end
                if s == 1 && grid.is_unknown(l.node) {
                    continue;
                }
                edges.push(LoadEdge {
                    center: u,
                    arm: l.node,
                    axis,
                    sign: if s == 0 { 1.0 } else { -1.0 },
                });
            }
        }
    }
    edges
}

/// Edge flux `(w / d) * F_edge . e`; `w / d = h` on every edge.
fn edge_flux(op: &DivergenceFormOperator, f: &VectorField, e: &LoadEdge) -> f64 {
    let h = op.grid().h();
    let fv = f.values();
    let fe = 0.5 * (fv[e.center][e.axis] + fv[e.arm][e.axis]);
    h * e.sign * fe
}

/// Right-hand side `b` with `h^2 b . t = sum_edges F . grad t` over unknowns.
pub fn divergence_load(op: &DivergenceFormOperator, f: &VectorField) -> Vec<f64> {
    let grid = op.grid();
    let n = grid.unknown_count();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut b = vec![0.0; n];
    for e in load_edges(op) {
        let flux = edge_flux(op, f, &e) * inv_h2;
        b[e.center] -= flux;
        if e.arm < n {
            b[e.arm] += flux;
        }
    }
    b
}

#[derive(Clone, Debug)]
pub struct DivSolution {
    pub u: ScalarField,
    pub stats: SolveStats,
}

/// Solves `Phi^{ij} u_ij = div F` with `u = boundary` on the trace nodes.
pub fn solve_dirichlet_div(op: &DivergenceFormOperator, f: &VectorField, boundary: &[f64], tol: f64) -> Result<DivSolution> {
    let grid = op.grid();
    let n = grid.unknown_count();
    if boundary.len() != grid.node_count() - n {
        return Err(Error::InvalidArgument("boundary data does not match the grid".into()));
    }
    let mut b = divergence_load(op, f);
    for (bi, li) in b.iter_mut().zip(op.lifting(boundary)) {
        *bi += li;
    }
    let (x, stats) = pcg(op.matrix(), &b, None, tol, 20 * n + 1000)?;
    Ok(DivSolution {
        u: ScalarField::from_parts(grid.clone(), &x, boundary),
        stats,
    })
}

/// Weak-form defect `sum Phi grad u . grad t - sum F . grad t` for the hat at `node`.
pub fn weak_form_defect(op: &DivergenceFormOperator, u: &ScalarField, f: &VectorField, node: usize) -> f64 {
    let h2 = op.grid().cell_area();
    let au = op.apply(u);
    let b = divergence_load(op, f);
    h2 * (au[node] - b[node])
}

/// `v(x) = sum_edges F . grad_y G(y; x)` at the requested unknowns.
pub fn green_representation_at(solver: &GreenSolver, f: &VectorField, nodes: &[usize]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let op = solver.operator();
    let edges = load_edges(op);
    let n = op.grid().unknown_count();
    nodes
        .par_iter()
        .map(|&x| {
            let (g, _, _) = solver.solve_values(x)?;
            let val = |i: usize| if i < n { g[i] } else { 0.0 };
            Ok(edges
                .iter()
                .map(|e| edge_flux(op, f, e) * (val(e.arm) - val(e.center)))
                .sum())
        })
        .collect()
}

/// Green representation at every unknown (one solve per node).
pub fn green_representation(op: &DivergenceFormOperator, f: &VectorField, opts: &GreenOptions) -> Result<ScalarField> {
    let solver = GreenSolver::new(op, opts.clone())?;
    let grid = op.grid();
    let nodes: Vec<usize> = (0..grid.unknown_count()).collect();
    let v = green_representation_at(&solver, f, &nodes)?;
    let trace = vec![0.0; grid.node_count() - grid.unknown_count()];
    Ok(ScalarField::from_parts(grid.clone(), &v, &trace))
}

/// `kappa_2 = 1 - 1/(1 + kappa)`.
pub fn kappa2_from_kappa(kappa: f64) -> f64 {
    1.0 - 1.0 / (1.0 + kappa)
}

pub const DEFAULT_KAPPA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbpMeasurement {
    pub sup_u: f64,
    pub sup_boundary_plus: f64,
    pub constant: f64,
}

/// `(max u - max_boundary u^+) / (|V|^kappa2 |F|_inf)` when positive, else 0.
pub fn abp_bound_check(u: &ScalarField, f: &VectorField, kappa2: f64) -> AbpMeasurement {
    let sup_u = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sup_bd = u.trace().iter().cloned().fold(0.0, f64::max);
    let fnorm = f.sup_norm();
    let area = u.grid().domain().area();
    let excess = sup_u - sup_bd;
    let constant = if fnorm == 0.0 || excess <= 0.0 {
        0.0
    } else {
        excess / (area.powf(kappa2) * fnorm)
    };
    AbpMeasurement {
        sup_u,
        sup_boundary_plus: sup_bd,
        constant,
    }
}
