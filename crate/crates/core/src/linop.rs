//! Cofactor fields and the divergence-form operator `v -> -div(Phi grad v)`.
//!
//! The operator is the second variation of a discrete energy built from
//! quadrant contributions. At an unknown `C`, each of the four quadrants
//! spanned by an x-arm `X` and a y-arm `Y` contributes
//! `w * Phi_q grad_q v . grad_q v`, with the one-sided quadrant gradient
//! `grad_q v = (sx (v_X - v_C)/dx, sy (v_Y - v_C)/dy)` and `Phi_q` the mean of
//! the nodal cofactors at `C`, `X` and `Y`. Each quadrant matrix is positive
//! semidefinite whenever `Phi_q` is, so the assembled matrix is as well.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, Sym2, SymmetricMatrixField};
use crate::grid::Grid;
use crate::sparse::{CsrMatrix, SymmetricBuilder, TripletBuilder};

/// 2D cofactor `[[m22, -m12], [-m12, m11]]` at every node.
pub fn cofactor(hess: &SymmetricMatrixField) -> SymmetricMatrixField {
    let values = hess.values().iter().map(Sym2::cofactor).collect();
    SymmetricMatrixField::new(hess.grid().clone(), values)
}

/// Hessian field with every indefinite entry replaced by its nearest
/// positive semidefinite matrix, and the number of entries changed.
pub fn project_psd(hess: &SymmetricMatrixField) -> (SymmetricMatrixField, usize) {
    let mut changed = 0;
    let values = hess
        .values()
        .iter()
        .map(|m| {
            let p = m.psd_part();
            if p != *m {
                changed += 1;
            }
            p
        })
        .collect();
    (SymmetricMatrixField::new(hess.grid().clone(), values), changed)
}

/// Energy contribution of one quadrant:
/// `a (v_X - v_C)^2 + 2 b (v_X - v_C)(v_Y - v_C) + c (v_Y - v_C)^2`.
#[derive(Clone, Copy, Debug)]
pub struct Quadrant {
    pub center: usize,
    pub x_arm: usize,
    pub y_arm: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadrant {
    #[inline]
    pub fn energy(&self, v: &[f64]) -> f64 {
        let dx = v[self.x_arm] - v[self.center];
        let dy = v[self.y_arm] - v[self.center];
        self.a * dx * dx + 2.0 * self.b * dx * dy + self.c * dy * dy
    }
}

/// Sparse symmetric positive semidefinite operator over the unknowns, with
/// the coupling to boundary-trace values kept separately for the lifting.
#[derive(Clone, Debug)]
pub struct DivergenceFormOperator {
    grid: Arc<Grid>,
    matrix: CsrMatrix,
    coupling: CsrMatrix,
    quadrants: Vec<Quadrant>,
}

/// Tolerance on negative cofactor eigenvalues, relative to the matrix size.
pub const PSD_TOL: f64 = 1e-9;

/// Assembles the divergence-form operator from a nodal cofactor field.
pub fn assemble(cof: &SymmetricMatrixField) -> Result<DivergenceFormOperator> {
    let grid = cof.grid().clone();
    for (node, m) in cof.values().iter().enumerate() {
        let (lo, hi) = m.eigenvalues();
        if lo < -PSD_TOL * hi.abs().max(1.0) || !lo.is_finite() {
            return Err(Error::NotPositiveSemidefinite { node, eigenvalue: lo });
        }
    }
    let n = grid.unknown_count();
    let h = grid.h();
    let phi_at = |node: usize, fallback: Sym2| if node < n { cof.get(node) } else { fallback };
    let quadrants: Vec<Quadrant> = (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            let grid = &grid;
            let pc = cof.get(u);
            (0..4).map(move |q| {
                let (sx, sy) = (q & 1, q >> 1);
                let xl = grid.link(u, 0, sx);
                let yl = grid.link(u, 1, sy);
                let arm_weight = |l: crate::grid::Link| {
                    if grid.is_unknown(l.node) {
                        0.25 * h * h
                    } else {
                        0.5 * l.dist * h
                    }
                };
                let wx = arm_weight(xl);
                let wy = arm_weight(yl);
                let wxy = (wx * wy).sqrt();
                let px = phi_at(xl.node, pc);
                let py = phi_at(yl.node, pc);
                let third = 1.0 / 3.0;
                let m11 = (pc.m11 + px.m11 + py.m11) * third;
                let m12 = (pc.m12 + px.m12 + py.m12) * third;
                let m22 = (pc.m22 + px.m22 + py.m22) * third;
                let sign = if sx == sy { 1.0 } else { -1.0 };
                Quadrant {
                    center: u,
                    x_arm: xl.node,
                    y_arm: yl.node,
                    a: wx * m11 / (xl.dist * xl.dist),
                    b: wxy * m12 * sign / (xl.dist * yl.dist),
                    c: wy * m22 / (yl.dist * yl.dist),
                }
            })
        })
        .collect();

    let inv_h2 = 1.0 / (h * h);
    let mut a_builder = SymmetricBuilder::new(n);
    let mut b_builder = TripletBuilder::new(n, grid.node_count() - n);
    for q in &quadrants {
        let nodes = [q.center, q.x_arm, q.y_arm];
        let m = [
            [q.a + 2.0 * q.b + q.c, -q.a - q.b, -q.b - q.c],
            [-q.a - q.b, q.a, q.b],
            [-q.b - q.c, q.b, q.c],
        ];
        for r in 0..3 {
            for s in r..3 {
                let (i, j) = (nodes[r], nodes[s]);
                let v = m[r][s] * inv_h2;
                match (i < n, j < n) {
                    (true, true) => a_builder.add(i, j, v),
                    (true, false) => b_builder.push(i, j - n, v),
                    (false, true) => b_builder.push(j, i - n, v),
                    (false, false) => {}
                }
            }
        }
        // the diagonal of the block is visited once per (r, r); off-diagonal
        // pairs with r < s are mirrored by the symmetric builder
    }
    Ok(DivergenceFormOperator {
        grid,
        matrix: a_builder.build(),
        coupling: b_builder.build(),
        quadrants,
    })
}

impl DivergenceFormOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Matrix over the unknowns.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Coupling block from unknowns to trace nodes.
    pub fn coupling(&self) -> &CsrMatrix {
        &self.coupling
    }

    pub fn quadrants(&self) -> &[Quadrant] {
        &self.quadrants
    }

    /// Lifting vector `-B g` for trace values `g`.
    pub fn lifting(&self, trace: &[f64]) -> Vec<f64> {
        self.coupling.mul(trace).into_iter().map(|v| -v).collect()
    }

    /// `A u + B g` for a field with trace values.
    pub fn apply(&self, field: &ScalarField) -> Vec<f64> {
        let mut y = self.matrix.mul(field.interior());
        let lift = self.coupling.mul(field.trace());
        for (a, b) in y.iter_mut().zip(lift) {
            *a += b;
        }
        y
    }

    /// Discrete `int Phi grad v . grad v` of a field including its trace values.
    pub fn energy(&self, values: &[f64]) -> f64 {
        self.quadrants.iter().map(|q| q.energy(values)).sum()
    }

    /// Energy of unknown values `w` extended by zero on the trace.
    pub fn energy_zero_trace(&self, w: &[f64]) -> f64 {
        let mut all = w.to_vec();
        all.resize(self.grid.node_count(), 0.0);
        self.energy(&all)
    }

    /// Copy of the operator in which the unknowns flagged in `fixed` are held
    /// at zero: their rows and columns become identity rows.
    pub fn with_zero_nodes(&self, fixed: &[bool]) -> DivergenceFormOperator {
        let n = self.grid.unknown_count();
        let mut b = TripletBuilder::new(n, n);
        for (i, j, v) in self.matrix.triplets() {
            if !fixed[i] && !fixed[j] {
                b.push(i, j, v);
            }
        }
        for (i, &f) in fixed.iter().enumerate() {
            if f {
                b.push(i, i, 1.0);
            }
        }
        let mut c = TripletBuilder::new(n, self.coupling.n_cols());
        for (i, j, v) in self.coupling.triplets() {
            if !fixed[i] {
                c.push(i, j, v);
            }
        }
        DivergenceFormOperator {
            grid: self.grid.clone(),
            matrix: b.build(),
            coupling: c.build(),
            quadrants: self.quadrants.clone(),
        }
    }

    /// Coordinate-format export with header `# n=<n> h=<h>`.
    pub fn write_coo<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# n={} h={}", self.matrix.n_rows(), self.grid.h())?;
        for (i, j, v) in self.matrix.triplets() {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        Ok(())
    }

    /// Smallest Ritz value after `iters` steps of inverse iteration
    /// (shifted slightly so that a singular matrix stays invertible).
    pub fn smallest_ritz_value(&self, iters: usize) -> Result<f64> {
        let n = self.matrix.n_rows();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 113) as f64 / 113.0).collect();
        let mut ritz = f64::INFINITY;
        for _ in 0..iters {
            let nx = crate::sparse::norm2(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            ritz = self.matrix.quadratic_form(&x);
            let (y, _) = crate::sparse::pcg(&self.matrix, &x, None, 1e-10, 50 * n + 100)?;
            x = y;
        }
        Ok(ritz)
    }
}

/// Max over unknowns with full one-ring axis neighbours of the central
/// difference divergence of the columns of `cof`.
pub fn divergence_free_residual(cof: &SymmetricMatrixField) -> f64 {
    let grid = cof.grid();
    let h = grid.h();
    let mut worst: f64 = 0.0;
    for u in 0..grid.unknown_count() {
        if !grid.has_full_ring(u) {
            continue;
        }
        let e = grid.link(u, 0, 0).node;
        let w = grid.link(u, 0, 1).node;
        let nn = grid.link(u, 1, 0).node;
        let s = grid.link(u, 1, 1).node;
        if ![e, w, nn, s].iter().all(|&v| grid.has_full_ring(v)) {
            continue;
        }
        let (pe, pw, pn, ps) = (cof.get(e), cof.get(w), cof.get(nn), cof.get(s));
        let col1 = (pe.m11 - pw.m11 + pn.m12 - ps.m12) / (2.0 * h);
        let col2 = (pe.m12 - pw.m12 + pn.m22 - ps.m22) / (2.0 * h);
        worst = worst.max(col1.abs()).max(col2.abs());
    }
    worst
}

/// Minimum over unknowns with `|grad v| > tol` and positive Laplacian of
/// `(Phi grad v . grad v) tr(H) / (det(H) |grad v|^2)`.
pub fn energy_lower_bound_check(cof: &SymmetricMatrixField, hess: &SymmetricMatrixField, v: &ScalarField, tol: f64) -> f64 {
    let grid = cof.grid();
    let mut worst = f64::INFINITY;
    for u in 0..grid.unknown_count() {
        let g = v.gradient(u);
        let g2 = g[0] * g[0] + g[1] * g[1];
        let hm = hess.get(u);
        let lap = hm.trace();
        let det = hm.det();
        if g2.sqrt() <= tol || !(lap > 0.0) || !(det > 0.0) {
            continue;
        }
        worst = worst.min(cof.get(u).quad(g) * lap / (det * g2));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};
    use crate::grid::discretize;

    fn grid(h: f64) -> Arc<Grid> {
        let d = build_domain(&DomainSpec::Disk { radius: 1.0 }).unwrap();
        Arc::new(discretize(&d, h).unwrap())
    }

    #[test]
    fn psd_projection() {
        let g = grid(0.25);
        let m = Sym2::new(1.0, 2.0, 1.0);
        let hess = SymmetricMatrixField::from_fn(g.clone(), |p| if p[0] > 0.0 { m } else { Sym2::IDENTITY });
        let (p, changed) = project_psd(&hess);
        assert!(changed > 0 && changed < g.unknown_count());
        // eigenvalues 3 and -1, eigenvectors (1,1) and (1,-1)
        let q = p.values().iter().find(|v| **v != Sym2::IDENTITY).unwrap();
        assert!((q.m11 - 1.5).abs() < 1e-14 && (q.m12 - 1.5).abs() < 1e-14 && (q.m22 - 1.5).abs() < 1e-14);
    }

    #[test]
    fn cofactor_examples() {
        assert_eq!(Sym2::new(3.0, 0.0, 5.0).cofactor(), Sym2::new(5.0, 0.0, 3.0));
        assert_eq!(Sym2::IDENTITY.cofactor(), Sym2::IDENTITY);
        let m = Sym2::new(2.0, 1.0, 1.0);
        let c = m.cofactor();
        assert_eq!(c, Sym2::new(1.0, -1.0, 2.0));
        // (m c) = det I
        let p11 = m.m11 * c.m11 + m.m12 * c.m12;
        let p12 = m.m11 * c.m12 + m.m12 * c.m22;
        let p22 = m.m12 * c.m12 + m.m22 * c.m22;
        assert_eq!((p11, p12, p22), (1.0, 0.0, 1.0));
    }

    #[test]
    fn identity_gives_five_point_laplacian() {
        let g = grid(1.0 / 16.0);
        let h2 = g.h() * g.h();
        let op = assemble(&SymmetricMatrixField::constant(g.clone(), Sym2::new(2.0, 0.0, 1.0))).unwrap();
        let id = assemble(&SymmetricMatrixField::constant(g.clone(), Sym2::IDENTITY)).unwrap();
        assert!(op.matrix().is_symmetric());
        for u in 0..g.unknown_count() {
            if !g.has_full_ring(u) {
                continue;
            }
            let e = g.link(u, 0, 0).node;
            let nn = g.link(u, 1, 0).node;
            assert!((id.matrix().get(u, u) * h2 - 4.0).abs() < 1e-12);
            assert!((id.matrix().get(u, e) * h2 + 1.0).abs() < 1e-12);
            assert!((op.matrix().get(u, u) * h2 - 6.0).abs() < 1e-12);
            assert!((op.matrix().get(u, e) * h2 + 2.0).abs() < 1e-12);
            assert!((op.matrix().get(u, nn) * h2 + 1.0).abs() < 1e-12);
            let ne = g.link(u, 2, 0).node;
            assert_eq!(id.matrix().get(u, ne), 0.0);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let g = grid(1.0 / 16.0);
        let cof = SymmetricMatrixField::from_fn(g.clone(), |p| Sym2::new(1.0 + p[0] * p[0], 0.3 * p[1], 1.0 + p[1] * p[1]));
        let op = assemble(&cof).unwrap();
        let ones = ScalarField::from_fn(g.clone(), |_| 1.0);
        let r = op.apply(&ones);
        assert!(r.iter().all(|v| v.abs() < 1e-9));
        // zero trace: only rows touching the boundary are non-zero
        let interior_ones: Vec<f64> = vec![1.0; g.unknown_count()];
        let ri = op.matrix().mul(&interior_ones);
        for u in 0..g.unknown_count() {
            if g.has_full_ring(u) {
                assert!(ri[u].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn indefinite_cofactor_rejected() {
        let g = grid(1.0 / 8.0);
        let mut vals = vec![Sym2::IDENTITY; g.unknown_count()];
        vals[5] = Sym2::new(1.0, 0.0, -0.5);
        match assemble(&SymmetricMatrixField::new(g.clone(), vals)) {
            Err(Error::NotPositiveSemidefinite { node, .. }) => assert_eq!(node, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn energy_matches_quadratic_form() {
        let g = grid(1.0 / 16.0);
        let cof = SymmetricMatrixField::from_fn(g.clone(), |p| Sym2::new(2.0, 0.5 * p[0], 1.0 + p[1] * p[1]));
        let op = assemble(&cof).unwrap();
        let w: Vec<f64> = (0..g.unknown_count()).map(|u| (u as f64 * 0.37).sin()).collect();
        let e1 = op.energy_zero_trace(&w);
        let e2 = g.h() * g.h() * op.matrix().quadratic_form(&w);
        assert!((e1 - e2).abs() < 1e-9 * e1.abs());
    }

    #[test]
    fn energy_lower_bound_examples() {
        let g = grid(1.0 / 16.0);
        let hess = SymmetricMatrixField::constant(g.clone(), Sym2::IDENTITY);
        let cof = cofactor(&hess);
        let v = ScalarField::from_fn(g.clone(), |p| p[0] + 0.3 * p[1]);
        assert!((energy_lower_bound_check(&cof, &hess, &v, 1e-12) - 2.0).abs() < 1e-9);
        let (a, b) = (3.0, 0.5);
        let hess = SymmetricMatrixField::constant(g.clone(), Sym2::new(a, 0.0, b));
        let v = ScalarField::from_fn(g.clone(), |p| p[0]);
        let r = energy_lower_bound_check(&cofactor(&hess), &hess, &v, 1e-12);
        assert!((r - (a + b) / a).abs() < 1e-9);
    }

    #[test]
    fn divergence_free_on_quadratics() {
        let g = grid(1.0 / 16.0);
        for m in [Sym2::IDENTITY, Sym2::new(2.0, 0.7, 1.0)] {
            let cof = cofactor(&SymmetricMatrixField::constant(g.clone(), m));
            assert_eq!(divergence_free_residual(&cof), 0.0);
        }
    }
}
