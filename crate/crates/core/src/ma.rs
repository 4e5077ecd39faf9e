//! Monotone wide-stencil solver for `det D^2 phi = f` with Dirichlet data,
//! discrete Hessians and the `W^{2,1+eps}` norm.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, Sym2, SymmetricMatrixField};
use crate::grid::{Grid, DIRECTIONS, ORTHOGONAL_PAIRS};
use crate::sparse::{bicgstab, max_abs, TripletBuilder};

/// Bounds `0 < lambda <= det D^2 phi <= upper`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinchingBounds {
    pub lambda: f64,
    pub upper: f64,
}

impl PinchingBounds {
    pub fn new(lambda: f64, upper: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= upper && upper.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pinching bounds need 0 < lambda <= Lambda, got lambda = {lambda}, Lambda = {upper}"
            )));
        }
        Ok(PinchingBounds { lambda, upper })
    }

    pub fn ratio(&self) -> f64 {
        self.upper / self.lambda
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MaOptions {
    /// Residual tolerance in the max norm.
    pub tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Regularization threshold of the directional product.
    pub delta: f64,
    /// Relative tolerance of the inner linear solves.
    pub linear_tol: f64,
}

impl Default for MaOptions {
    fn default() -> Self {
        MaOptions {
            tol: 1e-8,
            max_newton: 60,
            max_halvings: 20,
            delta: 1e-6,
            linear_tol: 1e-11,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MaSolution {
    pub phi: ScalarField,
    pub iterations: usize,
    /// Max-norm residual before each Newton step and at the end.
    pub history: Vec<f64>,
}

impl MaSolution {
    pub fn residual(&self) -> f64 {
        *self.history.last().unwrap_or(&f64::NAN)
    }
}

/// Coefficients of the three-point second difference along `(k, ·)` at `u`:
/// `(c_plus, c_center, c_minus)` with the two arm lengths from the grid.
#[inline]
fn second_diff_coeffs(grid: &Grid, u: usize, k: usize) -> (usize, usize, f64, f64, f64) {
    let p = grid.link(u, k, 0);
    let m = grid.link(u, k, 1);
    let s = p.dist + m.dist;
    let cp = 2.0 / (p.dist * s);
    let cm = 2.0 / (m.dist * s);
    (p.node, m.node, cp, -(cp + cm), cm)
}

/// Second derivative along unit direction `DIRECTIONS[k]` at unknown `u`.
pub fn directional_second_difference(grid: &Grid, values: &[f64], u: usize, k: usize) -> f64 {
    let (p, m, cp, c0, cm) = second_diff_coeffs(grid, u, k);
    cp * values[p] + c0 * values[u] + cm * values[m]
}

/// Regularized product `max(a,d) max(b,d) + min(a,d) + min(b,d) - 2d`.
#[inline]
fn reg_product(a: f64, b: f64, d: f64) -> f64 {
    a.max(d) * b.max(d) + a.min(d) + b.min(d) - 2.0 * d
}

#[inline]
fn reg_product_grad(a: f64, b: f64, d: f64) -> (f64, f64) {
    let da = if a >= d { b.max(d) } else { 1.0 };
    let db = if b >= d { a.max(d) } else { 1.0 };
    (da, db)
}

/// Discrete Monge–Ampère operator at `u` and the index of the minimizing pair.
pub fn ma_operator_at(grid: &Grid, values: &[f64], u: usize, delta: f64) -> (f64, usize) {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for (q, &(k, l)) in ORTHOGONAL_PAIRS.iter().enumerate() {
        let a = directional_second_difference(grid, values, u, k);
        let b = directional_second_difference(grid, values, u, l);
        let v = reg_product(a, b, delta);
        if v < best {
            best = v;
            arg = q;
        }
    }
    (best, arg)
}

fn residual(grid: &Grid, values: &[f64], f: &[f64], delta: f64) -> Vec<f64> {
    (0..grid.unknown_count())
        .into_par_iter()
        .map(|u| ma_operator_at(grid, values, u, delta).0 - f[u])
        .collect()
}

/// Checks `lambda <= f <= Lambda` at every unknown.
pub fn check_pinching(f: &[f64], bounds: &PinchingBounds) -> Result<()> {
    for (node, &value) in f.iter().enumerate() {
        if !(value >= bounds.lambda && value <= bounds.upper) {
            return Err(Error::PinchingViolated {
                node,
                value,
                lambda: bounds.lambda,
                upper: bounds.upper,
            });
        }
    }
    Ok(())
}

/// Solves `Delta phi = rhs` with the cut-aware five-point Laplacian and the
/// given trace values.
pub fn solve_poisson(grid: &Arc<Grid>, rhs: &[f64], boundary: &[f64], tol: f64) -> Result<ScalarField> {
    let n = grid.unknown_count();
    let mut b = rhs.to_vec();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|u| {
            let mut row = Vec::with_capacity(5);
            let mut diag = 0.0;
            for k in 0..2 {
                let (p, m, cp, c0, cm) = second_diff_coeffs(grid, u, k);
                diag += c0;
                for (node, c) in [(p, cp), (m, cm)] {
                    if grid.is_unknown(node) {
                        row.push((node, c));
                    }
                }
            }
            row.push((u, diag));
            row
        })
        .collect();
    for (u, bu) in b.iter_mut().enumerate() {
        for k in 0..2 {
            let (p, m, cp, _, cm) = second_diff_coeffs(grid, u, k);
            for (node, c) in [(p, cp), (m, cm)] {
                if !grid.is_unknown(node) {
                    *bu -= c * boundary[node - n];
                }
            }
        }
    }
    let a = TripletBuilder::from_rows(n, rows).build();
    let (x, _) = bicgstab(&a, &b, tol, 20 * n + 100)?;
    Ok(ScalarField::from_parts(grid.clone(), &x, boundary))
}

/// Solves the discrete Monge–Ampère Dirichlet problem. `f` holds one value per
/// unknown, `boundary` one value per trace node.
pub fn solve_ma(
    grid: &Arc<Grid>,
    f: &[f64],
    boundary: &[f64],
    bounds: &PinchingBounds,
    opts: &MaOptions,
) -> Result<MaSolution> {
    solve_ma_from(grid, f, boundary, bounds, opts, None)
}

/// [`solve_ma`] starting from `init` (unknown values) instead of the Poisson guess.
pub fn solve_ma_from(
    grid: &Arc<Grid>,
    f: &[f64],
    boundary: &[f64],
    bounds: &PinchingBounds,
    opts: &MaOptions,
    init: Option<&[f64]>,
) -> Result<MaSolution> {
    let n = grid.unknown_count();
    if f.len() != n || boundary.len() != grid.node_count() - n {
        return Err(Error::InvalidArgument("f or boundary data does not match the grid".into()));
    }
    check_pinching(f, bounds)?;
    let mut values = match init {
        Some(v) => {
            let mut all = v.to_vec();
            all.extend_from_slice(boundary);
            all
        }
        None => {
            let rhs: Vec<f64> = f.iter().map(|v| 2.0 * v.sqrt()).collect();
            solve_poisson(grid, &rhs, boundary, 1e-12)?.into_values()
        }
    };
    let delta = opts.delta;
    let mut res = residual(grid, &values, f, delta);
    let mut rnorm = max_abs(&res);
    let mut history = vec![rnorm];
    let mut it = 0;
    while rnorm > opts.tol {
        if it >= opts.max_newton {
            return Err(Error::NewtonDiverged {
                iterations: it,
                history,
            });
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|u| {
                let (_, q) = ma_operator_at(grid, &values, u, delta);
                let (k, l) = ORTHOGONAL_PAIRS[q];
                let a = directional_second_difference(grid, &values, u, k);
                let b = directional_second_difference(grid, &values, u, l);
                let (da, db) = reg_product_grad(a, b, delta);
                let mut row = Vec::with_capacity(5);
                let mut diag = 0.0;
                for (dir, w) in [(k, da), (l, db)] {
                    let (p, m, cp, c0, cm) = second_diff_coeffs(grid, u, dir);
                    diag += w * c0;
                    for (node, c) in [(p, cp), (m, cm)] {
                        if grid.is_unknown(node) {
                            row.push((node, -w * c));
                        }
                    }
                }
                row.push((u, -diag));
                row
            })
            .collect();
        // -J dx = F
        let neg_j = TripletBuilder::from_rows(n, rows).build();
        let (step, _) = bicgstab(&neg_j, &res, opts.linear_tol, 20 * n + 100)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = values.clone();
            for u in 0..n {
                trial[u] += t * step[u];
            }
            let trial_res = residual(grid, &trial, f, delta);
            let trial_norm = max_abs(&trial_res);
            if trial_norm < rnorm {
                values = trial;
                res = trial_res;
                rnorm = trial_norm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        it += 1;
        history.push(rnorm);
        if !accepted {
            return Err(Error::NewtonDiverged {
                iterations: it,
                history,
            });
        }
    }
    // stencil convexity of the converged solution
    for u in 0..n {
        for k in 0..DIRECTIONS.len() {
            let v = directional_second_difference(grid, &values, u, k);
            if v < -opts.tol {
                return Err(Error::NotConvex { node: u, value: v });
            }
        }
    }
    Ok(MaSolution {
        phi: ScalarField::new(grid.clone(), values),
        iterations: it,
        history,
    })
}

/// Discrete Hessian at every unknown: axis second differences on the
/// diagonal, half the difference of the two diagonal-direction second
/// differences off the diagonal (the centred cross difference away from the
/// boundary).
pub fn hessian(phi: &ScalarField) -> SymmetricMatrixField {
    let grid = phi.grid();
    let v = phi.values();
    let values = (0..grid.unknown_count())
        .map(|u| {
            let m11 = directional_second_difference(grid, v, u, 0);
            let m22 = directional_second_difference(grid, v, u, 1);
            let d_diag = directional_second_difference(grid, v, u, 2);
            let d_anti = directional_second_difference(grid, v, u, 3);
            Sym2::new(m11, 0.5 * (d_diag - d_anti), m22)
        })
        .collect();
    SymmetricMatrixField::new(grid.clone(), values)
}

/// `h^2 * sum |H|_F^{1+eps}` over unknowns.
pub fn w21e_norm(hess: &SymmetricMatrixField, epsilon: f64) -> f64 {
    let h = hess.grid().h();
    h * h
        * hess
            .values()
            .iter()
            .map(|m| m.frobenius().powf(1.0 + epsilon))
            .sum::<f64>()
}

/// Largest `eps` in the ladder whose norms at `h` and `h/2` differ by less
/// than `rel_tol` (relative), together with all smaller ladder entries.
pub fn empirical_epsilon_star(ladder: &[f64], coarse: &[f64], fine: &[f64], rel_tol: f64) -> Option<f64> {
    let mut best = None;
    for ((&e, &a), &b) in ladder.iter().zip(coarse).zip(fine) {
        let stable = a.is_finite() && b.is_finite() && (b - a).abs() <= rel_tol * a.abs().max(b.abs());
        if !stable {
            break;
        }
        best = Some(e);
    }
    best
}

/// Discrete wide-stencil Monge–Ampère value at every unknown.
pub fn ma_values(phi: &ScalarField, delta: f64) -> Vec<f64> {
    let grid = phi.grid();
    (0..grid.unknown_count())
        .map(|u| ma_operator_at(grid, phi.values(), u, delta).0)
        .collect()
}
