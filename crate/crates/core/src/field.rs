//! Nodal fields on a [`Grid`].

use std::sync::Arc;

use crate::geometry::Point;
use crate::grid::Grid;

/// One real value per node (unknowns and boundary-trace nodes).
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.node_count(), "field size does not match grid");
        ScalarField { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        ScalarField::new(grid, vec![0.0; n])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let values = grid.positions().iter().map(|&p| f(p)).collect();
        ScalarField { grid, values }
    }

    /// Unknown values from `interior`, trace values from `trace`.
    pub fn from_parts(grid: Arc<Grid>, interior: &[f64], trace: &[f64]) -> Self {
        assert_eq!(interior.len(), grid.unknown_count());
        assert_eq!(trace.len(), grid.node_count() - grid.unknown_count());
        let mut values = Vec::with_capacity(grid.node_count());
        values.extend_from_slice(interior);
        values.extend_from_slice(trace);
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[..self.grid.unknown_count()]
    }

    pub fn trace(&self) -> &[f64] {
        &self.values[self.grid.unknown_count()..]
    }

    pub fn gradient(&self, u: usize) -> Point {
        self.grid.gradient(&self.values, u)
    }

    /// Max absolute difference over unknowns.
    pub fn max_diff_interior(&self, other: &ScalarField) -> f64 {
        self.interior()
            .iter()
            .zip(other.interior())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Per-node vector field.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<Grid>,
    values: Vec<Point>,
}

impl VectorField {
    pub fn new(grid: Arc<Grid>, values: Vec<Point>) -> Self {
        assert_eq!(values.len(), grid.node_count(), "field size does not match grid");
        VectorField { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> Point) -> Self {
        let values = grid.positions().iter().map(|&p| f(p)).collect();
        VectorField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    /// Max over nodes of the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0, f64::max)
    }
}

/// A symmetric 2x2 matrix `[[m11, m12], [m12, m22]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Sym2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        m11: 1.0,
        m12: 0.0,
        m22: 1.0,
    };

    pub fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Sym2 { m11, m12, m22 }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn frobenius(&self) -> f64 {
        (self.m11 * self.m11 + 2.0 * self.m12 * self.m12 + self.m22 * self.m22).sqrt()
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * self.trace();
        let r = (0.5 * (self.m11 - self.m22)).hypot(self.m12);
        (mean - r, mean + r)
    }

    /// Nearest positive semidefinite matrix in the Frobenius norm (negative
    /// eigenvalue set to zero).
    pub fn psd_part(&self) -> Sym2 {
        let (lo, hi) = self.eigenvalues();
        if lo >= 0.0 {
            return *self;
        }
        if hi <= 0.0 {
            return Sym2::default();
        }
        let a = [self.m12, hi - self.m11];
        let b = [hi - self.m22, self.m12];
        let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
        let n2 = v[0] * v[0] + v[1] * v[1];
        Sym2::new(hi * v[0] * v[0] / n2, hi * v[0] * v[1] / n2, hi * v[1] * v[1] / n2)
    }

    pub fn cofactor(&self) -> Sym2 {
        Sym2 {
            m11: self.m22,
            m12: -self.m12,
            m22: self.m11,
        }
    }

    pub fn apply(&self, v: Point) -> Point {
        [self.m11 * v[0] + self.m12 * v[1], self.m12 * v[0] + self.m22 * v[1]]
    }

    pub fn quad(&self, v: Point) -> f64 {
        self.m11 * v[0] * v[0] + 2.0 * self.m12 * v[0] * v[1] + self.m22 * v[1] * v[1]
    }

    pub fn scaled(&self, s: f64) -> Sym2 {
        Sym2 {
            m11: self.m11 * s,
            m12: self.m12 * s,
            m22: self.m22 * s,
        }
    }
}

/// Per-unknown symmetric matrices (Hessians, cofactors).
#[derive(Clone, Debug)]
pub struct SymmetricMatrixField {
    grid: Arc<Grid>,
    values: Vec<Sym2>,
}

impl SymmetricMatrixField {
    /// `values` has one entry per unknown.
    pub fn new(grid: Arc<Grid>, values: Vec<Sym2>) -> Self {
        assert_eq!(values.len(), grid.unknown_count(), "field size does not match grid");
        SymmetricMatrixField { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, m: Sym2) -> Self {
        let n = grid.unknown_count();
        SymmetricMatrixField::new(grid, vec![m; n])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> Sym2) -> Self {
        let values = (0..grid.unknown_count()).map(|u| f(grid.position(u))).collect();
        SymmetricMatrixField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Sym2] {
        &self.values
    }

    pub fn get(&self, u: usize) -> Sym2 {
        self.values[u]
    }
}
