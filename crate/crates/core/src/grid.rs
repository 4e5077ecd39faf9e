//! Uniform lattice discretization of a convex domain with cut-cell links.
//!
//! Lattice points strictly inside the domain are unknowns, except those lying
//! within `SNAP_FRACTION * h` of the boundary along some stencil direction,
//! which are turned into boundary-trace nodes. Every stencil arm that leaves
//! the domain ends at a trace node placed on the boundary, so one-sided
//! differences see the true arm length (Shortley–Weller).

use crate::error::{Error, Result};
use crate::geometry::{add, norm, scale, BoundarySample, ConvexDomain, Point};

/// Stencil directions in lattice units. Pairs `(0,1)`, `(2,3)`, `(4,5)`, `(6,7)`
/// are mutually orthogonal.
pub const DIRECTIONS: [[i64; 2]; 8] = [
    [1, 0],
    [0, 1],
    [1, 1],
    [-1, 1],
    [2, 1],
    [-1, 2],
    [1, 2],
    [-2, 1],
];

/// Orthogonal direction pairs used by the wide-stencil determinant.
pub const ORTHOGONAL_PAIRS: [(usize, usize); 4] = [(0, 1), (2, 3), (4, 5), (6, 7)];

/// Lattice nodes closer than this fraction of `h` to the boundary become trace nodes.
pub const SNAP_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    BoundaryAdjacent,
    BoundaryTrace,
}

impl NodeKind {
    pub fn label(self) -> &'static str {
        match self {
            NodeKind::Interior => "interior",
            NodeKind::BoundaryAdjacent => "adjacent",
            NodeKind::BoundaryTrace => "trace",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "interior" => Some(NodeKind::Interior),
            "adjacent" => Some(NodeKind::BoundaryAdjacent),
            "trace" => Some(NodeKind::BoundaryTrace),
            _ => None,
        }
    }
}

/// One stencil arm: the node it reaches and its physical length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub node: usize,
    pub dist: f64,
}

/// Nearest boundary point of a boundary-adjacent node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub point: Point,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct Grid {
    domain: ConvexDomain,
    h: f64,
    positions: Vec<Point>,
    kinds: Vec<NodeKind>,
    n_unknown: usize,
    /// `links[u][k][s]`: arm of unknown `u` along `(-1)^s * DIRECTIONS[k]`.
    links: Vec<[[Link; 2]; 8]>,
    projections: Vec<Option<Projection>>,
    lattice_origin: [i64; 2],
    lattice_dims: [usize; 2],
    lattice_node: Vec<u32>,
    lattice_of: Vec<Option<[i64; 2]>>,
    boundary: Vec<BoundarySample>,
}

const NO_NODE: u32 = u32::MAX;

/// Discretizes `domain` with mesh width `h`, requiring `h <= rho/4`.
pub fn discretize(domain: &ConvexDomain, h: f64) -> Result<Grid> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("mesh width {h} must be positive")));
    }
    if h > domain.rho() / 4.0 {
        return Err(Error::GridTooCoarse { h, rho: domain.rho() });
    }
    build(domain, h)
}

/// Like [`discretize`] but without the resolution requirement. Intended for
/// smoke tests on very coarse grids.
pub fn discretize_coarse(domain: &ConvexDomain, h: f64) -> Result<Grid> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("mesh width {h} must be positive")));
    }
    build(domain, h)
}

fn build(domain: &ConvexDomain, h: f64) -> Result<Grid> {
    let (lo, hi) = domain.bounding_box();
    let imin = (lo[0] / h).floor() as i64 - 3;
    let jmin = (lo[1] / h).floor() as i64 - 3;
    let imax = (hi[0] / h).ceil() as i64 + 3;
    let jmax = (hi[1] / h).ceil() as i64 + 3;
    let nx = (imax - imin + 1) as usize;
    let ny = (jmax - jmin + 1) as usize;
    let lat = |i: i64, j: i64| -> Option<usize> {
        if i < imin || i > imax || j < jmin || j > jmax {
            None
        } else {
            Some((j - jmin) as usize * nx + (i - imin) as usize)
        }
    };
    let pos = |i: i64, j: i64| [i as f64 * h, j as f64 * h];

    let mut inside = vec![false; nx * ny];
    let mut candidates = Vec::new();
    for j in jmin..=jmax {
        for i in imin..=imax {
            if domain.contains(pos(i, j)) {
                inside[lat(i, j).unwrap()] = true;
                candidates.push([i, j]);
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::InvalidDomain(format!("no lattice node of width {h} inside the domain")));
    }
    let is_inside = |i: i64, j: i64| lat(i, j).map(|l| inside[l]).unwrap_or(false);

    let arms = |c: [i64; 2]| {
        DIRECTIONS.iter().flat_map(move |d| {
            [[c[0] + d[0], c[1] + d[1]], [c[0] - d[0], c[1] - d[1]]]
        })
    };
    let snapped: Vec<bool> = candidates
        .iter()
        .map(|&c| {
            let p = pos(c[0], c[1]);
            arms(c).any(|nb| {
                if is_inside(nb[0], nb[1]) {
                    return false;
                }
                let q = pos(nb[0], nb[1]);
                let t = domain.crossing(p, q);
                t * norm([(nb[0] - c[0]) as f64, (nb[1] - c[1]) as f64]) < SNAP_FRACTION
            })
        })
        .collect();

    let mut lattice_node = vec![NO_NODE; nx * ny];
    let mut positions = Vec::new();
    let mut lattice_of = Vec::new();
    for (c, &s) in candidates.iter().zip(&snapped) {
        if !s {
            lattice_node[lat(c[0], c[1]).unwrap()] = positions.len() as u32;
            positions.push(pos(c[0], c[1]));
            lattice_of.push(Some(*c));
        }
    }
    let n_unknown = positions.len();
    if n_unknown == 0 {
        return Err(Error::InvalidDomain(format!("no interior unknowns at mesh width {h}")));
    }
    for (c, &s) in candidates.iter().zip(&snapped) {
        if s {
            lattice_node[lat(c[0], c[1]).unwrap()] = positions.len() as u32;
            positions.push(pos(c[0], c[1]));
            lattice_of.push(Some(*c));
        }
    }

    let dummy = Link { node: 0, dist: 0.0 };
    let mut links = vec![[[dummy; 2]; 8]; n_unknown];
    for u in 0..n_unknown {
        let c = lattice_of[u].unwrap();
        let p = positions[u];
        for (k, d) in DIRECTIONS.iter().enumerate() {
            for (s, sign) in [1i64, -1].into_iter().enumerate() {
                let nb = [c[0] + sign * d[0], c[1] + sign * d[1]];
                let full = h * norm([d[0] as f64, d[1] as f64]);
                links[u][k][s] = if is_inside(nb[0], nb[1]) {
                    Link {
                        node: lattice_node[lat(nb[0], nb[1]).unwrap()] as usize,
                        dist: full,
                    }
                } else {
                    let q = pos(nb[0], nb[1]);
                    let t = domain.crossing(p, q);
                    let id = positions.len();
                    positions.push(add(p, scale([(sign * d[0]) as f64, (sign * d[1]) as f64], t * h)));
                    lattice_of.push(None);
                    Link { node: id, dist: t * full }
                };
            }
        }
    }

    let mut kinds = vec![NodeKind::BoundaryTrace; positions.len()];
    let mut projections = vec![None; n_unknown];
    for u in 0..n_unknown {
        let near = (0..4).any(|k| links[u][k].iter().any(|l| l.node >= n_unknown));
        if near {
            kinds[u] = NodeKind::BoundaryAdjacent;
            let q = domain.project(positions[u]);
            projections[u] = Some(Projection {
                point: q,
                distance: norm([q[0] - positions[u][0], q[1] - positions[u][1]]),
            });
        } else {
            kinds[u] = NodeKind::Interior;
        }
    }

    let perimeter = domain.perimeter();
    let n_boundary = 256usize.max((8.0 * perimeter / h).ceil() as usize);
    let boundary = domain.boundary_samples(n_boundary);

    Ok(Grid {
        domain: domain.clone(),
        h,
        positions,
        kinds,
        n_unknown,
        links,
        projections,
        lattice_origin: [imin, jmin],
        lattice_dims: [nx, ny],
        lattice_node,
        lattice_of,
        boundary,
    })
}

impl Grid {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    /// Number of unknowns (nodes strictly inside, not snapped to the boundary).
    pub fn unknown_count(&self) -> usize {
        self.n_unknown
    }

    /// Total number of nodes, unknowns first then boundary-trace nodes.
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn trace_nodes(&self) -> std::ops::Range<usize> {
        self.n_unknown..self.positions.len()
    }

    pub fn is_unknown(&self, node: usize) -> bool {
        node < self.n_unknown
    }

    pub fn position(&self, node: usize) -> Point {
        self.positions[node]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    /// Arm of unknown `u` along direction `k`, sign `s` (0 positive, 1 negative).
    pub fn link(&self, u: usize, k: usize, s: usize) -> Link {
        self.links[u][k][s]
    }

    pub fn links(&self, u: usize) -> &[[Link; 2]; 8] {
        &self.links[u]
    }

    pub fn projection(&self, u: usize) -> Option<Projection> {
        self.projections[u]
    }

    /// Boundary curve at the grid's resolution.
    pub fn boundary(&self) -> &[BoundarySample] {
        &self.boundary
    }

    pub fn lattice_coords(&self, node: usize) -> Option<[i64; 2]> {
        self.lattice_of[node]
    }

    /// Node sitting on lattice point `(i, j)`, if any.
    pub fn node_at(&self, i: i64, j: i64) -> Option<usize> {
        let di = i - self.lattice_origin[0];
        let dj = j - self.lattice_origin[1];
        if di < 0 || dj < 0 || di as usize >= self.lattice_dims[0] || dj as usize >= self.lattice_dims[1] {
            return None;
        }
        let v = self.lattice_node[dj as usize * self.lattice_dims[0] + di as usize];
        (v != NO_NODE).then_some(v as usize)
    }

    /// Unknown whose position is closest to `p`.
    pub fn nearest_unknown(&self, p: Point) -> usize {
        let i = (p[0] / self.h).round() as i64;
        let j = (p[1] / self.h).round() as i64;
        if let Some(n) = self.node_at(i, j).filter(|&n| self.is_unknown(n)) {
            return n;
        }
        (0..self.n_unknown)
            .min_by(|&a, &b| {
                let da = norm([self.positions[a][0] - p[0], self.positions[a][1] - p[1]]);
                let db = norm([self.positions[b][0] - p[0], self.positions[b][1] - p[1]]);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap()
    }

    /// True when all eight one-ring neighbours of `u` are unknowns.
    pub fn has_full_ring(&self, u: usize) -> bool {
        self.kinds[u] == NodeKind::Interior
    }

    /// True when every arm of the wide stencil ends at an unknown.
    pub fn has_full_stencil(&self, u: usize) -> bool {
        self.links[u].iter().all(|pair| pair.iter().all(|l| l.node < self.n_unknown))
    }

    /// Cell area used as quadrature weight for unknowns.
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Discrete measure of the unknown set.
    pub fn unknown_area(&self) -> f64 {
        self.n_unknown as f64 * self.h * self.h
    }

    /// Nodal gradient at unknown `u`: mean of the one-sided axis differences.
    pub fn gradient(&self, values: &[f64], u: usize) -> Point {
        let c = values[u];
        let mut g = [0.0; 2];
        for (k, gk) in g.iter_mut().enumerate() {
            let fwd = self.links[u][k][0];
            let bwd = self.links[u][k][1];
            *gk = 0.5 * ((values[fwd.node] - c) / fwd.dist + (c - values[bwd.node]) / bwd.dist);
        }
        g
    }

    /// Writes the node table `x y mask value`.
    pub fn write_dump<W: std::io::Write>(&self, values: &[f64], mut out: W) -> Result<()> {
        writeln!(out, "# h={} domain={}", self.h, self.domain.kind().name())?;
        for (n, p) in self.positions.iter().enumerate() {
            writeln!(out, "{} {} {} {}", p[0], p[1], self.kinds[n].label(), values[n])?;
        }
        Ok(())
    }

    /// Reads values for this grid from a node table. Lattice rows are matched
    /// by coordinates; every unknown must be present. Trace nodes missing from
    /// the table get the value of the nearest listed row.
    pub fn read_dump(&self, text: &str) -> Result<Vec<f64>> {
        let mut values = vec![f64::NAN; self.node_count()];
        let mut rows: Vec<(Point, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected `x y mask value`", lineno + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number `{s}`", lineno + 1)))
            };
            let p = [num(parts[0])?, num(parts[1])?];
            let v = num(parts[3])?;
            rows.push((p, v));
            let (fi, fj) = (p[0] / self.h, p[1] / self.h);
            let (i, j) = (fi.round(), fj.round());
            if (fi - i).abs() < 1e-6 && (fj - j).abs() < 1e-6 {
                if let Some(n) = self.node_at(i as i64, j as i64) {
                    values[n] = v;
                }
            }
        }
        if let Some(u) = (0..self.n_unknown).find(|&u| values[u].is_nan()) {
            let p = self.positions[u];
            return Err(Error::Parse(format!("node table has no row for node at ({}, {})", p[0], p[1])));
        }
        for n in self.trace_nodes() {
            if values[n].is_nan() {
                let p = self.positions[n];
                let best = rows
                    .iter()
                    .min_by(|a, b| {
                        let da = norm([a.0[0] - p[0], a.0[1] - p[1]]);
                        let db = norm([b.0[0] - p[0], b.0[1] - p[1]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|r| r.1)
                    .unwrap_or(0.0);
                values[n] = best;
            }
        }
        Ok(values)
    }
}
