//! Sections and Hölder exponent measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{dot, norm, sub, Point};
use crate::green::linear_fit;

/// Sublevel set of `phi` minus its tangent plane at `x`.
#[derive(Clone, Debug)]
pub struct Section {
    pub center: usize,
    pub height: f64,
    /// Unknown nodes of the section, in increasing order.
    pub nodes: Vec<usize>,
    /// No excluded unknown lies inside the convex hull of the section farther
    /// than `h` from the hull boundary.
    pub discretely_convex: bool,
}

/// Unknowns `y` with `phi(y) < phi(x) + gradient . (y - x) + hgt`.
pub fn section(phi: &ScalarField, gradient: Point, x: usize, hgt: f64) -> Result<Section> {
    let grid = phi.grid();
    if !grid.is_unknown(x) {
        return Err(Error::InvalidArgument(format!("section center {x} is not an unknown")));
    }
    if !(hgt > 0.0) {
        return Err(Error::InvalidArgument(format!("section height {hgt} must be positive")));
    }
    let v = phi.values();
    let px = grid.position(x);
    let inside = |y: usize| v[y] < v[x] + dot(gradient, sub(grid.position(y), px)) + hgt;
    let nodes: Vec<usize> = (0..grid.unknown_count()).filter(|&y| inside(y)).collect();
    if nodes.is_empty() {
        return Err(Error::InvalidArgument(format!("section of height {hgt} is empty")));
    }
    let hull = convex_hull(&nodes.iter().map(|&y| grid.position(y)).collect::<Vec<_>>());
    let h = grid.h();
    let discretely_convex = (0..grid.unknown_count())
        .filter(|&y| !inside(y))
        .all(|y| hull_depth(&hull, grid.position(y)) <= h);
    Ok(Section {
        center: x,
        height: hgt,
        nodes,
        discretely_convex,
    })
}

/// Counter-clockwise convex hull (monotone chain).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * p.len());
    for &pt in p.iter().chain(p.iter().rev().skip(1)) {
        // second pass walks back over the points for the upper chain
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0.0 {
            hull.pop();
        }
        hull.push(pt);
    }
    hull.pop();
    hull
}

/// Distance from `q` to the hull boundary when `q` is inside, negative outside.
fn hull_depth(hull: &[Point], q: Point) -> f64 {
    let m = hull.len();
    if m < 3 {
        return -1.0;
    }
    let mut depth = f64::INFINITY;
    for i in 0..m {
        let a = hull[i];
        let b = hull[(i + 1) % m];
        let e = sub(b, a);
        let len = norm(e);
        if len == 0.0 {
            continue;
        }
        let inward = [-e[1] / len, e[0] / len];
        depth = depth.min(dot(inward, sub(q, a)));
    }
    depth
}

/// How node pairs are drawn for a Hölder fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairPolicy {
    /// Random pairs of region nodes from a seeded ChaCha8 stream.
    Uniform { pairs: usize, seed: u64 },
    /// Every region node paired with one anchor point.
    Anchored { anchor: Point, value: f64 },
}

impl Default for PairPolicy {
    fn default() -> Self {
        PairPolicy::Uniform { pairs: 20_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderEstimate {
    pub beta: f64,
    pub constant: f64,
    pub residual: f64,
    pub region: String,
    pub pairs: usize,
    pub constant_field: bool,
}

/// Pairs below this value of `|u(x) - u(y)|` are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-9;
/// Pairs closer than this many mesh widths are excluded.
pub const MIN_PAIR_DISTANCE: f64 = 3.0;
const BINS: usize = 16;

/// Fits `|u(x) - u(y)| <= C |x - y|^beta` by regressing the logarithm of the
/// per-bin maximum difference on the log distance (16 logarithmic bins).
pub fn fit_pairs(samples: &[(f64, f64)], region: &str) -> Result<HolderEstimate> {
    let kept: Vec<(f64, f64)> = samples.iter().cloned().filter(|&(_, du)| du > NOISE_FLOOR).collect();
    if kept.is_empty() {
        return Ok(HolderEstimate {
            beta: 1.0,
            constant: 0.0,
            residual: 0.0,
            region: region.to_string(),
            pairs: samples.len(),
            constant_field: true,
        });
    }
    let dmin = kept.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let dmax = kept.iter().map(|p| p.0).fold(0.0, f64::max);
    let mut best: Vec<Option<(f64, f64)>> = vec![None; BINS];
    let span = (dmax / dmin).ln();
    for &(d, du) in &kept {
        let b = if span > 0.0 {
            (((d / dmin).ln() / span) * BINS as f64).floor().min(BINS as f64 - 1.0) as usize
        } else {
            0
        };
        if best[b].is_none_or(|(_, m)| du > m) {
            best[b] = Some((d, du));
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = best.iter().flatten().map(|&(d, m)| (d.ln(), m.ln())).unzip();
    if xs.len() < 3 {
        return Err(Error::FitRejected(format!("only {} populated distance bins", xs.len())));
    }
    let (a, slope, residual) = linear_fit(&xs, &ys);
    let beta = slope.clamp(f64::MIN_POSITIVE, 1.0);
    Ok(HolderEstimate {
        beta,
        constant: a.exp(),
        residual,
        region: region.to_string(),
        pairs: kept.len(),
        constant_field: false,
    })
}

/// Hölder fit of `u` over the unknown nodes in `region`.
pub fn holder_fit(u: &ScalarField, region: &[usize], policy: PairPolicy, label: &str) -> Result<HolderEstimate> {
    if region.len() < 100 {
        return Err(Error::InvalidArgument(format!("region has {} nodes, need at least 100", region.len())));
    }
    let grid = u.grid();
    let v = u.values();
    let dcut = MIN_PAIR_DISTANCE * grid.h();
    let mut samples = Vec::new();
    match policy {
        PairPolicy::Uniform { pairs, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..pairs {
                let a = region[rng.gen_range(0..region.len())];
                let b = region[rng.gen_range(0..region.len())];
                let d = norm(sub(grid.position(a), grid.position(b)));
                if d >= dcut {
                    samples.push((d, (v[a] - v[b]).abs()));
                }
            }
        }
        PairPolicy::Anchored { anchor, value } => {
            for &a in region {
                let d = norm(sub(grid.position(a), anchor));
                if d >= dcut {
                    samples.push((d, (v[a] - value).abs()));
                }
            }
        }
    }
    fit_pairs(&samples, label)
}

/// Fit of `|u(x) - u(x0)|` against `|x - x0|` over unknowns in `B_delta(x0)`,
/// with `x0` a boundary-trace node.
pub fn boundary_holder_fit(u: &ScalarField, x0: usize, delta: f64) -> Result<HolderEstimate> {
    let grid = u.grid();
    if grid.is_unknown(x0) {
        return Err(Error::InvalidArgument(format!("node {x0} is not on the boundary trace")));
    }
    let p0 = grid.position(x0);
    let v = u.values();
    let dcut = MIN_PAIR_DISTANCE * grid.h();
    let samples: Vec<(f64, f64)> = (0..grid.unknown_count())
        .filter_map(|a| {
            let d = norm(sub(grid.position(a), p0));
            (d < delta && d >= dcut).then(|| (d, (v[a] - v[x0]).abs()))
        })
        .collect();
    if samples.len() < 20 {
        return Err(Error::InvalidArgument(format!(
            "only {} nodes in the ball of radius {delta}",
            samples.len()
        )));
    }
    fit_pairs(&samples, &format!("boundary({:.4},{:.4})", p0[0], p0[1]))
}

/// Boundary exponent floor `a0 / (a0 + 6)` with `a0 = min(alpha, kappa2)`.
pub fn boundary_floor(alpha: f64, kappa2: f64) -> f64 {
    let a0 = alpha.min(kappa2);
    a0 / (a0 + 6.0)
}
