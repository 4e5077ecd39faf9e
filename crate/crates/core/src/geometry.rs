//! Convex domains and the structural checks on them.
//!
//! A [`ConvexDomain`] knows its exact shape (used to locate boundary
//! crossings and projections) and carries a closed curve of boundary
//! samples with outward normals. The structural constant `rho` is always
//! computed from the shape, never taken from input.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A point or vector in the plane.
pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn unit(a: Point) -> Point {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        [0.0, 0.0]
    }
}

/// User-facing description of a domain.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// Convex polygon whose corners are rounded with the given radius.
    SmoothedPolygon {
        vertices: Vec<Point>,
        corner_radius: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Disk,
    Ellipse,
    SmoothedPolygon,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Disk => "disk",
            DomainKind::Ellipse => "ellipse",
            DomainKind::SmoothedPolygon => "smoothed-polygon",
        }
    }
}

/// A boundary sample: a point on the curve and the outward unit normal there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySample {
    pub point: Point,
    pub normal: Point,
}

#[derive(Clone, Debug)]
enum Shape {
    Disk {
        r: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Inner polygon (counter-clockwise) dilated by a disk of radius `r`.
    Rounded {
        inner: Vec<Point>,
        normals: Vec<Point>,
        r: f64,
    },
}

impl Shape {
    fn level(&self, p: Point) -> f64 {
        match self {
            Shape::Disk { r } => norm(p) - r,
            Shape::Ellipse { a, b } => {
                let s = (p[0] / a).hypot(p[1] / b);
                (s - 1.0) * a.min(*b)
            }
            Shape::Rounded { inner, normals, r } => polygon_signed_distance(inner, normals, p) - r,
        }
    }

    fn project(&self, p: Point) -> Point {
        match self {
            Shape::Disk { r } => {
                let n = norm(p);
                if n == 0.0 {
                    [*r, 0.0]
                } else {
                    scale(p, r / n)
                }
            }
            Shape::Ellipse { a, b } => project_ellipse(*a, *b, p),
            Shape::Rounded { inner, normals, r } => {
                let inside = normals
                    .iter()
                    .zip(inner)
                    .all(|(n, v)| dot(*n, sub(p, *v)) <= 0.0);
                if inside {
                    // nearest supporting line, pushed outward by r
                    let (i, d) = normals
                        .iter()
                        .zip(inner)
                        .map(|(n, v)| -dot(*n, sub(p, *v)))
                        .enumerate()
                        .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
                    add(p, scale(normals[i], d + r))
                } else {
                    let q = closest_on_polygon(inner, p);
                    add(q, scale(unit(sub(p, q)), *r))
                }
            }
        }
    }

    /// Outward unit normal at a point on (or very near) the boundary.
    fn normal(&self, p: Point) -> Point {
        match self {
            Shape::Disk { .. } => unit(p),
            Shape::Ellipse { a, b } => unit([p[0] / (a * a), p[1] / (b * b)]),
            Shape::Rounded { inner, .. } => {
                let q = closest_on_polygon(inner, p);
                unit(sub(p, q))
            }
        }
    }

    fn sample_boundary(&self, n: usize) -> Vec<BoundarySample> {
        match self {
            Shape::Disk { r } => (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    let normal = [t.cos(), t.sin()];
                    BoundarySample {
                        point: scale(normal, *r),
                        normal,
                    }
                })
                .collect(),
            Shape::Ellipse { a, b } => {
                const FINE: usize = 16384;
                let mut cum = Vec::with_capacity(FINE + 1);
                cum.push(0.0);
                let pt = |t: f64| [a * t.cos(), b * t.sin()];
                for k in 0..FINE {
                    let t0 = 2.0 * PI * k as f64 / FINE as f64;
                    let t1 = 2.0 * PI * (k + 1) as f64 / FINE as f64;
                    let prev = *cum.last().unwrap();
                    cum.push(prev + norm(sub(pt(t1), pt(t0))));
                }
                let total = cum[FINE];
                let mut out = Vec::with_capacity(n);
                let mut seg = 0;
                for k in 0..n {
                    let s = total * k as f64 / n as f64;
                    while cum[seg + 1] < s {
                        seg += 1;
                    }
                    let frac = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
                    let t = 2.0 * PI * (seg as f64 + frac) / FINE as f64;
                    let p = pt(t);
                    out.push(BoundarySample {
                        point: p,
                        normal: self.normal(p),
                    });
                }
                out
            }
            Shape::Rounded { inner, normals, r } => {
                let m = inner.len();
                // pieces: edge i (straight) followed by the arc at vertex i+1
                let mut lengths = Vec::with_capacity(2 * m);
                for i in 0..m {
                    let j = (i + 1) % m;
                    lengths.push(norm(sub(inner[j], inner[i])));
                    let turn = cross(normals[i], normals[j]).atan2(dot(normals[i], normals[j]));
                    lengths.push(r * turn);
                }
                let total: f64 = lengths.iter().sum();
                let mut out = Vec::with_capacity(n);
                for k in 0..n {
                    let mut s = total * k as f64 / n as f64;
                    let mut piece = 0;
                    while piece + 1 < lengths.len() && s > lengths[piece] {
                        s -= lengths[piece];
                        piece += 1;
                    }
                    let i = piece / 2;
                    let j = (i + 1) % m;
                    let sample = if piece % 2 == 0 {
                        let dir = unit(sub(inner[j], inner[i]));
                        BoundarySample {
                            point: add(add(inner[i], scale(dir, s)), scale(normals[i], *r)),
                            normal: normals[i],
                        }
                    } else {
                        let a0 = normals[i][1].atan2(normals[i][0]);
                        let ang = a0 + s / r;
                        let normal = [ang.cos(), ang.sin()];
                        BoundarySample {
                            point: add(inner[j], scale(normal, *r)),
                            normal,
                        }
                    };
                    out.push(sample);
                }
                out
            }
        }
    }

    fn perimeter(&self) -> f64 {
        match self {
            Shape::Disk { r } => 2.0 * PI * r,
            Shape::Ellipse { .. } => {
                let s = self.sample_boundary(4096);
                polygon_perimeter(&s.iter().map(|b| b.point).collect::<Vec<_>>())
            }
            Shape::Rounded { inner, r, .. } => polygon_perimeter(inner) + 2.0 * PI * r,
        }
    }

    fn area(&self) -> f64 {
        match self {
            Shape::Disk { r } => PI * r * r,
            Shape::Ellipse { a, b } => PI * a * b,
            Shape::Rounded { inner, r, .. } => {
                polygon_area(inner) + polygon_perimeter(inner) * r + PI * r * r
            }
        }
    }

    fn circumradius(&self) -> f64 {
        match self {
            Shape::Disk { r } => *r,
            Shape::Ellipse { a, b } => a.max(*b),
            Shape::Rounded { inner, r, .. } => {
                inner.iter().map(|v| norm(*v)).fold(0.0, f64::max) + r
            }
        }
    }

    fn bounding_box(&self) -> (Point, Point) {
        match self {
            Shape::Disk { r } => ([-r, -r], [*r, *r]),
            Shape::Ellipse { a, b } => ([-a, -b], [*a, *b]),
            Shape::Rounded { inner, r, .. } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in inner {
                    for d in 0..2 {
                        lo[d] = lo[d].min(v[d] - r);
                        hi[d] = hi[d].max(v[d] + r);
                    }
                }
                (lo, hi)
            }
        }
    }
}

fn polygon_area(v: &[Point]) -> f64 {
    let m = v.len();
    0.5 * (0..m).map(|i| cross(v[i], v[(i + 1) % m])).sum::<f64>()
}

fn polygon_perimeter(v: &[Point]) -> f64 {
    let m = v.len();
    (0..m).map(|i| norm(sub(v[(i + 1) % m], v[i]))).sum()
}

fn closest_on_segment(a: Point, b: Point, p: Point) -> Point {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    add(a, scale(ab, t))
}

fn closest_on_polygon(v: &[Point], p: Point) -> Point {
    let m = v.len();
    let mut best = v[0];
    let mut best_d = f64::INFINITY;
    for i in 0..m {
        let q = closest_on_segment(v[i], v[(i + 1) % m], p);
        let d = norm(sub(p, q));
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

fn polygon_signed_distance(v: &[Point], normals: &[Point], p: Point) -> f64 {
    let inside_depth = normals
        .iter()
        .zip(v)
        .map(|(n, a)| dot(*n, sub(p, *a)))
        .fold(f64::NEG_INFINITY, f64::max);
    if inside_depth <= 0.0 {
        inside_depth
    } else {
        norm(sub(p, closest_on_polygon(v, p)))
    }
}

fn project_ellipse(a: f64, b: f64, p: Point) -> Point {
    let pt = |t: f64| [a * t.cos(), b * t.sin()];
    let mut t = (0..64)
        .map(|k| 2.0 * PI * k as f64 / 64.0)
        .min_by(|&s, &u| {
            norm(sub(pt(s), p))
                .partial_cmp(&norm(sub(pt(u), p)))
                .unwrap()
        })
        .unwrap();
    // Newton on d/dt |pt(t) - p|^2 / 2
    for _ in 0..50 {
        let (s, c) = t.sin_cos();
        let g = (b * b - a * a) * s * c + a * p[0] * s - b * p[1] * c;
        let dg = (b * b - a * a) * (c * c - s * s) + a * p[0] * c + b * p[1] * s;
        if dg.abs() < 1e-300 {
            break;
        }
        let step = g / dg;
        let step = step.clamp(-0.25, 0.25);
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    pt(t)
}

/// A bounded convex domain together with its structural constant `rho`.
#[derive(Clone, Debug)]
pub struct ConvexDomain {
    kind: DomainKind,
    spec: DomainSpec,
    shape: Shape,
    boundary: Vec<BoundarySample>,
    rho: f64,
    circumradius: f64,
}

/// Default number of boundary samples stored with a domain.
pub const DEFAULT_BOUNDARY_SAMPLES: usize = 256;

/// Builds a domain from its description and computes `rho`.
pub fn build_domain(spec: &DomainSpec) -> Result<ConvexDomain> {
    let (kind, shape) = match spec {
        DomainSpec::Disk { radius } => {
            if !(*radius > 0.0) {
                return Err(Error::InvalidDomain(format!("disk radius {radius} must be positive")));
            }
            (DomainKind::Disk, Shape::Disk { r: *radius })
        }
        DomainSpec::Ellipse { a, b } => {
            if !(*a > 0.0 && *b > 0.0) {
                return Err(Error::InvalidDomain(format!("ellipse semi-axes ({a}, {b}) must be positive")));
            }
            if a == b {
                (DomainKind::Ellipse, Shape::Disk { r: *a })
            } else {
                (DomainKind::Ellipse, Shape::Ellipse { a: *a, b: *b })
            }
        }
        DomainSpec::SmoothedPolygon {
            vertices,
            corner_radius,
        } => (
            DomainKind::SmoothedPolygon,
            rounded_polygon(vertices, *corner_radius)?,
        ),
    };
    let boundary = shape.sample_boundary(DEFAULT_BOUNDARY_SAMPLES);
    check_sample_convexity(&boundary)?;
    let circumradius = shape.circumradius();
    let mut domain = ConvexDomain {
        kind,
        spec: spec.clone(),
        shape,
        boundary,
        rho: 0.0,
        circumradius,
    };
    let tangent = domain
        .boundary
        .iter()
        .map(|s| max_tangent_ball(&domain.boundary, s, 2.0 * circumradius))
        .fold(f64::INFINITY, f64::min);
    domain.rho = tangent.min(1.0 / circumradius);
    Ok(domain)
}

fn rounded_polygon(vertices: &[Point], r: f64) -> Result<Shape> {
    let m = vertices.len();
    if m < 3 {
        return Err(Error::InvalidDomain("polygon needs at least 3 vertices".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidDomain(format!("corner radius {r} must be positive")));
    }
    let mut v = vertices.to_vec();
    let signs: Vec<f64> = (0..m)
        .map(|i| {
            let e0 = sub(v[(i + 1) % m], v[i]);
            let e1 = sub(v[(i + 2) % m], v[(i + 1) % m]);
            cross(e0, e1)
        })
        .collect();
    let all_pos = signs.iter().all(|&s| s > 0.0);
    let all_neg = signs.iter().all(|&s| s < 0.0);
    if !(all_pos || all_neg) {
        let bad = signs
            .iter()
            .position(|&s| s * signs[0] <= 0.0)
            .unwrap_or(0);
        return Err(Error::InvalidDomain(format!(
            "polygon is not strictly convex at vertex {}",
            (bad + 1) % m
        )));
    }
    if all_neg {
        v.reverse();
    }
    let normals: Vec<Point> = (0..m)
        .map(|i| {
            let e = unit(sub(v[(i + 1) % m], v[i]));
            [e[1], -e[0]]
        })
        .collect();
    // shrink each edge line inward by r and intersect consecutive lines
    let offsets: Vec<f64> = (0..m).map(|i| dot(normals[i], v[i]) - r).collect();
    let mut inner = Vec::with_capacity(m);
    for i in 0..m {
        let pi = (i + m - 1) % m;
        let (n0, c0) = (normals[pi], offsets[pi]);
        let (n1, c1) = (normals[i], offsets[i]);
        let det = cross(n0, n1);
        inner.push([(c0 * n1[1] - c1 * n0[1]) / det, (n0[0] * c1 - n1[0] * c0) / det]);
    }
    let still_convex = (0..m).all(|i| {
        let e0 = sub(inner[(i + 1) % m], inner[i]);
        let e1 = sub(inner[(i + 2) % m], inner[(i + 1) % m]);
        cross(e0, e1) > 0.0 && norm(e0) > 0.0
    }) && (0..m).all(|i| dot(sub(inner[(i + 1) % m], inner[i]), sub(v[(i + 1) % m], v[i])) > 0.0);
    if !still_convex {
        return Err(Error::InvalidDomain(format!(
            "corner radius {r} is too large for the polygon"
        )));
    }
    let inner_normals: Vec<Point> = (0..m)
        .map(|i| {
            let e = unit(sub(inner[(i + 1) % m], inner[i]));
            [e[1], -e[0]]
        })
        .collect();
    Ok(Shape::Rounded {
        inner,
        normals: inner_normals,
        r,
    })
}

fn check_sample_convexity(samples: &[BoundarySample]) -> Result<()> {
    let m = samples.len();
    let mut sign = 0.0;
    for i in 0..m {
        let e0 = sub(samples[(i + 1) % m].point, samples[i].point);
        let e1 = sub(samples[(i + 2) % m].point, samples[(i + 1) % m].point);
        let c = cross(e0, e1);
        if c.abs() <= 1e-14 * (dot(e0, e0) + dot(e1, e1)) {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return Err(Error::InvalidDomain(format!(
                "boundary samples are not convex near sample {}",
                (i + 1) % m
            )));
        }
    }
    Ok(())
}

/// Smallest clearance `min_k |y_k - z| - r` of the ball `B_r(z)` against the samples.
fn ball_clearance(samples: &[BoundarySample], z: Point, r: f64) -> f64 {
    samples
        .iter()
        .map(|s| norm(sub(s.point, z)) - r)
        .fold(f64::INFINITY, f64::min)
}

fn ball_fits(samples: &[BoundarySample], sample: &BoundarySample, r: f64) -> bool {
    let z = sub(sample.point, scale(sample.normal, r));
    ball_clearance(samples, z, r) >= -1e-9 * r.max(1.0)
}

fn max_tangent_ball(samples: &[BoundarySample], sample: &BoundarySample, upper: f64) -> f64 {
    if ball_fits(samples, sample, upper) {
        return upper;
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ball_fits(samples, sample, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

impl ConvexDomain {
    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    pub fn boundary(&self) -> &[BoundarySample] {
        &self.boundary
    }

    /// Boundary curve resampled with `n` points, uniformly in arc length.
    pub fn boundary_samples(&self, n: usize) -> Vec<BoundarySample> {
        self.shape.sample_boundary(n)
    }

    pub fn perimeter(&self) -> f64 {
        self.shape.perimeter()
    }

    pub fn area(&self) -> f64 {
        self.shape.area()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        self.shape.bounding_box()
    }

    /// Negative strictly inside, positive outside.
    pub fn level(&self, p: Point) -> f64 {
        self.shape.level(p)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.shape.level(p) < 0.0
    }

    /// Nearest point on the boundary.
    pub fn project(&self, p: Point) -> Point {
        self.shape.project(p)
    }

    pub fn normal_at(&self, p: Point) -> Point {
        self.shape.normal(p)
    }

    /// Fraction `t` in `(0, 1]` at which the segment from an inside point to an
    /// outside point leaves the domain.
    pub fn crossing(&self, inside: Point, outside: Point) -> f64 {
        let d = sub(outside, inside);
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.shape.level(add(inside, scale(d, mid))) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Outcome of [`check_uniform_interior_ball`].
#[derive(Clone, Copy, Debug)]
pub struct BallCheck {
    pub holds: bool,
    /// Boundary sample with the smallest clearance.
    pub worst_point: Point,
    /// `min_k |y_k - z| - rho` at the worst sample (negative when violated).
    pub clearance: f64,
}

/// Tests the uniform interior ball condition with radius `rho` against every
/// boundary sample of the domain.
pub fn check_uniform_interior_ball(domain: &ConvexDomain, rho: f64) -> BallCheck {
    let samples = domain.boundary();
    let mut worst = BallCheck {
        holds: true,
        worst_point: samples[0].point,
        clearance: f64::INFINITY,
    };
    for s in samples {
        let z = sub(s.point, scale(s.normal, rho));
        let mut c = ball_clearance(samples, z, rho);
        if !domain.contains(z) {
            c = c.min(-domain.level(z).abs());
        }
        if c < worst.clearance {
            worst.clearance = c;
            worst.worst_point = s.point;
        }
    }
    worst.holds = worst.clearance >= -1e-9 * rho.max(1.0);
    worst
}

/// Outcome of [`check_quadratic_separation`].
#[derive(Clone, Copy, Debug)]
pub struct SeparationCheck {
    pub holds: bool,
    /// `(x, x0)` indices of the pair with the smallest margin.
    pub worst_pair: (usize, usize),
    /// Smallest and largest separation quotient over all pairs.
    pub min_quotient: f64,
    pub max_quotient: f64,
}

/// Checks `rho |x-x0|^2 <= phi(x) - phi(x0) - Dphi(x0).(x-x0) <= |x-x0|^2 / rho`
/// over all ordered pairs of boundary samples.
pub fn check_quadratic_separation(
    points: &[Point],
    values: &[f64],
    gradients: &[Point],
    rho: f64,
) -> SeparationCheck {
    assert_eq!(points.len(), values.len());
    assert_eq!(points.len(), gradients.len());
    let inv = 1.0 / rho;
    let mut out = SeparationCheck {
        holds: true,
        worst_pair: (0, 0),
        min_quotient: f64::INFINITY,
        max_quotient: f64::NEG_INFINITY,
    };
    let mut worst_margin = f64::INFINITY;
    for (j, &x0) in points.iter().enumerate() {
        for (i, &x) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = sub(x, x0);
            let d2 = dot(d, d);
            if d2 == 0.0 {
                continue;
            }
            let q = (values[i] - values[j] - dot(gradients[j], d)) / d2;
            out.min_quotient = out.min_quotient.min(q);
            out.max_quotient = out.max_quotient.max(q);
            let margin = (q - rho).min(inv - q);
            if margin < worst_margin {
                worst_margin = margin;
                out.worst_pair = (i, j);
            }
        }
    }
    let slack = 1e-12;
    out.holds = out.min_quotient >= rho * (1.0 - slack) && out.max_quotient <= inv * (1.0 + slack);
    out
}

/// Quadratic separation for a closed-form `phi` on `n` boundary samples.
pub fn check_quadratic_separation_fn(
    domain: &ConvexDomain,
    n: usize,
    phi: impl Fn(Point) -> f64,
    grad: impl Fn(Point) -> Point,
    rho: f64,
) -> SeparationCheck {
    let samples = domain.boundary_samples(n);
    let points: Vec<Point> = samples.iter().map(|s| s.point).collect();
    let values: Vec<f64> = points.iter().map(|&p| phi(p)).collect();
    let grads: Vec<Point> = points.iter().map(|&p| grad(p)).collect();
    check_quadratic_separation(&points, &values, &grads, rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(r: f64) -> ConvexDomain {
        build_domain(&DomainSpec::Disk { radius: r }).unwrap()
    }

    #[test]
    fn disk_rho_and_circumradius() {
        let d = disk(1.0);
        assert!((d.rho() - 1.0).abs() < 1e-6, "rho = {}", d.rho());
        assert_eq!(d.circumradius(), 1.0);
    }

    #[test]
    fn degenerate_ellipse_is_a_disk() {
        let e = build_domain(&DomainSpec::Ellipse { a: 1.0, b: 1.0 }).unwrap();
        let d = disk(1.0);
        assert!((e.rho() - d.rho()).abs() < 1e-12);
        assert_eq!(e.circumradius(), d.circumradius());
        assert!((e.area() - d.area()).abs() < 1e-12);
    }

    #[test]
    fn ellipse_rho_is_end_curvature_radius() {
        // curvature radius b^2/a at the ends of the major axis
        let e = build_domain(&DomainSpec::Ellipse { a: 1.0, b: 0.5 }).unwrap();
        assert!(e.rho() <= 0.25 + 1e-3, "rho = {}", e.rho());
        assert!(e.rho() > 0.24, "rho = {}", e.rho());
    }

    #[test]
    fn interior_ball_checks() {
        let d = disk(1.0);
        assert!(check_uniform_interior_ball(&d, 0.5).holds);
        assert!(!check_uniform_interior_ball(&d, 1.01).holds);
        let e = build_domain(&DomainSpec::Ellipse { a: 1.0, b: 0.5 }).unwrap();
        let c = check_uniform_interior_ball(&e, 0.3);
        assert!(!c.holds);
        // violation sits at an end of the major axis
        assert!(c.worst_point[0].abs() > 0.95, "{:?}", c.worst_point);
        assert!(check_uniform_interior_ball(&e, 0.2).holds);
    }

    #[test]
    fn nonconvex_polygon_rejected() {
        let spec = DomainSpec::SmoothedPolygon {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.2, 0.2], [0.0, 1.0]],
            corner_radius: 0.05,
        };
        match build_domain(&spec) {
            Err(Error::InvalidDomain(msg)) => assert!(msg.contains("convex"), "{msg}"),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn rounded_square_geometry() {
        let spec = DomainSpec::SmoothedPolygon {
            vertices: vec![[-0.7, -0.7], [0.7, -0.7], [0.7, 0.7], [-0.7, 0.7]],
            corner_radius: 0.2,
        };
        let d = build_domain(&spec).unwrap();
        assert!((d.rho() - 0.2).abs() < 2e-3, "rho = {}", d.rho());
        let exact_area = 1.4 * 1.4 - (4.0 - PI) * 0.04;
        assert!((d.area() - exact_area).abs() < 1e-12);
        assert!(d.contains([0.69, 0.0]));
        assert!(!d.contains([0.69, 0.69]));
        let p = d.project([0.0, 0.1]);
        assert!((p[1] - 0.7).abs() < 1e-12 && p[0].abs() < 1e-12, "{p:?}");
        let q = d.project([1.0, 1.0]);
        let c = 0.5 + 0.2 / 2f64.sqrt();
        assert!((q[0] - c).abs() < 1e-12 && (q[1] - c).abs() < 1e-12, "{q:?}");
    }

    #[test]
    fn ellipse_projection_lands_on_curve() {
        let e = build_domain(&DomainSpec::Ellipse { a: 1.0, b: 0.5 }).unwrap();
        for p in [[0.3, 0.1], [0.9, 0.0], [-0.2, 0.45], [1.5, 1.5]] {
            let q = e.project(p);
            let on = (q[0] / 1.0).powi(2) + (q[1] / 0.5).powi(2);
            assert!((on - 1.0).abs() < 1e-12);
            // residual is along the normal
            let r = sub(p, q);
            assert!(cross(r, e.normal_at(q)).abs() < 1e-9, "{p:?} -> {q:?}");
        }
    }

    #[test]
    fn crossing_on_unit_circle() {
        let d = disk(1.0);
        let t = d.crossing([0.5, 0.0], [1.5, 0.0]);
        assert!((t - 0.5).abs() < 1e-14);
    }

    #[test]
    fn quadratic_separation_examples() {
        let d = disk(1.0);
        let half = |p: Point| 0.5 * dot(p, p);
        let id = |p: Point| p;
        let c = check_quadratic_separation_fn(&d, 256, half, id, 0.4);
        assert!(c.holds);
        assert!((c.min_quotient - 0.5).abs() < 1e-12 && (c.max_quotient - 0.5).abs() < 1e-12);
        assert!(!check_quadratic_separation_fn(&d, 256, half, id, 0.6).holds);

        let sq = |p: Point| p[0] * p[0];
        let gsq = |p: Point| [2.0 * p[0], 0.0];
        for rho in [0.01, 0.1, 0.5] {
            let c = check_quadratic_separation_fn(&d, 256, sq, gsq, rho);
            assert!(!c.holds);
            assert!(c.min_quotient <= 1e-12);
        }
    }

    #[test]
    fn separation_oracle_on_vertical_pair() {
        // direct evaluation at (0, 1) and (0, -1) for phi = x1^2
        let points = [[0.0, 1.0], [0.0, -1.0]];
        let values = [0.0, 0.0];
        let grads = [[0.0, 0.0], [0.0, 0.0]];
        let c = check_quadratic_separation(&points, &values, &grads, 0.1);
        assert!(!c.holds);
        assert_eq!(c.min_quotient, 0.0);
    }

    #[test]
    fn separation_holds_on_every_supported_shape() {
        let shapes = [
            DomainSpec::Disk { radius: 1.0 },
            DomainSpec::Ellipse { a: 1.0, b: 0.5 },
            DomainSpec::SmoothedPolygon {
                vertices: vec![[-0.6, -0.6], [0.6, -0.6], [0.6, 0.6], [-0.6, 0.6]],
                corner_radius: 0.15,
            },
            DomainSpec::SmoothedPolygon {
                vertices: vec![[-0.6, -0.5], [0.7, -0.4], [0.0, 0.7]],
                corner_radius: 0.1,
            },
        ];
        for s in shapes {
            let d = build_domain(&s).unwrap();
            let c = check_quadratic_separation_fn(&d, 200, |p| 0.5 * dot(p, p), |p| p, 0.4);
            assert!(c.holds, "{s:?}");
        }
    }
}
