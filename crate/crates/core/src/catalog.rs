//! Built-in closed-form fields and seeded random fields.
//!
//! Expressions are written `name(arg, arg, ...)` or just `name`.
//!
//! Random cell fields hash the integer cell index `(i, j) = floor(x / cell)`
//! together with the seed through splitmix64:
//! `k = mix(mix(mix(seed) ^ i) ^ j)` with `i`, `j` reinterpreted as `u64`.
//! The scalar sample is `u = (k >> 11) * 2^-53`; vector samples draw a second
//! value from `mix(k)` and map `(u, v)` to `sqrt(u) (cos 2 pi v, sin 2 pi v)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::Sym2;
use crate::geometry::Point;

/// The splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cell_key(seed: u64, p: Point, cell: f64) -> u64 {
    let i = (p[0] / cell).floor() as i64 as u64;
    let j = (p[1] / cell).floor() as i64 as u64;
    splitmix64(splitmix64(splitmix64(seed) ^ i) ^ j)
}

fn unit_interval(k: u64) -> f64 {
    (k >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Scalar expressions with closed-form derivatives where they exist.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarExpr {
    Constant(f64),
    /// `a + b |x|^2`
    Radial { a: f64, b: f64 },
    /// `c1 x1 + c2 x2 + c0`
    Linear { c0: f64, c1: f64, c2: f64 },
    /// `(a11 x1^2 + 2 a12 x1 x2 + a22 x2^2) / 2`
    Quadratic { a11: f64, a12: f64, a22: f64 },
    /// `exp(x1^2/2) + exp(x2^2/2)`
    ExpSeparable,
    /// `x1^4 + x2^4`
    Quartic,
    /// `|x|^4 / 4`
    RadialQuartic,
    /// `|x - c|^beta`
    NormPower { beta: f64, c1: f64, c2: f64 },
    /// `s * (x1^2 - x2^2)`
    Saddle { s: f64 },
    RandomCheckerboard {
        lambda: f64,
        upper: f64,
        seed: u64,
        cell: f64,
    },
}

impl ScalarExpr {
    pub fn eval(&self, p: Point) -> f64 {
        let [x, y] = p;
        let r2 = x * x + y * y;
        match *self {
            ScalarExpr::Constant(c) => c,
            ScalarExpr::Radial { a, b } => a + b * r2,
            ScalarExpr::Linear { c0, c1, c2 } => c0 + c1 * x + c2 * y,
            ScalarExpr::Quadratic { a11, a12, a22 } => 0.5 * (a11 * x * x + 2.0 * a12 * x * y + a22 * y * y),
            ScalarExpr::ExpSeparable => (0.5 * x * x).exp() + (0.5 * y * y).exp(),
            ScalarExpr::Quartic => x.powi(4) + y.powi(4),
            ScalarExpr::RadialQuartic => 0.25 * r2 * r2,
            ScalarExpr::NormPower { beta, c1, c2 } => (x - c1).hypot(y - c2).powf(beta),
            ScalarExpr::Saddle { s } => s * (x * x - y * y),
            ScalarExpr::RandomCheckerboard {
                lambda,
                upper,
                seed,
                cell,
            } => lambda + (upper - lambda) * unit_interval(cell_key(seed, p, cell)),
        }
    }

    pub fn gradient(&self, p: Point) -> Option<Point> {
        let [x, y] = p;
        let r2 = x * x + y * y;
        Some(match *self {
            ScalarExpr::Constant(_) => [0.0, 0.0],
            ScalarExpr::Radial { b, .. } => [2.0 * b * x, 2.0 * b * y],
            ScalarExpr::Linear { c1, c2, .. } => [c1, c2],
            ScalarExpr::Quadratic { a11, a12, a22 } => [a11 * x + a12 * y, a12 * x + a22 * y],
            ScalarExpr::ExpSeparable => [x * (0.5 * x * x).exp(), y * (0.5 * y * y).exp()],
            ScalarExpr::Quartic => [4.0 * x.powi(3), 4.0 * y.powi(3)],
            ScalarExpr::RadialQuartic => [r2 * x, r2 * y],
            ScalarExpr::NormPower { beta, c1, c2 } => {
                let r = (x - c1).hypot(y - c2);
                if r == 0.0 {
                    return None;
                }
                let s = beta * r.powf(beta - 2.0);
                [s * (x - c1), s * (y - c2)]
            }
            ScalarExpr::Saddle { s } => [2.0 * s * x, -2.0 * s * y],
            ScalarExpr::RandomCheckerboard { .. } => return None,
        })
    }

    pub fn hessian(&self, p: Point) -> Option<Sym2> {
        let [x, y] = p;
        let r2 = x * x + y * y;
        Some(match *self {
            ScalarExpr::Constant(_) | ScalarExpr::Linear { .. } => Sym2::default(),
            ScalarExpr::Radial { b, .. } => Sym2::new(2.0 * b, 0.0, 2.0 * b),
            ScalarExpr::Quadratic { a11, a12, a22 } => Sym2::new(a11, a12, a22),
            ScalarExpr::ExpSeparable => Sym2::new(
                (1.0 + x * x) * (0.5 * x * x).exp(),
                0.0,
                (1.0 + y * y) * (0.5 * y * y).exp(),
            ),
            ScalarExpr::Quartic => Sym2::new(12.0 * x * x, 0.0, 12.0 * y * y),
            ScalarExpr::RadialQuartic => Sym2::new(r2 + 2.0 * x * x, 2.0 * x * y, r2 + 2.0 * y * y),
            ScalarExpr::Saddle { s } => Sym2::new(2.0 * s, 0.0, -2.0 * s),
            ScalarExpr::NormPower { .. } | ScalarExpr::RandomCheckerboard { .. } => return None,
        })
    }

    /// Range of values the expression can take, when known a priori.
    pub fn value_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            ScalarExpr::Constant(c) => Some((c, c)),
            ScalarExpr::RandomCheckerboard { lambda, upper, .. } => Some((lambda, upper)),
            _ => None,
        }
    }

    /// Short identifier safe for CSV columns.
    pub fn id(&self) -> String {
        match *self {
            ScalarExpr::Constant(_) => "constant".into(),
            ScalarExpr::Radial { .. } => "radial".into(),
            ScalarExpr::Linear { .. } => "linear".into(),
            ScalarExpr::Quadratic { .. } => "quadratic".into(),
            ScalarExpr::ExpSeparable => "exp_separable".into(),
            ScalarExpr::Quartic => "quartic".into(),
            ScalarExpr::RadialQuartic => "radial_quartic".into(),
            ScalarExpr::NormPower { .. } => "norm_power".into(),
            ScalarExpr::Saddle { .. } => "saddle".into(),
            ScalarExpr::RandomCheckerboard { seed, .. } => format!("checkerboard_{seed}"),
        }
    }
}

/// Vector field expressions.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorExpr {
    Constant(f64, f64),
    /// `s * (-x2, x1)`
    Rotational { s: f64 },
    /// `s * x`
    Radial { s: f64 },
    /// Per-cell vectors, uniform in the unit disk.
    RandomBounded { seed: u64, cell: f64 },
}

impl VectorExpr {
    pub fn eval(&self, p: Point) -> Point {
        match *self {
            VectorExpr::Constant(a, b) => [a, b],
            VectorExpr::Rotational { s } => [-s * p[1], s * p[0]],
            VectorExpr::Radial { s } => [s * p[0], s * p[1]],
            VectorExpr::RandomBounded { seed, cell } => {
                let k = cell_key(seed, p, cell);
                let r = unit_interval(k).sqrt();
                let t = 2.0 * PI * unit_interval(splitmix64(k));
                [r * t.cos(), r * t.sin()]
            }
        }
    }

    pub fn id(&self) -> String {
        match *self {
            VectorExpr::Constant(..) => "constant".into(),
            VectorExpr::Rotational { .. } => "rotational".into(),
            VectorExpr::Radial { .. } => "radial".into(),
            VectorExpr::RandomBounded { seed, .. } => format!("random_bounded_{seed}"),
        }
    }
}

/// Splits `name(a, b, ...)` into the name and its raw arguments.
fn split_call(text: &str) -> Result<(String, Vec<String>)> {
    let t = text.trim();
    match t.find('(') {
        None => Ok((t.to_string(), Vec::new())),
        Some(open) => {
            if !t.ends_with(')') {
                return Err(Error::Parse(format!("`{t}`: missing closing parenthesis")));
            }
            let name = t[..open].trim().to_string();
            let inner = &t[open + 1..t.len() - 1];
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(|s| s.trim().to_string()).collect()
            };
            Ok((name, args))
        }
    }
}

fn numbers(name: &str, args: &[String], lo: usize, hi: usize) -> Result<Vec<f64>> {
    if args.len() < lo || args.len() > hi {
        return Err(Error::Parse(format!(
            "`{name}` takes {} argument(s), got {}",
            if lo == hi { lo.to_string() } else { format!("{lo} to {hi}") },
            args.len()
        )));
    }
    args.iter()
        .map(|a| {
            a.parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{name}`: `{a}` is not a number")))
        })
        .collect()
}

fn seed_arg(name: &str, a: &str) -> Result<u64> {
    a.parse::<u64>()
        .map_err(|_| Error::Parse(format!("`{name}`: seed `{a}` must be a non-negative integer")))
}

/// Parses a scalar expression such as `constant(1)` or
/// `random-checkerboard(1, 2, 7, 0.25)`.
pub fn parse_scalar(text: &str) -> Result<ScalarExpr> {
    let (name, args) = split_call(text)?;
    let n = name.as_str();
    Ok(match n {
        "constant" => ScalarExpr::Constant(numbers(n, &args, 1, 1)?[0]),
        "radial" => {
            let v = numbers(n, &args, 2, 2)?;
            ScalarExpr::Radial { a: v[0], b: v[1] }
        }
        "linear" => {
            let v = numbers(n, &args, 2, 3)?;
            ScalarExpr::Linear {
                c1: v[0],
                c2: v[1],
                c0: v.get(2).copied().unwrap_or(0.0),
            }
        }
        "quadratic" => {
            let v = numbers(n, &args, 1, 3)?;
            if v.len() == 1 {
                ScalarExpr::Quadratic {
                    a11: v[0],
                    a12: 0.0,
                    a22: v[0],
                }
            } else if v.len() == 3 {
                ScalarExpr::Quadratic {
                    a11: v[0],
                    a12: v[1],
                    a22: v[2],
                }
            } else {
                return Err(Error::Parse("`quadratic` takes 1 or 3 arguments".into()));
            }
        }
        "exp-separable" => {
            numbers(n, &args, 0, 0)?;
            ScalarExpr::ExpSeparable
        }
        "quartic" => {
            numbers(n, &args, 0, 0)?;
            ScalarExpr::Quartic
        }
        "radial-quartic" => {
            numbers(n, &args, 0, 0)?;
            ScalarExpr::RadialQuartic
        }
        "norm-power" => {
            let v = numbers(n, &args, 1, 3)?;
            ScalarExpr::NormPower {
                beta: v[0],
                c1: v.get(1).copied().unwrap_or(0.0),
                c2: v.get(2).copied().unwrap_or(0.0),
            }
        }
        "saddle" => ScalarExpr::Saddle {
            s: numbers(n, &args, 0, 1)?.first().copied().unwrap_or(1.0),
        },
        "random-checkerboard" => {
            if args.len() != 4 {
                return Err(Error::Parse(
                    "`random-checkerboard` takes (lambda, Lambda, seed, cell)".into(),
                ));
            }
            let lambda = numbers(n, &args[0..1], 1, 1)?[0];
            let upper = numbers(n, &args[1..2], 1, 1)?[0];
            let seed = seed_arg(n, &args[2])?;
            let cell = numbers(n, &args[3..4], 1, 1)?[0];
            if !(cell > 0.0) {
                return Err(Error::Parse("`random-checkerboard`: cell size must be positive".into()));
            }
            ScalarExpr::RandomCheckerboard {
                lambda,
                upper,
                seed,
                cell,
            }
        }
        _ => return Err(Error::Parse(format!("unknown scalar expression `{name}`"))),
    })
}

/// Parses a vector expression such as `constant(1, 0)` or `random-bounded(3)`.
pub fn parse_vector(text: &str) -> Result<VectorExpr> {
    let (name, args) = split_call(text)?;
    let n = name.as_str();
    Ok(match n {
        "constant" => {
            let v = numbers(n, &args, 2, 2)?;
            VectorExpr::Constant(v[0], v[1])
        }
        "rotational" => VectorExpr::Rotational {
            s: numbers(n, &args, 0, 1)?.first().copied().unwrap_or(1.0),
        },
        "radial" => VectorExpr::Radial {
            s: numbers(n, &args, 0, 1)?.first().copied().unwrap_or(1.0),
        },
        "random-bounded" => {
            if args.is_empty() || args.len() > 2 {
                return Err(Error::Parse("`random-bounded` takes (seed) or (seed, cell)".into()));
            }
            let seed = seed_arg(n, &args[0])?;
            let cell = if args.len() == 2 {
                numbers(n, &args[1..2], 1, 1)?[0]
            } else {
                0.25
            };
            if !(cell > 0.0) {
                return Err(Error::Parse("`random-bounded`: cell size must be positive".into()));
            }
            VectorExpr::RandomBounded { seed, cell }
        }
        _ => return Err(Error::Parse(format!("unknown vector expression `{name}`"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference generator seeded with 0
        let mut s = 0u64;
        let mut next = || {
            let out = splitmix64(s);
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            out
        };
        assert_eq!(next(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(next(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn checkerboard_is_piecewise_constant_and_bounded() {
        let f = parse_scalar("random-checkerboard(1, 2, 9, 0.25)").unwrap();
        let a = f.eval([0.01, 0.01]);
        assert_eq!(a, f.eval([0.2, 0.24]));
        for k in 0..200 {
            let v = f.eval([k as f64 * 0.013 - 1.0, 0.7 - k as f64 * 0.007]);
            assert!((1.0..=2.0).contains(&v));
        }
    }

    #[test]
    fn random_bounded_in_unit_disk() {
        let f = parse_vector("random-bounded(4, 0.2)").unwrap();
        for k in 0..200 {
            let v = f.eval([k as f64 * 0.01 - 1.0, 0.3]);
            assert!(v[0].hypot(v[1]) <= 1.0);
        }
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(parse_scalar("constant").is_err());
        assert!(parse_scalar("nope(1)").is_err());
        assert!(parse_scalar("constant(x)").is_err());
        assert!(parse_scalar("radial(1,2").is_err());
        assert_eq!(parse_scalar(" quadratic(1) ").unwrap(), ScalarExpr::Quadratic { a11: 1.0, a12: 0.0, a22: 1.0 });
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let exprs = [
            ScalarExpr::ExpSeparable,
            ScalarExpr::RadialQuartic,
            ScalarExpr::Quadratic { a11: 2.0, a12: 0.5, a22: 1.0 },
            ScalarExpr::Quartic,
        ];
        let p = [0.3, -0.4];
        let e = 1e-5;
        for ex in exprs {
            let g = ex.gradient(p).unwrap();
            let gx = (ex.eval([p[0] + e, p[1]]) - ex.eval([p[0] - e, p[1]])) / (2.0 * e);
            let gy = (ex.eval([p[0], p[1] + e]) - ex.eval([p[0], p[1] - e])) / (2.0 * e);
            assert!((g[0] - gx).abs() < 1e-7 && (g[1] - gy).abs() < 1e-7, "{ex:?}");
            let h = ex.hessian(p).unwrap();
            let g1 = ex.gradient([p[0] + e, p[1]]).unwrap();
            let g0 = ex.gradient([p[0] - e, p[1]]).unwrap();
            assert!((h.m11 - (g1[0] - g0[0]) / (2.0 * e)).abs() < 1e-6);
            assert!((h.m12 - (g1[1] - g0[1]) / (2.0 * e)).abs() < 1e-6);
        }
    }
}
