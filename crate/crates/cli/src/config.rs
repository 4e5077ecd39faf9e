//! Flat `key = value` experiment configs.
//!
//! One key per line, `#` starts a comment, keys are dotted paths such as
//! `domain.kind` or `grid.h`. Every key has a default except the few that a
//! chosen variant requires (`domain.a` for an ellipse, `phi.expr` for a
//! closed-form potential).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use lmalab::catalog::{parse_scalar, parse_vector, ScalarExpr, VectorExpr};
use lmalab::geometry::{DomainSpec, Point};
use lmalab::green::{LinearSolver, DEFAULT_KAPPAS, DEFAULT_QS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(line: Option<usize>, key: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            line,
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn warning(line: Option<usize>, key: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(line, key, message)
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self.line {
            Some(l) => write!(f, "{sev}: line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "{sev}: `{}`: {}", self.key, self.message),
        }
    }
}

/// Scalar data given by a catalog expression or a grid dump file.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarSource {
    Expr(ScalarExpr),
    File(PathBuf),
}

impl ScalarSource {
    pub fn id(&self) -> String {
        match self {
            ScalarSource::Expr(e) => e.id(),
            ScalarSource::File(p) => file_id(p),
        }
    }
}

/// Vector data given by a catalog expression or two grid dump files.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorSource {
    Expr(VectorExpr),
    Files(PathBuf, PathBuf),
}

impl VectorSource {
    pub fn id(&self) -> String {
        match self {
            VectorSource::Expr(e) => e.id(),
            VectorSource::Files(a, _) => file_id(a),
        }
    }
}

fn file_id(p: &std::path::Path) -> String {
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("file");
    let clean: String = stem.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    format!("file_{clean}")
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhiSource {
    /// Solve `det D^2 phi = f` with `phi = boundary` on the trace.
    Ma { f: ScalarSource, boundary: ScalarExpr },
    ClosedForm(ScalarExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PoleSpec {
    List(Vec<Point>),
    Random {
        interior: usize,
        near: usize,
        near_depth: f64,
        min_depth: f64,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbreuSettings {
    pub theta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub max_clamp: f64,
    pub forcing_off: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderSettings {
    pub pairs: usize,
    pub boundary_points: usize,
    pub delta: f64,
    /// Interior region: nodes deeper than this below the boundary.
    pub interior_depth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub domain: DomainSpec,
    /// Declared interior-ball radius, checked against the geometry.
    pub domain_rho: Option<f64>,
    pub h: f64,
    /// Refinement ladder, strictly decreasing; `[h]` when not set.
    pub ladder: Vec<f64>,
    pub phi: PhiSource,
    pub lambda: f64,
    pub upper: f64,
    pub force: VectorSource,
    /// Dirichlet data of `solve-div`.
    pub div_boundary: ScalarExpr,
    pub varphi: ScalarExpr,
    pub alpha: f64,
    pub psi: ScalarExpr,
    pub poles: PoleSpec,
    pub kappas: Vec<f64>,
    pub qs: Vec<f64>,
    /// Truncation levels as fractions of `max G`.
    pub k_levels: Vec<f64>,
    pub linear_tol: f64,
    pub ma_tol: f64,
    pub solver: LinearSolver,
    pub local_delta: Option<f64>,
    pub holder: HolderSettings,
    pub abreu: AbreuSettings,
    pub output: PathBuf,
    /// Every key with the value in effect, defaults included.
    pub effective: BTreeMap<String, String>,
    /// Line of each key that was given explicitly.
    pub lines: BTreeMap<String, usize>,
}

impl ExperimentConfig {
    /// `key = value` lines of the effective config, sorted by key.
    pub fn echo(&self) -> String {
        self.effective.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    pub fn phi_id(&self) -> String {
        match &self.phi {
            PhiSource::Ma { f, .. } => format!("ma_{}", f.id()),
            PhiSource::ClosedForm(e) => e.id(),
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    effective: BTreeMap<String, String>,
    diags: Vec<Diagnostic>,
}

impl Reader {
    fn raw(&self, key: &str) -> Option<(usize, String)> {
        let e = self.entries.get(key)?;
        Some((e.line, e.value.clone()))
    }

    fn fail(&mut self, line: Option<usize>, key: &str, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(line, key, msg));
    }

    /// Typed value with a default; the default is echoed when the key is absent.
    fn get<T, F>(&mut self, key: &str, default: T, show: &str, parse: F) -> T
    where
        F: Fn(&str) -> Result<T, String>,
    {
        match self.raw(key) {
            Some((line, v)) => match parse(&v) {
                Ok(t) => {
                    self.effective.insert(key.into(), v);
                    t
                }
                Err(m) => {
                    self.fail(Some(line), key, m);
                    default
                }
            },
            None => {
                self.effective.insert(key.into(), show.into());
                default
            }
        }
    }

    fn optional<T, F>(&mut self, key: &str, parse: F) -> Option<T>
    where
        F: Fn(&str) -> Result<T, String>,
    {
        let (line, v) = self.raw(key)?;
        match parse(&v) {
            Ok(t) => {
                self.effective.insert(key.into(), v);
                Some(t)
            }
            Err(m) => {
                self.fail(Some(line), key, m);
                None
            }
        }
    }

    fn required<T, F>(&mut self, key: &str, why: &str, parse: F) -> Option<T>
    where
        F: Fn(&str) -> Result<T, String>,
    {
        if !self.entries.contains_key(key) {
            self.fail(None, key, format!("missing, required {why}"));
            return None;
        }
        self.optional(key, parse)
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        self.get(key, default, &default.to_string(), number)
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        self.get(key, default, &default.to_string(), positive)
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.get(key, default, &default.to_string(), |s| {
            s.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
        })
    }
}

fn number(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a number, got `{s}`")),
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn number_list(s: &str) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s.split(',').map(|t| positive(t.trim())).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

fn point_list(s: &str) -> Result<Vec<Point>, String> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let c: Vec<&str> = t.split_whitespace().collect();
            if c.len() != 2 {
                return Err(format!("expected `x y` pairs separated by `;`, got `{}`", t.trim()));
            }
            Ok([number(c[0])?, number(c[1])?])
        })
        .collect()
}

fn list_text(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// `file(path)` or a catalog expression.
fn scalar_source(s: &str) -> Result<ScalarSource, String> {
    if let Some(inner) = s.strip_prefix("file(").and_then(|r| r.strip_suffix(')')) {
        return Ok(ScalarSource::File(PathBuf::from(inner.trim())));
    }
    parse_scalar(s).map(ScalarSource::Expr).map_err(|e| e.to_string())
}

/// `file(path_x, path_y)` or a catalog expression.
fn vector_source(s: &str) -> Result<VectorSource, String> {
    if let Some(inner) = s.strip_prefix("file(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err("`file` for a vector field takes two dump paths".into());
        }
        return Ok(VectorSource::Files(parts[0].into(), parts[1].into()));
    }
    parse_vector(s).map(VectorSource::Expr).map_err(|e| e.to_string())
}

fn scalar_expr(s: &str) -> Result<ScalarExpr, String> {
    parse_scalar(s).map_err(|e| e.to_string())
}

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "domain.kind",
    "domain.radius",
    "domain.a",
    "domain.b",
    "domain.vertices",
    "domain.corner_radius",
    "domain.rho",
    "grid.h",
    "grid.ladder",
    "phi.source",
    "phi.f",
    "phi.boundary",
    "phi.expr",
    "pinching.lambda",
    "pinching.upper",
    "field.F",
    "div.boundary",
    "boundary.varphi",
    "boundary.alpha",
    "boundary.psi",
    "poles.list",
    "poles.count",
    "poles.near",
    "poles.near_depth",
    "poles.min_depth",
    "poles.seed",
    "ladder.kappa",
    "ladder.q",
    "ladder.k",
    "solver.tol",
    "solver.ma_tol",
    "solver.linear",
    "green.local_delta",
    "holder.pairs",
    "holder.boundary_points",
    "holder.delta",
    "holder.interior_depth",
    "abreu.theta",
    "abreu.max_iter",
    "abreu.tol",
    "abreu.max_clamp",
    "abreu.forcing",
    "output.dir",
];

/// Parses config text. Errors come back as line/key diagnostics; warnings
/// are left to [`crate::validate`].
pub fn parse(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let mut r = Reader {
        entries: BTreeMap::new(),
        effective: BTreeMap::new(),
        diags: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            r.fail(Some(line), content, "expected `key = value`");
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            r.fail(Some(line), k, "empty key or value");
            continue;
        }
        if !KNOWN_KEYS.contains(&k) {
            r.fail(Some(line), k, "unknown key");
            continue;
        }
        if let Some(prev) = r.entries.get(k) {
            let msg = format!("duplicate key, first set on line {}", prev.line);
            r.fail(Some(line), k, msg);
            continue;
        }
        r.entries.insert(
            k.to_string(),
            Entry {
                line,
                value: v.to_string(),
            },
        );
    }

    let seed = r.get("seed", 20_240_601u64, "20240601", |s| {
        s.parse::<u64>().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
    });

    let kind = r.get("domain.kind", "disk".to_string(), "disk", |s| match s {
        "disk" | "ellipse" | "polygon" => Ok(s.to_string()),
        _ => Err(format!("expected disk, ellipse or polygon, got `{s}`")),
    });
    let domain = match kind.as_str() {
        "ellipse" => {
            let a = r.required("domain.a", "for an ellipse", positive).unwrap_or(1.0);
            let b = r.required("domain.b", "for an ellipse", positive).unwrap_or(1.0);
            DomainSpec::Ellipse { a, b }
        }
        "polygon" => {
            let vertices = r.required("domain.vertices", "for a polygon", point_list).unwrap_or_default();
            let corner_radius = r.positive("domain.corner_radius", 0.1);
            DomainSpec::SmoothedPolygon { vertices, corner_radius }
        }
        _ => DomainSpec::Disk {
            radius: r.positive("domain.radius", 1.0),
        },
    };
    let domain_rho = r.optional("domain.rho", positive);

    let h = r.positive("grid.h", 1.0 / 64.0);
    let ladder_line = r.entries.get("grid.ladder").map(|e| e.line);
    let ladder = r.optional("grid.ladder", number_list).unwrap_or_else(|| vec![h]);
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        r.fail(ladder_line, "grid.ladder", "mesh widths must be strictly decreasing");
    }

    let source = r.get("phi.source", "ma".to_string(), "ma", |s| match s {
        "ma" | "closed-form" => Ok(s.to_string()),
        _ => Err(format!("expected ma or closed-form, got `{s}`")),
    });
    let phi = if source == "closed-form" {
        let e = r
            .required("phi.expr", "when phi.source = closed-form", scalar_expr)
            .unwrap_or(ScalarExpr::Quadratic { a11: 1.0, a12: 0.0, a22: 1.0 });
        PhiSource::ClosedForm(e)
    } else {
        let f = r.get("phi.f", ScalarSource::Expr(ScalarExpr::Constant(1.0)), "constant(1)", scalar_source);
        let boundary = r.get(
            "phi.boundary",
            ScalarExpr::Quadratic { a11: 1.0, a12: 0.0, a22: 1.0 },
            "quadratic(1)",
            scalar_expr,
        );
        PhiSource::Ma { f, boundary }
    };
    let lambda = r.positive("pinching.lambda", 1.0);
    let upper = r.positive("pinching.upper", 2.0);

    let force = r.get("field.F", VectorSource::Expr(VectorExpr::Constant(1.0, 0.0)), "constant(1, 0)", vector_source);
    let div_boundary = r.get("div.boundary", ScalarExpr::Constant(0.0), "constant(0)", scalar_expr);
    let varphi = r.get(
        "boundary.varphi",
        ScalarExpr::Linear { c0: 0.0, c1: 1.0, c2: 0.5 },
        "linear(1, 0.5)",
        scalar_expr,
    );
    let alpha = r.get("boundary.alpha", 1.0, "1", |s| {
        let v = number(s)?;
        if v > 0.0 && v <= 1.0 {
            Ok(v)
        } else {
            Err(format!("Hölder class must lie in (0, 1], got {v}"))
        }
    });
    let psi = r.get("boundary.psi", ScalarExpr::Constant(1.0), "constant(1)", scalar_expr);

    let poles = match r.optional("poles.list", point_list) {
        Some(list) => PoleSpec::List(list),
        None => PoleSpec::Random {
            interior: r.usize("poles.count", 5),
            near: r.usize("poles.near", 0),
            near_depth: r.positive("poles.near_depth", 0.03),
            min_depth: r.positive("poles.min_depth", 0.05),
            seed: r.get("poles.seed", seed, &seed.to_string(), |s| {
                s.parse::<u64>().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
            }),
        },
    };

    let kappas = r.get("ladder.kappa", DEFAULT_KAPPAS.to_vec(), &list_text(&DEFAULT_KAPPAS), number_list);
    let qs = r.get("ladder.q", DEFAULT_QS.to_vec(), &list_text(&DEFAULT_QS), number_list);
    let default_k = lmalab::green::geometric_ladder(0.1, 0.8, 8);
    let k_levels = r.get("ladder.k", default_k.clone(), &list_text(&default_k), |s| {
        let v = number_list(s)?;
        if v.iter().any(|&k| k >= 1.0) {
            return Err("levels are fractions of max G and must lie in (0, 1)".into());
        }
        Ok(v)
    });

    let linear_tol = r.positive("solver.tol", 1e-10);
    let ma_tol = r.positive("solver.ma_tol", 1e-8);
    let solver = r.get("solver.linear", LinearSolver::Pcg, "pcg", |s| match s {
        "pcg" => Ok(LinearSolver::Pcg),
        "cholesky" => Ok(LinearSolver::Cholesky),
        _ => Err(format!("expected pcg or cholesky, got `{s}`")),
    });
    let local_delta = r.optional("green.local_delta", positive);

    let holder = HolderSettings {
        pairs: r.usize("holder.pairs", 20_000),
        boundary_points: r.usize("holder.boundary_points", 8),
        delta: r.positive("holder.delta", 0.25),
        interior_depth: r.positive("holder.interior_depth", 0.25),
    };
    let abreu = AbreuSettings {
        theta: r.get("abreu.theta", 0.5, "0.5", |s| {
            let v = number(s)?;
            if v > 0.0 && v <= 1.0 {
                Ok(v)
            } else {
                Err(format!("damping must lie in (0, 1], got {v}"))
            }
        }),
        max_iter: r.usize("abreu.max_iter", 200),
        tol: r.positive("abreu.tol", 1e-8),
        max_clamp: r.f64("abreu.max_clamp", 0.01),
        forcing_off: r.get("abreu.forcing", false, "p-laplacian", |s| match s {
            "p-laplacian" => Ok(false),
            "off" => Ok(true),
            _ => Err(format!("expected p-laplacian or off, got `{s}`")),
        }),
    };
    let output = r.get("output.dir", PathBuf::from("out"), "out", |s| Ok(PathBuf::from(s)));

    if r.diags.iter().any(|d| d.severity == Severity::Error) {
        r.diags.sort_by_key(|d| d.line.unwrap_or(0));
        return Err(r.diags);
    }
    let lines = r.entries.iter().map(|(k, e)| (k.clone(), e.line)).collect();
    Ok(ExperimentConfig {
        seed,
        domain,
        domain_rho,
        h,
        ladder,
        phi,
        lambda,
        upper,
        force,
        div_boundary,
        varphi,
        alpha,
        psi,
        poles,
        kappas,
        qs,
        k_levels,
        linear_tol,
        ma_tol,
        solver,
        local_delta,
        holder,
        abreu,
        output,
        effective: r.effective,
        lines,
    })
}

/// Keys present in the text but not consumed by the selected variants.
pub fn ignored_keys(text: &str, cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if let Some((k, _)) = content.split_once('=') {
            let k = k.trim();
            if KNOWN_KEYS.contains(&k) && !cfg.effective.contains_key(k) {
                out.push(Diagnostic::warning(Some(i + 1), k, "ignored by the selected variant"));
            }
        }
    }
    out
}
