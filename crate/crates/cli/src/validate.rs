//! Dry-run checks of a parsed config against the structural hypotheses.

use lmalab::catalog::ScalarExpr;
use lmalab::geometry::{build_domain, check_quadratic_separation_fn, check_uniform_interior_ball, ConvexDomain};
use lmalab::grid::discretize_coarse;

use crate::config::{ignored_keys, Diagnostic, ExperimentConfig, PhiSource, PoleSpec, ScalarSource, VectorSource};

const BOUNDARY_SAMPLES: usize = 256;
const SEPARATION_SAMPLES: usize = 64;

/// Every diagnostic for `cfg`; `text` is the config source for line numbers
/// of ignored keys. Never panics and never returns early on the first error.
pub fn validate(cfg: &ExperimentConfig, text: &str) -> Vec<Diagnostic> {
    let mut d = ignored_keys(text, cfg);
    let line = |k: &str| cfg.line_of(k);

    if cfg.lambda > cfg.upper {
        d.push(Diagnostic::error(
            line("pinching.lambda").or(line("pinching.upper")),
            "pinching.lambda",
            format!(
                "pinching.lambda = {} exceeds pinching.upper = {}",
                cfg.lambda, cfg.upper
            ),
        ));
    }

    let domain = match build_domain(&cfg.domain) {
        Ok(dom) => dom,
        Err(e) => {
            d.push(Diagnostic::error(line("domain.kind"), "domain.kind", e.to_string()));
            return d;
        }
    };

    if let Some(rho) = cfg.domain_rho {
        let ball = check_uniform_interior_ball(&domain, rho);
        if !ball.holds {
            d.push(Diagnostic::warning(
                line("domain.rho"),
                "domain.rho",
                format!(
                    "tangent-ball check fails for rho = {rho}: clearance {:.3e} at ({:.4}, {:.4}); the domain admits rho = {:.4}",
                    ball.clearance,
                    ball.worst_point[0],
                    ball.worst_point[1],
                    domain.rho()
                ),
            ));
        }
    }

    let key_h = if cfg.lines.contains_key("grid.ladder") { "grid.ladder" } else { "grid.h" };
    for &h in &cfg.ladder {
        if h > domain.rho() / 4.0 {
            d.push(Diagnostic::error(
                line(key_h),
                key_h,
                format!("h = {h} is too coarse for rho = {:.4} (need h <= rho/4)", domain.rho()),
            ));
        }
    }

    check_sources(cfg, &domain, &mut d);
    check_phi(cfg, &domain, &mut d);

    let psi_min = domain
        .boundary_samples(BOUNDARY_SAMPLES)
        .iter()
        .map(|s| cfg.psi.eval(s.point))
        .fold(f64::INFINITY, f64::min);
    if !(psi_min > 0.0) {
        d.push(Diagnostic::error(
            line("boundary.psi"),
            "boundary.psi",
            format!("boundary data for w violates inf_∂Ω ψ > 0 (minimum over the boundary is {psi_min})"),
        ));
    }

    if let PoleSpec::List(list) = &cfg.poles {
        for p in list {
            if !domain.contains(*p) {
                d.push(Diagnostic::error(
                    line("poles.list"),
                    "poles.list",
                    format!("pole ({}, {}) lies outside the domain", p[0], p[1]),
                ));
            }
        }
        if list.is_empty() {
            d.push(Diagnostic::error(line("poles.list"), "poles.list", "no poles given"));
        }
    }

    if let Some(delta) = cfg.local_delta {
        if delta > domain.circumradius() {
            d.push(Diagnostic::warning(
                line("green.local_delta"),
                "green.local_delta",
                format!("radius {delta} covers the whole domain"),
            ));
        }
    }
    d
}

/// Range of a scalar expression over the nodes of a coarse grid.
fn sampled_range(e: &ScalarExpr, domain: &ConvexDomain, h: f64) -> Option<(f64, f64)> {
    if let Some(b) = e.value_bounds() {
        return Some(b);
    }
    let g = discretize_coarse(domain, h).ok()?;
    let v = (0..g.unknown_count()).map(|u| e.eval(g.position(u)));
    Some(v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x))))
}

fn check_sources(cfg: &ExperimentConfig, domain: &ConvexDomain, d: &mut Vec<Diagnostic>) {
    let h = cfg.ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    if let PhiSource::Ma { f, .. } = &cfg.phi {
        match f {
            ScalarSource::Expr(e) => {
                if let Some((lo, hi)) = sampled_range(e, domain, h) {
                    if lo < cfg.lambda || hi > cfg.upper {
                        d.push(Diagnostic::error(
                            cfg.line_of("phi.f"),
                            "phi.f",
                            format!(
                                "density range [{lo}, {hi}] is outside the pinching bounds [{}, {}]",
                                cfg.lambda, cfg.upper
                            ),
                        ));
                    }
                }
            }
            ScalarSource::File(p) => {
                if !p.exists() {
                    d.push(Diagnostic::error(cfg.line_of("phi.f"), "phi.f", format!("file {} not found", p.display())));
                }
            }
        }
    }
    if let VectorSource::Files(a, b) = &cfg.force {
        for p in [a, b] {
            if !p.exists() {
                d.push(Diagnostic::error(cfg.line_of("field.F"), "field.F", format!("file {} not found", p.display())));
            }
        }
    }
}

fn check_phi(cfg: &ExperimentConfig, domain: &ConvexDomain, d: &mut Vec<Diagnostic>) {
    let PhiSource::ClosedForm(e) = &cfg.phi else {
        return;
    };
    let line = cfg.line_of("phi.expr");
    let samples = domain.boundary_samples(SEPARATION_SAMPLES);
    if samples.iter().any(|s| e.gradient(s.point).is_none()) {
        d.push(Diagnostic::warning(line, "phi.expr", "no closed-form gradient, quadratic separation not checked"));
    } else {
        let sep = check_quadratic_separation_fn(domain, SEPARATION_SAMPLES, |p| e.eval(p), |p| e.gradient(p).unwrap(), 1.0);
        let best = sep.min_quotient.min(1.0 / sep.max_quotient);
        if !(best > 0.0) {
            d.push(Diagnostic::error(
                line,
                "phi.expr",
                format!(
                    "boundary data is not quadratically separated: separation quotients span [{:.4}, {:.4}]",
                    sep.min_quotient, sep.max_quotient
                ),
            ));
        }
    }
    let h = cfg.ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    let Ok(g) = discretize_coarse(domain, h) else {
        return;
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for u in 0..g.unknown_count() {
        match e.hessian(g.position(u)) {
            Some(m) => {
                lo = lo.min(m.det());
                hi = hi.max(m.det());
            }
            None => {
                d.push(Diagnostic::warning(line, "phi.expr", "no closed-form Hessian, pinching not checked"));
                return;
            }
        }
    }
    if lo < cfg.lambda || hi > cfg.upper {
        d.push(Diagnostic::error(
            line,
            "phi.expr",
            format!(
                "det D^2 phi ranges over [{lo:.6}, {hi:.6}], outside the pinching bounds [{}, {}]",
                cfg.lambda, cfg.upper
            ),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse, Severity};

    fn errors(text: &str) -> Vec<Diagnostic> {
        let c = parse(text).unwrap();
        validate(&c, text).into_iter().filter(|d| d.severity == Severity::Error).collect()
    }

    #[test]
    fn default_config_is_clean() {
        assert!(validate(&parse("").unwrap(), "").is_empty());
    }

    #[test]
    fn inverted_pinching_names_both_fields() {
        let e = errors("pinching.lambda = 3\npinching.upper = 2\n");
        let m = &e.iter().find(|d| d.key == "pinching.lambda").unwrap().message;
        assert!(m.contains("pinching.lambda") && m.contains("pinching.upper"));
    }

    #[test]
    fn psi_floor_cites_hypothesis() {
        let e = errors("boundary.psi = linear(1, 0)\n");
        assert!(e.iter().any(|d| d.message.contains("inf_∂Ω ψ > 0")));
    }

    #[test]
    fn ellipse_rho_warning() {
        let text = "domain.kind = ellipse\ndomain.a = 1\ndomain.b = 0.5\ndomain.rho = 0.3\ngrid.h = 0.03125\n";
        let d = validate(&parse(text).unwrap(), text);
        let w = d.iter().find(|x| x.key == "domain.rho").unwrap();
        assert_eq!(w.severity, Severity::Warning);
        assert_eq!(w.line, Some(4));
    }

    #[test]
    fn closed_form_hypotheses() {
        assert!(errors("phi.source = closed-form\nphi.expr = quadratic(1)\npinching.upper = 1\n").is_empty());
        let e = errors("phi.source = closed-form\nphi.expr = saddle(1)\n");
        assert!(e.iter().any(|d| d.message.contains("quadratically separated")));
        assert!(e.iter().any(|d| d.message.contains("pinching")));
    }

    #[test]
    fn density_outside_bounds() {
        let e = errors("phi.f = constant(3)\n");
        assert_eq!(e[0].key, "phi.f");
    }
}
