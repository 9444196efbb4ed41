use crate::geometry::lambda_value_bound;
use crate::oracle::Oracle;

use super::{Certificate, SearchConfig, SearchOutcome, Session, LAMBDA_MAX, LAMBDA_MIN};

/// Width of the final log-lambda bracket.
const LOG_TOL: f64 = 1e-9;

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or `f` returns `None`
/// (budget exhausted). Returns the best evaluated `(x, f(x))`, or `None` if
/// nothing was evaluated.
pub fn golden_section_min<F>(lo: f64, hi: f64, tol: f64, mut f: F) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> Option<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut best: Option<(f64, f64)> = None;
    let mut eval = |x: f64, best: &mut Option<(f64, f64)>| -> Option<f64> {
        let y = f(x)?;
        if best.is_none_or(|(_, by)| y < by) {
            *best = Some((x, y));
        }
        Some(y)
    };
    let Some(mut fc) = eval(c, &mut best) else {
        return best;
    };
    let Some(mut fd) = eval(d, &mut best) else {
        return best;
    };
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            match eval(c, &mut best) {
                Some(y) => fc = y,
                None => break,
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            match eval(d, &mut best) {
                Some(y) => fd = y,
                None => break,
            }
        }
    }
    best
}

/// Baseline: minimize `K(lambda) - 2 sqrt(xi * lambda)` over the bracket,
/// keeping the best label seen on the way.
pub fn sarawagi_search<O: Oracle + ?Sized>(
    oracle: &O,
    xi: f64,
    cfg: &SearchConfig,
) -> SearchOutcome<O::Label> {
    let xi = xi.max(0.0);
    let mut s = Session::new(oracle, cfg);
    let mut bound = f64::INFINITY;
    let mut first = f64::NAN;
    golden_section_min(LAMBDA_MIN.ln(), LAMBDA_MAX.ln(), LOG_TOL, |u| {
        if s.exhausted() {
            return None;
        }
        let lambda = u.exp();
        if first.is_nan() {
            first = lambda;
        }
        let a = s.lambda(lambda);
        let k = a.point.lambda_score(lambda);
        bound = bound.min(lambda_value_bound(k, lambda));
        s.log(lambda, None, Some(a.point), bound, 0);
        Some(k - 2.0 * (xi * lambda).sqrt())
    });
    s.finish(Certificate::HeuristicOnly, first)
}

/// `Fbar(lambda) = max_y (h(y)/lambda + lambda g(y))^2 / 4`, from a single
/// oracle call at `lambda^2`. Upper-bounds every `phi`.
pub fn upper_bound_fbar<O: Oracle + ?Sized>(oracle: &O, lambda: f64) -> f64 {
    let mu = lambda * lambda;
    let k = oracle.lambda_oracle(mu).point.lambda_score(mu);
    fbar_from_score(k, lambda)
}

fn fbar_from_score(k: f64, lambda: f64) -> f64 {
    let v = k.max(0.0) / lambda;
    0.25 * v * v
}

/// Golden-section minimization of the convex bound `Fbar` over log-lambda.
pub fn binary_search_upper<O: Oracle + ?Sized>(
    oracle: &O,
    cfg: &SearchConfig,
) -> SearchOutcome<O::Label> {
    let mut s = Session::new(oracle, cfg);
    let mut min_fbar = f64::INFINITY;
    let mut first = f64::NAN;
    golden_section_min(LAMBDA_MIN.ln(), LAMBDA_MAX.ln(), LOG_TOL, |u| {
        if s.exhausted() || (min_fbar.is_finite() && s.best_phi > cfg.stop_ratio * min_fbar) {
            return None;
        }
        let lambda = u.exp();
        let mu = lambda * lambda;
        if first.is_nan() {
            first = mu;
        }
        let a = s.lambda(mu);
        let fbar = fbar_from_score(a.point.lambda_score(mu), lambda);
        min_fbar = min_fbar.min(fbar);
        s.log(mu, None, Some(a.point), min_fbar, 0);
        Some(fbar)
    });
    let best = s.best_phi;
    s.finish(Certificate::gap(min_fbar, best), first)
}
