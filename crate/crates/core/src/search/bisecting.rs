use crate::geometry::{lambda_value_bound, LabelPoint, Segment};
use crate::oracle::{Oracle, OracleAnswer};

use super::{Certificate, SearchConfig, SearchOutcome, Session, LAMBDA_MAX, LAMBDA_MIN};

/// Relative width at which the lambda range counts as collapsed.
const LAMBDA_RTOL: f64 = 1e-9;

/// True when both ends of `[lambda_lo, lambda_hi]` returned the same label.
/// The oracle answer is then constant on the whole range, so halving it
/// further cannot reveal anything new.
pub fn early_stop_check<L: PartialEq>(lambda_lo: f64, lambda_hi: f64, y_lo: &L, y_hi: &L) -> bool {
    debug_assert!(lambda_lo <= lambda_hi);
    y_lo == y_hi
}

/// Where the score lines of two labels cross: `h_a + l g_a = h_b + l g_b`.
fn crossing(a: &LabelPoint, b: &LabelPoint) -> Option<f64> {
    let dg = b.g - a.g;
    (dg > 0.0).then(|| (a.h - b.h) / dg)
}

/// Bisection over lambda driven by the side of the tangency point each
/// answer lies on.
///
/// An answer with `h >= lambda g` sits right of the tangency point of its
/// score line, so the optimum (among reachable labels) needs a larger
/// lambda; otherwise a smaller one. Until both ends are known the range is
/// grown geometrically from the initial lambda.
pub fn bisecting_search<O: Oracle + ?Sized>(
    oracle: &O,
    cfg: &SearchConfig,
) -> SearchOutcome<O::Label> {
    let mut s = Session::new(oracle, cfg);
    let lambda0 = s.resolve_lambda0().clamp(LAMBDA_MIN, LAMBDA_MAX);
    if let [(l, a), (u, b)] = s.probes.as_slice() {
        if early_stop_check(*l, *u, &a.label, &b.label) {
            let best = s.best_phi;
            let bound = lambda_value_bound(b.point.lambda_score(*u), *u)
                .min(lambda_value_bound(a.point.lambda_score(*l), *l));
            return s.finish(Certificate::gap(bound, best), lambda0);
        }
    }
    let mut h_range = Segment::UNBOUNDED;
    let mut g_range = Segment::UNBOUNDED;
    let mut lo: Option<(f64, OracleAnswer<O::Label>)> = None;
    let mut hi: Option<(f64, OracleAnswer<O::Label>)> = None;
    let mut bound = f64::INFINITY;
    let mut lambda = lambda0;
    // Score line the pending crossing probe is checked against.
    let mut pending_line: Option<LabelPoint> = None;

    while !s.exhausted() {
        let a = s.lambda(lambda);
        let p = a.point;
        let k = p.lambda_score(lambda);
        bound = bound.min(lambda_value_bound(k, lambda));
        s.log(lambda, None, Some(p), bound, 0);
        if s.best_phi >= bound || s.best_phi > cfg.stop_ratio * bound || bound <= cfg.epsilon_viol {
            break;
        }
        if let Some(line) = pending_line.take() {
            // Nothing above the chord between the two end labels: the
            // answer is one of them on the whole range.
            if k <= line.lambda_score(lambda) + 1e-12 * k.abs().max(1.0) {
                break;
            }
        }
        let (hs, gs) = p.feasible_segments(lambda);
        h_range = h_range.intersect(&hs);
        g_range = g_range.intersect(&gs);
        if h_range.is_empty() || g_range.is_empty() {
            break;
        }
        if p.h >= lambda * p.g {
            lo = Some((lambda, a));
        } else {
            hi = Some((lambda, a));
        }
        lambda = match (&lo, &hi) {
            (Some((l, _)), None) => {
                if *l >= LAMBDA_MAX {
                    break;
                }
                (2.0 * l).min(LAMBDA_MAX)
            }
            (None, Some((u, _))) => {
                if *u <= LAMBDA_MIN {
                    break;
                }
                (0.5 * u).max(LAMBDA_MIN)
            }
            (Some((l, ya)), Some((u, yb))) => {
                if early_stop_check(*l, *u, &ya.label, &yb.label) || u - l <= LAMBDA_RTOL * u {
                    break;
                }
                let secant = if cfg.bisect_secant {
                    crossing(&ya.point, &yb.point).filter(|c| *c > *l && *c < *u)
                } else {
                    None
                };
                match secant {
                    Some(c) => {
                        pending_line = Some(ya.point);
                        c
                    }
                    None => 0.5 * (l + u),
                }
            }
            (None, None) => unreachable!("every answer lands on one side"),
        };
    }
    let best = s.best_phi;
    s.finish(Certificate::gap(bound, best), lambda0)
}
