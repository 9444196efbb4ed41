use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::{capacity, lambda_value_bound, subopt_bound, LabelPoint, Slope};
use crate::oracle::{Oracle, OracleError, OracleQuery, StrictSide};

use super::{Certificate, QueueDiscipline, SearchConfig, SearchOutcome, Session};

/// Wedges narrower than this (relative to `alpha`) are treated as exhausted.
const WEDGE_RTOL: f64 = 1e-12;

/// A slope wedge `beta <= g/h <= alpha` with one open side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub alpha: Slope,
    pub beta: Slope,
    pub strict_side: StrictSide,
    /// Largest `phi` any label inside may still have.
    pub upper_bound: f64,
    pub depth: usize,
}

impl Angle {
    /// The whole positive quadrant minus the `g = 0` axis.
    pub fn root() -> Self {
        Angle {
            alpha: Slope::Infinite,
            beta: Slope::ZERO,
            strict_side: StrictSide::BetaStrict,
            upper_bound: f64::INFINITY,
            depth: 0,
        }
    }

    /// Root wedge that assumes the optimum is at least `phi_floor`: every
    /// such label has slope in `[phi_floor / h_hat^2, g_hat^2 / phi_floor]`.
    pub fn with_floor(h_hat: f64, g_hat: f64, phi_floor: f64) -> Self {
        Angle {
            alpha: Slope::Finite(g_hat * g_hat / phi_floor),
            beta: Slope::Finite(phi_floor / (h_hat * h_hat)),
            ..Angle::root()
        }
    }

    pub fn capacity(&self) -> Option<f64> {
        capacity(self.alpha, self.beta).ok()
    }

    fn is_exhausted(&self) -> bool {
        match (self.alpha, self.beta) {
            (Slope::Finite(a), Slope::Finite(b)) => a - b <= WEDGE_RTOL * a,
            _ => false,
        }
    }

    /// Constrained query for this wedge. Labels with `h <= 0` never carry a
    /// positive violation and are skipped.
    pub fn query(&self, lambda: f64) -> OracleQuery {
        OracleQuery::wedge(lambda, self.alpha, self.beta, self.strict_side).with_positive_h_only()
    }
}

/// Multiplier for a wedge: the one whose tangency ray is the geometric mean
/// of the two boundaries, or `lambda0` for an unbounded wedge.
pub fn angle_lambda(a: &Angle, lambda0: f64) -> f64 {
    match (a.alpha, a.beta) {
        (Slope::Finite(al), Slope::Finite(b)) if b > 0.0 => 1.0 / (al * b).sqrt(),
        _ => lambda0,
    }
}

/// `phi(answer) * B(capacity)` for a visited wedge, `+inf` otherwise. The
/// answer must come from a query at [`angle_lambda`].
pub fn angle_upper_bound(a: &Angle, answer: Option<&LabelPoint>) -> f64 {
    match (answer, a.capacity()) {
        (Some(p), Some(v)) => p.phi() * subopt_bound(v),
        _ => f64::INFINITY,
    }
}

/// Splits `a` after its query at `lambda` returned `z`.
///
/// With `z' = z.mirror(lambda)`, `P`/`Q` the steeper/flatter of the two and
/// `R` the tangency ray at slope `1/lambda`, the children are `(P, R)` and
/// `(R, Q)`. Labels outside `[Q, P]` lie under the score line and outside
/// the hyperbola through `z`, so they cannot beat `z`. Both children leave
/// open the side that would readmit `z`'s ray; together they cover
/// `[Q, P]` minus that ray exactly once.
///
/// Returns `None` when `z` is tangent to its score line's hyperbola: `z` is
/// then the best label in the wedge.
pub fn split_angle(a: &Angle, lambda: f64, z: &LabelPoint) -> Option<(Angle, Angle)> {
    debug_assert!(z.h > 0.0 && z.g > 0.0, "split of a non-violating point {z}");
    if z.is_tangent(lambda) {
        return None;
    }
    let (top, bottom) = (a.alpha.value(), a.beta.value());
    let sz = z.g / z.h;
    let sm = z.h / (lambda * lambda * z.g);
    let z_is_p = sz >= sm;
    let (dp, dq) = if z_is_p { (sz, sm) } else { (sm, sz) };
    let dp = dp.clamp(bottom, top);
    let dq = dq.clamp(bottom, top);
    let dr = (1.0 / lambda).clamp(dq, dp);
    let side = if z_is_p {
        StrictSide::AlphaStrict
    } else {
        StrictSide::BetaStrict
    };
    let k = z.lambda_score(lambda);
    let upper = a.upper_bound.min(lambda_value_bound(k, lambda));
    let child = |alpha: f64, beta: f64| Angle {
        alpha: Slope::Finite(alpha),
        beta: Slope::Finite(beta),
        strict_side: side,
        upper_bound: upper,
        depth: a.depth + 1,
    };
    Some((child(dp, dr), child(dr, dq)))
}

/// Largest `phi` over labels with slope in `[beta, alpha]` lying under
/// every score line `h + lambda g <= k` in `cuts`.
///
/// Along a ray of slope `s` the binding line decides how far out a label
/// can sit, so the bound is `max_s s * min_i (k_i / (1 + lambda_i s))^2`.
/// Each term peaks at `s = 1/lambda_i`; the maximum is at such a peak, at
/// a crossing of two lines, or at a wedge boundary.
pub fn cut_bound(alpha: Slope, beta: Slope, cuts: &[(f64, f64)]) -> f64 {
    if cuts.is_empty() {
        return f64::INFINITY;
    }
    if cuts.iter().any(|&(_, k)| k <= 0.0) {
        return 0.0;
    }
    let (lo, hi) = (beta.value(), alpha.value());
    let value = |s: f64| {
        let r = cuts
            .iter()
            .map(|&(l, k)| k / (1.0 + l * s))
            .fold(f64::INFINITY, f64::min);
        s * r * r
    };
    let mut candidates: Vec<f64> = vec![lo];
    if hi.is_finite() {
        candidates.push(hi);
    }
    for (i, &(li, ki)) in cuts.iter().enumerate() {
        candidates.push(1.0 / li);
        for &(lj, kj) in &cuts[i + 1..] {
            let den = ki * lj - kj * li;
            if den != 0.0 {
                candidates.push((kj - ki) / den);
            }
        }
    }
    let best = candidates
        .into_iter()
        .filter(|s| s.is_finite() && *s >= lo && *s <= hi)
        .map(value)
        .fold(0.0, f64::max);
    // Guard against rounding pruning a label that sits on a line.
    best * (1.0 + 1e-12)
}

struct Entry {
    seq: u64,
    angle: Angle,
    cuts: Vec<(f64, f64)>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.angle
            .upper_bound
            .total_cmp(&other.angle.upper_bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Queue {
    Heap(BinaryHeap<Entry>, u64),
    Fifo(VecDeque<Entry>),
}

impl Queue {
    fn new(discipline: QueueDiscipline) -> Self {
        match discipline {
            QueueDiscipline::Priority => Queue::Heap(BinaryHeap::new(), 0),
            QueueDiscipline::Fifo => Queue::Fifo(VecDeque::new()),
        }
    }

    fn push(&mut self, angle: Angle, cuts: Vec<(f64, f64)>) {
        match self {
            Queue::Heap(h, seq) => {
                *seq += 1;
                h.push(Entry {
                    seq: *seq,
                    angle,
                    cuts,
                });
            }
            Queue::Fifo(q) => q.push_back(Entry {
                seq: 0,
                angle,
                cuts,
            }),
        }
    }

    fn pop(&mut self) -> Option<Entry> {
        match self {
            Queue::Heap(h, _) => h.pop(),
            Queue::Fifo(q) => q.pop_front(),
        }
    }

    fn max_bound(&self) -> f64 {
        match self {
            Queue::Heap(h, _) => h.peek().map_or(f64::NEG_INFINITY, |e| e.angle.upper_bound),
            Queue::Fifo(q) => q
                .iter()
                .map(|e| e.angle.upper_bound)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Queue::Heap(h, _) => h.is_empty(),
            Queue::Fifo(q) => q.is_empty(),
        }
    }
}

/// Branch and bound over slope wedges with the constrained oracle.
///
/// Every query returns a label not returned before (or nothing), and every
/// non-empty query spawns at most two wedges, so a run to completion makes
/// at most `2M + 1` constrained queries and returns the exact optimum.
pub fn angular_search<O: Oracle + ?Sized>(
    oracle: &O,
    cfg: &SearchConfig,
) -> Result<SearchOutcome<O::Label>, OracleError> {
    cfg.validate()?;
    if !oracle.supports_constraints() {
        return Err(OracleError::UnsupportedConstraint {
            backend: oracle.backend_name(),
        });
    }
    let mut s = Session::new(oracle, cfg);
    let lambda0 = s.resolve_lambda0();
    let root = match (cfg.h_hat, cfg.g_hat) {
        (Some(h), Some(g)) if cfg.phi_floor > 0.0 && h > 0.0 && g > 0.0 => {
            Angle::with_floor(h, g, cfg.phi_floor)
        }
        _ => Angle::root(),
    };
    // Score lines of the unconstrained probes hold for every label.
    let probe_cuts: Vec<(f64, f64)> = s
        .probes
        .iter()
        .map(|(l, a)| (*l, a.point.lambda_score(*l)))
        .collect();
    let root = Angle {
        upper_bound: cut_bound(root.alpha, root.beta, &probe_cuts),
        ..root
    };
    let mut queue = Queue::new(cfg.queue);
    queue.push(root, probe_cuts);
    let global_upper = |s: &Session<O>, q: &Queue| s.best_phi.max(q.max_bound());

    let certificate = loop {
        if queue.is_empty() {
            break Certificate::Exact;
        }
        let upper = global_upper(&s, &queue);
        if s.best_phi > cfg.stop_ratio * upper || s.exhausted() {
            break Certificate::gap(upper, s.best_phi);
        }
        let Entry { angle, cuts, .. } = queue.pop().expect("non-empty queue");
        if angle.upper_bound <= s.best_phi.max(cfg.epsilon_viol) || angle.is_exhausted() {
            continue;
        }
        let lambda = angle_lambda(&angle, lambda0);
        let q = angle.query(lambda);
        let answer = s.constrained(&q)?;
        let point = answer.map(|a| a.point);
        if let Some(z) = point {
            if let Some((hi, lo)) = split_angle(&angle, lambda, &z) {
                let mut cuts = cuts;
                cuts.push((lambda, z.lambda_score(lambda)));
                for child in [hi, lo] {
                    let child = Angle {
                        upper_bound: child.upper_bound.min(cut_bound(
                            child.alpha,
                            child.beta,
                            &cuts,
                        )),
                        ..child
                    };
                    if child.upper_bound > s.best_phi {
                        queue.push(child, cuts.clone());
                    }
                }
            }
        }
        let upper = global_upper(&s, &queue);
        s.log(lambda, Some(&q), point, upper, angle.depth);
    };
    Ok(s.finish(certificate, lambda0))
}
