//! Planar geometry of labels.
//!
//! Every label `y` of a training example is mapped to the point
//! `(h(y), g(y))` where `h(y) = 1 + f(y) - f(y_i)` is the margin violation
//! and `g(y) = L(y, y_i)` the task error. The slack-rescaled violation is the
//! coordinate product `h * g`; a margin-rescaling oracle maximizes the linear
//! score `h + lambda * g`. All searches in [`crate::search`] are built from
//! the primitives in this module.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance under which `h == lambda * g` is treated as tangency.
pub const TANGENCY_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("capacity is undefined for an unbounded wedge (alpha = {alpha}, beta = {beta})")]
    UnboundedWedge { alpha: Slope, beta: Slope },
    #[error("wedge is inverted: alpha = {alpha} < beta = {beta}")]
    InvertedWedge { alpha: Slope, beta: Slope },
}

/// Image of a label in the `(h, g)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPoint {
    pub h: f64,
    pub g: f64,
}

impl LabelPoint {
    pub const fn new(h: f64, g: f64) -> Self {
        Self { h, g }
    }

    /// Slack-rescaled violation `h * g`.
    #[inline]
    pub fn phi(&self) -> f64 {
        self.h * self.g
    }

    /// Score maximized by the lambda-oracle, `h + lambda * g`.
    #[inline]
    pub fn lambda_score(&self, lambda: f64) -> f64 {
        self.h + lambda * self.g
    }

    /// Second intersection of the constant-score line and the constant-`phi`
    /// hyperbola through `self`: `(lambda * g, h / lambda)`.
    #[inline]
    pub fn mirror(&self, lambda: f64) -> LabelPoint {
        LabelPoint::new(lambda * self.g, self.h / lambda)
    }

    /// Angular coordinate `g / h`. Points with `h <= 0` sit on the vertical ray.
    #[inline]
    pub fn slope(&self) -> Slope {
        if self.h > 0.0 {
            Slope::Finite(self.g / self.h)
        } else {
            Slope::Infinite
        }
    }

    /// Ranges that the `h` and `g` coordinates of the maximizer of `phi` must
    /// lie in, given that `self` maximizes `h + lambda * g`.
    pub fn feasible_segments(&self, lambda: f64) -> (Segment, Segment) {
        let z = self.mirror(lambda);
        (
            Segment::spanning(self.h, z.h),
            Segment::spanning(self.g, z.g),
        )
    }

    /// True when the point is (numerically) its own mirror, i.e. the
    /// constant-score line is tangent to the hyperbola at this point.
    pub fn is_tangent(&self, lambda: f64) -> bool {
        let lg = lambda * self.g;
        (self.h - lg).abs() <= TANGENCY_RTOL * self.h.abs().max(lg.abs())
    }
}

impl fmt::Display for LabelPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.h, self.g)
    }
}

/// `phi(p) = p.h * p.g`.
pub fn phi(p: &LabelPoint) -> f64 {
    p.phi()
}

/// `L_lambda(p) = p.h + lambda * p.g`.
pub fn lambda_score(p: &LabelPoint, lambda: f64) -> f64 {
    p.lambda_score(lambda)
}

/// See [`LabelPoint::mirror`].
pub fn mirror_point(p: &LabelPoint, lambda: f64) -> LabelPoint {
    p.mirror(lambda)
}

/// See [`LabelPoint::feasible_segments`].
pub fn feasible_segments(p: &LabelPoint, lambda: f64) -> (Segment, Segment) {
    p.feasible_segments(lambda)
}

/// Non-negative extended-real slope `g / h`.
///
/// `Infinite` is a structural value rather than a large float so that the
/// unbounded root wedge can never be fed into [`capacity`] by accident.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slope {
    Finite(f64),
    Infinite,
}

impl Slope {
    pub const ZERO: Slope = Slope::Finite(0.0);

    pub fn value(&self) -> f64 {
        match *self {
            Slope::Finite(v) => v,
            Slope::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Slope::Infinite)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Slope::Finite(v) if *v == 0.0)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Slope::Finite(v) => Some(v),
            Slope::Infinite => None,
        }
    }
}

impl PartialOrd for Slope {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Slope::Infinite, Slope::Infinite) => Some(Ordering::Equal),
            (Slope::Infinite, Slope::Finite(_)) => Some(Ordering::Greater),
            (Slope::Finite(_), Slope::Infinite) => Some(Ordering::Less),
            (Slope::Finite(a), Slope::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Finite(v) => write!(f, "{v}"),
            Slope::Infinite => f.write_str("inf"),
        }
    }
}

/// Closed interval `[lo, hi]`, or the empty segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
}

impl Segment {
    pub const EMPTY: Segment = Segment {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };

    /// The whole real line; the neutral element of [`Segment::intersect`].
    pub const UNBOUNDED: Segment = Segment {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            Segment { lo, hi }
        } else {
            Segment::EMPTY
        }
    }

    /// Smallest segment containing both endpoints.
    pub fn spanning(a: f64, b: f64) -> Self {
        Segment {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn intersect(&self, other: &Segment) -> Segment {
        Segment::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

/// Upper bound `K^2 / (4 lambda)` on the best `phi` given that the largest
/// lambda-score over all labels is `k`.
pub fn lambda_value_bound(k: f64, lambda: f64) -> f64 {
    k * k / (4.0 * lambda)
}

/// Capacity `sqrt(alpha / beta)` of a bounded wedge.
pub fn capacity(alpha: Slope, beta: Slope) -> Result<f64, GeometryError> {
    match (alpha, beta) {
        (Slope::Finite(a), Slope::Finite(b)) if b > 0.0 => {
            if a < b {
                Err(GeometryError::InvertedWedge { alpha, beta })
            } else {
                Ok((a / b).sqrt())
            }
        }
        _ => Err(GeometryError::UnboundedWedge { alpha, beta }),
    }
}

/// `B(a) = (a + 1/a)^2 / 4`, the worst ratio between the best `phi` in a
/// wedge of capacity `a` and the `phi` of the label the oracle returns there.
pub fn subopt_bound(a: f64) -> f64 {
    let s = a + 1.0 / a;
    0.25 * s * s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(a: f64, b: f64, rtol: f64) -> bool {
        (a - b).abs() <= rtol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&LabelPoint::new(2.0, 3.0)), 6.0);
        assert_eq!(phi(&LabelPoint::new(0.0, 5.0)), 0.0);
        assert_eq!(phi(&LabelPoint::new(0.5, 0.5)), 0.25);
    }

    #[test]
    fn lambda_score_examples() {
        let p = LabelPoint::new(1.0, 2.0);
        assert_eq!(lambda_score(&p, 1.0), 3.0);
        assert_eq!(lambda_score(&p, 0.5), 2.0);
        assert!(lambda_score(&p, 0.7) < lambda_score(&p, 0.8));
    }

    #[test]
    fn mirror_examples() {
        let z = mirror_point(&LabelPoint::new(4.0, 1.0), 2.0);
        assert_eq!(z, LabelPoint::new(2.0, 2.0));
        assert_eq!(z.lambda_score(2.0), 6.0);
        assert_eq!(z.phi(), 4.0);
        assert_eq!(
            mirror_point(&LabelPoint::new(1.0, 1.0), 1.0),
            LabelPoint::new(1.0, 1.0)
        );
        assert_eq!(
            mirror_point(&LabelPoint::new(3.0, 2.0), 1.5),
            LabelPoint::new(3.0, 2.0)
        );
    }

    #[test]
    fn segments_examples() {
        // h + 2g = 6 and hg = 4 meet at (4, 1) and (2, 2).
        let (hs, gs) = feasible_segments(&LabelPoint::new(4.0, 1.0), 2.0);
        assert_eq!(hs, Segment::new(2.0, 4.0));
        assert_eq!(gs, Segment::new(1.0, 2.0));
        let (hs, gs) = feasible_segments(&LabelPoint::new(1.0, 1.0), 1.0);
        assert_eq!(hs, Segment::new(1.0, 1.0));
        assert_eq!(gs, Segment::new(1.0, 1.0));
    }

    #[test]
    fn value_bound_examples() {
        assert_eq!(lambda_value_bound(2.0, 1.0), 1.0);
        // one-label instance {(1,1)}: K(lambda) = 1 + lambda
        assert_eq!(lambda_value_bound(3.0, 2.0), 9.0 / 8.0);
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(
            capacity(Slope::Finite(4.0), Slope::Finite(1.0)).unwrap(),
            2.0
        );
        assert_eq!(
            capacity(Slope::Finite(0.3), Slope::Finite(0.3)).unwrap(),
            1.0
        );
        assert!(capacity(Slope::Infinite, Slope::Finite(1.0)).is_err());
        assert!(capacity(Slope::Finite(1.0), Slope::ZERO).is_err());
        assert!(matches!(
            capacity(Slope::Finite(1.0), Slope::Finite(2.0)),
            Err(GeometryError::InvertedWedge { .. })
        ));
    }

    #[test]
    fn subopt_bound_examples() {
        assert_eq!(subopt_bound(1.0), 1.0);
        assert_eq!(subopt_bound(2.0), 25.0 / 16.0);
        let mut prev = subopt_bound(1.0);
        for i in 1..200 {
            let b = subopt_bound(1.0 + i as f64 * 0.05);
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn slope_ordering_and_sentinels() {
        assert!(Slope::Infinite > Slope::Finite(1e300));
        assert!(Slope::ZERO < Slope::Finite(1e-300));
        assert_eq!(LabelPoint::new(0.0, 1.0).slope(), Slope::Infinite);
        assert_eq!(LabelPoint::new(-1.0, 0.0).slope(), Slope::Infinite);
        assert_eq!(LabelPoint::new(2.0, 1.0).slope(), Slope::Finite(0.5));
    }

    #[test]
    fn segment_ops() {
        let a = Segment::new(0.0, 2.0);
        assert!(a.intersect(&Segment::new(3.0, 4.0)).is_empty());
        assert_eq!(a.intersect(&Segment::new(1.0, 4.0)), Segment::new(1.0, 2.0));
        assert_eq!(Segment::UNBOUNDED.intersect(&a), a);
        assert!(Segment::EMPTY.is_empty());
        assert_eq!(Segment::EMPTY.width(), 0.0);
    }

    #[test]
    fn tangency_tolerance() {
        assert!(LabelPoint::new(1.0, 1.0).is_tangent(1.0));
        assert!(LabelPoint::new(1.0 + 1e-12, 1.0).is_tangent(1.0));
        assert!(!LabelPoint::new(1.0 + 1e-6, 1.0).is_tangent(1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point() -> impl Strategy<Value = LabelPoint> {
            (1e-3f64..1e3, 0.0f64..1e3).prop_map(|(h, g)| LabelPoint::new(h, g))
        }

        proptest! {
            #[test]
            fn mirror_preserves_score_and_phi(p in point(), lambda in 1e-3f64..1e3) {
                let z = p.mirror(lambda);
                prop_assert!(rel_close(z.lambda_score(lambda), p.lambda_score(lambda), 1e-12));
                prop_assert!(rel_close(z.phi(), p.phi(), 1e-12) || p.phi() == 0.0);
            }

            #[test]
            fn segment_endpoints_lie_on_line_and_hyperbola(p in point(), lambda in 1e-3f64..1e3) {
                let (hs, gs) = p.feasible_segments(lambda);
                prop_assert!(hs.contains(p.h) && gs.contains(p.g));
                let k = p.lambda_score(lambda);
                let target = p.phi();
                // The endpoints pair up as (lo_h, hi_g) and (hi_h, lo_g).
                for (h, g) in [(hs.lo, gs.hi), (hs.hi, gs.lo)] {
                    prop_assert!(rel_close(h + lambda * g, k, 1e-12));
                    prop_assert!((h * g - target).abs() <= 1e-12 * target.max(1.0) * 4.0);
                }
            }

            #[test]
            fn value_bound_dominates_brute_force(
                pts in proptest::collection::vec(point(), 1..40),
                lambda in 1e-3f64..1e3,
            ) {
                let k = pts.iter().map(|p| p.lambda_score(lambda)).fold(f64::NEG_INFINITY, f64::max);
                let best = pts.iter().map(|p| p.phi()).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(best <= lambda_value_bound(k, lambda) * (1.0 + 1e-12));
            }

            #[test]
            fn split_never_loosens_bound(beta in 1e-3f64..10.0, ratio in 1.0f64..1e4, t in 0.0f64..1.0) {
                // Child capacity of a split is the square root of the capacity
                // of the shrunken parent, which is itself at most the parent's.
                let alpha = beta * ratio;
                let parent = capacity(Slope::Finite(alpha), Slope::Finite(beta)).unwrap();
                let lambda = 1.0 / (alpha * beta).sqrt();
                let slope = beta * (alpha / beta).powf(t);
                let z = LabelPoint::new(1.0, slope);
                let z_m = z.mirror(lambda);
                let (p, q) = if z.g / z.h >= z_m.g / z_m.h { (z, z_m) } else { (z_m, z) };
                let shrunk = ((p.g / p.h) / (q.g / q.h)).sqrt();
                let child = ((p.g / p.h) * lambda).sqrt();
                prop_assert!(shrunk <= parent * (1.0 + 1e-9));
                prop_assert!(rel_close(child * child, shrunk, 1e-9));
                prop_assert!(subopt_bound(child) <= subopt_bound(parent) * (1.0 + 1e-12));
            }
        }
    }
}
