//! Margin-rescaling oracles.
//!
//! An [`Oracle`] gives access to the labels of one training example only
//! through `argmax_y h(y) + lambda * g(y)`, optionally restricted to a slope
//! wedge `beta <= g/h <= alpha` with one open side. Backends:
//!
//! * [`EnumerationOracle`]: exact linear scan over materialized points; the
//!   only backend that answers slope-constrained queries.
//! * [`MultiLabelOracle`]: independent binary labels with Hamming error.
//! * [`ChainOracle`]: first-order chain, Viterbi decoding.
//! * [`HierarchyOracle`]: ancestor-closed node sets of a forest.

mod chain;
mod enumeration;
mod hierarchy;
mod multilabel;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LabelPoint, Slope};

pub use chain::ChainOracle;
pub use enumeration::{enumeration_backend, EnumerationOracle};
pub use hierarchy::close_upward;
pub use hierarchy::HierarchyOracle;
pub use multilabel::MultiLabelOracle;

/// Largest label space that [`Oracle::enumerate`] will materialize.
pub const MAX_ENUMERATION: u64 = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{backend} oracle cannot honor slope-constrained queries")]
    UnsupportedConstraint { backend: &'static str },
    #[error("invalid oracle query: {0}")]
    InvalidQuery(String),
}

/// Size of a label space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelCount {
    Finite(u64),
    /// Too large to count in a `u64`.
    Structured,
}

/// Which side of a slope wedge is open.
///
/// `AlphaStrict` admits `beta <= g/h < alpha`, `BetaStrict` admits
/// `beta < g/h <= alpha`. An infinite `alpha` never excludes anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrictSide {
    AlphaStrict,
    BetaStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleQuery {
    pub lambda: f64,
    pub alpha: Slope,
    pub beta: Slope,
    pub strict_side: StrictSide,
    /// Skip the ground-truth label.
    pub exclude_zero_loss: bool,
    /// Skip labels with `h <= 0`. Those sit on the vertical ray and can never
    /// carry a positive violation.
    pub positive_h_only: bool,
}

impl OracleQuery {
    /// The query that every label satisfies.
    pub fn unconstrained(lambda: f64) -> Self {
        OracleQuery {
            lambda,
            alpha: Slope::Infinite,
            beta: Slope::ZERO,
            strict_side: StrictSide::AlphaStrict,
            exclude_zero_loss: false,
            positive_h_only: false,
        }
    }

    pub fn wedge(lambda: f64, alpha: Slope, beta: Slope, strict_side: StrictSide) -> Self {
        OracleQuery {
            lambda,
            alpha,
            beta,
            strict_side,
            exclude_zero_loss: false,
            positive_h_only: false,
        }
    }

    pub fn with_positive_h_only(mut self) -> Self {
        self.positive_h_only = true;
        self
    }

    pub fn with_exclude_zero_loss(mut self) -> Self {
        self.exclude_zero_loss = true;
        self
    }

    pub fn is_unconstrained(&self) -> bool {
        self.alpha.is_infinite()
            && self.beta.is_zero()
            && self.strict_side == StrictSide::AlphaStrict
            && !self.exclude_zero_loss
            && !self.positive_h_only
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(OracleError::InvalidQuery(format!(
                "lambda = {}",
                self.lambda
            )));
        }
        let beta_ok = matches!(self.beta, Slope::Finite(b) if b >= 0.0);
        if !beta_ok || self.alpha < self.beta {
            return Err(OracleError::InvalidQuery(format!(
                "wedge alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Slope-wedge membership of a point (the ground-truth exclusion is the
    /// backend's business since it depends on label identity).
    pub fn admits(&self, p: &LabelPoint) -> bool {
        if self.positive_h_only && !(p.h > 0.0) {
            return false;
        }
        let slope = p.slope();
        let below_alpha = match (self.alpha, slope) {
            (Slope::Infinite, _) => true,
            (Slope::Finite(_), Slope::Infinite) => false,
            (Slope::Finite(a), Slope::Finite(s)) => match self.strict_side {
                StrictSide::AlphaStrict => s < a,
                StrictSide::BetaStrict => s <= a,
            },
        };
        if !below_alpha {
            return false;
        }
        match (self.beta, slope) {
            (_, Slope::Infinite) => true,
            (Slope::Infinite, Slope::Finite(_)) => false,
            (Slope::Finite(b), Slope::Finite(s)) => match self.strict_side {
                StrictSide::AlphaStrict => s >= b,
                StrictSide::BetaStrict => s > b,
            },
        }
    }
}

/// A label returned by an oracle, together with its `(h, g)` image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAnswer<L> {
    pub label: L,
    pub point: LabelPoint,
}

impl<L> OracleAnswer<L> {
    pub fn new(label: L, point: LabelPoint) -> Self {
        Self { label, point }
    }
}

/// Access to the labels of one example through margin-rescaling inference.
///
/// Implementations are immutable; every method takes `&self` and may be
/// called from several threads.
pub trait Oracle: Sync {
    type Label: Clone + Debug + PartialEq + Send + Sync;

    fn backend_name(&self) -> &'static str;

    fn label_count(&self) -> LabelCount;

    /// `(h, g)` of an arbitrary label.
    fn point(&self, label: &Self::Label) -> LabelPoint;

    /// `argmax_y h(y) + lambda * g(y)` over the whole label space. Ties go to
    /// the smallest label in the backend's label order.
    fn lambda_oracle(&self, lambda: f64) -> OracleAnswer<Self::Label>;

    /// Maximizer of `h + lambda * g` among the labels admitted by `query`,
    /// or `None` when no label is admitted.
    fn constrained_lambda_oracle(
        &self,
        query: &OracleQuery,
    ) -> Result<Option<OracleAnswer<Self::Label>>, OracleError> {
        query.validate()?;
        if query.is_unconstrained() {
            Ok(Some(self.lambda_oracle(query.lambda)))
        } else {
            Err(OracleError::UnsupportedConstraint {
                backend: self.backend_name(),
            })
        }
    }

    fn supports_constraints(&self) -> bool {
        false
    }

    /// All labels with their points, in label order, when the space is small
    /// enough to materialize (at most [`MAX_ENUMERATION`] labels).
    fn enumerate(&self) -> Option<Vec<OracleAnswer<Self::Label>>> {
        None
    }

    /// Ground-truth label, when the backend knows it.
    fn gold(&self) -> Option<Self::Label> {
        None
    }
}

/// Materialize a structured backend into an [`EnumerationOracle`] so that it
/// can answer constrained queries.
pub fn materialize<O: Oracle>(oracle: &O) -> Option<EnumerationOracle<O::Label>> {
    let answers = oracle.enumerate()?;
    let gold = oracle.gold();
    Some(EnumerationOracle::from_answers(answers, gold))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admits_respects_strictness() {
        let on_alpha = LabelPoint::new(1.0, 2.0);
        let on_beta = LabelPoint::new(2.0, 1.0);
        let inside = LabelPoint::new(1.0, 1.0);
        let a = Slope::Finite(2.0);
        let b = Slope::Finite(0.5);
        let qa = OracleQuery::wedge(1.0, a, b, StrictSide::AlphaStrict);
        let qb = OracleQuery::wedge(1.0, a, b, StrictSide::BetaStrict);
        assert!(!qa.admits(&on_alpha) && qa.admits(&on_beta) && qa.admits(&inside));
        assert!(qb.admits(&on_alpha) && !qb.admits(&on_beta) && qb.admits(&inside));
    }

    #[test]
    fn vertical_ray_only_in_unbounded_wedges() {
        let vertical = LabelPoint::new(-0.5, 3.0);
        let q = OracleQuery::wedge(1.0, Slope::Infinite, Slope::ZERO, StrictSide::BetaStrict);
        assert!(q.admits(&vertical));
        assert!(!q.with_positive_h_only().admits(&vertical));
        let bounded = OracleQuery::wedge(
            1.0,
            Slope::Finite(1e12),
            Slope::ZERO,
            StrictSide::BetaStrict,
        );
        assert!(!bounded.admits(&vertical));
    }

    #[test]
    fn zero_slope_excluded_by_open_beta() {
        let flat = LabelPoint::new(1.0, 0.0);
        let root = OracleQuery::wedge(1.0, Slope::Infinite, Slope::ZERO, StrictSide::BetaStrict);
        assert!(!root.admits(&flat));
        assert!(OracleQuery::unconstrained(1.0).admits(&flat));
    }

    #[test]
    fn validate_rejects_inverted() {
        let q = OracleQuery::wedge(
            1.0,
            Slope::Finite(1.0),
            Slope::Finite(2.0),
            StrictSide::BetaStrict,
        );
        assert!(q.validate().is_err());
        let q = OracleQuery::wedge(-1.0, Slope::Infinite, Slope::ZERO, StrictSide::BetaStrict);
        assert!(q.validate().is_err());
    }
}
