//! Maximizers of the slack-rescaled violation `phi(y) = h(y) * g(y)`.
//!
//! * [`sarawagi_search`]: golden-section minimization of the Lagrangian dual
//!   of the constrained form, a heuristic baseline.
//! * [`binary_search_upper`]: golden-section minimization of the convex upper
//!   bound `Fbar(lambda) = max_y (h/lambda + lambda g)^2 / 4`.
//! * [`bisecting_search`]: halves the feasible lambda range, tracking the
//!   coordinate ranges that the optimum can still occupy.
//! * [`angular_search`]: branch and bound over slope wedges with the
//!   constrained oracle; the only one that is exact.
//!
//! The first three only call [`Oracle::lambda_oracle`] and can miss labels
//! that lie strictly inside the convex hull of the label points.

mod angular;
mod bisecting;
mod golden;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::{lambda_value_bound, LabelPoint};
use crate::oracle::{materialize, Oracle, OracleAnswer, OracleError, OracleQuery};

pub use angular::{angle_lambda, angle_upper_bound, angular_search, cut_bound, split_angle, Angle};
pub use bisecting::{bisecting_search, early_stop_check};
pub use golden::{binary_search_upper, golden_section_min, sarawagi_search, upper_bound_fbar};

/// Lower end of the lambda bracket used by the golden-section searches.
pub const LAMBDA_MIN: f64 = 1e-6;
/// Upper end of the lambda bracket used by the golden-section searches.
pub const LAMBDA_MAX: f64 = 1e6;

/// How a search vouches for its answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    /// No label has a larger `phi` than the one returned.
    Exact,
    /// `phi* <= ratio * best_phi`.
    BoundGap(f64),
    HeuristicOnly,
}

impl Certificate {
    fn gap(upper: f64, best: f64) -> Certificate {
        let ratio = if upper <= best {
            1.0
        } else if best > 0.0 {
            upper / best
        } else {
            f64::INFINITY
        };
        Certificate::BoundGap(ratio)
    }
}

/// Order in which angular search expands wedges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueueDiscipline {
    /// Largest upper bound first.
    Priority,
    /// Breadth first.
    Fifo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Initial multiplier. `None` derives it from `h_hat / g_hat`, probing
    /// the oracle for whichever estimate is missing.
    pub lambda0: Option<f64>,
    /// Assumed lower bound on the optimum; a positive value together with
    /// both estimates narrows the root wedge of angular search.
    pub phi_floor: f64,
    pub h_hat: Option<f64>,
    pub g_hat: Option<f64>,
    /// Budget over all oracle calls, probes included.
    pub max_queries: usize,
    /// Stop once `best_phi / upper_bound` exceeds this.
    pub stop_ratio: f64,
    /// Violations at or below this are not worth finding.
    pub epsilon_viol: f64,
    pub queue: QueueDiscipline,
    /// Bisecting search: once both ends of the lambda range are known, probe
    /// where the two end labels score equally instead of at the midpoint.
    pub bisect_secant: bool,
    /// Record one [`TraceRecord`] per oracle call.
    pub trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lambda0: None,
            phi_floor: 0.0,
            h_hat: None,
            g_hat: None,
            max_queries: 10_000,
            stop_ratio: 0.999,
            epsilon_viol: 0.0,
            queue: QueueDiscipline::Priority,
            bisect_secant: false,
            trace: false,
        }
    }
}

impl SearchConfig {
    /// Runs every search to completion: no ratio stop, no violation floor.
    pub fn exact() -> Self {
        SearchConfig {
            stop_ratio: 1.0,
            ..SearchConfig::default()
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.stop_ratio > 0.0 && self.stop_ratio <= 1.0) {
            return Err(OracleError::InvalidQuery(format!(
                "stop_ratio = {}",
                self.stop_ratio
            )));
        }
        if self.max_queries == 0 {
            return Err(OracleError::InvalidQuery("max_queries = 0".into()));
        }
        if let Some(l) = self.lambda0 {
            if !(l > 0.0 && l.is_finite()) {
                return Err(OracleError::InvalidQuery(format!("lambda0 = {l}")));
            }
        }
        Ok(())
    }
}

/// One oracle call as seen by a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based index over all oracle calls of the search.
    pub t: usize,
    pub lambda: f64,
    /// Wedge of a constrained call; `None` for an infinite slope.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub constrained: bool,
    /// `(h, g)` of the answer, absent when the wedge was empty.
    pub answer: Option<LabelPoint>,
    pub phi_hat: f64,
    /// Best upper bound on the optimum known after this call.
    pub upper_bound: f64,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome<L> {
    /// `None` when no label with positive `phi` was seen.
    pub best_label: Option<L>,
    /// `(1, 0)`, the image of the ground truth, when no label was found.
    pub best_point: LabelPoint,
    pub best_phi: f64,
    /// All oracle calls, probes included.
    pub queries: usize,
    pub constrained_queries: usize,
    pub certificate: Certificate,
    /// Multiplier used for the first non-probe query.
    pub lambda0: f64,
    pub trace: Vec<TraceRecord>,
}

/// Per-search mutable state: counters, incumbent and trace.
struct Session<'a, O: Oracle + ?Sized> {
    oracle: &'a O,
    cfg: &'a SearchConfig,
    queries: usize,
    constrained: usize,
    best: Option<OracleAnswer<O::Label>>,
    best_phi: f64,
    trace: Vec<TraceRecord>,
    /// Unconstrained calls made while estimating the initial multiplier.
    probes: Vec<(f64, OracleAnswer<O::Label>)>,
}

impl<'a, O: Oracle + ?Sized> Session<'a, O> {
    fn new(oracle: &'a O, cfg: &'a SearchConfig) -> Self {
        Session {
            oracle,
            cfg,
            queries: 0,
            constrained: 0,
            best: None,
            best_phi: 0.0,
            trace: Vec::new(),
            probes: Vec::new(),
        }
    }

    fn exhausted(&self) -> bool {
        self.queries >= self.cfg.max_queries
    }

    fn offer(&mut self, answer: &OracleAnswer<O::Label>) {
        let phi = answer.point.phi();
        if phi > self.best_phi {
            self.best_phi = phi;
            self.best = Some(answer.clone());
        }
    }

    fn lambda(&mut self, lambda: f64) -> OracleAnswer<O::Label> {
        self.queries += 1;
        let a = self.oracle.lambda_oracle(lambda);
        self.offer(&a);
        a
    }

    fn constrained(
        &mut self,
        q: &OracleQuery,
    ) -> Result<Option<OracleAnswer<O::Label>>, OracleError> {
        self.queries += 1;
        self.constrained += 1;
        let a = self.oracle.constrained_lambda_oracle(q)?;
        if let Some(a) = &a {
            self.offer(a);
        }
        Ok(a)
    }

    fn log(
        &mut self,
        lambda: f64,
        query: Option<&OracleQuery>,
        answer: Option<LabelPoint>,
        upper: f64,
        depth: usize,
    ) {
        if !self.cfg.trace {
            return;
        }
        self.trace.push(TraceRecord {
            t: self.queries,
            lambda,
            alpha: query.and_then(|q| q.alpha.finite()),
            beta: query.and_then(|q| q.beta.finite()),
            constrained: query.is_some(),
            answer,
            phi_hat: self.best_phi,
            upper_bound: upper,
            depth,
        });
    }

    fn probe(&mut self, lambda: f64) -> OracleAnswer<O::Label> {
        let a = self.lambda(lambda);
        let k = a.point.lambda_score(lambda);
        self.log(
            lambda,
            None,
            Some(a.point),
            lambda_value_bound(k, lambda),
            0,
        );
        self.probes.push((lambda, a.clone()));
        a
    }

    /// Initial multiplier `h_hat / g_hat`, probing at the ends of the
    /// bracket for missing estimates. Degenerate estimates fall back to 1.
    fn resolve_lambda0(&mut self) -> f64 {
        if let Some(l) = self.cfg.lambda0 {
            return l;
        }
        let h_hat = match self.cfg.h_hat {
            Some(h) => h,
            None => {
                let a = self.probe(LAMBDA_MIN);
                a.point.h
            }
        };
        let g_hat = match self.cfg.g_hat {
            Some(g) => g,
            None => {
                let a = self.probe(LAMBDA_MAX);
                a.point.g
            }
        };
        let l = h_hat / g_hat;
        if l > 0.0 && l.is_finite() {
            l
        } else {
            1.0
        }
    }

    fn finish(self, certificate: Certificate, lambda0: f64) -> SearchOutcome<O::Label> {
        let (best_label, best_point) = match self.best {
            Some(a) => (Some(a.label), a.point),
            None => (None, LabelPoint::new(1.0, 0.0)),
        };
        SearchOutcome {
            best_label,
            best_point,
            best_phi: self.best_phi,
            queries: self.queries,
            constrained_queries: self.constrained,
            certificate,
            lambda0,
            trace: self.trace,
        }
    }
}

/// Search used by the trainers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStrategy {
    Sarawagi,
    BinaryUpper,
    Bisecting,
    Angular,
    /// Scan of every label; reference only.
    Exhaustive,
}

impl SearchStrategy {
    pub const ALL: [SearchStrategy; 5] = [
        SearchStrategy::Sarawagi,
        SearchStrategy::BinaryUpper,
        SearchStrategy::Bisecting,
        SearchStrategy::Angular,
        SearchStrategy::Exhaustive,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SearchStrategy::Sarawagi => "sarawagi",
            SearchStrategy::BinaryUpper => "binary",
            SearchStrategy::Bisecting => "bisecting",
            SearchStrategy::Angular => "angular",
            SearchStrategy::Exhaustive => "exhaustive",
        }
    }
}

impl std::str::FromStr for SearchStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SearchStrategy::ALL
            .iter()
            .copied()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown search strategy `{s}`"))
    }
}

impl std::fmt::Display for SearchStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Best label by scanning the whole label space. One query per label.
pub fn exhaustive_search<O: Oracle + ?Sized>(
    oracle: &O,
) -> Result<SearchOutcome<O::Label>, OracleError> {
    let all = oracle
        .enumerate()
        .ok_or(OracleError::UnsupportedConstraint {
            backend: oracle.backend_name(),
        })?;
    let cfg = SearchConfig::default();
    let mut s = Session::new(oracle, &cfg);
    for a in &all {
        s.offer(a);
    }
    s.queries = all.len();
    Ok(s.finish(Certificate::Exact, f64::NAN))
}

/// Runs `strategy`. Angular search on a backend without constrained queries
/// materializes the label space first when it is small enough.
///
/// `xi` is the current slack of the example; only the Sarawagi baseline
/// uses it.
pub fn run_search<O: Oracle>(
    oracle: &O,
    strategy: SearchStrategy,
    cfg: &SearchConfig,
    xi: f64,
) -> Result<SearchOutcome<O::Label>, OracleError> {
    match strategy {
        SearchStrategy::Sarawagi => Ok(sarawagi_search(oracle, xi, cfg)),
        SearchStrategy::BinaryUpper => Ok(binary_search_upper(oracle, cfg)),
        SearchStrategy::Bisecting => Ok(bisecting_search(oracle, cfg)),
        SearchStrategy::Angular if oracle.supports_constraints() => angular_search(oracle, cfg),
        SearchStrategy::Angular => match materialize(oracle) {
            Some(e) => angular_search(&e, cfg),
            None => Err(OracleError::UnsupportedConstraint {
                backend: oracle.backend_name(),
            }),
        },
        SearchStrategy::Exhaustive => exhaustive_search(oracle),
    }
}

/// Wall-clock helper shared by benchmarks.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}
