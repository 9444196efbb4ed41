//! Structural SVM trainers for the slack- and margin-rescaled objectives.
//!
//! The regularized objective is `C/2 |w|^2 + 1/n sum_i term_i` where the
//! per-example term is `max_y g(y) h(y)` (slack rescaling) or
//! `max_y h(y) + g(y) - 1` (margin rescaling), both floored at zero by the
//! ground-truth label.

mod cutting_plane;
mod tasks;

pub use cutting_plane::{
    cutting_plane_train, Constraint, CuttingPlaneConfig, RoundRecord, WorkingSet,
};
pub use tasks::{
    bits_from_mask, feature_diff, mask_from_bits, ChainTask, HierarchyTask, MultiLabelTask,
    StructuredTask, TaskSpec,
};

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::generate::SequenceExample;
use crate::data::{MultiLabelDataset, SparseVec};
use crate::eval::{multilabel_metrics, sequence_metrics, MetricsReport, SequenceReport};
use crate::geometry::LabelPoint;
use crate::oracle::{Oracle, OracleError};
use crate::search::{run_search, SearchConfig, SearchStrategy};

pub fn dot(w: &[f64], x: &SparseVec) -> f64 {
    x.iter().map(|&(i, v)| w[i] * v).sum()
}

/// `w += a * x`.
pub fn axpy(w: &mut [f64], a: f64, x: &SparseVec) {
    for &(i, v) in x {
        w[i] += a * v;
    }
}

/// Dot product of two sorted sparse vectors.
pub fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub w: Vec<f64>,
    /// Regularization strength.
    pub c: f64,
}

impl ModelState {
    pub fn zeros(dim: usize, c: f64) -> Self {
        assert!(c > 0.0, "regularization must be positive");
        ModelState {
            w: vec![0.0; dim],
            c,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    Version { found: u32 },
    #[error("checkpoint has {found} weights but the task needs {expected}")]
    Dimension { found: usize, expected: usize },
}

/// JSON checkpoint: format version, task description and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub task: TaskSpec,
    pub model: ModelState,
}

impl Checkpoint {
    pub fn new(task: TaskSpec, model: ModelState) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            task,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version { found: ck.version });
        }
        let expected = match &ck.task {
            TaskSpec::MultiLabel {
                d_features,
                d_labels,
                ..
            } => d_labels * (d_features + 1),
            TaskSpec::Chain {
                states, d_features, ..
            } => states * (d_features + 1) + states * states,
            TaskSpec::Hierarchy {
                parents,
                d_features,
                ..
            } => parents.len() * (d_features + 1),
        };
        if ck.model.w.len() != expected {
            return Err(CheckpointError::Dimension {
                found: ck.model.w.len(),
                expected,
            });
        }
        Ok(ck)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample<X, Y> {
    pub id: usize,
    pub x: X,
    pub y: Y,
}

/// Training examples of a multi-label dataset, in file order.
pub fn multilabel_examples(data: &MultiLabelDataset) -> Vec<TrainingExample<SparseVec, u64>> {
    data.examples
        .iter()
        .enumerate()
        .map(|(id, e)| TrainingExample {
            id,
            x: e.features.clone(),
            y: mask_from_bits(&e.labels),
        })
        .collect()
}

pub fn chain_examples(data: &[SequenceExample]) -> Vec<TrainingExample<Vec<Vec<f64>>, Vec<usize>>> {
    data.iter()
        .enumerate()
        .map(|(id, e)| TrainingExample {
            id,
            x: e.features.clone(),
            y: e.tags.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Slack,
    Margin,
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slack" => Ok(Objective::Slack),
            "margin" => Ok(Objective::Margin),
            _ => Err(format!(
                "unknown objective `{s}` (expected slack or margin)"
            )),
        }
    }
}

/// Most violating label found for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Term<L> {
    /// Value of the example's max-term at `label` (zero without a label).
    pub value: f64,
    pub label: Option<L>,
    pub point: LabelPoint,
    pub queries: usize,
}

/// Searches for the most violating label of `ex`. Margin rescaling uses a
/// single lambda-oracle call at `lambda = 1`; slack rescaling runs
/// `strategy`, with `xi` passed to the Sarawagi baseline.
pub fn violation<T: StructuredTask>(
    task: &T,
    w: &[f64],
    ex: &TrainingExample<T::Input, T::Label>,
    objective: Objective,
    strategy: SearchStrategy,
    cfg: &SearchConfig,
    xi: f64,
) -> Result<Term<T::Label>, OracleError> {
    let backend = task.backend(w, &ex.x, &ex.y);
    match objective {
        Objective::Margin => {
            let a = backend.lambda_oracle(1.0);
            let value = a.point.h + a.point.g - 1.0;
            Ok(if value > 0.0 {
                Term {
                    value,
                    label: Some(a.label),
                    point: a.point,
                    queries: 1,
                }
            } else {
                Term {
                    value: 0.0,
                    label: None,
                    point: a.point,
                    queries: 1,
                }
            })
        }
        Objective::Slack => {
            let out = run_search(&backend, strategy, cfg, xi)?;
            Ok(Term {
                value: out.best_phi,
                label: out.best_label,
                point: out.best_point,
                queries: out.queries,
            })
        }
    }
}

/// Exact slack max-term by scanning every label, or `None` when the label
/// space is too large.
pub fn exact_slack_term<T: StructuredTask>(
    task: &T,
    w: &[f64],
    ex: &TrainingExample<T::Input, T::Label>,
) -> Option<(f64, T::Label)> {
    let backend = task.backend(w, &ex.x, &ex.y);
    let all = backend.enumerate()?;
    let best = all
        .into_iter()
        .max_by(|a, b| a.point.phi().total_cmp(&b.point.phi()))
        .expect("non-empty label space");
    Some((best.point.phi().max(0.0), best.label))
}

/// Outcome of one stochastic step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<L> {
    pub term: Term<L>,
    pub step: f64,
}

fn apply_step<T: StructuredTask>(
    task: &T,
    model: &mut ModelState,
    ex: &TrainingExample<T::Input, T::Label>,
    term: &Term<T::Label>,
    scale: f64,
    step: f64,
) {
    let shrink = 1.0 - step * model.c;
    model.w.iter_mut().for_each(|v| *v *= shrink);
    if let (Some(label), true) = (&term.label, term.value > 0.0) {
        let d = feature_diff(task, &ex.x, label, &ex.y);
        axpy(&mut model.w, -step * scale, &d);
    }
}

/// `w <- (1 - step C) w - step g(y) (phi(y) - phi(y_i))` for the most
/// violating label `y` under slack rescaling; shrink only when nothing
/// violates.
#[allow(clippy::too_many_arguments)]
pub fn slack_subgradient_step<T: StructuredTask>(
    task: &T,
    model: &mut ModelState,
    ex: &TrainingExample<T::Input, T::Label>,
    strategy: SearchStrategy,
    cfg: &SearchConfig,
    step: f64,
    xi: f64,
) -> Result<StepReport<T::Label>, OracleError> {
    assert!(step > 0.0, "step must be positive");
    let term = violation(task, &model.w, ex, Objective::Slack, strategy, cfg, xi)?;
    apply_step(task, model, ex, &term, term.point.g, step);
    Ok(StepReport { term, step })
}

/// Margin-rescaled counterpart: the subgradient is `phi(y) - phi(y_i)`.
pub fn margin_subgradient_step<T: StructuredTask>(
    task: &T,
    model: &mut ModelState,
    ex: &TrainingExample<T::Input, T::Label>,
    step: f64,
) -> Result<StepReport<T::Label>, OracleError> {
    assert!(step > 0.0, "step must be positive");
    let cfg = SearchConfig::default();
    let term = violation(
        task,
        &model.w,
        ex,
        Objective::Margin,
        SearchStrategy::Exhaustive,
        &cfg,
        0.0,
    )?;
    apply_step(task, model, ex, &term, 1.0, step);
    Ok(StepReport { term, step })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `1 / (C (t + t0))` at update `t`, counting from zero.
    InverseTime {
        t0: f64,
    },
    Constant {
        step: f64,
    },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::InverseTime { t0: 10.0 }
    }
}

impl Schedule {
    pub fn step(&self, t: usize, c: f64) -> f64 {
        match *self {
            Schedule::InverseTime { t0 } => 1.0 / (c * (t as f64 + t0)),
            Schedule::Constant { step } => step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub objective: Objective,
    pub strategy: SearchStrategy,
    pub search: SearchConfig,
    pub schedule: Schedule,
    pub epochs: usize,
    pub seed: u64,
    /// Search used for the end-of-epoch objective; the training search
    /// when `None`.
    pub eval_strategy: Option<SearchStrategy>,
    /// Worker threads for the end-of-epoch objective pass.
    pub threads: usize,
    /// Store wall-clock seconds in the history.
    pub record_time: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            objective: Objective::Slack,
            strategy: SearchStrategy::Angular,
            search: SearchConfig::default(),
            schedule: Schedule::default(),
            epochs: 10,
            seed: 0,
            eval_strategy: None,
            threads: 1,
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Regularized objective at the end of the epoch.
    pub objective: f64,
    /// Mean per-example max-term at the end of the epoch.
    pub mean_term: f64,
    /// Oracle queries spent by training steps so far.
    pub queries: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

/// Maps `f` over `data` on `threads` workers, keeping order.
pub(crate) fn par_map<X: Sync, R: Send, E: Send>(
    threads: usize,
    data: &[X],
    f: impl Fn(usize, &X) -> Result<R, E> + Sync + Send,
) -> Result<Vec<R>, E> {
    if threads <= 1 {
        return data.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| data.par_iter().enumerate().map(|(i, x)| f(i, x)).collect())
}

/// Per-example max-terms and the regularized objective of `model`.
pub fn objective<T: StructuredTask>(
    task: &T,
    model: &ModelState,
    data: &[TrainingExample<T::Input, T::Label>],
    objective: Objective,
    strategy: SearchStrategy,
    cfg: &SearchConfig,
    threads: usize,
) -> Result<(f64, Vec<f64>), OracleError> {
    let terms = par_map(threads, data, |_, ex| {
        violation(task, &model.w, ex, objective, strategy, cfg, 0.0).map(|t| t.value)
    })?;
    let mean = if terms.is_empty() {
        0.0
    } else {
        terms.iter().sum::<f64>() / terms.len() as f64
    };
    Ok((0.5 * model.c * model.norm_sq() + mean, terms))
}

/// Shuffled passes of the configured subgradient step.
pub fn sgd_train<T: StructuredTask>(
    task: &T,
    mut model: ModelState,
    data: &[TrainingExample<T::Input, T::Label>],
    cfg: &SgdConfig,
) -> Result<(ModelState, Vec<EpochRecord>), OracleError> {
    assert_eq!(
        model.w.len(),
        task.dim(),
        "model and task dimensions differ"
    );
    cfg.search.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut xi = vec![0.0; data.len()];
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut t = 0usize;
    let mut queries = 0usize;
    let eval = cfg.eval_strategy.unwrap_or(cfg.strategy);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let step = cfg.schedule.step(t, model.c);
            let report = match cfg.objective {
                Objective::Slack => slack_subgradient_step(
                    task,
                    &mut model,
                    &data[i],
                    cfg.strategy,
                    &cfg.search,
                    step,
                    xi[i],
                )?,
                Objective::Margin => margin_subgradient_step(task, &mut model, &data[i], step)?,
            };
            xi[i] = report.term.value.max(0.0);
            queries += report.term.queries;
            t += 1;
        }
        let (obj, terms) = objective(
            task,
            &model,
            data,
            cfg.objective,
            eval,
            &cfg.search,
            cfg.threads,
        )?;
        let mean_term = if terms.is_empty() {
            0.0
        } else {
            terms.iter().sum::<f64>() / terms.len() as f64
        };
        log::debug!("epoch {epoch}: objective {obj:.6}, mean term {mean_term:.6}");
        history.push(EpochRecord {
            epoch,
            objective: obj,
            mean_term,
            queries,
            seconds: cfg.record_time.then(|| start.elapsed().as_secs_f64()),
        });
    }
    Ok((model, history))
}

/// Score-argmax predictions of a multi-label model against the labels of
/// `data`.
pub fn evaluate_multilabel(
    task: &MultiLabelTask,
    model: &ModelState,
    data: &MultiLabelDataset,
) -> MetricsReport {
    let pred: Vec<Vec<bool>> = data
        .examples
        .iter()
        .map(|e| bits_from_mask(task.predict(&model.w, &e.features), task.d_labels))
        .collect();
    let gold: Vec<Vec<bool>> = data.examples.iter().map(|e| e.labels.clone()).collect();
    multilabel_metrics(&pred, &gold)
}

pub fn evaluate_hierarchy(
    task: &HierarchyTask,
    model: &ModelState,
    data: &[TrainingExample<SparseVec, Vec<bool>>],
) -> MetricsReport {
    let pred: Vec<Vec<bool>> = data.iter().map(|e| task.predict(&model.w, &e.x)).collect();
    let gold: Vec<Vec<bool>> = data.iter().map(|e| e.y.clone()).collect();
    multilabel_metrics(&pred, &gold)
}

pub fn evaluate_chain(
    task: &ChainTask,
    model: &ModelState,
    data: &[SequenceExample],
) -> SequenceReport {
    let pred: Vec<Vec<usize>> = data
        .iter()
        .map(|e| task.predict(&model.w, &e.features))
        .collect();
    let gold: Vec<Vec<usize>> = data.iter().map(|e| e.tags.clone()).collect();
    sequence_metrics(&pred, &gold)
}
