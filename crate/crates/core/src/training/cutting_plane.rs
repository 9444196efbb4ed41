use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::SparseVec;
use crate::oracle::OracleError;
use crate::search::{SearchConfig, SearchStrategy};

use super::{
    axpy, dot, feature_diff, par_map, sparse_dot, violation, ModelState, Objective, StructuredTask,
    TrainingExample,
};

/// One working-set constraint `w . a >= b - xi_i`, with its dual weight.
///
/// Slack rescaling gives `a = g(y) (phi(y_i) - phi(y))`, `b = g(y)`; margin
/// rescaling drops the `g(y)` factor on `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<L> {
    pub label: L,
    pub a: SparseVec,
    pub b: f64,
    pub alpha: f64,
    norm_sq: f64,
}

/// Constraints per example with their dual weights. Each example's weights
/// sum to at most `cap = 1/(n C)`; `free[i]` holds the unused part.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingSet<L> {
    pub blocks: Vec<Vec<Constraint<L>>>,
    pub free: Vec<f64>,
    pub xi: Vec<f64>,
    pub cap: f64,
}

impl<L> WorkingSet<L> {
    fn new(n: usize, cap: f64) -> Self {
        WorkingSet {
            blocks: (0..n).map(|_| Vec::new()).collect(),
            free: vec![cap; n],
            xi: vec![0.0; n],
            cap,
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weights are non-negative and each block stays within the cap.
    pub fn is_dual_feasible(&self) -> bool {
        let tol = 1e-12 * self.cap.max(1.0);
        self.blocks.iter().zip(&self.free).all(|(blk, &free)| {
            let used: f64 = blk.iter().map(|c| c.alpha).sum();
            blk.iter().all(|c| c.alpha >= 0.0)
                && free >= -tol
                && (used + free - self.cap).abs() <= tol * (blk.len() + 1) as f64
        })
    }

    /// `sum alpha a`.
    pub fn weights(&self, dim: usize) -> Vec<f64> {
        let mut w = vec![0.0; dim];
        for c in self.blocks.iter().flatten() {
            axpy(&mut w, c.alpha, &c.a);
        }
        w
    }

    /// Dual objective `sum alpha b - |w|^2 / 2` in units of `1/C`.
    fn dual(&self, w: &[f64]) -> f64 {
        let lin: f64 = self.blocks.iter().flatten().map(|c| c.alpha * c.b).sum();
        lin - 0.5 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn update_xi(&mut self, w: &[f64]) {
        for (xi, blk) in self.xi.iter_mut().zip(&self.blocks) {
            *xi = blk.iter().map(|c| c.b - dot(w, &c.a)).fold(0.0, f64::max);
        }
    }

    /// Pairwise coordinate ascent inside each block until every block's
    /// optimality gap is below `tol`. The unused capacity acts as an extra
    /// variable with `a = 0`, `b = 0`. Returns the number of sweeps.
    fn solve(&mut self, w: &mut [f64], tol: f64, max_sweeps: usize) -> usize {
        for sweep in 1..=max_sweeps {
            let mut worst = 0.0f64;
            for i in 0..self.blocks.len() {
                for _ in 0..100 {
                    let gap = self.improve_block(i, w, tol);
                    worst = worst.max(gap);
                    if gap <= tol {
                        break;
                    }
                }
            }
            if worst <= tol {
                return sweep;
            }
        }
        max_sweeps
    }

    /// One pairwise move in block `i`; returns the gap before the move.
    fn improve_block(&mut self, i: usize, w: &mut [f64], tol: f64) -> f64 {
        let blk = &mut self.blocks[i];
        if blk.is_empty() {
            return 0.0;
        }
        // Index `blk.len()` is the unused capacity.
        let slack = blk.len();
        let grads: Vec<f64> = blk.iter().map(|c| c.b - dot(w, &c.a)).collect();
        let grad = |j: usize| if j == slack { 0.0 } else { grads[j] };
        let mass = |j: usize, blk: &[Constraint<_>], free: f64| {
            if j == slack {
                free
            } else {
                blk[j].alpha
            }
        };
        let up = (0..=slack)
            .max_by(|&a, &b| grad(a).total_cmp(&grad(b)))
            .unwrap();
        let down = (0..=slack)
            .filter(|&j| mass(j, blk, self.free[i]) > 0.0)
            .min_by(|&a, &b| grad(a).total_cmp(&grad(b)));
        let Some(down) = down else { return 0.0 };
        let gap = grad(up) - grad(down);
        if gap <= tol || up == down {
            return gap.max(0.0);
        }
        let norm = |j: usize| if j == slack { 0.0 } else { blk[j].norm_sq };
        let cross = if up == slack || down == slack {
            0.0
        } else {
            sparse_dot(&blk[up].a, &blk[down].a)
        };
        let curvature = norm(up) + norm(down) - 2.0 * cross;
        let available = mass(down, blk, self.free[i]);
        let t = if curvature > 0.0 {
            (gap / curvature).min(available)
        } else {
            available
        };
        if up == slack {
            self.free[i] += t;
        } else {
            blk[up].alpha += t;
            axpy(w, t, &blk[up].a);
        }
        if down == slack {
            self.free[i] = (self.free[i] - t).max(0.0);
        } else {
            blk[down].alpha = (blk[down].alpha - t).max(0.0);
            axpy(w, -t, &blk[down].a);
        }
        gap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuttingPlaneConfig {
    pub objective: Objective,
    pub strategy: SearchStrategy,
    pub search: SearchConfig,
    /// A label joins the working set when its term exceeds `xi_i + eps`.
    pub eps: f64,
    pub max_rounds: usize,
    /// Optimality gap at which the working-set dual counts as solved.
    pub qp_tol: f64,
    pub max_sweeps: usize,
    /// Worker threads for the per-round search pass.
    pub threads: usize,
    pub record_time: bool,
}

impl Default for CuttingPlaneConfig {
    fn default() -> Self {
        CuttingPlaneConfig {
            objective: Objective::Slack,
            strategy: SearchStrategy::Angular,
            search: SearchConfig::default(),
            eps: 1e-3,
            max_rounds: 100,
            qp_tol: 1e-8,
            max_sweeps: 10_000,
            threads: 1,
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `C/2 |w|^2 + 1/n sum xi_i` over the working set after re-solving.
    pub objective: f64,
    /// Dual value after re-solving; never decreases across rounds.
    pub dual: f64,
    /// Objective with each example's term from this round's searches,
    /// evaluated at the weights used for the search.
    pub search_objective: f64,
    pub added: usize,
    pub working_set: usize,
    /// Fraction of searches that found a label violating by more than `eps`.
    pub success_rate: f64,
    pub queries_per_search: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

/// Working-set training on the constrained objective: search every example
/// for a violated constraint, add those beyond `xi_i + eps`, re-solve the
/// dual, repeat until nothing is added or `max_rounds` is reached.
pub fn cutting_plane_train<T: StructuredTask>(
    task: &T,
    model: ModelState,
    data: &[TrainingExample<T::Input, T::Label>],
    cfg: &CuttingPlaneConfig,
) -> Result<(ModelState, WorkingSet<T::Label>, Vec<RoundRecord>), OracleError> {
    assert!(cfg.eps > 0.0, "eps must be positive");
    assert_eq!(
        model.w.len(),
        task.dim(),
        "model and task dimensions differ"
    );
    cfg.search.validate()?;
    let n = data.len();
    let cap = if n == 0 {
        0.0
    } else {
        1.0 / (n as f64 * model.c)
    };
    let mut ws = WorkingSet::new(n, cap);
    let mut history = Vec::new();
    if n == 0 {
        return Ok((model, ws, history));
    }
    let start = Instant::now();
    let c = model.c;
    let mut w = model.w;
    for round in 1..=cfg.max_rounds {
        let xi = ws.xi.clone();
        let terms = par_map(cfg.threads, data, |i, ex| {
            violation(
                task,
                &w,
                ex,
                cfg.objective,
                cfg.strategy,
                &cfg.search,
                xi[i],
            )
        })?;
        let norm_sq: f64 = w.iter().map(|v| v * v).sum();
        let search_objective =
            0.5 * c * norm_sq + terms.iter().map(|t| t.value.max(0.0)).sum::<f64>() / n as f64;
        let queries: usize = terms.iter().map(|t| t.queries).sum();
        let mut added = 0;
        for (i, (term, ex)) in terms.into_iter().zip(data).enumerate() {
            let Some(label) = term.label else { continue };
            if term.value <= ws.xi[i] + cfg.eps || ws.blocks[i].iter().any(|k| k.label == label) {
                continue;
            }
            let d = feature_diff(task, &ex.x, &label, &ex.y);
            let scale = match cfg.objective {
                Objective::Slack => term.point.g,
                Objective::Margin => 1.0,
            };
            let a: SparseVec = d.into_iter().map(|(j, v)| (j, -scale * v)).collect();
            let norm_sq = a.iter().map(|(_, v)| v * v).sum();
            ws.blocks[i].push(Constraint {
                label,
                a,
                b: term.point.g,
                alpha: 0.0,
                norm_sq,
            });
            added += 1;
        }
        if round == 1 && ws.is_empty() {
            // Nothing violated: the weights never came from the dual.
        } else {
            w = ws.weights(task.dim());
        }
        let sweeps = ws.solve(&mut w, cfg.qp_tol, cfg.max_sweeps);
        debug_assert!(ws.is_dual_feasible());
        // Rebuild from the duals to shed accumulated rounding.
        if !ws.is_empty() {
            w = ws.weights(task.dim());
        }
        ws.update_xi(&w);
        let norm_sq: f64 = w.iter().map(|v| v * v).sum();
        let objective = 0.5 * c * norm_sq + ws.xi.iter().sum::<f64>() / n as f64;
        let record = RoundRecord {
            round,
            objective,
            dual: c * ws.dual(&w),
            search_objective,
            added,
            working_set: ws.len(),
            success_rate: added as f64 / n as f64,
            queries_per_search: queries as f64 / n as f64,
            seconds: cfg.record_time.then(|| start.elapsed().as_secs_f64()),
        };
        log::debug!("round {round}: {record:?}, {sweeps} sweeps");
        history.push(record);
        if added == 0 {
            break;
        }
    }
    Ok((ModelState { w, c }, ws, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::MultiLabelTask;

    #[test]
    fn empty_data_returns_initial_model() {
        let task = MultiLabelTask::new(2, 2);
        let model = ModelState {
            w: vec![0.5; 6],
            c: 1.0,
        };
        let (m, ws, h) =
            cutting_plane_train(&task, model.clone(), &[], &CuttingPlaneConfig::default()).unwrap();
        assert_eq!(m, model);
        assert!(ws.is_empty());
        assert!(h.is_empty());
    }

    #[test]
    fn separable_toy_reaches_zero_slack() {
        // Two one-label examples on opposite sides of the origin.
        let task = MultiLabelTask::new(1, 1);
        let data = vec![
            TrainingExample {
                id: 0,
                x: vec![(0, 1.0)],
                y: 1u64,
            },
            TrainingExample {
                id: 1,
                x: vec![(0, -1.0)],
                y: 0u64,
            },
        ];
        let model = ModelState::zeros(task.dim(), 0.01);
        for objective in [Objective::Slack, Objective::Margin] {
            let cfg = CuttingPlaneConfig {
                objective,
                ..CuttingPlaneConfig::default()
            };
            let (m, ws, h) = cutting_plane_train(&task, model.clone(), &data, &cfg).unwrap();
            assert!(ws.xi.iter().all(|&x| x <= 1e-6), "{:?}", ws.xi);
            assert!(ws.is_dual_feasible());
            assert_eq!(h.last().unwrap().added, 0);
            // Hard margin: w x = 1 on both points with zero bias.
            assert!((m.w[0] - 1.0).abs() < 1e-6, "{:?}", m.w);
            assert!(m.w[1].abs() < 1e-6);
        }
    }

    #[test]
    fn pairwise_moves_respect_the_cap() {
        // Conflicting constraints on one weight force the cap to bind.
        let mut ws: WorkingSet<u8> = WorkingSet::new(1, 0.5);
        for (label, v) in [(0u8, 1.0), (1u8, -1.0), (2u8, 2.0)] {
            ws.blocks[0].push(Constraint {
                label,
                a: vec![(0, v)],
                b: 3.0,
                alpha: 0.0,
                norm_sq: v * v,
            });
        }
        let mut w = vec![0.0];
        ws.solve(&mut w, 1e-10, 1000);
        assert!(ws.is_dual_feasible());
        assert!(ws.free[0].abs() < 1e-12);
        let total: f64 = ws.blocks[0].iter().map(|c| c.alpha).sum();
        assert!((total - 0.5).abs() < 1e-12);
        // Every constraint has b = 3 > 0, so the full cap is spent, and
        // opposing vectors cancel: w = 0 with dual value 3 * 0.5.
        assert!(w[0].abs() < 1e-9, "{w:?}");
        assert!((ws.dual(&w) - 1.5).abs() < 1e-9);
    }
}
