use crate::geometry::LabelPoint;

use super::{LabelCount, Oracle, OracleAnswer};

/// Largest forest that [`Oracle::enumerate`] will expand.
const MAX_ENUMERATED_NODES: usize = 22;

/// Multi-label output over a forest taxonomy.
///
/// A label switches on a set of nodes that is closed under taking parents.
/// `f(y) = sum of scores of the nodes switched on`, the error is the (scaled)
/// number of nodes that disagree with the ground truth. The lambda-oracle is
/// a bottom-up dynamic program over the forest.
#[derive(Debug, Clone)]
pub struct HierarchyOracle {
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Nodes ordered so that parents precede children.
    order: Vec<usize>,
    scores: Vec<f64>,
    gold: Vec<bool>,
    loss_scale: f64,
}

/// Children lists and a parents-first order, or `None` when the parent list
/// has a cycle or an out-of-range parent.
pub(crate) fn forest_order(parents: &[Option<usize>]) -> Option<(Vec<Vec<usize>>, Vec<usize>)> {
    let n = parents.len();
    let mut children = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for (i, p) in parents.iter().enumerate() {
        match *p {
            Some(p) if p >= n || p == i => return None,
            Some(p) => children[p].push(i),
            None => roots.push(i),
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut stack: Vec<usize> = roots.into_iter().rev().collect();
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(children[v].iter().rev().copied());
    }
    (order.len() == n).then_some((children, order))
}

/// Adds every ancestor of a switched-on node.
pub fn close_upward(parents: &[Option<usize>], on: &mut [bool]) {
    for i in 0..on.len() {
        if on[i] {
            let mut cur = parents[i];
            while let Some(p) = cur {
                if on[p] {
                    break;
                }
                on[p] = true;
                cur = parents[p];
            }
        }
    }
}

impl HierarchyOracle {
    /// # Panics
    ///
    /// Panics if the parent list is not a forest, the lengths disagree, or
    /// the ground truth is not closed under parents.
    pub fn new(
        parents: Vec<Option<usize>>,
        scores: Vec<f64>,
        gold: Vec<bool>,
        loss_scale: f64,
    ) -> Self {
        assert!(!parents.is_empty());
        assert_eq!(parents.len(), scores.len());
        assert_eq!(parents.len(), gold.len());
        assert!(loss_scale > 0.0);
        let (children, order) = forest_order(&parents).expect("parent list must describe a forest");
        let oracle = HierarchyOracle {
            parents,
            children,
            order,
            scores,
            gold,
            loss_scale,
        };
        assert!(
            oracle.is_closed(&oracle.gold),
            "ground truth must be closed under parents"
        );
        oracle
    }

    pub fn nodes(&self) -> usize {
        self.parents.len()
    }

    pub fn is_closed(&self, y: &[bool]) -> bool {
        y.iter()
            .enumerate()
            .all(|(i, &on)| !on || self.parents[i].is_none_or(|p| y[p]))
    }
}

impl Oracle for HierarchyOracle {
    type Label = Vec<bool>;

    fn backend_name(&self) -> &'static str {
        "hierarchy"
    }

    fn label_count(&self) -> LabelCount {
        // Closed sets of a forest: prod over roots of c(v), c(v) = 1 + prod c(children).
        let mut count = vec![0u128; self.nodes()];
        for &v in self.order.iter().rev() {
            let mut prod: u128 = 1;
            for &c in &self.children[v] {
                prod = prod.saturating_mul(count[c]);
            }
            count[v] = prod.saturating_add(1);
        }
        let total = self
            .parents
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_none())
            .fold(1u128, |acc, (i, _)| acc.saturating_mul(count[i]));
        u64::try_from(total).map_or(LabelCount::Structured, LabelCount::Finite)
    }

    fn point(&self, y: &Vec<bool>) -> LabelPoint {
        assert_eq!(y.len(), self.nodes());
        let mut diff = 0.0;
        let mut errors = 0usize;
        for i in 0..self.nodes() {
            if y[i] != self.gold[i] {
                errors += 1;
                diff += if y[i] {
                    self.scores[i]
                } else {
                    -self.scores[i]
                };
            }
        }
        LabelPoint::new(1.0 + diff, self.loss_scale * errors as f64)
    }

    fn lambda_oracle(&self, lambda: f64) -> OracleAnswer<Vec<bool>> {
        let n = self.nodes();
        let bonus = lambda * self.loss_scale;
        let mut on_val = vec![0.0f64; n];
        let mut off_val = vec![0.0f64; n];
        for &v in self.order.iter().rev() {
            let gold_below = self.children[v].iter().map(|&c| off_val[c]).sum::<f64>();
            off_val[v] = gold_below + if self.gold[v] { bonus } else { 0.0 };
            let best_children = self.children[v]
                .iter()
                .map(|&c| on_val[c].max(off_val[c]))
                .sum::<f64>();
            on_val[v] = self.scores[v] + if self.gold[v] { 0.0 } else { bonus } + best_children;
        }
        let mut y = vec![false; n];
        for &v in &self.order {
            let parent_on = self.parents[v].is_none_or(|p| y[p]);
            y[v] = parent_on && on_val[v] > off_val[v];
        }
        let point = self.point(&y);
        OracleAnswer::new(y, point)
    }

    fn enumerate(&self) -> Option<Vec<OracleAnswer<Vec<bool>>>> {
        let n = self.nodes();
        if n > MAX_ENUMERATED_NODES {
            return None;
        }
        let mut out = Vec::new();
        for mask in 0u64..(1u64 << n) {
            // Node 0 is the most significant position in label order.
            let y: Vec<bool> = (0..n).map(|i| (mask >> (n - 1 - i)) & 1 == 1).collect();
            if self.is_closed(&y) {
                let p = self.point(&y);
                out.push(OracleAnswer::new(y, p));
            }
        }
        Some(out)
    }

    fn gold(&self) -> Option<Vec<bool>> {
        Some(self.gold.clone())
    }
}
