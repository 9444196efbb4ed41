use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::data::{MultiLabelDataset, SparseVec};
use crate::oracle::{ChainOracle, HierarchyOracle, MultiLabelOracle, Oracle};

/// Joint feature map, loss and inference backend of one structured
/// prediction problem.
pub trait StructuredTask: Sync {
    type Input: Sync + Send + Debug;
    type Label: Clone + Debug + PartialEq + Send + Sync;
    type Backend: Oracle<Label = Self::Label>;

    /// Length of the weight vector.
    fn dim(&self) -> usize;

    /// Oracle over the labels of `x` under weights `w`, with `gold` as the
    /// ground truth.
    fn backend(&self, w: &[f64], x: &Self::Input, gold: &Self::Label) -> Self::Backend;

    /// `phi(x, y)` as sorted `(index, value)` pairs.
    fn features(&self, x: &Self::Input, y: &Self::Label) -> SparseVec;

    /// `argmax_y w . phi(x, y)`.
    fn predict(&self, w: &[f64], x: &Self::Input) -> Self::Label;

    fn spec(&self) -> TaskSpec;
}

/// Serializable description of a task, stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    MultiLabel {
        d_features: usize,
        d_labels: usize,
        loss_scale: f64,
    },
    Chain {
        states: usize,
        d_features: usize,
        loss_scale: f64,
    },
    Hierarchy {
        parents: Vec<Option<usize>>,
        d_features: usize,
        loss_scale: f64,
    },
}

/// `phi(x, y) - phi(x, gold)`, merged and without zeros.
pub fn feature_diff<T: StructuredTask + ?Sized>(
    task: &T,
    x: &T::Input,
    y: &T::Label,
    gold: &T::Label,
) -> SparseVec {
    let a = task.features(x, y);
    let b = task.features(x, gold);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (idx, v) = match (a.get(i), b.get(j)) {
            (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                i += 1;
                j += 1;
                (ia, va - vb)
            }
            (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                i += 1;
                (ia, va)
            }
            (Some(&(ia, va)), None) => {
                i += 1;
                (ia, va)
            }
            (_, Some(&(ib, vb))) => {
                j += 1;
                (ib, -vb)
            }
            (None, None) => unreachable!(),
        };
        if v != 0.0 {
            out.push((idx, v));
        }
    }
    out
}

/// Sums duplicate indices of an unsorted pair list.
fn canonical(mut v: SparseVec) -> SparseVec {
    v.sort_by_key(|&(i, _)| i);
    let mut out: SparseVec = Vec::with_capacity(v.len());
    for (i, x) in v {
        match out.last_mut() {
            Some((j, y)) if *j == i => *y += x,
            _ => out.push((i, x)),
        }
    }
    out.retain(|&(_, x)| x != 0.0);
    out
}

fn block_score(w: &[f64], offset: usize, x: &SparseVec, bias_at: usize) -> f64 {
    x.iter().map(|&(f, v)| w[offset + f] * v).sum::<f64>() + w[bias_at]
}

/// Bit vector to mask, bit `j` for label `j`.
pub fn mask_from_bits(bits: &[bool]) -> u64 {
    assert!(bits.len() <= 64, "at most 64 labels");
    bits.iter()
        .enumerate()
        .fold(0, |m, (j, &b)| m | (u64::from(b) << j))
}

pub fn bits_from_mask(mask: u64, d: usize) -> Vec<bool> {
    (0..d).map(|j| mask >> j & 1 == 1).collect()
}

/// Independent labels. Label `j` owns the weight block
/// `[j (F + 1), (j + 1)(F + 1))`: feature weights then a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelTask {
    pub d_features: usize,
    pub d_labels: usize,
    pub loss_scale: f64,
}

impl MultiLabelTask {
    pub fn new(d_features: usize, d_labels: usize) -> Self {
        MultiLabelTask {
            d_features,
            d_labels,
            loss_scale: 1.0,
        }
    }

    pub fn for_dataset(data: &MultiLabelDataset) -> Self {
        MultiLabelTask::new(data.d_features, data.d_labels)
    }

    fn scores(&self, w: &[f64], x: &SparseVec) -> Vec<f64> {
        let stride = self.d_features + 1;
        (0..self.d_labels)
            .map(|j| block_score(w, j * stride, x, j * stride + self.d_features))
            .collect()
    }
}

impl StructuredTask for MultiLabelTask {
    type Input = SparseVec;
    type Label = u64;
    type Backend = MultiLabelOracle;

    fn dim(&self) -> usize {
        self.d_labels * (self.d_features + 1)
    }

    fn backend(&self, w: &[f64], x: &SparseVec, gold: &u64) -> MultiLabelOracle {
        MultiLabelOracle::new(self.scores(w, x), *gold, self.loss_scale)
    }

    fn features(&self, x: &SparseVec, y: &u64) -> SparseVec {
        let stride = self.d_features + 1;
        let mut out = Vec::new();
        for j in (0..self.d_labels).filter(|j| y >> j & 1 == 1) {
            out.extend(x.iter().map(|&(f, v)| (j * stride + f, v)));
            out.push((j * stride + self.d_features, 1.0));
        }
        canonical(out)
    }

    fn predict(&self, w: &[f64], x: &SparseVec) -> u64 {
        let s = self.scores(w, x);
        s.iter()
            .enumerate()
            .fold(0, |m, (j, &v)| if v > 0.0 { m | 1 << j } else { m })
    }

    fn spec(&self) -> TaskSpec {
        TaskSpec::MultiLabel {
            d_features: self.d_features,
            d_labels: self.d_labels,
            loss_scale: self.loss_scale,
        }
    }
}

/// Linear-chain tagging. Weights: `states` blocks of emission weights,
/// one bias per state, then the `states x states` transition table.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTask {
    pub states: usize,
    pub d_features: usize,
    pub loss_scale: f64,
}

impl ChainTask {
    pub fn new(states: usize, d_features: usize) -> Self {
        ChainTask {
            states,
            d_features,
            loss_scale: 1.0,
        }
    }

    fn bias(&self, s: usize) -> usize {
        self.states * self.d_features + s
    }

    fn transition(&self, a: usize, b: usize) -> usize {
        self.states * (self.d_features + 1) + a * self.states + b
    }

    fn tables(&self, w: &[f64], x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = self.d_features;
        let unary = x
            .iter()
            .map(|xt| {
                (0..self.states)
                    .map(|s| {
                        w[s * d..(s + 1) * d]
                            .iter()
                            .zip(xt)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            + w[self.bias(s)]
                    })
                    .collect()
            })
            .collect();
        let pairwise = (0..self.states)
            .map(|a| (0..self.states).map(|b| w[self.transition(a, b)]).collect())
            .collect();
        (unary, pairwise)
    }
}

impl StructuredTask for ChainTask {
    type Input = Vec<Vec<f64>>;
    type Label = Vec<usize>;
    type Backend = ChainOracle;

    fn dim(&self) -> usize {
        self.states * (self.d_features + 1) + self.states * self.states
    }

    fn backend(&self, w: &[f64], x: &Vec<Vec<f64>>, gold: &Vec<usize>) -> ChainOracle {
        let (unary, pairwise) = self.tables(w, x);
        ChainOracle::new(unary, pairwise, gold.clone(), self.loss_scale)
    }

    fn features(&self, x: &Vec<Vec<f64>>, y: &Vec<usize>) -> SparseVec {
        let d = self.d_features;
        let mut out = Vec::new();
        for (t, (xt, &s)) in x.iter().zip(y).enumerate() {
            out.extend(xt.iter().enumerate().map(|(f, &v)| (s * d + f, v)));
            out.push((self.bias(s), 1.0));
            if t > 0 {
                out.push((self.transition(y[t - 1], s), 1.0));
            }
        }
        canonical(out)
    }

    fn predict(&self, w: &[f64], x: &Vec<Vec<f64>>) -> Vec<usize> {
        self.backend(w, x, &vec![0; x.len()])
            .lambda_oracle(0.0)
            .label
    }

    fn spec(&self) -> TaskSpec {
        TaskSpec::Chain {
            states: self.states,
            d_features: self.d_features,
            loss_scale: self.loss_scale,
        }
    }
}

/// Label sets closed under a parent forest. Node `v` owns a feature block
/// plus bias, like [`MultiLabelTask`].
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyTask {
    pub parents: Vec<Option<usize>>,
    pub d_features: usize,
    pub loss_scale: f64,
}

impl HierarchyTask {
    pub fn new(parents: Vec<Option<usize>>, d_features: usize) -> Self {
        HierarchyTask {
            parents,
            d_features,
            loss_scale: 1.0,
        }
    }

    fn scores(&self, w: &[f64], x: &SparseVec) -> Vec<f64> {
        let stride = self.d_features + 1;
        (0..self.parents.len())
            .map(|v| block_score(w, v * stride, x, v * stride + self.d_features))
            .collect()
    }
}

impl StructuredTask for HierarchyTask {
    type Input = SparseVec;
    type Label = Vec<bool>;
    type Backend = HierarchyOracle;

    fn dim(&self) -> usize {
        self.parents.len() * (self.d_features + 1)
    }

    fn backend(&self, w: &[f64], x: &SparseVec, gold: &Vec<bool>) -> HierarchyOracle {
        HierarchyOracle::new(
            self.parents.clone(),
            self.scores(w, x),
            gold.clone(),
            self.loss_scale,
        )
    }

    fn features(&self, x: &SparseVec, y: &Vec<bool>) -> SparseVec {
        let stride = self.d_features + 1;
        let mut out = Vec::new();
        for v in (0..y.len()).filter(|&v| y[v]) {
            out.extend(x.iter().map(|&(f, val)| (v * stride + f, val)));
            out.push((v * stride + self.d_features, 1.0));
        }
        canonical(out)
    }

    fn predict(&self, w: &[f64], x: &SparseVec) -> Vec<bool> {
        self.backend(w, x, &vec![false; self.parents.len()])
            .lambda_oracle(0.0)
            .label
    }

    fn spec(&self) -> TaskSpec {
        TaskSpec::Hierarchy {
            parents: self.parents.clone(),
            d_features: self.d_features,
            loss_scale: self.loss_scale,
        }
    }
}
