//! Multi-label and sequence metrics.
//!
//! Example accuracy is the mean Jaccard index between predicted and true
//! label sets, with two empty sets counting as a perfect match. Label loss
//! is the mean Hamming distance divided by the number of labels. An F1
//! whose denominator is zero (no positives predicted or present) is 1.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub label_loss: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        1.0
    } else {
        2.0 * tp as f64 / den as f64
    }
}

/// Metrics of `pred` against `gold`, one bit vector per example.
///
/// # Panics
///
/// Panics if the two slices differ in length or any pair of vectors
/// differs in width.
pub fn multilabel_metrics(pred: &[Vec<bool>], gold: &[Vec<bool>]) -> MetricsReport {
    assert_eq!(pred.len(), gold.len(), "prediction and gold counts differ");
    if gold.is_empty() {
        return MetricsReport {
            acc: 1.0,
            label_loss: 0.0,
            micro_f1: 1.0,
            macro_f1: 1.0,
        };
    }
    let d = gold[0].len();
    let mut counts = vec![(0usize, 0usize, 0usize); d];
    let mut jaccard = 0.0;
    let mut hamming = 0usize;
    for (p, g) in pred.iter().zip(gold) {
        assert!(p.len() == d && g.len() == d, "label widths differ");
        let (mut inter, mut union) = (0usize, 0usize);
        for (j, (&a, &b)) in p.iter().zip(g).enumerate() {
            inter += usize::from(a && b);
            union += usize::from(a || b);
            hamming += usize::from(a != b);
            let c = &mut counts[j];
            match (a, b) {
                (true, true) => c.0 += 1,
                (true, false) => c.1 += 1,
                (false, true) => c.2 += 1,
                (false, false) => {}
            }
        }
        jaccard += if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
    }
    let n = gold.len() as f64;
    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let macro_f1 = if d == 0 {
        1.0
    } else {
        counts.iter().map(|&(a, b, c)| f1(a, b, c)).sum::<f64>() / d as f64
    };
    MetricsReport {
        acc: jaccard / n,
        label_loss: if d == 0 {
            0.0
        } else {
            hamming as f64 / (n * d as f64)
        },
        micro_f1: f1(tp, fp, fn_),
        macro_f1,
    }
}

/// Tag-level and whole-sequence accuracy of tagged sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub tag_acc: f64,
    pub sequence_acc: f64,
}

pub fn sequence_metrics(pred: &[Vec<usize>], gold: &[Vec<usize>]) -> SequenceReport {
    assert_eq!(pred.len(), gold.len(), "prediction and gold counts differ");
    let (mut right, mut total, mut whole) = (0usize, 0usize, 0usize);
    for (p, g) in pred.iter().zip(gold) {
        assert_eq!(p.len(), g.len(), "sequence lengths differ");
        let r = p.iter().zip(g).filter(|(a, b)| a == b).count();
        right += r;
        total += g.len();
        whole += usize::from(r == g.len());
    }
    SequenceReport {
        tag_acc: if total == 0 {
            1.0
        } else {
            right as f64 / total as f64
        },
        sequence_acc: if gold.is_empty() {
            1.0
        } else {
            whole as f64 / gold.len() as f64
        },
    }
}
