use crate::geometry::LabelPoint;

use super::{LabelCount, Oracle, OracleAnswer, MAX_ENUMERATION};

/// Independent binary labels scored additively, with (scaled) Hamming error.
///
/// A label is a bit mask over at most 64 outputs; bit `j` set means output
/// `j` is on. The model score is `f(y) = sum_j y_j * scores[j]`, so the
/// lambda-oracle decomposes per bit.
#[derive(Debug, Clone)]
pub struct MultiLabelOracle {
    scores: Vec<f64>,
    gold: u64,
    loss_scale: f64,
}

impl MultiLabelOracle {
    /// # Panics
    ///
    /// Panics if there are more than 64 outputs, if `gold` has bits beyond
    /// them, or if `loss_scale` is not positive.
    pub fn new(scores: Vec<f64>, gold: u64, loss_scale: f64) -> Self {
        let d = scores.len();
        assert!(
            (1..=64).contains(&d),
            "between 1 and 64 outputs supported, got {d}"
        );
        assert!(
            d == 64 || gold >> d == 0,
            "gold label has bits beyond {d} outputs"
        );
        assert!(loss_scale > 0.0);
        MultiLabelOracle {
            scores,
            gold,
            loss_scale,
        }
    }

    pub fn width(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    fn mask(&self) -> u64 {
        if self.width() == 64 {
            u64::MAX
        } else {
            (1u64 << self.width()) - 1
        }
    }
}

impl Oracle for MultiLabelOracle {
    type Label = u64;

    fn backend_name(&self) -> &'static str {
        "multilabel"
    }

    fn label_count(&self) -> LabelCount {
        if self.width() < 64 {
            LabelCount::Finite(1u64 << self.width())
        } else {
            LabelCount::Structured
        }
    }

    fn point(&self, label: &u64) -> LabelPoint {
        let y = *label;
        let mut diff = 0.0;
        for (j, s) in self.scores.iter().enumerate() {
            let on = (y >> j) & 1;
            let gold_on = (self.gold >> j) & 1;
            if on != gold_on {
                diff += if on == 1 { *s } else { -*s };
            }
        }
        let hamming = ((y ^ self.gold) & self.mask()).count_ones() as f64;
        LabelPoint::new(1.0 + diff, self.loss_scale * hamming)
    }

    fn lambda_oracle(&self, lambda: f64) -> OracleAnswer<u64> {
        let mut y = 0u64;
        for (j, s) in self.scores.iter().enumerate() {
            let gold_on = (self.gold >> j) & 1 == 1;
            // Gain of flipping output j away from the ground truth.
            let gain = if gold_on { -*s } else { *s } + lambda * self.loss_scale;
            let on = if gold_on { gain < 0.0 } else { gain > 0.0 };
            if on {
                y |= 1 << j;
            }
        }
        OracleAnswer::new(y, self.point(&y))
    }

    fn enumerate(&self) -> Option<Vec<OracleAnswer<u64>>> {
        match self.label_count() {
            LabelCount::Finite(n) if n <= MAX_ENUMERATION => Some(
                (0..n)
                    .map(|y| OracleAnswer::new(y, self.point(&y)))
                    .collect(),
            ),
            _ => None,
        }
    }

    fn gold(&self) -> Option<u64> {
        Some(self.gold)
    }
}
