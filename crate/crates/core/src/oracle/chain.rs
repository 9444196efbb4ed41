use crate::geometry::LabelPoint;

use super::{LabelCount, Oracle, OracleAnswer, MAX_ENUMERATION};

/// First-order chain over `k` states with per-position Hamming error.
///
/// `f(y) = sum_t unary[t][y_t] + sum_{t>0} pairwise[y_{t-1}][y_t]`. The
/// lambda-oracle is Viterbi decoding with `lambda * loss_scale` added to every
/// position whose tag differs from the ground truth.
#[derive(Debug, Clone)]
pub struct ChainOracle {
    unary: Vec<Vec<f64>>,
    pairwise: Vec<Vec<f64>>,
    gold: Vec<usize>,
    loss_scale: f64,
    gold_score: f64,
}

impl ChainOracle {
    /// # Panics
    ///
    /// Panics on an empty chain, ragged score tables, or out-of-range tags.
    pub fn new(
        unary: Vec<Vec<f64>>,
        pairwise: Vec<Vec<f64>>,
        gold: Vec<usize>,
        loss_scale: f64,
    ) -> Self {
        let k = pairwise.len();
        assert!(!unary.is_empty() && k > 0, "empty chain");
        assert_eq!(unary.len(), gold.len());
        assert!(unary.iter().all(|row| row.len() == k));
        assert!(pairwise.iter().all(|row| row.len() == k));
        assert!(gold.iter().all(|&t| t < k));
        assert!(loss_scale > 0.0);
        let mut oracle = ChainOracle {
            unary,
            pairwise,
            gold,
            loss_scale,
            gold_score: 0.0,
        };
        oracle.gold_score = oracle.score(&oracle.gold);
        oracle
    }

    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }

    pub fn states(&self) -> usize {
        self.pairwise.len()
    }

    pub fn score(&self, tags: &[usize]) -> f64 {
        let mut s = 0.0;
        for (t, &tag) in tags.iter().enumerate() {
            s += self.unary[t][tag];
            if t > 0 {
                s += self.pairwise[tags[t - 1]][tag];
            }
        }
        s
    }

    fn augmented_unary(&self, t: usize, tag: usize, bonus: f64) -> f64 {
        self.unary[t][tag] + if tag != self.gold[t] { bonus } else { 0.0 }
    }
}

impl Oracle for ChainOracle {
    type Label = Vec<usize>;

    fn backend_name(&self) -> &'static str {
        "chain"
    }

    fn label_count(&self) -> LabelCount {
        (self.states() as u64)
            .checked_pow(self.len() as u32)
            .map_or(LabelCount::Structured, LabelCount::Finite)
    }

    fn point(&self, tags: &Vec<usize>) -> LabelPoint {
        assert_eq!(tags.len(), self.len());
        let errors = tags.iter().zip(&self.gold).filter(|(a, b)| a != b).count();
        LabelPoint::new(
            1.0 + self.score(tags) - self.gold_score,
            self.loss_scale * errors as f64,
        )
    }

    fn lambda_oracle(&self, lambda: f64) -> OracleAnswer<Vec<usize>> {
        let (n, k) = (self.len(), self.states());
        let bonus = lambda * self.loss_scale;
        // Backward pass: best[t][s] is the best suffix score starting in state s.
        let mut best = vec![vec![0.0; k]; n];
        for s in 0..k {
            best[n - 1][s] = self.augmented_unary(n - 1, s, bonus);
        }
        for t in (0..n - 1).rev() {
            for s in 0..k {
                let tail = (0..k)
                    .map(|s2| self.pairwise[s][s2] + best[t + 1][s2])
                    .fold(f64::NEG_INFINITY, f64::max);
                best[t][s] = self.augmented_unary(t, s, bonus) + tail;
            }
        }
        // Forward reconstruction picking the smallest state among ties.
        let mut tags = Vec::with_capacity(n);
        let mut prev: Option<usize> = None;
        for row in &best {
            let mut arg = 0;
            let mut top = f64::NEG_INFINITY;
            for (s, b) in row.iter().enumerate() {
                let v = b + prev.map_or(0.0, |p| self.pairwise[p][s]);
                if v > top {
                    top = v;
                    arg = s;
                }
            }
            tags.push(arg);
            prev = Some(arg);
        }
        let point = self.point(&tags);
        OracleAnswer::new(tags, point)
    }

    fn enumerate(&self) -> Option<Vec<OracleAnswer<Vec<usize>>>> {
        let total = match self.label_count() {
            LabelCount::Finite(n) if n <= MAX_ENUMERATION => n,
            _ => return None,
        };
        let (n, k) = (self.len(), self.states());
        let mut out = Vec::with_capacity(total as usize);
        let mut tags = vec![0usize; n];
        loop {
            out.push(OracleAnswer::new(tags.clone(), self.point(&tags)));
            // Lexicographic increment, last position fastest.
            let mut pos = n;
            loop {
                if pos == 0 {
                    return Some(out);
                }
                pos -= 1;
                tags[pos] += 1;
                if tags[pos] < k {
                    break;
                }
                tags[pos] = 0;
            }
        }
    }

    fn gold(&self) -> Option<Vec<usize>> {
        Some(self.gold.clone())
    }
}
