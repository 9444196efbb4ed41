use crate::geometry::LabelPoint;

use super::{LabelCount, Oracle, OracleAnswer, OracleError, OracleQuery};

/// Exact oracle over an explicit list of labels.
///
/// Labels are ordered by their position in the list; ties go to the earlier
/// one.
#[derive(Debug, Clone)]
pub struct EnumerationOracle<L = usize> {
    labels: Vec<L>,
    points: Vec<LabelPoint>,
    gold: Option<usize>,
}

/// Instance over bare points, labelled `0..points.len()`.
///
/// # Panics
///
/// Panics on an empty point list.
pub fn enumeration_backend(points: Vec<LabelPoint>) -> EnumerationOracle<usize> {
    EnumerationOracle::from_points(points)
}

impl EnumerationOracle<usize> {
    pub fn from_points(points: Vec<LabelPoint>) -> Self {
        assert!(!points.is_empty(), "label space must be non-empty");
        EnumerationOracle {
            labels: (0..points.len()).collect(),
            points,
            gold: None,
        }
    }

    /// Marks label `gold` as the ground truth (excluded by `exclude_zero_loss`).
    pub fn with_gold(mut self, gold: usize) -> Self {
        assert!(gold < self.points.len());
        self.gold = Some(gold);
        self
    }
}

impl<L: Clone + PartialEq> EnumerationOracle<L> {
    pub fn from_answers(answers: Vec<OracleAnswer<L>>, gold: Option<L>) -> Self {
        assert!(!answers.is_empty(), "label space must be non-empty");
        let gold = gold.and_then(|g| answers.iter().position(|a| a.label == g));
        let (labels, points) = answers.into_iter().map(|a| (a.label, a.point)).unzip();
        EnumerationOracle {
            labels,
            points,
            gold,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LabelPoint] {
        &self.points
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    fn scan<F: Fn(usize, &LabelPoint) -> bool>(&self, lambda: f64, admit: F) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.points.iter().enumerate() {
            if !admit(i, p) {
                continue;
            }
            let s = p.lambda_score(lambda);
            match best {
                Some((_, b)) if s <= b => {}
                _ => best = Some((i, s)),
            }
        }
        best.map(|(i, _)| i)
    }

    fn answer(&self, i: usize) -> OracleAnswer<L> {
        OracleAnswer::new(self.labels[i].clone(), self.points[i])
    }
}

impl<L> Oracle for EnumerationOracle<L>
where
    L: Clone + std::fmt::Debug + PartialEq + Send + Sync,
{
    type Label = L;

    fn backend_name(&self) -> &'static str {
        "enumeration"
    }

    fn label_count(&self) -> LabelCount {
        LabelCount::Finite(self.points.len() as u64)
    }

    fn point(&self, label: &L) -> LabelPoint {
        let i = self
            .labels
            .iter()
            .position(|l| l == label)
            .expect("label does not belong to this instance");
        self.points[i]
    }

    fn lambda_oracle(&self, lambda: f64) -> OracleAnswer<L> {
        let i = self
            .scan(lambda, |_, _| true)
            .expect("non-empty label space");
        self.answer(i)
    }

    fn constrained_lambda_oracle(
        &self,
        query: &OracleQuery,
    ) -> Result<Option<OracleAnswer<L>>, OracleError> {
        query.validate()?;
        let idx = self.scan(query.lambda, |i, p| {
            !(query.exclude_zero_loss && self.gold == Some(i)) && query.admits(p)
        });
        Ok(idx.map(|i| self.answer(i)))
    }

    fn supports_constraints(&self) -> bool {
        true
    }

    fn enumerate(&self) -> Option<Vec<OracleAnswer<L>>> {
        Some((0..self.points.len()).map(|i| self.answer(i)).collect())
    }

    fn gold(&self) -> Option<L> {
        self.gold.map(|i| self.labels[i].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Slope;
    use crate::oracle::StrictSide;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three_label(eps: f64) -> EnumerationOracle {
        enumeration_backend(vec![
            LabelPoint::new(eps, 1.0),
            LabelPoint::new(1.0, eps),
            LabelPoint::new(0.5, 0.5),
        ])
    }

    #[test]
    fn single_label() {
        let o = enumeration_backend(vec![LabelPoint::new(1.0, 1.0)]);
        assert_eq!(o.label_count(), LabelCount::Finite(1));
        for lambda in [1e-6, 0.3, 1.0, 1e6] {
            assert_eq!(o.lambda_oracle(lambda).label, 0);
        }
    }

    #[test]
    fn interior_label_never_returned() {
        let o = three_label(1e-3);
        assert_eq!(o.label_count(), LabelCount::Finite(3));
        for k in -60..=60 {
            let lambda = 10f64.powf(k as f64 / 10.0);
            assert_ne!(o.lambda_oracle(lambda).label, 2, "lambda = {lambda}");
        }
    }

    #[test]
    fn wedge_isolates_interior_label() {
        let o = three_label(1e-3);
        let q = OracleQuery::wedge(
            1.0,
            Slope::Finite(1.1),
            Slope::Finite(0.9),
            StrictSide::BetaStrict,
        );
        assert_eq!(o.constrained_lambda_oracle(&q).unwrap().unwrap().label, 2);
        let empty = OracleQuery::wedge(
            1.0,
            Slope::Finite(0.6),
            Slope::Finite(0.4),
            StrictSide::BetaStrict,
        );
        assert!(o.constrained_lambda_oracle(&empty).unwrap().is_none());
    }

    #[test]
    fn unconstrained_query_matches_lambda_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..50)
            .map(|_| LabelPoint::new(rng.gen_range(-1.0..2.0), rng.gen_range(0.0..2.0)))
            .collect();
        let o = enumeration_backend(pts);
        for lambda in [0.01, 0.7, 3.0, 90.0] {
            let a = o.lambda_oracle(lambda);
            let b = o
                .constrained_lambda_oracle(&OracleQuery::unconstrained(lambda))
                .unwrap()
                .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ties_go_to_first_label() {
        let o = enumeration_backend(vec![
            LabelPoint::new(1.0, 0.0),
            LabelPoint::new(0.0, 1.0),
            LabelPoint::new(1.0, 0.0),
        ]);
        assert_eq!(o.lambda_oracle(1.0).label, 0);
    }

    #[test]
    fn gold_exclusion() {
        let o = enumeration_backend(vec![LabelPoint::new(1.0, 0.0), LabelPoint::new(0.1, 0.1)])
            .with_gold(0);
        let q = OracleQuery::unconstrained(1.0).with_exclude_zero_loss();
        assert_eq!(o.constrained_lambda_oracle(&q).unwrap().unwrap().label, 1);
        assert_eq!(o.gold(), Some(0));
    }
}
