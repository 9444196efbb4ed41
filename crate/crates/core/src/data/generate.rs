//! Seeded synthetic instances and datasets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{MultiLabelDataset, MultiLabelExample, Split};
use crate::geometry::LabelPoint;
use crate::oracle::{enumeration_backend, EnumerationOracle};

/// Three labels on which every lambda-oracle answer is one of the two
/// corner labels with `phi` about `eps * max(h_hat, g_hat)`, while the
/// middle label has `phi = h_hat * g_hat / 4`.
///
/// # Panics
///
/// Panics unless `0 < eps < min(h_hat, g_hat) / 2`.
pub fn adversarial_instance(eps: f64, h_hat: f64, g_hat: f64) -> EnumerationOracle {
    assert!(
        eps > 0.0 && eps < 0.5 * h_hat.min(g_hat),
        "need 0 < eps < min(h_hat, g_hat) / 2, got eps = {eps}"
    );
    enumeration_backend(vec![
        LabelPoint::new(eps, g_hat),
        LabelPoint::new(h_hat, eps),
        LabelPoint::new(0.5 * h_hat, 0.5 * g_hat),
    ])
}

/// Shape of a random point cloud. All shapes keep `h` in `(0, 1]` and `g`
/// in `[0, 1]` except the planted point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointDistribution {
    /// Independent uniform coordinates.
    Uniform,
    /// Two Gaussian blobs, one rich in margin violation, one in error.
    Clusters,
    /// [`PointDistribution::Clusters`] plus a point on the diagonal whose
    /// `phi` is 1.44 times the best blob point. It usually sits inside the
    /// convex hull, out of reach of the plain lambda-oracle.
    Planted,
}

impl std::str::FromStr for PointDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(PointDistribution::Uniform),
            "clusters" => Ok(PointDistribution::Clusters),
            "planted" => Ok(PointDistribution::Planted),
            _ => Err(format!("unknown point distribution `{s}`")),
        }
    }
}

/// `m` points drawn from `dist`.
pub fn random_points<R: Rng>(m: usize, dist: PointDistribution, rng: &mut R) -> Vec<LabelPoint> {
    match dist {
        PointDistribution::Uniform => (0..m)
            .map(|_| LabelPoint::new(1.0 - rng.gen::<f64>(), rng.gen::<f64>()))
            .collect(),
        PointDistribution::Clusters => {
            let noise = Normal::new(0.0, 0.12).expect("valid deviation");
            (0..m)
                .map(|_| {
                    let (ch, cg) = if rng.gen_bool(0.5) {
                        (0.75, 0.25)
                    } else {
                        (0.25, 0.75)
                    };
                    let h: f64 = ch + noise.sample(rng);
                    let g: f64 = cg + noise.sample(rng);
                    LabelPoint::new(h.clamp(1e-3, 1.0), g.clamp(0.0, 1.0))
                })
                .collect()
        }
        PointDistribution::Planted => {
            let mut pts = random_points(m.saturating_sub(1), PointDistribution::Clusters, rng);
            let best = pts.iter().map(|p| p.phi()).fold(0.0, f64::max);
            let c = 1.2 * best.sqrt().max(0.1);
            let at = rng.gen_range(0..=pts.len());
            pts.insert(at, LabelPoint::new(c, c));
            pts
        }
    }
}

/// Enumeration instance over [`random_points`], deterministic per seed.
pub fn random_instance(m: usize, dist: PointDistribution, seed: u64) -> EnumerationOracle {
    assert!(m >= 1, "an instance needs at least one label");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    enumeration_backend(random_points(m, dist, &mut rng))
}

fn gaussian_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sparse(x: &[f64]) -> Vec<(usize, f64)> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j, *v))
        .collect()
}

/// Linearly separable multi-label data: each label is the sign of a fixed
/// random hyperplane, and points within `margin` of any hyperplane are
/// rejected.
pub fn separable_multilabel(
    n: usize,
    d_features: usize,
    d_labels: usize,
    margin: f64,
    seed: u64,
) -> MultiLabelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes: Vec<(Vec<f64>, f64)> = (0..d_labels)
        .map(|_| {
            let w = gaussian_vec(&mut rng, d_features);
            let norm = dot(&w, &w).sqrt();
            (
                w.iter().map(|v| v / norm).collect(),
                rng.gen_range(-0.3..0.3),
            )
        })
        .collect();
    let mut examples = Vec::with_capacity(n);
    while examples.len() < n {
        let x = gaussian_vec(&mut rng, d_features);
        let scores: Vec<f64> = planes.iter().map(|(w, b)| dot(w, &x) + b).collect();
        if scores.iter().any(|s| s.abs() < margin) {
            continue;
        }
        examples.push(MultiLabelExample {
            features: sparse(&x),
            labels: scores.iter().map(|&s| s > 0.0).collect(),
            split: Split::Train,
        });
    }
    MultiLabelDataset {
        examples,
        d_features,
        d_labels,
    }
}

/// Noisy multi-label data shaped like the yeast benchmark: correlated
/// labels driven by a low-rank latent factor, four to six positives per
/// example. The last `n_test` examples are tagged [`Split::Test`].
pub fn yeast_style(
    n: usize,
    n_test: usize,
    d_features: usize,
    d_labels: usize,
    seed: u64,
) -> MultiLabelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = 3;
    let factors: Vec<Vec<f64>> = (0..rank)
        .map(|_| gaussian_vec(&mut rng, d_features))
        .collect();
    let loadings: Vec<Vec<f64>> = (0..d_labels)
        .map(|_| gaussian_vec(&mut rng, rank))
        .collect();
    let own: Vec<Vec<f64>> = (0..d_labels)
        .map(|_| gaussian_vec(&mut rng, d_features))
        .collect();
    let noise = Normal::new(0.0, 0.8).expect("valid deviation");
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<f64> = gaussian_vec(&mut rng, d_features)
            .into_iter()
            .map(|v| (v * 1000.0).round() / 1000.0)
            .collect();
        let latent: Vec<f64> = factors
            .iter()
            .map(|f| dot(f, &x) / (d_features as f64).sqrt())
            .collect();
        let labels = (0..d_labels)
            .map(|j| {
                let s = dot(&loadings[j], &latent)
                    + 0.5 * dot(&own[j], &x) / (d_features as f64).sqrt();
                s + noise.sample(&mut rng) > 0.6
            })
            .collect();
        examples.push(MultiLabelExample {
            features: sparse(&x),
            labels,
            split: if i + n_test >= n {
                Split::Test
            } else {
                Split::Train
            },
        });
    }
    MultiLabelDataset {
        examples,
        d_features,
        d_labels,
    }
}

/// A tagged sequence: one dense feature vector per position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceExample {
    pub features: Vec<Vec<f64>>,
    pub tags: Vec<usize>,
}

/// Sticky Markov chain over `k` tags with Gaussian emissions around a
/// per-tag centre.
pub fn chain_dataset(
    n: usize,
    len: usize,
    k: usize,
    d_features: usize,
    seed: u64,
) -> Vec<SequenceExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..k).map(|_| gaussian_vec(&mut rng, d_features)).collect();
    let noise = Normal::new(0.0, 0.7).expect("valid deviation");
    (0..n)
        .map(|_| {
            let mut tags = Vec::with_capacity(len);
            let mut t = rng.gen_range(0..k);
            for _ in 0..len {
                tags.push(t);
                if rng.gen_bool(0.3) {
                    t = rng.gen_range(0..k);
                }
            }
            let features = tags
                .iter()
                .map(|&t| {
                    centres[t]
                        .iter()
                        .map(|c| c + noise.sample(&mut rng))
                        .collect()
                })
                .collect();
            SequenceExample { features, tags }
        })
        .collect()
}

/// A forest over `nodes` nodes (parents precede children) and examples
/// whose label set is the ancestor closure of the node nearest to the
/// features.
pub fn hierarchy_dataset(
    n: usize,
    nodes: usize,
    d_features: usize,
    seed: u64,
) -> (Vec<Option<usize>>, Vec<(Vec<f64>, Vec<bool>)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents: Vec<Option<usize>> = (0..nodes)
        .map(|i| {
            if i < 2 {
                None
            } else {
                Some(rng.gen_range(0..i))
            }
        })
        .collect();
    let centres: Vec<Vec<f64>> = (0..nodes)
        .map(|_| gaussian_vec(&mut rng, d_features))
        .collect();
    let noise = Normal::new(0.0, 0.5).expect("valid deviation");
    let mut order: Vec<usize> = (0..nodes).collect();
    let examples = (0..n)
        .map(|_| {
            order.shuffle(&mut rng);
            let node = order[0];
            let x: Vec<f64> = centres[node]
                .iter()
                .map(|c| c + noise.sample(&mut rng))
                .collect();
            let mut on = vec![false; nodes];
            on[node] = true;
            crate::oracle::close_upward(&parents, &mut on);
            (x, on)
        })
        .collect();
    (parents, examples)
}
