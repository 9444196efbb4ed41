use proptest::prelude::*;

use slacksvm::data::generate::{adversarial_instance, random_instance, PointDistribution};
use slacksvm::geometry::LabelPoint;
use slacksvm::oracle::{enumeration_backend, EnumerationOracle, Oracle};
use slacksvm::search::{
    angular_search, run_search, sarawagi_search, Certificate, QueueDiscipline, SearchConfig,
    SearchOutcome, SearchStrategy,
};

fn distribution(i: u8) -> PointDistribution {
    [
        PointDistribution::Uniform,
        PointDistribution::Clusters,
        PointDistribution::Planted,
    ][i as usize % 3]
}

fn best_phi(o: &EnumerationOracle) -> f64 {
    o.points().iter().map(LabelPoint::phi).fold(0.0, f64::max)
}

fn check_outcome(o: &EnumerationOracle, out: &SearchOutcome<usize>) -> Result<(), TestCaseError> {
    prop_assert!(out.queries >= 1);
    prop_assert!(out.best_phi <= best_phi(o));
    match out.best_label {
        Some(l) => {
            prop_assert_eq!(o.point(&l), out.best_point);
            prop_assert_eq!(out.best_phi, out.best_point.phi());
        }
        None => prop_assert_eq!(out.best_phi, 0.0),
    }
    if let Certificate::BoundGap(r) = out.certificate {
        prop_assert!(r >= 1.0);
        prop_assert!(best_phi(o) <= r * out.best_phi * (1.0 + 1e-9) || out.best_phi == 0.0);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// Every search reports a real label and an honest certificate.
    #[test]
    fn searches_are_sound(seed in any::<u64>(), m in 1usize..500, dist in any::<u8>()) {
        let o = random_instance(m, distribution(dist), seed);
        let cfg = SearchConfig::default();
        for s in SearchStrategy::ALL {
            let out = run_search(&o, s, &cfg, 0.0).unwrap();
            check_outcome(&o, &out)?;
        }
        let out = sarawagi_search(&o, 0.3, &cfg);
        check_outcome(&o, &out)?;
    }

    #[test]
    fn angular_is_exact_under_either_queue(seed in any::<u64>(), m in 3usize..=500, dist in any::<u8>(), fifo in any::<bool>()) {
        let o = random_instance(m, distribution(dist), seed);
        let cfg = SearchConfig {
            queue: if fifo { QueueDiscipline::Fifo } else { QueueDiscipline::Priority },
            ..SearchConfig::exact()
        };
        let out = angular_search(&o, &cfg).unwrap();
        prop_assert_eq!(out.certificate, Certificate::Exact);
        let star = best_phi(&o);
        prop_assert!((out.best_phi - star).abs() <= 1e-9 * star);
        prop_assert!(out.constrained_queries <= 2 * m + 1);
    }

    /// Once both ends of the multiplier range are known, the midpoint rule
    /// halves it on every step that does not stop the search.
    #[test]
    fn bisecting_range_halves(seed in any::<u64>(), m in 2usize..300, dist in any::<u8>()) {
        let o = random_instance(m, distribution(dist), seed);
        let cfg = SearchConfig { lambda0: Some(1.0), ..SearchConfig::default() }.with_trace();
        let out = run_search(&o, SearchStrategy::Bisecting, &cfg, 0.0).unwrap();
        let (mut lo, mut hi): (Option<f64>, Option<f64>) = (None, None);
        let mut widths = Vec::new();
        for rec in &out.trace {
            let p = rec.answer.unwrap();
            if p.h >= rec.lambda * p.g {
                lo = Some(rec.lambda);
            } else {
                hi = Some(rec.lambda);
            }
            if let (Some(l), Some(u)) = (lo, hi) {
                widths.push((u - l).abs());
            }
        }
        for w in widths.windows(2) {
            prop_assert!(w[1] <= w[0]);
            prop_assert!((w[1] - 0.5 * w[0]).abs() <= 1e-12 * w[0]);
        }
    }

    #[test]
    fn adversarial_family_defeats_line_searches(eps_exp in 2u32..=4, h_hat in 0.5f64..4.0, g_hat in 0.5f64..4.0) {
        let eps = 10f64.powi(-(eps_exp as i32));
        let o = adversarial_instance(eps, h_hat, g_hat);
        let cfg = SearchConfig::default();
        let ceiling = 3.0 * eps * h_hat.max(g_hat);
        for s in [SearchStrategy::Sarawagi, SearchStrategy::BinaryUpper, SearchStrategy::Bisecting] {
            let out = run_search(&o, s, &cfg, 0.0).unwrap();
            prop_assert!(out.best_phi < ceiling, "{} found {}", s, out.best_phi);
        }
        let out = angular_search(&o, &cfg).unwrap();
        prop_assert!((out.best_phi - 0.25 * h_hat * g_hat).abs() <= 1e-12 * h_hat * g_hat);
    }
}

#[test]
fn sarawagi_without_slack_keeps_the_best_label_seen() {
    let o = random_instance(200, PointDistribution::Clusters, 11);
    let out = sarawagi_search(&o, 0.0, &SearchConfig::default().with_trace());
    let seen = out
        .trace
        .iter()
        .filter_map(|r| r.answer)
        .map(|p| p.phi())
        .fold(0.0, f64::max);
    assert_eq!(out.best_phi, seen);
}

#[test]
fn no_violation_means_no_label() {
    let o = enumeration_backend(vec![LabelPoint::new(1.0, 0.0), LabelPoint::new(-0.5, 2.0)]);
    for s in SearchStrategy::ALL {
        let out = run_search(&o, s, &SearchConfig::default(), 0.0).unwrap();
        assert_eq!(out.best_phi, 0.0, "{s}");
        assert_eq!(out.best_label, None, "{s}");
    }
}

#[test]
fn budget_caps_every_strategy() {
    let o = random_instance(400, PointDistribution::Clusters, 3);
    let cfg = SearchConfig {
        max_queries: 3,
        ..SearchConfig::exact()
    };
    for s in [
        SearchStrategy::Sarawagi,
        SearchStrategy::BinaryUpper,
        SearchStrategy::Bisecting,
        SearchStrategy::Angular,
    ] {
        let out = run_search(&o, s, &cfg, 0.0).unwrap();
        assert!(out.queries <= 3, "{s} used {}", out.queries);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let o = random_instance(5, PointDistribution::Uniform, 0);
    for cfg in [
        SearchConfig {
            stop_ratio: 0.0,
            ..SearchConfig::default()
        },
        SearchConfig {
            max_queries: 0,
            ..SearchConfig::default()
        },
        SearchConfig {
            lambda0: Some(-1.0),
            ..SearchConfig::default()
        },
    ] {
        assert!(angular_search(&o, &cfg).is_err());
    }
}
