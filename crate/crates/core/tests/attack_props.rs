mod common;

use common::*;
use proptest::prelude::*;
use specrobust::attack::*;
use specrobust::dataio::MetricKind;
use specrobust::features::{FeatureExtender, GraphSpec};
use specrobust::metricgraph::LaplacianVariant;
use specrobust::rng::SplitMix64;

const METRICS: [MetricKind; 3] = [MetricKind::L2, MetricKind::L1, MetricKind::LInf];

fn budget(trials: usize, seed: u64) -> AttackBudget {
    AttackBudget::new(trials, 5, seed).unwrap()
}

#[test]
fn dataset_attack_is_deterministic_across_thread_counts() {
    let mut rng = SplitMix64::new(31);
    let x = uniform_dataset(&mut rng, 8, 2, 2.0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            attack_dataset_feature(&x, 0.9, 0.15, MetricKind::L2, &budget(300, 4)).unwrap()
        })
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a, run(8));
}

#[test]
fn dataset_attack_stays_in_ball() {
    let mut rng = SplitMix64::new(32);
    for metric in METRICS {
        for _ in 0..5 {
            let x = uniform_dataset(&mut rng, 7, 3, 2.0);
            let eps = rng.uniform(0.05, 0.4);
            let r = attack_dataset_feature(&x, 1.2, eps, metric, &budget(200, 1)).unwrap();
            assert!(r.within_ball);
            for i in 0..x.len() {
                assert!(metric.distance(x.point(i), r.best_perturbed.point(i)) <= eps);
            }
        }
    }
}

#[test]
fn more_trials_never_hurt() {
    let mut rng = SplitMix64::new(33);
    for _ in 0..5 {
        let x = uniform_dataset(&mut rng, 7, 2, 2.0);
        let small = attack_dataset_feature(&x, 1.0, 0.2, MetricKind::L2, &budget(50, 9)).unwrap();
        let large = attack_dataset_feature(&x, 1.0, 0.2, MetricKind::L2, &budget(400, 9)).unwrap();
        assert!(large.displacement >= small.displacement);
    }
}

#[test]
fn zero_radius_moves_nothing() {
    let mut rng = SplitMix64::new(34);
    let x = uniform_dataset(&mut rng, 6, 2, 2.0);
    let r = attack_dataset_feature(&x, 1.0, 0.0, MetricKind::L2, &budget(100, 0)).unwrap();
    assert_eq!(r.displacement, 0.0);
    assert_eq!(r.trials_used, 0);
    assert_eq!(r.best_perturbed, x);
    let p = attack_pointwise_feature(&x, &[1.0, 1.0], 1.0, 0.0, MetricKind::L2, &budget(100, 0))
        .unwrap();
    assert_eq!(p.displacement, 0.0);
}

#[test]
fn linear_search_agrees_with_exact_attack() {
    let mut rng = SplitMix64::new(35);
    let mut flips = 0;
    for i in 0..60 {
        let w = rng.normal_vec(3);
        let b = rng.uniform(-1.0, 1.0);
        let p = rng.normal_vec(3);
        let eps = rng.uniform(0.1, 1.5);
        let clf = LinearClassifier { w: w.clone(), b };
        let (moved, exact_flip) = attack_linear_exact(&w, b, &p, eps).unwrap();
        assert!((MetricKind::L2.distance(&p, &moved) - eps).abs() < 1e-12);
        let margin = (w.iter().zip(&p).map(|(a, c)| a * c).sum::<f64>() + b).abs();
        let label = predicted_class(&clf.output(&p).unwrap());
        let goal = PointGoal::LabelFlip { label };
        let r = attack_point_map(&clf, &p, eps, MetricKind::L2, goal, &budget(500, i)).unwrap();
        assert!(r.within_ball);
        // beyond the exact radius no perturbation can flip
        if !exact_flip {
            assert_eq!(r.flipped, Some(false));
        } else if margin < 0.8 * eps * norm(&w) {
            assert_eq!(r.flipped, Some(true), "case {i}");
            flips += 1;
        }
    }
    assert!(flips > 5);
}

#[test]
fn exact_linear_attack_rejects_zero_weights() {
    assert!(attack_linear_exact(&[0.0, 0.0], 1.0, &[1.0, 2.0], 0.5).is_err());
}

#[test]
fn robustness_estimate_is_a_fraction() {
    let mut rng = SplitMix64::new(36);
    let x = uniform_dataset(&mut rng, 10, 2, 2.0);
    let test = uniform_dataset(&mut rng, 6, 2, 2.0);
    let ext = FeatureExtender::new(
        &x,
        GraphSpec::Threshold(0.8),
        MetricKind::L2,
        LaplacianVariant::Unnormalized,
        1,
    )
    .unwrap();
    let map = SingleFeature(&ext);
    let v = Violation::Displacement { delta: 0.0 };
    let none = estimate_robustness(&test, &map, 0.0, MetricKind::L2, &v, &budget(20, 1)).unwrap();
    assert_eq!(none.violations, 0);
    let some = estimate_robustness(&test, &map, 0.5, MetricKind::L2, &v, &budget(100, 1)).unwrap();
    assert_eq!(some.total, 6);
    assert!((0.0..=1.0).contains(&some.gamma_hat));
    assert_eq!(
        some.violated.iter().filter(|&&b| b).count(),
        some.violations
    );
    let again = estimate_robustness(&test, &map, 0.5, MetricKind::L2, &v, &budget(100, 1)).unwrap();
    assert_eq!(some, again);
}

#[test]
fn pointwise_displacement_is_bounded() {
    let mut rng = SplitMix64::new(37);
    for _ in 0..10 {
        let x = uniform_dataset(&mut rng, 8, 2, 2.0);
        let p: Vec<f64> = (0..2).map(|_| rng.uniform(0.0, 2.0)).collect();
        let r =
            attack_pointwise_feature(&x, &p, 0.8, 0.3, MetricKind::L2, &budget(100, 2)).unwrap();
        assert!(r.within_ball);
        assert!(r.displacement <= 2.0);
    }
}

#[test]
fn empty_budget_is_rejected() {
    assert!(AttackBudget::new(0, 1, 0).is_err());
}

proptest! {
    #[test]
    fn projection_lands_in_ball(
        c in prop::collection::vec(-3.0f64..3.0, 1..6),
        seed in any::<u64>(),
        eps in 0.0f64..2.0,
        scale in 0.0f64..10.0,
    ) {
        let mut rng = SplitMix64::new(seed);
        for metric in METRICS {
            let p: Vec<f64> = c.iter().map(|x| x + scale * rng.normal()).collect();
            let q = project_to_ball(&c, &p, eps, metric);
            prop_assert!(metric.distance(&c, &q) <= eps);
            // points already inside are left alone
            if metric.distance(&c, &p) <= eps {
                prop_assert_eq!(&q, &p);
            }
        }
    }

    #[test]
    fn random_directions_have_unit_norm(seed in any::<u64>(), dim in 1usize..20) {
        let mut rng = SplitMix64::new(seed);
        for metric in METRICS {
            let v = random_direction(&mut rng, dim, metric);
            prop_assert!((metric_norm(&v, metric) - 1.0).abs() < 1e-12);
        }
    }
}
