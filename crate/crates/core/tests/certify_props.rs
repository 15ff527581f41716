mod common;

use common::*;
use proptest::prelude::*;
use specrobust::attack::{attack_dataset_feature, AttackBudget};
use specrobust::certify::*;
use specrobust::dataio::{load_report, save_report, Dataset, MetricKind};
use specrobust::metricgraph::{pairwise_distances, shifted_graphs, LaplacianVariant};
use specrobust::rng::SplitMix64;

const UNNORM: LaplacianVariant = LaplacianVariant::Unnormalized;

fn random_case(seed: u64) -> (Dataset<f64>, f64) {
    let mut rng = SplitMix64::new(seed);
    let n = 4 + rng.below(10);
    let d = 1 + rng.below(3);
    let x = uniform_dataset(&mut rng, n, d, 3.0);
    let t = auto_threshold(&pairwise_distances(&x, MetricKind::L2)) * 1.2;
    (x, t)
}

#[test]
fn effective_delta_grows_with_eps() {
    for seed in 0..150 {
        let (x, t) = random_case(seed);
        let mut prev = 0.0;
        for i in 0..40 {
            let eps = t * i as f64 / 80.0;
            let c = certify_pair(&x, t, eps, MetricKind::L2, UNNORM).unwrap();
            assert!(
                c.effective_delta >= prev - 1e-12,
                "seed {seed} eps {eps}: {prev} -> {}",
                c.effective_delta
            );
            prev = c.effective_delta;
        }
    }
}

#[test]
fn raw_delta_grows_while_lower_graph_is_fixed() {
    for seed in 0..150 {
        let (x, t) = random_case(seed);
        let d = pairwise_distances(&x, MetricKind::L2);
        let mut prev: Option<(f64, Vec<u64>)> = None;
        for i in 0..40 {
            let eps = t * i as f64 / 80.0;
            let c = certify_pair(&x, t, eps, MetricKind::L2, UNNORM).unwrap();
            let key = shifted_graphs(&d, t, eps).unwrap().minus.edge_key();
            if let Some((p, k)) = &prev {
                if *k == key {
                    assert!(c.delta >= p - 1e-12);
                }
            }
            prev = Some((c.delta, key));
        }
    }
}

// Losing edges in G⁻ can shrink λ₃⁻ − λ₂⁻ faster than the numerator grows.
#[test]
fn raw_delta_can_shrink_once_lower_graph_loses_edges() {
    let (x, t) = random_case(0);
    let eps: Vec<f64> = (0..40).map(|i| t * i as f64 / 80.0).collect();
    let deltas: Vec<f64> = eps
        .iter()
        .map(|&e| {
            certify_pair(&x, t, e, MetricKind::L2, UNNORM)
                .unwrap()
                .delta
        })
        .collect();
    let drop = deltas
        .windows(2)
        .position(|w| w[1] < w[0])
        .expect("a decrease on this grid");
    assert!(
        deltas[drop + 1] > std::f64::consts::SQRT_2,
        "decreases only above the trivial cap"
    );
}

#[test]
fn numerator_is_nonnegative() {
    for seed in 0..100 {
        let (x, t) = random_case(seed);
        for eps in [0.0, 0.05, 0.1, 0.3, 1.0] {
            let c = certify_pair(&x, t, eps, MetricKind::L2, UNNORM).unwrap();
            let i = &c.inputs;
            assert!(i.lambda2_plus.unwrap() >= i.lambda2_minus.unwrap() - 1e-9);
        }
    }
}

#[test]
fn multi_with_one_feature_is_pair() {
    for seed in 0..50 {
        let (x, t) = random_case(seed);
        for variant in [UNNORM, LaplacianVariant::Scaled] {
            let p = certify_pair(&x, t, 0.1, MetricKind::L2, variant).unwrap();
            let m = certify_multi(&x, t, 0.1, 1, MetricKind::L2, variant).unwrap();
            assert!(p.delta == m.delta || (p.delta - m.delta).abs() < 1e-12);
            assert_eq!(p.kind, CertificateKind::Pair);
            assert_eq!(m.kind, CertificateKind::Pair);
        }
    }
}

#[test]
fn empty_lower_graph_is_vacuous() {
    let x = line(&[0.0, 1.0, 2.0, 3.0]);
    let c = certify_pair(&x, 1.0, 0.4, MetricKind::L2, UNNORM).unwrap();
    assert!(c.vacuous);
    assert!(c.delta.is_infinite());
    assert_eq!(c.effective_delta, std::f64::consts::SQRT_2);
    let m = certify_multi(&x, 1.0, 0.4, 2, MetricKind::L2, UNNORM).unwrap();
    assert!(m.vacuous);
    assert_eq!(m.effective_delta, 2.0);
}

#[test]
fn scaled_variant_is_marked_empirical() {
    let (x, t) = random_case(3);
    let c = certify_pair(&x, t, 0.1, MetricKind::L2, LaplacianVariant::Scaled).unwrap();
    assert_eq!(c.mode, ProofMode::EmpiricalMode);
    let c = certify_pair(&x, t, 0.1, MetricKind::L2, UNNORM).unwrap();
    assert_eq!(c.mode, ProofMode::Proven);
}

#[test]
fn invalid_arguments_are_rejected() {
    let (x, t) = random_case(1);
    assert!(certify_pair(&x, t, -0.1, MetricKind::L2, UNNORM).is_err());
    assert!(certify_multi(&x, t, 0.1, 0, MetricKind::L2, UNNORM).is_err());
    assert!(certify_multi(&x, t, 0.1, x.len() - 1, MetricKind::L2, UNNORM).is_err());
    assert!(certify_lower_bound(&x, 0.0, 0.1, MetricKind::L2).is_err());
}

#[test]
fn lower_bound_is_linear_in_delta() {
    let x = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
    let a = certify_lower_bound(&x, 3.0, 0.01, MetricKind::L2).unwrap();
    let b = certify_lower_bound(&x, 3.0, 0.02, MetricKind::L2).unwrap();
    assert!((a.delta - 0.01 * 40f64.sqrt()).abs() < 1e-12);
    assert!((b.delta - 2.0 * a.delta).abs() < 1e-12);
    assert_eq!(a.kind, CertificateKind::LowerBound);
    let ctx = a.lower_bound.unwrap();
    assert!((ctx.feature_threshold - 2.0).abs() < 1e-12);
    assert!((ctx.certified_radius - 0.5).abs() < 1e-12);
}

#[test]
fn pointwise_certificate_is_capped() {
    let mut rng = SplitMix64::new(12);
    for _ in 0..40 {
        let x = uniform_dataset(&mut rng, 6, 2, 2.0);
        let p: Vec<f64> = (0..2).map(|_| rng.uniform(0.0, 2.0)).collect();
        let t = rng.uniform(0.3, 1.5);
        let eps = rng.uniform(0.0, 0.6);
        let c = certify_pointwise(&x, &p, t, eps, MetricKind::L2).unwrap();
        assert_eq!(c.kind, CertificateKind::Pointwise);
        assert!(c.effective_delta <= 2.0);
        assert!(c.delta >= 0.0);
        assert_eq!(c.clipped, t < eps);
    }
}

#[test]
fn search_never_beats_certificate() {
    for seed in 0..20 {
        let (x, t) = random_case(seed);
        let c = certify_pair(&x, t, 0.1, MetricKind::L2, UNNORM).unwrap();
        let a = attack_dataset_feature(
            &x,
            t,
            0.1,
            MetricKind::L2,
            &AttackBudget::new(300, 5, seed).unwrap(),
        )
        .unwrap();
        assert!(a.within_ball);
        assert!(
            a.displacement <= c.delta + 1e-9,
            "seed {seed}: {} > {}",
            a.displacement,
            c.delta
        );
    }
}

#[test]
fn certificate_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let x = line(&[0.0, 1.0, 2.0, 3.0]);
    for c in [
        certify_pair(&x, 1.0, 0.4, MetricKind::L2, UNNORM).unwrap(),
        certify_pair(&x, 1.0, 0.1, MetricKind::L1, UNNORM).unwrap(),
        certify_lower_bound(&x, 3.0, 0.01, MetricKind::LInf).unwrap(),
    ] {
        let path = dir.path().join("cert.json");
        save_report(&c, &path).unwrap();
        let back: Certificate = load_report(&path).unwrap();
        assert_eq!(back, c);
    }
    let text = std::fs::read_to_string(dir.path().join("cert.json")).unwrap();
    assert!(text.contains("\"lower_bound\""));
}

proptest! {
    #[test]
    fn multi_bound_respects_cap(seed in 0u64..1000) {
        let (x, t) = random_case(seed);
        prop_assume!(x.len() >= 6);
        for k in 1..=3 {
            let c = certify_multi(&x, t, 0.05, k, MetricKind::L2, UNNORM).unwrap();
            prop_assert!(c.effective_delta <= (2.0 * k as f64).sqrt() + 1e-12);
            prop_assert_eq!(c.k, k);
        }
    }
}

#[test]
fn single_precision_tracks_double() {
    for seed in 0..20 {
        let (x, t) = random_case(seed);
        let c64 = certify_pair(&x, t, 0.1, MetricKind::L2, UNNORM).unwrap();
        let c32 = certify_pair(&x.cast::<f32>(), t as f32, 0.1f32, MetricKind::L2, UNNORM).unwrap();
        assert_eq!(c64.vacuous, c32.vacuous);
        assert!(
            (c64.effective_delta - c32.effective_delta).abs() < 1e-2,
            "seed {seed}"
        );
    }
}
