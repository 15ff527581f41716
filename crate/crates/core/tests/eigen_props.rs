mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use specrobust::eigen::{eigh, eigh_matrix, sign_fix, Tolerances};
use specrobust::linalg::Matrix;
use specrobust::metricgraph::{laplacian, Graph, LaplacianVariant};
use specrobust::rng::SplitMix64;

const VARIANTS: [LaplacianVariant; 2] = [LaplacianVariant::Unnormalized, LaplacianVariant::Scaled];

fn oracle_eigenvalues(a: &Matrix<f64>) -> Vec<f64> {
    let m = DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)]);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

fn check_decomposition(g: &Graph<f64>, variant: LaplacianVariant) {
    let l = laplacian(g, variant);
    let s = eigh(&l).unwrap();
    let n = g.n();
    let a = l.matrix();
    let v = s.eigenvectors();
    // orthonormal columns
    let gram = v.transpose().matmul(v);
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!(
                (gram[(i, j)] - want).abs() < 1e-10,
                "gram ({i},{j}) = {}",
                gram[(i, j)]
            );
        }
    }
    // A v = λ v
    for k in 1..=n {
        let vk = s.vector(k);
        let av = a.mat_vec(&vk);
        let res: f64 = av
            .iter()
            .zip(&vk)
            .map(|(x, y)| (x - s.lambda(k) * y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-9 * n as f64, "residual {res} for k={k}");
    }
    // ascending, nonnegative, matches an independent solver
    let ev = s.eigenvalues();
    assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    assert!(ev[0] > -1e-10);
    for (x, y) in ev.iter().zip(oracle_eigenvalues(a)) {
        assert!((x - y).abs() < 1e-9, "{x} vs oracle {y}");
    }
    match variant {
        LaplacianVariant::Unnormalized => assert!(s.largest() <= n as f64 + 1e-9),
        LaplacianVariant::Scaled => assert!(s.largest() <= 2.0 + 1e-9),
    }
}

#[test]
fn decomposition_matches_oracle_on_random_graphs() {
    let mut rng = SplitMix64::new(7);
    for _ in 0..100 {
        let n = 2 + rng.below(39);
        let p = rng.uniform(0.05, 0.9);
        let g = random_graph(&mut rng, n, p);
        for v in VARIANTS {
            check_decomposition(&g, v);
        }
    }
}

#[test]
fn null_space_dimension_counts_components() {
    let mut rng = SplitMix64::new(11);
    for _ in 0..60 {
        let n = 3 + rng.below(20);
        let g = {
            let q = rng.uniform(0.02, 0.4);
            random_graph(&mut rng, n, q)
        };
        let comps = g.connected_components();
        let count = comps.iter().max().unwrap() + 1;
        let isolated = (0..n)
            .filter(|&i| (0..n).all(|j| !g.has_edge(i, j)))
            .count();
        let s = eigh(&laplacian(&g, LaplacianVariant::Unnormalized)).unwrap();
        assert_eq!(s.zero_multiplicity(), count);
        // isolated vertices carry an identity row in the scaled variant
        let s = eigh(&laplacian(&g, LaplacianVariant::Scaled)).unwrap();
        assert_eq!(s.zero_multiplicity(), count - isolated);
    }
}

#[test]
fn null_space_is_canonical() {
    let mut rng = SplitMix64::new(3);
    for _ in 0..40 {
        let n = 4 + rng.below(12);
        let g = random_graph(&mut rng, n, 0.15);
        let s = eigh(&laplacian(&g, LaplacianVariant::Unnormalized)).unwrap();
        let ones = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            assert!((s.vector(1)[i] - ones).abs() < 1e-12);
        }
        // a second run and a relabelled copy of the same matrix give the same basis
        let again = eigh(&laplacian(&g, LaplacianVariant::Unnormalized)).unwrap();
        assert_eq!(s, again);
        for k in 1..=s.zero_multiplicity() {
            let v = s.vector(k);
            let first = v.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }
}

#[test]
fn closed_form_spectra() {
    // path on n vertices: 2 - 2cos(πk/n)
    for n in [2, 3, 5, 8, 13] {
        let s = eigh(&laplacian(&path_graph(n), LaplacianVariant::Unnormalized)).unwrap();
        for k in 0..n {
            let want = 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos();
            assert!((s.eigenvalues()[k] - want).abs() < 1e-12);
        }
    }
    // complete graph: 0 and n with multiplicity n - 1
    for n in [2, 4, 7] {
        let s = eigh(&laplacian(
            &complete_graph(n),
            LaplacianVariant::Unnormalized,
        ))
        .unwrap();
        assert!(s.lambda(1).abs() < 1e-12);
        for k in 2..=n {
            assert!((s.lambda(k) - n as f64).abs() < 1e-12);
        }
        let s = eigh(&laplacian(&complete_graph(n), LaplacianVariant::Scaled)).unwrap();
        for k in 2..=n {
            assert!((s.lambda(k) - n as f64 / (n - 1) as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn interlacing_under_edge_removal() {
    let mut rng = SplitMix64::new(23);
    for _ in 0..200 {
        let n = 2 + rng.below(24);
        let g = {
            let q = rng.uniform(0.1, 0.9);
            random_graph(&mut rng, n, q)
        };
        let h = {
            let q = rng.uniform(0.2, 1.0);
            random_subgraph(&mut rng, &g, q)
        };
        assert!(h.is_subgraph_of(&g));
        let sg = eigh(&laplacian(&g, LaplacianVariant::Unnormalized)).unwrap();
        let sh = eigh(&laplacian(&h, LaplacianVariant::Unnormalized)).unwrap();
        for k in 1..=n {
            assert!(sg.lambda(k) >= sh.lambda(k) - 1e-9);
        }
    }
}

#[test]
fn f32_agrees_with_f64() {
    let mut rng = SplitMix64::new(5);
    for _ in 0..20 {
        let n = 3 + rng.below(10);
        let g = random_graph(&mut rng, n, 0.5);
        let a = laplacian(&g, LaplacianVariant::Unnormalized)
            .matrix()
            .clone();
        let s64 = eigh_matrix(&a, &Tolerances::default()).unwrap();
        let s32 = eigh_matrix(&a.cast::<f32>(), &Tolerances::default()).unwrap();
        for (x, y) in s64.eigenvalues().iter().zip(s32.eigenvalues()) {
            assert!((x - *y as f64).abs() < 1e-4 * n as f64);
        }
    }
}

#[test]
fn non_symmetric_input_is_rejected() {
    let mut a = Matrix::<f64>::identity(3);
    a[(0, 1)] = 1.0;
    assert!(eigh_matrix(&a, &Tolerances::default()).is_err());
}

proptest! {
    #[test]
    fn sign_fix_is_idempotent_and_preserves_norm(v in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let tol = Tolerances::default();
        prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
        let f = sign_fix(&v, &tol).unwrap();
        prop_assert_eq!(sign_fix(&f, &tol).unwrap(), f.clone());
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        prop_assert_eq!(sign_fix(&neg, &tol).unwrap(), f.clone());
        prop_assert!((norm(&f) - norm(&v)).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_is_edge_sum(seed in any::<u64>(), n in 2usize..15) {
        let mut rng = SplitMix64::new(seed);
        let g = random_graph(&mut rng, n, 0.4);
        let l = laplacian(&g, LaplacianVariant::Unnormalized);
        let v = rng.normal_vec(n);
        let mut want = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                want += g.weight(i, j) * (v[i] - v[j]).powi(2);
            }
        }
        prop_assert!((l.matrix().quadratic_form(&v) - want).abs() < 1e-9 * (1.0 + want));
    }
}
