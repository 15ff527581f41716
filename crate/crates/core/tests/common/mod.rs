#![allow(dead_code)]

use specrobust::dataio::Dataset;
use specrobust::linalg::Matrix;
use specrobust::metricgraph::{Graph, GraphKind};
use specrobust::rng::SplitMix64;

pub fn uniform_dataset(rng: &mut SplitMix64, n: usize, d: usize, scale: f64) -> Dataset<f64> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.uniform(0.0, scale)).collect())
        .collect();
    Dataset::from_rows(&rows, None, "random").unwrap()
}

pub fn line(xs: &[f64]) -> Dataset<f64> {
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    Dataset::from_rows(&rows, None, "line").unwrap()
}

/// Random 0/1 graph with edge probability `p`.
pub fn random_graph(rng: &mut SplitMix64, n: usize, p: f64) -> Graph<f64> {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.next_f64() < p {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
        }
    }
    Graph::from_weights(w, GraphKind::Threshold { threshold: 1.0 }).unwrap()
}

/// `g` with each edge kept independently with probability `keep`.
pub fn random_subgraph(rng: &mut SplitMix64, g: &Graph<f64>, keep: f64) -> Graph<f64> {
    let n = g.n();
    let mut w = g.weights().clone();
    for i in 0..n {
        for j in (i + 1)..n {
            if w[(i, j)] != 0.0 && rng.next_f64() >= keep {
                w[(i, j)] = 0.0;
                w[(j, i)] = 0.0;
            }
        }
    }
    Graph::from_weights(w, g.kind()).unwrap()
}

pub fn path_graph(n: usize) -> Graph<f64> {
    let w = Matrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
    Graph::from_weights(w, GraphKind::Threshold { threshold: 1.0 }).unwrap()
}

pub fn complete_graph(n: usize) -> Graph<f64> {
    let w = Matrix::from_fn(n, n, |i, j| if i != j { 1.0 } else { 0.0 });
    Graph::from_weights(w, GraphKind::Threshold { threshold: 1.0 }).unwrap()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
