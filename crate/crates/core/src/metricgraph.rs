//! Pairwise distances, threshold / Gaussian graphs and their Laplacians.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, MetricKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    values: Matrix<T>,
    metric: MetricKind,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[(i, j)]
    }

    pub fn max_entry(&self) -> T {
        self.values.max_abs()
    }

    /// Off-diagonal entries `(i, j, d)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j, self.values[(i, j)])))
    }
}

/// All-pairs distances between the rows of `points`, computed serially.
pub fn distances_between_rows<T: Scalar>(
    points: &Matrix<T>,
    metric: MetricKind,
) -> DistanceMatrix<T> {
    let n = points.rows();
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.distance(points.row(i), points.row(j));
            values[(i, j)] = d;
            values[(j, i)] = d;
        }
    }
    DistanceMatrix { values, metric }
}

/// All-pairs distances. Each unordered pair is evaluated once and mirrored, so
/// the result is exactly symmetric and independent of the worker count.
pub fn pairwise_distances<T: Scalar>(x: &Dataset<T>, metric: MetricKind) -> DistanceMatrix<T> {
    let n = x.len();
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| metric.distance(x.point(i), x.point(j)))
                .collect()
        })
        .collect();
    let mut values = Matrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[(i, j)] = d;
            values[(j, i)] = d;
        }
    }
    DistanceMatrix { values, metric }
}

/// Distances on `{x} ∪ X` with the query point as node 0.
pub fn augmented_distances<T: Scalar>(
    train: &DistanceMatrix<T>,
    x_train: &Dataset<T>,
    point: &[T],
) -> Result<DistanceMatrix<T>> {
    if point.len() != x_train.dim() {
        return Err(Error::DimensionMismatch {
            expected: x_train.dim(),
            found: point.len(),
        });
    }
    let n = x_train.len();
    let metric = train.metric;
    let mut values = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        let d = metric.distance(point, x_train.point(i));
        values[(0, i + 1)] = d;
        values[(i + 1, 0)] = d;
        for j in 0..n {
            values[(i + 1, j + 1)] = train.get(i, j);
        }
    }
    Ok(DistanceMatrix { values, metric })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shift {
    Minus,
    Zero,
    Plus,
}

impl Shift {
    fn sign(self) -> f64 {
        match self {
            Shift::Minus => -1.0,
            Shift::Zero => 0.0,
            Shift::Plus => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GraphKind {
    Threshold {
        threshold: f64,
    },
    Gaussian {
        gamma: f64,
    },
    PointwiseThreshold {
        threshold: f64,
        eps: f64,
        shift: Shift,
    },
}

impl GraphKind {
    pub fn is_weighted(&self) -> bool {
        matches!(self, GraphKind::Gaussian { .. })
    }
}

/// Symmetric, non-negative adjacency matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    weights: Matrix<T>,
    kind: GraphKind,
}

impl<T: Scalar> Graph<T> {
    /// Checks symmetry, zero diagonal and non-negativity.
    pub fn from_weights(weights: Matrix<T>, kind: GraphKind) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::InvalidArgument("adjacency must be square".into()));
        }
        let n = weights.rows();
        for i in 0..n {
            if weights[(i, i)] != T::zero() {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= T::zero()) || !w.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "invalid weight at ({i}, {j})"
                    )));
                }
                if w != weights[(j, i)] {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        deviation: (w - weights[(j, i)]).abs().as_f64(),
                    });
                }
            }
        }
        Ok(Self { weights, kind })
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights[(i, j)]
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weights[(i, j)] > T::zero()
    }

    pub fn degrees(&self) -> Vec<T> {
        (0..self.n())
            .map(|i| self.weights.row(i).iter().copied().sum())
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.has_edge(i, j)).count())
            .sum()
    }

    /// Every edge of `self` is also an edge of `other`.
    pub fn is_subgraph_of(&self, other: &Graph<T>) -> bool {
        let n = self.n();
        n == other.n()
            && (0..n).all(|i| ((i + 1)..n).all(|j| !self.has_edge(i, j) || other.has_edge(i, j)))
    }

    pub fn same_edges(&self, other: &Graph<T>) -> bool {
        self.is_subgraph_of(other) && other.is_subgraph_of(self)
    }

    /// Component label per vertex; labels are assigned in order of each
    /// component's smallest vertex.
    pub fn connected_components(&self) -> Vec<usize> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for u in 0..n {
                    if label[u] == usize::MAX && self.has_edge(v, u) {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Upper-triangle edge indicator packed into words; equal keys mean equal
    /// edge sets.
    pub fn edge_key(&self) -> Vec<u64> {
        let n = self.n();
        let mut key = vec![0u64; (n * n.saturating_sub(1) / 2).div_ceil(64).max(1)];
        let mut bit = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.has_edge(i, j) {
                    key[bit / 64] |= 1 << (bit % 64);
                }
                bit += 1;
            }
        }
        key
    }

    /// Text dump, one `i j weight` line per edge with `i < j`, sorted.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.has_edge(i, j) {
                    let _ = writeln!(out, "{i} {j} {}", self.weight(i, j));
                }
            }
        }
        out
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

/// Edge iff `i != j` and `D[i][j] <= threshold` (boundary ties are edges).
pub fn threshold_graph<T: Scalar>(d: &DistanceMatrix<T>, threshold: T) -> Result<Graph<T>> {
    check_nonneg("threshold", threshold.as_f64())?;
    let n = d.n();
    let weights = Matrix::from_fn(n, n, |i, j| {
        if i != j && d.get(i, j) <= threshold {
            T::one()
        } else {
            T::zero()
        }
    });
    Ok(Graph {
        weights,
        kind: GraphKind::Threshold {
            threshold: threshold.as_f64(),
        },
    })
}

/// Graphs at thresholds `T - 2ε`, `T`, `T + 2ε`.
#[derive(Debug, Clone)]
pub struct ShiftedGraphs<T> {
    pub minus: Graph<T>,
    pub base: Graph<T>,
    pub plus: Graph<T>,
    /// `T - 2ε < 0`; the lower graph was built at threshold 0.
    pub clipped: bool,
}

pub fn shifted_graphs<T: Scalar>(
    d: &DistanceMatrix<T>,
    threshold: T,
    eps: T,
) -> Result<ShiftedGraphs<T>> {
    check_nonneg("eps", eps.as_f64())?;
    let two = T::c(2.0);
    let lower = threshold - two * eps;
    let clipped = lower < T::zero();
    Ok(ShiftedGraphs {
        minus: threshold_graph(d, lower.max(T::zero()))?,
        base: threshold_graph(d, threshold)?,
        plus: threshold_graph(d, threshold + two * eps)?,
        clipped,
    })
}

/// Augmented graph on `{x} ∪ X` (node 0 is `x`): training pairs use `threshold`,
/// pairs touching node 0 use `threshold + shift·ε` (clipped at 0).
pub fn pointwise_graph<T: Scalar>(
    d_aug: &DistanceMatrix<T>,
    threshold: T,
    eps: T,
    shift: Shift,
) -> Result<Graph<T>> {
    check_nonneg("threshold", threshold.as_f64())?;
    check_nonneg("eps", eps.as_f64())?;
    let node0 = (threshold + T::c(shift.sign()) * eps).max(T::zero());
    let n = d_aug.n();
    let weights = Matrix::from_fn(n, n, |i, j| {
        let t = if i == 0 || j == 0 { node0 } else { threshold };
        if i != j && d_aug.get(i, j) <= t {
            T::one()
        } else {
            T::zero()
        }
    });
    Ok(Graph {
        weights,
        kind: GraphKind::PointwiseThreshold {
            threshold: threshold.as_f64(),
            eps: eps.as_f64(),
            shift,
        },
    })
}

#[derive(Debug, Clone)]
pub struct PointwiseGraphs<T> {
    pub minus: Graph<T>,
    pub base: Graph<T>,
    pub plus: Graph<T>,
}

pub fn pointwise_graphs<T: Scalar>(
    x_train: &Dataset<T>,
    point: &[T],
    threshold: T,
    eps: T,
    metric: MetricKind,
) -> Result<PointwiseGraphs<T>> {
    let train = pairwise_distances(x_train, metric);
    let aug = augmented_distances(&train, x_train, point)?;
    Ok(PointwiseGraphs {
        minus: pointwise_graph(&aug, threshold, eps, Shift::Minus)?,
        base: pointwise_graph(&aug, threshold, eps, Shift::Zero)?,
        plus: pointwise_graph(&aug, threshold, eps, Shift::Plus)?,
    })
}

/// Weights `exp(-γ·D²)` off the diagonal.
pub fn gaussian_graph<T: Scalar>(d: &DistanceMatrix<T>, gamma: T) -> Result<Graph<T>> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    let n = d.n();
    let weights = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            T::zero()
        } else {
            let r = d.get(i, j);
            (-gamma * r * r).exp()
        }
    });
    Ok(Graph {
        weights,
        kind: GraphKind::Gaussian {
            gamma: gamma.as_f64(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianVariant {
    #[default]
    Unnormalized,
    Scaled,
}

impl std::str::FromStr for LaplacianVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unnormalized" | "combinatorial" => Ok(LaplacianVariant::Unnormalized),
            "scaled" | "normalized" => Ok(LaplacianVariant::Scaled),
            other => Err(Error::InvalidArgument(format!(
                "unknown laplacian variant '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Laplacian<T> {
    matrix: Matrix<T>,
    variant: LaplacianVariant,
    degrees: Vec<T>,
    source: GraphKind,
}

impl<T: Scalar> Laplacian<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn variant(&self) -> LaplacianVariant {
        self.variant
    }

    pub fn degrees(&self) -> &[T] {
        &self.degrees
    }

    pub fn source(&self) -> GraphKind {
        self.source
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    /// Unit-norm spanning vector of the trivial null direction: the ones
    /// vector for `D - A`, `D^{1/2}·1` for the scaled variant. `None` when
    /// that vector vanishes (scaled Laplacian of an edgeless graph).
    pub fn null_anchor(&self) -> Option<Vec<T>> {
        let raw: Vec<T> = match self.variant {
            LaplacianVariant::Unnormalized => vec![T::one(); self.n()],
            LaplacianVariant::Scaled => self.degrees.iter().map(|d| d.sqrt()).collect(),
        };
        let norm = crate::linalg::norm(&raw);
        (norm > T::zero()).then(|| raw.iter().map(|&v| v / norm).collect())
    }
}

/// `D - A`, or `I - D^{-1/2} A D^{-1/2}` with identity rows for isolated
/// vertices.
pub fn laplacian<T: Scalar>(g: &Graph<T>, variant: LaplacianVariant) -> Laplacian<T> {
    let n = g.n();
    let degrees = g.degrees();
    let matrix = match variant {
        LaplacianVariant::Unnormalized => {
            Matrix::from_fn(
                n,
                n,
                |i, j| {
                    if i == j {
                        degrees[i]
                    } else {
                        -g.weight(i, j)
                    }
                },
            )
        }
        LaplacianVariant::Scaled => {
            let inv_sqrt: Vec<T> = degrees
                .iter()
                .map(|&d| {
                    if d > T::zero() {
                        T::one() / d.sqrt()
                    } else {
                        T::zero()
                    }
                })
                .collect();
            Matrix::from_fn(n, n, |i, j| {
                if i == j {
                    T::one()
                } else {
                    -g.weight(i, j) * inv_sqrt[i] * inv_sqrt[j]
                }
            })
        }
    };
    Laplacian {
        matrix,
        variant,
        degrees,
        source: g.kind(),
    }
}

/// Largest neighbour count. Only defined for 0/1 threshold graphs.
pub fn max_degree<T: Scalar>(g: &Graph<T>) -> Result<usize> {
    if g.kind().is_weighted() {
        return Err(Error::WeightedGraph);
    }
    Ok((0..g.n())
        .map(|i| (0..g.n()).filter(|&j| g.has_edge(i, j)).count())
        .max()
        .unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::rng::SplitMix64;

    fn line(xs: &[f64]) -> Dataset<f64> {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows(&rows, None, "line").unwrap()
    }

    fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset<f64> {
        let mut rng = SplitMix64::new(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        Dataset::from_rows(&rows, None, "rand").unwrap()
    }

    #[test]
    fn three_four_five() {
        let ds = Dataset::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]], None, "t").unwrap();
        assert_eq!(pairwise_distances(&ds, MetricKind::L2).get(0, 1), 5.0);
        assert_eq!(pairwise_distances(&ds, MetricKind::LInf).get(0, 1), 4.0);
        assert_eq!(pairwise_distances(&ds, MetricKind::L1).get(1, 0), 7.0);
    }

    #[test]
    fn distances_match_naive_loop() {
        let ds = random_dataset(10, 5, 11);
        let d = pairwise_distances(&ds, MetricKind::L2);
        for i in 0..10 {
            for j in 0..10 {
                let mut s = 0.0;
                for k in 0..5 {
                    let t = ds.point(i)[k] - ds.point(j)[k];
                    s += t * t;
                }
                assert!((d.get(i, j) - s.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn threshold_examples() {
        let d = pairwise_distances(&line(&[0.0, 1.0, 10.0, 11.0]), MetricKind::L2);
        let g = threshold_graph(&d, 2.0).unwrap();
        assert_eq!(g.edge_list(), "0 1 1\n2 3 1\n");
        assert_eq!(threshold_graph(&d, 0.0).unwrap().edge_count(), 0);
        assert_eq!(threshold_graph(&d, d.max_entry()).unwrap().edge_count(), 6);
        assert!(threshold_graph(&d, -1.0).is_err());
    }

    #[test]
    fn shifted_nesting_random() {
        for seed in 0..20 {
            let d = pairwise_distances(&random_dataset(12, 2, seed), MetricKind::L2);
            let s = shifted_graphs(&d, 0.8, 0.1).unwrap();
            assert!(s.minus.is_subgraph_of(&s.base));
            assert!(s.base.is_subgraph_of(&s.plus));
            assert!(!s.clipped);
        }
        let d = pairwise_distances(&random_dataset(5, 2, 1), MetricKind::L2);
        let s = shifted_graphs(&d, 0.5, 0.0).unwrap();
        assert!(s.minus.same_edges(&s.plus));
        assert!(shifted_graphs(&d, 0.1, 0.1).unwrap().clipped);
    }

    #[test]
    fn pointwise_far_point_is_isolated() {
        let ds = line(&[0.0, 1.0, 2.0]);
        let g = pointwise_graphs(&ds, &[100.0], 1.5, 0.5, MetricKind::L2).unwrap();
        for graph in [&g.minus, &g.base, &g.plus] {
            assert!((1..4).all(|j| !graph.has_edge(0, j)));
            assert!(graph.has_edge(1, 2));
        }
    }

    #[test]
    fn pointwise_duplicate_copies_neighbourhood() {
        let ds = line(&[0.0, 1.0, 5.0]);
        let g = pointwise_graphs(&ds, &[0.0], 1.0, 0.0, MetricKind::L2)
            .unwrap()
            .base;
        // node 0 duplicates training node 1 (coordinate 0.0)
        for j in 2..4 {
            assert_eq!(g.has_edge(0, j), g.has_edge(1, j));
        }
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn pointwise_shift_only_touches_node_zero() {
        let ds = line(&[0.0, 1.9, 4.0]);
        let g = pointwise_graphs(&ds, &[2.5], 2.0, 0.6, MetricKind::L2).unwrap();
        // training pair (0, 1.9) at 1.9 <= 2 in all three; pair (1.9, 4) at 2.1 never
        for graph in [&g.minus, &g.base, &g.plus] {
            assert!(graph.has_edge(1, 2));
            assert!(!graph.has_edge(2, 3));
        }
        // node 0 to coordinate 0.0 at distance 2.5: only in the +ε graph
        assert!(!g.minus.has_edge(0, 1) && !g.base.has_edge(0, 1) && g.plus.has_edge(0, 1));
        // to 1.9 at 0.6 in all; to 4.0 at 1.5 only once the cutoff reaches 2
        assert!(g.minus.has_edge(0, 2) && g.base.has_edge(0, 2));
        assert!(!g.minus.has_edge(0, 3) && g.base.has_edge(0, 3) && g.plus.has_edge(0, 3));
    }

    #[test]
    fn gaussian_weights() {
        let ds = line(&[0.0, 0.0, 3.0, 5.0]);
        let g = gaussian_graph(&pairwise_distances(&ds, MetricKind::L2), 0.1).unwrap();
        assert_eq!(g.weight(0, 1), 1.0);
        assert!((g.weight(0, 2) - (-0.9f64).exp()).abs() < 1e-15);
        assert!((g.weight(0, 2) - 0.40657).abs() < 1e-5);
        assert!(g.weight(0, 3) < g.weight(0, 2));
        assert!(g.weight(0, 0) == 0.0);
        assert!(max_degree(&g).is_err());
    }

    #[test]
    fn path_and_scaled_laplacians() {
        let p3 = pairwise_distances(&line(&[0.0, 1.0, 2.0]), MetricKind::L2);
        let l = laplacian(
            &threshold_graph(&p3, 1.0).unwrap(),
            LaplacianVariant::Unnormalized,
        );
        assert_eq!(
            l.matrix().to_rows(),
            vec![
                vec![1.0, -1.0, 0.0],
                vec![-1.0, 2.0, -1.0],
                vec![0.0, -1.0, 1.0]
            ]
        );

        let d = pairwise_distances(&line(&[0.0, 1.0, 10.0]), MetricKind::L2);
        let s = laplacian(&threshold_graph(&d, 1.0).unwrap(), LaplacianVariant::Scaled);
        assert_eq!(
            s.matrix().to_rows(),
            vec![
                vec![1.0, -1.0, 0.0],
                vec![-1.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0]
            ]
        );
    }

    #[test]
    fn quadratic_form_matches_edge_sum() {
        let mut rng = SplitMix64::new(5);
        for seed in 0..10 {
            let ds = random_dataset(9, 3, 100 + seed);
            let g = gaussian_graph(&pairwise_distances(&ds, MetricKind::L2), 0.7).unwrap();
            let l = laplacian(&g, LaplacianVariant::Unnormalized);
            let ones = vec![1.0; 9];
            assert!(l
                .matrix()
                .mat_vec(&ones)
                .iter()
                .all(|v| v.abs() <= 1e-12 * 9.0));
            for _ in 0..20 {
                let v = rng.normal_vec(9);
                let mut oracle = 0.0;
                for i in 0..9 {
                    for j in (i + 1)..9 {
                        oracle += g.weight(i, j) * (v[i] - v[j]).powi(2);
                    }
                }
                let q = dot(&v, &l.matrix().mat_vec(&v));
                assert!((q - oracle).abs() < 1e-10 * (1.0 + oracle.abs()));
            }
        }
    }

    #[test]
    fn max_degree_examples() {
        let star = Matrix::from_fn(5, 5, |i, j| {
            if i != j && (i == 0 || j == 0) {
                1.0
            } else {
                0.0
            }
        });
        let g = Graph::from_weights(star, GraphKind::Threshold { threshold: 1.0 }).unwrap();
        assert_eq!(max_degree(&g).unwrap(), 4);

        let d = pairwise_distances(&line(&[0.0, 1.0, 2.0, 3.0, 4.0]), MetricKind::L2);
        assert_eq!(max_degree(&threshold_graph(&d, 0.0).unwrap()).unwrap(), 0);
        assert_eq!(max_degree(&threshold_graph(&d, 3.0).unwrap()).unwrap(), 4);
    }

    #[test]
    fn components_and_keys() {
        let d = pairwise_distances(&line(&[0.0, 1.0, 10.0, 11.0, 30.0]), MetricKind::L2);
        let g = threshold_graph(&d, 2.0).unwrap();
        assert_eq!(g.connected_components(), vec![0, 0, 1, 1, 2]);
        let h = threshold_graph(&d, 2.5).unwrap();
        assert_eq!(g.edge_key(), h.edge_key());
        assert_ne!(g.edge_key(), threshold_graph(&d, 9.5).unwrap().edge_key());
    }
}
